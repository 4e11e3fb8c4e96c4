//! Subcommand implementations. Each writes CSV files into the output
//! directory and returns their names; the caller writes the manifest.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use dam_core::dam_sc::{simulate_sc_link, zf_beamformers};
use dam_core::evaluation::{papr_ccdf, random_symbols, run_experiment_with, trial_channel, Execution, Qam, Scheme};
use dam_core::rng::trial_rng;
use dam_core::validation::{run_validation, ValidationHooks, ValidationReport};

use crate::config::{ResolvedRun, SweepSpec};
use crate::UsageError;

/// Largest ISI-to-signal ratio accepted from a noiseless single-carrier
/// link (-100 dB).
const SC_ISI_LIMIT: f64 = 1e-10;

fn write_csv(dir: &Path, name: String, header: &str, body: &str) -> Result<String> {
    let path = dir.join(&name);
    std::fs::write(&path, format!("{header}\n{body}")).with_context(|| format!("writing {}", path.display()))?;
    Ok(name)
}

fn sweep(run: &ResolvedRun, command: &str) -> Result<SweepSpec> {
    match &run.sweep {
        Some(s) if !s.values.is_empty() => Ok(s.clone()),
        Some(_) => bail!(UsageError(format!("{command}: [sweep] values is empty"))),
        None => bail!(UsageError(format!("{command}: a [sweep] table is required"))),
    }
}

/// Average spectral efficiency per curve over the sweep values. Columns:
/// `sweep_variable` (antennas or subcarriers), `mean` and `stderr` in
/// bits/s/Hz.
pub fn se_sweep(run: &ResolvedRun, out: &Path, exec: Execution) -> Result<Vec<String>> {
    let spec = sweep(run, "se-sweep")?;
    let mut outputs = Vec::new();
    for curve in &run.curves {
        let mut body = String::new();
        for &value in &spec.values {
            let mut cfg = curve.experiment.clone();
            spec.variable.apply(&mut cfg, value);
            let report = run_experiment_with(&cfg, exec)
                .with_context(|| format!("curve {} at {value}", curve.label))?;
            writeln!(body, "{value},{},{}", report.avg_se, report.se_stderr)?;
        }
        outputs.push(write_csv(out, format!("se_sweep_{}.csv", curve.label), "sweep_variable,mean,stderr", &body)?);
    }
    Ok(outputs)
}

/// Analytic BER per curve. Columns: `snr_db` (P E[beta] / sigma^2 in dB)
/// and `ber`.
pub fn ber_sweep(run: &ResolvedRun, out: &Path, exec: Execution) -> Result<Vec<String>> {
    let spec = match &run.ber {
        Some(b) if !b.snr_db.is_empty() => b.clone(),
        Some(_) => bail!(UsageError("ber-sweep: [ber] snr_db is empty".into())),
        None => bail!(UsageError("ber-sweep: a [ber] table is required".into())),
    };
    let mut outputs = Vec::new();
    for curve in &run.curves {
        let mut body = String::new();
        for &snr in &spec.snr_db {
            let mut cfg = curve.experiment.clone();
            cfg.snr_db = Some(snr);
            cfg.ber_order = Some(spec.order);
            let report = run_experiment_with(&cfg, exec)
                .with_context(|| format!("curve {} at {snr} dB", curve.label))?;
            let ber = report.ber.context("experiment returned no BER")?;
            writeln!(body, "{snr},{ber}")?;
        }
        outputs.push(write_csv(out, format!("ber_sweep_{}.csv", curve.label), "snr_db,ber", &body)?);
    }
    Ok(outputs)
}

/// Per-antenna block PAPR CCDF per curve. Columns: `threshold_db` and
/// `ccdf` (fraction of blocks strictly above the threshold).
pub fn papr(run: &ResolvedRun, out: &Path, exec: Execution) -> Result<Vec<String>> {
    let spec = match &run.papr {
        Some(p) if !p.thresholds_db.is_empty() => p.clone(),
        Some(_) => bail!(UsageError("papr: [papr] thresholds_db is empty".into())),
        None => bail!(UsageError("papr: a [papr] table is required".into())),
    };
    let settings = spec.settings();
    settings.validate().context("papr settings")?;
    let mut outputs = Vec::new();
    for curve in &run.curves {
        let mut cfg = curve.experiment.clone();
        cfg.papr = Some(settings);
        let report = run_experiment_with(&cfg, exec).with_context(|| format!("curve {}", curve.label))?;
        if report.papr_samples.is_empty() {
            bail!("curve {}: no non-zero blocks to measure PAPR on", curve.label);
        }
        let ccdf = papr_ccdf(&report.papr_samples, &spec.thresholds_db);
        let mut body = String::new();
        for (t, c) in spec.thresholds_db.iter().zip(ccdf) {
            writeln!(body, "{t},{c}")?;
        }
        outputs.push(write_csv(out, format!("papr_{}.csv", curve.label), "threshold_db,ccdf", &body)?);
    }
    Ok(outputs)
}

/// Single-carrier DAM with path-based ZF beamforming. Columns:
/// `sweep_variable`, `mean` and `stderr` of the spectral efficiency, and
/// `snr_db`, the mean received SNR. Every point first checks that the
/// first realization is ISI-free.
pub fn single_carrier(run: &ResolvedRun, out: &Path, exec: Execution) -> Result<Vec<String>> {
    let spec = sweep(run, "single-carrier")?;
    let mut outputs = Vec::new();
    for curve in &run.curves {
        let mut body = String::new();
        for &value in &spec.values {
            let mut cfg = curve.experiment.clone();
            cfg.scheme = Scheme::DamSc;
            spec.variable.apply(&mut cfg, value);
            let ch = trial_channel(&cfg, 0)?;
            let bf = zf_beamformers(&ch, 1.0).with_context(|| format!("curve {} at {value}", curve.label))?;
            let mut rng = trial_rng(cfg.channel.seed, 0);
            let symbols: Vec<_> = random_symbols(&Qam::new(4)?, 1, 4 * ch.n_max() + 64, &mut rng).iter().copied().collect();
            let link = simulate_sc_link(&ch, &bf, &symbols, 0.0, 0, &mut rng)?;
            if link.isi_to_signal() > SC_ISI_LIMIT {
                bail!(
                    "invariant sc_isi_free violated: curve {} at {value}, ISI/signal {:.3e}",
                    curve.label,
                    link.isi_to_signal()
                );
            }
            let report = run_experiment_with(&cfg, exec)
                .with_context(|| format!("curve {} at {value}", curve.label))?;
            let snr_db = 10.0 * report.gammas[0].log10();
            writeln!(body, "{value},{},{},{snr_db}", report.avg_se, report.se_stderr)?;
        }
        outputs.push(write_csv(
            out,
            format!("single_carrier_{}.csv", curve.label),
            "sweep_variable,mean,stderr,snr_db",
            &body,
        )?);
    }
    Ok(outputs)
}

/// Runs the invariant suite; the report is printed and, when `out` is
/// given, saved as `validate.txt`.
pub fn validate(seed: u64, zf_perturbation: f64, out: Option<&Path>) -> Result<(ValidationReport, Vec<String>)> {
    let report = run_validation(seed, &ValidationHooks { zf_perturbation });
    let mut outputs = Vec::new();
    if let Some(dir) = out {
        let path = dir.join("validate.txt");
        std::fs::write(&path, format!("{report}\n")).with_context(|| format!("writing {}", path.display()))?;
        outputs.push("validate.txt".to_string());
    }
    Ok((report, outputs))
}
