//! Monte Carlo experiments over random channel realizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_channel, ChannelGenConfig, MultipathChannel};
use crate::dam_generic::{make_delay_plan_with, zf_time_matrices, UncoveredPolicy};
use crate::dam_ofdm::{cp_overhead, effective_se, solve_joint_beamforming, OfdmConfig};
use crate::dam_sc::{sc_spectral_efficiency, transmit_stream, zf_beamformers, zf_snr_closed_form};
use crate::error::{Error, Result};
use crate::rng::trial_rng;

use super::baseline::ofdm_baseline;
use super::ber::{ber_dam_ofdm, ber_from_snrs};
use super::papr::{dam_papr_samples, ofdm_papr_samples, papr_blocks, random_symbols, PaprSettings};
use super::qam::Qam;

/// Offset between the channel seed and the seed of data symbols, so that the
/// two streams never coincide.
const DATA_SEED_OFFSET: u64 = 0x5eed_da7a;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ConventionalOfdm,
    DamOfdm,
    DamSc,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::ConventionalOfdm => "conventional_ofdm",
            Scheme::DamOfdm => "dam_ofdm",
            Scheme::DamSc => "dam_sc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Trials on the rayon pool, reduced in trial order.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelGenConfig,
    pub power_dbm: f64,
    pub noise_dbm_per_hz: f64,
    /// Mean large-scale gain `E[beta]` in dB. The channel generator
    /// normalizes the average channel energy, so path loss enters here.
    #[serde(default)]
    pub large_scale_gain_db: f64,
    /// Overrides `P E[beta] / sigma^2` when set.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub coherence_time_s: f64,
    pub trials: usize,
    pub scheme: Scheme,
    /// Ignored by single-carrier DAM except for the PAPR block length.
    pub ofdm: OfdmConfig,
    pub l_prime: usize,
    pub n_span_target: usize,
    #[serde(default)]
    pub uncovered: UncoveredPolicy,
    /// QAM order of the analytic BER; no BER when absent.
    #[serde(default)]
    pub ber_order: Option<usize>,
    #[serde(default)]
    pub papr: Option<PaprSettings>,
}

impl ExperimentConfig {
    /// `sigma^2 = N_0 B` in mW.
    pub fn noise_power_mw(&self) -> f64 {
        10f64.powf(self.noise_dbm_per_hz / 10.0) * self.channel.bandwidth_hz
    }

    /// Linear `P E[beta] / sigma^2`.
    pub fn snr(&self) -> f64 {
        match self.snr_db {
            Some(db) => 10f64.powf(db / 10.0),
            None => {
                10f64.powf((self.power_dbm + self.large_scale_gain_db) / 10.0) / self.noise_power_mw()
            }
        }
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * self.snr().log10()
    }

    /// Samples per coherence block, `n_c = B T_c`.
    pub fn coherence_samples(&self) -> f64 {
        self.channel.bandwidth_hz * self.coherence_time_s
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.coherence_time_s > 0.0) {
            return Err(Error::InvalidConfig("coherence time must be positive".into()));
        }
        if !self.snr().is_finite() {
            return Err(Error::InvalidConfig("SNR is not finite".into()));
        }
        if self.ofdm.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if let Some(order) = self.ber_order {
            Qam::new(order)?;
        }
        if let Some(p) = &self.papr {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub scheme: Scheme,
    pub trials: usize,
    /// Mean spectral efficiency in bits/s/Hz.
    pub avg_se: f64,
    /// Standard error of `avg_se` across trials.
    pub se_stderr: f64,
    /// Per-subcarrier SNRs averaged over trials (one entry for single
    /// carrier).
    pub gammas: Vec<f64>,
    pub ber: Option<f64>,
    /// Block PAPRs in dB from all trials, in trial order.
    pub papr_samples: Vec<f64>,
    /// Mean fraction of samples not carrying data (CP and guard).
    pub overhead: f64,
    /// Trials whose beamformers came from the truncated approximation.
    pub approximate_trials: usize,
}

#[derive(Debug, Clone)]
struct TrialOutcome {
    se: f64,
    gammas: Vec<f64>,
    ber: Option<f64>,
    papr: Vec<f64>,
    overhead: f64,
    approximate: bool,
}

/// Runs all trials on the rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<LinkReport> {
    run_experiment_with(cfg, Execution::Parallel)
}

/// Every trial draws its channel from stream `trial` of the channel seed and
/// its data from a separate seed, so reports do not depend on scheduling.
pub fn run_experiment_with(cfg: &ExperimentConfig, exec: Execution) -> Result<LinkReport> {
    cfg.validate()?;
    let trials = cfg.trials as u64;
    let outcomes: Vec<TrialOutcome> = match exec {
        Execution::Parallel => (0..trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<_>>()?,
        Execution::Sequential => (0..trials).map(|t| run_trial(cfg, t)).collect::<Result<_>>()?,
    };
    Ok(reduce(cfg.scheme, outcomes))
}

fn reduce(scheme: Scheme, outcomes: Vec<TrialOutcome>) -> LinkReport {
    let n = outcomes.len() as f64;
    let avg_se = outcomes.iter().map(|o| o.se).sum::<f64>() / n;
    let se_stderr = if outcomes.len() > 1 {
        let var = outcomes.iter().map(|o| (o.se - avg_se).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let width = outcomes[0].gammas.len();
    let mut gammas = vec![0.0; width];
    for o in &outcomes {
        for (g, x) in gammas.iter_mut().zip(&o.gammas) {
            *g += x / n;
        }
    }
    let ber = outcomes
        .iter()
        .map(|o| o.ber)
        .sum::<Option<f64>>()
        .map(|b| b / n);
    LinkReport {
        scheme,
        trials: outcomes.len(),
        avg_se,
        se_stderr,
        gammas,
        ber,
        overhead: outcomes.iter().map(|o| o.overhead).sum::<f64>() / n,
        approximate_trials: outcomes.iter().filter(|o| o.approximate).count(),
        papr_samples: outcomes.into_iter().flat_map(|o| o.papr).collect(),
    }
}

/// Channel realization `trial` of an experiment.
pub fn trial_channel(cfg: &ExperimentConfig, trial: u64) -> Result<MultipathChannel> {
    generate_channel(&cfg.channel, trial)
}

fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<TrialOutcome> {
    let ch = trial_channel(cfg, trial)?;
    let power = cfg.snr();
    let n_c = cfg.coherence_samples();
    let n_tilde = cfg.channel.max_delay_bin();
    let mut data_rng = trial_rng(cfg.channel.seed.wrapping_add(DATA_SEED_OFFSET), trial);
    match cfg.scheme {
        Scheme::ConventionalOfdm => {
            let ofdm = cfg.ofdm;
            ofdm.validate(ch.n_span())?;
            let base = ofdm_baseline(&ch, ofdm.k, power, 1.0)?;
            let ber = cfg.ber_order.map(|o| ber_from_snrs(&base.gamma, ofdm.n_cp, o)).transpose()?;
            let papr = match &cfg.papr {
                Some(p) => ofdm_papr_samples(&base.u, &ofdm, p, &mut data_rng)?,
                None => Vec::new(),
            };
            Ok(TrialOutcome {
                se: effective_se(&base.gamma, ofdm.n_cp),
                ber,
                papr,
                overhead: cp_overhead(ofdm.n_cp, ofdm.k),
                approximate: false,
                gammas: base.gamma,
            })
        }
        Scheme::DamOfdm => {
            let ofdm = cfg.ofdm;
            let plan = make_delay_plan_with(&ch, cfg.l_prime, cfg.n_span_target, cfg.uncovered)?;
            ofdm.validate(plan.n_span_target)?;
            let bases = zf_time_matrices(&ch, &plan)?;
            let sol = solve_joint_beamforming(&ch, &plan, &bases, power, 1.0, ofdm.k)?;
            // CP-free transmission keeps only a guard per coherence block
            let guard = if ofdm.n_cp == 0 { n_tilde as f64 / n_c } else { 0.0 };
            let useful = (1.0 - cp_overhead(ofdm.n_cp, ofdm.k)) * (1.0 - guard);
            let ber = cfg.ber_order.map(|o| ber_dam_ofdm(&sol.gamma, &plan, ofdm.n_cp, o)).transpose()?;
            let papr = match &cfg.papr {
                Some(p) => dam_papr_samples(&plan, &sol.time, &sol.freq.u, &ofdm, p, &mut data_rng)?,
                None => Vec::new(),
            };
            Ok(TrialOutcome {
                se: effective_se(&sol.gamma, ofdm.n_cp) * (1.0 - guard),
                ber,
                papr,
                overhead: 1.0 - useful,
                approximate: sol.approximate,
                gammas: sol.gamma,
            })
        }
        Scheme::DamSc => {
            let gamma = zf_snr_closed_form(&ch, power, 1.0)?;
            let guard = 2 * n_tilde;
            let ber = cfg.ber_order.map(|o| Qam::new(o).map(|q| q.ber_awgn(gamma))).transpose()?;
            let papr = match &cfg.papr {
                Some(p) => {
                    p.validate()?;
                    let bf = zf_beamformers(&ch, power)?;
                    let qam = Qam::new(p.order)?;
                    let block = cfg.ofdm.k;
                    let lead = bf.max_kappa().div_ceil(block);
                    let s = random_symbols(&qam, 1, (p.frames + lead) * block, &mut data_rng);
                    let q = transmit_stream(&bf, s.row(0).transpose().as_slice());
                    papr_blocks(&q, lead * block, block, p.frames)?
                }
                None => Vec::new(),
            };
            Ok(TrialOutcome {
                se: sc_spectral_efficiency(gamma, guard, n_c),
                gammas: vec![gamma],
                ber,
                papr,
                overhead: guard as f64 / n_c,
                approximate: false,
            })
        }
    }
}
