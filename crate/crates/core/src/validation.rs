//! Randomized self-check of the main invariants on small instances.
//!
//! Every check draws its instances from the validation seed, so a report is
//! reproducible from the seed it prints.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{DuplicateDelays, MultipathChannel};
use crate::dam_generic::{
    effective_taps, make_delay_plan, make_delay_plan_with, precode_time, zf_time_matrices, DelayPlan,
    TimeDomainBeamformers, UncoveredPolicy,
};
use crate::dam_ofdm::{
    dam_precode_time, e_vector, g_vector, ofdm_modulate, simulate_ofdm_link, solve_joint_beamforming, stacked_v,
    transmit_power_analytic, transmit_power_exact, water_fill, FactorizationCase, LinkSimConfig, OfdmConfig,
};
use crate::dam_sc::{simulate_sc_link, zf_beamformers, zf_snr_closed_form, PathBeamformers};
use crate::error::Result;
use crate::evaluation::{ofdm_baseline, qam_ber_awgn};
use crate::numerics::{max_abs, orth_complement, unitary_dft, CMatrix, CVector, C64};
use crate::rng::{complex_normal, trial_rng};

/// Fault injection for exercising the validator itself.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ValidationHooks {
    /// Relative size of a random perturbation added to every zero-forcing
    /// basis and single-carrier ZF beamformer.
    pub zf_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "validation seed: {}", self.seed)?;
        for c in &self.checks {
            writeln!(f, "{} {:<22} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.failed().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

const INSTANCES: u64 = 4;

/// Runs all checks. Errors raised inside a check count as failures of that
/// check.
pub fn run_validation(seed: u64, hooks: &ValidationHooks) -> ValidationReport {
    type Check = fn(&mut Ctx) -> Result<(bool, String)>;
    let checks: [(&'static str, Check); 12] = [
        ("dft_round_trip", dft_round_trip),
        ("orth_complement", orth_complement_check),
        ("zf_residual", zf_residual),
        ("sc_isi_free", sc_isi_free),
        ("tap_model", tap_model),
        ("g_vector_identity", g_vector_identity),
        ("water_filling_kkt", water_filling_kkt),
        ("power_budget", power_budget),
        ("transmit_power", transmit_power),
        ("link_snr", link_snr),
        ("ofdm_reduction", ofdm_reduction),
        ("qam_ber", qam_ber),
    ];
    let checks = checks
        .iter()
        .enumerate()
        .map(|(i, (name, check))| {
            let mut ctx = Ctx {
                rng: trial_rng(seed, i as u64),
                hooks: *hooks,
            };
            let (passed, detail) = match check(&mut ctx) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            CheckResult { name, passed, detail }
        })
        .collect();
    ValidationReport { seed, checks }
}

struct Ctx {
    rng: ChaCha8Rng,
    hooks: ValidationHooks,
}

impl Ctx {
    fn channel(&mut self, m_t: usize, max_paths: usize) -> Result<MultipathChannel> {
        let l = self.rng.random_range(2..=max_paths);
        let mut delays: Vec<usize> = Vec::new();
        while delays.len() < l {
            let d = self.rng.random_range(0..12);
            if !delays.contains(&d) {
                delays.push(d);
            }
        }
        let gains = delays
            .into_iter()
            .map(|d| (d, CVector::from_fn(m_t, |_, _| complex_normal(&mut self.rng, 1.0))))
            .collect();
        MultipathChannel::from_gains(m_t, 1.0, gains, DuplicateDelays::Reject)
    }

    fn zf(&mut self, ch: &MultipathChannel, plan: &DelayPlan) -> Result<TimeDomainBeamformers> {
        let mut tbf = zf_time_matrices(ch, plan)?;
        let eps = self.hooks.zf_perturbation;
        if eps != 0.0 {
            for b in tbf.bases.iter_mut() {
                *b += CMatrix::from_fn(b.nrows(), b.ncols(), |_, _| complex_normal(&mut self.rng, eps * eps));
            }
        }
        Ok(tbf)
    }

    fn sc_zf(&mut self, ch: &MultipathChannel, power: f64) -> Result<PathBeamformers> {
        let mut bf = zf_beamformers(ch, power)?;
        let eps = self.hooks.zf_perturbation;
        if eps != 0.0 {
            for v in bf.vectors.iter_mut() {
                let n = v.norm();
                *v += CVector::from_fn(v.len(), |_, _| complex_normal(&mut self.rng, (eps * n).powi(2)));
            }
        }
        Ok(bf)
    }

    fn cvec(&mut self, n: usize) -> CVector {
        CVector::from_fn(n, |_, _| complex_normal(&mut self.rng, 1.0))
    }

    fn cmat(&mut self, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| complex_normal(&mut self.rng, 1.0))
    }
}

fn dft_round_trip(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for n in [1, 7, 64] {
        let x: Vec<C64> = ctx.cvec(n).iter().copied().collect();
        let y = unitary_dft(&x, false)?;
        let back = unitary_dft(&y, true)?;
        let ex: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ey: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        worst = worst.max((ex - ey).abs() / ex);
        for (a, b) in x.iter().zip(&back) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok((worst <= 1e-12, format!("max error {worst:.2e}")))
}

fn orth_complement_check(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let h = ctx.cmat(8, 3);
        let q = orth_complement(&h)?;
        worst = worst.max(max_abs(&(h.adjoint() * &q)));
        let eye = CMatrix::identity(q.ncols(), q.ncols());
        worst = worst.max(max_abs(&(q.adjoint() * &q - eye)));
    }
    Ok((worst <= 1e-12, format!("max residual {worst:.2e}")))
}

fn zf_residual(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(8, 4)?;
        let plan = make_delay_plan(&ch, ch.num_paths(), 0)?;
        let tbf = ctx.zf(&ch, &plan)?;
        for (f, outside) in tbf.filters().iter().zip(&plan.outside_sets) {
            for &l in outside {
                let h = ch.gain(l);
                worst = worst.max((h.adjoint() * f).norm() / h.norm());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max |h_l^H F| / |h_l| = {worst:.2e}")))
}

fn sc_isi_free(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst_isi = 0.0_f64;
    let mut worst_snr = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(8, 4)?;
        let bf = ctx.sc_zf(&ch, 1.0)?;
        let symbols: Vec<C64> = (0..400).map(|_| complex_normal(&mut ctx.rng, 1.0)).collect();
        let rep = simulate_sc_link(&ch, &bf, &symbols, 0.0, 0, &mut ctx.rng)?;
        worst_isi = worst_isi.max(rep.isi_to_signal());
        let closed = zf_snr_closed_form(&ch, 1.0, 0.5)?;
        // unit-energy symbols: SNR is the received amplitude squared over noise
        let simulated = rep.desired_amplitude.norm_sqr() / 0.5;
        worst_snr = worst_snr.max((simulated - closed).abs() / closed);
    }
    let isi_db = 10.0 * worst_isi.max(1e-300).log10();
    Ok((
        isi_db <= -100.0 && worst_snr <= 1e-9,
        format!("worst ISI/signal {isi_db:.1} dB, SNR rel. error {worst_snr:.2e}"),
    ))
}

fn tap_model(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(8, 4)?;
        let lp = ctx.rng.random_range(1..=ch.num_paths());
        let target = ctx.rng.random_range(0..=ch.n_span());
        let Ok(plan) = make_delay_plan_with(&ch, lp, target, UncoveredPolicy::Discard) else {
            continue;
        };
        let mut tbf = ctx.zf(&ch, &plan)?;
        for x in tbf.inner.iter_mut() {
            *x = ctx.cmat(x.nrows(), x.ncols());
        }
        let n = 30;
        let d = ctx.cmat(ch.m_t(), n);
        let y = ch.convolve(&precode_time(&d, &plan, &tbf)?)?;
        let taps = effective_taps(&ch, &plan, &tbf);
        let shift = plan.n_max - plan.n_span_target;
        let scale = y.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        for (i, yi) in y.iter().enumerate() {
            let mut model = C64::new(0.0, 0.0);
            for (t, tap) in taps.iter().enumerate() {
                if let Some(src) = i.checked_sub(shift + t).filter(|&s| s < n) {
                    model += (tap * d.column(src))[0];
                }
            }
            worst = worst.max((yi - model).norm() / scale);
        }
    }
    Ok((worst <= 1e-9, format!("max deviation from convolution {worst:.2e}")))
}

fn g_vector_identity(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(8, 4)?;
        let lp = ctx.rng.random_range(1..=ch.num_paths());
        let Ok(plan) = make_delay_plan_with(&ch, lp, ch.n_span() / 2, UncoveredPolicy::Discard) else {
            continue;
        };
        let tbf = ctx.zf(&ch, &plan)?;
        let big_k = 16;
        for k in 0..big_k {
            let g = g_vector(&ch, &plan, &tbf, k, big_k, 0.7);
            let ve = stacked_v(&tbf, &plan, k, big_k) * e_vector(&ch, &plan, k, big_k, 0.7);
            worst = worst.max((&g - ve).norm() / g.norm().max(1e-300));
        }
    }
    Ok((worst <= 1e-10, format!("max |g_k - V_k e_k| / |g_k| = {worst:.2e}")))
}

fn water_filling_kkt(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let gains: Vec<f64> = (0..16).map(|_| ctx.rng.random_range(0.01..10.0)).collect();
        let total = ctx.rng.random_range(0.1..20.0);
        let (mu, level) = water_fill(&gains, total);
        worst = worst.max((mu.iter().sum::<f64>() - total).abs() / total);
        for (m, g) in mu.iter().zip(&gains) {
            let r = if *m > 0.0 { (m + 1.0 / g - level).abs() } else { (level - 1.0 / g).max(0.0) };
            worst = worst.max(r / level);
        }
    }
    Ok((worst <= 1e-9, format!("max KKT residual {worst:.2e}")))
}

fn power_budget(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(8, 3)?;
        let plan = make_delay_plan(&ch, ch.num_paths(), 0)?;
        let tbf = ctx.zf(&ch, &plan)?;
        for big_k in [4, 16] {
            let sol = solve_joint_beamforming(&ch, &plan, &tbf, 2.0, 0.5, big_k)?;
            worst = worst.max((sol.freq.mu.iter().sum::<f64>() - 2.0 * big_k as f64).abs() / (2.0 * big_k as f64));
            if sol.case != FactorizationCase::Truncated {
                let p = transmit_power_analytic(&sol.time, &sol.freq.u, &plan);
                worst = worst.max((p - 2.0).abs() / 2.0);
            }
        }
    }
    Ok((worst <= 1e-9, format!("max relative budget error {worst:.2e}")))
}

fn transmit_power(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..2 {
        let ch = ctx.channel(6, 3)?;
        let plan = make_delay_plan(&ch, ch.num_paths(), 0)?;
        let mut tbf = ctx.zf(&ch, &plan)?;
        for x in tbf.inner.iter_mut() {
            *x = ctx.cmat(x.nrows(), x.ncols());
        }
        let cfg = OfdmConfig { k: 8, n_cp: 0 };
        let u = ctx.cmat(ch.m_t(), cfg.k);
        let exact = transmit_power_exact(&tbf, &u, &plan, cfg.n_cp);
        let frames = 20_000;
        let s = CMatrix::from_fn(frames, cfg.k, |_, _| {
            let re = if ctx.rng.random::<bool>() { 1.0 } else { -1.0 };
            let im = if ctx.rng.random::<bool>() { 1.0 } else { -1.0 };
            C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        });
        let q = dam_precode_time(&ofdm_modulate(&s, &u, &cfg)?, &plan, &tbf, 1)?;
        let lead = plan.max_kappa();
        let body = q.columns(lead, frames * cfg.k - lead);
        let measured = body.norm_squared() / body.ncols() as f64;
        worst = worst.max((measured - exact).abs() / exact);
    }
    Ok((worst <= 0.01, format!("max relative error vs simulated mean power {worst:.2e}")))
}

fn link_snr(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for i in 0..2 {
        let ch = ctx.channel(6, 4)?;
        let target = if i == 0 { 0 } else { ch.n_span().min(2) };
        let plan = make_delay_plan_with(&ch, ch.num_paths(), target, UncoveredPolicy::Discard)?;
        let tbf = ctx.zf(&ch, &plan)?;
        let k = 8;
        let sol = solve_joint_beamforming(&ch, &plan, &tbf, 1.0, 0.2, k)?;
        let sim = LinkSimConfig {
            ofdm: OfdmConfig { k, n_cp: target },
            frames: 20_000,
            burst_frames: 2000,
            noise_power: 0.2,
            seed: ctx.rng.random(),
        };
        let meas = simulate_ofdm_link(&ch, &plan, &sol.time, &sol.freq.u, &sim)?;
        for (m, g) in meas.snr().iter().zip(&sol.gamma) {
            worst = worst.max((m / g - 1.0).abs());
        }
    }
    Ok((worst <= 0.05, format!("max relative SNR deviation {worst:.2e}")))
}

fn ofdm_reduction(ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for _ in 0..INSTANCES {
        let ch = ctx.channel(6, 4)?;
        let plan = make_delay_plan(&ch, 1, ch.n_span())?;
        let tbf = zf_time_matrices(&ch, &plan)?;
        let sol = solve_joint_beamforming(&ch, &plan, &tbf, 1.0, 0.5, 16)?;
        let base = ofdm_baseline(&ch, 16, 1.0, 0.5)?;
        for (a, b) in sol.gamma.iter().zip(&base.gamma) {
            worst = worst.max((a - b).abs() / b.max(1e-300));
        }
    }
    Ok((worst <= 1e-9, format!("max relative SNR deviation {worst:.2e}")))
}

fn qam_ber(_ctx: &mut Ctx) -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    for gamma in [0.5f64, 2.0, 9.09, 20.0] {
        let q = 0.5 * statrs::function::erf::erfc((gamma / 2.0).sqrt());
        worst = worst.max((qam_ber_awgn(gamma, 4)? - q).abs() / q);
    }
    Ok((worst <= 1e-9, format!("QPSK vs Q(sqrt(gamma)) rel. error {worst:.2e}")))
}
