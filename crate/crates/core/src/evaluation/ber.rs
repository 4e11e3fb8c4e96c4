//! Analytic and simulated BER of uncoded QAM over OFDM and DAM-OFDM.
//!
//! Both analytic forms evaluate the AWGN bit error rate at the
//! per-subcarrier SNR scaled by `K / (K + N_CP)`, the share of the
//! transmitted energy that carries data. The simulator applies the same
//! accounting by raising the noise variance by `(K + N_CP) / K`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::channel::MultipathChannel;
use crate::dam_generic::{DelayPlan, TimeDomainBeamformers};
use crate::dam_ofdm::{ofdm_demodulate, ofdm_modulate, OfdmConfig};
use crate::error::{Error, Result};
use crate::numerics::{cis, CMatrix, C64};
use crate::rng::{complex_normal, trial_rng};

use super::baseline::ofdm_baseline;
use super::qam::Qam;

/// Share of the transmitted energy spent on data, `K / (K + N_CP)`.
pub fn cp_energy_factor(k: usize, n_cp: usize) -> f64 {
    k as f64 / (k + n_cp) as f64
}

/// `(1/K) sum_k P_e(gamma_k K / (K + N_CP))`.
pub fn ber_from_snrs(gammas: &[f64], n_cp: usize, order: usize) -> Result<f64> {
    let q = Qam::new(order)?;
    if gammas.is_empty() {
        return Err(Error::InvalidConfig("no subcarrier SNRs".into()));
    }
    let f = cp_energy_factor(gammas.len(), n_cp);
    Ok(gammas.iter().map(|g| q.ber_awgn(g * f)).sum::<f64>() / gammas.len() as f64)
}

/// Analytic BER of conventional OFDM with `K'` subcarriers and CP `N'_CP`.
pub fn ber_ofdm(
    ch: &MultipathChannel,
    k: usize,
    n_cp: usize,
    power: f64,
    noise_power: f64,
    order: usize,
) -> Result<f64> {
    let base = ofdm_baseline(ch, k, power, noise_power)?;
    ber_from_snrs(&base.gamma, n_cp, order)
}

/// Analytic BER of DAM-OFDM. With perfect alignment every subcarrier has the
/// same SNR and a single evaluation suffices; otherwise this falls back to the
/// per-subcarrier average (an extension beyond the perfect case).
pub fn ber_dam_ofdm(gammas: &[f64], plan: &DelayPlan, n_cp: usize, order: usize) -> Result<f64> {
    if plan.is_perfect() && !gammas.is_empty() {
        let q = Qam::new(order)?;
        let mean = gammas.iter().sum::<f64>() / gammas.len() as f64;
        return Ok(q.ber_awgn(mean * cp_energy_factor(gammas.len(), n_cp)));
    }
    ber_from_snrs(gammas, n_cp, order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BerMcSettings {
    /// Stop once this many bit errors were counted...
    pub min_errors: usize,
    /// ...or this many bits were sent.
    pub max_bits: usize,
    /// OFDM symbols per generated burst.
    pub burst_frames: usize,
    pub seed: u64,
}

impl Default for BerMcSettings {
    fn default() -> Self {
        Self {
            min_errors: 100,
            max_bits: 10_000_000,
            burst_frames: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BerEstimate {
    pub errors: usize,
    pub bits: usize,
}

impl BerEstimate {
    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    /// Binomial standard deviation of the estimate if the true BER is `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.bits.max(1) as f64).sqrt()
    }

    /// Whether `p` lies within `z` binomial standard deviations.
    pub fn consistent_with(&self, p: f64, z: f64) -> bool {
        (self.ber() - p).abs() <= z * self.sigma_at(p)
    }

    fn add(&mut self, other: BerEstimate) {
        self.errors += other.errors;
        self.bits += other.bits;
    }
}

/// Time-domain link used by the BER simulator. By linearity the `M_t`
/// antenna streams collapse into one scalar OFDM stream per total delay
/// `kappa_j + n_l`, with per-subcarrier coefficients `h_l^H F_j u_k`.
#[derive(Debug, Clone)]
pub struct ScalarLink {
    cfg: OfdmConfig,
    /// `(delay, 1 x K coefficients)` for every delay with a component.
    taps: Vec<(usize, CMatrix)>,
    /// Per-subcarrier gain seen by the receiver after the DFT.
    equalizer: Vec<C64>,
    shift: usize,
}

impl ScalarLink {
    pub fn new(
        ch: &MultipathChannel,
        plan: &DelayPlan,
        tbf: &TimeDomainBeamformers,
        u: &CMatrix,
        cfg: OfdmConfig,
    ) -> Result<Self> {
        cfg.validate(plan.n_span_target)?;
        if u.ncols() != cfg.k {
            return Err(Error::Dimension(format!("{} precoders for K = {}", u.ncols(), cfg.k)));
        }
        let mut by_delay: BTreeMap<usize, CMatrix> = BTreeMap::new();
        for (f, &kappa) in tbf.filters().iter().zip(&plan.kappas) {
            let fu = f * u;
            for p in ch.paths() {
                let row = p.gain.adjoint() * &fu;
                *by_delay.entry(p.delay + kappa).or_insert_with(|| CMatrix::zeros(1, cfg.k)) += row;
            }
        }
        let shift = plan.n_max - plan.n_span_target;
        let mut equalizer = vec![C64::new(0.0, 0.0); cfg.k];
        for (&d, c) in &by_delay {
            if d >= shift && d <= shift + cfg.n_cp {
                let t = (d - shift) as i64;
                for (kk, e) in equalizer.iter_mut().enumerate() {
                    let r = (kk as i64 * t).rem_euclid(cfg.k as i64);
                    *e += c[(0, kk)] * cis(-2.0 * PI * r as f64 / cfg.k as f64);
                }
            }
        }
        Ok(Self {
            cfg,
            taps: by_delay.into_iter().collect(),
            equalizer,
            shift,
        })
    }

    pub fn equalizer(&self) -> &[C64] {
        &self.equalizer
    }

    /// Received frames (`frames x K` after CP removal and DFT) for a symbol
    /// grid, without noise. Frames whose interference would reach outside
    /// the grid are not returned: the result covers grid rows
    /// `lead..frames - tail` with `(lead, tail)` from [`Self::edges`].
    fn receive(&self, symbols: &CMatrix) -> Result<CMatrix> {
        let period = self.cfg.period();
        let (lead, tail) = self.edges();
        let frames = symbols.nrows();
        let len = frames * period;
        let max_delay = self.taps.last().map_or(0, |t| t.0);
        let mut y = vec![C64::new(0.0, 0.0); len + max_delay];
        for (d, c) in &self.taps {
            let x = ofdm_modulate(symbols, c, &self.cfg)?;
            for (i, v) in x.row(0).iter().enumerate() {
                y[i + d] += *v;
            }
        }
        let start = self.shift + lead * period;
        let kept = frames - lead - tail;
        ofdm_demodulate(&y[start..start + kept * period], &self.cfg)
    }

    /// Frames dropped at the start and end of every burst.
    pub fn edges(&self) -> (usize, usize) {
        let period = self.cfg.period();
        let max_delay = self.taps.last().map_or(0, |t| t.0);
        let lead = max_delay.saturating_sub(self.shift).div_ceil(period);
        let tail = self.shift.div_ceil(period);
        (lead, tail)
    }

    /// Simulates one burst of `frames` counted OFDM symbols at noise
    /// variance `noise_power` (already including any energy accounting).
    pub fn burst<R: Rng + ?Sized>(
        &self,
        qam: &Qam,
        frames: usize,
        noise_power: f64,
        rng: &mut R,
    ) -> Result<BerEstimate> {
        let (lead, tail) = self.edges();
        let total = frames + lead + tail;
        let k = self.cfg.k;
        let nb = qam.bits_per_symbol();
        let bits: Vec<u8> = (0..total * k * nb).map(|_| rng.random::<bool>() as u8).collect();
        let symbols = CMatrix::from_fn(total, k, |m, kk| {
            let at = (m * k + kk) * nb;
            qam.map(&bits[at..at + nb])
        });
        let rx = self.receive(&symbols)?;
        let mut decided = vec![0u8; nb];
        let mut est = BerEstimate::default();
        let noise_scale = noise_power.sqrt();
        for m in 0..frames {
            for kk in 0..k {
                let y = rx[(m, kk)] + complex_normal(rng, 1.0) * noise_scale;
                let c = self.equalizer[kk];
                let s = if c.norm_sqr() > 0.0 { y / c } else { y };
                qam.demap(s, &mut decided);
                let at = ((m + lead) * k + kk) * nb;
                est.errors += decided.iter().zip(&bits[at..at + nb]).filter(|(a, b)| a != b).count();
                est.bits += nb;
            }
        }
        Ok(est)
    }
}

/// Monte Carlo BER over several links. Bursts are sent round-robin so every
/// link carries the same number of bits; the pooled estimate therefore
/// targets the mean BER across links. Each link's noise variance is
/// `noise_power (K + N_CP) / K`.
pub fn simulate_ber(links: &[ScalarLink], noise_power: f64, order: usize, mc: &BerMcSettings) -> Result<BerEstimate> {
    let qam = Qam::new(order)?;
    if links.is_empty() || mc.burst_frames == 0 {
        return Err(Error::InvalidConfig("BER simulation needs a link and a non-empty burst".into()));
    }
    let mut rngs: Vec<_> = (0..links.len()).map(|i| trial_rng(mc.seed, i as u64)).collect();
    let mut est = BerEstimate::default();
    while est.errors < mc.min_errors && est.bits < mc.max_bits {
        for (link, rng) in links.iter().zip(rngs.iter_mut()) {
            let f = cp_energy_factor(link.cfg.k, link.cfg.n_cp);
            est.add(link.burst(&qam, mc.burst_frames, noise_power / f, rng)?);
        }
    }
    Ok(est)
}
