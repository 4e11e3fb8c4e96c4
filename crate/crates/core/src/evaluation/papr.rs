//! Peak-to-average power ratio of transmitted blocks and its CCDF.
//!
//! A block is one OFDM symbol period (CP included) on one antenna; its PAPR
//! is the peak sample power over the mean sample power of that block.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dam_generic::{DelayPlan, TimeDomainBeamformers};
use crate::dam_ofdm::{dam_precode_time, ofdm_modulate_oversampled, OfdmConfig};
use crate::error::{Error, Result};
use crate::numerics::CMatrix;

use super::qam::Qam;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaprSettings {
    /// OFDM symbols per channel realization that enter the statistics.
    pub frames: usize,
    /// Oversampling factor of the waveform (1 = symbol rate).
    pub oversample: usize,
    /// QAM order of the data symbols.
    pub order: usize,
}

impl Default for PaprSettings {
    fn default() -> Self {
        Self {
            frames: 16,
            oversample: 1,
            order: 16,
        }
    }
}

impl PaprSettings {
    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::InvalidConfig("PAPR needs at least one block per realization".into()));
        }
        if self.oversample == 0 {
            return Err(Error::InvalidConfig("oversampling factor must be at least 1".into()));
        }
        Qam::new(self.order).map(|_| ())
    }
}

/// PAPR in dB of every `block_len`-sample block of every row of `q`,
/// starting at column `start`. All-zero blocks are skipped.
pub fn papr_blocks(q: &CMatrix, start: usize, block_len: usize, blocks: usize) -> Result<Vec<f64>> {
    if block_len == 0 || start + blocks * block_len > q.ncols() {
        return Err(Error::Dimension(format!(
            "{blocks} blocks of {block_len} samples from column {start} exceed {} columns",
            q.ncols()
        )));
    }
    let mut out = Vec::with_capacity(q.nrows() * blocks);
    for r in 0..q.nrows() {
        for b in 0..blocks {
            let (mut peak, mut sum) = (0.0_f64, 0.0);
            for c in start + b * block_len..start + (b + 1) * block_len {
                let p = q[(r, c)].norm_sqr();
                peak = peak.max(p);
                sum += p;
            }
            if sum > 0.0 {
                out.push(10.0 * (peak * block_len as f64 / sum).log10());
            }
        }
    }
    Ok(out)
}

/// Fraction of samples strictly above each threshold.
pub fn papr_ccdf(samples_db: &[f64], thresholds_db: &[f64]) -> Vec<f64> {
    if samples_db.is_empty() {
        return vec![0.0; thresholds_db.len()];
    }
    let mut sorted = samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    thresholds_db
        .iter()
        .map(|t| {
            let below = sorted.partition_point(|x| x <= t);
            (sorted.len() - below) as f64 / sorted.len() as f64
        })
        .collect()
}

/// Smallest sample threshold whose exceedance fraction is at most `prob`.
pub fn papr_at_ccdf(samples_db: &[f64], prob: f64) -> f64 {
    if samples_db.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples_db.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let allowed = (prob * n as f64).floor() as usize;
    sorted[n - 1 - allowed.min(n - 1)]
}

pub fn random_symbols<R: Rng + ?Sized>(qam: &Qam, frames: usize, k: usize, rng: &mut R) -> CMatrix {
    let nb = qam.bits_per_symbol();
    let mut bits = vec![0u8; nb];
    CMatrix::from_fn(frames, k, |_, _| {
        for b in bits.iter_mut() {
            *b = rng.random::<bool>() as u8;
        }
        qam.map(&bits)
    })
}

/// Per-antenna block PAPRs of conventional OFDM with precoders `u`.
pub fn ofdm_papr_samples<R: Rng + ?Sized>(
    u: &CMatrix,
    cfg: &OfdmConfig,
    settings: &PaprSettings,
    rng: &mut R,
) -> Result<Vec<f64>> {
    settings.validate()?;
    let qam = Qam::new(settings.order)?;
    let s = random_symbols(&qam, settings.frames, cfg.k, rng);
    let d = ofdm_modulate_oversampled(&s, u, cfg, settings.oversample)?;
    papr_blocks(&d, 0, cfg.period() * settings.oversample, settings.frames)
}

/// Per-antenna block PAPRs of the DAM-OFDM signal `qbar`. Leading symbols
/// that still miss some delayed copies are generated but not counted.
pub fn dam_papr_samples<R: Rng + ?Sized>(
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    u: &CMatrix,
    cfg: &OfdmConfig,
    settings: &PaprSettings,
    rng: &mut R,
) -> Result<Vec<f64>> {
    settings.validate()?;
    let qam = Qam::new(settings.order)?;
    let period = cfg.period();
    let lead = plan.max_kappa().div_ceil(period);
    let s = random_symbols(&qam, settings.frames + lead, cfg.k, rng);
    let d = ofdm_modulate_oversampled(&s, u, cfg, settings.oversample)?;
    let q = dam_precode_time(&d, plan, tbf, settings.oversample)?;
    let block = period * settings.oversample;
    papr_blocks(&q, lead * block, block, settings.frames)
}
