//! Conventional MISO-OFDM: per-subcarrier MRT with water-filled power.

use std::f64::consts::PI;

use crate::channel::MultipathChannel;
use crate::dam_ofdm::water_fill;
use crate::error::{Error, Result};
use crate::numerics::{cis, CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct OfdmBaseline {
    /// `M_t x K`, column `k` is the precoder of subcarrier `k`.
    pub u: CMatrix,
    pub mu: Vec<f64>,
    /// `|sum_l h_l e^{j 2 pi k (n_l - n_min) / K}|^2 / sigma^2`.
    pub gains: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// MRT on every subcarrier with water-filling, `sum mu_k = K P`.
pub fn ofdm_baseline(ch: &MultipathChannel, k: usize, power: f64, noise_power: f64) -> Result<OfdmBaseline> {
    if k == 0 || !(noise_power > 0.0) || !(power >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "baseline needs K >= 1, positive noise power and non-negative power (K = {k}, P = {power}, sigma^2 = {noise_power})"
        )));
    }
    let n_min = ch.n_min() as i64;
    let inv_sigma = 1.0 / noise_power.sqrt();
    let dirs: Vec<CVector> = (0..k)
        .map(|kk| {
            let mut e = CVector::zeros(ch.m_t());
            for (l, p) in ch.paths().iter().enumerate() {
                let r = (kk as i64 * (ch.delay(l) as i64 - n_min)).rem_euclid(k as i64);
                e.axpy(cis(2.0 * PI * r as f64 / k as f64) * inv_sigma, &p.gain, C64::new(1.0, 0.0));
            }
            e
        })
        .collect();
    let gains: Vec<f64> = dirs.iter().map(|e| e.norm_squared()).collect();
    let (mu, _) = water_fill(&gains, k as f64 * power);
    let mut u = CMatrix::zeros(ch.m_t(), k);
    for (kk, e) in dirs.iter().enumerate() {
        if mu[kk] > 0.0 {
            u.set_column(kk, &(e * C64::new(mu[kk].sqrt() / e.norm(), 0.0)));
        }
    }
    let gamma = mu.iter().zip(&gains).map(|(m, g)| m * g).collect();
    Ok(OfdmBaseline { u, mu, gains, gamma })
}
