//! DAM-OFDM: OFDM on top of delay pre-compensated, window-ZF precoding, and
//! the joint frequency/time-domain beamforming solver.

mod link;
mod modem;
mod solver;

pub use link::{simulate_ofdm_link, LinkMeasurement, LinkSimConfig};
pub use modem::{
    dam_precode_time, freq_channel, index_maps, ofdm_demodulate, ofdm_modulate,
    ofdm_modulate_oversampled, transmit_power_analytic, transmit_power_exact,
};
pub use solver::{
    achieved_snrs, e_vector, g_vector, solve_joint_beamforming, stacked_v, water_fill,
    BeamformerBundle, FactorizationCase, FrequencyBeamformers, JointSolution,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfdmConfig {
    /// Subcarrier count.
    pub k: usize,
    /// Cyclic-prefix length in samples.
    pub n_cp: usize,
}

impl OfdmConfig {
    /// Checks `residual_span <= N_CP <= K`.
    pub fn validate(&self, residual_span: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.n_cp < residual_span || self.n_cp > self.k {
            return Err(Error::InvalidConfig(format!(
                "CP length {} must lie between the residual delay spread {residual_span} and K = {}",
                self.n_cp, self.k
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> usize {
        self.k + self.n_cp
    }
}

/// `R = (1 / (K + N_CP)) sum_k log2(1 + gamma_k)`.
pub fn effective_se(gammas: &[f64], n_cp: usize) -> f64 {
    let k = gammas.len();
    if k == 0 {
        return 0.0;
    }
    gammas.iter().map(|g| (1.0 + g).log2()).sum::<f64>() / (k + n_cp) as f64
}

/// CP overhead `span / (span + K)`.
pub fn cp_overhead(span: usize, k: usize) -> f64 {
    span as f64 / (span + k) as f64
}

/// Guard overhead `n_max / n_c` of a per-coherence-block guard interval.
pub fn guard_overhead(n_max: usize, n_c: f64) -> f64 {
    n_max as f64 / n_c
}
