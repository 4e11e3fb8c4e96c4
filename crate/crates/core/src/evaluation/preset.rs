//! Named experiment presets.

use std::f64::consts::FRAC_PI_3;

use crate::channel::{ChannelGenConfig, PowerDelayProfile, SubpathCoefficients};
use crate::dam_generic::UncoveredPolicy;
use crate::dam_ofdm::OfdmConfig;

use super::experiment::{ExperimentConfig, Scheme};

/// Name under which [`mmwave_28ghz`] is exposed to configuration files.
pub const MMWAVE_28GHZ: &str = "mmwave-28ghz";

/// Mean large-scale gain assumed by the preset. The statistical path-loss
/// model is out of scope; -110 dB puts the single-antenna SNR at about
/// 13 dB for 30 dBm over 128 MHz.
pub const PRESET_LARGE_SCALE_GAIN_DB: f64 = -110.0;

/// 28 GHz mmWave scenario: 128 MHz bandwidth, N0 = -174 dBm/Hz, 1 ms
/// coherence time, 5 paths with delays up to 312.5 ns (40 samples), up to 3
/// sub-paths per path with AoDs in [-60 deg, 60 deg], P = 30 dBm, 128
/// antennas, perfect-alignment DAM-OFDM with K = 128 and no CP.
pub fn mmwave_28ghz() -> ExperimentConfig {
    ExperimentConfig {
        channel: ChannelGenConfig {
            m_t: 128,
            num_paths: 5,
            tau_max_s: 312.5e-9,
            bandwidth_hz: 128e6,
            mu_max: 3,
            aod_range_rad: (-FRAC_PI_3, FRAC_PI_3),
            pdp: PowerDelayProfile::Uniform,
            subpath_coefficients: SubpathCoefficients::UnitPhase,
            seed: 2024,
        },
        power_dbm: 30.0,
        noise_dbm_per_hz: -174.0,
        large_scale_gain_db: PRESET_LARGE_SCALE_GAIN_DB,
        snr_db: None,
        coherence_time_s: 1e-3,
        trials: 200,
        scheme: Scheme::DamOfdm,
        ofdm: OfdmConfig { k: 128, n_cp: 0 },
        l_prime: 5,
        n_span_target: 0,
        uncovered: UncoveredPolicy::Reject,
        ber_order: None,
        papr: None,
    }
}

/// Conventional OFDM counterpart of the preset with `K'` subcarriers and the
/// worst-case CP of 40 samples.
pub fn mmwave_28ghz_ofdm(k: usize) -> ExperimentConfig {
    let mut cfg = mmwave_28ghz();
    cfg.scheme = Scheme::ConventionalOfdm;
    cfg.ofdm = OfdmConfig { k, n_cp: cfg.channel.max_delay_bin() };
    cfg
}
