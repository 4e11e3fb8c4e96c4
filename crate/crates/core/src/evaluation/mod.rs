//! Monte Carlo harness: spectral efficiency, BER and PAPR of conventional
//! OFDM, DAM-OFDM and single-carrier DAM.

mod baseline;
mod ber;
mod experiment;
mod papr;
mod preset;
mod qam;

pub use baseline::{ofdm_baseline, OfdmBaseline};
pub use ber::{
    ber_dam_ofdm, ber_from_snrs, ber_ofdm, cp_energy_factor, simulate_ber, BerEstimate, BerMcSettings,
    ScalarLink,
};
pub use experiment::{
    run_experiment, run_experiment_with, trial_channel, Execution, ExperimentConfig, LinkReport, Scheme,
};
pub use papr::{
    dam_papr_samples, ofdm_papr_samples, papr_at_ccdf, papr_blocks, papr_ccdf, random_symbols,
    PaprSettings,
};
pub use preset::{mmwave_28ghz, mmwave_28ghz_ofdm, MMWAVE_28GHZ, PRESET_LARGE_SCALE_GAIN_DB};
pub use qam::{qam_ber_awgn, Qam};
