//! End-to-end time-domain DAM-OFDM link: modulate, precode, convolve with the
//! raw multipath channel, add noise, strip CP and demodulate.

use rand::Rng;

use crate::channel::MultipathChannel;
use crate::dam_generic::{DelayPlan, TimeDomainBeamformers};
use crate::error::{Error, Result};
use crate::numerics::{CMatrix, C64};
use crate::rng::{complex_normal, trial_rng};

use super::modem::{dam_precode_time, ofdm_demodulate, ofdm_modulate};
use super::OfdmConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSimConfig {
    pub ofdm: OfdmConfig,
    /// Total OFDM symbols simulated.
    pub frames: usize,
    /// OFDM symbols per independently generated burst.
    pub burst_frames: usize,
    pub noise_power: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkMeasurement {
    /// Mean received signal power per subcarrier after the DFT.
    pub signal_power: Vec<f64>,
    /// Mean received noise power per subcarrier after the DFT.
    pub noise_power: Vec<f64>,
    pub frames: usize,
}

impl LinkMeasurement {
    pub fn snr(&self) -> Vec<f64> {
        self.signal_power
            .iter()
            .zip(&self.noise_power)
            .map(|(s, n)| s / n)
            .collect()
    }
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    C64::new(
        if rng.random::<bool>() { s } else { -s },
        if rng.random::<bool>() { s } else { -s },
    )
}

/// Measures per-subcarrier SNR with unit-power QPSK symbols. The receiver
/// absorbs the common delay `n_max - n'_span` before CP removal. Signal and
/// noise are demodulated separately (the receiver is linear), so their powers
/// are measured without cross terms.
pub fn simulate_ofdm_link(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    u: &CMatrix,
    sim: &LinkSimConfig,
) -> Result<LinkMeasurement> {
    let cfg = sim.ofdm;
    cfg.validate(plan.n_span_target)?;
    if sim.frames == 0 || sim.burst_frames == 0 {
        return Err(Error::InvalidConfig("link simulation needs at least one frame".into()));
    }
    if u.ncols() != cfg.k {
        return Err(Error::Dimension(format!("{} precoders for K = {}", u.ncols(), cfg.k)));
    }
    let shift = plan.n_max - plan.n_span_target;
    let period = cfg.period();
    let mut signal = vec![0.0; cfg.k];
    let mut noise = vec![0.0; cfg.k];
    let mut done = 0;
    let mut burst = 0u64;
    while done < sim.frames {
        let frames = sim.burst_frames.min(sim.frames - done);
        let mut rng = trial_rng(sim.seed, burst);
        let s = CMatrix::from_fn(frames, cfg.k, |_, _| qpsk(&mut rng));
        let d = ofdm_modulate(&s, u, &cfg)?;
        let q = dam_precode_time(&d, plan, tbf, 1)?;
        let y = ch.convolve(&q)?;
        let window = &y[shift..shift + frames * period];
        let z: Vec<C64> = (0..window.len())
            .map(|_| complex_normal(&mut rng, sim.noise_power))
            .collect();
        let ys = ofdm_demodulate(window, &cfg)?;
        let zs = ofdm_demodulate(&z, &cfg)?;
        for k in 0..cfg.k {
            signal[k] += ys.column(k).norm_squared();
            noise[k] += zs.column(k).norm_squared();
        }
        done += frames;
        burst += 1;
    }
    let n = sim.frames as f64;
    Ok(LinkMeasurement {
        signal_power: signal.into_iter().map(|x| x / n).collect(),
        noise_power: noise.into_iter().map(|x| x / n).collect(),
        frames: sim.frames,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DuplicateDelays;
    use crate::dam_generic::{make_delay_plan, make_delay_plan_with, zf_time_matrices, UncoveredPolicy};
    use crate::dam_ofdm::solve_joint_beamforming;
    use crate::numerics::CVector;

    fn random_channel(m_t: usize, delays: &[usize], seed: u64) -> MultipathChannel {
        let mut rng = trial_rng(seed, 0);
        let gains = delays
            .iter()
            .map(|&d| (d, CVector::from_fn(m_t, |_, _| complex_normal(&mut rng, 1.0))))
            .collect();
        MultipathChannel::from_gains(m_t, 1.0, gains, DuplicateDelays::Reject).unwrap()
    }

    #[test]
    fn measured_snr_matches_solver() {
        let ch = random_channel(6, &[0, 2, 5, 7], 11);
        for (l_prime, span) in [(4, 0), (3, 2)] {
            let plan = make_delay_plan_with(&ch, l_prime, span, UncoveredPolicy::Discard).unwrap();
            let tbf = zf_time_matrices(&ch, &plan).unwrap();
            let k = 8;
            let sol = solve_joint_beamforming(&ch, &plan, &tbf, 1.0, 0.2, k).unwrap();
            let sim = LinkSimConfig {
                ofdm: OfdmConfig { k, n_cp: span },
                frames: 40_000,
                burst_frames: 2000,
                noise_power: 0.2,
                seed: 3,
            };
            let meas = simulate_ofdm_link(&ch, &plan, &sol.time, &sol.freq.u, &sim).unwrap();
            for (m, g) in meas.snr().iter().zip(&sol.gamma) {
                assert!((m / g - 1.0).abs() < 0.03, "measured {m} vs {g}");
            }
        }
    }

    #[test]
    fn short_cp_is_rejected() {
        let ch = random_channel(6, &[0, 2, 5, 7], 11);
        let plan = make_delay_plan(&ch, 3, 2).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let u = CMatrix::zeros(6, 8);
        let sim = LinkSimConfig {
            ofdm: OfdmConfig { k: 8, n_cp: 1 },
            frames: 1,
            burst_frames: 1,
            noise_power: 1.0,
            seed: 0,
        };
        assert!(simulate_ofdm_link(&ch, &plan, &tbf, &u, &sim).is_err());
    }
}
