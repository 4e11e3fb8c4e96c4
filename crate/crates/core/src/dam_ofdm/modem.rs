//! OFDM modulation, DAM time-domain precoding and the per-subcarrier channel.

use std::f64::consts::PI;

use crate::channel::MultipathChannel;
use crate::dam_generic::{effective_taps, CRow, DelayPlan, TimeDomainBeamformers};
use crate::error::{Error, Result};
use crate::numerics::{cis, CMatrix, CVector, UnitaryDft, C64};

use super::OfdmConfig;

/// OFDM symbol and in-symbol sample index of serialized sample `i`.
///
/// `n` ranges over `-N_CP..K`; negative values are CP samples.
pub fn index_maps(i: i64, k: usize, n_cp: usize) -> (i64, i64) {
    let period = (k + n_cp) as i64;
    let shifted = i + n_cp as i64;
    (shifted.div_euclid(period), shifted.rem_euclid(period) - n_cp as i64)
}

fn check_grid(symbols: &CMatrix, u: &CMatrix, cfg: &OfdmConfig) -> Result<()> {
    if symbols.ncols() != cfg.k || u.ncols() != cfg.k {
        return Err(Error::Dimension(format!(
            "grid has {} subcarriers and precoder {}, expected {}",
            symbols.ncols(),
            u.ncols(),
            cfg.k
        )));
    }
    Ok(())
}

/// Serialized CP-OFDM stream `d[i]`, one row per precoder output.
///
/// `symbols` is `frames x K`, `u` holds the frequency-domain beamformers
/// `u_k` as columns. Each symbol is `IDFT(u_k s[m,k])` with unitary scaling,
/// preceded by its last `N_CP` samples.
pub fn ofdm_modulate(symbols: &CMatrix, u: &CMatrix, cfg: &OfdmConfig) -> Result<CMatrix> {
    ofdm_modulate_oversampled(symbols, u, cfg, 1)
}

/// Like [`ofdm_modulate`] but evaluates every symbol on a grid `factor` times
/// finer, using a zero-padded IDFT with subcarriers `k >= K/2` treated as
/// negative frequencies. Sample `factor * i + f` is the waveform at
/// `i + f / factor`; with `factor = 1` this is exactly [`ofdm_modulate`].
pub fn ofdm_modulate_oversampled(
    symbols: &CMatrix,
    u: &CMatrix,
    cfg: &OfdmConfig,
    factor: usize,
) -> Result<CMatrix> {
    check_grid(symbols, u, cfg)?;
    if factor == 0 {
        return Err(Error::InvalidConfig("oversampling factor must be at least 1".into()));
    }
    let k = cfg.k;
    let n_cp = cfg.n_cp;
    let big = k * factor;
    let dft = UnitaryDft::new(big)?;
    let gain = (factor as f64).sqrt();
    let frames = symbols.nrows();
    let period = (k + n_cp) * factor;
    let mut out = CMatrix::zeros(u.nrows(), frames * period);
    let mut buf = vec![C64::new(0.0, 0.0); big];
    for m in 0..frames {
        for a in 0..u.nrows() {
            buf.fill(C64::new(0.0, 0.0));
            for kk in 0..k {
                let bin = if factor == 1 || kk < k / 2 { kk } else { big - (k - kk) };
                buf[bin] = u[(a, kk)] * symbols[(m, kk)] * gain;
            }
            dft.inverse_in_place(&mut buf);
            let base = m * period;
            for (j, v) in buf.iter().enumerate() {
                out[(a, base + n_cp * factor + j)] = *v;
            }
            for j in 0..n_cp * factor {
                out[(a, base + j)] = buf[big - n_cp * factor + j];
            }
        }
    }
    Ok(out)
}

/// Inverse of [`ofdm_modulate`] for a single stream that starts at the first
/// CP sample: drops every CP and applies the unitary DFT. Returns
/// `frames x K`.
pub fn ofdm_demodulate(received: &[C64], cfg: &OfdmConfig) -> Result<CMatrix> {
    let period = cfg.k + cfg.n_cp;
    if !received.len().is_multiple_of(period) {
        return Err(Error::Dimension(format!(
            "received length {} is not a multiple of the symbol period {period}",
            received.len()
        )));
    }
    let frames = received.len() / period;
    let dft = UnitaryDft::new(cfg.k)?;
    let mut out = CMatrix::zeros(frames, cfg.k);
    let mut buf = vec![C64::new(0.0, 0.0); cfg.k];
    for m in 0..frames {
        let start = m * period + cfg.n_cp;
        buf.copy_from_slice(&received[start..start + cfg.k]);
        dft.forward_in_place(&mut buf);
        for (kk, v) in buf.iter().enumerate() {
            out[(m, kk)] = *v;
        }
    }
    Ok(out)
}

/// `qbar[i] = sum_l' F_l' d[i - kappa_l']` on a grid `factor` times finer
/// than the symbol rate (shifts become `factor * kappa_l'`).
pub fn dam_precode_time(
    d: &CMatrix,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    factor: usize,
) -> Result<CMatrix> {
    let filters = tbf.filters();
    if filters[0].ncols() != d.nrows() {
        return Err(Error::Dimension(format!(
            "filters take {} inputs, stream has {} rows",
            filters[0].ncols(),
            d.nrows()
        )));
    }
    let n = d.ncols();
    let mut out = CMatrix::zeros(filters[0].nrows(), n + factor * plan.max_kappa());
    for (f, &kappa) in filters.iter().zip(&plan.kappas) {
        let mut dst = out.columns_mut(factor * kappa, n);
        dst += f * d;
    }
    Ok(out)
}

/// `F_l' u_k` for all compensations (outer) and subcarriers (columns).
fn filtered_precoders(tbf: &TimeDomainBeamformers, u: &CMatrix) -> Vec<CMatrix> {
    tbf.filters().iter().map(|f| f * u).collect()
}

/// Transmit power `(1/K) sum_k | sum_l' F_l' u_k e^{-j 2 pi k kappa_l' / K} |^2`.
///
/// This treats every delayed copy `d[i - kappa_l']` as belonging to the same
/// OFDM symbol. See [`transmit_power_exact`] for the boundary-aware value.
pub fn transmit_power_analytic(tbf: &TimeDomainBeamformers, u: &CMatrix, plan: &DelayPlan) -> f64 {
    let k = u.ncols();
    let fu = filtered_precoders(tbf, u);
    let mut total = 0.0;
    for kk in 0..k {
        let mut v = CVector::zeros(fu[0].nrows());
        for (j, m) in fu.iter().enumerate() {
            let phase = cis(-2.0 * PI * (kk * plan.kappas[j] % k) as f64 / k as f64);
            v.axpy(phase, &m.column(kk), C64::new(1.0, 0.0));
        }
        total += v.norm_squared();
    }
    total / k as f64
}

/// Long-run mean of `E |qbar[i]|^2` for i.i.d. zero-mean unit-power symbols,
/// averaged over the `K + N_CP` sample positions of a symbol period.
///
/// Copies that fall into different OFDM symbols add in power rather than in
/// amplitude, so this differs from [`transmit_power_analytic`] whenever some
/// `kappa_l'` reaches across a symbol boundary.
pub fn transmit_power_exact(
    tbf: &TimeDomainBeamformers,
    u: &CMatrix,
    plan: &DelayPlan,
    n_cp: usize,
) -> f64 {
    let k = u.ncols();
    let period = (k + n_cp) as i64;
    let fu = filtered_precoders(tbf, u);
    let rows = fu[0].nrows();
    let mut total = 0.0;
    for n in -(n_cp as i64)..k as i64 {
        // (symbol offset, in-symbol position) of each delayed copy
        let placed: Vec<(i64, i64)> = plan
            .kappas
            .iter()
            .map(|&kappa| {
                let shifted = n - kappa as i64 + n_cp as i64;
                (shifted.div_euclid(period), shifted.rem_euclid(period) - n_cp as i64)
            })
            .collect();
        let mut offsets: Vec<i64> = placed.iter().map(|p| p.0).collect();
        offsets.sort_unstable();
        offsets.dedup();
        for kk in 0..k {
            for &o in &offsets {
                let mut v = CVector::zeros(rows);
                for (j, &(oj, pos)) in placed.iter().enumerate() {
                    if oj == o {
                        let phase = cis(2.0 * PI * (kk as i64 * pos).rem_euclid(k as i64) as f64 / k as f64);
                        v.axpy(phase, &fu[j].column(kk), C64::new(1.0, 0.0));
                    }
                }
                total += v.norm_squared();
            }
        }
    }
    total / (k as f64 * period as f64)
}

/// Per-subcarrier effective channel rows
/// `htilde^H[k] = (1/sqrt K) sum_t tap[t] e^{-j 2 pi k t / K}`.
pub fn freq_channel(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    k: usize,
) -> Vec<CRow> {
    let taps = effective_taps(ch, plan, tbf);
    let scale = 1.0 / (k as f64).sqrt();
    (0..k)
        .map(|kk| {
            let mut row = CRow::zeros(taps[0].len());
            for (t, tap) in taps.iter().enumerate() {
                let phase = cis(-2.0 * PI * (kk * t % k) as f64 / k as f64) * scale;
                row += tap * phase;
            }
            row
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DuplicateDelays;
    use crate::dam_generic::{make_delay_plan, make_delay_plan_with, zf_time_matrices, UncoveredPolicy};
    use crate::numerics::{max_abs, unitary_dft};
    use crate::rng::{complex_normal, trial_rng};
    use proptest::prelude::*;
    use rand::Rng;

    fn cfg(k: usize, n_cp: usize) -> OfdmConfig {
        OfdmConfig { k, n_cp }
    }

    fn random_channel(m_t: usize, delays: &[usize], seed: u64) -> MultipathChannel {
        let mut rng = trial_rng(seed, 0);
        let gains = delays
            .iter()
            .map(|&d| (d, CVector::from_fn(m_t, |_, _| complex_normal(&mut rng, 1.0))))
            .collect();
        MultipathChannel::from_gains(m_t, 1.0, gains, DuplicateDelays::Reject).unwrap()
    }

    fn qpsk_grid(rng: &mut impl Rng, frames: usize, k: usize) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMatrix::from_fn(frames, k, |_, _| {
            C64::new(
                if rng.random::<bool>() { s } else { -s },
                if rng.random::<bool>() { s } else { -s },
            )
        })
    }

    #[test]
    fn index_map_examples() {
        assert_eq!(index_maps(0, 4, 2), (0, 0));
        assert_eq!(index_maps(-2, 4, 2), (0, -2));
        assert_eq!(index_maps(6, 4, 2), (1, 0));
        assert_eq!(index_maps(3, 4, 2), (0, 3));
        assert_eq!(index_maps(4, 4, 2), (1, -2));
    }

    #[test]
    fn cp_is_copied() {
        let mut rng = trial_rng(1, 0);
        let s = qpsk_grid(&mut rng, 1, 4);
        let u = CMatrix::from_element(1, 4, C64::new(1.0, 0.0));
        let d = ofdm_modulate(&s, &u, &cfg(4, 2)).unwrap();
        assert_eq!(d.ncols(), 6);
        assert_eq!(d[(0, 0)], d[(0, 4)]);
        assert_eq!(d[(0, 1)], d[(0, 5)]);
    }

    #[test]
    fn subcarrier_zero_impulse_is_flat() {
        let mut s = CMatrix::zeros(1, 4);
        s[(0, 0)] = C64::new(1.0, 0.0);
        let u = CMatrix::from_element(1, 4, C64::new(1.0, 0.0));
        let d = ofdm_modulate(&s, &u, &cfg(4, 0)).unwrap();
        for v in d.iter() {
            assert!((v - C64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn loop_back_recovers_symbols() {
        let mut rng = trial_rng(2, 0);
        let s = qpsk_grid(&mut rng, 5, 8);
        let u = CMatrix::from_element(1, 8, C64::new(1.0, 0.0));
        let c = cfg(8, 3);
        let d = ofdm_modulate(&s, &u, &c).unwrap();
        let back = ofdm_demodulate(d.row(0).transpose().as_slice(), &c).unwrap();
        assert!(max_abs(&(back - s)) < 1e-14);
    }

    #[test]
    fn demodulate_rejects_partial_symbol() {
        let y = vec![C64::new(0.0, 0.0); 7];
        assert!(ofdm_demodulate(&y, &cfg(4, 2)).is_err());
        let zero = ofdm_demodulate(&vec![C64::new(0.0, 0.0); 12], &cfg(4, 2)).unwrap();
        assert_eq!(max_abs(&zero), 0.0);
    }

    #[test]
    fn oversampling_keeps_integer_samples() {
        let mut rng = trial_rng(3, 0);
        let s = qpsk_grid(&mut rng, 3, 8);
        let u = CMatrix::from_fn(2, 8, |_, _| complex_normal(&mut rng, 1.0));
        let c = cfg(8, 2);
        let d1 = ofdm_modulate(&s, &u, &c).unwrap();
        let d4 = ofdm_modulate_oversampled(&s, &u, &c, 4).unwrap();
        assert_eq!(d4.ncols(), 4 * d1.ncols());
        for i in 0..d1.ncols() {
            for a in 0..2 {
                assert!((d4[(a, 4 * i)] - d1[(a, i)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pass_through_precoding_is_identity() {
        let ch = random_channel(3, &[0, 2, 5], 4);
        let plan = make_delay_plan(&ch, 1, ch.n_span()).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let mut rng = trial_rng(4, 1);
        let d = CMatrix::from_fn(3, 20, |_, _| complex_normal(&mut rng, 1.0));
        let q = dam_precode_time(&d, &plan, &tbf, 1).unwrap();
        assert!(max_abs(&(q - &d)) < 1e-14);
    }

    #[test]
    fn impulse_precoding_places_filter_columns() {
        let ch = random_channel(4, &[0, 2, 5], 5);
        let plan = make_delay_plan(&ch, 3, 0).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let mut d = CMatrix::zeros(4, 1);
        d[(1, 0)] = C64::new(1.0, 0.0);
        let q = dam_precode_time(&d, &plan, &tbf, 1).unwrap();
        let filters = tbf.filters();
        for (j, &kappa) in plan.kappas.iter().enumerate() {
            assert!((q.column(kappa) - filters[j].column(1)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_compensation_power_reduces() {
        let ch = random_channel(3, &[0, 2, 5], 4);
        let plan = make_delay_plan(&ch, 1, ch.n_span()).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let mut rng = trial_rng(4, 2);
        let u = CMatrix::from_fn(3, 8, |_, _| complex_normal(&mut rng, 1.0));
        let expect: f64 = u.column_iter().map(|c| c.norm_squared()).sum::<f64>() / 8.0;
        assert!((transmit_power_analytic(&tbf, &u, &plan) - expect).abs() < 1e-12);
        assert!((transmit_power_exact(&tbf, &u, &plan, 5) - expect).abs() < 1e-12);
    }

    #[test]
    fn exact_power_matches_monte_carlo() {
        let ch = random_channel(4, &[0, 3, 9], 6);
        let plan = make_delay_plan(&ch, 3, 0).unwrap();
        let mut tbf = zf_time_matrices(&ch, &plan).unwrap();
        let mut rng = trial_rng(6, 1);
        for x in tbf.inner.iter_mut() {
            *x = CMatrix::from_fn(x.nrows(), x.ncols(), |_, _| complex_normal(&mut rng, 1.0));
        }
        let c = cfg(8, 0);
        let u = CMatrix::from_fn(4, 8, |_, _| complex_normal(&mut rng, 1.0));
        let frames = 20_000;
        let s = qpsk_grid(&mut rng, frames, 8);
        let d = ofdm_modulate(&s, &u, &c).unwrap();
        let q = dam_precode_time(&d, &plan, &tbf, 1).unwrap();
        // skip the start-up transient and the tail
        let start = plan.max_kappa() + 8;
        let stop = d.ncols();
        let mc: f64 = (start..stop).map(|i| q.column(i).norm_squared()).sum::<f64>() / (stop - start) as f64;
        let exact = transmit_power_exact(&tbf, &u, &plan, 0);
        assert!((mc / exact - 1.0).abs() < 0.01, "mc {mc} exact {exact}");
    }

    #[test]
    fn conventional_freq_channel() {
        let ch = random_channel(3, &[2, 5, 9], 7);
        let plan = make_delay_plan(&ch, 1, ch.n_span()).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let k = 16;
        let rows = freq_channel(&ch, &plan, &tbf, k);
        for (kk, row) in rows.iter().enumerate() {
            let mut expect = CRow::zeros(3);
            for l in 0..3 {
                let ph = cis(2.0 * PI * kk as f64 * (ch.n_min() as f64 - ch.delay(l) as f64) / k as f64);
                expect += ch.gain(l).adjoint() * ph;
            }
            expect /= C64::new((k as f64).sqrt(), 0.0);
            assert!((row - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn perfect_alignment_freq_channel_is_flat() {
        let ch = random_channel(6, &[0, 4, 7], 8);
        let plan = make_delay_plan(&ch, 3, 0).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let rows = freq_channel(&ch, &plan, &tbf, 8);
        for r in &rows {
            assert!((r - &rows[0]).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn freq_channel_is_dft_of_taps(seed in any::<u64>(), k in 4usize..20) {
            let ch = random_channel(5, &[0, 1, 4, 6], seed);
            let Ok(plan) = make_delay_plan_with(&ch, 3, 2, UncoveredPolicy::Discard) else { return Ok(()); };
            let tbf = zf_time_matrices(&ch, &plan).unwrap();
            let rows = freq_channel(&ch, &plan, &tbf, k);
            let taps = effective_taps(&ch, &plan, &tbf);
            for a in 0..5 {
                let mut col = vec![C64::new(0.0, 0.0); k];
                for (t, tap) in taps.iter().enumerate() {
                    col[t % k] += tap[a];
                }
                let f = unitary_dft(&col, false).unwrap();
                for kk in 0..k {
                    prop_assert!((rows[kk][a] - f[kk]).norm() <= 1e-9);
                }
            }
        }

        #[test]
        fn precode_matches_direct_sum(seed in any::<u64>()) {
            let ch = random_channel(4, &[0, 2, 3, 7], seed);
            let Ok(plan) = make_delay_plan_with(&ch, 4, 1, UncoveredPolicy::Discard) else { return Ok(()); };
            let tbf = zf_time_matrices(&ch, &plan).unwrap();
            let mut rng = trial_rng(seed, 2);
            let d = CMatrix::from_fn(4, 15, |_, _| complex_normal(&mut rng, 1.0));
            let q = dam_precode_time(&d, &plan, &tbf, 1).unwrap();
            let f = tbf.filters();
            for i in 0..q.ncols() {
                let mut v = CVector::zeros(4);
                for (j, &kappa) in plan.kappas.iter().enumerate() {
                    if i >= kappa && i - kappa < 15 {
                        v += &f[j] * d.column(i - kappa);
                    }
                }
                prop_assert!((q.column(i) - v).norm() <= 1e-12);
            }
        }
    }
}
