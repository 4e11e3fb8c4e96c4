//! Acceptance criteria, one test per criterion. Every test writes a single
//! `criterion NN PASS|FAIL` line to stderr (bypassing the test harness
//! capture) before asserting.

use std::io::Write;

use dam_core::channel::{array_response, path_correlation, DuplicateDelays, MultipathChannel};
use dam_core::dam_generic::{
    achieved_span, effective_taps, make_delay_plan, make_delay_plan_with, minimal_feasible_span, precode_time,
    zf_time_matrices, UncoveredPolicy,
};
use dam_core::dam_ofdm::{
    achieved_snrs, cp_overhead, dam_precode_time, e_vector, g_vector, guard_overhead, ofdm_modulate,
    simulate_ofdm_link, solve_joint_beamforming, stacked_v, transmit_power_analytic, transmit_power_exact,
    FactorizationCase, LinkSimConfig, OfdmConfig,
};
use dam_core::dam_sc::{simulate_sc_link, zf_beamformers, zf_snr_closed_form};
use dam_core::evaluation::{
    ber_from_snrs, mmwave_28ghz, mmwave_28ghz_ofdm, ofdm_baseline, papr_at_ccdf, run_experiment, simulate_ber,
    trial_channel, BerMcSettings, ExperimentConfig, PaprSettings, ScalarLink, Scheme,
};
use dam_core::numerics::{CMatrix, CVector, C64};
use dam_core::rng::{complex_normal, trial_rng};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn verdict(id: u32, name: &str, passed: bool, detail: &str) {
    let line = format!(
        "criterion {id:02} {} {name}: {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn random_channel(rng: &mut ChaCha8Rng, m_t: usize, max_paths: usize, max_delay: usize) -> MultipathChannel {
    let l = rng.random_range(2..=max_paths);
    let mut delays = Vec::new();
    while delays.len() < l {
        let d = rng.random_range(0..=max_delay);
        if !delays.contains(&d) {
            delays.push(d);
        }
    }
    let gains = delays
        .into_iter()
        .map(|d| (d, CVector::from_fn(m_t, |_, _| complex_normal(rng, 1.0))))
        .collect();
    MultipathChannel::from_gains(m_t, 1.0, gains, DuplicateDelays::Reject).unwrap()
}

fn cmat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| complex_normal(rng, 1.0))
}

fn qpsk(rng: &mut ChaCha8Rng, frames: usize, k: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(frames, k, |_, _| {
        C64::new(
            if rng.random::<bool>() { s } else { -s },
            if rng.random::<bool>() { s } else { -s },
        )
    })
}

#[test]
fn criterion_01_overhead_arithmetic() {
    let got = [
        format!("{:.2}", 100.0 * cp_overhead(40, 512)),
        format!("{:.1}", 100.0 * cp_overhead(40, 128)),
        format!("{:.1}", 100.0 * cp_overhead(40, 64)),
        format!("{:.3}", 100.0 * guard_overhead(40, 1.28e5)),
    ];
    let passed = got == ["7.25", "23.8", "38.5", "0.031"];
    verdict(1, "CP and guard overhead", passed, &format!("{got:?} percent"));
}

#[test]
fn criterion_02_transmit_power_identity() {
    let mut within = 0;
    let mut within_exact = 0;
    let mut worst = 0.0_f64;
    let mut worst_exact = 0.0_f64;
    let instances = 50;
    for i in 0..instances {
        let mut rng = trial_rng(202, i);
        let m_t = rng.random_range(4..=8);
        let ch = random_channel(&mut rng, m_t, 4, 15);
        let l_prime = rng.random_range(1..=ch.num_paths());
        let from = minimal_feasible_span(&ch, l_prime, 0).unwrap();
        let target = rng.random_range(from..=ch.n_span());
        let plan = make_delay_plan_with(&ch, l_prime, target, UncoveredPolicy::Discard).unwrap();
        let mut tbf = zf_time_matrices(&ch, &plan).unwrap();
        for x in tbf.inner.iter_mut() {
            *x = cmat(&mut rng, x.nrows(), x.ncols());
        }
        let k = [16, 32, 64][rng.random_range(0..3)];
        let cfg = OfdmConfig { k, n_cp: plan.n_span_target };
        let u = cmat(&mut rng, m_t, k);
        let analytic = transmit_power_analytic(&tbf, &u, &plan);
        let exact = transmit_power_exact(&tbf, &u, &plan, cfg.n_cp);

        let frames = 100_000usize.div_ceil(cfg.period());
        let s = qpsk(&mut rng, frames, k);
        let q = dam_precode_time(&ofdm_modulate(&s, &u, &cfg).unwrap(), &plan, &tbf, 1).unwrap();
        // samples before max kappa still miss delayed copies
        let lead = plan.max_kappa();
        let body = q.columns(lead, frames * cfg.period() - lead);
        let empirical = body.norm_squared() / body.ncols() as f64;

        let err = (empirical - analytic).abs() / analytic;
        let err_exact = (empirical - exact).abs() / exact;
        worst = worst.max(err);
        worst_exact = worst_exact.max(err_exact);
        within += (err <= 0.01) as usize;
        within_exact += (err_exact <= 0.01) as usize;
    }
    verdict(
        2,
        "transmit power formula vs simulated mean power",
        within == instances as usize,
        &format!(
            "{within}/{instances} instances within 1% (worst {:.2}%); boundary-aware formula: {within_exact}/{instances} (worst {:.2}%)",
            100.0 * worst,
            100.0 * worst_exact
        ),
    );
}

#[test]
fn criterion_03_g_vector_identity() {
    let mut worst = 0.0_f64;
    let mut checked = 0;
    for i in 0..50 {
        let mut rng = trial_rng(303, i);
        let m_t = rng.random_range(4..=10);
        let ch = random_channel(&mut rng, m_t, 4, 12);
        let l_prime = rng.random_range(1..=ch.num_paths());
        let from = minimal_feasible_span(&ch, l_prime, 0).unwrap();
        let target = rng.random_range(from..=ch.n_span());
        let plan = make_delay_plan_with(&ch, l_prime, target, UncoveredPolicy::Discard).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let big_k = [8, 16, 64][rng.random_range(0..3)];
        let sigma2 = rng.random_range(0.1..2.0);
        for k in 0..big_k {
            let g = g_vector(&ch, &plan, &tbf, k, big_k, sigma2);
            let ve = stacked_v(&tbf, &plan, k, big_k) * e_vector(&ch, &plan, k, big_k, sigma2);
            if g.norm() > 0.0 {
                worst = worst.max((&g - ve).norm() / g.norm());
            } else {
                worst = worst.max(ve.norm());
            }
            checked += 1;
        }
    }
    verdict(
        3,
        "g_k = V_k e_k",
        worst <= 1e-10,
        &format!("{checked} subcarriers over 50 instances, max relative residual {worst:.2e}"),
    );
}

/// `(1/K) sum log2(1 + gamma_k)`.
fn objective(gammas: &[f64]) -> f64 {
    gammas.iter().map(|g| (1.0 + g).log2()).sum::<f64>() / gammas.len() as f64
}

/// Gains `|P e_k|^2` with `P` the projector onto the range of
/// `sum Hbar Hbar^H`, computed through a pseudo-inverse, and the objective of
/// a bisection water level.
fn water_level_oracle(gains: &[f64], total: f64) -> (f64, Vec<f64>, f64) {
    let alloc = |nu: f64| -> Vec<f64> { gains.iter().map(|g| if *g > 0.0 { (nu - 1.0 / g).max(0.0) } else { 0.0 }).collect() };
    let (mut lo, mut hi) = (0.0_f64, total + gains.iter().filter(|g| **g > 0.0).map(|g| 1.0 / g).sum::<f64>());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alloc(mid).iter().sum::<f64>() > total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let mu = alloc(nu);
    let gammas: Vec<f64> = mu.iter().zip(gains).map(|(m, g)| m * g).collect();
    (nu, mu, objective(&gammas))
}

#[test]
fn criterion_04_solver_optimality() {
    let (m_t, big_k, power, sigma2) = (4, 8, 1.0, 0.5);
    let mut worst_obj = 0.0_f64;
    let mut worst_kkt = 0.0_f64;
    let mut beaten = 0;
    let mut cases = Vec::new();
    let mut direct_gap = 0.0_f64;
    for i in 0..5 {
        let mut rng = trial_rng(404, i);
        let gains_raw: Vec<(usize, CVector)> = {
            let mut delays = Vec::new();
            while delays.len() < 3 {
                let d = rng.random_range(0..8);
                if !delays.contains(&d) {
                    delays.push(d);
                }
            }
            delays.into_iter().map(|d| (d, CVector::from_fn(m_t, |_, _| complex_normal(&mut rng, 1.0)))).collect()
        };
        let ch = MultipathChannel::from_gains(m_t, 1.0, gains_raw, DuplicateDelays::Reject).unwrap();
        let plan = make_delay_plan(&ch, 3, 0).unwrap();
        let bases = zf_time_matrices(&ch, &plan).unwrap();
        let sol = solve_joint_beamforming(&ch, &plan, &bases, power, sigma2, big_k).unwrap();
        cases.push(sol.case);

        // independent gains: projection onto range(G) via pseudo-inverse
        let mut gram = CMatrix::zeros(m_t, m_t);
        for b in &bases.bases {
            gram += b * b.adjoint();
        }
        let proj = &gram * gram.clone().pseudo_inverse(1e-10).unwrap();
        let gains: Vec<f64> = (0..big_k)
            .map(|k| (&proj * e_vector(&ch, &plan, k, big_k, sigma2)).norm_squared())
            .collect();
        let (nu, mu_oracle, obj_oracle) = water_level_oracle(&gains, big_k as f64 * power);
        worst_obj = worst_obj.max((objective(&sol.gamma_relaxed) - obj_oracle).abs());
        for ((m, g), mo) in sol.freq.mu.iter().zip(&gains).zip(&mu_oracle) {
            let r = if *m > 0.0 { (m + 1.0 / g - nu).abs() / nu } else { (nu - 1.0 / g).max(0.0) / nu };
            worst_kkt = worst_kkt.max(r).max((m - mo).abs() / nu);
        }

        let achieved = objective(&sol.gamma);
        let mut all_below = true;
        for _ in 0..1000 {
            let mut tbf = bases.clone();
            for x in tbf.inner.iter_mut() {
                *x = cmat(&mut rng, x.nrows(), x.ncols());
            }
            let mut u = cmat(&mut rng, m_t, big_k);
            let p = transmit_power_analytic(&tbf, &u, &plan);
            u *= C64::new((power / p).sqrt(), 0.0);
            let random = objective(&achieved_snrs(&ch, &plan, &tbf, &u, sigma2));
            all_below &= random < achieved && random <= objective(&sol.gamma_relaxed);
        }
        beaten += all_below as usize;

        // a true direct-factorization instance on the same channel geometry
        let wide = MultipathChannel::from_gains(
            big_k,
            1.0,
            (0..3).map(|l| (ch.delay(l), CVector::from_fn(big_k, |_, _| complex_normal(&mut rng, 1.0)))).collect(),
            DuplicateDelays::Reject,
        )
        .unwrap();
        let wplan = make_delay_plan(&wide, 3, 0).unwrap();
        let wbases = zf_time_matrices(&wide, &wplan).unwrap();
        let wsol = solve_joint_beamforming(&wide, &wplan, &wbases, power, sigma2, big_k).unwrap();
        assert_eq!(wsol.case, FactorizationCase::Direct);
        direct_gap = direct_gap.max((objective(&wsol.gamma) - objective(&wsol.gamma_relaxed)).abs());
    }
    let passed = worst_obj <= 1e-6 && worst_kkt <= 1e-6 && beaten == 5 && direct_gap <= 1e-9;
    verdict(
        4,
        "closed-form solution vs water-level search and random samples",
        passed,
        &format!(
            "objective gap {worst_obj:.2e}, KKT residual {worst_kkt:.2e}, beats 1000 random samples on {beaten}/5, \
             factorizations {cases:?} at M_t=4 K=8, direct case (M_t=K=8) achieved-relaxed gap {direct_gap:.2e}"
        ),
    );
}

#[test]
fn criterion_05_link_snr_matches_solver() {
    let mut worst = 0.0_f64;
    let mut plans = Vec::new();
    let mut rng = trial_rng(505, 0);
    let ch = MultipathChannel::from_gains(
        6,
        1.0,
        [0usize, 2, 5, 7].iter().map(|&d| (d, CVector::from_fn(6, |_, _| complex_normal(&mut rng, 1.0)))).collect(),
        DuplicateDelays::Reject,
    )
    .unwrap();
    for (l_prime, span) in [(4, 0), (3, 2)] {
        let plan = make_delay_plan_with(&ch, l_prime, span, UncoveredPolicy::Discard).unwrap();
        let tbf = zf_time_matrices(&ch, &plan).unwrap();
        let k = 8;
        let sol = solve_joint_beamforming(&ch, &plan, &tbf, 1.0, 0.2, k).unwrap();
        let sim = LinkSimConfig {
            ofdm: OfdmConfig { k, n_cp: span },
            frames: 100_000,
            burst_frames: 5000,
            noise_power: 0.2,
            seed: 55,
        };
        let meas = simulate_ofdm_link(&ch, &plan, &sol.time, &sol.freq.u, &sim).unwrap();
        for (m, g) in meas.snr().iter().zip(&sol.gamma) {
            worst = worst.max((m / g - 1.0).abs());
        }
        plans.push(format!("L'={l_prime} n'={span}"));
    }
    verdict(
        5,
        "time-domain link SNR vs |g_k^H w_k|^2",
        worst <= 0.02,
        &format!("plans {plans:?}, 1e5 OFDM symbols each, max relative deviation {:.3}%", 100.0 * worst),
    );
}

#[test]
fn criterion_06_perfect_single_carrier_dam() {
    let mut cfg = mmwave_28ghz();
    cfg.channel.m_t = 64;
    let mut worst_zf = 0.0_f64;
    let mut worst_isi = f64::NEG_INFINITY;
    let mut worst_snr = 0.0_f64;
    let sigma2 = 0.3;
    for t in 0..10 {
        let ch = trial_channel(&cfg, t).unwrap();
        let bf = zf_beamformers(&ch, 1.0).unwrap();
        for (l, f) in bf.vectors.iter().enumerate() {
            for j in (0..ch.num_paths()).filter(|&j| j != l) {
                worst_zf = worst_zf.max(ch.gain(j).dotc(f).norm() / (ch.gain(j).norm() * f.norm()));
            }
        }
        let mut rng = trial_rng(606, t);
        let symbols: Vec<C64> = qpsk(&mut rng, 1, 2000).iter().copied().collect();
        let rep = simulate_sc_link(&ch, &bf, &symbols, 0.0, 0, &mut rng).unwrap();
        worst_isi = worst_isi.max(10.0 * rep.isi_to_signal().max(1e-300).log10());
        let closed = zf_snr_closed_form(&ch, 1.0, sigma2).unwrap();
        worst_snr = worst_snr.max((rep.snr_simulated(sigma2) - closed).abs() / closed);
    }
    verdict(
        6,
        "perfect single-carrier DAM",
        worst_zf <= 1e-10 && worst_isi <= -100.0 && worst_snr <= 1e-9,
        &format!("ZF residual {worst_zf:.2e}, ISI/signal {worst_isi:.1} dB, SNR relative error {worst_snr:.2e}"),
    );
}

#[test]
fn criterion_07_generic_span_example() {
    let mut rng = trial_rng(707, 0);
    let ch = MultipathChannel::from_gains(
        8,
        1.0,
        [1usize, 3, 4, 6].iter().map(|&d| (d, CVector::from_fn(8, |_, _| complex_normal(&mut rng, 1.0)))).collect(),
        DuplicateDelays::Reject,
    )
    .unwrap();
    let plan = make_delay_plan(&ch, 3, 2).unwrap();
    let tbf = zf_time_matrices(&ch, &plan).unwrap();
    let span = achieved_span(&ch, &plan, &tbf).unwrap();
    verdict(
        7,
        "delays {1,3,4,6} with three compensations",
        span == 2 && plan.kappas == [3, 2, 0],
        &format!("span {span}, kappa {:?}", plan.kappas),
    );
}

#[test]
fn criterion_08_asymptotic_orthogonality() {
    let broadside = std::f64::consts::FRAC_PI_2;
    let rho = |m: usize, dtheta_deg: f64| {
        let a = array_response(broadside, m);
        let b = array_response(broadside - dtheta_deg.to_radians(), m);
        path_correlation(&a, &b).unwrap()
    };
    let r256 = rho(256, 5.0);
    let mut monotone = true;
    let mut table = Vec::new();
    for d in [5.0, 10.0, 20.0] {
        let r: Vec<f64> = [16, 64, 256].iter().map(|&m| rho(m, d)).collect();
        monotone &= r.windows(2).all(|w| w[1] <= w[0]);
        table.push(format!("{d} deg: {:.1}/{:.1}/{:.1} dB", 10.0 * r[0].log10(), 10.0 * r[1].log10(), 10.0 * r[2].log10()));
    }
    verdict(
        8,
        "path correlation vs array size",
        r256 <= 1e-3 && monotone,
        &format!("rho(256, 5 deg) = {r256:.2e}; M_t = 16/64/256: {}", table.join(", ")),
    );
}

#[test]
fn criterion_09_spectral_efficiency_trends() {
    let trials = 200;
    let run = |cfg: ExperimentConfig| run_experiment(&ExperimentConfig { trials, ..cfg }).unwrap();
    let dam = |k: usize| {
        let mut c = mmwave_28ghz();
        c.ofdm = OfdmConfig { k, n_cp: 0 };
        run(c).avg_se
    };
    let ks = [64, 128, 512];
    let dam_se: Vec<f64> = ks.iter().map(|&k| dam(k)).collect();
    let ofdm_se: Vec<f64> = ks.iter().map(|&k| run(mmwave_28ghz_ofdm(k)).avg_se).collect();
    let mut partial = mmwave_28ghz();
    partial.l_prime = 4;
    partial.n_span_target = 5;
    partial.uncovered = UncoveredPolicy::Discard;
    partial.ofdm = OfdmConfig { k: 64, n_cp: 5 };
    let partial_se = run(partial).avg_se;

    let max = dam_se.iter().cloned().fold(f64::MIN, f64::max);
    let min = dam_se.iter().cloned().fold(f64::MAX, f64::min);
    let a = (max - min) / min <= 0.02;
    let b = ofdm_se[2] > ofdm_se[1] && ofdm_se[1] > ofdm_se[0];
    let c = dam_se.iter().zip(&ofdm_se).all(|(d, o)| d > o);
    let d = partial_se > ofdm_se[1] && partial_se > ofdm_se[2];
    verdict(
        9,
        "spectral efficiency ordering",
        a && b && c && d,
        &format!(
            "(a) {a} DAM K=64/128/512: {:.3}/{:.3}/{:.3}; (b) {b} OFDM: {:.3}/{:.3}/{:.3}; (c) {c}; \
             (d) {d} DAM L'=4 n'=5 K=64: {partial_se:.3} vs OFDM K'=128 {:.3}, K'=512 {:.3} ({trials} trials)",
            dam_se[0], dam_se[1], dam_se[2], ofdm_se[0], ofdm_se[1], ofdm_se[2], ofdm_se[1], ofdm_se[2]
        ),
    );
}

#[test]
fn criterion_10_ber_ordering_and_simulation() {
    let snrs: Vec<f64> = (-4..=2).map(|i| 5.0 * i as f64).collect();
    let mut ordered = true;
    let mut rows = Vec::new();
    for m_t in [64, 128, 256] {
        let mut worst_margin = f64::INFINITY;
        for &snr in &snrs {
            let mut dam = mmwave_28ghz();
            dam.channel.m_t = m_t;
            dam.trials = 50;
            dam.snr_db = Some(snr);
            dam.ber_order = Some(256);
            let mut ofdm = mmwave_28ghz_ofdm(128);
            ofdm.channel.m_t = m_t;
            ofdm.trials = 50;
            ofdm.snr_db = Some(snr);
            ofdm.ber_order = Some(256);
            let bd = run_experiment(&dam).unwrap().ber.unwrap();
            let bo = run_experiment(&ofdm).unwrap().ber.unwrap();
            ordered &= bd <= bo;
            worst_margin = worst_margin.min(bo - bd);
        }
        rows.push(format!("M_t={m_t} min(OFDM-DAM)={worst_margin:.2e}"));
    }

    // Monte Carlo check of the analytic OFDM BER, K' = 128, N'_CP = 40
    let mut cfg = mmwave_28ghz_ofdm(128);
    cfg.channel.m_t = 64;
    let mut mc_ok = true;
    let mut mc_rows = Vec::new();
    for snr in [-20.0, -15.0, -10.0] {
        let power = 10f64.powf(snr / 10.0);
        let mut links = Vec::new();
        let mut analytic = 0.0;
        let trials = 4;
        for t in 0..trials {
            let ch = trial_channel(&cfg, t).unwrap();
            let plan = make_delay_plan(&ch, 1, ch.n_span()).unwrap();
            let tbf = zf_time_matrices(&ch, &plan).unwrap();
            let base = ofdm_baseline(&ch, 128, power, 1.0).unwrap();
            analytic += ber_from_snrs(&base.gamma, 40, 256).unwrap() / trials as f64;
            links.push(ScalarLink::new(&ch, &plan, &tbf, &base.u, OfdmConfig { k: 128, n_cp: 40 }).unwrap());
        }
        if analytic < 1e-3 {
            continue;
        }
        let mc = BerMcSettings { min_errors: 2000, max_bits: 10_000_000, burst_frames: 16, seed: 10 };
        let est = simulate_ber(&links, 1.0, 256, &mc).unwrap();
        let ok = est.consistent_with(analytic, 3.0);
        mc_ok &= ok;
        mc_rows.push(format!(
            "{snr} dB: analytic {analytic:.3e} MC {:.3e} ({:.1} sigma)",
            est.ber(),
            (est.ber() - analytic).abs() / est.sigma_at(analytic)
        ));
    }
    verdict(
        10,
        "BER ordering and Monte Carlo agreement",
        ordered && mc_ok && !mc_rows.is_empty(),
        &format!("ordering {ordered} ({}); Monte Carlo {mc_ok} ({})", rows.join(", "), mc_rows.join("; ")),
    );
}

#[test]
fn criterion_11_papr_ordering() {
    let settings = PaprSettings { frames: 16, oversample: 1, order: 128 };
    let trials = 10;
    let mut ofdm = mmwave_28ghz_ofdm(512);
    ofdm.trials = trials;
    ofdm.papr = Some(settings);
    let ofdm_samples = run_experiment(&ofdm).unwrap().papr_samples;
    let ofdm_tail = papr_at_ccdf(&ofdm_samples, 1e-2);
    let mut details = vec![format!("OFDM K'=512: {ofdm_tail:.2} dB ({} blocks)", ofdm_samples.len())];
    let mut passed = ofdm_samples.len() >= 10_000;
    for (l_prime, span) in [(5usize, 0usize), (4, 5)] {
        let mut dam = mmwave_28ghz();
        dam.trials = trials;
        dam.l_prime = l_prime;
        dam.n_span_target = span;
        dam.uncovered = UncoveredPolicy::Discard;
        dam.ofdm = OfdmConfig { k: 32, n_cp: span };
        dam.papr = Some(settings);
        let samples = run_experiment(&dam).unwrap().papr_samples;
        let tail = papr_at_ccdf(&samples, 1e-2);
        passed &= samples.len() >= 10_000 && tail < ofdm_tail;
        details.push(format!("DAM K=32 n'={span}: {tail:.2} dB ({} blocks)", samples.len()));
    }
    verdict(11, "PAPR at CCDF 1e-2", passed, &details.join(", "));
}

#[test]
fn criterion_12_tap_model_vs_convolution() {
    let mut worst = 0.0_f64;
    let mut count = 0;
    let mut i = 0;
    while count < 100 {
        let mut rng = trial_rng(1212, i);
        i += 1;
        let m_t = rng.random_range(2..=8);
        let ch = random_channel(&mut rng, m_t, 4, 10);
        let l_prime = rng.random_range(1..=ch.num_paths());
        let target = rng.random_range(0..=ch.n_span());
        let Ok(plan) = make_delay_plan_with(&ch, l_prime, target, UncoveredPolicy::Discard) else {
            continue;
        };
        let mut tbf = zf_time_matrices(&ch, &plan).unwrap();
        for x in tbf.inner.iter_mut() {
            *x = cmat(&mut rng, x.nrows(), x.ncols());
        }
        let n = 40;
        let d = cmat(&mut rng, m_t, n);
        let y = ch.convolve(&precode_time(&d, &plan, &tbf).unwrap()).unwrap();
        let taps = effective_taps(&ch, &plan, &tbf);
        let shift = plan.n_max - plan.n_span_target;
        let scale = y.iter().fold(1.0_f64, |a, z| a.max(z.norm()));
        for (idx, yi) in y.iter().enumerate() {
            let mut model = C64::new(0.0, 0.0);
            for (t, tap) in taps.iter().enumerate() {
                if let Some(src) = idx.checked_sub(shift + t).filter(|&s| s < n) {
                    model += (tap * d.column(src))[0];
                }
            }
            worst = worst.max((yi - model).norm() / scale);
        }
        count += 1;
    }
    verdict(
        12,
        "residual tap model vs brute-force convolution",
        worst <= 1e-9,
        &format!("100 instances (M_t <= 8, L <= 4), max deviation {worst:.2e}"),
    );
}

#[allow(dead_code)]
fn _uses(_: Scheme) {}
