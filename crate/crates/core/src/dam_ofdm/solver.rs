//! Joint frequency/time-domain beamforming.
//!
//! The relaxed problem over `w_k = Xbar u_k` is solved in closed form:
//! `w_k` lies in the span of `V_k`, the per-subcarrier gains are
//! `|A^H e_k|^2`, and power is water-filled across subcarriers. `W = [w_k]`
//! is then factorized into `Xbar` and `U = [u_k]`.
//!
//! `V_k^H V_k = sum_l' Hbar_l'^perp (Hbar_l'^perp)^H` does not depend on `k`,
//! so one Hermitian eigendecomposition provides the left singular vectors and
//! singular values of every `V_k^H`; only `B_k = V_k A Sigma^{-1}` changes
//! with the subcarrier.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::MultipathChannel;
use crate::dam_generic::{tap_components, DelayPlan, TimeDomainBeamformers};
use crate::error::{Error, Result};
use crate::numerics::{cis, reduced_svd, CMatrix, CVector, C64};

use super::modem::transmit_power_analytic;

/// Eigenvalues of `V^H V` below this fraction of the largest are dropped.
const GRAM_RANK_TOL: f64 = 1e-10;

fn phase(k: usize, shift: i64, big_k: usize) -> C64 {
    let r = (k as i64 * shift).rem_euclid(big_k as i64);
    cis(2.0 * PI * r as f64 / big_k as f64)
}

/// `V_k`: blocks `e^{j 2 pi k kappa_l' / K} (Hbar_l'^perp)^H` stacked
/// vertically, `(sum rbar) x M_t`.
pub fn stacked_v(tbf: &TimeDomainBeamformers, plan: &DelayPlan, k: usize, big_k: usize) -> CMatrix {
    let mut v = CMatrix::zeros(tbf.total_rank(), tbf.m_t());
    let mut r = 0;
    for (b, &kappa) in tbf.bases.iter().zip(&plan.kappas) {
        let block = b.adjoint() * phase(k, kappa as i64, big_k);
        v.view_mut((r, 0), (b.ncols(), b.nrows())).copy_from(&block);
        r += b.ncols();
    }
    v
}

/// `e_k = (1/sigma) sum_l h_l e^{j 2 pi k (n_l - n_max + n'_span) / K}`.
pub fn e_vector(ch: &MultipathChannel, plan: &DelayPlan, k: usize, big_k: usize, noise_power: f64) -> CVector {
    let base = plan.n_max as i64 - plan.n_span_target as i64;
    let mut e = CVector::zeros(ch.m_t());
    for (l, p) in ch.paths().iter().enumerate() {
        let ph = phase(k, ch.delay(l) as i64 - base, big_k);
        e.axpy(ph, &p.gain, C64::new(1.0, 0.0));
    }
    e / C64::new(noise_power.sqrt(), 0.0)
}

/// `g_k` from the residual tap definition: block `l'` is
/// `(Hbar_l'^perp)^H (1/sigma) sum_t g_l'[t] e^{j 2 pi k t / K}`.
pub fn g_vector(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    k: usize,
    big_k: usize,
    noise_power: f64,
) -> CVector {
    g_vectors(ch, plan, tbf, big_k, noise_power).column(k).clone_owned()
}

/// All `g_k` as columns, `(sum rbar) x K`.
fn g_vectors(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    big_k: usize,
    noise_power: f64,
) -> CMatrix {
    let offsets: Vec<usize> = tbf
        .ranks()
        .iter()
        .scan(0, |acc, &r| {
            let o = *acc;
            *acc += r;
            Some(o)
        })
        .collect();
    let mut g = CMatrix::zeros(tbf.total_rank(), big_k);
    let inv_sigma = C64::new(1.0 / noise_power.sqrt(), 0.0);
    for (t, comps) in tap_components(ch, plan).iter().enumerate() {
        for &(j, l) in comps {
            let proj = tbf.bases[j].adjoint() * ch.gain(l) * inv_sigma;
            let rows = proj.len();
            for k in 0..big_k {
                let ph = phase(k, t as i64, big_k);
                let mut dst = g.view_mut((offsets[j], k), (rows, 1));
                dst += &proj * ph;
            }
        }
    }
    g
}

/// Water-filling `mu_k = [level - 1/gain_k]^+` with `sum mu_k = total`,
/// found by iteratively deactivating the weakest subcarrier. Returns the
/// allocation and the water level.
pub fn water_fill(gains: &[f64], total: f64) -> (Vec<f64>, f64) {
    let mut mu = vec![0.0; gains.len()];
    if total <= 0.0 {
        return (mu, 0.0);
    }
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return (mu, 0.0);
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    let mut active = order.len();
    let mut inv_sum: f64 = order.iter().map(|&i| 1.0 / gains[i]).sum();
    let level = loop {
        let level = (total + inv_sum) / active as f64;
        let weakest = 1.0 / gains[order[active - 1]];
        if level > weakest || active == 1 {
            break level;
        }
        inv_sum -= weakest;
        active -= 1;
    };
    for &i in &order[..active] {
        mu[i] = (level - 1.0 / gains[i]).max(0.0);
    }
    (mu, level)
}

/// How `W` was split into `Xbar U`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationCase {
    /// `M_t >= K`: `Xbar = [W, 0]`, `U = [I; 0]`.
    Direct,
    /// `sum rbar <= M_t < K`: split through the reduced SVD of `W`.
    Split,
    /// `M_t < min(K, sum rbar)`: SVD split keeping at most `M_t` directions.
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyBeamformers {
    /// `M_t x K`, column `k` is `u_k`.
    pub u: CMatrix,
    /// Relaxed optimum `W`, `(sum rbar) x K`.
    pub w: CMatrix,
    /// Power per subcarrier, `sum mu_k = K P`.
    pub mu: Vec<f64>,
    pub water_level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution {
    /// Bases with the optimized inner blocks `Xbar_l'`.
    pub time: TimeDomainBeamformers,
    pub freq: FrequencyBeamformers,
    /// Subcarrier gains `|A^H e_k|^2`.
    pub gains: Vec<f64>,
    /// `mu_k * gain_k`, the SNRs of the relaxed problem.
    pub gamma_relaxed: Vec<f64>,
    /// `|g_k^H Xbar u_k|^2` of the returned beamformers.
    pub gamma: Vec<f64>,
    pub case: FactorizationCase,
    /// Set when the factorization dropped nonzero singular values of `W`.
    pub approximate: bool,
    /// Rank of `W` (0 when no power is transmitted).
    pub w_rank: usize,
}

/// SNRs `|g_k^H Xbar u_k|^2` of arbitrary time/frequency beamformers.
pub fn achieved_snrs(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
    u: &CMatrix,
    noise_power: f64,
) -> Vec<f64> {
    let big_k = u.ncols();
    let g = g_vectors(ch, plan, tbf, big_k, noise_power);
    let w = tbf.stacked_inner() * u;
    (0..big_k).map(|k| g.column(k).dotc(&w.column(k)).norm_sqr()).collect()
}

/// Solves the joint beamforming problem for `K` subcarriers at transmit
/// power `power` (in the sense of [`transmit_power_analytic`]).
pub fn solve_joint_beamforming(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    bases: &TimeDomainBeamformers,
    power: f64,
    noise_power: f64,
    big_k: usize,
) -> Result<JointSolution> {
    if big_k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if !(noise_power > 0.0) || !(power >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "power {power} and noise power {noise_power} must be non-negative and positive"
        )));
    }
    let m_t = bases.m_t();
    let total_rank = bases.total_rank();

    let mut gram = CMatrix::zeros(m_t, m_t);
    for b in &bases.bases {
        gram += b * b.adjoint();
    }
    gram = (&gram + gram.adjoint()) * C64::new(0.5, 0.0);
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
    let keep: Vec<usize> = (0..m_t)
        .filter(|&i| eig.eigenvalues[i] > GRAM_RANK_TOL * lmax)
        .collect();
    let a = CMatrix::from_columns(&keep.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());
    let lambda: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i]).collect();

    // A^H e_k = (1/sigma) sum_l (A^H h_l) e^{j theta_l k}
    let base = plan.n_max as i64 - plan.n_span_target as i64;
    let ah: Vec<CVector> = (0..ch.num_paths()).map(|l| a.adjoint() * ch.gain(l)).collect();
    let inv_sigma = C64::new(1.0 / noise_power.sqrt(), 0.0);
    let mut ebar = CMatrix::zeros(a.ncols(), big_k);
    for k in 0..big_k {
        let mut col = ebar.column_mut(k);
        for (l, v) in ah.iter().enumerate() {
            col.axpy(phase(k, ch.delay(l) as i64 - base, big_k) * inv_sigma, v, C64::new(1.0, 0.0));
        }
    }
    let gains: Vec<f64> = ebar.column_iter().map(|c| c.norm_squared()).collect();
    let gmax = gains.iter().fold(0.0_f64, |acc, &g| acc.max(g));
    // gains at rounding level relative to the raw channel mean every path is
    // zero-forced
    let raw: f64 = (0..ch.num_paths()).map(|l| ch.gain(l).norm()).sum::<f64>().powi(2) / noise_power;
    if keep.is_empty() || gmax <= 1e-20 * raw {
        return Err(Error::DegenerateChannel);
    }

    let (mu, water_level) = water_fill(&gains, big_k as f64 * power);

    // w_k = sqrt(mu_k) V_k A Lambda^{-1} ebar_k / |ebar_k|
    let mut w = CMatrix::zeros(total_rank, big_k);
    for k in 0..big_k {
        if mu[k] == 0.0 {
            continue;
        }
        let mut scaled = ebar.column(k).clone_owned();
        let norm = scaled.norm();
        for (i, &lam) in lambda.iter().enumerate() {
            scaled[i] /= lam;
        }
        let z = &a * scaled * C64::new(mu[k].sqrt() / norm, 0.0);
        let mut r = 0;
        for (b, &kappa) in bases.bases.iter().zip(&plan.kappas) {
            let block = b.adjoint() * &z * phase(k, kappa as i64, big_k);
            w.view_mut((r, k), (b.ncols(), 1)).copy_from(&block);
            r += b.ncols();
        }
    }

    let case = if m_t >= big_k {
        FactorizationCase::Direct
    } else if total_rank <= m_t {
        FactorizationCase::Split
    } else {
        FactorizationCase::Truncated
    };
    let mut x_bar = CMatrix::zeros(total_rank, m_t);
    let mut u = CMatrix::zeros(m_t, big_k);
    let mut approximate = false;
    let mut w_rank = 0;
    if mu.iter().any(|&m| m > 0.0) {
        if case == FactorizationCase::Direct {
            x_bar.columns_mut(0, big_k).copy_from(&w);
            for k in 0..big_k {
                u[(k, k)] = C64::new(1.0, 0.0);
            }
            w_rank = big_k.min(total_rank);
        } else {
            let svd = reduced_svd(&w)?;
            w_rank = svd.rank();
            let r = w_rank.min(m_t);
            approximate = w_rank > m_t;
            x_bar.columns_mut(0, r).copy_from(&svd.left.columns(0, r));
            for i in 0..r {
                let row = svd.right.column(i).adjoint() * C64::new(svd.singulars[i], 0.0);
                u.row_mut(i).copy_from(&row);
            }
        }
    }
    let time = bases.with_stacked_inner(&x_bar)?;
    if approximate {
        let p = transmit_power_analytic(&time, &u, plan);
        if p > 0.0 {
            u *= C64::new((power / p).sqrt(), 0.0);
        }
    }

    let gamma = achieved_snrs(ch, plan, &time, &u, noise_power);
    let gamma_relaxed = mu.iter().zip(&gains).map(|(m, g)| m * g).collect();
    Ok(JointSolution {
        time,
        freq: FrequencyBeamformers { u, w, mu, water_level },
        gains,
        gamma_relaxed,
        gamma,
        case,
        approximate,
        w_rank,
    })
}

/// Column-major complex matrix for structured-text export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixRecord {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.re.len() != self.rows * self.cols || self.im.len() != self.re.len() {
            return Err(Error::Dimension("matrix record entry count".into()));
        }
        Ok(CMatrix::from_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| C64::new(r, i)),
        ))
    }
}

/// Everything needed to re-run a link with fixed beamformers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerBundle {
    pub k: usize,
    pub kappas: Vec<usize>,
    pub n_span_target: usize,
    /// One basis per compensation.
    pub bases: Vec<MatrixRecord>,
    /// Stacked inner blocks `Xbar`.
    pub x_bar: MatrixRecord,
    pub u: MatrixRecord,
    pub mu: Vec<f64>,
    pub water_level: f64,
}

impl BeamformerBundle {
    pub fn new(plan: &DelayPlan, sol: &JointSolution) -> Self {
        Self {
            k: sol.freq.u.ncols(),
            kappas: plan.kappas.clone(),
            n_span_target: plan.n_span_target,
            bases: sol.time.bases.iter().map(MatrixRecord::from_matrix).collect(),
            x_bar: MatrixRecord::from_matrix(&sol.time.stacked_inner()),
            u: MatrixRecord::from_matrix(&sol.freq.u),
            mu: sol.freq.mu.clone(),
            water_level: sol.freq.water_level,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Rebuilds the time-domain beamformers and `U`.
    pub fn beamformers(&self) -> Result<(TimeDomainBeamformers, CMatrix)> {
        let bases = self
            .bases
            .iter()
            .map(MatrixRecord::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        let shell = TimeDomainBeamformers {
            inner: bases.iter().map(|b| b.adjoint()).collect(),
            bases,
        };
        let tbf = shell.with_stacked_inner(&self.x_bar.to_matrix()?)?;
        Ok((tbf, self.u.to_matrix()?))
    }
}
