//! Generic DAM: `L'` delay pre-compensations that squeeze the channel delay
//! spread down to a chosen residual `n'_span` instead of zero.
//!
//! Compensation `l'` shifts the stream by `kappa_l' = n_max - n_{L-L'+l'}`.
//! Paths whose shifted arrival `n_l + kappa_l'` falls outside the window
//! `[n_max - n'_span, n_max]` are zero-forced by that compensation's filter
//! `F_l' = Hbar_l'^perp Xbar_l'`.

use nalgebra::RowDVector;
use serde::{Deserialize, Serialize};

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::numerics::{orth_complement, spectral_norm, CMatrix, C64};

pub type CRow = RowDVector<C64>;

/// Relative threshold below which a path component `h_l^H F_l'` counts as
/// zero-forced.
pub const COMPONENT_TOL: f64 = 1e-9;

/// Handling of paths that lie outside the window for every compensation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncoveredPolicy {
    /// Refuse the plan.
    #[default]
    Reject,
    /// Accept the plan; the energy of those paths is zero-forced away. The
    /// discarded indices are recorded in the plan.
    Discard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayPlan {
    pub l_prime: usize,
    /// `kappas[j]` for compensation `j = 0..L'`.
    pub kappas: Vec<usize>,
    pub n_span_target: usize,
    pub n_max: usize,
    /// Paths zero-forced by compensation `j` (0-based path indices).
    pub outside_sets: Vec<Vec<usize>>,
    /// Paths passed by compensation `j`.
    pub inside_sets: Vec<Vec<usize>>,
    /// Paths in no inside set. Empty unless built with
    /// [`UncoveredPolicy::Discard`].
    pub discarded: Vec<usize>,
}

impl DelayPlan {
    /// Inclusive arrival window `[n_max - n'_span, n_max]`.
    pub fn window(&self) -> (usize, usize) {
        (self.n_max - self.n_span_target, self.n_max)
    }

    /// `|L_l'|` per compensation: the ZF burden each filter carries.
    pub fn outside_counts(&self) -> Vec<usize> {
        self.outside_sets.iter().map(Vec::len).collect()
    }

    pub fn max_kappa(&self) -> usize {
        self.kappas.iter().copied().max().unwrap_or(0)
    }

    pub fn is_perfect(&self) -> bool {
        self.n_span_target == 0
    }

    /// Antennas needed for the window ZF constraints.
    pub fn required_antennas(&self) -> usize {
        self.outside_counts().into_iter().max().unwrap_or(0) + 1
    }

    pub fn export(&self) -> PlanExport {
        PlanExport {
            l_prime: self.l_prime,
            kappas: self.kappas.clone(),
            n_span_target: self.n_span_target,
            outside_sets: self.outside_sets.clone(),
        }
    }
}

/// Structured-text form of a plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanExport {
    pub l_prime: usize,
    pub kappas: Vec<usize>,
    pub n_span_target: usize,
    pub outside_sets: Vec<Vec<usize>>,
}

fn window_sets(delays: &[usize], kappa: usize, lo: usize, hi: usize) -> (Vec<usize>, Vec<usize>) {
    let mut outside = Vec::new();
    let mut inside = Vec::new();
    for (l, &n) in delays.iter().enumerate() {
        let arrival = n + kappa;
        if arrival >= lo && arrival <= hi {
            inside.push(l);
        } else {
            outside.push(l);
        }
    }
    (outside, inside)
}

fn plan_unchecked(ch: &MultipathChannel, l_prime: usize, n_span_target: usize) -> DelayPlan {
    let delays = ch.delays();
    let l_count = delays.len();
    let n_max = ch.n_max();
    let kappas: Vec<usize> = (0..l_prime)
        .map(|j| n_max - delays[l_count - l_prime + j])
        .collect();
    let lo = n_max - n_span_target;
    let (outside_sets, inside_sets) = kappas
        .iter()
        .map(|&k| window_sets(&delays, k, lo, n_max))
        .unzip();
    DelayPlan {
        l_prime,
        kappas,
        n_span_target,
        n_max,
        outside_sets,
        inside_sets,
        discarded: Vec::new(),
    }
}

/// Smallest `n'_span >= from` for which the antenna count supports the window
/// ZF constraints, if any.
pub fn minimal_feasible_span(ch: &MultipathChannel, l_prime: usize, from: usize) -> Option<usize> {
    (from..=ch.n_span()).find(|&n| plan_unchecked(ch, l_prime, n).required_antennas() <= ch.m_t())
}

/// Delay plan with the default [`UncoveredPolicy::Reject`].
pub fn make_delay_plan(ch: &MultipathChannel, l_prime: usize, n_span_target: usize) -> Result<DelayPlan> {
    make_delay_plan_with(ch, l_prime, n_span_target, UncoveredPolicy::Reject)
}

/// Builds the plan anchored on the `L'` largest delays.
///
/// `n'_span = n_span` is accepted so that the conventional pass-through plan
/// (`L' = 1`, `kappa = 0`) is expressible.
pub fn make_delay_plan_with(
    ch: &MultipathChannel,
    l_prime: usize,
    n_span_target: usize,
    policy: UncoveredPolicy,
) -> Result<DelayPlan> {
    let l_count = ch.num_paths();
    if l_prime == 0 || l_prime > l_count {
        return Err(Error::InvalidConfig(format!(
            "L' = {l_prime} must lie in 1..={l_count}"
        )));
    }
    if n_span_target > ch.n_span() {
        return Err(Error::InvalidConfig(format!(
            "target span {n_span_target} exceeds the channel delay spread {}",
            ch.n_span()
        )));
    }
    let mut plan = plan_unchecked(ch, l_prime, n_span_target);
    if plan.required_antennas() > ch.m_t() {
        return Err(Error::PlanInfeasible {
            requested: n_span_target,
            minimal: minimal_feasible_span(ch, l_prime, n_span_target + 1),
        });
    }
    let uncovered: Vec<usize> = (0..l_count)
        .filter(|l| !plan.inside_sets.iter().any(|s| s.contains(l)))
        .collect();
    if !uncovered.is_empty() {
        match policy {
            UncoveredPolicy::Reject => return Err(Error::UncoveredPaths { paths: uncovered }),
            UncoveredPolicy::Discard => plan.discarded = uncovered,
        }
    }
    Ok(plan)
}

/// Window-ZF time-domain filters `F_l' = Hbar_l'^perp Xbar_l'`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeDomainBeamformers {
    /// `M_t x rbar_l'` orthonormal bases of the complement of the outside set.
    pub bases: Vec<CMatrix>,
    /// `rbar_l' x M_t` inner blocks.
    pub inner: Vec<CMatrix>,
}

impl TimeDomainBeamformers {
    pub fn m_t(&self) -> usize {
        self.bases[0].nrows()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }

    pub fn total_rank(&self) -> usize {
        self.ranks().iter().sum()
    }

    /// `F_l'` for every compensation.
    pub fn filters(&self) -> Vec<CMatrix> {
        self.bases.iter().zip(&self.inner).map(|(b, x)| b * x).collect()
    }

    /// Inner blocks stacked vertically, `(sum rbar) x M_t`.
    pub fn stacked_inner(&self) -> CMatrix {
        let rows = self.total_rank();
        let cols = self.inner[0].ncols();
        let mut out = CMatrix::zeros(rows, cols);
        let mut r = 0;
        for x in &self.inner {
            out.view_mut((r, 0), (x.nrows(), cols)).copy_from(x);
            r += x.nrows();
        }
        out
    }

    /// Replaces the inner blocks by slices of a stacked `(sum rbar) x N`
    /// matrix.
    pub fn with_stacked_inner(&self, stacked: &CMatrix) -> Result<Self> {
        if stacked.nrows() != self.total_rank() {
            return Err(Error::Dimension(format!(
                "stacked inner matrix has {} rows, expected {}",
                stacked.nrows(),
                self.total_rank()
            )));
        }
        let mut inner = Vec::with_capacity(self.bases.len());
        let mut r = 0;
        for b in &self.bases {
            inner.push(stacked.rows(r, b.ncols()).clone_owned());
            r += b.ncols();
        }
        Ok(Self {
            bases: self.bases.clone(),
            inner,
        })
    }
}

/// Bases of the window ZF constraints. Each inner block starts as
/// `(Hbar_l'^perp)^H`, making `F_l'` the orthogonal projector onto the
/// complement of the outside set.
pub fn zf_time_matrices(ch: &MultipathChannel, plan: &DelayPlan) -> Result<TimeDomainBeamformers> {
    let mut bases = Vec::with_capacity(plan.l_prime);
    for outside in &plan.outside_sets {
        bases.push(orth_complement(&ch.gain_matrix(outside))?);
    }
    let inner = bases.iter().map(|b| b.adjoint()).collect();
    Ok(TimeDomainBeamformers { bases, inner })
}

/// `g_l'^H[t]` as `(compensation, path)` pairs: path `l` reaches residual tap
/// `t` through compensation `j` when `n_l + kappa_j = t + n_max - n'_span`.
pub fn tap_components(ch: &MultipathChannel, plan: &DelayPlan) -> Vec<Vec<(usize, usize)>> {
    let base = plan.n_max - plan.n_span_target;
    let mut taps = vec![Vec::new(); plan.n_span_target + 1];
    for (j, inside) in plan.inside_sets.iter().enumerate() {
        for &l in inside {
            let t = ch.delay(l) + plan.kappas[j] - base;
            taps[t].push((j, l));
        }
    }
    taps
}

/// Residual channel taps `t = 0..=n'_span`, each a `1 x M_t` row:
/// `tap[t] = sum_l' g_l'^H[t] F_l'`.
pub fn effective_taps(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
) -> Vec<CRow> {
    let filters = tbf.filters();
    let cols = filters[0].ncols();
    tap_components(ch, plan)
        .into_iter()
        .map(|comps| {
            let mut row = CRow::zeros(cols);
            for (j, l) in comps {
                row += ch.gain(l).adjoint() * &filters[j];
            }
            row
        })
        .collect()
}

/// Delay spread actually seen after precoding: `max - min` of `n_l + kappa_l'`
/// over components with `h_l^H F_l'` numerically nonzero.
pub fn achieved_span(
    ch: &MultipathChannel,
    plan: &DelayPlan,
    tbf: &TimeDomainBeamformers,
) -> Result<usize> {
    let filters = tbf.filters();
    let fscale = filters.iter().map(spectral_norm).fold(0.0, f64::max);
    let hscale = (0..ch.num_paths()).map(|l| ch.gain(l).norm()).fold(0.0, f64::max);
    let tol = COMPONENT_TOL * fscale * hscale;
    let mut lo = usize::MAX;
    let mut hi = 0;
    for (j, f) in filters.iter().enumerate() {
        for l in 0..ch.num_paths() {
            if (ch.gain(l).adjoint() * f).norm() > tol {
                let arrival = ch.delay(l) + plan.kappas[j];
                lo = lo.min(arrival);
                hi = hi.max(arrival);
            }
        }
    }
    if lo == usize::MAX {
        return Err(Error::EmptyComponentSet);
    }
    Ok(hi - lo)
}

/// `qbar[i] = sum_l' F_l' d[i - kappa_l']` for an `M_t x N` input stream
/// (`F_l'` may be rectangular, `M_t x N_in`). Output has `N + max kappa`
/// columns.
pub fn precode_time(d: &CMatrix, plan: &DelayPlan, tbf: &TimeDomainBeamformers) -> Result<CMatrix> {
    let filters = tbf.filters();
    if filters[0].ncols() != d.nrows() {
        return Err(Error::Dimension(format!(
            "filters take {} inputs, stream has {} rows",
            filters[0].ncols(),
            d.nrows()
        )));
    }
    let n = d.ncols();
    let mut out = CMatrix::zeros(filters[0].nrows(), n + plan.max_kappa());
    for (f, &kappa) in filters.iter().zip(&plan.kappas) {
        let shaped = f * d;
        let mut dst = out.columns_mut(kappa, n);
        dst += shaped;
    }
    Ok(out)
}
