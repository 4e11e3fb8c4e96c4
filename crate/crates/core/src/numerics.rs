//! Complex linear-algebra and transform primitives.
//!
//! Matrices are `nalgebra` dense matrices over `Complex64`. Everything here is
//! a pure function of its inputs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Singular values below `RANK_TOL * sigma_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

// Pivoted Gram-Schmidt stops once every residual column is this small
// relative to the largest input column.
const RESIDUAL_TOL: f64 = 1e-13;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// `e^{j phase}`.
#[inline]
pub fn cis(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}

/// Largest entry magnitude, 0 for an empty matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |acc, &s| acc.max(s))
}

/// Numerical rank using the fixed relative tolerance [`RANK_TOL`].
pub fn numerical_rank(m: &CMatrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Orthonormal basis of the orthogonal complement of the column space of `h`.
///
/// `h` is `M x p` with `p < M` and full column rank. The returned `B` is
/// `M x (M - p)` with `h^H B = 0` and `B^H B = I`. The basis is built from
/// the trailing columns of the Householder `Q` factor of `h`, so it is one of
/// many valid choices.
pub fn orth_complement(h: &CMatrix) -> Result<CMatrix> {
    let (m, p) = h.shape();
    if m == 0 {
        return Err(Error::Dimension("orth_complement on a 0-row matrix".into()));
    }
    if p == 0 {
        return Ok(CMatrix::identity(m, m));
    }
    if p >= m {
        return Err(Error::NoComplement { rows: m, cols: p });
    }
    let rank = numerical_rank(h);
    if rank < p {
        return Err(Error::RankDeficient { rank, expected: p });
    }

    let mut a = h.clone();
    let mut reflectors: Vec<CVector> = Vec::with_capacity(p);
    for j in 0..p {
        let x = a.view((j, j), (m - j, 1)).column(0).clone_owned();
        let norm = x.norm();
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * norm;
        let mut v = x;
        v[0] -= alpha;
        let vn = v.norm();
        if vn > 0.0 {
            v /= C64::new(vn, 0.0);
        }
        // A[j.., j..] -= 2 v (v^H A[j.., j..])
        let mut block = a.view_mut((j, j), (m - j, p - j));
        let proj = v.adjoint() * &block;
        block -= (&v * proj) * C64::new(2.0, 0.0);
        reflectors.push(v);
    }

    let mut e = CMatrix::zeros(m, m - p);
    for i in 0..(m - p) {
        e[(p + i, i)] = ONE;
    }
    for (j, v) in reflectors.iter().enumerate().rev() {
        let mut block = e.view_mut((j, 0), (m - j, m - p));
        let proj = v.adjoint() * &block;
        block -= (v * proj) * C64::new(2.0, 0.0);
    }
    Ok(e)
}

/// Reduced singular value decomposition `A = left * diag(singulars) * right^H`.
#[derive(Debug, Clone)]
pub struct ReducedSvd {
    /// `rows x r`, orthonormal columns.
    pub left: CMatrix,
    /// Strictly positive, non-increasing.
    pub singulars: Vec<f64>,
    /// `cols x r`, orthonormal columns.
    pub right: CMatrix,
}

impl ReducedSvd {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.left.clone();
        for (j, &s) in self.singulars.iter().enumerate() {
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.right.adjoint()
    }
}

/// Reduced SVD keeping only the numerically nonzero singular values.
///
/// A pivoted Gram-Schmidt pass first extracts an orthonormal basis `Q` of the
/// column space (stopping at the numerical rank), then the small matrix
/// `Q^H A` is decomposed densely. The cost is `O(rows * cols * rank)`, which
/// matters for the wide low-rank beamformer matrices of the OFDM solver.
pub fn reduced_svd(a: &CMatrix) -> Result<ReducedSvd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Dimension("reduced_svd on an empty matrix".into()));
    }
    let col_norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    let max_col = col_norms.iter().fold(0.0_f64, |acc, &x| acc.max(x));
    if max_col == 0.0 {
        return Err(Error::ZeroMatrix);
    }

    let mut residual = a.clone();
    let mut res_norms = col_norms;
    let mut basis: Vec<CVector> = Vec::new();
    let limit = m.min(n);
    while basis.len() < limit {
        let (jmax, &nmax) = res_norms
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("non-empty");
        if nmax <= RESIDUAL_TOL * max_col {
            break;
        }
        let mut q = residual.column(jmax).clone_owned();
        // second orthogonalisation pass against the accepted basis
        for b in &basis {
            let c = b.dotc(&q);
            q.axpy(-c, b, ONE);
        }
        let qn = q.norm();
        if qn <= RESIDUAL_TOL * max_col {
            res_norms[jmax] = 0.0;
            continue;
        }
        q /= C64::new(qn, 0.0);
        let proj = q.adjoint() * &residual;
        residual -= &q * proj;
        for (j, col) in residual.column_iter().enumerate() {
            res_norms[j] = col.norm();
        }
        basis.push(q);
    }
    if basis.is_empty() {
        return Err(Error::ZeroMatrix);
    }

    let q = CMatrix::from_columns(&basis);
    let small = q.adjoint() * a;
    let svd = small.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let smax = svd.singular_values[order[0]];
    if smax == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax)
        .collect();

    let left_small = CMatrix::from_columns(&keep.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let right = CMatrix::from_columns(
        &keep
            .iter()
            .map(|&i| v_t.row(i).adjoint())
            .collect::<Vec<_>>(),
    );
    Ok(ReducedSvd {
        left: q * left_small,
        singulars: keep.iter().map(|&i| svd.singular_values[i]).collect(),
        right,
    })
}

/// K-point DFT with unitary `1/sqrt(K)` scaling in both directions.
///
/// Forward kernel is `e^{-j 2 pi k n / K}`, inverse is `e^{+j 2 pi k n / K}`.
#[derive(Clone)]
pub struct UnitaryDft {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for UnitaryDft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl UnitaryDft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Dimension("DFT length must be at least 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            scale: 1.0 / (len as f64).sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_in_place(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len, "DFT buffer length");
        self.forward.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }

    pub fn inverse_in_place(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len, "DFT buffer length");
        self.inverse.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }
}

/// One-shot unitary DFT of `x`; see [`UnitaryDft`].
pub fn unitary_dft(x: &[C64], inverse: bool) -> Result<Vec<C64>> {
    let dft = UnitaryDft::new(x.len())?;
    let mut buf = x.to_vec();
    if inverse {
        dft.inverse_in_place(&mut buf);
    } else {
        dft.forward_in_place(&mut buf);
    }
    Ok(buf)
}
