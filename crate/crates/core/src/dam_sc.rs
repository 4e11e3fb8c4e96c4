//! Single-carrier perfect DAM: every path gets its own beamformer and a delay
//! pre-compensation `kappa_l = n_max - n_l`, so all arrivals line up at
//! `n_max` and the channel becomes a single tap.

use rand::Rng;

use crate::channel::MultipathChannel;
use crate::error::{Error, Result};
use crate::numerics::{orth_complement, CMatrix, CVector, C64};
use crate::rng::complex_normal;

#[derive(Debug, Clone, PartialEq)]
pub struct PathBeamformers {
    /// One vector per path, same order as the channel paths.
    pub vectors: Vec<CVector>,
    pub kappas: Vec<usize>,
    pub power: f64,
}

impl PathBeamformers {
    pub fn total_power(&self) -> f64 {
        self.vectors.iter().map(|f| f.norm_squared()).sum()
    }

    pub fn max_kappa(&self) -> usize {
        self.kappas.iter().copied().max().unwrap_or(0)
    }
}

fn aligning_kappas(ch: &MultipathChannel) -> Vec<usize> {
    let n_max = ch.n_max();
    ch.delays().iter().map(|&n| n_max - n).collect()
}

/// Path-based MRT: `f_l = sqrt(P) h_l / sqrt(sum_k |h_k|^2)`.
pub fn mrt_beamformers(ch: &MultipathChannel, power: f64) -> PathBeamformers {
    let xi = 1.0 / ch.total_energy().sqrt();
    let scale = C64::new(power.sqrt() * xi, 0.0);
    PathBeamformers {
        vectors: ch.paths().iter().map(|p| &p.gain * scale).collect(),
        kappas: aligning_kappas(ch),
        power,
    }
}

/// Projections `H_l^perp (H_l^perp)^H h_l` of each path onto the orthogonal
/// complement of all other paths.
fn zf_projections(ch: &MultipathChannel) -> Result<Vec<CVector>> {
    let l_count = ch.num_paths();
    if ch.m_t() < l_count {
        return Err(Error::ZfInfeasible {
            antennas: ch.m_t(),
            paths: l_count,
        });
    }
    (0..l_count)
        .map(|l| {
            let others: Vec<usize> = (0..l_count).filter(|&i| i != l).collect();
            let basis = orth_complement(&ch.gain_matrix(&others))?;
            Ok(&basis * (basis.adjoint() * ch.gain(l)))
        })
        .collect()
}

/// Path-based ZF beamformers maximizing the aligned SNR subject to
/// `h_l^H f_l' = 0` for `l != l'`.
pub fn zf_beamformers(ch: &MultipathChannel, power: f64) -> Result<PathBeamformers> {
    let proj = zf_projections(ch)?;
    let denom: f64 = proj.iter().map(|p| p.norm_squared()).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let scale = C64::new((power / denom).sqrt(), 0.0);
    Ok(PathBeamformers {
        vectors: proj.into_iter().map(|p| p * scale).collect(),
        kappas: aligning_kappas(ch),
        power,
    })
}

/// Closed-form ZF SNR `(P / sigma^2) sum_l |(H_l^perp)^H h_l|^2`.
pub fn zf_snr_closed_form(ch: &MultipathChannel, power: f64, noise_power: f64) -> Result<f64> {
    let proj = zf_projections(ch)?;
    Ok(power / noise_power * proj.iter().map(|p| p.norm_squared()).sum::<f64>())
}

/// Aligned-signal SNR `|sum_l h_l^H f_l|^2 / sigma^2`. Exact only when the
/// cross terms `h_l^H f_l'` vanish (ZF), otherwise ISI is ignored.
pub fn sc_snr(bf: &PathBeamformers, ch: &MultipathChannel, noise_power: f64) -> f64 {
    desired_amplitude(bf, ch).norm_sqr() / noise_power
}

fn desired_amplitude(bf: &PathBeamformers, ch: &MultipathChannel) -> C64 {
    ch.paths()
        .iter()
        .zip(&bf.vectors)
        .map(|(p, f)| p.gain.dotc(f))
        .sum()
}

/// Transmit samples `x[n] = sum_l f_l s[n - kappa_l]`, one row per antenna,
/// `len(s) + max kappa` columns.
pub fn transmit_stream(bf: &PathBeamformers, symbols: &[C64]) -> CMatrix {
    let m_t = bf.vectors.first().map_or(0, |f| f.len());
    let len = symbols.len() + bf.max_kappa();
    let mut x = CMatrix::zeros(m_t, len);
    for (f, &kappa) in bf.vectors.iter().zip(&bf.kappas) {
        for (j, &s) in symbols.iter().enumerate() {
            let mut col = x.column_mut(j + kappa);
            col.axpy(s, f, C64::new(1.0, 0.0));
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScLinkReport {
    /// `|sum_l h_l^H f_l|^2 / sigma^2`.
    pub snr_analytic: f64,
    /// Least-squares estimate of the desired amplitude from noiseless samples.
    pub desired_amplitude: C64,
    /// `|desired_amplitude|^2 * mean |s|^2`.
    pub desired_power: f64,
    /// Mean power left after removing the ideal aligned component.
    pub isi_power: f64,
    pub noise_power: f64,
    pub ser_samples: usize,
}

impl ScLinkReport {
    pub fn isi_to_signal(&self) -> f64 {
        self.isi_power / self.desired_power
    }

    pub fn snr_simulated(&self, noise_power: f64) -> f64 {
        self.desired_power / noise_power
    }
}

/// Time-domain single-carrier link. The symbol stream is framed with a
/// leading zero guard of `guard` samples, transmitted through the channel,
/// and read by a receiver locked to delay `n_max`.
pub fn simulate_sc_link<R: Rng + ?Sized>(
    ch: &MultipathChannel,
    bf: &PathBeamformers,
    symbols: &[C64],
    noise_power: f64,
    guard: usize,
    rng: &mut R,
) -> Result<ScLinkReport> {
    if bf.vectors.len() != ch.num_paths() || bf.kappas.len() != ch.num_paths() {
        return Err(Error::Dimension("one beamformer per path required".into()));
    }
    let needed = (ch.n_max() + guard).max(1);
    if symbols.len() < needed {
        return Err(Error::StreamTooShort {
            len: symbols.len(),
            needed,
        });
    }
    let mut framed = vec![C64::new(0.0, 0.0); guard];
    framed.extend_from_slice(symbols);
    let x = transmit_stream(bf, &framed);
    let received = ch.convolve(&x)?;

    let ideal = desired_amplitude(bf, ch);
    let lock = ch.n_max() + guard;
    let rx = &received[lock..lock + symbols.len()];

    let sym_energy: f64 = symbols.iter().map(|s| s.norm_sqr()).sum();
    let cross: C64 = rx.iter().zip(symbols).map(|(y, s)| y * s.conj()).sum();
    let estimate = cross / sym_energy;
    let n = symbols.len() as f64;
    let isi_power = rx
        .iter()
        .zip(symbols)
        .map(|(y, s)| (y - ideal * s).norm_sqr())
        .sum::<f64>()
        / n;
    let measured_noise = if noise_power > 0.0 {
        (0..symbols.len())
            .map(|_| complex_normal(rng, noise_power).norm_sqr())
            .sum::<f64>()
            / n
    } else {
        0.0
    };
    Ok(ScLinkReport {
        snr_analytic: ideal.norm_sqr() / noise_power,
        desired_amplitude: estimate,
        desired_power: estimate.norm_sqr() * sym_energy / n,
        isi_power,
        noise_power: measured_noise,
        ser_samples: symbols.len(),
    })
}

/// Spectral efficiency of single-carrier DAM with a guard of `guard` samples
/// per coherence block of `n_c` samples.
pub fn sc_spectral_efficiency(snr: f64, guard: usize, n_c: f64) -> f64 {
    (1.0 - guard as f64 / n_c).max(0.0) * (1.0 + snr).log2()
}
