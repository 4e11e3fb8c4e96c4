//! Discrete-time multipath MISO channel: `h[n] = sum_l h_l delta[n - n_l]`.
//!
//! Each temporal-resolvable path bundles one or more sub-paths sharing a delay
//! but leaving the uniform linear array at different angles:
//! `h_l = alpha_l / sqrt(mu_l) * sum_i upsilon_li a(theta_li)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cis, CMatrix, CVector, C64};
use crate::rng::{complex_normal, trial_rng};

/// Half-wavelength ULA response, entry `m` (0-based) is `e^{-j pi m cos theta}`.
///
/// `theta` is measured from the array axis, so `pi/2` is broadside.
pub fn array_response(theta: f64, m_t: usize) -> CVector {
    let c = theta.cos();
    CVector::from_fn(m_t, |m, _| cis(-PI * m as f64 * c))
}

/// Nearest integer sample delay of `tau` seconds at bandwidth `b` Hz.
pub fn discretize_delay(tau: f64, b: f64) -> usize {
    (tau * b).round().max(0.0) as usize
}

/// Normalized squared inner product `|a^H b|^2 / (|a|^2 |b|^2)`.
pub fn path_correlation(a: &CVector, b: &CVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "correlation of vectors with lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let na = a.norm_squared();
    let nb = b.norm_squared();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    let rho = a.dotc(b).norm_sqr() / (na * nb);
    Ok(rho.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubPath {
    pub coefficient: C64,
    /// Angle of departure from the array axis, radians.
    pub aod: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultipathPath {
    pub gain: CVector,
    pub delay: usize,
    /// Complex path gain `alpha_l`; 1 for channels built from raw vectors.
    pub alpha: C64,
    /// Empty for channels built from raw vectors.
    pub subpaths: Vec<SubPath>,
}

/// What to do when two supplied paths share a delay bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DuplicateDelays {
    Reject,
    /// Sum the gain vectors of paths that share a delay.
    Merge,
}

/// Multipath channel with paths sorted by strictly increasing delay.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel {
    m_t: usize,
    bandwidth_hz: f64,
    paths: Vec<MultipathPath>,
}

impl MultipathChannel {
    /// Builds a channel from `(delay, gain)` pairs in any order.
    pub fn from_gains(
        m_t: usize,
        bandwidth_hz: f64,
        gains: Vec<(usize, CVector)>,
        duplicates: DuplicateDelays,
    ) -> Result<Self> {
        let paths = gains
            .into_iter()
            .map(|(delay, gain)| MultipathPath {
                gain,
                delay,
                alpha: C64::new(1.0, 0.0),
                subpaths: Vec::new(),
            })
            .collect();
        Self::from_paths(m_t, bandwidth_hz, paths, duplicates)
    }

    pub fn from_paths(
        m_t: usize,
        bandwidth_hz: f64,
        mut paths: Vec<MultipathPath>,
        duplicates: DuplicateDelays,
    ) -> Result<Self> {
        if m_t == 0 {
            return Err(Error::InvalidConfig("antenna count must be at least 1".into()));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth {bandwidth_hz} Hz")));
        }
        if paths.is_empty() {
            return Err(Error::InvalidConfig("channel needs at least one path".into()));
        }
        for p in &paths {
            if p.gain.len() != m_t {
                return Err(Error::Dimension(format!(
                    "path gain has length {}, expected {m_t}",
                    p.gain.len()
                )));
            }
            if p.gain.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidConfig("path gain has non-finite entries".into()));
            }
        }
        paths.sort_by_key(|p| p.delay);
        let mut merged: Vec<MultipathPath> = Vec::with_capacity(paths.len());
        for p in paths {
            match merged.last_mut() {
                Some(last) if last.delay == p.delay => match duplicates {
                    DuplicateDelays::Reject => {
                        return Err(Error::InvalidConfig(format!(
                            "two paths share delay {}",
                            p.delay
                        )))
                    }
                    DuplicateDelays::Merge => {
                        last.gain += &p.gain;
                        last.subpaths.extend(p.subpaths);
                    }
                },
                _ => merged.push(p),
            }
        }
        if merged.iter().any(|p| p.gain.norm_squared() == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            m_t,
            bandwidth_hz,
            paths: merged,
        })
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.bandwidth_hz
    }

    pub fn paths(&self) -> &[MultipathPath] {
        &self.paths
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn gain(&self, l: usize) -> &CVector {
        &self.paths[l].gain
    }

    pub fn delay(&self, l: usize) -> usize {
        self.paths[l].delay
    }

    pub fn delays(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.delay).collect()
    }

    pub fn n_min(&self) -> usize {
        self.paths[0].delay
    }

    pub fn n_max(&self) -> usize {
        self.paths[self.paths.len() - 1].delay
    }

    pub fn n_span(&self) -> usize {
        self.n_max() - self.n_min()
    }

    /// `sum_l |h_l|^2`.
    pub fn total_energy(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_squared()).sum()
    }

    /// Gain vectors of the selected paths stacked as columns.
    pub fn gain_matrix(&self, indices: &[usize]) -> CMatrix {
        let mut m = CMatrix::zeros(self.m_t, indices.len());
        for (c, &l) in indices.iter().enumerate() {
            m.set_column(c, &self.paths[l].gain);
        }
        m
    }

    /// Taps relative to the first arrival: tap `t` is `h_l` if `n_l = n_min + t`.
    pub fn raw_effective_taps(&self) -> Vec<CVector> {
        let mut taps = vec![CVector::zeros(self.m_t); self.n_span() + 1];
        let n_min = self.n_min();
        for p in &self.paths {
            taps[p.delay - n_min] = p.gain.clone();
        }
        taps
    }

    /// Received samples `y[n] = sum_l h_l^H x[n - n_l]` for `x` given as one
    /// row per antenna. The output has `len + n_max` samples.
    pub fn convolve(&self, x: &CMatrix) -> Result<Vec<C64>> {
        if x.nrows() != self.m_t {
            return Err(Error::Dimension(format!(
                "transmit stream has {} antenna rows, channel has {}",
                x.nrows(),
                self.m_t
            )));
        }
        let len = x.ncols();
        let mut y = vec![C64::new(0.0, 0.0); len + self.n_max()];
        for p in &self.paths {
            // h^H x per sample
            let proj = p.gain.adjoint() * x;
            for (n, v) in proj.iter().enumerate() {
                y[n + p.delay] += v;
            }
        }
        Ok(y)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ChannelFile {
            m_t: self.m_t,
            bandwidth_hz: self.bandwidth_hz,
            paths: self
                .paths
                .iter()
                .map(|p| PathRecord {
                    delay_samples: p.delay,
                    gain_real: p.gain.iter().map(|z| z.re).collect(),
                    gain_imag: p.gain.iter().map(|z| z.im).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses the JSON produced by [`MultipathChannel::to_json`].
    ///
    /// Only gains and delays are stored, so imported paths have `alpha = 1`
    /// and no sub-path record.
    pub fn from_json(text: &str, duplicates: DuplicateDelays) -> Result<Self> {
        let file: ChannelFile = serde_json::from_str(text)?;
        let mut gains = Vec::with_capacity(file.paths.len());
        for rec in file.paths {
            if rec.gain_real.len() != rec.gain_imag.len() {
                return Err(Error::Dimension(
                    "gain_real and gain_imag lengths differ".into(),
                ));
            }
            let g = CVector::from_iterator(
                rec.gain_real.len(),
                rec.gain_real
                    .iter()
                    .zip(&rec.gain_imag)
                    .map(|(&re, &im)| C64::new(re, im)),
            );
            gains.push((rec.delay_samples, g));
        }
        Self::from_gains(file.m_t, file.bandwidth_hz, gains, duplicates)
    }
}

/// On-disk channel schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub m_t: usize,
    pub bandwidth_hz: f64,
    pub paths: Vec<PathRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathRecord {
    pub delay_samples: usize,
    pub gain_real: Vec<f64>,
    pub gain_imag: Vec<f64>,
}

/// Average power of each path as a function of its delay. Weights are
/// normalized to sum to one, so the expected channel energy is `M_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PowerDelayProfile {
    Uniform,
    /// Power proportional to `exp(-delay / decay_samples)`.
    Exponential { decay_samples: f64 },
}

/// Distribution of the sub-path coefficients `upsilon_li`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubpathCoefficients {
    /// Unit magnitude, uniform phase.
    #[default]
    UnitPhase,
    /// Circularly-symmetric complex Gaussian with unit variance.
    ComplexGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelGenConfig {
    pub m_t: usize,
    pub num_paths: usize,
    pub tau_max_s: f64,
    pub bandwidth_hz: f64,
    /// Sub-path count per path is uniform on `1..=mu_max`.
    pub mu_max: usize,
    /// AoD interval in radians, measured from broadside (0 = broadside).
    pub aod_range_rad: (f64, f64),
    pub pdp: PowerDelayProfile,
    #[serde(default)]
    pub subpath_coefficients: SubpathCoefficients,
    pub seed: u64,
}

impl ChannelGenConfig {
    /// Largest discretized delay a path may take.
    pub fn max_delay_bin(&self) -> usize {
        discretize_delay(self.tau_max_s, self.bandwidth_hz)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_t == 0 {
            return Err(Error::InvalidConfig("m_t must be at least 1".into()));
        }
        if self.num_paths == 0 {
            return Err(Error::InvalidConfig("num_paths must be at least 1".into()));
        }
        if self.mu_max == 0 {
            return Err(Error::InvalidConfig("mu_max must be at least 1".into()));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::InvalidConfig("bandwidth must be positive".into()));
        }
        if !(self.tau_max_s >= 0.0 && self.tau_max_s.is_finite()) {
            return Err(Error::InvalidConfig("tau_max must be non-negative".into()));
        }
        let (lo, hi) = self.aod_range_rad;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidConfig(format!("AoD range ({lo}, {hi})")));
        }
        if let PowerDelayProfile::Exponential { decay_samples } = self.pdp {
            if !(decay_samples > 0.0 && decay_samples.is_finite()) {
                return Err(Error::InvalidConfig("PDP decay must be positive".into()));
            }
        }
        let bins = self.max_delay_bin() + 1;
        if bins < self.num_paths {
            return Err(Error::DelayPlacement {
                paths: self.num_paths,
                bins,
            });
        }
        Ok(())
    }
}

fn draw_distinct_delays(rng: &mut ChaCha8Rng, count: usize, max_bin: usize) -> Vec<usize> {
    let mut delays: Vec<usize> = Vec::with_capacity(count);
    while delays.len() < count {
        let d = rng.random_range(0..=max_bin);
        if !delays.contains(&d) {
            delays.push(d);
        }
    }
    delays.sort_unstable();
    delays
}

/// Draws one channel realization. The result depends only on `(cfg, trial)`:
/// the generator is ChaCha8 seeded with `cfg.seed` on stream `trial`.
pub fn generate_channel(cfg: &ChannelGenConfig, trial: u64) -> Result<MultipathChannel> {
    cfg.validate()?;
    let mut rng = trial_rng(cfg.seed, trial);
    let delays = draw_distinct_delays(&mut rng, cfg.num_paths, cfg.max_delay_bin());

    let raw: Vec<f64> = delays
        .iter()
        .map(|&d| match cfg.pdp {
            PowerDelayProfile::Uniform => 1.0,
            PowerDelayProfile::Exponential { decay_samples } => (-(d as f64) / decay_samples).exp(),
        })
        .collect();
    let total: f64 = raw.iter().sum();

    let (lo, hi) = cfg.aod_range_rad;
    let mut paths = Vec::with_capacity(cfg.num_paths);
    for (&delay, &w) in delays.iter().zip(&raw) {
        let alpha = complex_normal(&mut rng, w / total);
        let mu = rng.random_range(1..=cfg.mu_max);
        let mut gain = CVector::zeros(cfg.m_t);
        let mut subpaths = Vec::with_capacity(mu);
        for _ in 0..mu {
            let from_broadside = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let aod = PI / 2.0 - from_broadside;
            let coefficient = match cfg.subpath_coefficients {
                SubpathCoefficients::UnitPhase => cis(rng.random_range(0.0..2.0 * PI)),
                SubpathCoefficients::ComplexGaussian => complex_normal(&mut rng, 1.0),
            };
            gain += array_response(aod, cfg.m_t) * coefficient;
            subpaths.push(SubPath { coefficient, aod });
        }
        gain *= alpha / (mu as f64).sqrt();
        paths.push(MultipathPath {
            gain,
            delay,
            alpha,
            subpaths,
        });
    }
    MultipathChannel::from_paths(cfg.m_t, cfg.bandwidth_hz, paths, DuplicateDelays::Reject)
}
