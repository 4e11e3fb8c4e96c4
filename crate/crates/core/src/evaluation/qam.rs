//! Gray-coded rectangular QAM: mapping, hard demapping and the exact AWGN
//! bit error rate.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::numerics::C64;

/// Rectangular QAM with `levels_i x levels_q` points and independent Gray
/// labels per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qam {
    order: usize,
    levels_i: usize,
    levels_q: usize,
}

impl Qam {
    /// Supported orders: 4, 16, 64, 128 (16 x 8 rectangle) and 256.
    pub fn new(order: usize) -> Result<Self> {
        let (levels_i, levels_q) = match order {
            4 => (2, 2),
            16 => (4, 4),
            64 => (8, 8),
            128 => (16, 8),
            256 => (16, 16),
            _ => return Err(Error::UnsupportedOrder(order)),
        };
        Ok(Self {
            order,
            levels_i,
            levels_q,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_i() + self.bits_q()
    }

    fn bits_i(&self) -> usize {
        self.levels_i.trailing_zeros() as usize
    }

    fn bits_q(&self) -> usize {
        self.levels_q.trailing_zeros() as usize
    }

    /// Half the minimum distance for unit average energy.
    fn scale(&self) -> f64 {
        let (i, q) = (self.levels_i as f64, self.levels_q as f64);
        (3.0 / (i * i + q * q - 2.0)).sqrt()
    }

    /// Maps `bits_per_symbol` bits (first the in-phase label, MSB first).
    pub fn map(&self, bits: &[u8]) -> C64 {
        let (bi, bq) = (self.bits_i(), self.bits_q());
        let re = pam_level(label(&bits[..bi]), self.levels_i);
        let im = pam_level(label(&bits[bi..bi + bq]), self.levels_q);
        C64::new(re, im) * self.scale()
    }

    /// Nearest-point decision, written into `out` (`bits_per_symbol` bits).
    pub fn demap(&self, y: C64, out: &mut [u8]) {
        let s = self.scale();
        let (bi, bq) = (self.bits_i(), self.bits_q());
        write_label(pam_decide(y.re / s, self.levels_i), &mut out[..bi]);
        write_label(pam_decide(y.im / s, self.levels_q), &mut out[bi..bi + bq]);
    }

    /// Exact bit error probability of this constellation over AWGN at
    /// symbol SNR `gamma` (average symbol energy over noise variance).
    pub fn ber_awgn(&self, gamma: f64) -> f64 {
        let gamma = gamma.max(0.0);
        let (i, q) = (self.levels_i as f64, self.levels_q as f64);
        let arg = (3.0 * gamma / (i * i + q * q - 2.0)).sqrt();
        let errs = (1..=self.bits_i())
            .map(|k| pam_bit_error(self.levels_i, k, arg))
            .chain((1..=self.bits_q()).map(|k| pam_bit_error(self.levels_q, k, arg)))
            .sum::<f64>();
        (errs / self.bits_per_symbol() as f64).clamp(0.0, 0.5)
    }
}

/// Error probability of the `k`-th Gray bit of an `m`-level PAM whose
/// decision distance to the nearest neighbour is `arg * sqrt(2) * sigma`.
/// Closed form of Cho and Yoon for Gray-coded PAM.
fn pam_bit_error(m: usize, k: usize, arg: f64) -> f64 {
    let mf = m as f64;
    let p = (1usize << (k - 1)) as f64;
    let terms = ((1.0 - 0.5f64.powi(k as i32)) * mf) as usize;
    let mut sum = 0.0;
    for i in 0..terms {
        let x = i as f64 * p / mf;
        let sign = if (x.floor() as i64) % 2 == 0 { 1.0 } else { -1.0 };
        let weight = p - (x + 0.5).floor();
        sum += sign * weight * erfc((2 * i + 1) as f64 * arg);
    }
    sum / mf
}

fn label(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | (b & 1) as usize)
}

fn write_label(mut value: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (value & 1) as u8;
        value >>= 1;
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn pam_level(gray: usize, m: usize) -> f64 {
    (2 * gray_decode(gray)) as f64 - (m - 1) as f64
}

fn pam_decide(x: f64, m: usize) -> usize {
    let idx = ((x + (m - 1) as f64) / 2.0).round().clamp(0.0, (m - 1) as f64) as usize;
    idx ^ (idx >> 1)
}

/// Bit error probability of Gray QAM of size `order` at SNR `gamma`.
pub fn qam_ber_awgn(gamma: f64, order: usize) -> Result<f64> {
    Ok(Qam::new(order)?.ber_awgn(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, trial_rng};
    use proptest::prelude::*;
    use rand::Rng;

    const ORDERS: [usize; 5] = [4, 16, 64, 128, 256];

    /// Q(x) by Simpson integration of Craig's form
    /// `(1/pi) int_0^{pi/2} exp(-x^2 / (2 sin^2 t)) dt`.
    fn q_numeric(x: f64) -> f64 {
        let n = 2000;
        let h = std::f64::consts::FRAC_PI_2 / n as f64;
        let f = |t: f64| {
            let s = t.sin();
            if s == 0.0 {
                0.0
            } else {
                (-x * x / (2.0 * s * s)).exp()
            }
        };
        let mut acc = f(0.0) + f(std::f64::consts::FRAC_PI_2);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / std::f64::consts::PI
    }

    #[test]
    fn unit_energy_and_round_trip() {
        for order in ORDERS {
            let q = Qam::new(order).unwrap();
            let nb = q.bits_per_symbol();
            let mut energy = 0.0;
            let mut out = vec![0u8; nb];
            for v in 0..order {
                let bits: Vec<u8> = (0..nb).rev().map(|b| ((v >> b) & 1) as u8).collect();
                let s = q.map(&bits);
                energy += s.norm_sqr();
                q.demap(s, &mut out);
                assert_eq!(out, bits);
            }
            assert!((energy / order as f64 - 1.0).abs() < 1e-12, "order {order}");
        }
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let q = Qam::new(64).unwrap();
        let step = 2.0 * q.scale();
        let mut a = [0u8; 6];
        let mut b = [0u8; 6];
        for lvl in 0..7 {
            let x = (2 * lvl) as f64 - 7.0;
            q.demap(C64::new(x * q.scale(), q.scale()), &mut a);
            q.demap(C64::new(x * q.scale() + step, q.scale()), &mut b);
            let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            assert_eq!(diff, 1);
        }
    }

    #[test]
    fn qpsk_matches_q_function() {
        for gamma in [0.5, 2.0, 9.09, 20.0] {
            let exact = qam_ber_awgn(gamma, 4).unwrap();
            let oracle = q_numeric(gamma.sqrt());
            assert!((exact - oracle).abs() < 1e-3 * oracle.max(1e-6), "{gamma}: {exact} vs {oracle}");
        }
    }

    #[test]
    fn limits() {
        for order in ORDERS {
            assert!((qam_ber_awgn(0.0, order).unwrap() - 0.5).abs() < 0.1);
        }
        assert!(qam_ber_awgn(1e6, 4).unwrap() <= 1e-9);
        assert!(matches!(qam_ber_awgn(1.0, 3), Err(Error::UnsupportedOrder(3))));
    }

    #[test]
    fn matches_symbol_simulation() {
        let mut rng = trial_rng(5, 0);
        for (order, gamma_db) in [(16usize, 12.0f64), (128, 18.0), (256, 20.0)] {
            let q = Qam::new(order).unwrap();
            let gamma = 10f64.powf(gamma_db / 10.0);
            let nb = q.bits_per_symbol();
            let (mut errors, mut bits) = (0usize, 0usize);
            let mut tx = vec![0u8; nb];
            let mut rx = vec![0u8; nb];
            while errors < 400 {
                for b in tx.iter_mut() {
                    *b = rng.random::<bool>() as u8;
                }
                let y = q.map(&tx) + complex_normal(&mut rng, 1.0 / gamma);
                q.demap(y, &mut rx);
                errors += tx.iter().zip(&rx).filter(|(a, b)| a != b).count();
                bits += nb;
            }
            let p = q.ber_awgn(gamma);
            let est = errors as f64 / bits as f64;
            let sd = (p * (1.0 - p) / bits as f64).sqrt();
            assert!((est - p).abs() < 4.0 * sd, "order {order}: {est} vs {p}");
        }
    }

    proptest! {
        #[test]
        fn ber_non_increasing(order_idx in 0usize..5, g in 0.0f64..1e3, step in 0.0f64..50.0) {
            let q = Qam::new(ORDERS[order_idx]).unwrap();
            let a = q.ber_awgn(g);
            let b = q.ber_awgn(g + step);
            prop_assert!(b <= a + 1e-15);
            prop_assert!((0.0..=0.5).contains(&a));
        }
    }
}
