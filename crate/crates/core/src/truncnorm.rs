//! Normal distribution truncated to an interval, sampled by inverting its CDF.
//!
//! Inversion stays exact when the interval sits far in a tail of the parent
//! normal: the upper-tail probability is handled in log space and inverted by
//! a bracketed Newton iteration.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal log density.
pub fn ln_std_normal_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Inverse of [`std_normal_cdf`], polished with Newton steps on the CDF.
pub fn std_normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    if !z.is_finite() {
        return z;
    }
    for _ in 0..2 {
        let density = ln_std_normal_pdf(z).exp();
        if density <= 0.0 {
            break;
        }
        z -= (std_normal_cdf(z) - p) / density;
    }
    z
}

/// `ln P(Z > z)` for a standard normal, accurate far into the upper tail.
pub fn ln_upper_tail(z: f64) -> f64 {
    if z < 30.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        let r = 1.0 / (z * z);
        let series =
            1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r))));
        -0.5 * z * z - z.ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedNormal {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    pub fn new(mean: f64, sd: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(mean.is_finite()
            && sd > 0.0
            && sd.is_finite()
            && lo.is_finite()
            && hi.is_finite()
            && lo < hi)
        {
            return Err(Error::Domain(format!(
                "truncated normal N({mean}, {sd}^2) on [{lo}, {hi}]"
            )));
        }
        Ok(TruncatedNormal { mean, sd, lo, hi })
    }

    fn standard_bounds(&self) -> (f64, f64) {
        (
            (self.lo - self.mean) / self.sd,
            (self.hi - self.mean) / self.sd,
        )
    }

    /// Value below which a fraction `u` of the truncated mass lies.
    pub fn quantile(&self, u: f64) -> f64 {
        let (a, b) = self.standard_bounds();
        let z = if a >= 0.0 {
            upper_tail_quantile(a, b, u)
        } else if b <= 0.0 {
            -upper_tail_quantile(-b, -a, 1.0 - u)
        } else {
            let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
            std_normal_quantile(pa + u * (pb - pa)).clamp(a, b)
        };
        (self.mean + self.sd * z).clamp(self.lo, self.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    /// Mean and variance of the truncated distribution.
    pub fn moments(&self) -> (f64, f64) {
        let (a, b) = self.standard_bounds();
        let (m, v) = if b <= 0.0 {
            let (m, v) = standard_moments(-b, -a);
            (-m, v)
        } else {
            standard_moments(a, b)
        };
        (self.mean + self.sd * m, self.sd * self.sd * v)
    }
}

fn standard_moments(a: f64, b: f64) -> (f64, f64) {
    let (ra, rb) = if a >= 0.0 {
        let (la, lb) = (ln_upper_tail(a), ln_upper_tail(b));
        let ln_z = la + (-(lb - la).exp_m1()).ln();
        (
            (ln_std_normal_pdf(a) - ln_z).exp(),
            (ln_std_normal_pdf(b) - ln_z).exp(),
        )
    } else {
        let z = std_normal_cdf(b) - std_normal_cdf(a);
        (
            ln_std_normal_pdf(a).exp() / z,
            ln_std_normal_pdf(b).exp() / z,
        )
    };
    let m = ra - rb;
    (m, 1.0 + a * ra - b * rb - m * m)
}

/// Quantile of a standard normal truncated to `[a, b]` with `0 <= a < b`.
fn upper_tail_quantile(a: f64, b: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return a;
    }
    if u >= 1.0 {
        return b;
    }
    let (la, lb) = (ln_upper_tail(a), ln_upper_tail(b));
    let target = la + (-u * -(lb - la).exp_m1()).ln_1p();
    let (mut lo, mut hi) = (a, b);
    let mut x = a;
    for _ in 0..200 {
        let lq = ln_upper_tail(x);
        let f = lq - target;
        if f.abs() <= 1e-14 * target.abs().max(1.0) {
            return x;
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -(ln_std_normal_pdf(x) - lq).exp();
        let next = x - f / slope;
        x = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tail_matches_erfc_at_switch() {
        let direct = (0.5 * erfc(30.0 / SQRT_2)).ln();
        assert!((ln_upper_tail(30.0) - direct).abs() < 1e-10 * direct.abs());
        let z = 29.999;
        assert!((ln_upper_tail(z) - ln_upper_tail(30.0)).abs() < 0.04);
    }

    #[test]
    fn quantile_inverts_cdf_in_body() {
        let t = TruncatedNormal::new(0.3, 1.7, -1.0, 2.5).unwrap();
        let (a, b) = t.standard_bounds();
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        for i in 1..20 {
            let u = i as f64 / 20.0;
            let x = t.quantile(u);
            let back = (std_normal_cdf((x - t.mean) / t.sd) - pa) / (pb - pa);
            assert!((back - u).abs() < 1e-12, "u {u} back {back}");
        }
    }

    #[test]
    fn quantile_inverts_cdf_in_far_tail() {
        // interval 50 to 60 standard deviations above the mean
        let t = TruncatedNormal::new(0.0, 1.0, 50.0, 60.0).unwrap();
        for i in 1..10 {
            let u = i as f64 / 10.0;
            let x = t.quantile(u);
            assert!((50.0..=60.0).contains(&x));
            // mass above x relative to mass above 50
            let frac = (ln_upper_tail(x) - ln_upper_tail(50.0)).exp();
            assert!((1.0 - frac - u).abs() < 1e-10);
        }
        let lower = TruncatedNormal::new(0.0, 1.0, -60.0, -50.0).unwrap();
        assert!((lower.quantile(0.3) + t.quantile(0.7)).abs() < 1e-9);
    }

    #[test]
    fn far_tail_mean_is_near_bound() {
        let t = TruncatedNormal::new(0.0, 1e-5, 1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = t.sample(&mut rng);
            assert!((1.0..=1.0 + 1e-9).contains(&x));
        }
    }

    #[test]
    fn monte_carlo_moments() {
        let t = TruncatedNormal::new(1.0, 2.0, 0.0, 3.0).unwrap();
        let (m, v) = t.moments();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..200_000).map(|_| t.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let se = (v / draws.len() as f64).sqrt();
        assert!((mean - m).abs() < 4.0 * se);
        assert!((var - v).abs() / v < 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TruncatedNormal::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(TruncatedNormal::new(0.0, 1.0, 1.0, 1.0).is_err());
    }
}
