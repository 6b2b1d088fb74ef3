//! Seeded random streams and the samplers the embeddings are built from:
//! unit-rate exponentials, reciprocal exponentials raised to a power,
//! Cauchy, and general p-stable variates via the Chambers-Mallows-Stuck
//! transform.
//!
//! Every random quantity in this crate is drawn from a [`Stream`] addressed
//! by `(master_seed, stream_label)`, so any run is replayable bit for bit
//! from its master seed alone. Streams are cheap counters: the i-th value of
//! a stream can also be computed directly with [`Stream::value_at`], which
//! is what lets simulated machines agree on shared randomness without
//! exchanging it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below this are resampled by [`exp_sample`]; keeps reciprocals and
/// negative powers finite.
const EXP_FLOOR: f64 = 1e-300;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a named child stream from a master seed. Distinct
/// labels give statistically unrelated streams.
fn child_seed(master_seed: u64, label: &str) -> u64 {
    // FNV-1a over the label bytes, folded into the master seed, then mixed.
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ master_seed;
    for &b in label.as_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(h)
}

/// Names one random stream: a master seed shared by a whole run and a label
/// identifying the consumer ("ose.h", "diag.u", "sample.1", ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_label: String,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_label: impl Into<String>) -> Self {
        SeedSpec {
            master_seed,
            stream_label: stream_label.into(),
        }
    }

    pub fn stream(&self) -> Stream {
        Stream::new(self.master_seed, &self.stream_label)
    }
}

/// A counter-based SplitMix64 generator. Each stream is meant to have a
/// single consumer; cloning forks the counter, and both copies then produce
/// the same continuation independently.
#[derive(Debug, Clone)]
pub struct Stream {
    base: u64,
    drawn: u64,
}

impl Stream {
    pub fn new(master_seed: u64, label: &str) -> Self {
        Stream {
            base: child_seed(master_seed, label),
            drawn: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.drawn += 1;
        mix(self.base.wrapping_add(GAMMA.wrapping_mul(self.drawn)))
    }

    /// Uniform in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// The value the i-th call (0-based) to `next_f64` on a fresh stream
    /// would return. Does not advance the stream.
    #[inline]
    pub fn value_at(&self, i: u64) -> f64 {
        let z = mix(self.base.wrapping_add(GAMMA.wrapping_mul(i + 1)));
        (z >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Number of raw draws consumed so far.
    pub fn position(&self) -> u64 {
        self.drawn
    }
}

#[inline]
fn exp_inv(v: f64) -> f64 {
    -(1.0 - v).ln()
}

#[inline]
fn cauchy_inv(v: f64) -> f64 {
    (std::f64::consts::PI * (v - 0.5)).tan()
}

/// Unit-rate exponential by inversion: v in [0,1) maps to -ln(1-v).
/// Values below 1e-300 are resampled so reciprocals stay finite.
pub fn exp_sample(stream: &mut Stream) -> f64 {
    loop {
        let x = exp_inv(stream.next_f64());
        if x >= EXP_FLOOR {
            return x;
        }
    }
}

/// U^(-1/p) for U a unit-rate exponential; the diagonal rescaling entries.
/// Density p * x^-(p+1) * exp(-x^-p) on x > 0. Requires p >= 1.
pub fn recip_exp_pow_sample(p: f64, stream: &mut Stream) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "recip_exp_pow_sample requires finite p >= 1, got {p}"
        )));
    }
    Ok(exp_sample(stream).powf(-1.0 / p))
}

/// Standard Cauchy by inversion: tan(pi * (v - 1/2)).
pub fn cauchy_sample(stream: &mut Stream) -> f64 {
    cauchy_inv(stream.next_f64())
}

/// Standard normal via Box-Muller. One variate per call; the sine partner is
/// discarded so consumption stays at exactly two uniforms per sample.
pub fn normal_sample(stream: &mut Stream) -> f64 {
    // 1 - v lies in (0, 1], keeping the log finite.
    let u1 = 1.0 - stream.next_f64();
    let u2 = stream.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Chambers-Mallows-Stuck transform for a symmetric p-stable variate, given
/// theta uniform on (-pi/2, pi/2) and w a unit-rate exponential.
fn cms(p: f64, theta: f64, w: f64) -> f64 {
    if p == 1.0 {
        return theta.tan();
    }
    let a = (p * theta).sin() / theta.cos().powf(1.0 / p);
    let b = (((1.0 - p) * theta).cos() / w).powf((1.0 - p) / p);
    a * b
}

/// Symmetric p-stable variate for p in (0, 2]. p = 1 reduces exactly to
/// tan(theta) (Cauchy) and p = 2 to a Normal(0, 2) draw. Consumes two
/// underlying uniforms per sample (plus any exponential resamples).
pub fn pstable_sample(p: f64, stream: &mut Stream) -> Result<f64> {
    if !(p > 0.0 && p <= 2.0) {
        return Err(Error::InvalidParameter(format!(
            "pstable_sample requires p in (0, 2], got {p}"
        )));
    }
    let theta = std::f64::consts::PI * (stream.next_f64() - 0.5);
    let w = exp_sample(stream);
    Ok(cms(p, theta, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_two_sample;

    const LN_2: f64 = std::f64::consts::LN_2;

    #[test]
    fn exp_inverse_point_values() {
        assert!((exp_inv(0.5) - LN_2).abs() < 1e-15);
        // v = 0 hits the boundary; the public sampler resamples it.
        assert_eq!(exp_inv(0.0), 0.0);
        let mut s = Stream::new(7, "exp.floor");
        for _ in 0..1000 {
            assert!(exp_sample(&mut s) >= EXP_FLOOR);
        }
    }

    #[test]
    fn exp_lower_tail_matches_cdf() {
        // Pr[X <= t] = 1 - e^-t, so Pr[X <= t]/t must sit just below 1.
        let mut s = Stream::new(0x5eed, "exp.tail");
        let n = 1_000_000u32;
        let (mut c001, mut c005, mut c01) = (0u32, 0u32, 0u32);
        for _ in 0..n {
            let x = exp_sample(&mut s);
            if x <= 0.01 {
                c001 += 1;
            }
            if x <= 0.05 {
                c005 += 1;
            }
            if x <= 0.1 {
                c01 += 1;
            }
        }
        let ratio01 = f64::from(c01) / f64::from(n) / 0.1;
        assert!(ratio01 >= 0.950 && ratio01 <= 0.953, "ratio {ratio01}");
        for (count, t) in [(c001, 0.01), (c005, 0.05), (c01, 0.1)] {
            let ratio = f64::from(count) / f64::from(n) / t;
            assert!(ratio >= 0.9 && ratio <= 1.0, "t={t}: ratio {ratio}");
        }
    }

    #[test]
    fn recip_exp_pow_point_values() {
        // u = ln 2 at p = 1 gives 1/ln 2; u = 4 at p = 2 gives 1/2.
        assert!((LN_2.powf(-1.0) - 1.442_695_040_888_963_4).abs() < 1e-12);
        assert!((4.0f64.powf(-1.0 / 2.0) - 0.5).abs() < 1e-15);
        assert!(recip_exp_pow_sample(0.5, &mut Stream::new(1, "x")).is_err());
    }

    #[test]
    fn recip_exp_pow_cdf_at_one() {
        // Pr[U^-1 <= 1] = Pr[U >= 1] = e^-1.
        let mut s = Stream::new(0xabcd, "recip.cdf");
        let n = 1_000_000u32;
        let mut count = 0u32;
        for _ in 0..n {
            if recip_exp_pow_sample(1.0, &mut s).unwrap() <= 1.0 {
                count += 1;
            }
        }
        let freq = f64::from(count) / f64::from(n);
        assert!((freq - (-1.0f64).exp()).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn cauchy_point_and_distribution() {
        assert_eq!(cauchy_inv(0.5), 0.0);
        assert!((cauchy_inv(0.75) - 1.0).abs() < 1e-12);
        let mut s = Stream::new(0xfeed, "cauchy");
        let n = 1_000_000usize;
        let mut abs: Vec<f64> = (0..n).map(|_| cauchy_sample(&mut s).abs()).collect();
        let inside = abs.iter().filter(|&&x| x <= 1.0).count();
        let freq = inside as f64 / n as f64;
        // Pr[|C| <= 1] = (2/pi) * arctan(1) = 1/2.
        assert!((freq - 0.5).abs() < 0.002, "freq {freq}");
        abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = abs[n / 2];
        assert!((median - 1.0).abs() < 0.01, "median {median}");
    }

    #[test]
    fn normal_moments_and_tail() {
        let mut s = Stream::new(0x6022, "normal");
        let n = 1_000_000usize;
        let (mut sum, mut sumsq, mut inside) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            let x = normal_sample(&mut s);
            sum += x;
            sumsq += x * x;
            if x.abs() <= 1.96 {
                inside += 1;
            }
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
        let freq = inside as f64 / n as f64;
        assert!((freq - 0.95).abs() < 0.002, "P(|X| <= 1.96) ~ {freq}");
    }

    #[test]
    fn pstable_rejects_bad_p() {
        let mut s = Stream::new(3, "ps.bad");
        assert!(pstable_sample(0.0, &mut s).is_err());
        assert!(pstable_sample(2.5, &mut s).is_err());
        assert!(pstable_sample(-1.0, &mut s).is_err());
        assert!(pstable_sample(0.5, &mut s).is_ok());
    }

    #[test]
    fn pstable_special_cases() {
        // p = 1 is exactly tan(theta); theta = pi/4 gives 1.
        assert!((cms(1.0, std::f64::consts::FRAC_PI_4, 2.7) - 1.0).abs() < 1e-15);
        // p = 2 is Normal(0, 2): sample variance within 1%.
        let mut s = Stream::new(0x2222, "ps.p2");
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = pstable_sample(2.0, &mut s).unwrap();
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!((var - 2.0).abs() < 0.02, "variance {var}");
        for _ in 0..10_000 {
            assert!(pstable_sample(0.7, &mut s).unwrap().is_finite());
        }
    }

    #[test]
    fn pstable_stability_law() {
        // a1*X1 + a2*X2 has the law of (a1^p + a2^p)^(1/p) * X.
        let p = 1.5;
        let (a1, a2) = (1.0f64, 2.0f64);
        let scale = (a1.powf(p) + a2.powf(p)).powf(1.0 / p);
        let mut s1 = Stream::new(0x57ab, "ps.lhs");
        let mut s2 = Stream::new(0x57ab, "ps.rhs");
        let n = 100_000usize;
        let lhs: Vec<f64> = (0..n)
            .map(|_| {
                a1 * pstable_sample(p, &mut s1).unwrap() + a2 * pstable_sample(p, &mut s1).unwrap()
            })
            .collect();
        let rhs: Vec<f64> = (0..n)
            .map(|_| scale * pstable_sample(p, &mut s2).unwrap())
            .collect();
        let ks = ks_two_sample(&lhs, &rhs);
        assert!(ks < 0.01, "ks {ks}");
    }

    #[test]
    fn max_stability_of_exponential_reciprocals() {
        // max_i alpha_i / u_i has the law of (sum_i alpha_i) / u.
        let alphas: Vec<f64> = (1..=10).map(f64::from).collect();
        let total: f64 = alphas.iter().sum();
        let mut s1 = Stream::new(0x3c4d, "maxstab.lhs");
        let mut s2 = Stream::new(0x3c4d, "maxstab.rhs");
        let n = 100_000usize;
        let lhs: Vec<f64> = (0..n)
            .map(|_| {
                alphas
                    .iter()
                    .map(|&a| a / exp_sample(&mut s1))
                    .fold(f64::MIN, f64::max)
            })
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| total / exp_sample(&mut s2)).collect();
        let ks = ks_two_sample(&lhs, &rhs);
        assert!(ks < 0.01, "ks {ks}");
    }

    #[test]
    fn reciprocal_sum_tail_bound() {
        // Pr[sum_{i<=d} 1/u_i >= t*d] <= 4 ln(t*d) / t at d = 32.
        let d = 32usize;
        let mut s = Stream::new(0x7a11, "tailcmp");
        let trials = 100_000usize;
        let mut counts = [0usize; 3];
        let ts = [8.0f64, 16.0, 32.0];
        for _ in 0..trials {
            let sum: f64 = (0..d).map(|_| 1.0 / exp_sample(&mut s)).sum();
            for (k, &t) in ts.iter().enumerate() {
                if sum >= t * d as f64 {
                    counts[k] += 1;
                }
            }
        }
        for (k, &t) in ts.iter().enumerate() {
            let emp = counts[k] as f64 / trials as f64;
            let bound = 4.0 * (t * d as f64).ln() / t;
            assert!(emp <= bound, "t={t}: {emp} > {bound}");
        }
    }

    #[test]
    fn streams_replay_and_separate() {
        let a: Vec<u64> = {
            let mut s = Stream::new(42, "replay");
            (0..100).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = Stream::new(42, "replay");
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        let c: Vec<u64> = {
            let mut s = Stream::new(42, "replay2");
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_ne!(a, c);
        let d: Vec<u64> = {
            let mut s = Stream::new(43, "replay");
            (0..100).map(|_| s.next_u64()).collect()
        };
        assert_ne!(a, d);
    }

    #[test]
    fn value_at_matches_sequential_draws() {
        let spec = SeedSpec::new(0xbeef, "indexed");
        let probe = spec.stream();
        let mut seq = spec.stream();
        for i in 0..50u64 {
            assert_eq!(probe.value_at(i), seq.next_f64());
        }
        assert_eq!(seq.position(), 50);
    }
}
