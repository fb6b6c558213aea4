//! The dirty paper channel `y = x + s + w` and its random streams.
//!
//! All randomness comes from ChaCha8 generators. A generator is keyed by the
//! 64-bit run seed (expanded with `SeedableRng::seed_from_u64`) and selects
//! ChaCha stream `4 * block + role`, where role is 0 for message bits, 1 for
//! dirt, 2 for the (strong receiver's) noise and 3 for the weak receiver's
//! noise. A block's samples therefore depend only on `(seed, block, role)`.
//!
//! Complex Gaussian samples of variance `v` have independent real and
//! imaginary parts of variance `v / 2`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Dirt and noise statistics plus the run seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    pub sigma_s2: f64,
    pub sigma_w2: f64,
    pub seed: u64,
}

impl ChannelParams {
    pub fn new(sigma_s2: f64, sigma_w2: f64, seed: u64) -> Result<Self> {
        if !(sigma_s2 >= 0.0) || !sigma_s2.is_finite() {
            return invalid(format!("dirt variance must be >= 0, got {sigma_s2}"));
        }
        if !(sigma_w2 > 0.0) || !sigma_w2.is_finite() {
            return invalid(format!("noise variance must be > 0, got {sigma_w2}"));
        }
        Ok(Self {
            sigma_s2,
            sigma_w2,
            seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamRole {
    Message = 0,
    Dirt = 1,
    Noise = 2,
    WeakNoise = 3,
}

/// Identifies one substream: a (block, role) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamId(u64);

impl StreamId {
    pub fn new(block: u64, role: StreamRole) -> Self {
        Self(block * 4 + role as u64)
    }

    pub fn raw(self) -> u64 {
        self.0
    }
}

/// The generator for `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: StreamId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.0);
    rng
}

/// `n` circularly-symmetric complex Gaussian samples of total variance `variance`.
pub fn complex_gaussian(rng: &mut impl Rng, n: usize, variance: f64) -> Vec<Complex64> {
    if variance == 0.0 {
        return vec![Complex64::new(0.0, 0.0); n];
    }
    let sd = (variance / 2.0).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(sd * re, sd * im)
        })
        .collect()
}

/// Uniform random bits.
pub fn random_bits(rng: &mut impl Rng, n: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let word: u64 = rng.random();
        let take = (n - out.len()).min(64);
        out.extend((0..take).map(|k| ((word >> k) & 1) as u8));
    }
    out
}

pub fn gen_dirt(n: usize, params: &ChannelParams, stream: StreamId) -> Vec<Complex64> {
    complex_gaussian(&mut stream_rng(params.seed, stream), n, params.sigma_s2)
}

/// `y = x + s + w` with fresh noise from `stream`.
pub fn transmit(
    x: &[Complex64],
    s: &[Complex64],
    params: &ChannelParams,
    stream: StreamId,
) -> Result<Vec<Complex64>> {
    if x.len() != s.len() {
        return invalid(format!("x has {} samples but s has {}", x.len(), s.len()));
    }
    if x.is_empty() {
        return invalid("empty transmit vector");
    }
    let w = complex_gaussian(&mut stream_rng(params.seed, stream), x.len(), params.sigma_w2);
    Ok(x.iter().zip(s).zip(w).map(|((&a, &b), c)| a + b + c).collect())
}

/// `y = x + s` exactly.
pub fn transmit_noiseless(x: &[Complex64], s: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != s.len() {
        return invalid(format!("x has {} samples but s has {}", x.len(), s.len()));
    }
    Ok(x.iter().zip(s).map(|(&a, &b)| a + b).collect())
}

/// Adds complex Gaussian noise of `variance` (which may be zero) in place.
pub fn add_noise(y: &mut [Complex64], variance: f64, rng: &mut impl Rng) {
    if variance == 0.0 {
        return;
    }
    let w = complex_gaussian(rng, y.len(), variance);
    for (v, w) in y.iter_mut().zip(w) {
        *v += w;
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Sum of `|x_i|^2` over one block.
pub fn energy(x: &[Complex64]) -> CompensatedSum {
    let mut acc = CompensatedSum::default();
    for v in x {
        acc.add(v.norm_sqr());
    }
    acc
}

/// `10 log10(mean |x|^2 / sigma_w2)` pooled over all blocks.
pub fn measured_snr_db<B: AsRef<[Complex64]>>(x_blocks: &[B], sigma_w2: f64) -> Result<f64> {
    let mut acc = CompensatedSum::default();
    let mut count = 0usize;
    for b in x_blocks {
        acc.merge(&energy(b.as_ref()));
        count += b.as_ref().len();
    }
    if count == 0 {
        return invalid("no transmit symbols");
    }
    snr_db(acc.value(), count, sigma_w2)
}

pub(crate) fn snr_db(energy: f64, count: usize, sigma_w2: f64) -> Result<f64> {
    if !(sigma_w2 > 0.0) {
        return invalid(format!("noise variance must be > 0, got {sigma_w2}"));
    }
    Ok(10.0 * (energy / count as f64 / sigma_w2).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(s2: f64, w2: f64) -> ChannelParams {
        ChannelParams::new(s2, w2, 99).unwrap()
    }

    #[test]
    fn zero_dirt() {
        let s = gen_dirt(10, &params(0.0, 1.0), StreamId::new(0, StreamRole::Dirt));
        assert!(s.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn deterministic_streams() {
        let p = params(2.0, 1.0);
        let id = StreamId::new(7, StreamRole::Dirt);
        assert_eq!(gen_dirt(100, &p, id), gen_dirt(100, &p, id));
        assert_ne!(gen_dirt(100, &p, id), gen_dirt(100, &p, StreamId::new(8, StreamRole::Dirt)));
        assert_ne!(gen_dirt(100, &p, id), gen_dirt(100, &p, StreamId::new(7, StreamRole::Noise)));
    }

    #[test]
    fn dirt_variance_statistical() {
        let n = 1_000_000;
        let s = gen_dirt(n, &params(5.0, 1.0), StreamId::new(0, StreamRole::Dirt));
        let mean = s.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        // |s|^2 is exponential with mean 5, so sd = 5 and se = 5 / sqrt(n).
        let se = 5.0 / (n as f64).sqrt();
        assert!((mean - 5.0).abs() < 3.0 * se, "{mean}");
        let re_var = s.iter().map(|v| v.re * v.re).sum::<f64>() / n as f64;
        assert!((re_var - 2.5).abs() < 3.0 * 2.5 * (2.0 / n as f64).sqrt(), "{re_var}");
    }

    #[test]
    fn substreams_uncorrelated() {
        let n = 1_000_000;
        let p = params(1.0, 1.0);
        let a = gen_dirt(n, &p, StreamId::new(3, StreamRole::Dirt));
        let b = complex_gaussian(&mut stream_rng(p.seed, StreamId::new(3, StreamRole::Noise)), n, 1.0);
        let corr = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum::<Complex64>() / n as f64;
        // each part of x* y has variance 1/2
        let se = (0.5 / n as f64).sqrt();
        assert!(corr.re.abs() < 3.0 * se && corr.im.abs() < 3.0 * se, "{corr}");
    }

    #[test]
    fn transmit_adds_dirt_and_noise() {
        let p = params(1.0, 1.0);
        let n = 200_000;
        let s = gen_dirt(n, &p, StreamId::new(0, StreamRole::Dirt));
        let x: Vec<Complex64> = s.iter().map(|v| -v).collect();
        let y = transmit(&x, &s, &p, StreamId::new(0, StreamRole::Noise)).unwrap();
        let pw = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((pw - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{pw}");
        assert_eq!(
            transmit_noiseless(&[Complex64::new(1.0, 2.0)], &[Complex64::new(0.5, -1.0)]).unwrap(),
            vec![Complex64::new(1.5, 1.0)]
        );
        assert!(transmit(&x[..3], &s[..2], &p, StreamId::new(0, StreamRole::Noise)).is_err());
        assert!(transmit(&[], &[], &p, StreamId::new(0, StreamRole::Noise)).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ChannelParams::new(-1.0, 1.0, 0).is_err());
        assert!(ChannelParams::new(1.0, 0.0, 0).is_err());
        assert!(ChannelParams::new(0.0, 1.0, 0).is_ok());
    }

    #[test]
    fn snr_examples() {
        let x = vec![Complex64::new(1.0, 3.0); 10];
        assert!((measured_snr_db(&[&x[..]], 1.0).unwrap() - 10.0).abs() < 1e-12);
        let y = vec![Complex64::new(0.0, 2.0f64.sqrt()); 5];
        assert!(measured_snr_db(&[&y[..]], 2.0).unwrap().abs() < 1e-12);
        let empty: [&[Complex64]; 0] = [];
        assert!(measured_snr_db(&empty, 1.0).is_err());
    }

    #[test]
    fn pooled_snr_matches_two_pass() {
        let blocks = vec![
            vec![Complex64::new(1.0, 0.0); 3],
            vec![Complex64::new(0.0, 10.0); 1],
            vec![Complex64::new(0.3, -0.2); 7],
        ];
        // two-pass: total energy then divide by total count
        let total: f64 = blocks.iter().flatten().map(|v| v.re * v.re + v.im * v.im).sum();
        let count: usize = blocks.iter().map(|b| b.len()).sum();
        let want = 10.0 * (total / count as f64 / 0.5).log10();
        assert!((measured_snr_db(&blocks, 0.5).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut acc = CompensatedSum::default();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn random_bits_are_bits() {
        let mut rng = stream_rng(1, StreamId::new(0, StreamRole::Message));
        let b = random_bits(&mut rng, 10_000);
        assert_eq!(b.len(), 10_000);
        assert!(b.iter().all(|&v| v <= 1));
        let ones = b.iter().filter(|&&v| v == 1).count();
        assert!((ones as f64 - 5000.0).abs() < 3.0 * 50.0);
    }
}
