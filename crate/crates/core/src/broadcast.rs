//! Two-user Gaussian broadcast: the weak user's TCM codeword is the dirt the
//! strong user's encoder presubtracts.
//!
//! The transmitter sends `x_sum = x_strong + x_weak = u_strong + (1 - alpha) x_weak`.
//! The strong receiver decodes `u_strong`, recovers the weak codeword as dirt and
//! can decode the weak message from it; the weak receiver decodes its own code
//! directly, treating the strong signal as noise.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::add_noise;
use crate::constellation::Constellation;
use crate::decoder::{medd_decode, recover_dirt, tcm_decode, Decoded};
use crate::encoder::{pip_encode, tcm_encode, Codeword, EncodedBlock};
use crate::error::{invalid, Result};
use crate::trellis::{DpcSpec, TrellisCode};

#[derive(Clone, Debug)]
pub struct BroadcastScenario {
    /// Plain TCM code of the weak user; its constellation power is `P2`.
    pub weak: TrellisCode,
    /// Dirty paper code of the strong user.
    pub strong: DpcSpec,
    /// Noise variance at the strong receiver.
    pub sigma_w1_2: f64,
    /// Noise variance at the weak receiver.
    pub sigma_w2_2: f64,
}

impl BroadcastScenario {
    pub fn new(weak: TrellisCode, strong: DpcSpec, sigma_w1_2: f64, sigma_w2_2: f64) -> Result<Self> {
        if !(sigma_w1_2 >= 0.0) || !(sigma_w1_2 < sigma_w2_2) || !sigma_w2_2.is_finite() {
            return invalid(format!(
                "need 0 <= sigma_w1^2 < sigma_w2^2, got {sigma_w1_2} and {sigma_w2_2}"
            ));
        }
        Ok(Self {
            weak,
            strong,
            sigma_w1_2,
            sigma_w2_2,
        })
    }

    /// `b_w`, bits per use for the weak user.
    pub fn weak_rate(&self) -> usize {
        self.weak.r0()
    }

    /// `b_s`, bits per use for the strong user.
    pub fn strong_rate(&self) -> usize {
        self.strong.r()
    }

    pub fn weak_power(&self) -> f64 {
        self.weak.constellation().avg_power()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BroadcastBlock {
    pub x_sum: Vec<Complex64>,
    pub weak: Codeword,
    pub strong: EncodedBlock,
}

impl BroadcastBlock {
    pub fn x_weak(&self) -> &[Complex64] {
        &self.weak.points
    }
}

/// Encodes both users; the weak codeword is the strong encoder's dirt.
pub fn broadcast_encode(
    scenario: &BroadcastScenario,
    m_weak: &[u8],
    m_strong: &[u8],
) -> Result<BroadcastBlock> {
    let weak = tcm_encode(&scenario.weak, m_weak)?;
    if m_strong.len() != weak.len() * scenario.strong_rate() {
        return invalid(format!(
            "strong message has {} bits, expected {}",
            m_strong.len(),
            weak.len() * scenario.strong_rate()
        ));
    }
    let strong = pip_encode(&scenario.strong, m_strong, &weak.points)?;
    let gain = 1.0 - scenario.strong.alpha();
    let x_sum = strong
        .u()
        .iter()
        .zip(&weak.points)
        .map(|(&u, &s)| u + s * gain)
        .collect();
    Ok(BroadcastBlock {
        x_sum,
        weak,
        strong,
    })
}

/// What the strong receiver extracts from one block.
#[derive(Clone, Debug, PartialEq)]
pub struct StrongReception {
    pub decoded: Decoded,
    /// `(y - u_hat) / (1 - alpha)`: the weak codeword plus amplified noise.
    pub dirt: Vec<Complex64>,
    /// Weak message decoded from the recovered dirt.
    pub weak_message: Vec<u8>,
}

impl StrongReception {
    pub fn message(&self) -> &[u8] {
        &self.decoded.message
    }
}

pub fn strong_user_receive(
    scenario: &BroadcastScenario,
    x_sum: &[Complex64],
    rng: &mut impl Rng,
) -> Result<StrongReception> {
    let mut y = x_sum.to_vec();
    add_noise(&mut y, scenario.sigma_w1_2, rng);
    let decoded = medd_decode(&scenario.strong, &y)?;
    let dirt = recover_dirt(&y, &decoded.codeword.points, scenario.strong.alpha())?;
    let weak_message = tcm_decode(&scenario.weak, &dirt)?.message;
    Ok(StrongReception {
        decoded,
        dirt,
        weak_message,
    })
}

pub fn weak_user_receive(
    scenario: &BroadcastScenario,
    x_sum: &[Complex64],
    rng: &mut impl Rng,
) -> Result<Vec<u8>> {
    let mut y = x_sum.to_vec();
    add_noise(&mut y, scenario.sigma_w2_2, rng);
    Ok(tcm_decode(&scenario.weak, &y)?.message)
}

/// Average power of a sum of independent zero-mean signals of powers `p1` and `p2`.
pub fn superposition_power(p1: f64, p2: f64) -> f64 {
    p1 + p2
}

/// A point set `A * g` with integer grid points `g` and `A^2 = power / divisor`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet {
    pub power: f64,
    pub divisor: u32,
    pub points: Vec<(i32, i32)>,
}

impl GridSet {
    pub fn single_point() -> Self {
        Self {
            power: 1.0,
            divisor: 1,
            points: vec![(0, 0)],
        }
    }
}

impl From<&Constellation> for GridSet {
    fn from(c: &Constellation) -> Self {
        Self {
            power: c.avg_power(),
            divisor: c.kind().power_per_scale_sq(),
            points: c.grid().to_vec(),
        }
    }
}

/// `v * k` as an (odd mantissa, exponent) pair; equal pairs mean equal values.
fn exact_product(v: f64, k: u64) -> (u128, i32) {
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1 << 52) - 1);
    let (mantissa, e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1 << 52), exp - 1075)
    };
    let m = u128::from(mantissa) * u128::from(k);
    if m == 0 {
        return (0, 0);
    }
    let tz = m.trailing_zeros();
    (m >> tz, e + tz as i32)
}

/// Whether `A1 d1 == A2 d2` exactly for integer vectors `d1`, `d2`.
fn scaled_vectors_equal(a: &GridSet, d1: (i64, i64), b: &GridSet, d2: (i64, i64)) -> bool {
    let zero1 = d1 == (0, 0);
    let zero2 = d2 == (0, 0);
    if zero1 || zero2 {
        return zero1 && zero2;
    }
    let cross = d1.0 * d2.1 - d1.1 * d2.0;
    let dot = d1.0 * d2.0 + d1.1 * d2.1;
    if cross != 0 || dot <= 0 {
        return false;
    }
    // (P1 / k1) |d1|^2 == (P2 / k2) |d2|^2
    let n1 = (d1.0 * d1.0 + d1.1 * d1.1) as u64;
    let n2 = (d2.0 * d2.0 + d2.1 * d2.1) as u64;
    exact_product(a.power, u64::from(b.divisor) * n1) == exact_product(b.power, u64::from(a.divisor) * n2)
}

/// Number of distinct points of the sum set, compared exactly.
pub fn sum_set_size(a: &GridSet, b: &GridSet) -> usize {
    let pairs: Vec<((i32, i32), (i32, i32))> = a
        .points
        .iter()
        .flat_map(|&p| b.points.iter().map(move |&q| (p, q)))
        .collect();
    let mut distinct = 0;
    for (k, &(p, q)) in pairs.iter().enumerate() {
        // A1 p + A2 q == A1 p' + A2 q'  <=>  A1 (p - p') == A2 (q' - q)
        let repeated = pairs[..k].iter().any(|&(p2, q2)| {
            let d1 = (i64::from(p.0 - p2.0), i64::from(p.1 - p2.1));
            let d2 = (i64::from(q2.0 - q.0), i64::from(q2.1 - q.1));
            scaled_vectors_equal(a, d1, b, d2)
        });
        if !repeated {
            distinct += 1;
        }
    }
    distinct
}

/// `|X1 + X2| == |X1| |X2|`.
pub fn uniquely_decodable_sets(a: &GridSet, b: &GridSet) -> bool {
    sum_set_size(a, b) == a.points.len() * b.points.len()
}

pub fn uniquely_decodable(c1: &Constellation, c2: &Constellation) -> bool {
    uniquely_decodable_sets(&c1.into(), &c2.into())
}
