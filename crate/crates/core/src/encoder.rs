//! Dirt-aware trellis encoding and the plain TCM encoder.
//!
//! The dirt-aware encoder picks, among the valid codewords of the message
//! (step `i` restricted to bin `m_i`), the one minimizing
//! `sum_i |u_i - alpha s_i| |s_i|`, and transmits `x = u - alpha s`.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::trellis::{bits_to_symbols, DpcSpec, TrellisCode, TrellisPath};
use crate::viterbi;

/// A trellis walk together with its signal points.
#[derive(Clone, Debug, PartialEq)]
pub struct Codeword {
    pub path: TrellisPath,
    pub points: Vec<Complex64>,
}

impl Codeword {
    pub(crate) fn from_path(trellis: &TrellisCode, path: TrellisPath) -> Self {
        let c = trellis.constellation();
        let points = path.labels.iter().map(|&l| c.point(l)).collect();
        Self { path, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn state_path(&self) -> &[usize] {
        &self.path.states
    }

    pub fn labels(&self) -> &[usize] {
        &self.path.labels
    }
}

/// Output of [`pip_encode`].
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBlock {
    pub message: Vec<u8>,
    /// The selected valid codeword `u`.
    pub codeword: Codeword,
    /// Transmit vector `x = u - alpha s`.
    pub x: Vec<Complex64>,
    /// `sum_i |u_i - alpha s_i| |s_i|`, summed left to right.
    pub achieved_metric: f64,
}

impl EncodedBlock {
    pub fn u(&self) -> &[Complex64] {
        &self.codeword.points
    }

    pub fn state_path(&self) -> &[usize] {
        self.codeword.state_path()
    }
}

/// `|(u - alpha s)^* s|`.
#[inline]
pub fn branch_metric(u: Complex64, s: Complex64, alpha: f64) -> f64 {
    (u - s * alpha).norm() * s.norm()
}

/// Magnitude of the vector inner product `|x^H s|`, the quantity the
/// per-symbol metric upper-bounds.
pub fn inner_product_magnitude(x: &[Complex64], s: &[Complex64]) -> f64 {
    x.iter().zip(s).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm()
}

fn check_finite(v: &[Complex64], what: &str) -> Result<()> {
    if v.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        invalid(format!("{what} contains non-finite samples"))
    }
}

/// Selects the valid codeword for `message` that minimizes the summed branch
/// metric against the dirt `s`, starting from state 0.
pub fn pip_encode(spec: &DpcSpec, message: &[u8], s: &[Complex64]) -> Result<EncodedBlock> {
    let n = s.len();
    if n == 0 {
        return invalid("empty dirt vector");
    }
    if message.len() != n * spec.r() {
        return invalid(format!(
            "message has {} bits, expected {} for {n} symbols",
            message.len(),
            n * spec.r()
        ));
    }
    check_finite(s, "dirt")?;
    let symbols = bits_to_symbols(message, spec.r())?;
    let alpha = spec.alpha();
    let trellis = spec.trellis();
    let points = trellis.constellation().points();
    let bins = spec.bins();
    let best = viterbi::search(
        trellis,
        n,
        |step, bm| {
            let si = s[step];
            for (m, &p) in bm.iter_mut().zip(points) {
                *m = branch_metric(p, si, alpha);
            }
        },
        |step, state| bins.bin(state, symbols[step]),
    );
    let codeword = Codeword::from_path(trellis, best.path);
    let x = codeword
        .points
        .iter()
        .zip(s)
        .map(|(&u, &si)| u - si * alpha)
        .collect();
    Ok(EncodedBlock {
        message: message.to_vec(),
        codeword,
        x,
        achieved_metric: best.metric,
    })
}

/// Plain TCM encoding: each group of `r0` bits (MSB first) is the edge index
/// taken from the current state, starting at state 0.
pub fn tcm_encode(trellis: &TrellisCode, bits: &[u8]) -> Result<Codeword> {
    if bits.is_empty() {
        return invalid("empty message");
    }
    let symbols = bits_to_symbols(bits, trellis.r0())?;
    let mut states = Vec::with_capacity(symbols.len() + 1);
    let mut labels = Vec::with_capacity(symbols.len());
    let mut state = 0;
    states.push(state);
    for &e in &symbols {
        let edge = trellis.edge(state, e);
        labels.push(edge.label);
        state = edge.next_state;
        states.push(state);
    }
    Ok(Codeword::from_path(
        trellis,
        TrellisPath {
            states,
            edges: symbols,
            labels,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::trellis::{enumerate_valid_codewords, BinStrategy, TrellisPreset};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_dirt(rng: &mut impl Rng, n: usize, var: f64) -> Vec<Complex64> {
        let sd = (var / 2.0).sqrt();
        (0..n)
            .map(|_| {
                c(
                    sd * rng.sample::<f64, _>(StandardNormal),
                    sd * rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect()
    }

    fn spec(preset: TrellisPreset, alpha: f64) -> DpcSpec {
        let k = f64::from(preset.constellation_kind().power_per_scale_sq());
        DpcSpec::from_preset(preset, 4.0 * k, 1, BinStrategy::PairedMaxSpread, alpha).unwrap()
    }

    #[test]
    fn branch_metric_examples() {
        assert_eq!(branch_metric(c(3.0, -1.0), c(0.0, 0.0), 0.4), 0.0);
        assert_eq!(branch_metric(c(1.0, 1.0), c(2.0, 0.0), 0.5), 2.0);
        let (u, s) = (c(1.0, 2.0), c(-0.5, 3.0));
        assert!((branch_metric(u, s, 0.0) - u.norm() * s.norm()).abs() < 1e-15);
        assert!((branch_metric(u, s, 0.7) - ((u - 0.7 * s).conj() * s).norm()).abs() < 1e-12);
    }

    #[test]
    fn zero_dirt_takes_first_edges() {
        let sp = spec(TrellisPreset::Qam16State8, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let msg: Vec<u8> = (0..20).map(|_| rng.random_range(0..2)).collect();
        let block = pip_encode(&sp, &msg, &vec![c(0.0, 0.0); 20]).unwrap();
        assert_eq!(block.achieved_metric, 0.0);
        // lexicographically first: always the smallest edge in the bin
        let mut state = 0;
        for (i, &e) in block.codeword.path.edges.iter().enumerate() {
            assert_eq!(e, sp.bins().bin(state, msg[i] as usize)[0]);
            state = sp.trellis().edge(state, e).next_state;
        }
    }

    #[test]
    fn matches_exhaustive_minimum() {
        for preset in [
            TrellisPreset::Pam8State8,
            TrellisPreset::Qam16State8,
            TrellisPreset::Qam8State4,
            TrellisPreset::Qam8State8,
        ] {
            for alpha in [0.9, 1.0, 0.0] {
                let sp = spec(preset, alpha);
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                for _ in 0..30 {
                    let n = 6;
                    let msg: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
                    let s = random_dirt(&mut rng, n, 5.0);
                    let block = pip_encode(&sp, &msg, &s).unwrap();
                    let best = enumerate_valid_codewords(&sp, &msg, n, 0)
                        .unwrap()
                        .iter()
                        .map(|p| {
                            p.labels.iter().zip(&s).fold(0.0, |acc, (&l, &si)| {
                                acc + branch_metric(sp.constellation().point(l), si, alpha)
                            })
                        })
                        .fold(f64::INFINITY, f64::min);
                    assert_eq!(block.achieved_metric, best, "{preset} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn block_invariants() {
        let sp = spec(TrellisPreset::Qam16State8, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let msg: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let s = random_dirt(&mut rng, n, 10.0);
        let block = pip_encode(&sp, &msg, &s).unwrap();
        let t = sp.trellis();
        assert_eq!(block.state_path()[0], 0);
        let mut sum = 0.0;
        for i in 0..n {
            let (from, to) = (block.state_path()[i], block.state_path()[i + 1]);
            let e = block.codeword.path.edges[i];
            let edge = t.edge(from, e);
            assert_eq!(edge.next_state, to);
            assert_eq!(sp.constellation().point(edge.label), block.u()[i]);
            assert_eq!(sp.bins().bin_of_edge(from, e), msg[i] as usize);
            assert_eq!(block.x[i], block.u()[i] - s[i] * 0.9);
            sum += branch_metric(block.u()[i], s[i], 0.9);
        }
        assert_eq!(sum, block.achieved_metric);
    }

    #[test]
    fn length_mismatch() {
        let sp = spec(TrellisPreset::Pam8State8, 0.5);
        assert!(matches!(
            pip_encode(&sp, &[0, 1], &[c(1.0, 0.0)]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(pip_encode(&sp, &[], &[]).is_err());
        assert!(pip_encode(&sp, &[0], &[c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn tcm_zero_bits_follow_edge_zero() {
        let t = crate::trellis::build_preset(TrellisPreset::Qam4State4Awgn, 2.0).unwrap();
        let cw = tcm_encode(&t, &[0; 8]).unwrap();
        assert!(cw.path.edges.iter().all(|&e| e == 0));
        assert!(cw.state_path().iter().all(|&s| s == 0));
    }

    #[test]
    fn tcm_walk_follows_table() {
        let t = crate::trellis::build_preset(TrellisPreset::Qam16State8, 10.0).unwrap();
        let bits = [1, 0, 1, 0, 1, 1, 1, 1, 1, 0, 0, 0];
        let cw = tcm_encode(&t, &bits).unwrap();
        assert_eq!(cw.path.edges, vec![5, 3, 7, 0]);
        let mut s = 0;
        for (i, &e) in cw.path.edges.iter().enumerate() {
            assert_eq!(cw.state_path()[i], s);
            assert_eq!(cw.labels()[i], t.edge(s, e).label);
            s = t.edge(s, e).next_state;
        }
        assert!(tcm_encode(&t, &bits[..11]).is_err());
    }
}
