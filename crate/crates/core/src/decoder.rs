//! Minimum Euclidean distance decoding and dirt recovery.
//!
//! The receiver searches the whole trellis (every edge, not only one bin)
//! for the codeword closest to `y`, then reads the message off the bin of
//! each decoded edge. The residual dirt `(1 - alpha) s` is treated as noise.

use num_complex::Complex64;

use crate::encoder::Codeword;
use crate::error::{invalid, Error, Result};
use crate::trellis::{symbols_to_bits, DpcSpec, TrellisCode};
use crate::viterbi;

/// Output of a minimum-distance search.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub codeword: Codeword,
    pub message: Vec<u8>,
    /// `sum_i |y_i - u_i|^2` of the decoded codeword.
    pub distance: f64,
}

fn closest_codeword(trellis: &TrellisCode, y: &[Complex64]) -> Result<(Codeword, f64)> {
    if y.is_empty() {
        return invalid("empty received vector");
    }
    if !y.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return invalid("received vector contains non-finite samples");
    }
    let points = trellis.constellation().points();
    let all: Vec<usize> = (0..trellis.edges_per_state()).collect();
    let best = viterbi::search(
        trellis,
        y.len(),
        |step, bm| {
            let yi = y[step];
            for (m, &p) in bm.iter_mut().zip(points) {
                *m = (yi - p).norm_sqr();
            }
        },
        |_, _| &all,
    );
    Ok((Codeword::from_path(trellis, best.path), best.metric))
}

/// Decodes a dirty paper codeword and maps each edge to its bin index.
pub fn medd_decode(spec: &DpcSpec, y: &[Complex64]) -> Result<Decoded> {
    let (codeword, distance) = closest_codeword(spec.trellis(), y)?;
    let bins = spec.bins();
    let symbols: Vec<usize> = codeword
        .path
        .edges
        .iter()
        .zip(&codeword.path.states)
        .map(|(&e, &s)| bins.bin_of_edge(s, e))
        .collect();
    Ok(Decoded {
        message: symbols_to_bits(&symbols, spec.r()),
        codeword,
        distance,
    })
}

/// Decodes a plain TCM codeword; the inverse of [`crate::encoder::tcm_encode`].
pub fn tcm_decode(trellis: &TrellisCode, y: &[Complex64]) -> Result<Decoded> {
    let (codeword, distance) = closest_codeword(trellis, y)?;
    Ok(Decoded {
        message: symbols_to_bits(&codeword.path.edges, trellis.r0()),
        codeword,
        distance,
    })
}

/// `s_hat = (y - u_hat) / (1 - alpha)`.
pub fn recover_dirt(y: &[Complex64], u_hat: &[Complex64], alpha: f64) -> Result<Vec<Complex64>> {
    if !(alpha < 1.0) {
        return Err(Error::UnrecoverableConfiguration(alpha));
    }
    if y.len() != u_hat.len() {
        return invalid(format!("y has {} samples but u_hat has {}", y.len(), u_hat.len()));
    }
    let gain = 1.0 - alpha;
    Ok(y.iter().zip(u_hat).map(|(&a, &b)| (a - b) / gain).collect())
}
