//! Ungerboeck trellis codes, per-state binning and the full scheme description.
//!
//! Each preset is a systematic encoder described by its parity-check
//! polynomials `h^0, h^1, ..., h^m` (octal, as tabulated by Ungerboeck),
//! realized in observer form with `nu` state bits. At a state with register
//! contents `S`, the least significant label bit is `z0 = S & 1`, the coded
//! input bits `z1..zm` come from the low bits of the edge index and any
//! remaining edge-index bits are uncoded (parallel transitions). The next
//! state is
//!
//! ```text
//! S' = (S >> 1) ^ ((z0 * h0 ^ z1 * h1 ^ ... ^ zm * hm) >> 1)
//! ```
//!
//! and the edge's signal point is the one with partition index
//! `(edge << 1) | z0`. Transition tables can be printed with `dpc describe`.
//!
//! | preset                  | points | states | r0 | h0 | h1 | h2 |
//! |-------------------------|--------|--------|----|----|----|----|
//! | `pam8_8state_r0_2`      | 8-PAM  | 8      | 2  | 13 | 04 |    |
//! | `qam16_8state_r0_3`     | 16-QAM | 8      | 3  | 11 | 02 | 04 |
//! | `qam8_4state_r0_2`      | 8-QAM  | 4      | 2  | 5  | 2  |    |
//! | `qam8_8state_r0_2`      | 8-QAM  | 8      | 2  | 11 | 02 | 04 |
//! | `qam4_4state_r0_2_awgn` | 4-QAM  | 4      | 1  | 5  | 2  |    |

use std::collections::{BinaryHeap, VecDeque};
use std::cmp::Reverse;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constellation::{build_constellation, Constellation, ConstellationKind};
use crate::error::{invalid, Error, Result};

/// The supported trellis codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrellisPreset {
    Pam8State8,
    Qam16State8,
    Qam8State4,
    Qam8State8,
    /// Plain 1 bit/use code used as the interference-free reference and for
    /// the weak broadcast user.
    Qam4State4Awgn,
}

struct PresetParams {
    kind: ConstellationKind,
    nu: u32,
    r0: usize,
    parity: &'static [u32],
}

impl TrellisPreset {
    pub const ALL: [TrellisPreset; 5] = [
        Self::Pam8State8,
        Self::Qam16State8,
        Self::Qam8State4,
        Self::Qam8State8,
        Self::Qam4State4Awgn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pam8State8 => "pam8_8state_r0_2",
            Self::Qam16State8 => "qam16_8state_r0_3",
            Self::Qam8State4 => "qam8_4state_r0_2",
            Self::Qam8State8 => "qam8_8state_r0_2",
            Self::Qam4State4Awgn => "qam4_4state_r0_2_awgn",
        }
    }

    fn params(self) -> PresetParams {
        match self {
            Self::Pam8State8 => PresetParams {
                kind: ConstellationKind::Pam8,
                nu: 3,
                r0: 2,
                parity: &[0o13, 0o04],
            },
            Self::Qam16State8 => PresetParams {
                kind: ConstellationKind::Qam16,
                nu: 3,
                r0: 3,
                parity: &[0o11, 0o02, 0o04],
            },
            Self::Qam8State4 => PresetParams {
                kind: ConstellationKind::Qam8,
                nu: 2,
                r0: 2,
                parity: &[0o5, 0o2],
            },
            Self::Qam8State8 => PresetParams {
                kind: ConstellationKind::Qam8,
                nu: 3,
                r0: 2,
                parity: &[0o11, 0o02, 0o04],
            },
            Self::Qam4State4Awgn => PresetParams {
                kind: ConstellationKind::Qam4,
                nu: 2,
                r0: 1,
                parity: &[0o5, 0o2],
            },
        }
    }

    pub fn constellation_kind(self) -> ConstellationKind {
        self.params().kind
    }
}

impl fmt::Display for TrellisPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrellisPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown trellis preset '{s}'")))
    }
}

/// One outgoing transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub next_state: usize,
    pub label: usize,
}

/// A trellis code over a labeled constellation.
#[derive(Clone, Debug)]
pub struct TrellisCode {
    preset: TrellisPreset,
    num_states: usize,
    r0: usize,
    coded_bits: usize,
    edges: Vec<Edge>,
    constellation: Constellation,
}

impl TrellisCode {
    pub fn preset(&self) -> TrellisPreset {
        self.preset
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Design spectral efficiency in bits per channel use.
    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn edges_per_state(&self) -> usize {
        1 << self.r0
    }

    /// Number of edge-index bits that drive the shift register.
    pub fn coded_bits(&self) -> usize {
        self.coded_bits
    }

    pub fn edge(&self, state: usize, edge: usize) -> Edge {
        self.edges[state * self.edges_per_state() + edge]
    }

    pub fn edges_from(&self, state: usize) -> &[Edge] {
        let e = self.edges_per_state();
        &self.edges[state * e..(state + 1) * e]
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// True when every state reaches every other state.
    pub fn is_strongly_connected(&self) -> bool {
        let reach = |forward: bool| {
            let mut seen = vec![false; self.num_states];
            let mut queue = VecDeque::from([0usize]);
            seen[0] = true;
            while let Some(s) = queue.pop_front() {
                for t in 0..self.num_states {
                    let linked = if forward {
                        self.edges_from(s).iter().any(|e| e.next_state == t)
                    } else {
                        self.edges_from(t).iter().any(|e| e.next_state == s)
                    };
                    if linked && !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
            seen.into_iter().all(|v| v)
        };
        reach(true) && reach(false)
    }

    /// Squared free Euclidean distance: the smallest distance between two
    /// label sequences that leave a common state on different edges and
    /// later meet again (or a pair of parallel edges). Dijkstra over state pairs.
    pub fn free_distance_sq(&self) -> f64 {
        let c = &self.constellation;
        let s = self.num_states;
        let mut best = u64::MAX;
        let mut dist = vec![u64::MAX; s * s];
        let mut heap = BinaryHeap::new();
        for state in 0..s {
            let out = self.edges_from(state);
            for (i, a) in out.iter().enumerate() {
                for b in &out[i + 1..] {
                    let d = c.grid_sq_distance(a.label, b.label) as u64;
                    if a.next_state == b.next_state {
                        best = best.min(d);
                    } else {
                        let key = a.next_state * s + b.next_state;
                        if d < dist[key] {
                            dist[key] = d;
                            heap.push(Reverse((d, a.next_state, b.next_state)));
                        }
                    }
                }
            }
        }
        while let Some(Reverse((d, p, q))) = heap.pop() {
            if d >= best {
                break;
            }
            if d > dist[p * s + q] {
                continue;
            }
            for a in self.edges_from(p) {
                for b in self.edges_from(q) {
                    let nd = d + c.grid_sq_distance(a.label, b.label) as u64;
                    if a.next_state == b.next_state {
                        best = best.min(nd);
                    } else {
                        let key = a.next_state * s + b.next_state;
                        if nd < dist[key] {
                            dist[key] = nd;
                            heap.push(Reverse((nd, a.next_state, b.next_state)));
                        }
                    }
                }
            }
        }
        best as f64 * c.scale() * c.scale()
    }
}

/// Builds a preset trellis over `constellation`, whose kind must match.
pub fn build_trellis(preset: TrellisPreset, constellation: Constellation) -> Result<TrellisCode> {
    let params = preset.params();
    if constellation.kind() != params.kind {
        return invalid(format!(
            "preset {preset} needs a {} constellation, got {}",
            params.kind,
            constellation.kind()
        ));
    }
    let coded_bits = params.parity.len() - 1;
    let num_states = 1usize << params.nu;
    let per_state = 1usize << params.r0;
    let mut edges = Vec::with_capacity(num_states * per_state);
    for state in 0..num_states {
        let z0 = (state & 1) as u32;
        for e in 0..per_state {
            let mut feedback = z0 * params.parity[0];
            for (j, h) in params.parity.iter().enumerate().skip(1) {
                feedback ^= ((e >> (j - 1)) & 1) as u32 * h;
            }
            let next_state = ((state as u32 >> 1) ^ (feedback >> 1)) as usize & (num_states - 1);
            let label = constellation.label_of_partition_index((e << 1) | z0 as usize);
            edges.push(Edge { next_state, label });
        }
    }
    Ok(TrellisCode {
        preset,
        num_states,
        r0: params.r0,
        coded_bits,
        edges,
        constellation,
    })
}

/// Convenience: build the preset's constellation at `avg_power` and the trellis on it.
pub fn build_preset(preset: TrellisPreset, avg_power: f64) -> Result<TrellisCode> {
    build_trellis(preset, build_constellation(preset.constellation_kind(), avg_power)?)
}

/// How a state's edges are grouped into bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum BinStrategy {
    /// Maximize the smallest intra-bin distance (ties: largest sum of per-bin minima).
    #[default]
    PairedMaxSpread,
    /// Minimize the total intra-bin squared distance, so near neighbours share a bin.
    PairedMinSpread,
    /// Bin index is the top `r` coded label bits; parallel transitions always share a bin.
    CosetSplit,
    /// Each state's edges are shuffled by a ChaCha8 generator with this seed
    /// and cut into consecutive groups.
    Random(u64),
}

impl BinStrategy {
    pub const ALL: [BinStrategy; 3] = [Self::PairedMaxSpread, Self::PairedMinSpread, Self::CosetSplit];

    pub fn name(self) -> &'static str {
        match self {
            Self::PairedMaxSpread => "paired-max-spread",
            Self::PairedMinSpread => "paired-min-spread",
            Self::CosetSplit => "coset-split",
            Self::Random(_) => "random",
        }
    }
}

impl fmt::Display for BinStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Random(seed) => write!(f, "random:{seed}"),
            _ => f.write_str(self.name()),
        }
    }
}

impl FromStr for BinStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "random" {
            return Ok(Self::Random(0));
        }
        if let Some(seed) = s.strip_prefix("random:") {
            return seed
                .parse()
                .map(Self::Random)
                .map_err(|_| Error::Config(format!("bad random bin seed '{seed}'")));
        }
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown bin strategy '{s}'")))
    }
}

/// Per-state partition of edges into `2^r` bins.
#[derive(Clone, Debug, PartialEq)]
pub struct BinScheme {
    r: usize,
    strategy: BinStrategy,
    /// `bins[state][m]` lists the edge indices of bin `m`, ascending.
    bins: Vec<Vec<Vec<usize>>>,
    /// Flattened `state * edges_per_state + edge -> bin`.
    edge_bin: Vec<usize>,
}

impl BinScheme {
    /// Message bits per channel use.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn strategy(&self) -> BinStrategy {
        self.strategy
    }

    pub fn num_bins(&self) -> usize {
        1 << self.r
    }

    pub fn bin(&self, state: usize, m: usize) -> &[usize] {
        &self.bins[state][m]
    }

    pub fn bins_of(&self, state: usize) -> &[Vec<usize>] {
        &self.bins[state]
    }

    pub fn bin_of_edge(&self, state: usize, edge: usize) -> usize {
        let per_state = self.edge_bin.len() / self.bins.len();
        self.edge_bin[state * per_state + edge]
    }
}

/// Splits `items` into groups of `size`, each group led by its smallest
/// remaining element, calling `visit` on every complete partition.
fn for_each_partition(items: &[usize], size: usize, visit: &mut impl FnMut(&[Vec<usize>])) {
    fn rec(
        remaining: &[usize],
        size: usize,
        acc: &mut Vec<Vec<usize>>,
        visit: &mut impl FnMut(&[Vec<usize>]),
    ) {
        if remaining.is_empty() {
            visit(acc);
            return;
        }
        let lead = remaining[0];
        let rest = &remaining[1..];
        let mut pick = Vec::with_capacity(size - 1);
        choose(rest, size - 1, 0, &mut pick, &mut |chosen| {
            let mut group = Vec::with_capacity(size);
            group.push(lead);
            group.extend_from_slice(chosen);
            let left: Vec<usize> = rest.iter().copied().filter(|x| !chosen.contains(x)).collect();
            acc.push(group);
            rec(&left, size, acc, visit);
            acc.pop();
        });
    }
    fn choose(
        pool: &[usize],
        k: usize,
        start: usize,
        pick: &mut Vec<usize>,
        f: &mut impl FnMut(&[usize]),
    ) {
        if pick.len() == k {
            f(pick);
            return;
        }
        for i in start..pool.len() {
            pick.push(pool[i]);
            choose(pool, k, i + 1, pick, f);
            pick.pop();
        }
    }
    rec(items, size, &mut Vec::new(), visit);
}

/// Groups each state's edges into `2^r` bins of `2^(r0 - r)` edges.
pub fn build_bins(t: &TrellisCode, r: usize, strategy: BinStrategy) -> Result<BinScheme> {
    if r == 0 || r >= t.r0() {
        return invalid(format!("need 0 < r < r0 = {}, got r = {r}", t.r0()));
    }
    let per_state = t.edges_per_state();
    let num_bins = 1usize << r;
    let group = per_state / num_bins;
    let c = t.constellation();
    let mut bins = Vec::with_capacity(t.num_states());
    let mut shuffler = match strategy {
        BinStrategy::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    for state in 0..t.num_states() {
        let out = t.edges_from(state);
        let dist = |a: usize, b: usize| c.grid_sq_distance(out[a].label, out[b].label);
        let state_bins = match strategy {
            BinStrategy::CosetSplit => {
                if r > t.coded_bits() {
                    return Err(Error::Unsupported(format!(
                        "coset-split needs r <= {} coded bits",
                        t.coded_bits()
                    )));
                }
                let mut bs = vec![Vec::with_capacity(group); num_bins];
                let mask = (1 << t.coded_bits()) - 1;
                for e in 0..per_state {
                    bs[(e & mask) >> (t.coded_bits() - r)].push(e);
                }
                bs
            }
            BinStrategy::Random(_) => {
                let mut edges: Vec<usize> = (0..per_state).collect();
                edges.shuffle(shuffler.as_mut().expect("seeded for random strategy"));
                let mut bs: Vec<Vec<usize>> = edges
                    .chunks(group)
                    .map(|g| {
                        let mut g = g.to_vec();
                        g.sort_unstable();
                        g
                    })
                    .collect();
                bs.sort_unstable();
                bs
            }
            BinStrategy::PairedMaxSpread | BinStrategy::PairedMinSpread => {
                let edges: Vec<usize> = (0..per_state).collect();
                let mut best: Option<((i64, i64), Vec<Vec<usize>>)> = None;
                for_each_partition(&edges, group, &mut |groups| {
                    let score = match strategy {
                        BinStrategy::PairedMaxSpread => {
                            let minima: Vec<i64> = groups
                                .iter()
                                .map(|g| {
                                    let mut m = i64::MAX;
                                    for (i, &a) in g.iter().enumerate() {
                                        for &b in &g[i + 1..] {
                                            m = m.min(dist(a, b));
                                        }
                                    }
                                    m
                                })
                                .collect();
                            (*minima.iter().min().unwrap(), minima.iter().sum())
                        }
                        _ => {
                            let total: i64 = groups
                                .iter()
                                .map(|g| {
                                    let mut s = 0;
                                    for (i, &a) in g.iter().enumerate() {
                                        for &b in &g[i + 1..] {
                                            s += dist(a, b);
                                        }
                                    }
                                    s
                                })
                                .sum();
                            (-total, 0)
                        }
                    };
                    if best.as_ref().is_none_or(|(s, _)| score > *s) {
                        best = Some((score, groups.to_vec()));
                    }
                });
                best.expect("at least one partition").1
            }
        };
        bins.push(state_bins);
    }
    let mut edge_bin = vec![0; t.num_states() * per_state];
    for (state, state_bins) in bins.iter().enumerate() {
        for (m, bin) in state_bins.iter().enumerate() {
            for &e in bin {
                edge_bin[state * per_state + e] = m;
            }
        }
    }
    Ok(BinScheme {
        r,
        strategy,
        bins,
        edge_bin,
    })
}

/// Complete description of a dirty paper trellis code.
#[derive(Clone, Debug)]
pub struct DpcSpec {
    trellis: TrellisCode,
    bins: BinScheme,
    alpha: f64,
}

impl DpcSpec {
    pub fn new(trellis: TrellisCode, bins: BinScheme, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return invalid(format!("alpha must lie in [0, 1], got {alpha}"));
        }
        if bins.r() >= trellis.r0() || bins.bins.len() != trellis.num_states() {
            return invalid("bin scheme does not belong to this trellis");
        }
        Ok(Self {
            trellis,
            bins,
            alpha,
        })
    }

    /// Builds the preset at design power `design_power` (linear units).
    pub fn from_preset(
        preset: TrellisPreset,
        design_power: f64,
        r: usize,
        strategy: BinStrategy,
        alpha: f64,
    ) -> Result<Self> {
        let trellis = build_preset(preset, design_power)?;
        let bins = build_bins(&trellis, r, strategy)?;
        Self::new(trellis, bins, alpha)
    }

    pub fn trellis(&self) -> &TrellisCode {
        &self.trellis
    }

    pub fn bins(&self) -> &BinScheme {
        &self.bins
    }

    pub fn constellation(&self) -> &Constellation {
        self.trellis.constellation()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> usize {
        self.bins.r()
    }

    /// Average power of the expanded constellation.
    pub fn design_power(&self) -> f64 {
        self.constellation().avg_power()
    }
}

/// A walk through the trellis from a start state.
#[derive(Clone, Debug, PartialEq)]
pub struct TrellisPath {
    /// `n + 1` states.
    pub states: Vec<usize>,
    pub edges: Vec<usize>,
    pub labels: Vec<usize>,
}

/// Largest block length accepted by [`enumerate_valid_codewords`].
pub const MAX_ENUMERATION_LEN: usize = 12;

/// Splits a bit string into `width`-bit symbols, most significant bit first.
pub fn bits_to_symbols(bits: &[u8], width: usize) -> Result<Vec<usize>> {
    if width == 0 || bits.len() % width != 0 {
        return invalid(format!("{} bits do not split into {width}-bit symbols", bits.len()));
    }
    bits.chunks(width)
        .map(|chunk| {
            chunk.iter().try_fold(0usize, |acc, &b| match b {
                0 | 1 => Ok(acc << 1 | b as usize),
                _ => invalid(format!("bit values must be 0 or 1, got {b}")),
            })
        })
        .collect()
}

/// Inverse of [`bits_to_symbols`].
pub fn symbols_to_bits(symbols: &[usize], width: usize) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|&s| (0..width).rev().map(move |k| ((s >> k) & 1) as u8))
        .collect()
}

/// Every label sequence of length `n` that walks the trellis from
/// `start_state` using, at step `i`, only edges of bin `m_i`. Paths come out
/// in lexicographic edge order.
pub fn enumerate_valid_codewords(
    spec: &DpcSpec,
    message: &[u8],
    n: usize,
    start_state: usize,
) -> Result<Vec<TrellisPath>> {
    if n > MAX_ENUMERATION_LEN {
        return Err(Error::OracleScale {
            n,
            max: MAX_ENUMERATION_LEN,
        });
    }
    if message.len() != n * spec.r() {
        return invalid(format!(
            "message has {} bits, expected {}",
            message.len(),
            n * spec.r()
        ));
    }
    if start_state >= spec.trellis().num_states() {
        return invalid(format!("no state {start_state}"));
    }
    let symbols = bits_to_symbols(message, spec.r())?;
    let mut out = Vec::new();
    let mut path = TrellisPath {
        states: vec![start_state],
        edges: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
    };
    fn walk(spec: &DpcSpec, symbols: &[usize], path: &mut TrellisPath, out: &mut Vec<TrellisPath>) {
        let step = path.edges.len();
        if step == symbols.len() {
            out.push(path.clone());
            return;
        }
        let state = *path.states.last().unwrap();
        for &e in spec.bins().bin(state, symbols[step]) {
            let edge = spec.trellis().edge(state, e);
            path.states.push(edge.next_state);
            path.edges.push(e);
            path.labels.push(edge.label);
            walk(spec, symbols, path, out);
            path.states.pop();
            path.edges.pop();
            path.labels.pop();
        }
    }
    walk(spec, &symbols, &mut path, &mut out);
    Ok(out)
}
