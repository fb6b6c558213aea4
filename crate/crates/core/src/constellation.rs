//! Labeled signal sets and their set-partition chains.
//!
//! Every constellation lives on an odd-integer grid scaled by `A`. Each point
//! carries two indices: its *label* (the number printed next to the point in
//! the documentation tables) and its *partition index*, whose low `k` bits name
//! the level-`k` coset of the Ungerboeck partition chain. For 4-QAM, 8-QAM and
//! 8-PAM the two coincide. For 16-QAM the labels are chosen so that the eight
//! level-3 cosets are
//!
//! | coset | labels  |
//! |-------|---------|
//! | D0    | {0, 10} |
//! | D1    | {6, 12} |
//! | D2    | {5, 15} |
//! | D3    | {3, 9}  |
//! | D4    | {8, 2}  |
//! | D5    | {4, 14} |
//! | D6    | {7, 13} |
//! | D7    | {1, 11} |
//!
//! and coset `Dk` holds the points whose partition index is `k` or `k + 8`.
//!
//! Grid coordinates `(i, j)` below are column/row indices, so the point is
//! `A * ((2i - w + 1) + (2j - h + 1) i)` on a `w x h` grid. Partition bits:
//!
//! * 4-QAM: `z0 = (i + j) mod 2`, `z1 = i`.
//! * 8-QAM (4x2 grid): `z0 = (i + j) mod 2`, `z1 = i mod 2`, `z2 = i >> 1`.
//! * 16-QAM: `z0 = (i + j) mod 2`, `z1 = i mod 2`,
//!   `z2 = ((i >> 1) + (j >> 1)) mod 2`, `z3 = i >> 1`.
//! * 8-PAM: label `l` sits at amplitude `(2l - 7) A`, partition index `l`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

/// The four supported signal sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Qam4,
    Qam8,
    Qam16,
    Pam8,
}

impl ConstellationKind {
    pub const ALL: [ConstellationKind; 4] = [Self::Qam4, Self::Qam8, Self::Qam16, Self::Pam8];

    pub fn size(self) -> usize {
        match self {
            Self::Qam4 => 4,
            Self::Qam8 | Self::Pam8 => 8,
            Self::Qam16 => 16,
        }
    }

    /// Ratio `avg_power / A^2`.
    pub fn power_per_scale_sq(self) -> u32 {
        match self {
            Self::Qam4 => 2,
            Self::Qam8 => 6,
            Self::Qam16 => 10,
            Self::Pam8 => 21,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Qam4 => "qam4",
            Self::Qam8 => "qam8",
            Self::Qam16 => "qam16",
            Self::Pam8 => "pam8",
        }
    }
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown constellation '{s}'")))
    }
}

/// The 16-QAM level-3 cosets, indexed by coset number. Element 0 of each pair
/// has partition index `k`, element 1 has `k + 8`.
pub const QAM16_D_SUBSETS: [[usize; 2]; 8] = [
    [0, 10],
    [6, 12],
    [5, 15],
    [3, 9],
    [8, 2],
    [4, 14],
    [7, 13],
    [1, 11],
];

/// A labeled, power-scaled signal set.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    grid: Vec<(i32, i32)>,
    partition_to_label: Vec<usize>,
    label_to_partition: Vec<usize>,
    scale: f64,
    avg_power: f64,
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Number of partition bits, `log2(size)`.
    pub fn bits(&self) -> usize {
        self.points.len().trailing_zeros() as usize
    }

    /// Points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Odd-integer grid coordinates indexed by label; `point = scale * grid`.
    pub fn grid(&self) -> &[(i32, i32)] {
        &self.grid
    }

    /// The scale factor `A`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn avg_power(&self) -> f64 {
        self.avg_power
    }

    pub fn label_of_partition_index(&self, index: usize) -> usize {
        self.partition_to_label[index]
    }

    pub fn partition_index_of_label(&self, label: usize) -> usize {
        self.label_to_partition[label]
    }

    /// Squared distance between two labels in units of `A^2`.
    pub fn grid_sq_distance(&self, a: usize, b: usize) -> i64 {
        let (xa, ya) = self.grid[a];
        let (xb, yb) = self.grid[b];
        let dx = i64::from(xa - xb);
        let dy = i64::from(ya - yb);
        dx * dx + dy * dy
    }

    /// Exact mean of `|grid|^2` over all points.
    fn grid_mean_power(&self) -> f64 {
        let total: i64 = self
            .grid
            .iter()
            .map(|&(x, y)| i64::from(x) * i64::from(x) + i64::from(y) * i64::from(y))
            .sum();
        total as f64 / self.size() as f64
    }
}

/// Builds one of the supported constellations with the requested average power.
pub fn build_constellation(kind: ConstellationKind, avg_power: f64) -> Result<Constellation> {
    if !(avg_power > 0.0) || !avg_power.is_finite() {
        return invalid(format!("average power must be positive and finite, got {avg_power}"));
    }
    let m = kind.size();
    // (partition index, grid coordinate) for every point.
    let mut by_index: Vec<(usize, (i32, i32))> = Vec::with_capacity(m);
    match kind {
        ConstellationKind::Qam4 => {
            for i in 0..2 {
                for j in 0..2 {
                    let n = (i + j) % 2 | (i << 1);
                    by_index.push((n, (2 * i as i32 - 1, 2 * j as i32 - 1)));
                }
            }
        }
        ConstellationKind::Qam8 => {
            for i in 0..4 {
                for j in 0..2 {
                    let n = (i + j) % 2 | ((i % 2) << 1) | ((i >> 1) << 2);
                    by_index.push((n, (2 * i as i32 - 3, 2 * j as i32 - 1)));
                }
            }
        }
        ConstellationKind::Qam16 => {
            for i in 0..4 {
                for j in 0..4 {
                    let n = (i + j) % 2
                        | ((i % 2) << 1)
                        | ((((i >> 1) + (j >> 1)) % 2) << 2)
                        | ((i >> 1) << 3);
                    by_index.push((n, (2 * i as i32 - 3, 2 * j as i32 - 3)));
                }
            }
        }
        ConstellationKind::Pam8 => {
            for l in 0..8 {
                by_index.push((l, (2 * l as i32 - 7, 0)));
            }
        }
    }
    by_index.sort_by_key(|&(n, _)| n);
    debug_assert!(by_index.iter().enumerate().all(|(k, &(n, _))| k == n));

    let partition_to_label: Vec<usize> = (0..m)
        .map(|n| match kind {
            ConstellationKind::Qam16 => QAM16_D_SUBSETS[n % 8][n / 8],
            _ => n,
        })
        .collect();
    let mut label_to_partition = vec![0; m];
    let mut grid = vec![(0, 0); m];
    for (n, &(_, g)) in by_index.iter().enumerate() {
        let label = partition_to_label[n];
        label_to_partition[label] = n;
        grid[label] = g;
    }

    let scale = (avg_power / f64::from(kind.power_per_scale_sq())).sqrt();
    let points = grid
        .iter()
        .map(|&(x, y)| Complex64::new(scale * f64::from(x), scale * f64::from(y)))
        .collect();
    let c = Constellation {
        kind,
        points,
        grid,
        partition_to_label,
        label_to_partition,
        scale,
        avg_power,
    };
    debug_assert_eq!(c.grid_mean_power(), f64::from(kind.power_per_scale_sq()));
    Ok(c)
}

/// Ungerboeck set-partition chain of a constellation.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionChain {
    /// `levels[k]` holds `2^k` cosets of `size / 2^k` labels each; coset `c`
    /// contains the labels whose partition index is `c` modulo `2^k`.
    pub levels: Vec<Vec<Vec<usize>>>,
    /// Minimum intra-coset squared distance per level.
    pub subset_distances: Vec<f64>,
}

impl PartitionChain {
    /// The level-`level` coset containing `label`.
    pub fn coset_of(&self, level: usize, label: usize) -> &[usize] {
        self.levels[level]
            .iter()
            .find(|coset| coset.contains(&label))
            .expect("every label belongs to a coset")
    }
}

/// Computes the partition chain down to cosets of two points.
pub fn build_partition(c: &Constellation) -> Result<PartitionChain> {
    let bits = c.bits();
    if c.size() != 1 << bits || bits == 0 {
        return Err(Error::Unsupported(format!("constellation of size {}", c.size())));
    }
    let mut levels = Vec::with_capacity(bits);
    let mut subset_distances = Vec::with_capacity(bits);
    for level in 0..bits {
        let count = 1usize << level;
        let cosets: Vec<Vec<usize>> = (0..count)
            .map(|coset| {
                let mut labels: Vec<usize> = (coset..c.size())
                    .step_by(count)
                    .map(|n| c.label_of_partition_index(n))
                    .collect();
                labels.sort_unstable();
                labels
            })
            .collect();
        let min_units = cosets
            .iter()
            .flat_map(|coset| {
                coset.iter().enumerate().flat_map(move |(k, &a)| {
                    coset[k + 1..].iter().map(move |&b| c.grid_sq_distance(a, b))
                })
            })
            .min()
            .expect("cosets hold at least two points");
        subset_distances.push(min_units as f64 * c.scale() * c.scale());
        levels.push(cosets);
    }
    Ok(PartitionChain {
        levels,
        subset_distances,
    })
}
