//! Semitone log-frequency bins and the incidence system of the log model.
//!
//! Partial `j` of note `i` (both 1-based) falls into bin
//! `n = o_j + i` with `o_j = floor(12 log2 j + 1/2)`. Every usable entry
//! becomes one row of an incidence matrix with exactly three ones: one in the
//! excitation block (`p_j`), one in the scaling block (`a_i`) and one in the
//! filter block (`r_n`). Columns are laid out `[p_1..p_K | a_1..a_S | r_n..]`
//! with one filter column per occupied bin.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{log_magnitudes, UniformSeries};

/// Largest dense matrix (rows x cols) the rank oracle accepts.
pub const MAX_ORACLE_ENTRIES: usize = 2_000_000;

/// Bin offset of harmonic `j`, i.e. `floor(12 log2 j + 1/2)`.
///
/// Evaluated in integers: `o` is the largest value with `2^(2o-1) <= j^24`,
/// which is `bitlen(j^24) / 2`. Powers of two sit exactly on the half-integer
/// and round down.
pub fn partial_offset(j: u32) -> u32 {
    assert!(j >= 1, "harmonic index starts at 1");
    let bits = BigUint::from(j).pow(24).bits();
    (bits / 2) as u32
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinGrid {
    notes: usize,
    partials: usize,
    offsets: Vec<u32>,
    occupied: Vec<u32>,
}

impl BinGrid {
    /// Grid with every `(i, j)` cell usable.
    pub fn full(notes: usize, partials: usize) -> Self {
        Self::with_mask(notes, partials, |_, _| true)
    }

    /// `usable(i, j)` takes 0-based note and partial indices.
    pub fn with_mask(notes: usize, partials: usize, usable: impl Fn(usize, usize) -> bool) -> Self {
        let offsets: Vec<u32> = (1..=partials as u32).map(partial_offset).collect();
        let mut occupied = Vec::new();
        for i in 0..notes {
            for (j, &o) in offsets.iter().enumerate() {
                if usable(i, j) {
                    occupied.push(o + i as u32 + 1);
                }
            }
        }
        occupied.sort_unstable();
        occupied.dedup();
        BinGrid {
            notes,
            partials,
            offsets,
            occupied,
        }
    }

    pub fn notes(&self) -> usize {
        self.notes
    }

    pub fn partials(&self) -> usize {
        self.partials
    }

    /// `o_j` for `j = 1..=K`, stored 0-based.
    pub fn offsets(&self) -> &[u32] {
        &self.offsets
    }

    /// Sorted bins holding at least one usable entry.
    pub fn occupied_bins(&self) -> &[u32] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    /// Number of bins between the lowest fundamental and the highest
    /// partial of the highest note, `o_K + S`.
    pub fn span(&self) -> u32 {
        self.offsets.last().copied().unwrap_or(0) + self.notes as u32
    }

    /// Bin of partial `j` of note `i`, both 1-based.
    pub fn bin_index(&self, i: usize, j: usize) -> Result<u32> {
        if i == 0 || i > self.notes || j == 0 || j > self.partials {
            return Err(Error::OutOfRange(format!(
                "(i={i}, j={j}) outside 1..={} x 1..={}",
                self.notes, self.partials
            )));
        }
        Ok(self.offsets[j - 1] + i as u32)
    }

    /// Position of bin `n` among the occupied bins.
    pub fn bin_column(&self, n: u32) -> Option<usize> {
        self.occupied.binary_search(&n).ok()
    }

    pub fn column_count(&self) -> usize {
        self.partials + self.notes + self.occupied.len()
    }
}

pub fn build_grid(u: &UniformSeries) -> BinGrid {
    BinGrid::with_mask(u.notes(), u.partials(), |i, j| u.mask[(i, j)])
}

/// Per-entry weighting of the least-squares objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Uniform,
    #[default]
    Magnitude,
    Power,
}

impl Weighting {
    pub fn raw_weight(self, magnitude: f64) -> f64 {
        match self {
            Weighting::Uniform => 1.0,
            Weighting::Magnitude => magnitude,
            Weighting::Power => magnitude * magnitude,
        }
    }
}

impl FromStr for Weighting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Weighting::Uniform),
            "magnitude" => Ok(Weighting::Magnitude),
            "power" => Ok(Weighting::Power),
            other => Err(format!(
                "unknown weighting {other:?} (expected uniform|magnitude|power)"
            )),
        }
    }
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::Magnitude => "magnitude",
            Weighting::Power => "power",
        })
    }
}

/// One usable data point. Indices are 0-based; `bin` is the 1-based bin
/// number and `bin_col` its position among the occupied bins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemRow {
    pub note: usize,
    pub partial: usize,
    pub bin: u32,
    pub bin_col: usize,
    pub value: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignSystem {
    name: String,
    f0_lowest_hz: f64,
    grid: BinGrid,
    rows: Vec<SystemRow>,
    weighting: Weighting,
}

impl DesignSystem {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f0_lowest_hz(&self) -> f64 {
        self.f0_lowest_hz
    }

    pub fn grid(&self) -> &BinGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[SystemRow] {
        &self.rows
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.grid.column_count()
    }

    pub fn p_col(&self, partial: usize) -> usize {
        partial
    }

    pub fn a_col(&self, note: usize) -> usize {
        self.grid.partials + note
    }

    pub fn r_col(&self, bin_col: usize) -> usize {
        self.grid.partials + self.grid.notes + bin_col
    }

    /// Column indices of the three ones in each row.
    pub fn incidence(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.rows
            .iter()
            .map(|r| [self.p_col(r.partial), self.a_col(r.note), self.r_col(r.bin_col)])
    }

    /// Total weight per occupied bin.
    pub fn bin_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.occupied_count()];
        for r in &self.rows {
            w[r.bin_col] += r.weight;
        }
        w
    }

    /// Dense 0/1 copy of the incidence matrix.
    pub fn dense_incidence(&self) -> Vec<Vec<i64>> {
        let cols = self.col_count();
        self.incidence()
            .map(|ones| {
                let mut row = vec![0; cols];
                for c in ones {
                    row[c] = 1;
                }
                row
            })
            .collect()
    }

    /// Plain PBM image of the incidence matrix, ones in black.
    pub fn to_pbm(&self) -> String {
        let cols = self.col_count();
        let mut out = format!("P1\n{} {}\n", cols, self.row_count());
        let mut line = vec![b'0'; 2 * cols - 1];
        for ones in self.incidence() {
            for k in 0..cols {
                line[2 * k] = b'0';
                if k + 1 < cols {
                    line[2 * k + 1] = b' ';
                }
            }
            for c in ones {
                line[2 * c] = b'1';
            }
            out.push_str(std::str::from_utf8(&line).expect("ascii"));
            out.push('\n');
        }
        out
    }
}

/// Stacks every usable entry of `u` into the log-domain linear system.
/// Weights are rescaled so that they sum to the number of rows.
pub fn assemble_system(u: &UniformSeries, grid: &BinGrid, weighting: Weighting) -> DesignSystem {
    let logs = log_magnitudes(u);
    let mut rows: Vec<SystemRow> = logs
        .iter()
        .map(|(i, j, value)| {
            let bin = grid.offsets[j] + i as u32 + 1;
            SystemRow {
                note: i,
                partial: j,
                bin,
                bin_col: grid.bin_column(bin).expect("grid built from the same mask"),
                value,
                weight: weighting.raw_weight(u.magnitudes[(i, j)]),
            }
        })
        .collect();
    let total: f64 = rows.iter().map(|r| r.weight).sum();
    let scale = rows.len() as f64 / total;
    for r in &mut rows {
        r.weight *= scale;
    }
    DesignSystem {
        name: u.name.clone(),
        f0_lowest_hz: u.f0_lowest_hz,
        grid: grid.clone(),
        rows,
        weighting,
    }
}

/// Three integer kernel vectors of the incidence matrix, over the column
/// layout of `grid`:
///
/// 1. `p += 1, a -= 1`
/// 2. `r += 1, a -= 1`
/// 3. `p_j += o_j, a_i += i, r_n -= n`
pub fn null_space_basis(grid: &BinGrid) -> [Vec<i64>; 3] {
    let (k, s) = (grid.partials, grid.notes);
    let cols = grid.column_count();
    let mut v1 = vec![0i64; cols];
    let mut v2 = vec![0i64; cols];
    let mut v3 = vec![0i64; cols];
    for j in 0..k {
        v1[j] = 1;
        v3[j] = i64::from(grid.offsets[j]);
    }
    for i in 0..s {
        v1[k + i] = -1;
        v2[k + i] = -1;
        v3[k + i] = i as i64 + 1;
    }
    for (c, &n) in grid.occupied.iter().enumerate() {
        v2[k + s + c] = 1;
        v3[k + s + c] = -i64::from(n);
    }
    [v1, v2, v3]
}

/// Integer product `M v` of the incidence matrix with `v`.
pub fn incidence_apply(sys: &DesignSystem, v: &[i64]) -> Vec<i64> {
    sys.incidence().map(|ones| ones.iter().map(|&c| v[c]).sum()).collect()
}

/// Exact rank of the incidence matrix.
pub fn rank_oracle(sys: &DesignSystem) -> Result<usize> {
    rank_oracle_without(sys, &[])
}

/// Exact rank of the incidence matrix with the listed columns deleted.
pub fn rank_oracle_without(sys: &DesignSystem, dropped: &[usize]) -> Result<usize> {
    let (rows, cols) = (sys.row_count(), sys.col_count() - dropped.len());
    if rows.saturating_mul(cols) > MAX_ORACLE_ENTRIES {
        return Err(Error::SizeGuard {
            rows,
            cols,
            limit: MAX_ORACLE_ENTRIES,
        });
    }
    let matrix: Vec<Vec<i64>> = sys
        .dense_incidence()
        .into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .filter(|(c, _)| !dropped.contains(c))
                .map(|(_, x)| x)
                .collect()
        })
        .collect();
    Ok(exact_rank(&matrix))
}

/// Rank over the rationals by fraction-free (Bareiss) elimination.
pub fn exact_rank(matrix: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<BigInt>> = matrix
        .iter()
        .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    let mut prev = BigInt::one();
    let mut rank = 0;
    for c in 0..cols {
        if rank == rows {
            break;
        }
        let Some(p) = (rank..rows).find(|&r| !a[r][c].is_zero()) else {
            continue;
        };
        a.swap(rank, p);
        let (head, tail) = a.split_at_mut(rank + 1);
        let pivot_row = &head[rank];
        let pivot = &pivot_row[c];
        for row in tail.iter_mut() {
            let factor = std::mem::take(&mut row[c]);
            for k in c + 1..cols {
                let x = pivot * &row[k] - &factor * &pivot_row[k];
                debug_assert!((&x % &prev).is_zero(), "Bareiss division must be exact");
                row[k] = x / &prev;
            }
        }
        prev = pivot.clone();
        rank += 1;
    }
    rank
}
