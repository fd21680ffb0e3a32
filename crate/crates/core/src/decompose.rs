//! Alternating weighted least-squares fit of the log source-filter model
//!
//! ```text
//! d_ij ~ a_i + p_j + r_n(i,j)
//! ```
//!
//! Each sweep updates the per-note scaling `a`, the excitation `p`, the
//! filter `r` and `a` again; every block update is the exact weighted
//! least-squares minimizer for that block, so the weighted RMS residual never
//! increases. The model has three gauge directions (see
//! [`crate::grid::null_space_basis`]); [`canonicalize`] fixes them by setting
//! `p_1 = 0` and removing the weighted linear trend of `r` over bin index.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{assemble_system, build_grid, partial_offset, BinGrid, DesignSystem, Weighting};
use crate::spectra::{schema_error, UniformSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the relative change of the metric between sweeps drops below this.
    pub rel_tolerance: f64,
    /// Stop once the metric itself drops below this (log units).
    pub abs_metric_floor: f64,
    pub weighting: Weighting,
    /// Unused; the solver is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100,
            rel_tolerance: 1e-3,
            abs_metric_floor: 1e-12,
            weighting: Weighting::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Validation("max_iterations must be at least 1".into()));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::Validation(format!(
                "rel_tolerance {} must lie in (0, 1)",
                self.rel_tolerance
            )));
        }
        if !(self.abs_metric_floor >= 0.0) {
            return Err(Error::Validation("abs_metric_floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Log filter value at one occupied bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinValue {
    pub n: u32,
    pub value: f64,
}

/// Fit residual of one usable entry (1-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionModel {
    pub name: String,
    pub f0_lowest_hz: f64,
    #[serde(rename = "S")]
    pub notes: usize,
    #[serde(rename = "K")]
    pub partials: usize,
    pub weighting: Weighting,
    /// Log excitation per harmonic.
    pub p: Vec<f64>,
    /// Log scaling per note.
    pub a: Vec<f64>,
    /// Log filter per occupied bin, ascending in `n`.
    pub r: Vec<BinValue>,
    pub iterations_used: usize,
    /// Weighted RMS log residual.
    pub final_metric: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub detrend_skipped: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<ResidualEntry>,
    /// Metric after initialization and after each sweep.
    #[serde(skip)]
    pub metric_history: Vec<f64>,
}

impl DecompositionModel {
    /// Log filter value at bin `n`, if that bin is occupied.
    pub fn filter_value(&self, n: u32) -> Option<f64> {
        self.r
            .binary_search_by_key(&n, |b| b.n)
            .ok()
            .map(|k| self.r[k].value)
    }

    pub fn offsets(&self) -> Vec<u32> {
        (1..=self.partials as u32).map(partial_offset).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.p.len() != self.partials {
            return bad(format!("p has {} values, K = {}", self.p.len(), self.partials));
        }
        if self.a.len() != self.notes {
            return bad(format!("a has {} values, S = {}", self.a.len(), self.notes));
        }
        if self.r.is_empty() {
            return bad("model has no filter bins".into());
        }
        if self.r.windows(2).any(|w| w[0].n >= w[1].n) {
            return bad("filter bins must be strictly ascending".into());
        }
        if !(self.f0_lowest_hz.is_finite() && self.f0_lowest_hz > 0.0) {
            return bad(format!("f0_lowest_hz {} is not positive", self.f0_lowest_hz));
        }
        let finite = self.p.iter().chain(&self.a).all(|v| v.is_finite())
            && self.r.iter().all(|b| b.value.is_finite());
        if !finite {
            return bad("model holds non-finite values".into());
        }
        Ok(())
    }

    fn check_layout(&self, sys: &DesignSystem) {
        let grid = sys.grid();
        assert_eq!(self.p.len(), grid.partials(), "model K does not match system");
        assert_eq!(self.a.len(), grid.notes(), "model S does not match system");
        assert!(
            self.r.len() == grid.occupied_count()
                && self.r.iter().zip(grid.occupied_bins()).all(|(b, &n)| b.n == n),
            "model bins do not match system"
        );
    }
}

pub fn read_model(path: &Path) -> Result<DecompositionModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let model: DecompositionModel = serde_path_to_error::deserialize(de).map_err(|e| {
        match schema_error(&e) {
            Error::Schema {
                pointer, message, ..
            } => Error::Schema {
                path: path.to_path_buf(),
                pointer,
                message,
            },
            other => other,
        }
    })?;
    model.validate()?;
    Ok(model)
}

pub fn write_model(model: &DecompositionModel, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(model).expect("model serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn weighted_mean<F>(count: usize, sys: &DesignSystem, key: F, mut term: impl FnMut(usize) -> f64) -> Vec<f64>
where
    F: Fn(usize) -> usize,
{
    let mut num = vec![0.0; count];
    let mut den = vec![0.0; count];
    for (k, row) in sys.rows().iter().enumerate() {
        let slot = key(k);
        num[slot] += row.weight * term(k);
        den[slot] += row.weight;
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

/// Starting point: per-note weighted means, then per-partial means of what
/// is left, and a flat filter.
pub fn init_model(sys: &DesignSystem) -> DecompositionModel {
    let grid = sys.grid();
    let rows = sys.rows();
    let a = weighted_mean(grid.notes(), sys, |k| rows[k].note, |k| rows[k].value);
    let p = weighted_mean(grid.partials(), sys, |k| rows[k].partial, |k| {
        rows[k].value - a[rows[k].note]
    });
    DecompositionModel {
        name: sys.name().to_string(),
        f0_lowest_hz: sys.f0_lowest_hz(),
        notes: grid.notes(),
        partials: grid.partials(),
        weighting: sys.weighting(),
        p,
        a,
        r: grid
            .occupied_bins()
            .iter()
            .map(|&n| BinValue { n, value: 0.0 })
            .collect(),
        iterations_used: 0,
        final_metric: f64::NAN,
        converged: false,
        detrend_skipped: false,
        residuals: Vec::new(),
        metric_history: Vec::new(),
    }
}

fn update_scaling(model: &mut DecompositionModel, sys: &DesignSystem) {
    let rows = sys.rows();
    model.a = weighted_mean(model.notes, sys, |k| rows[k].note, |k| {
        let row = &rows[k];
        row.value - model.p[row.partial] - model.r[row.bin_col].value
    });
}

/// One alternating sweep: scaling, excitation, `p_1` normalization, filter,
/// scaling again.
pub fn iterate_once(model: &mut DecompositionModel, sys: &DesignSystem) {
    model.check_layout(sys);
    let rows = sys.rows();

    update_scaling(model, sys);

    model.p = weighted_mean(model.partials, sys, |k| rows[k].partial, |k| {
        let row = &rows[k];
        row.value - model.a[row.note] - model.r[row.bin_col].value
    });

    let shift = model.p[0];
    model.p.iter_mut().for_each(|p| *p -= shift);
    model.a.iter_mut().for_each(|a| *a += shift);

    let filter = weighted_mean(model.r.len(), sys, |k| rows[k].bin_col, |k| {
        let row = &rows[k];
        row.value - model.a[row.note] - model.p[row.partial]
    });
    for (b, v) in model.r.iter_mut().zip(filter) {
        b.value = v;
    }

    update_scaling(model, sys);
}

/// Weighted RMS log residual over the usable entries.
pub fn metric(model: &DecompositionModel, sys: &DesignSystem) -> f64 {
    model.check_layout(sys);
    let (mut num, mut den) = (0.0, 0.0);
    for row in sys.rows() {
        let e = row.value - model.a[row.note] - model.p[row.partial] - model.r[row.bin_col].value;
        num += row.weight * e * e;
        den += row.weight;
    }
    (num / den).sqrt()
}

/// Weighted least-squares line `r_n ~ intercept + slope * n` over the
/// occupied bins, weighted by the total row weight of each bin. `None` when
/// fewer than two bins are occupied.
pub fn filter_trend(model: &DecompositionModel, sys: &DesignSystem) -> Option<(f64, f64)> {
    if model.r.len() < 2 {
        return None;
    }
    let w = sys.bin_weights();
    let total: f64 = w.iter().sum();
    let n_mean = model.r.iter().zip(&w).map(|(b, w)| w * f64::from(b.n)).sum::<f64>() / total;
    let r_mean = model.r.iter().zip(&w).map(|(b, w)| w * b.value).sum::<f64>() / total;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (b, w) in model.r.iter().zip(&w) {
        let dx = f64::from(b.n) - n_mean;
        sxy += w * dx * (b.value - r_mean);
        sxx += w * dx * dx;
    }
    let slope = sxy / sxx;
    Some((r_mean - slope * n_mean, slope))
}

/// Moves the model to the canonical gauge without changing any
/// reconstruction `a_i + p_j + r_n`.
pub fn canonicalize(model: &mut DecompositionModel, sys: &DesignSystem) {
    model.check_layout(sys);
    let shift = model.p[0];
    model.p.iter_mut().for_each(|p| *p -= shift);
    model.a.iter_mut().for_each(|a| *a += shift);

    let Some((intercept, slope)) = filter_trend(model, sys) else {
        model.detrend_skipped = true;
        return;
    };
    model.detrend_skipped = false;
    for b in &mut model.r {
        b.value -= intercept + slope * f64::from(b.n);
    }
    for (i, a) in model.a.iter_mut().enumerate() {
        *a += intercept + slope * (i as f64 + 1.0);
    }
    for (p, o) in model.p.iter_mut().zip(sys.grid().offsets()) {
        *p += slope * f64::from(*o);
    }
}

/// Log prediction `a_i + p_j + r_n` for every cell whose bin is in the
/// model; `None` elsewhere.
pub fn reconstruct(model: &DecompositionModel, grid: &BinGrid) -> Array2<Option<f64>> {
    Array2::from_shape_fn((grid.notes(), grid.partials()), |(i, j)| {
        let n = grid.offsets()[j] + i as u32 + 1;
        model
            .filter_value(n)
            .map(|r| model.a[i] + model.p[j] + r)
    })
}

/// `d - d_hat` on usable cells, `None` on masked ones.
pub fn residuals(model: &DecompositionModel, sys: &DesignSystem) -> Array2<Option<f64>> {
    model.check_layout(sys);
    let grid = sys.grid();
    let mut out = Array2::from_elem((grid.notes(), grid.partials()), None);
    for row in sys.rows() {
        let fit = model.a[row.note] + model.p[row.partial] + model.r[row.bin_col].value;
        out[(row.note, row.partial)] = Some(row.value - fit);
    }
    out
}

/// Runs the full fit on an already assembled system.
pub fn solve_system(sys: &DesignSystem, cfg: &SolverConfig) -> Result<DecompositionModel> {
    cfg.validate()?;
    let mut model = init_model(sys);
    let mut prev = metric(&model, sys);
    model.metric_history.push(prev);
    let mut converged = prev < cfg.abs_metric_floor;
    let mut iterations = 0;
    while !converged && iterations < cfg.max_iterations {
        iterate_once(&mut model, sys);
        iterations += 1;
        let current = metric(&model, sys);
        model.metric_history.push(current);
        let change = (current - prev).abs() / prev.max(cfg.abs_metric_floor);
        converged = current < cfg.abs_metric_floor || change < cfg.rel_tolerance;
        prev = current;
    }
    if !converged {
        log::warn!(
            "{}: no convergence after {} iterations (metric {:.3e})",
            sys.name(),
            iterations,
            prev
        );
    }
    canonicalize(&mut model, sys);
    model.iterations_used = iterations;
    model.converged = converged;
    model.final_metric = metric(&model, sys);
    model.residuals = sys
        .rows()
        .iter()
        .map(|row| ResidualEntry {
            i: row.note + 1,
            j: row.partial + 1,
            value: row.value
                - model.a[row.note]
                - model.p[row.partial]
                - model.r[row.bin_col].value,
        })
        .collect();
    Ok(model)
}

pub fn solve(u: &UniformSeries, cfg: &SolverConfig) -> Result<DecompositionModel> {
    let grid = build_grid(u);
    let sys = assemble_system(u, &grid, cfg.weighting);
    solve_system(&sys, cfg)
}
