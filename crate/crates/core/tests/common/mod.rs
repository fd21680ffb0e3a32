//! Synthetic instruments for integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sfd_core::grid::{BinGrid, Weighting};
use sfd_core::spectra::UniformSeries;

pub const F0: f64 = 65.406;

/// Ground-truth log parameters on a full `S x K` grid.
#[derive(Clone, Debug)]
pub struct Truth {
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    /// Indexed by occupied-bin position of `BinGrid::full(S, K)`.
    pub r: Vec<f64>,
    pub grid: BinGrid,
}

impl Truth {
    pub fn random(rng: &mut ChaCha8Rng, notes: usize, partials: usize) -> Self {
        let grid = BinGrid::full(notes, partials);
        let a = (0..notes).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let p = (0..partials)
            .map(|j| -0.7 * ((j + 1) as f64).ln() + rng.gen_range(-0.6..0.6))
            .collect();
        let (f1, f2, ph) = (rng.gen_range(0.05..0.3), rng.gen_range(0.3..0.8), rng.gen_range(0.0..6.0));
        let r = grid
            .occupied_bins()
            .iter()
            .map(|&n| {
                let x = f64::from(n);
                (f1 * x + ph).sin() + 0.4 * (f2 * x).cos() + rng.gen_range(-0.2..0.2)
            })
            .collect();
        Truth { a, p, r, grid }
    }

    pub fn log_value(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.bin_index(i + 1, j + 1).unwrap();
        self.a[i] + self.p[j] + self.r[self.grid.bin_column(n).unwrap()]
    }

    pub fn magnitudes(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.grid.notes(), self.grid.partials()), |(i, j)| {
            self.log_value(i, j).exp()
        })
    }

    pub fn series(&self) -> UniformSeries {
        UniformSeries::from_magnitudes("synthetic", F0, self.magnitudes(), 1e-9).unwrap()
    }

    /// Same instrument with `D * (1 + sigma * N(0, 1))` magnitudes.
    pub fn noisy_series(&self, rng: &mut ChaCha8Rng, sigma: f64) -> UniformSeries {
        let normal = Normal::new(0.0, sigma).unwrap();
        let mags = self
            .magnitudes()
            .mapv(|m| m * (1.0 + normal.sample(rng)).max(1e-3));
        UniformSeries::from_magnitudes("noisy", F0, mags, 1e-9).unwrap()
    }
}

pub const WEIGHTINGS: [Weighting; 3] = [Weighting::Uniform, Weighting::Magnitude, Weighting::Power];

/// Published analysis extents: lowest fundamental, `(S, K)` under the
/// (16,16) policy and under the (24,8) policy. Rows without a second pair
/// repeat the first.
pub const SHARC_TABLE: &[(&str, f64, (usize, usize), (usize, usize))] = &[
    ("Bach trumpet", 246.942, (17, 16), (29, 8)),
    ("Bb clarinet", 146.832, (27, 16), (38, 8)),
    ("Bass", 32.703, (39, 36), (39, 36)),
    ("Bass martele", 32.703, (38, 38), (38, 38)),
    ("Bass muted", 32.703, (40, 33), (40, 33)),
    ("Bass pizzicato", 32.703, (42, 27), (42, 27)),
    ("C trumpet", 184.997, (23, 16), (34, 8)),
    ("C trumpet muted", 184.997, (23, 16), (32, 9)),
    ("Eb clarinet", 195.998, (22, 16), (33, 8)),
    ("English horn", 164.814, (25, 16), (31, 11)),
    ("French horn", 73.416, (38, 16), (38, 16)),
    ("French horn muted", 73.416, (38, 17), (38, 17)),
    ("Bassoon", 58.270, (33, 28), (33, 28)),
    ("Alto trombone", 349.228, (14, 14), (14, 14)),
    ("Alto flute vibrato", 195.998, (22, 16), (31, 9)),
    ("Bass clarinet", 69.296, (26, 36), (26, 36)),
    ("Bass trombone", 43.654, (26, 57), (26, 57)),
    ("Bass flute vibrato", 130.813, (27, 18), (27, 18)),
    ("Cello martele", 65.406, (40, 17), (45, 12)),
    ("Cello muted vibrato", 65.406, (35, 22), (35, 22)),
    ("Cello pizzicato", 65.406, (40, 17), (40, 17)),
    ("Cello vibrato", 65.406, (41, 16), (45, 12)),
    ("Contrabass clarinet", 46.249, (24, 60), (24, 60)),
    ("Contrabassoon", 29.135, (33, 57), (33, 57)),
    ("Oboe", 233.082, (18, 16), (30, 8)),
    ("Flute vibrato", 261.626, (16, 16), (29, 8)),
    ("Piccolo", 587.330, (16, 7), (26, 4)),
    ("Trombone", 82.407, (37, 16), (37, 16)),
    ("Trombone muted", 82.407, (34, 19), (34, 19)),
    ("Tuba", 65.406, (32, 25), (32, 25)),
    ("Viola martele", 130.813, (28, 16), (37, 9)),
    ("Viola muted vibrato", 130.813, (28, 16), (40, 8)),
    ("Viola pizzicato", 130.813, (29, 16), (35, 11)),
    ("Viola vibrato", 130.813, (29, 16), (40, 8)),
    ("Violin martele", 195.998, (22, 16), (34, 8)),
    ("Violin muted vibrato", 195.998, (21, 17), (34, 8)),
    ("Violin pizzicato", 195.998, (22, 16), (34, 8)),
    ("Violin vibrato", 195.998, (21, 17), (33, 8)),
];

/// Per-note partial counts consistent with one table row: the first `S1`
/// notes bottom out at `K1`, note `S1 + 1` drops below 16, and the notes up
/// to `S2` bottom out at `K2` with every note past the 24th keeping at
/// least 8 partials.
pub fn partial_profile(first: (usize, usize), second: (usize, usize)) -> Vec<usize> {
    let ((s1, k1), (s2, k2)) = (first, second);
    let mut counts = vec![k1 + 3; s1];
    counts[s1 - 1] = k1;
    if s2 > s1 {
        let filler = k2.max(8).min(15);
        let mut tail = vec![filler; s2 - s1];
        if k2 >= 8 {
            *tail.last_mut().unwrap() = k2;
        } else {
            tail[0] = k2;
        }
        counts.extend(tail);
    }
    counts
}

pub fn series_with_counts(name: &str, f0: f64, counts: &[usize]) -> sfd_core::spectra::InstrumentSeries {
    use sfd_core::spectra::{InstrumentSeries, NoteSpectrum};
    let notes = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mags: Vec<f64> = (1..=c).map(|j| 1.0 / j as f64).collect();
            NoteSpectrum::from_magnitudes(format!("n{i}"), f0 * 2f64.powf(i as f64 / 12.0), &mags)
        })
        .collect();
    InstrumentSeries::new(name, notes).unwrap()
}
