//! Using fitted models: spectra at arbitrary fundamentals, per-note
//! deconvolution, hybrid timbres and additive resynthesis.
//!
//! A note at fundamental `f0` sits at fractional bin position
//! `12 log2(f0 / f0_lowest) + 1`; its partial `j` is read from the filter at
//! that position plus the same semitone offset `o_j` used during analysis, so
//! that notes on the analysis grid land exactly on filter knots.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::decompose::DecompositionModel;
use crate::error::{Error, Result};
use crate::grid::partial_offset;
use crate::spectra::NoteSpectrum;

/// Filter value at a fractional bin position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSample {
    pub value: f64,
    /// Position fell outside the occupied bins and was clamped.
    pub clamped: bool,
}

/// Piecewise-linear interpolation of the log filter over occupied bins,
/// clamped to the end values outside them.
pub fn filter_at(model: &DecompositionModel, x: f64) -> FilterSample {
    let knots = &model.r;
    let first = knots.first().expect("model has at least one filter bin");
    let last = knots.last().expect("model has at least one filter bin");
    if x <= f64::from(first.n) {
        return FilterSample {
            value: first.value,
            clamped: x < f64::from(first.n),
        };
    }
    if x >= f64::from(last.n) {
        return FilterSample {
            value: last.value,
            clamped: x > f64::from(last.n),
        };
    }
    let hi = knots.partition_point(|b| f64::from(b.n) <= x);
    let (lo, hi) = (&knots[hi - 1], &knots[hi]);
    let t = (x - f64::from(lo.n)) / f64::from(hi.n - lo.n);
    FilterSample {
        value: lo.value + t * (hi.value - lo.value),
        clamped: false,
    }
}

/// Fractional bin of the fundamental `f0_hz`; bin 1 is the model's lowest note.
pub fn note_position(model: &DecompositionModel, f0_hz: f64) -> f64 {
    let semis = 12.0 * (f0_hz / model.f0_lowest_hz).log2();
    // Snap float noise so on-grid notes hit the knots exactly.
    let snapped = if (semis - semis.round()).abs() < 1e-9 {
        semis.round()
    } else {
        semis
    };
    snapped + 1.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictedPartial {
    pub j: u32,
    pub log_magnitude: f64,
    pub linear_magnitude: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictedSpectrum {
    pub fundamental_hz: f64,
    pub partials: Vec<PredictedPartial>,
}

/// Shortest round-trip text for a CSV cell; exponent form outside
/// [1e-4, 1e15) so tiny magnitudes stay short.
pub fn csv_number(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

impl PredictedSpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,log_mag,linear_mag,clamped\n");
        for p in &self.partials {
            writeln!(
                out,
                "{},{},{},{}",
                p.j,
                csv_number(p.log_magnitude),
                csv_number(p.linear_magnitude),
                u8::from(p.clamped)
            )
            .unwrap();
        }
        out
    }

    /// Reads the CSV written by [`PredictedSpectrum::to_csv`]; the CSV does
    /// not carry the fundamental, so it is supplied here.
    pub fn from_csv(text: &str, fundamental_hz: f64) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != "j,log_mag,linear_mag,clamped" {
            return Err(Error::Parse {
                path: "<spectrum csv>".into(),
                line: 1,
                message: format!("unexpected header {header:?}"),
            });
        }
        let mut partials = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                path: "<spectrum csv>".into(),
                line: k + 2,
                message,
            };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", f.len())));
            }
            let j: u32 = f[0].parse().map_err(|_| bad(format!("bad j {:?}", f[0])))?;
            let log_magnitude: f64 = f[1].parse().map_err(|_| bad(format!("bad log_mag {:?}", f[1])))?;
            let linear_magnitude: f64 =
                f[2].parse().map_err(|_| bad(format!("bad linear_mag {:?}", f[2])))?;
            let clamped = match f[3] {
                "0" | "false" => false,
                "1" | "true" => true,
                other => return Err(bad(format!("bad clamped flag {other:?}"))),
            };
            partials.push(PredictedPartial {
                j,
                log_magnitude,
                linear_magnitude,
                clamped,
            });
        }
        Ok(PredictedSpectrum {
            fundamental_hz,
            partials,
        })
    }
}

/// Model spectrum of the first `partials` harmonics at `f0_hz`, with overall
/// log level `amplitude_log` standing in for the per-note scaling.
pub fn predict_spectrum(
    model: &DecompositionModel,
    f0_hz: f64,
    partials: usize,
    amplitude_log: f64,
) -> Result<PredictedSpectrum> {
    if !(f0_hz.is_finite() && f0_hz > 0.0) {
        return Err(Error::Apply(format!("target fundamental {f0_hz} Hz is not positive")));
    }
    if partials == 0 || partials > model.partials {
        return Err(Error::Apply(format!(
            "requested {partials} partials; the excitation is known for 1..={}",
            model.partials
        )));
    }
    let base = note_position(model, f0_hz);
    let partials = model.p[..partials]
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let j = k as u32 + 1;
            let f = filter_at(model, base + f64::from(partial_offset(j)));
            let log_magnitude = amplitude_log + p + f.value;
            PredictedPartial {
                j,
                log_magnitude,
                linear_magnitude: log_magnitude.exp(),
                clamped: f.clamped,
            }
        })
        .collect();
    Ok(PredictedSpectrum {
        fundamental_hz: f0_hz,
        partials,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitationEstimate {
    pub j: u32,
    pub log_excitation: f64,
    pub clamped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Deconvolution {
    pub fundamental_hz: f64,
    pub estimates: Vec<ExcitationEstimate>,
    /// Log level removed from the estimates (0 unless fitted).
    pub offset: f64,
}

/// Divides the model filter out of a measured note. Partials at or below
/// `floor_rel` times the note's loudest partial are skipped. With
/// `fit_offset`, the constant log level that best aligns the estimates with
/// the model excitation (weighted as the model was fitted) is removed.
pub fn deconvolve_note(
    model: &DecompositionModel,
    note: &NoteSpectrum,
    fit_offset: bool,
    floor_rel: f64,
) -> Result<Deconvolution> {
    let max = note.partials.iter().map(|p| p.magnitude).fold(0.0, f64::max);
    let floor = floor_rel * max;
    let base = note_position(model, note.fundamental_hz);
    let mut estimates: Vec<ExcitationEstimate> = note
        .partials
        .iter()
        .filter(|p| p.magnitude > floor && p.magnitude > 0.0)
        .map(|p| {
            let f = filter_at(model, base + f64::from(partial_offset(p.harmonic_index)));
            ExcitationEstimate {
                j: p.harmonic_index,
                log_excitation: p.magnitude.ln() - f.value,
                clamped: f.clamped,
            }
        })
        .collect();
    if estimates.is_empty() {
        return Err(Error::Apply(format!(
            "note {} has no usable partials",
            note.note_label
        )));
    }
    let mut offset = 0.0;
    if fit_offset {
        let (mut num, mut den) = (0.0, 0.0);
        for (e, partial) in estimates.iter().zip(
            note.partials
                .iter()
                .filter(|p| p.magnitude > floor && p.magnitude > 0.0),
        ) {
            let Some(&p) = model.p.get(e.j as usize - 1) else {
                continue;
            };
            let w = model.weighting.raw_weight(partial.magnitude);
            num += w * (e.log_excitation - p);
            den += w;
        }
        if den > 0.0 {
            offset = num / den;
        }
        for e in &mut estimates {
            e.log_excitation -= offset;
        }
    }
    Ok(Deconvolution {
        fundamental_hz: note.fundamental_hz,
        estimates,
        offset,
    })
}

/// Composite of `excitation`'s source and `filter`'s formant curve, on the
/// filter donor's frequency axis. The composite has zero scaling and no fit
/// statistics.
pub fn hybridize(excitation: &DecompositionModel, filter: &DecompositionModel) -> DecompositionModel {
    DecompositionModel {
        name: format!("{}×{}", excitation.name, filter.name),
        f0_lowest_hz: filter.f0_lowest_hz,
        notes: filter.notes,
        partials: excitation.partials,
        weighting: excitation.weighting,
        p: excitation.p.clone(),
        a: vec![0.0; filter.notes],
        r: filter.r.clone(),
        iterations_used: 0,
        final_metric: 0.0,
        converged: true,
        detrend_skipped: filter.detrend_skipped,
        residuals: Vec::new(),
        metric_history: Vec::new(),
    }
}

/// Full-scale peak of rendered audio.
pub const RENDER_PEAK: f64 = 0.9;

/// Additive resynthesis, peak-normalized to [`RENDER_PEAK`]. Partials at or
/// above Nyquist are dropped; returns the samples and the dropped harmonic
/// indices.
pub fn synthesize(
    spectrum: &PredictedSpectrum,
    duration_s: f64,
    sample_rate_hz: u32,
) -> Result<(Vec<f64>, Vec<u32>)> {
    if spectrum.partials.is_empty() {
        return Err(Error::Apply("empty spectrum".into()));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Apply(format!("duration {duration_s} s is not positive")));
    }
    let nyquist = f64::from(sample_rate_hz) / 2.0;
    let f0 = spectrum.fundamental_hz;
    let (kept, dropped): (Vec<&PredictedPartial>, Vec<&PredictedPartial>) = spectrum
        .partials
        .iter()
        .partition(|p| f0 * f64::from(p.j) < nyquist);
    let dropped: Vec<u32> = dropped.iter().map(|p| p.j).collect();
    if !dropped.is_empty() {
        log::warn!("dropping {} partial(s) above Nyquist", dropped.len());
    }
    if kept.is_empty() {
        return Err(Error::Apply("empty spectrum after Nyquist pruning".into()));
    }
    let len = (duration_s * f64::from(sample_rate_hz)).round() as usize;
    let rate = f64::from(sample_rate_hz);
    let mut samples: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / rate;
            kept.iter()
                .map(|p| p.linear_magnitude * (2.0 * PI * f0 * f64::from(p.j) * t).sin())
                .sum()
        })
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let gain = RENDER_PEAK / peak;
        samples.iter_mut().for_each(|x| *x *= gain);
    }
    Ok((samples, dropped))
}

/// Renders `spectrum` to a 16-bit PCM mono WAV file.
pub fn render_wav(
    spectrum: &PredictedSpectrum,
    duration_s: f64,
    sample_rate_hz: u32,
    path: &Path,
) -> Result<Vec<u32>> {
    let (samples, dropped) = synthesize(spectrum, duration_s, sample_rate_hz)?;
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Apply(format!("{}: {other}", path.display())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for x in samples {
        writer
            .write_sample((x * f64::from(i16::MAX)).round() as i16)
            .map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)?;
    Ok(dropped)
}
