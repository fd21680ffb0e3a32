//! Ingestion of chromatic steady-state spectra.
//!
//! An [`InstrumentSeries`] is a chromatic run of notes, each holding the
//! linear magnitudes (and optionally phases) of its harmonic partials. Series
//! come either from a directory of SHARC-style per-note text files or from the
//! canonical JSON format written by [`write_canonical`]. Before analysis a
//! series is cut down to a rectangular [`UniformSeries`] of `S` notes by `K`
//! partials with [`apply_truncation`].

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation, in semitones, of each step of a chromatic series.
pub const CHROMATIC_TOLERANCE: f64 = 0.01;

/// Default magnitude floor relative to the grid maximum (-100 dB).
pub const DEFAULT_FLOOR_REL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialEntry {
    #[serde(rename = "j")]
    pub harmonic_index: u32,
    #[serde(rename = "mag")]
    pub magnitude: f64,
    /// Radians. Carried through the canonical format but never analyzed.
    #[serde(default)]
    pub phase: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteSpectrum {
    #[serde(rename = "note")]
    pub note_label: String,
    #[serde(rename = "f0_hz")]
    pub fundamental_hz: f64,
    pub partials: Vec<PartialEntry>,
}

impl NoteSpectrum {
    /// Builds a note from linear magnitudes of harmonics `1..=mags.len()`.
    pub fn from_magnitudes(label: impl Into<String>, fundamental_hz: f64, mags: &[f64]) -> Self {
        NoteSpectrum {
            note_label: label.into(),
            fundamental_hz,
            partials: mags
                .iter()
                .enumerate()
                .map(|(k, &m)| PartialEntry {
                    harmonic_index: k as u32 + 1,
                    magnitude: m,
                    phase: None,
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.fundamental_hz.is_finite() && self.fundamental_hz > 0.0) {
            return Err(Error::Validation(format!(
                "note {}: fundamental {} Hz is not positive",
                self.note_label, self.fundamental_hz
            )));
        }
        for (k, p) in self.partials.iter().enumerate() {
            let expected = k as u32 + 1;
            if p.harmonic_index != expected {
                return Err(Error::Validation(format!(
                    "note {}: partial {} has harmonic index {}, expected contiguous indices from 1",
                    self.note_label, k, p.harmonic_index
                )));
            }
            if !(p.magnitude.is_finite() && p.magnitude >= 0.0) {
                return Err(Error::Validation(format!(
                    "note {}: harmonic {} has invalid magnitude {}",
                    self.note_label, p.harmonic_index, p.magnitude
                )));
            }
            if let Some(ph) = p.phase {
                if !ph.is_finite() {
                    return Err(Error::Validation(format!(
                        "note {}: harmonic {} has non-finite phase",
                        self.note_label, p.harmonic_index
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstrumentSeries {
    pub name: String,
    pub f0_lowest_hz: f64,
    pub notes: Vec<NoteSpectrum>,
}

impl InstrumentSeries {
    /// Builds a series from notes sorted by pitch and validates it.
    pub fn new(name: impl Into<String>, notes: Vec<NoteSpectrum>) -> Result<Self> {
        let f0_lowest_hz = notes.first().map(|n| n.fundamental_hz).unwrap_or(0.0);
        let series = InstrumentSeries {
            name: name.into(),
            f0_lowest_hz,
            notes,
        };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .notes
            .first()
            .ok_or_else(|| Error::Validation("series has no notes".into()))?;
        for note in &self.notes {
            note.validate()?;
        }
        let f0 = first.fundamental_hz;
        if (self.f0_lowest_hz - f0).abs() > 1e-12 * f0 {
            return Err(Error::Validation(format!(
                "f0_lowest_hz {} does not match the first note's fundamental {}",
                self.f0_lowest_hz, f0
            )));
        }
        for pair in self.notes.windows(2) {
            let step = semitone_step(pair[0].fundamental_hz, pair[1].fundamental_hz);
            if (step - 1.0).abs() > CHROMATIC_TOLERANCE {
                return Err(Error::Validation(format!(
                    "non-chromatic series: {} -> {} is {:.4} semitones",
                    pair[0].note_label, pair[1].note_label, step
                )));
            }
        }
        Ok(())
    }

    pub fn partial_counts(&self) -> Vec<usize> {
        self.notes.iter().map(|n| n.partials.len()).collect()
    }
}

/// Interval from `f_lo` to `f_hi` in equal-tempered semitones.
pub fn semitone_step(f_lo: f64, f_hi: f64) -> f64 {
    12.0 * (f_hi / f_lo).log2()
}

/// A parsed scientific pitch name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pitch {
    /// MIDI note number (A4 = 69).
    pub midi: i32,
}

impl Pitch {
    pub fn frequency_hz(self) -> f64 {
        440.0 * 2f64.powf(f64::from(self.midi - 69) / 12.0)
    }
}

impl FromStr for Pitch {
    type Err = Error;

    /// Accepts a letter, an optional accidental (`#`/`s` sharp, `b`/`f` flat)
    /// and an octave number, case-insensitively: `c4`, `C#3`, `bb2`, `fs5`.
    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownNote(s.to_string());
        let lower = s.trim().to_ascii_lowercase();
        let mut chars = lower.chars();
        let pitch_class = match chars.next().ok_or_else(unknown)? {
            'c' => 0,
            'd' => 2,
            'e' => 4,
            'f' => 5,
            'g' => 7,
            'a' => 9,
            'b' => 11,
            _ => return Err(unknown()),
        };
        let rest = chars.as_str();
        let (accidental, octave) = match rest.chars().next() {
            Some('#') | Some('s') => (1, &rest[1..]),
            Some('b') | Some('f') => (-1, &rest[1..]),
            _ => (0, rest),
        };
        if octave.is_empty() || !octave.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let octave: i32 = octave.parse().map_err(|_| unknown())?;
        Ok(Pitch {
            midi: 12 * (octave + 1) + pitch_class + accidental,
        })
    }
}

/// How amplitude columns of SHARC files are encoded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmpUnit {
    Db,
    Linear,
}

impl FromStr for AmpUnit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "db" => Ok(AmpUnit::Db),
            "linear" | "lin" => Ok(AmpUnit::Linear),
            other => Err(format!("unknown amplitude unit {other:?} (expected db|linear)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseUnit {
    #[default]
    Radians,
    Degrees,
}

impl FromStr for PhaseUnit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rad" | "radians" => Ok(PhaseUnit::Radians),
            "deg" | "degrees" => Ok(PhaseUnit::Degrees),
            other => Err(format!("unknown phase unit {other:?} (expected rad|deg)")),
        }
    }
}

fn is_metadata_file(path: &Path) -> bool {
    let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
        return true;
    };
    if name.starts_with('.') {
        return true;
    }
    let stem = name.split('.').next().unwrap_or("").to_ascii_uppercase();
    matches!(stem.as_str(), "CONTENTS" | "README")
}

/// Reads one SHARC-style note file: two numeric columns per line,
/// line 1 holding harmonic 1. Blank lines and `#` comments are skipped.
pub fn parse_sharc_note(
    path: &Path,
    amp_unit: AmpUnit,
    phase_unit: PhaseUnit,
) -> Result<NoteSpectrum> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::UnknownNote(path.display().to_string()))?;
    let pitch: Pitch = stem.parse()?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;

    let mut partials = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(bad(format!("expected 2 columns, found {}", fields.len())));
        }
        let amp: f64 = fields[0]
            .parse()
            .map_err(|_| bad(format!("invalid amplitude {:?}", fields[0])))?;
        let phase: f64 = fields[1]
            .parse()
            .map_err(|_| bad(format!("invalid phase {:?}", fields[1])))?;
        if !amp.is_finite() || !phase.is_finite() {
            return Err(bad("non-finite value".into()));
        }
        let magnitude = match amp_unit {
            AmpUnit::Db => 10f64.powf(amp / 20.0),
            AmpUnit::Linear => amp,
        };
        let phase = match phase_unit {
            PhaseUnit::Radians => phase,
            PhaseUnit::Degrees => phase.to_radians(),
        };
        partials.push(PartialEntry {
            harmonic_index: partials.len() as u32 + 1,
            magnitude,
            phase: Some(phase),
        });
    }
    Ok(NoteSpectrum {
        note_label: stem.to_string(),
        fundamental_hz: pitch.frequency_hz(),
        partials,
    })
}

/// Reads a directory of per-note SHARC files into a validated series, sorted
/// ascending by pitch. The series is named after the directory.
pub fn parse_sharc_instrument(
    dir: &Path,
    amp_unit: AmpUnit,
    phase_unit: PhaseUnit,
) -> Result<InstrumentSeries> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut notes = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() || is_metadata_file(&path) {
            continue;
        }
        let note = parse_sharc_note(&path, amp_unit, phase_unit)?;
        let pitch: Pitch = note.note_label.parse()?;
        notes.push((pitch.midi, note));
    }
    if notes.is_empty() {
        return Err(Error::EmptyDirectory {
            path: dir.to_path_buf(),
        });
    }
    notes.sort_by_key(|(midi, _)| *midi);
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("instrument")
        .to_string();
    InstrumentSeries::new(name, notes.into_iter().map(|(_, n)| n).collect())
}

/// Reads and validates a canonical JSON series file.
pub fn parse_canonical(path: &Path) -> Result<InstrumentSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let series = parse_canonical_str(&text).map_err(|e| match e {
        Error::Schema {
            pointer, message, ..
        } => Error::Schema {
            path: path.to_path_buf(),
            pointer,
            message,
        },
        other => other,
    })?;
    Ok(series)
}

pub fn parse_canonical_str(text: &str) -> Result<InstrumentSeries> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let series: InstrumentSeries =
        serde_path_to_error::deserialize(de).map_err(|e| schema_error(&e))?;
    series.validate()?;
    Ok(series)
}

/// Converts a serde path (`notes[0].f0_hz`) into a JSON pointer (`/notes/0/f0_hz`).
pub(crate) fn schema_error(e: &serde_path_to_error::Error<serde_json::Error>) -> Error {
    let mut pointer = String::new();
    for seg in e.path().iter() {
        use serde_path_to_error::Segment;
        match seg {
            Segment::Seq { index } => pointer.push_str(&format!("/{index}")),
            Segment::Map { key } => pointer.push_str(&format!("/{key}")),
            Segment::Enum { variant } => pointer.push_str(&format!("/{variant}")),
            Segment::Unknown => pointer.push_str("/?"),
        }
    }
    if pointer.is_empty() {
        pointer.push('/');
    }
    let inner = e.inner();
    Error::Schema {
        path: Default::default(),
        pointer,
        message: format!("{inner}"),
    }
}

pub fn write_canonical(series: &InstrumentSeries, path: &Path) -> Result<()> {
    let text = to_canonical_string(series);
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_canonical_string(series: &InstrumentSeries) -> String {
    let mut text = serde_json::to_string_pretty(series).expect("series serializes");
    text.push('\n');
    text
}

/// Rule for trading series length against a uniform partial count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationPolicy {
    /// Notes that are always kept, whatever their partial counts.
    pub min_samples: usize,
    /// Beyond `min_samples`, the series stops before the first note with
    /// fewer partials than this.
    pub min_partials: usize,
}

impl TruncationPolicy {
    pub const STANDARD: TruncationPolicy = TruncationPolicy {
        min_samples: 16,
        min_partials: 16,
    };
    pub const EXTENDED: TruncationPolicy = TruncationPolicy {
        min_samples: 24,
        min_partials: 8,
    };

    pub fn new(min_samples: usize, min_partials: usize) -> Result<Self> {
        if min_samples == 0 || min_partials == 0 {
            return Err(Error::Validation(
                "truncation policy values must be at least 1".into(),
            ));
        }
        Ok(TruncationPolicy {
            min_samples,
            min_partials,
        })
    }

    /// `(S, K)` for a series with the given per-note partial counts.
    pub fn extent(&self, counts: &[usize]) -> (usize, usize) {
        let mut s = counts.len().min(self.min_samples);
        while s < counts.len() && counts[s] >= self.min_partials {
            s += 1;
        }
        let k = counts[..s].iter().copied().min().unwrap_or(0);
        (s, k)
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::STANDARD
    }
}

impl FromStr for TruncationPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| format!("policy {s:?} must be SAMPLES,PARTIALS"))?;
        let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
        TruncationPolicy::new(a, b).map_err(|e| e.to_string())
    }
}

impl fmt::Display for TruncationPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.min_samples, self.min_partials)
    }
}

/// Rectangular `S x K` magnitude grid with a usability mask.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformSeries {
    pub name: String,
    pub f0_lowest_hz: f64,
    pub magnitudes: Array2<f64>,
    /// `true` where the entry is above the floor and takes part in the fit.
    pub mask: Array2<bool>,
    /// Absolute magnitude floor used to build `mask`.
    pub floor: f64,
}

impl UniformSeries {
    /// Builds the grid and masks entries at or below `floor_rel` times the
    /// grid maximum.
    pub fn from_magnitudes(
        name: impl Into<String>,
        f0_lowest_hz: f64,
        magnitudes: Array2<f64>,
        floor_rel: f64,
    ) -> Result<Self> {
        if !(floor_rel > 0.0 && floor_rel < 1.0) {
            return Err(Error::Validation(format!(
                "magnitude floor {floor_rel} must lie in (0, 1)"
            )));
        }
        let (s, k) = magnitudes.dim();
        if s == 0 {
            return Err(Error::Truncation("series would have no notes".into()));
        }
        if k == 0 {
            return Err(Error::Truncation("a retained note has no partials".into()));
        }
        if magnitudes.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::Validation("magnitudes must be finite and >= 0".into()));
        }
        let max = magnitudes.iter().copied().fold(0.0, f64::max);
        let floor = floor_rel * max;
        let mask = magnitudes.mapv(|m| m > floor);
        for (i, row) in mask.rows().into_iter().enumerate() {
            if !row.iter().any(|&b| b) {
                return Err(Error::Truncation(format!(
                    "note {} has no partial above the magnitude floor",
                    i + 1
                )));
            }
        }
        for (j, col) in mask.columns().into_iter().enumerate() {
            if !col.iter().any(|&b| b) {
                return Err(Error::Truncation(format!(
                    "harmonic {} is below the magnitude floor on every note",
                    j + 1
                )));
            }
        }
        Ok(UniformSeries {
            name: name.into(),
            f0_lowest_hz,
            magnitudes,
            mask,
            floor,
        })
    }

    /// Number of notes `S`.
    pub fn notes(&self) -> usize {
        self.magnitudes.nrows()
    }

    /// Number of partials `K`.
    pub fn partials(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn usable_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }
}

/// Cuts a series down to the uniform grid selected by `policy`.
pub fn apply_truncation(
    series: &InstrumentSeries,
    policy: TruncationPolicy,
    magnitude_floor_rel: f64,
) -> Result<UniformSeries> {
    let counts = series.partial_counts();
    if counts.is_empty() {
        return Err(Error::Truncation("series would have no notes".into()));
    }
    let (s, k) = policy.extent(&counts);
    if k == 0 {
        return Err(Error::Truncation("a retained note has no partials".into()));
    }
    let magnitudes = Array2::from_shape_fn((s, k), |(i, j)| series.notes[i].partials[j].magnitude);
    UniformSeries::from_magnitudes(
        series.name.clone(),
        series.f0_lowest_hz,
        magnitudes,
        magnitude_floor_rel,
    )
}

/// Natural-log magnitudes of the usable entries of a [`UniformSeries`].
#[derive(Clone, Debug, PartialEq)]
pub struct LogMagnitudes {
    values: Array2<f64>,
    mask: Array2<bool>,
}

impl LogMagnitudes {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.mask[(i, j)].then(|| self.values[(i, j)])
    }

    /// `(note, partial, log value)` for usable entries, note-major, 0-based.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .indexed_iter()
            .filter(|(ij, _)| self.mask[*ij])
            .map(|((i, j), &v)| (i, j, v))
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn log_magnitudes(u: &UniformSeries) -> LogMagnitudes {
    let values = ndarray::Zip::from(&u.magnitudes)
        .and(&u.mask)
        .map_collect(|&m, &usable| if usable { m.ln() } else { 0.0 });
    LogMagnitudes {
        values,
        mask: u.mask.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn series_with_counts(counts: &[usize]) -> InstrumentSeries {
        let f0 = 65.406;
        let notes = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mags: Vec<f64> = (1..=c).map(|j| 1.0 / j as f64).collect();
                NoteSpectrum::from_magnitudes(
                    format!("n{i}"),
                    f0 * 2f64.powf(i as f64 / 12.0),
                    &mags,
                )
            })
            .collect();
        InstrumentSeries::new("t", notes).unwrap()
    }

    #[test]
    fn note_names() {
        let c4: Pitch = "c4".parse().unwrap();
        assert!((c4.frequency_hz() - 261.625_565_300_598_6).abs() < 1e-9);
        let c2: Pitch = "C2".parse().unwrap();
        assert!((c2.frequency_hz() - 65.406_391_325_149_66).abs() < 1e-9);
        let a4: Pitch = "a4".parse().unwrap();
        assert_eq!(a4.frequency_hz(), 440.0);
        assert_eq!("c#3".parse::<Pitch>().unwrap(), "cs3".parse().unwrap());
        assert_eq!("db3".parse::<Pitch>().unwrap(), "c#3".parse().unwrap());
        assert_eq!("bf2".parse::<Pitch>().unwrap(), "a#2".parse().unwrap());
        assert_eq!("b2".parse::<Pitch>().unwrap().midi, 47);
        assert_eq!("bb2".parse::<Pitch>().unwrap().midi, 46);
        for bad in ["h4", "c", "c#", "cx4", "", "4c"] {
            assert!(matches!(bad.parse::<Pitch>(), Err(Error::UnknownNote(_))), "{bad}");
        }
    }

    #[test]
    fn chromatic_check_on_real_fundamentals() {
        // C2 -> C#2 as tabulated: 0.00019 semitone off, well inside tolerance.
        let step = semitone_step(65.406, 69.296);
        assert!((step - 1.0).abs() < 2e-4);
        let notes = vec![
            NoteSpectrum::from_magnitudes("c2", 65.406, &[1.0]),
            NoteSpectrum::from_magnitudes("c#2", 69.296, &[1.0]),
        ];
        assert!(InstrumentSeries::new("ok", notes).is_ok());

        let notes = vec![
            NoteSpectrum::from_magnitudes("c2", 65.406, &[1.0]),
            NoteSpectrum::from_magnitudes("d2", 73.416, &[1.0]),
        ];
        let err = InstrumentSeries::new("gap", notes).unwrap_err();
        assert!(err.to_string().contains("non-chromatic series"));
    }

    #[test]
    fn validation_rejects_gapped_partials() {
        let mut note = NoteSpectrum::from_magnitudes("c2", 65.406, &[1.0, 0.5, 0.2]);
        note.partials.remove(1);
        assert!(InstrumentSeries::new("x", vec![note]).is_err());
    }

    #[test]
    fn truncation_degenerate_policy() {
        let series = series_with_counts(&[7, 20, 20, 3]);
        let u = apply_truncation(&series, TruncationPolicy::new(1, 1_000_000_000).unwrap(), 1e-5)
            .unwrap();
        assert_eq!((u.notes(), u.partials()), (1, 7));
    }

    #[test]
    fn truncation_prefix_rule() {
        let series = series_with_counts(&[20, 18, 17, 9, 12]);
        let p = TruncationPolicy::new(2, 10).unwrap();
        assert_eq!(p.extent(&series.partial_counts()), (3, 17));
        let u = apply_truncation(&series, p, 1e-5).unwrap();
        assert_eq!(u.magnitudes.dim(), (3, 17));
    }

    #[test]
    fn truncation_rejects_empty_note() {
        let series = series_with_counts(&[0, 4]);
        let err = apply_truncation(&series, TruncationPolicy::STANDARD, 1e-5).unwrap_err();
        assert!(matches!(err, Error::Truncation(_)));
    }

    #[test]
    fn floor_masks_tiny_entries() {
        let mags = array![[1.0, 1e-7], [0.5, 0.25]];
        let u = UniformSeries::from_magnitudes("m", 100.0, mags, 1e-5).unwrap();
        assert_eq!(u.mask, array![[true, false], [true, true]]);
        let d = log_magnitudes(&u);
        assert_eq!(d.len(), 3);
        assert_eq!(d.get(0, 1), None);
        assert_eq!(d.get(0, 0), Some(0.0));
    }

    #[test]
    fn log_of_e_is_one() {
        let u = UniformSeries::from_magnitudes("e", 100.0, array![[std::f64::consts::E]], 1e-5)
            .unwrap();
        assert_eq!(log_magnitudes(&u).get(0, 0), Some(1.0));
    }

    #[test]
    fn floor_rejects_dead_column() {
        let mags = array![[1.0, 0.0], [0.5, 0.0]];
        assert!(UniformSeries::from_magnitudes("m", 100.0, mags, 1e-5).is_err());
    }

    #[test]
    fn db_conversion() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c4.txt"), "-38.2 171.0\n0 0\n").unwrap();
        let note = parse_sharc_note(&dir.path().join("c4.txt"), AmpUnit::Db, PhaseUnit::Degrees)
            .unwrap();
        assert!((note.partials[0].magnitude - 1.230_268_770_812_381_5e-2).abs() < 1e-15);
        assert!((note.partials[0].phase.unwrap() - 171f64.to_radians()).abs() < 1e-15);
        assert_eq!(note.partials[1].magnitude, 1.0);
    }

    #[test]
    fn sharc_reports_bad_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c4.spect"), "1 0\n\n0.5 zz\n").unwrap();
        let err = parse_sharc_instrument(dir.path(), AmpUnit::Linear, PhaseUnit::Radians)
            .unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 3);
                assert!(path.ends_with("c4.spect"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_error_names_field() {
        let text = r#"{"name": "x", "notes": []}"#;
        match parse_canonical_str(text).unwrap_err() {
            Error::Schema { message, .. } => assert!(message.contains("f0_lowest_hz")),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"name": "x", "f0_lowest_hz": 1.0, "notes": [{"note": "c2", "f0_hz": "a", "partials": []}]}"#;
        match parse_canonical_str(text).unwrap_err() {
            Error::Schema { pointer, .. } => assert_eq!(pointer, "/notes/0/f0_hz"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn canonical_invariant_violation_is_validation_error() {
        let text = r#"{"name": "x", "f0_lowest_hz": 65.406, "notes": [
            {"note": "c2", "f0_hz": 65.406, "partials": [{"j": 1, "mag": 1.0, "phase": null}]},
            {"note": "d2", "f0_hz": 73.416, "partials": [{"j": 1, "mag": 1.0, "phase": null}]}]}"#;
        assert!(matches!(parse_canonical_str(text), Err(Error::Validation(_))));
    }
}
