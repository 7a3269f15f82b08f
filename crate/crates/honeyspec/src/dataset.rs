//! Spectral data model: typed records, delimited-text I/O, validation,
//! synthetic generation and per-band standardization.
//!
//! The on-disk format is UTF-8 comma-delimited text with one header row:
//!
//! ```text
//! record_id,group_id,acquisition_id,origin,level,b000,b001,...,b127
//! ```
//!
//! `acquisition_id` may be empty, `level` is a non-negative integer percent
//! and identifiers are restricted to `[A-Za-z0-9_-]+` so no quoting is ever
//! needed. Lines end with LF.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::Mat;

/// Wavelength metadata for the band axis. No algorithm depends on the
/// wavelength values; they are carried through for plot emission.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid {
    pub start_nm: f64,
    pub step_nm: f64,
    pub band_count: usize,
}

impl Default for WavelengthGrid {
    fn default() -> Self {
        WavelengthGrid {
            start_nm: 400.0,
            step_nm: 5.0,
            band_count: 128,
        }
    }
}

impl WavelengthGrid {
    pub fn new(start_nm: f64, step_nm: f64, band_count: usize) -> Result<Self, DatasetError> {
        if band_count < 1 {
            return Err(DatasetError::InvalidGrid {
                detail: "band_count must be at least 1".into(),
            });
        }
        if !(step_nm > 0.0) || !step_nm.is_finite() || !start_nm.is_finite() {
            return Err(DatasetError::InvalidGrid {
                detail: format!("bad start/step: {start_nm}/{step_nm}"),
            });
        }
        Ok(WavelengthGrid {
            start_nm,
            step_nm,
            band_count,
        })
    }

    pub fn wavelength_nm(&self, band: usize) -> f64 {
        self.start_nm + self.step_nm * band as f64
    }
}

/// One spectral instance (a segmented region of one hyperspectral image).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRecord {
    pub record_id: String,
    /// Identifies the source image; the unit of fold assignment.
    pub group_id: String,
    /// Optional capture-session number.
    pub acquisition_id: Option<u32>,
    pub origin: String,
    /// Adulteration percent; 0 means pure.
    pub level: u32,
    pub bands: Vec<f64>,
}

/// An ordered collection of records plus the label vocabularies present.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDataset {
    pub grid: WavelengthGrid,
    pub records: Vec<SpectrumRecord>,
    /// Unique origin tokens in order of first appearance.
    pub origin_vocabulary: Vec<String>,
    /// Unique adulteration levels, ascending.
    pub level_set: Vec<u32>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("dataset contains no data rows")]
    EmptyDataset,
    #[error("line {line}: expected {expected} band values, found {found}")]
    BandCountMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: non-numeric band value `{value}` in column {column}")]
    NonNumericBand {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}: level `{level}` is not in the declared level set")]
    UnknownLevel { line: usize, level: String },
    #[error("group `{group_id}`: {detail}")]
    GroupLabelConflict { group_id: String, detail: String },
    #[error("malformed header: {detail}")]
    MalformedHeader { detail: String },
    #[error("line {line}: {detail}")]
    MalformedRow { line: usize, detail: String },
    #[error("invalid generator spec: {detail}")]
    InvalidSpec { detail: String },
    #[error("invalid wavelength grid: {detail}")]
    InvalidGrid { detail: String },
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// A single invariant violation found by [`SpectralDataset::validate`].
/// Violations are data, not failures: an invalid dataset still reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    BandCountMismatch {
        record_id: String,
        expected: usize,
        found: usize,
    },
    NonFiniteBand {
        record_id: String,
        band: usize,
    },
    GroupLabelConflict {
        group_id: String,
        detail: String,
    },
    OriginVocabularyMismatch {
        detail: String,
    },
    LevelSetMismatch {
        detail: String,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Empty => write!(f, "dataset has no records"),
            Violation::BandCountMismatch {
                record_id,
                expected,
                found,
            } => write!(
                f,
                "record {record_id}: {found} bands, grid declares {expected}"
            ),
            Violation::NonFiniteBand { record_id, band } => {
                write!(f, "record {record_id}: band {band} is not finite")
            }
            Violation::GroupLabelConflict { group_id, detail } => {
                write!(f, "group {group_id}: {detail}")
            }
            Violation::OriginVocabularyMismatch { detail } => {
                write!(f, "origin vocabulary mismatch: {detail}")
            }
            Violation::LevelSetMismatch { detail } => {
                write!(f, "level set mismatch: {detail}")
            }
        }
    }
}

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

impl SpectralDataset {
    /// Builds a dataset from records, deriving the vocabularies. The group
    /// consistency invariant is enforced; use struct literals to construct
    /// deliberately broken datasets for [`Self::validate`].
    pub fn from_records(
        grid: WavelengthGrid,
        records: Vec<SpectrumRecord>,
    ) -> Result<Self, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::EmptyDataset);
        }
        let mut group_labels: BTreeMap<&str, (&str, u32)> = BTreeMap::new();
        for rec in &records {
            if rec.bands.len() != grid.band_count {
                return Err(DatasetError::BandCountMismatch {
                    line: 0,
                    expected: grid.band_count,
                    found: rec.bands.len(),
                });
            }
            match group_labels.get(rec.group_id.as_str()) {
                None => {
                    group_labels.insert(&rec.group_id, (&rec.origin, rec.level));
                }
                Some(&(origin, level)) => {
                    if origin != rec.origin || level != rec.level {
                        return Err(DatasetError::GroupLabelConflict {
                            group_id: rec.group_id.clone(),
                            detail: format!(
                                "records carry ({origin}, {level}) and ({}, {})",
                                rec.origin, rec.level
                            ),
                        });
                    }
                }
            }
        }
        let origin_vocabulary = first_appearance_origins(&records);
        let mut level_set: Vec<u32> = records.iter().map(|r| r.level).collect();
        level_set.sort_unstable();
        level_set.dedup();
        Ok(SpectralDataset {
            grid,
            records,
            origin_vocabulary,
            level_set,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Copies all band vectors into an `n x band_count` matrix.
    pub fn band_matrix(&self) -> Mat {
        let p = self.grid.band_count;
        let mut m = Mat::zeros(self.records.len(), p);
        for (i, rec) in self.records.iter().enumerate() {
            m.row_mut(i).copy_from_slice(&rec.bands);
        }
        m
    }

    pub fn origin_labels(&self) -> Vec<String> {
        self.records.iter().map(|r| r.origin.clone()).collect()
    }

    pub fn level_labels(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.level).collect()
    }

    /// New dataset holding the records at `indices`, in that order, with
    /// vocabularies recomputed.
    pub fn subset(&self, indices: &[usize]) -> Result<SpectralDataset, DatasetError> {
        let records: Vec<SpectrumRecord> =
            indices.iter().map(|&i| self.records[i].clone()).collect();
        SpectralDataset::from_records(self.grid.clone(), records)
    }

    /// Enumerates every invariant violation. An empty report means the
    /// dataset is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.records.is_empty() {
            out.push(Violation::Empty);
        }
        for rec in &self.records {
            if rec.bands.len() != self.grid.band_count {
                out.push(Violation::BandCountMismatch {
                    record_id: rec.record_id.clone(),
                    expected: self.grid.band_count,
                    found: rec.bands.len(),
                });
            }
            for (b, v) in rec.bands.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation::NonFiniteBand {
                        record_id: rec.record_id.clone(),
                        band: b,
                    });
                }
            }
        }
        let mut group_labels: BTreeMap<&str, (&str, u32)> = BTreeMap::new();
        for rec in &self.records {
            match group_labels.get(rec.group_id.as_str()) {
                None => {
                    group_labels.insert(&rec.group_id, (&rec.origin, rec.level));
                }
                Some(&(origin, level)) => {
                    if origin != rec.origin {
                        out.push(Violation::GroupLabelConflict {
                            group_id: rec.group_id.clone(),
                            detail: format!("mixed origins {origin} and {}", rec.origin),
                        });
                        group_labels.insert(&rec.group_id, (&rec.origin, rec.level));
                    } else if level != rec.level {
                        out.push(Violation::GroupLabelConflict {
                            group_id: rec.group_id.clone(),
                            detail: format!("mixed levels {level} and {}", rec.level),
                        });
                        group_labels.insert(&rec.group_id, (&rec.origin, rec.level));
                    }
                }
            }
        }
        let expected_origins = first_appearance_origins(&self.records);
        if self.origin_vocabulary != expected_origins {
            out.push(Violation::OriginVocabularyMismatch {
                detail: format!(
                    "declared {:?}, present {:?}",
                    self.origin_vocabulary, expected_origins
                ),
            });
        }
        let mut expected_levels: Vec<u32> = self.records.iter().map(|r| r.level).collect();
        expected_levels.sort_unstable();
        expected_levels.dedup();
        if self.level_set != expected_levels {
            out.push(Violation::LevelSetMismatch {
                detail: format!("declared {:?}, present {:?}", self.level_set, expected_levels),
            });
        }
        out
    }

    /// Partitions the records by origin, in vocabulary order. Sub-datasets
    /// keep record order and recompute their own vocabularies.
    pub fn split_by_origin(&self) -> Vec<(String, SpectralDataset)> {
        self.origin_vocabulary
            .iter()
            .map(|origin| {
                let records: Vec<SpectrumRecord> = self
                    .records
                    .iter()
                    .filter(|r| &r.origin == origin)
                    .cloned()
                    .collect();
                let sub = SpectralDataset::from_records(self.grid.clone(), records)
                    .expect("per-origin slice of a valid dataset is valid");
                (origin.clone(), sub)
            })
            .collect()
    }

    /// Serializes to the delimited-text format. Band values use the shortest
    /// decimal representation that round-trips, so write-then-load yields a
    /// record-wise identical dataset.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), DatasetError> {
        let mut header = String::from("record_id,group_id,acquisition_id,origin,level");
        for b in 0..self.grid.band_count {
            header.push_str(&format!(",b{b:03}"));
        }
        header.push('\n');
        w.write_all(header.as_bytes())?;
        for rec in &self.records {
            let acq = rec
                .acquisition_id
                .map(|a| a.to_string())
                .unwrap_or_default();
            let mut line = format!(
                "{},{},{},{},{}",
                rec.record_id, rec.group_id, acq, rec.origin, rec.level
            );
            for v in &rec.bands {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("output is UTF-8")
    }
}

fn first_appearance_origins(records: &[SpectrumRecord]) -> Vec<String> {
    let mut seen = Vec::new();
    for rec in records {
        if !seen.contains(&rec.origin) {
            seen.push(rec.origin.clone());
        }
    }
    seen
}

/// Parses a dataset from delimited text. `level_set` declares the levels the
/// file is allowed to contain; rows outside it are rejected.
pub fn load_dataset<R: Read>(
    source: R,
    grid: &WavelengthGrid,
    level_set: &[u32],
) -> Result<SpectralDataset, DatasetError> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(DatasetError::EmptyDataset),
    };
    let expected_cols = 5 + grid.band_count;
    let header_fields: Vec<&str> = header.trim_end_matches('\n').split(',').collect();
    if header_fields.len() != expected_cols {
        return Err(DatasetError::MalformedHeader {
            detail: format!(
                "expected {expected_cols} columns, found {}",
                header_fields.len()
            ),
        });
    }
    if header_fields[..5] != ["record_id", "group_id", "acquisition_id", "origin", "level"] {
        return Err(DatasetError::MalformedHeader {
            detail: format!("unexpected metadata columns {:?}", &header_fields[..5]),
        });
    }

    let mut records = Vec::new();
    let mut group_labels: BTreeMap<String, (String, u32)> = BTreeMap::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx + 2; // 1-based, after the header
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 5 {
            return Err(DatasetError::MalformedRow {
                line: line_no,
                detail: format!("only {} fields", fields.len()),
            });
        }
        let band_fields = &fields[5..];
        if band_fields.len() != grid.band_count {
            return Err(DatasetError::BandCountMismatch {
                line: line_no,
                expected: grid.band_count,
                found: band_fields.len(),
            });
        }
        let record_id = fields[0].to_string();
        let group_id = fields[1].to_string();
        if !valid_token(&record_id) || !valid_token(&group_id) {
            return Err(DatasetError::MalformedRow {
                line: line_no,
                detail: format!("bad identifier `{}` or `{}`", record_id, group_id),
            });
        }
        let acquisition_id = if fields[2].is_empty() {
            None
        } else {
            Some(fields[2].parse::<u32>().map_err(|_| {
                DatasetError::MalformedRow {
                    line: line_no,
                    detail: format!("acquisition_id `{}` is not an integer", fields[2]),
                }
            })?)
        };
        let origin = fields[3].to_string();
        if !valid_token(&origin) {
            return Err(DatasetError::MalformedRow {
                line: line_no,
                detail: format!("bad origin token `{origin}`"),
            });
        }
        let level: u32 = fields[4].parse().map_err(|_| DatasetError::UnknownLevel {
            line: line_no,
            level: fields[4].to_string(),
        })?;
        if !level_set.contains(&level) {
            return Err(DatasetError::UnknownLevel {
                line: line_no,
                level: fields[4].to_string(),
            });
        }
        let mut bands = Vec::with_capacity(grid.band_count);
        for (b, raw) in band_fields.iter().enumerate() {
            let v: f64 = raw.parse().map_err(|_| DatasetError::NonNumericBand {
                line: line_no,
                column: format!("b{b:03}"),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DatasetError::NonNumericBand {
                    line: line_no,
                    column: format!("b{b:03}"),
                    value: raw.to_string(),
                });
            }
            bands.push(v);
        }
        match group_labels.get(&group_id) {
            None => {
                group_labels.insert(group_id.clone(), (origin.clone(), level));
            }
            Some((o, l)) => {
                if *o != origin || *l != level {
                    return Err(DatasetError::GroupLabelConflict {
                        group_id,
                        detail: format!(
                            "line {line_no} carries ({origin}, {level}) but the group started as ({o}, {l})"
                        ),
                    });
                }
            }
        }
        records.push(SpectrumRecord {
            record_id,
            group_id,
            acquisition_id,
            origin,
            level,
            bands,
        });
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    SpectralDataset::from_records(grid.clone(), records)
}

/// Parameters for the synthetic generator used by the oracle tests and the
/// `synth` CLI command.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub origins: usize,
    pub levels: Vec<u32>,
    pub groups_per_class: usize,
    pub records_per_group: usize,
    /// Distance scale between class means; see `synth_generate`.
    pub class_mean_separation: f64,
    pub noise_sd: f64,
    pub band_count: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            origins: 3,
            levels: vec![0, 5, 10, 25, 50],
            groups_per_class: 4,
            records_per_group: 3,
            class_mean_separation: 10.0,
            noise_sd: 0.5,
            band_count: 128,
        }
    }
}

impl SynthSpec {
    fn check(&self) -> Result<(), DatasetError> {
        if self.origins == 0
            || self.levels.is_empty()
            || self.groups_per_class == 0
            || self.records_per_group == 0
            || self.band_count == 0
        {
            return Err(DatasetError::InvalidSpec {
                detail: "all counts must be at least 1".into(),
            });
        }
        let mut dedup = self.levels.clone();
        dedup.sort_unstable();
        dedup.dedup();
        if dedup.len() != self.levels.len() {
            return Err(DatasetError::InvalidSpec {
                detail: "levels must be distinct".into(),
            });
        }
        if !(self.noise_sd >= 0.0) || !self.class_mean_separation.is_finite() {
            return Err(DatasetError::InvalidSpec {
                detail: "noise_sd must be non-negative and separation finite".into(),
            });
        }
        Ok(())
    }
}

/// Deterministic synthetic dataset: one Gaussian cluster per (origin, level)
/// pair. The class mean is the sum of an origin component and a level
/// component placed on disjoint coordinate axes, each scaled by
/// `class_mean_separation`, so any two distinct class means are at least
/// `class_mean_separation * sqrt(2)` apart while the within-origin level
/// spread stays orthogonal to the between-origin directions. Identical seeds
/// produce bit-identical datasets.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<SpectralDataset, DatasetError> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = spec.band_count;
    let s = spec.class_mean_separation;
    let n_levels = spec.levels.len();

    let mut records = Vec::with_capacity(
        spec.origins * n_levels * spec.groups_per_class * spec.records_per_group,
    );
    for oi in 0..spec.origins {
        let origin = format!("origin{oi:02}");
        for (li, &level) in spec.levels.iter().enumerate() {
            let mut mean = vec![0.0; p];
            // Axis reuse only happens when origins + levels exceed the band
            // count; the growing multiplier keeps reused axes separated.
            let o_axis = oi % p;
            let o_scale = (1 + oi / p) as f64;
            mean[o_axis] += s * o_scale;
            let l_axis = (spec.origins + li) % p;
            let l_scale = (1 + (spec.origins + li) / p) as f64;
            mean[l_axis] += s * l_scale;

            for g in 0..spec.groups_per_class {
                let group_id = format!("img-{origin}-l{level}-g{g:02}");
                let acquisition_id = Some((g % 3) as u32);
                for r in 0..spec.records_per_group {
                    let mut bands = mean.clone();
                    if spec.noise_sd > 0.0 {
                        for b in bands.iter_mut() {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            *b += spec.noise_sd * z;
                        }
                    }
                    records.push(SpectrumRecord {
                        record_id: format!("{group_id}-r{r:02}"),
                        group_id: group_id.clone(),
                        acquisition_id,
                        origin: origin.clone(),
                        level,
                        bands,
                    });
                }
            }
        }
    }
    let grid = WavelengthGrid::new(400.0, 5.0, p)?;
    SpectralDataset::from_records(grid, records)
}

/// Per-band affine transform fitted on a training matrix: subtract the mean,
/// divide by the standard deviation (floored so constant bands map to zero
/// instead of dividing by zero).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

pub const SCALE_FLOOR: f64 = 1e-12;

impl Standardizer {
    /// Fits per-column mean and sample standard deviation (n-1 denominator;
    /// zero when n = 1).
    pub fn fit(x: &Mat) -> Standardizer {
        let n = x.rows();
        let p = x.cols();
        assert!(n >= 1, "standardizer needs at least one row");
        let mean = x.col_means();
        let mut scale = vec![0.0; p];
        if n > 1 {
            for r in 0..n {
                for (acc, (v, m)) in scale.iter_mut().zip(x.row(r).iter().zip(&mean)) {
                    let d = v - m;
                    *acc += d * d;
                }
            }
            for acc in scale.iter_mut() {
                *acc = (*acc / (n as f64 - 1.0)).sqrt();
            }
        }
        for s in scale.iter_mut() {
            *s = s.max(SCALE_FLOOR);
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &Mat) -> Mat {
        assert_eq!(x.cols(), self.mean.len(), "column count mismatch");
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (v, (m, s)) in out.row_mut(r).iter_mut().zip(self.mean.iter().zip(&self.scale)) {
                *v = (*v - m) / s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_row_fixture() -> String {
        let mut s = String::from("record_id,group_id,acquisition_id,origin,level");
        for b in 0..4 {
            s.push_str(&format!(",b{b:03}"));
        }
        s.push('\n');
        s.push_str("r1,g1,1,Clover,0,0.1,0.2,0.3,0.4\n");
        s.push_str("r2,g1,1,Clover,0,0.5,0.6,0.7,0.8\n");
        s
    }

    fn small_grid() -> WavelengthGrid {
        WavelengthGrid::new(400.0, 5.0, 4).unwrap()
    }

    #[test]
    fn load_two_well_formed_rows() {
        let ds = load_dataset(two_row_fixture().as_bytes(), &small_grid(), &[0, 5]).unwrap();
        assert_eq!(ds.records.len(), 2);
        assert_eq!(ds.origin_vocabulary, vec!["Clover".to_string()]);
        assert_eq!(ds.level_set, vec![0]);
        assert_eq!(ds.records[0].bands, vec![0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let src = "record_id,group_id,acquisition_id,origin,level,b000,b001,b002,b003\n";
        let err = load_dataset(src.as_bytes(), &small_grid(), &[0]).unwrap_err();
        assert!(matches!(err, DatasetError::EmptyDataset));
    }

    #[test]
    fn short_row_is_band_count_mismatch() {
        let mut src = String::from("record_id,group_id,acquisition_id,origin,level,b000,b001,b002,b003\n");
        src.push_str("r1,g1,,Clover,0,0.1,0.2,0.3\n");
        let err = load_dataset(src.as_bytes(), &small_grid(), &[0]).unwrap_err();
        match err {
            DatasetError::BandCountMismatch { expected, found, .. } => {
                assert_eq!(expected, 4);
                assert_eq!(found, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn non_numeric_band_is_rejected() {
        let mut src = String::from("record_id,group_id,acquisition_id,origin,level,b000,b001,b002,b003\n");
        src.push_str("r1,g1,,Clover,0,0.1,abc,0.3,0.4\n");
        let err = load_dataset(src.as_bytes(), &small_grid(), &[0]).unwrap_err();
        assert!(matches!(err, DatasetError::NonNumericBand { .. }));
    }

    #[test]
    fn undeclared_level_is_rejected() {
        let mut src = String::from("record_id,group_id,acquisition_id,origin,level,b000,b001,b002,b003\n");
        src.push_str("r1,g1,,Clover,7,0.1,0.2,0.3,0.4\n");
        let err = load_dataset(src.as_bytes(), &small_grid(), &[0, 5]).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownLevel { .. }));
    }

    #[test]
    fn group_with_mixed_labels_is_rejected() {
        let mut src = String::from("record_id,group_id,acquisition_id,origin,level,b000,b001,b002,b003\n");
        src.push_str("r1,g1,,Clover,0,0.1,0.2,0.3,0.4\n");
        src.push_str("r2,g1,,Clover,5,0.1,0.2,0.3,0.4\n");
        let err = load_dataset(src.as_bytes(), &small_grid(), &[0, 5]).unwrap_err();
        assert!(matches!(err, DatasetError::GroupLabelConflict { .. }));
    }

    #[test]
    fn loaded_dataset_validates_clean() {
        let ds = load_dataset(two_row_fixture().as_bytes(), &small_grid(), &[0]).unwrap();
        assert!(ds.validate().is_empty());
    }

    #[test]
    fn nan_band_yields_one_violation() {
        let mut ds = load_dataset(two_row_fixture().as_bytes(), &small_grid(), &[0]).unwrap();
        ds.records[1].bands[2] = f64::NAN;
        let report = ds.validate();
        assert_eq!(report.len(), 1);
        match &report[0] {
            Violation::NonFiniteBand { record_id, band } => {
                assert_eq!(record_id, "r2");
                assert_eq!(*band, 2);
            }
            other => panic!("unexpected violation {other}"),
        }
    }

    #[test]
    fn mixed_level_group_yields_conflict_violation() {
        let mut ds = load_dataset(two_row_fixture().as_bytes(), &small_grid(), &[0]).unwrap();
        ds.records[1].level = 25;
        ds.level_set = vec![0, 25];
        let report = ds.validate();
        assert_eq!(report.len(), 1);
        assert!(matches!(report[0], Violation::GroupLabelConflict { .. }));
    }

    #[test]
    fn synth_record_count_is_product_of_counts() {
        let spec = SynthSpec {
            origins: 2,
            levels: vec![0, 50],
            groups_per_class: 3,
            records_per_group: 4,
            band_count: 8,
            ..SynthSpec::default()
        };
        let ds = synth_generate(&spec, 7).unwrap();
        assert_eq!(ds.records.len(), 2 * 2 * 3 * 4);
        assert_eq!(ds.origin_vocabulary.len(), 2);
        assert_eq!(ds.level_set, vec![0, 50]);
    }

    #[test]
    fn synth_is_deterministic_per_seed() {
        let spec = SynthSpec {
            origins: 2,
            levels: vec![0, 5],
            groups_per_class: 2,
            records_per_group: 2,
            band_count: 16,
            ..SynthSpec::default()
        };
        let a = synth_generate(&spec, 42).unwrap();
        let b = synth_generate(&spec, 42).unwrap();
        assert_eq!(a, b);
        let c = synth_generate(&spec, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn synth_zero_noise_hits_class_means_exactly() {
        let spec = SynthSpec {
            origins: 2,
            levels: vec![0, 5],
            groups_per_class: 1,
            records_per_group: 3,
            class_mean_separation: 4.0,
            noise_sd: 0.0,
            band_count: 8,
        };
        let ds = synth_generate(&spec, 1).unwrap();
        // origin 0, level index 0: axes 0 and 2
        let first = &ds.records[0];
        let mut expected = vec![0.0; 8];
        expected[0] = 4.0;
        expected[2] = 4.0;
        assert_eq!(first.bands, expected);
        // all records of one class are identical
        assert_eq!(ds.records[0].bands, ds.records[1].bands);
    }

    #[test]
    fn synth_rejects_zero_counts_and_negative_noise() {
        let spec = SynthSpec {
            groups_per_class: 0,
            ..SynthSpec::default()
        };
        assert!(matches!(
            synth_generate(&spec, 0),
            Err(DatasetError::InvalidSpec { .. })
        ));
        let spec = SynthSpec {
            noise_sd: -1.0,
            ..SynthSpec::default()
        };
        assert!(matches!(
            synth_generate(&spec, 0),
            Err(DatasetError::InvalidSpec { .. })
        ));
    }

    #[test]
    fn synth_output_validates_clean() {
        let ds = synth_generate(
            &SynthSpec {
                band_count: 16,
                ..SynthSpec::default()
            },
            3,
        )
        .unwrap();
        assert!(ds.validate().is_empty());
    }

    #[test]
    fn split_by_origin_partitions_records() {
        let spec = SynthSpec {
            origins: 3,
            levels: vec![0, 5],
            groups_per_class: 2,
            records_per_group: 2,
            band_count: 8,
            ..SynthSpec::default()
        };
        let ds = synth_generate(&spec, 11).unwrap();
        let parts = ds.split_by_origin();
        assert_eq!(parts.len(), 3);
        let total: usize = parts.iter().map(|(_, d)| d.records.len()).sum();
        assert_eq!(total, ds.records.len());
        // brute-force scan: every record in a sub-dataset carries its origin
        for (origin, sub) in &parts {
            assert!(sub.records.iter().all(|r| &r.origin == origin));
        }
        // disjoint by record id and jointly exhaustive
        let mut ids: Vec<&str> = parts
            .iter()
            .flat_map(|(_, d)| d.records.iter().map(|r| r.record_id.as_str()))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), ds.records.len());
    }

    #[test]
    fn split_eleven_origins_gives_eleven_subsets() {
        let spec = SynthSpec {
            origins: 11,
            levels: vec![0, 50],
            groups_per_class: 1,
            records_per_group: 2,
            band_count: 8,
            ..SynthSpec::default()
        };
        let ds = synth_generate(&spec, 29).unwrap();
        let parts = ds.split_by_origin();
        assert_eq!(parts.len(), 11);
        let total: usize = parts.iter().map(|(_, d)| d.records.len()).sum();
        assert_eq!(total, ds.records.len());
    }

    #[test]
    fn split_single_origin_is_identity() {
        let ds = load_dataset(two_row_fixture().as_bytes(), &small_grid(), &[0]).unwrap();
        let parts = ds.split_by_origin();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].1.records, ds.records);
    }

    #[test]
    fn csv_round_trip_is_identical() {
        let spec = SynthSpec {
            origins: 2,
            levels: vec![0, 10],
            groups_per_class: 2,
            records_per_group: 2,
            band_count: 6,
            ..SynthSpec::default()
        };
        let ds = synth_generate(&spec, 99).unwrap();
        let text = ds.to_csv_string();
        let grid = ds.grid.clone();
        let reloaded = load_dataset(text.as_bytes(), &grid, &ds.level_set).unwrap();
        assert_eq!(ds.records, reloaded.records);
        assert_eq!(ds.origin_vocabulary, reloaded.origin_vocabulary);
        assert_eq!(ds.level_set, reloaded.level_set);
    }

    #[test]
    fn standardizer_constant_column_maps_to_zero() {
        let x = Mat::from_vec(3, 2, vec![5.0, 1.0, 5.0, 2.0, 5.0, 3.0]);
        let s = Standardizer::fit(&x);
        let z = s.apply(&x);
        for r in 0..3 {
            assert_eq!(z.get(r, 0), 0.0);
        }
        assert_eq!(s.scale[0], SCALE_FLOOR);
    }

    #[test]
    fn standardizer_single_row_maps_to_zero() {
        let x = Mat::from_vec(1, 3, vec![1.0, -4.0, 9.0]);
        let s = Standardizer::fit(&x);
        let z = s.apply(&x);
        assert_eq!(z.row(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn standardizer_normalizes_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut data = Vec::with_capacity(20 * 5);
        for _ in 0..100 {
            data.push(rng.random_range(-3.0..7.0));
        }
        let x = Mat::from_vec(20, 5, data);
        let s = Standardizer::fit(&x);
        let z = s.apply(&x);
        let means = z.col_means();
        for m in means {
            assert!(m.abs() < 1e-10, "column mean {m} not centered");
        }
        for c in 0..5 {
            let mut acc = 0.0;
            for r in 0..20 {
                acc += z.get(r, c) * z.get(r, c);
            }
            let sd = (acc / 19.0).sqrt();
            assert!((sd - 1.0).abs() < 1e-10, "column sd {sd} not unit");
        }
    }
}
