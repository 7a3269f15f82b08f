//! Versioned binary persistence for [`HierarchicalModel`].
//!
//! Layout (documented field by field in `docs/model-format.md`): the magic
//! line `HSPEC`, the format version as decimal text, then one
//! length-prefixed section per component. Dimensions and label tokens are
//! decimal/ASCII text; matrix and vector payloads are little-endian IEEE-754
//! doubles. Section order and every map ordering are fixed, so saving the
//! same model twice produces byte-identical files.

use std::io::{Read, Write};

use thiserror::Error;

use crate::classify::{BinaryProblem, ConstantModel, KernelSpec, SvmModel, TrainedClassifier};
use crate::dataset::{Standardizer, WavelengthGrid};
use crate::dimred::{ProjectionKind, ProjectionModel};
use crate::linalg::Mat;
use crate::stage::StageModel;

use super::HierarchicalModel;

pub const MODEL_MAGIC: &str = "HSPEC";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("not a model file: {0}")]
    BadModelFile(String),
    #[error("unsupported format version {found} (this build reads up to {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("file ends in the middle of a structure")]
    TruncatedFile,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

/// Encodes classifier labels as line-safe tokens.
pub trait LabelCodec: Sized {
    fn encode_label(&self) -> String;
    fn decode_label(token: &str) -> Result<Self, ModelIoError>;
}

impl LabelCodec for String {
    fn encode_label(&self) -> String {
        self.clone()
    }

    fn decode_label(token: &str) -> Result<Self, ModelIoError> {
        if token.is_empty() || token.contains(',') || token.contains('\n') {
            return Err(ModelIoError::BadModelFile(format!(
                "bad label token `{token}`"
            )));
        }
        Ok(token.to_string())
    }
}

impl LabelCodec for u32 {
    fn encode_label(&self) -> String {
        self.to_string()
    }

    fn decode_label(token: &str) -> Result<Self, ModelIoError> {
        token
            .parse()
            .map_err(|_| ModelIoError::BadModelFile(format!("bad level token `{token}`")))
    }
}

// ---------------------------------------------------------------------------
// Writing

fn push_f64s(buf: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_mat(buf: &mut Vec<u8>, m: &Mat) {
    push_f64s(buf, m.data());
}

fn encode_projection(buf: &mut Vec<u8>, projection: &Option<ProjectionModel>) {
    match projection {
        None => buf.extend_from_slice(b"projection none\n"),
        Some(p) => {
            let kind = match p.kind {
                ProjectionKind::Pca => "pca",
                ProjectionKind::Lda => "lda",
            };
            buf.extend_from_slice(
                format!("projection {kind} {} {}\n", p.input_dim(), p.output_dim()).as_bytes(),
            );
            push_f64s(buf, &p.mean);
            push_mat(buf, &p.basis);
            push_f64s(buf, &p.component_scores);
        }
    }
}

fn encode_classifier<L: LabelCodec + crate::classify::Label>(
    buf: &mut Vec<u8>,
    classifier: &TrainedClassifier<L>,
) {
    match classifier {
        TrainedClassifier::Knn(m) => {
            buf.extend_from_slice(
                format!(
                    "classifier knn {} {} {}\n",
                    m.train_x.rows(),
                    m.train_x.cols(),
                    m.k
                )
                .as_bytes(),
            );
            let labels: Vec<String> = m.train_y.iter().map(|l| l.encode_label()).collect();
            buf.extend_from_slice(format!("labels {}\n", labels.join(",")).as_bytes());
            push_mat(buf, &m.train_x);
        }
        TrainedClassifier::Svm(m) => {
            let kernel = match m.kernel {
                KernelSpec::Linear => "linear",
                KernelSpec::Rbf { .. } => "rbf",
            };
            buf.extend_from_slice(
                format!("classifier svm {kernel} {} {}\n", m.classes.len(), m.dim).as_bytes(),
            );
            let gamma = match m.kernel {
                KernelSpec::Linear => 0.0,
                KernelSpec::Rbf { gamma } => gamma,
            };
            push_f64s(buf, &[gamma, m.c, m.tol]);
            let classes: Vec<String> = m.classes.iter().map(|l| l.encode_label()).collect();
            buf.extend_from_slice(format!("classes {}\n", classes.join(",")).as_bytes());
            for problem in &m.problems {
                buf.extend_from_slice(
                    format!("problem {}\n", problem.support_idx.len()).as_bytes(),
                );
                let idx: Vec<String> =
                    problem.support_idx.iter().map(|i| i.to_string()).collect();
                buf.extend_from_slice(format!("indices {}\n", idx.join(",")).as_bytes());
                push_mat(buf, &problem.support_x);
                push_f64s(buf, &problem.coeffs);
                push_f64s(buf, &[problem.bias, problem.kkt_violation]);
            }
        }
        TrainedClassifier::Constant(m) => {
            buf.extend_from_slice(b"classifier constant\n");
            buf.extend_from_slice(format!("label {}\n", m.label.encode_label()).as_bytes());
        }
    }
}

fn encode_stage<L: LabelCodec + crate::classify::Label>(stage: &StageModel<L>) -> Vec<u8> {
    // stage standardizers are never populated inside a pipeline model; the
    // shared one lives in its own section
    debug_assert!(stage.standardizer.is_none());
    let mut buf = Vec::new();
    encode_projection(&mut buf, &stage.projection);
    encode_classifier(&mut buf, &stage.classifier);
    buf
}

fn write_section<W: Write>(w: &mut W, name: &str, payload: &[u8]) -> Result<(), ModelIoError> {
    w.write_all(format!("@{name} {}\n", payload.len()).as_bytes())?;
    w.write_all(payload)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Serializes a model. Identical models produce byte-identical output.
pub fn save_model<W: Write>(model: &HierarchicalModel, w: &mut W) -> Result<(), ModelIoError> {
    w.write_all(MODEL_MAGIC.as_bytes())?;
    w.write_all(b"\n")?;
    w.write_all(format!("{}\n", model.format_version).as_bytes())?;

    let grid_payload = format!(
        "start {} step {} bands {}\n",
        model.grid.start_nm, model.grid.step_nm, model.grid.band_count
    );
    write_section(w, "grid", grid_payload.as_bytes())?;

    if let Some(s) = &model.standardizer {
        let mut payload = format!("p {}\n", s.mean.len()).into_bytes();
        push_f64s(&mut payload, &s.mean);
        push_f64s(&mut payload, &s.scale);
        write_section(w, "standardizer", &payload)?;
    }

    write_section(w, "origin", &encode_stage(&model.origin_stage))?;
    for (token, entry) in &model.bank {
        write_section(w, &format!("bank:{token}"), &encode_stage(entry))?;
    }
    Ok(())
}

/// Convenience wrapper writing to a fresh buffer.
pub fn model_to_bytes(model: &HierarchicalModel) -> Vec<u8> {
    let mut buf = Vec::new();
    save_model(model, &mut buf).expect("writing to memory cannot fail");
    buf
}

// ---------------------------------------------------------------------------
// Reading

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn is_done(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn line(&mut self) -> Result<&'a str, ModelIoError> {
        let rest = &self.buf[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or(ModelIoError::TruncatedFile)?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end])
            .map_err(|_| ModelIoError::BadModelFile("non-UTF-8 text line".into()))
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8], ModelIoError> {
        if self.pos + n > self.buf.len() {
            return Err(ModelIoError::TruncatedFile);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelIoError> {
        let raw = self.bytes(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes")))
            .collect())
    }

    fn mat(&mut self, rows: usize, cols: usize) -> Result<Mat, ModelIoError> {
        Ok(Mat::from_vec(rows, cols, self.f64s(rows * cols)?))
    }
}

fn parse_usize(token: &str, what: &str) -> Result<usize, ModelIoError> {
    token
        .parse()
        .map_err(|_| ModelIoError::BadModelFile(format!("bad {what} `{token}`")))
}

fn parse_f64(token: &str, what: &str) -> Result<f64, ModelIoError> {
    token
        .parse()
        .map_err(|_| ModelIoError::BadModelFile(format!("bad {what} `{token}`")))
}

fn decode_projection(r: &mut Reader) -> Result<Option<ProjectionModel>, ModelIoError> {
    let line = r.line()?;
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.first() != Some(&"projection") {
        return Err(ModelIoError::BadModelFile(format!(
            "expected projection line, found `{line}`"
        )));
    }
    match fields.get(1) {
        Some(&"none") => Ok(None),
        Some(kind @ (&"pca" | &"lda")) if fields.len() == 4 => {
            let p = parse_usize(fields[2], "projection input dim")?;
            let d = parse_usize(fields[3], "projection output dim")?;
            let mean = r.f64s(p)?;
            let basis = r.mat(p, d)?;
            let component_scores = r.f64s(d)?;
            Ok(Some(ProjectionModel {
                kind: if *kind == "pca" {
                    ProjectionKind::Pca
                } else {
                    ProjectionKind::Lda
                },
                mean,
                basis,
                component_scores,
            }))
        }
        _ => Err(ModelIoError::BadModelFile(format!(
            "bad projection line `{line}`"
        ))),
    }
}

fn decode_tokens<L: LabelCodec>(joined: &str) -> Result<Vec<L>, ModelIoError> {
    if joined.is_empty() {
        return Ok(Vec::new());
    }
    joined.split(',').map(L::decode_label).collect()
}

fn decode_classifier<L: LabelCodec + crate::classify::Label>(
    r: &mut Reader,
) -> Result<TrainedClassifier<L>, ModelIoError> {
    let line = r.line()?;
    let fields: Vec<&str> = line.split(' ').collect();
    if fields.first() != Some(&"classifier") {
        return Err(ModelIoError::BadModelFile(format!(
            "expected classifier line, found `{line}`"
        )));
    }
    match fields.get(1) {
        Some(&"knn") if fields.len() == 5 => {
            let n = parse_usize(fields[2], "knn row count")?;
            let d = parse_usize(fields[3], "knn dim")?;
            let k = parse_usize(fields[4], "knn k")?;
            let labels_line = r.line()?;
            let joined = labels_line
                .strip_prefix("labels ")
                .ok_or_else(|| ModelIoError::BadModelFile("missing labels line".into()))?;
            let train_y: Vec<L> = decode_tokens(joined)?;
            if train_y.len() != n {
                return Err(ModelIoError::BadModelFile(format!(
                    "knn declares {n} rows but {} labels",
                    train_y.len()
                )));
            }
            let train_x = r.mat(n, d)?;
            crate::classify::knn_fit(&train_x, &train_y, k)
                .map_err(|e| ModelIoError::BadModelFile(format!("stored knn is invalid: {e}")))
        }
        Some(&"svm") if fields.len() == 5 => {
            let kernel_name = fields[2];
            let n_classes = parse_usize(fields[3], "svm class count")?;
            let d = parse_usize(fields[4], "svm dim")?;
            let scalars = r.f64s(3)?;
            let (gamma, c, tol) = (scalars[0], scalars[1], scalars[2]);
            let kernel = match kernel_name {
                "linear" => KernelSpec::Linear,
                "rbf" => KernelSpec::Rbf { gamma },
                other => {
                    return Err(ModelIoError::BadModelFile(format!(
                        "unknown kernel `{other}`"
                    )))
                }
            };
            let classes_line = r.line()?;
            let joined = classes_line
                .strip_prefix("classes ")
                .ok_or_else(|| ModelIoError::BadModelFile("missing classes line".into()))?;
            let classes: Vec<L> = decode_tokens(joined)?;
            if classes.len() != n_classes {
                return Err(ModelIoError::BadModelFile(format!(
                    "svm declares {n_classes} classes but lists {}",
                    classes.len()
                )));
            }
            let mut problems = Vec::with_capacity(n_classes);
            for _ in 0..n_classes {
                let problem_line = r.line()?;
                let n_sv = problem_line
                    .strip_prefix("problem ")
                    .ok_or_else(|| ModelIoError::BadModelFile("missing problem line".into()))
                    .and_then(|t| parse_usize(t, "support vector count"))?;
                let idx_line = r.line()?;
                let idx_joined = idx_line
                    .strip_prefix("indices ")
                    .ok_or_else(|| ModelIoError::BadModelFile("missing indices line".into()))?;
                let support_idx: Vec<usize> = if idx_joined.is_empty() {
                    Vec::new()
                } else {
                    idx_joined
                        .split(',')
                        .map(|t| parse_usize(t, "support index"))
                        .collect::<Result<_, _>>()?
                };
                if support_idx.len() != n_sv {
                    return Err(ModelIoError::BadModelFile(
                        "support index count mismatch".into(),
                    ));
                }
                let support_x = r.mat(n_sv, d)?;
                let coeffs = r.f64s(n_sv)?;
                let tail = r.f64s(2)?;
                problems.push(BinaryProblem {
                    support_x,
                    support_idx,
                    coeffs,
                    bias: tail[0],
                    kkt_violation: tail[1],
                });
            }
            Ok(TrainedClassifier::Svm(SvmModel {
                kernel,
                c,
                tol,
                classes,
                problems,
                dim: d,
            }))
        }
        Some(&"constant") => {
            let label_line = r.line()?;
            let token = label_line
                .strip_prefix("label ")
                .ok_or_else(|| ModelIoError::BadModelFile("missing label line".into()))?;
            Ok(TrainedClassifier::Constant(ConstantModel {
                label: L::decode_label(token)?,
            }))
        }
        _ => Err(ModelIoError::BadModelFile(format!(
            "bad classifier line `{line}`"
        ))),
    }
}

fn decode_stage<L: LabelCodec + crate::classify::Label>(
    payload: &[u8],
) -> Result<StageModel<L>, ModelIoError> {
    let mut r = Reader::new(payload);
    let projection = decode_projection(&mut r)?;
    let classifier = decode_classifier(&mut r)?;
    if !r.is_done() {
        return Err(ModelIoError::BadModelFile(
            "trailing bytes after stage payload".into(),
        ));
    }
    Ok(StageModel {
        standardizer: None,
        projection,
        classifier,
    })
}

fn read_section<'a>(r: &mut Reader<'a>) -> Result<(String, &'a [u8]), ModelIoError> {
    let header = r.line()?;
    let rest = header
        .strip_prefix('@')
        .ok_or_else(|| ModelIoError::BadModelFile(format!("expected section, found `{header}`")))?;
    let (name, len) = rest
        .rsplit_once(' ')
        .ok_or_else(|| ModelIoError::BadModelFile(format!("bad section header `{header}`")))?;
    let len = parse_usize(len, "section length")?;
    let payload = r.bytes(len)?;
    let terminator = r.bytes(1)?;
    if terminator != b"\n" {
        return Err(ModelIoError::BadModelFile(
            "section payload not newline-terminated".into(),
        ));
    }
    Ok((name.to_string(), payload))
}

/// Reads a model from any byte source and verifies its structure.
pub fn load_model<R: Read>(source: R) -> Result<HierarchicalModel, ModelIoError> {
    let mut source = source;
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    let mut r = Reader::new(&buf);

    let magic = r.line()?;
    if magic != MODEL_MAGIC {
        return Err(ModelIoError::BadModelFile(format!(
            "magic `{magic}` is not `{MODEL_MAGIC}`"
        )));
    }
    let version_line = r.line()?;
    let format_version: u32 = version_line
        .parse()
        .map_err(|_| ModelIoError::BadModelFile(format!("bad version `{version_line}`")))?;
    if format_version > MODEL_FORMAT_VERSION {
        return Err(ModelIoError::UnsupportedVersion {
            found: format_version,
            supported: MODEL_FORMAT_VERSION,
        });
    }

    let (name, payload) = read_section(&mut r)?;
    if name != "grid" {
        return Err(ModelIoError::BadModelFile(format!(
            "expected grid section, found `{name}`"
        )));
    }
    let grid = {
        let text = std::str::from_utf8(payload)
            .map_err(|_| ModelIoError::BadModelFile("grid payload not UTF-8".into()))?;
        let fields: Vec<&str> = text.trim_end().split(' ').collect();
        if fields.len() != 6 || fields[0] != "start" || fields[2] != "step" || fields[4] != "bands"
        {
            return Err(ModelIoError::BadModelFile(format!(
                "bad grid payload `{text}`"
            )));
        }
        WavelengthGrid {
            start_nm: parse_f64(fields[1], "grid start")?,
            step_nm: parse_f64(fields[3], "grid step")?,
            band_count: parse_usize(fields[5], "grid band count")?,
        }
    };

    let (mut name, mut payload) = read_section(&mut r)?;
    let standardizer = if name == "standardizer" {
        let mut pr = Reader::new(payload);
        let p_line = pr.line()?;
        let p = p_line
            .strip_prefix("p ")
            .ok_or_else(|| ModelIoError::BadModelFile("bad standardizer payload".into()))
            .and_then(|t| parse_usize(t, "standardizer width"))?;
        let mean = pr.f64s(p)?;
        let scale = pr.f64s(p)?;
        if !pr.is_done() {
            return Err(ModelIoError::BadModelFile(
                "trailing bytes after standardizer".into(),
            ));
        }
        let s = Some(Standardizer { mean, scale });
        let next = read_section(&mut r)?;
        name = next.0;
        payload = next.1;
        s
    } else {
        None
    };

    if name != "origin" {
        return Err(ModelIoError::BadModelFile(format!(
            "expected origin section, found `{name}`"
        )));
    }
    let origin_stage: StageModel<String> = decode_stage(payload)?;

    let mut bank: Vec<(String, StageModel<u32>)> = Vec::new();
    while !r.is_done() {
        let (name, payload) = read_section(&mut r)?;
        let token = name.strip_prefix("bank:").ok_or_else(|| {
            ModelIoError::BadModelFile(format!("unexpected section `{name}`"))
        })?;
        bank.push((token.to_string(), decode_stage(payload)?));
    }

    // structural checks: bank sorted, unique and matching the origin stage
    for pair in bank.windows(2) {
        if pair[0].0 >= pair[1].0 {
            return Err(ModelIoError::BadModelFile(
                "bank sections out of order".into(),
            ));
        }
    }
    let vocab = origin_stage.classifier.vocabulary();
    let bank_tokens: Vec<&String> = bank.iter().map(|(t, _)| t).collect();
    if vocab.iter().collect::<Vec<_>>() != bank_tokens {
        return Err(ModelIoError::BadModelFile(format!(
            "bank entries {bank_tokens:?} do not match origin vocabulary {vocab:?}"
        )));
    }

    Ok(HierarchicalModel {
        format_version,
        grid,
        standardizer,
        origin_stage,
        bank,
    })
}
