//! File formats: CSV point sets and labels, JSON manifests, and flat-text
//! model files.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which is enough
//! for every `f64` to read back bit-for-bit, and writing the same data twice
//! produces the same bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detector::DetectorModel;
use crate::error::{Error, Result};
use crate::features::PcaModel;
use crate::metrics::DistanceReport;
use crate::points::PointSet;
use crate::sampling::RhoForm;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

const PCA_MAGIC: &str = "oodgen-pca 1";
const DETECTOR_MAGIC: &str = "oodgen-detector 1";

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_reals(values: &[f64]) -> String {
    let mut line = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        let _ = write!(line, "{v:.16e}");
    }
    line
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Canonical CSV bytes: header `c0,c1,...`, then one row per point.
pub fn points_to_csv(set: &PointSet) -> Vec<u8> {
    let mut out = String::with_capacity(set.as_flat().len() * 24 + 16);
    let header: Vec<String> = (0..set.dim()).map(|i| format!("c{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in set.rows() {
        out.push_str(&join_reals(row));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_points_csv(bytes: &[u8], source: &str) -> Result<PointSet> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(Error::invalid(format!("{source}: file is empty")));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    for (i, name) in header.iter().enumerate() {
        if name.trim() != format!("c{i}") {
            return Err(parse_err(1, format!("expected column name c{i}, found {name:?}")));
        }
    }
    let dim = header.len();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != dim {
            return Err(parse_err(
                line,
                format!("expected {dim} fields, found {}", record.len()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::invalid(format!("{source}: no data rows")));
    }
    PointSet::from_flat(dim, data)
}

pub fn write_points(path: &Path, set: &PointSet) -> Result<()> {
    write_file(path, &points_to_csv(set))
}

pub fn read_points(path: &Path) -> Result<PointSet> {
    parse_points_csv(&read_file(path)?, &path.display().to_string())
}

pub fn labels_to_csv(labels: &[u8]) -> Vec<u8> {
    let mut out = String::from("label\n");
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out.into_bytes()
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    write_file(path, &labels_to_csv(labels))
}

pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let source = path.display().to_string();
    let text = String::from_utf8(read_file(path)?).map_err(|_| Error::Parse {
        path: source.clone(),
        line: 1,
        message: "not UTF-8".into(),
    })?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("label") {
        return Err(Error::Parse {
            path: source,
            line: 1,
            message: "expected header `label`".into(),
        });
    }
    lines
        .enumerate()
        .map(|(i, l)| match l.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            other => Err(Error::Parse {
                path: source.clone(),
                line: i as u64 + 2,
                message: format!("label must be 0 or 1, found {other:?}"),
            }),
        })
        .collect()
}

/// Single-column CSV of reals under the given header.
pub fn column_to_csv(header: &str, values: &[f64]) -> Vec<u8> {
    let mut out = format!("{header}\n");
    for v in values {
        out.push_str(&fmt_real(*v));
        out.push('\n');
    }
    out.into_bytes()
}

/// Lowercase hex SHA-256 of the canonical CSV form of `set`.
pub fn dataset_checksum(set: &PointSet) -> String {
    hex::encode(Sha256::digest(points_to_csv(set)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gho,
    Sbo,
    Hbo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gho => "gho",
            Method::Sbo => "sbo",
            Method::Hbo => "hbo",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParameters {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_form: Option<RhoForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Counts {
    pub id_count: usize,
    pub output_count: usize,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRef {
    /// Relative paths resolve against the manifest's directory.
    pub path: String,
    pub sha256: String,
}

/// Everything needed to re-run one sampler invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub method: Method,
    pub parameters: SamplerParameters,
    pub counts: Counts,
    pub source: FileRef,
    pub output: FileRef,
}

/// Provenance of a generated synthetic dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub kind: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub count: usize,
    pub dim: usize,
    pub output: FileRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Manifest(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &to_json_bytes(value)?)
}

/// Parses a versioned JSON document: the schema version is checked before
/// the rest so a version bump reports as such rather than as a field error.
pub fn parse_versioned<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| Error::Manifest(e.to_string()))?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Manifest(format!(
                "unsupported schema_version {v}, expected {SCHEMA_VERSION}"
            )))
        }
        None => return Err(Error::Manifest("missing field `schema_version`".into())),
    }
    serde_json::from_value(value).map_err(|e| Error::Manifest(e.to_string()))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    parse_versioned(&read_file(path)?)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_json(path, manifest)
}

fn resolve(manifest_path: &Path, file: &str) -> PathBuf {
    let p = Path::new(file);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        manifest_path
            .parent()
            .map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
    }
}

/// Re-reads a referenced dataset and checks its checksum.
pub fn verify_file_ref(manifest_path: &Path, file: &FileRef) -> Result<PointSet> {
    let path = resolve(manifest_path, &file.path);
    let set = read_points(&path)?;
    let found = dataset_checksum(&set);
    if found != file.sha256 {
        return Err(Error::ChecksumMismatch {
            path,
            expected: file.sha256.clone(),
            found,
        });
    }
    Ok(set)
}

/// Loads a manifest and verifies its source dataset, returning both.
pub fn load_verified(manifest_path: &Path) -> Result<(Manifest, PointSet)> {
    let manifest = read_manifest(manifest_path)?;
    let source = verify_file_ref(manifest_path, &manifest.source)?;
    Ok((manifest, source))
}

/// Like [`load_verified`], also verifying and returning the sampler output.
pub fn load_verified_with_output(manifest_path: &Path) -> Result<(Manifest, PointSet, PointSet)> {
    let (manifest, source) = load_verified(manifest_path)?;
    let output = verify_file_ref(manifest_path, &manifest.output)?;
    Ok((manifest, source, output))
}

pub fn pca_to_text(model: &PcaModel) -> String {
    let mut out = format!(
        "{PCA_MAGIC}\n{} {}\n{}\n",
        model.input_dim(),
        model.latent_dim(),
        join_reals(model.mean())
    );
    for j in 0..model.latent_dim() {
        out.push_str(&join_reals(model.component(j)));
        out.push('\n');
    }
    out.push_str(&join_reals(model.explained_variance()));
    out.push('\n');
    out
}

pub fn pca_from_text(text: &str, source: &str) -> Result<PcaModel> {
    let mut lines = TextLines::new(text, source);
    lines.expect_magic(PCA_MAGIC)?;
    let (line_no, dims) = lines.next_line()?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|v| v.parse().map_err(|_| lines.err(line_no, format!("bad dimension {v:?}"))))
        .collect::<Result<_>>()?;
    let [d, k] = dims[..] else {
        return Err(lines.err(line_no, "expected `D k`".into()));
    };
    let mean = lines.reals(d)?;
    let mut components = Vec::with_capacity(d * k);
    for _ in 0..k {
        components.extend(lines.reals(d)?);
    }
    let explained = lines.reals(k)?;
    PcaModel::from_parts(mean, components, explained)
}

pub fn write_pca(path: &Path, model: &PcaModel) -> Result<()> {
    write_file(path, pca_to_text(model).as_bytes())
}

pub fn read_pca(path: &Path) -> Result<PcaModel> {
    let bytes = read_file(path)?;
    pca_from_text(&String::from_utf8_lossy(&bytes), &path.display().to_string())
}

pub fn detector_to_text(model: &DetectorModel) -> String {
    let sizes = model.layer_sizes();
    let sizes_line: Vec<String> = sizes.iter().map(|s| s.to_string()).collect();
    let mut out = format!("{DETECTOR_MAGIC}\n{}\n", sizes_line.join(","));
    let params = model.parameters();
    let mut at = 0;
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        for _ in 0..=inputs {
            out.push_str(&join_reals(&params[at..at + outputs]));
            out.push('\n');
            at += outputs;
        }
    }
    out
}

pub fn detector_from_text(text: &str, source: &str) -> Result<DetectorModel> {
    let mut lines = TextLines::new(text, source);
    lines.expect_magic(DETECTOR_MAGIC)?;
    let (line_no, sizes) = lines.next_line()?;
    let sizes: Vec<usize> = sizes
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| lines.err(line_no, format!("bad layer size {v:?}"))))
        .collect::<Result<_>>()?;
    let mut params = Vec::new();
    for w in sizes.windows(2) {
        for _ in 0..=w[0] {
            params.extend(lines.reals(w[1])?);
        }
    }
    DetectorModel::from_parameters(&sizes, &params)
}

pub fn write_detector(path: &Path, model: &DetectorModel) -> Result<()> {
    write_file(path, detector_to_text(model).as_bytes())
}

struct TextLines<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    source: &'a str,
}

impl<'a> TextLines<'a> {
    fn new(text: &'a str, source: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            source,
        }
    }

    fn err(&self, line: u64, message: String) -> Error {
        Error::Parse {
            path: self.source.to_string(),
            line,
            message,
        }
    }

    fn next_line(&mut self) -> Result<(u64, &'a str)> {
        match self.lines.next() {
            Some((i, l)) => Ok((i as u64 + 1, l)),
            None => Err(self.err(0, "unexpected end of file".into())),
        }
    }

    fn expect_magic(&mut self, magic: &str) -> Result<()> {
        let (n, line) = self.next_line()?;
        if line.trim() != magic {
            return Err(self.err(n, format!("expected header {magic:?}")));
        }
        Ok(())
    }

    fn reals(&mut self, count: usize) -> Result<Vec<f64>> {
        let (n, line) = self.next_line()?;
        let values: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse().map_err(|_| self.err(n, format!("not a number: {v:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != count {
            return Err(self.err(n, format!("expected {count} values, found {}", values.len())));
        }
        Ok(values)
    }
}

/// Square matrix CSV with dataset names as the header row and first column.
pub fn matrix_to_csv(ids: &[String], matrix: &[Vec<f64>]) -> Vec<u8> {
    let mut out = format!("dataset,{}\n", ids.join(","));
    for (id, row) in ids.iter().zip(matrix) {
        out.push_str(id);
        out.push(',');
        out.push_str(&join_reals(row));
        out.push('\n');
    }
    out.into_bytes()
}

/// Writes `distances_raw.csv`, `distances_normalized.csv` and `report.json`
/// into `dir`.
pub fn write_report(dir: &Path, report: &DistanceReport) -> Result<()> {
    write_file(&dir.join("distances_raw.csv"), &matrix_to_csv(&report.dataset_ids, &report.matrix))?;
    write_file(
        &dir.join("distances_normalized.csv"),
        &matrix_to_csv(&report.dataset_ids, &report.normalized),
    )?;
    write_json(&dir.join("report.json"), report)
}
