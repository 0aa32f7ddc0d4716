//! On-disk formats: JSON documents, the binary matrix container and tabular reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skipstack_core::classify::{BinaryModel, EvalReport, LinearModel};
use skipstack_core::encoder::{FisherCodec, GmmModel, PcaTransform};
use skipstack_core::latent::LatentModel;
use skipstack_core::Matrix;

use crate::dataset::{ActionSample, DatasetConfig, SyntheticActionDataset, Template};
use crate::error::{CliError, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that remembers the checksum of everything written through it.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    written: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(OutputDir { dir, written: BTreeMap::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::format(name, e))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// File name to SHA-256 of everything written so far.
    pub fn checksums(&self) -> &BTreeMap<String, String> {
        &self.written
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::format(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Latent model

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub k: usize,
    pub d: usize,
    pub gammas: Vec<f64>,
    pub c: f64,
    pub sigma: f64,
    pub seed: u64,
    /// `d x k`, row-major.
    pub xbar: Vec<f64>,
}

impl From<&LatentModel> for ModelDoc {
    fn from(m: &LatentModel) -> Self {
        ModelDoc {
            k: m.k(),
            d: m.d(),
            gammas: m.gammas().to_vec(),
            c: m.c(),
            sigma: m.sigma(),
            seed: m.seed(),
            xbar: m.xbar().as_slice().to_vec(),
        }
    }
}

impl ModelDoc {
    pub fn into_model(self) -> Result<LatentModel> {
        let xbar = Matrix::from_row_major(self.d, self.k, self.xbar)?;
        Ok(LatentModel::from_parts(self.k, self.d, self.gammas, self.c, self.sigma, self.seed, xbar)?)
    }
}

pub fn load_model(path: &Path) -> Result<LatentModel> {
    read_json::<ModelDoc>(path)?.into_model()
}

// ---------------------------------------------------------------------------
// Binary matrix container

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixHeader {
    pub rows: usize,
    pub cols: usize,
    /// `"P"`, `"F"`, `"DESC"` or `"FV"`.
    pub kind: String,
    /// Level tag per column (`P`, `F`) or per row (`DESC`); empty otherwise.
    pub levels: Vec<usize>,
}

/// JSON header line, then `rows * cols` little-endian `f32` values row-major, then for
/// `DESC` one more `f32` location per row.
pub fn encode_matrix(header: &MatrixHeader, m: &Matrix, locations: Option<&[f64]>) -> Result<Vec<u8>> {
    if header.rows != m.rows() || header.cols != m.cols() {
        return Err(CliError::format("matrix container", "header shape disagrees with the matrix"));
    }
    if (header.kind == "DESC") != locations.is_some() {
        return Err(CliError::format("matrix container", "locations go with kind DESC and only with it"));
    }
    let mut out = serde_json::to_vec(header).map_err(|e| CliError::format("matrix header", e))?;
    out.push(b'\n');
    out.reserve(4 * (m.as_slice().len() + m.rows()));
    for v in m.as_slice().iter().chain(locations.unwrap_or(&[])) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<(MatrixHeader, Matrix, Option<Vec<f64>>)> {
    let mut reader = bytes;
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).map_err(|e| CliError::format("matrix container", e))?;
    let header: MatrixHeader = serde_json::from_slice(&line).map_err(|e| CliError::format("matrix header", e))?;
    let cells = header.rows.checked_mul(header.cols).ok_or_else(|| CliError::format("matrix header", "size overflows"))?;
    let extra = if header.kind == "DESC" { header.rows } else { 0 };
    if reader.len() != 4 * (cells + extra) {
        return Err(CliError::format(
            "matrix container",
            format!("expected {} payload bytes, found {}", 4 * (cells + extra), reader.len()),
        ));
    }
    let values: Vec<f64> = reader.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let (data, locs) = values.split_at(cells);
    let m = Matrix::from_row_major(header.rows, header.cols, data.to_vec())?;
    let locations = (header.kind == "DESC").then(|| locs.to_vec());
    Ok((header, m, locations))
}

// ---------------------------------------------------------------------------
// Codec

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecDoc {
    pub pca_mean: Vec<f64>,
    /// `D x D'`, row-major.
    pub pca_projection: Vec<f64>,
    pub pca_input_dim: usize,
    pub pca_output_dim: usize,
    pub pca_explained_ratio: Vec<f64>,
    pub weights: Vec<f64>,
    /// `K x D''`, row-major.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub gmm_dim: usize,
    pub append_location: bool,
    pub renormalize: bool,
}

impl From<&FisherCodec> for CodecDoc {
    fn from(c: &FisherCodec) -> Self {
        CodecDoc {
            pca_mean: c.pca.mean.clone(),
            pca_projection: c.pca.projection.as_slice().to_vec(),
            pca_input_dim: c.pca.projection.rows(),
            pca_output_dim: c.pca.projection.cols(),
            pca_explained_ratio: c.pca.explained_ratio.clone(),
            weights: c.gmm.weights.clone(),
            means: c.gmm.means.as_slice().to_vec(),
            variances: c.gmm.variances.as_slice().to_vec(),
            gmm_dim: c.gmm.dim(),
            append_location: c.append_location,
            renormalize: c.renormalize,
        }
    }
}

impl CodecDoc {
    pub fn into_codec(self) -> Result<FisherCodec> {
        let k = self.weights.len();
        if self.pca_mean.len() != self.pca_input_dim {
            return Err(CliError::format("codec", "pca_mean length disagrees with pca_input_dim"));
        }
        if self.gmm_dim != self.pca_output_dim + usize::from(self.append_location) {
            return Err(CliError::format("codec", "gmm_dim must equal the PCA output plus the location column"));
        }
        let pca = PcaTransform {
            mean: self.pca_mean,
            projection: Matrix::from_row_major(self.pca_input_dim, self.pca_output_dim, self.pca_projection)?,
            explained_ratio: self.pca_explained_ratio,
        };
        let gmm = GmmModel::from_parameters(
            self.weights,
            Matrix::from_row_major(k, self.gmm_dim, self.means)?,
            Matrix::from_row_major(k, self.gmm_dim, self.variances)?,
        )?;
        Ok(FisherCodec { pca, gmm, append_location: self.append_location, renormalize: self.renormalize })
    }
}

// ---------------------------------------------------------------------------
// Classifier

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDoc {
    pub weights: Vec<f64>,
    pub bias: f64,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModelDoc {
    #[serde(rename = "C")]
    pub c: f64,
    pub classes: Vec<BinaryDoc>,
}

impl From<&LinearModel> for LinearModelDoc {
    fn from(m: &LinearModel) -> Self {
        LinearModelDoc {
            c: m.c,
            classes: m
                .models
                .iter()
                .map(|b| BinaryDoc { weights: b.weights.clone(), bias: b.bias, iterations: b.iterations, objective: b.objective })
                .collect(),
        }
    }
}

impl LinearModelDoc {
    pub fn into_model(self) -> Result<LinearModel> {
        let dim = self.classes.first().map_or(0, |b| b.weights.len());
        if self.classes.len() < 2 || self.classes.iter().any(|b| b.weights.len() != dim) {
            return Err(CliError::format("classifier", "need >= 2 classes with equal weight lengths"));
        }
        let models = self
            .classes
            .into_iter()
            .map(|b| BinaryModel { weights: b.weights, bias: b.bias, iterations: b.iterations, objective: b.objective, dual_trace: Vec::new() })
            .collect();
        Ok(LinearModel { models, c: self.c })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetricsDoc {
    pub class: usize,
    pub support: usize,
    pub accuracy: f64,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReportDoc {
    pub macc: f64,
    pub map: f64,
    pub per_class: Vec<ClassMetricsDoc>,
    pub missing_classes: Vec<usize>,
    pub confusion: Vec<Vec<usize>>,
}

impl From<&EvalReport> for EvalReportDoc {
    fn from(r: &EvalReport) -> Self {
        EvalReportDoc {
            macc: r.macc,
            map: r.map,
            per_class: r
                .per_class
                .iter()
                .map(|m| ClassMetricsDoc { class: m.class, support: m.support, accuracy: m.accuracy, average_precision: m.average_precision })
                .collect(),
            missing_classes: r.missing_classes.clone(),
            confusion: r.confusion.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Dataset

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDoc {
    pub label: usize,
    pub speed: u32,
    pub amplitude: f64,
    pub frames: usize,
    pub channels: usize,
    /// `frames x channels`, row-major.
    pub series: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetDoc {
    pub config: DatasetConfig,
    pub templates: Vec<Template>,
    pub samples: Vec<SampleDoc>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl From<&SyntheticActionDataset> for DatasetDoc {
    fn from(ds: &SyntheticActionDataset) -> Self {
        DatasetDoc {
            config: ds.config.clone(),
            templates: ds.templates.clone(),
            samples: ds
                .samples
                .iter()
                .map(|s| SampleDoc {
                    label: s.label,
                    speed: s.speed,
                    amplitude: s.amplitude,
                    frames: s.series.rows(),
                    channels: s.series.cols(),
                    series: s.series.as_slice().to_vec(),
                })
                .collect(),
            train: ds.train.clone(),
            test: ds.test.clone(),
        }
    }
}

impl DatasetDoc {
    pub fn into_dataset(self) -> Result<SyntheticActionDataset> {
        let n = self.samples.len();
        if self.train.iter().chain(&self.test).any(|i| *i >= n) {
            return Err(CliError::format("dataset", "split index out of range"));
        }
        let samples = self
            .samples
            .into_iter()
            .map(|s| {
                let series = Matrix::from_row_major(s.frames, s.channels, s.series)?;
                if !series.is_finite() {
                    return Err(CliError::format("dataset", "series contains non-finite values"));
                }
                Ok(ActionSample { label: s.label, speed: s.speed, amplitude: s.amplitude, series })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticActionDataset { config: self.config, templates: self.templates, samples, train: self.train, test: self.test })
    }
}

pub fn load_dataset(path: &Path) -> Result<SyntheticActionDataset> {
    read_json::<DatasetDoc>(path)?.into_dataset()
}

// ---------------------------------------------------------------------------
// Tables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Float(v) if v.is_finite() => (*v).into(),
            // JSON has no infinities; keep the same spelling as the CSV.
            Cell::Float(v) => v.to_string().into(),
            Cell::Bool(v) => (*v).into(),
            Cell::Text(v) => v.clone().into(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Rows of named columns, rendered as CSV or as a JSON array of objects.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self, format: TableFormat) -> Result<Vec<u8>> {
        match format {
            TableFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns).map_err(|e| CliError::format("csv", e))?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render)).map_err(|e| CliError::format("csv", e))?;
                }
                w.into_inner().map_err(|e| CliError::format("csv", e.to_string()))
            }
            TableFormat::Json => {
                let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
                    .rows
                    .iter()
                    .map(|row| self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect())
                    .collect();
                let mut bytes = serde_json::to_vec_pretty(&rows).map_err(|e| CliError::format("json table", e))?;
                bytes.push(b'\n');
                Ok(bytes)
            }
        }
    }

    /// Writes `<stem>.<ext>` into `out`.
    pub fn write(&self, out: &mut OutputDir, stem: &str, format: TableFormat) -> Result<PathBuf> {
        out.write(&format!("{stem}.{}", format.extension()), &self.to_bytes(format)?)
    }
}

/// Reads a CSV with a header into column names and string records.
pub fn read_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_reader(bytes);
    let header: Vec<String> = r.headers().map_err(|e| CliError::format("csv", e))?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(|e| CliError::format("csv", e)))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}

pub fn write_all(w: &mut impl Write, bytes: &[u8], path: &Path) -> Result<()> {
    w.write_all(bytes).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_container_round_trip() {
        let m = Matrix::from_rows(&[vec![1.0, -2.5], vec![0.25, 3.0], vec![7.0, 8.0]]).unwrap();
        let h = MatrixHeader { rows: 3, cols: 2, kind: "DESC".into(), levels: vec![0, 0, 1] };
        let bytes = encode_matrix(&h, &m, Some(&[0.0, 0.5, 1.0])).unwrap();
        let (h2, m2, loc) = decode_matrix(&bytes).unwrap();
        assert_eq!(h2, h);
        assert_eq!(m2, m);
        assert_eq!(loc.unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(decode_matrix(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn infinities_survive_both_table_formats() {
        let mut t = Table::new(&["trial", "beta"]);
        t.push(vec![0usize.into(), f64::INFINITY.into()]);
        assert_eq!(String::from_utf8(t.to_bytes(TableFormat::Csv).unwrap()).unwrap(), "trial,beta\n0,inf\n");
        assert!(String::from_utf8(t.to_bytes(TableFormat::Json).unwrap()).unwrap().contains("\"inf\""));
    }
}
