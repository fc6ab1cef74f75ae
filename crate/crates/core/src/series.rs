//! Loading, normalizing, trimming and windowing multivariate series.
//!
//! The pipeline order is fixed: trim the startup transient, fit min-max
//! statistics on normal data, cut windows of `T` raw rows with a stride, then
//! median-downsample each window to `L = T / factor` rows.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Timestamped multivariate measurements with optional per-row attack flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub timestamps: Vec<f64>,
    pub values: Matrix,
    pub column_names: Vec<String>,
    pub labels: Option<Vec<u8>>,
}

impl RawSeries {
    pub fn new(
        timestamps: Vec<f64>,
        values: Matrix,
        column_names: Vec<String>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        if values.cols() == 0 {
            return Err(Error::invalid("series needs at least one column"));
        }
        if timestamps.len() != values.rows() {
            return Err(Error::dims(format!(
                "{} timestamps for {} rows",
                timestamps.len(),
                values.rows()
            )));
        }
        if column_names.len() != values.cols() {
            return Err(Error::dims(format!(
                "{} column names for {} columns",
                column_names.len(),
                values.cols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != values.rows() {
                return Err(Error::dims(format!("{} labels for {} rows", l.len(), values.rows())));
            }
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotoneTimestamps { row: i + 1 });
        }
        Ok(RawSeries { timestamps, values, column_names, labels })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn n_columns(&self) -> usize {
        self.values.cols()
    }

    /// Rows `start..end` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> RawSeries {
        RawSeries {
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values.slice_rows(start, end),
            column_names: self.column_names.clone(),
            labels: self.labels.as_ref().map(|l| l[start..end].to_vec()),
        }
    }
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnSchema {
    /// Timestamp column (seconds). When absent or empty, row indices are
    /// used.
    pub timestamp: Option<String>,
    /// Label column; absent or empty means the data is unlabeled.
    pub label: Option<String>,
    /// Maps raw label cells to 0/1. Empty means the cells are numeric 0/1.
    pub label_map: BTreeMap<String, u8>,
    /// Feature columns in output order. Empty selects every non-role column.
    pub features: Vec<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        ColumnSchema {
            timestamp: Some("timestamp".into()),
            label: Some("label".into()),
            label_map: [("Normal".to_string(), 0), ("Attack".to_string(), 1)].into_iter().collect(),
            features: Vec::new(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<RawSeries> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Parses a CSV stream; see [`load_csv`].
pub fn read_csv<R: std::io::Read>(reader: R, schema: &ColumnSchema) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };

    // an empty name disables the role, which TOML cannot express with null
    let role = |name: &Option<String>| name.as_deref().filter(|n| !n.is_empty()).map(find).transpose();
    let ts_idx = role(&schema.timestamp)?;
    let label_idx = role(&schema.label)?;
    let feature_idx: Vec<usize> = if schema.features.is_empty() {
        (0..header.len()).filter(|i| Some(*i) != ts_idx && Some(*i) != label_idx).collect()
    } else {
        schema.features.iter().map(|f| find(f)).collect::<Result<_>>()?
    };
    if feature_idx.is_empty() {
        return Err(Error::invalid("no feature columns selected"));
    }

    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    let mut labels = label_idx.map(|_| Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // header is line 1, so data row r lives on line r + 2
        let line = row + 2;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow { row: line, found: rec.len(), expected: header.len() });
        }
        let num = |j: usize| -> Result<f64> {
            let cell = &rec[j];
            cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::NonNumeric {
                row: line,
                column: header[j].clone(),
                value: cell.to_string(),
            })
        };
        timestamps.push(match ts_idx {
            Some(j) => num(j)?,
            None => row as f64,
        });
        for &j in &feature_idx {
            data.push(num(j)?);
        }
        if let (Some(j), Some(out)) = (label_idx, labels.as_mut()) {
            let cell = &rec[j];
            let v = if schema.label_map.is_empty() {
                match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(Error::UnmappedLabel { row: line, value: cell.to_string() }),
                }
            } else {
                *schema
                    .label_map
                    .get(cell)
                    .ok_or_else(|| Error::UnmappedLabel { row: line, value: cell.to_string() })?
            };
            out.push(v);
        }
    }

    let rows = timestamps.len();
    let values = Matrix::from_vec(rows, feature_idx.len(), data)?;
    let names = feature_idx.iter().map(|&j| header[j].clone()).collect();
    RawSeries::new(timestamps, values, names, labels)
}

/// Writes the series with a `timestamp` column, features, and a
/// `label` column of `Normal`/`Attack` when labels are present.
pub fn write_csv(series: &RawSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.column_names.iter().cloned());
    if series.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..series.len() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(series.timestamps[i].to_string());
        rec.extend(series.values.row(i).iter().map(|v| v.to_string()));
        if let Some(l) = &series.labels {
            rec.push(if l[i] == 1 { "Attack" } else { "Normal" }.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Drops the first `n_rows` rows (startup transient).
pub fn trim_startup(series: &RawSeries, n_rows: usize) -> Result<RawSeries> {
    if n_rows >= series.len() {
        return Err(Error::invalid(format!(
            "cannot trim {n_rows} rows from a series of {} rows",
            series.len()
        )));
    }
    Ok(series.slice(n_rows, series.len()))
}

/// Per-column min-max statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_normalizer(series: &RawSeries) -> Result<NormalizationStats> {
    fit_normalizer_matrix(&series.values)
}

pub fn fit_normalizer_matrix(values: &Matrix) -> Result<NormalizationStats> {
    if values.rows() == 0 {
        return Err(Error::invalid("cannot fit normalizer on zero rows"));
    }
    let m = values.cols();
    let mut min = vec![f64::INFINITY; m];
    let mut max = vec![f64::NEG_INFINITY; m];
    for row in values.row_iter() {
        for j in 0..m {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    Ok(NormalizationStats { min, max })
}

impl NormalizationStats {
    /// Scales `values` in place. Constant columns map to 0; no clipping.
    pub fn apply_matrix(&self, values: &Matrix) -> Result<Matrix> {
        if values.cols() != self.min.len() {
            return Err(Error::dims(format!(
                "stats for {} columns applied to {} columns",
                self.min.len(),
                values.cols()
            )));
        }
        let mut out = values.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let span = self.max[j] - self.min[j];
                *v = if span > 0.0 { (*v - self.min[j]) / span } else { 0.0 };
            }
        }
        Ok(out)
    }
}

pub fn apply_normalizer(series: &RawSeries, stats: &NormalizationStats) -> Result<RawSeries> {
    Ok(RawSeries { values: stats.apply_matrix(&series.values)?, ..series.clone() })
}

/// Fixed-length subsequences cut from a series.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Matrix>,
    /// Raw rows covered by each window (`T`).
    pub window_length: usize,
    /// Rows per window after downsampling (`L`).
    pub sequence_length: usize,
    pub shift: usize,
    pub downsample_factor: usize,
    pub source_offsets: Vec<usize>,
    pub labels: Option<Vec<Vec<u8>>>,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.windows.first().map(Matrix::cols).unwrap_or(0)
    }

    /// Applies `f` to each window, keeping offsets and labels.
    pub fn map_windows(&self, f: impl Fn(&Matrix) -> Result<Matrix>) -> Result<WindowSet> {
        let windows = self.windows.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(WindowSet { windows, ..self.clone() })
    }

    /// Rows of all windows stacked in order.
    pub fn stacked(&self) -> Result<Matrix> {
        Matrix::vstack(&self.windows)
    }

    /// Per-row labels of all windows concatenated, if labeled.
    pub fn flat_labels(&self) -> Option<Vec<u8>> {
        self.labels.as_ref().map(|l| l.iter().flatten().copied().collect())
    }
}

/// Number of windows `floor((rows - T) / shift) + 1`, or 0 when `T > rows`.
pub fn window_count(rows: usize, length: usize, shift: usize) -> usize {
    if length == 0 || shift == 0 || length > rows {
        0
    } else {
        (rows - length) / shift + 1
    }
}

pub fn window(series: &RawSeries, length: usize, shift: usize) -> Result<WindowSet> {
    if shift == 0 {
        return Err(Error::invalid("shift must be at least 1"));
    }
    if length == 0 || length > series.len() {
        return Err(Error::invalid(format!(
            "window length {length} exceeds {} rows",
            series.len()
        )));
    }
    let count = window_count(series.len(), length, shift);
    let source_offsets: Vec<usize> = (0..count).map(|k| k * shift).collect();
    let windows = source_offsets.iter().map(|&o| series.values.slice_rows(o, o + length)).collect();
    let labels = series
        .labels
        .as_ref()
        .map(|l| source_offsets.iter().map(|&o| l[o..o + length].to_vec()).collect());
    Ok(WindowSet {
        windows,
        window_length: length,
        sequence_length: length,
        shift,
        downsample_factor: 1,
        source_offsets,
        labels,
    })
}

/// Median of a slice; even counts average the two middle values.
pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Replaces each block of `factor` rows by its per-column median. A
/// downsampled row is labeled anomalous if any row in its block was.
pub fn downsample_median(set: &WindowSet, factor: usize) -> Result<WindowSet> {
    if factor == 0 || set.sequence_length % factor != 0 {
        return Err(Error::invalid(format!(
            "sequence length {} is not divisible by factor {factor}",
            set.sequence_length
        )));
    }
    let out_len = set.sequence_length / factor;
    let mut block = vec![0.0; factor];
    let windows = set
        .windows
        .iter()
        .map(|w| {
            let mut out = Matrix::zeros(out_len, w.cols());
            for r in 0..out_len {
                for j in 0..w.cols() {
                    for (k, b) in block.iter_mut().enumerate() {
                        *b = w[(r * factor + k, j)];
                    }
                    out[(r, j)] = median(&mut block);
                }
            }
            out
        })
        .collect();
    let labels = set.labels.as_ref().map(|ls| {
        ls.iter()
            .map(|l| l.chunks(factor).map(|c| u8::from(c.iter().any(|&v| v != 0))).collect())
            .collect()
    });
    Ok(WindowSet {
        windows,
        window_length: set.window_length,
        sequence_length: out_len,
        shift: set.shift,
        downsample_factor: set.downsample_factor * factor,
        source_offsets: set.source_offsets.clone(),
        labels,
    })
}

/// JSON sidecar describing a serialized [`WindowSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub window_length: usize,
    pub sequence_length: usize,
    pub shift: usize,
    pub downsample_factor: usize,
    /// Always `"window-then-downsample"`.
    pub order: String,
    pub n_windows: usize,
    pub n_features: usize,
    pub column_names: Vec<String>,
    pub stats: Option<NormalizationStats>,
    pub labeled: bool,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub const PREPROCESSING_ORDER: &str = "window-then-downsample";

/// Writes `<stem>.csv` (one row per window row) and `<stem>.json`.
pub fn save_bundle(
    set: &WindowSet,
    column_names: &[String],
    stats: Option<&NormalizationStats>,
    config_hash: Option<&str>,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    let mut header = vec!["window".to_string(), "offset".into(), "step".into()];
    header.extend(column_names.iter().cloned());
    if set.labels.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (k, win) in set.windows.iter().enumerate() {
        for r in 0..win.rows() {
            let mut rec = vec![k.to_string(), set.source_offsets[k].to_string(), r.to_string()];
            rec.extend(win.row(r).iter().map(|v| v.to_string()));
            if let Some(l) = &set.labels {
                rec.push(l[k][r].to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let manifest = DatasetManifest {
        window_length: set.window_length,
        sequence_length: set.sequence_length,
        shift: set.shift,
        downsample_factor: set.downsample_factor,
        order: PREPROCESSING_ORDER.to_string(),
        n_windows: set.len(),
        n_features: set.n_features(),
        column_names: column_names.to_vec(),
        stats: stats.cloned(),
        labeled: set.labels.is_some(),
        config_hash: config_hash.map(str::to_string),
    };
    let json_path = dir.join(format!("{stem}.json"));
    fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&json_path, e))?;
    Ok(manifest)
}

pub fn load_bundle(dir: impl AsRef<Path>, stem: &str) -> Result<(WindowSet, DatasetManifest)> {
    let dir = dir.as_ref();
    let json_path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut rdr = csv::Reader::from_path(&csv_path)?;
    let n = manifest.n_features;
    let len = manifest.sequence_length;
    let mut windows = Vec::with_capacity(manifest.n_windows);
    let mut offsets = Vec::with_capacity(manifest.n_windows);
    let mut labels: Vec<Vec<u8>> = Vec::new();
    let mut cur = Vec::with_capacity(len * n);
    let mut cur_labels = Vec::with_capacity(len);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|_| Error::NonNumeric {
                row: row + 2,
                column: j.to_string(),
                value: rec[j].to_string(),
            })
        };
        if cur.is_empty() {
            offsets.push(parse(1)? as usize);
        }
        for j in 0..n {
            cur.push(parse(3 + j)?);
        }
        if manifest.labeled {
            cur_labels.push(parse(3 + n)? as u8);
        }
        if cur.len() == len * n {
            windows.push(Matrix::from_vec(len, n, std::mem::take(&mut cur))?);
            if manifest.labeled {
                labels.push(std::mem::take(&mut cur_labels));
            }
        }
    }
    if windows.len() != manifest.n_windows || !cur.is_empty() {
        return Err(Error::dims(format!(
            "bundle holds {} complete windows, manifest says {}",
            windows.len(),
            manifest.n_windows
        )));
    }
    let set = WindowSet {
        windows,
        window_length: manifest.window_length,
        sequence_length: manifest.sequence_length,
        shift: manifest.shift,
        downsample_factor: manifest.downsample_factor,
        source_offsets: offsets,
        labels: manifest.labeled.then_some(labels),
    };
    Ok((set, manifest))
}
