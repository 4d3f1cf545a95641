//! Dataset ingestion, feature scaling and train/test splits.
//!
//! Two text formats are supported: libsvm sparse lines (`label idx:val ...`,
//! 1-based indices) and delimited numeric tables. Both have writers that
//! round-trip bit-exactly through the matching parser.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use svrhmc_core::linalg::Matrix;

use crate::error::{HarnessError, Result};

/// Dense design matrix with one label or response per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    pub feature_names: Option<Vec<String>>,
    /// The scaling currently applied to `features` (and possibly `labels`).
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(HarnessError::Data("dataset needs at least one row and one column".into()));
        }
        if features.rows() != labels.len() {
            return Err(HarnessError::Data(format!(
                "{} rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if !features.as_slice().iter().chain(&labels).all(|v| v.is_finite()) {
            return Err(HarnessError::Data("non-finite value".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names: None,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// True when every label is -1 or +1.
    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&y| y == 1.0 || y == -1.0)
    }

    /// Rows in the order given by `indices`; the normalization record is kept.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        Dataset {
            features: Matrix::from_row_major(indices.len(), d, data).expect("row lengths match"),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            normalization: self.normalization.clone(),
        }
    }

    /// Appends a constant-one column.
    pub fn with_intercept(&self) -> Dataset {
        let (n, d) = (self.len(), self.dim());
        let mut data = Vec::with_capacity(n * (d + 1));
        for row in self.features.row_iter() {
            data.extend_from_slice(row);
            data.push(1.0);
        }
        let feature_names = self.feature_names.clone().map(|mut names| {
            names.push("intercept".into());
            names
        });
        Dataset {
            features: Matrix::from_row_major(n, d + 1, data).expect("row lengths match"),
            labels: self.labels.clone(),
            feature_names,
            normalization: None,
        }
    }
}

/// Reads a dataset from disk, choosing the parser from the content: a
/// second token of the form `idx:val` means libsvm, anything else is a
/// delimited table with the response in `response`.
pub fn load(path: &Path, response: ResponseColumn, delimiter: Option<Delimiter>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let looks_libsvm = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| l.split_whitespace().nth(1))
        .is_some_and(|t| t.contains(':'));
    let ds = if looks_libsvm {
        parse_libsvm(&text, None)?
    } else {
        parse_delimited(&text, response, delimiter)?
    };
    info!("{}: {} rows, {} features", path.display(), ds.len(), ds.dim());
    Ok(ds)
}

fn parse_number(token: &str) -> Option<f64> {
    // accept the typographic minus sign as well as '-'
    let v = if token.contains('\u{2212}') {
        token.replace('\u{2212}', "-").parse().ok()?
    } else {
        token.parse().ok()?
    };
    f64::is_finite(v).then_some(v)
}

/// Parses libsvm text. Whitespace-only lines are not rows; every other line
/// is a row or an error. `dim` overrides the inferred dimension (max index
/// seen) and must not be smaller than it.
///
/// Binary label sets `{0, 1}` and `{1, 2}` are mapped to `{-1, +1}`; other
/// label sets are kept as real responses.
pub fn parse_libsvm(text: &str, dim: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        let err = |message: String| HarnessError::Parse { line: line_no, message };
        let y = parse_number(label).ok_or_else(|| err(format!("bad label `{label}`")))?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| err(format!("expected index:value, got `{token}`")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("bad index `{idx}`")))?;
            if idx == 0 {
                return Err(err("indices are 1-based".into()));
            }
            if idx <= last {
                return Err(err(format!("index {idx} does not increase (previous {last})")));
            }
            let val = parse_number(val).ok_or_else(|| err(format!("bad value `{val}`")))?;
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        labels.push(y);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Data("no rows".into()));
    }
    let d = match dim {
        Some(d) if d < max_index => {
            return Err(HarnessError::Data(format!("dimension {d} is below the largest index {max_index}")))
        }
        Some(d) => d,
        None => max_index,
    };
    if d == 0 {
        return Err(HarnessError::Data("no features".into()));
    }
    let mut features = Matrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        let dst = features.row_mut(i);
        for &(j, v) in row {
            dst[j] = v;
        }
    }
    map_binary_labels(&mut labels);
    Dataset::new(features, labels)
}

fn map_binary_labels(labels: &mut [f64]) {
    let within = |set: [f64; 2]| labels.iter().all(|y| set.contains(y));
    let negative = if within([-1.0, 1.0]) {
        return;
    } else if within([0.0, 1.0]) {
        0.0
    } else if within([1.0, 2.0]) {
        1.0
    } else {
        return;
    };
    info!("mapping label {negative} to -1 and {} to +1", negative + 1.0);
    for y in labels.iter_mut() {
        *y = if *y == negative { -1.0 } else { 1.0 };
    }
}

/// Writes libsvm text. Zero entries are omitted except in the last column,
/// which is always written so the dimension survives the round trip.
pub fn to_libsvm(ds: &Dataset) -> String {
    let d = ds.dim();
    let mut out = String::new();
    for (row, y) in ds.features.row_iter().zip(&ds.labels) {
        write!(out, "{y}").unwrap();
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 || j + 1 == d {
                write!(out, " {}:{v}", j + 1).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Comma,
    Tab,
    Semicolon,
    /// Any run of spaces or tabs.
    Whitespace,
}

impl Delimiter {
    fn detect(line: &str) -> Self {
        if line.contains(',') {
            Delimiter::Comma
        } else if line.contains('\t') {
            Delimiter::Tab
        } else if line.contains(';') {
            Delimiter::Semicolon
        } else {
            Delimiter::Whitespace
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Semicolon => line.split(';').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Delimiter::Comma => ",",
            Delimiter::Tab => "\t",
            Delimiter::Semicolon => ";",
            Delimiter::Whitespace => " ",
        }
    }
}

impl FromStr for Delimiter {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comma" | "," => Ok(Delimiter::Comma),
            "tab" | "\t" => Ok(Delimiter::Tab),
            "semicolon" | ";" => Ok(Delimiter::Semicolon),
            "whitespace" | "space" | " " => Ok(Delimiter::Whitespace),
            _ => Err(HarnessError::Config(format!("unknown delimiter `{s}`"))),
        }
    }
}

/// Which column of a delimited table holds the response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseColumn {
    #[default]
    Last,
    /// 0-based.
    Index(usize),
}

impl FromStr for ResponseColumn {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "last" {
            return Ok(ResponseColumn::Last);
        }
        s.parse()
            .map(ResponseColumn::Index)
            .map_err(|_| HarnessError::Config(format!("response column must be `last` or a 0-based index, got `{s}`")))
    }
}

/// Parses a delimited numeric table. The delimiter is detected from the
/// first non-empty line unless given. If any cell of that line is not a
/// number it is taken as a header and its names kept.
pub fn parse_delimited(text: &str, response: ResponseColumn, delimiter: Option<Delimiter>) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).peekable();
    let Some(&(_, first)) = lines.peek() else {
        return Err(HarnessError::Data("no rows".into()));
    };
    let delimiter = delimiter.unwrap_or_else(|| Delimiter::detect(first));
    let width = delimiter.split(first).len();
    if width < 2 {
        return Err(HarnessError::Data("need at least one feature and one response column".into()));
    }
    let response_idx = match response {
        ResponseColumn::Last => width - 1,
        ResponseColumn::Index(j) if j < width => j,
        ResponseColumn::Index(j) => {
            return Err(HarnessError::Config(format!("response column {j} out of range for {width} columns")))
        }
    };

    let mut names = None;
    if delimiter.split(first).iter().any(|c| parse_number(c).is_none()) {
        let header: Vec<String> = delimiter.split(first).iter().map(|s| s.to_string()).collect();
        info!("skipping header row: {}", header.join(", "));
        names = Some(
            header
                .into_iter()
                .enumerate()
                .filter(|&(j, _)| j != response_idx)
                .map(|(_, s)| s)
                .collect::<Vec<_>>(),
        );
        lines.next();
    }

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (lineno, line) in lines {
        let cells = delimiter.split(line);
        if cells.len() != width {
            return Err(HarnessError::Parse {
                line: lineno + 1,
                message: format!("expected {width} columns, found {}", cells.len()),
            });
        }
        for (j, cell) in cells.iter().enumerate() {
            let v = parse_number(cell).ok_or_else(|| HarnessError::Cell {
                row: lineno + 1,
                column: j + 1,
                message: format!("not a finite number: `{cell}`"),
            })?;
            if j == response_idx {
                labels.push(v);
            } else {
                data.push(v);
            }
        }
    }
    let features = Matrix::from_row_major(labels.len(), width - 1, data)?;
    let mut ds = Dataset::new(features, labels)?;
    ds.feature_names = names;
    Ok(ds)
}

/// Writes a delimited table with the response as the last column, preceded
/// by a header when the dataset has feature names.
pub fn to_delimited(ds: &Dataset, delimiter: Delimiter) -> String {
    let sep = delimiter.as_str();
    let mut out = String::new();
    if let Some(names) = &ds.feature_names {
        out.push_str(&names.join(sep));
        out.push_str(sep);
        out.push_str("response\n");
    }
    for (row, y) in ds.features.row_iter().zip(&ds.labels) {
        for v in row {
            write!(out, "{v}{sep}").unwrap();
        }
        writeln!(out, "{y}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scaling {
    /// Mean 0, unit (population) standard deviation.
    #[default]
    Standardize,
    /// Column range mapped onto `[-1, 1]`.
    MinMax,
}

impl FromStr for Scaling {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standardize" | "zscore" => Ok(Scaling::Standardize),
            "minmax" => Ok(Scaling::MinMax),
            _ => Err(HarnessError::Config(format!("unknown scaling `{s}`"))),
        }
    }
}

/// Per-column affine map `x -> (x - shift) / scale`, fitted on one dataset
/// and applicable to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub method: Scaling,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    /// Columns with no spread; their scale is 1.
    pub constant_columns: Vec<usize>,
    /// `(shift, scale)` for the response, when it is scaled too.
    pub response: Option<(f64, f64)>,
}

fn column_stats(values: &[f64], method: Scaling) -> (f64, f64) {
    match method {
        Scaling::Standardize => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        Scaling::MinMax => {
            let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            ((hi + lo) / 2.0, (hi - lo) / 2.0)
        }
    }
}

impl Normalization {
    /// Fits column statistics. Needs at least two rows.
    pub fn fit(ds: &Dataset, method: Scaling, scale_response: bool) -> Result<Self> {
        if ds.len() < 2 {
            return Err(HarnessError::Data("normalization needs at least 2 rows".into()));
        }
        let d = ds.dim();
        let mut shift = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        let mut constant_columns = Vec::new();
        for j in 0..d {
            let (s, mut c) = column_stats(&ds.features.row_iter().map(|r| r[j]).collect::<Vec<_>>(), method);
            if !(c > 0.0) {
                warn!("column {j} has zero spread; left unscaled");
                constant_columns.push(j);
                c = 1.0;
            }
            shift.push(s);
            scale.push(c);
        }
        let response = scale_response.then(|| {
            let (s, c) = column_stats(&ds.labels, method);
            (s, if c > 0.0 { c } else { 1.0 })
        });
        Ok(Self {
            method,
            shift,
            scale,
            constant_columns,
            response,
        })
    }

    /// Applies the map to a dataset with raw values; the result carries this
    /// record.
    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.shift.len() {
            return Err(HarnessError::Data(format!(
                "normalization fitted on {} columns, data has {}",
                self.shift.len(),
                ds.dim()
            )));
        }
        let mut out = ds.clone();
        for i in 0..out.len() {
            for ((v, s), c) in out.features.row_mut(i).iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = (*v - s) / c;
            }
        }
        if let Some((s, c)) = self.response {
            for y in out.labels.iter_mut() {
                *y = (*y - s) / c;
            }
        }
        out.normalization = Some(self.clone());
        Ok(out)
    }

    /// Undoes [`Normalization::apply`]; the result has no record.
    pub fn invert(&self, ds: &Dataset) -> Dataset {
        let mut out = ds.clone();
        for i in 0..out.len() {
            for ((v, s), c) in out.features.row_mut(i).iter_mut().zip(&self.shift).zip(&self.scale) {
                *v = *v * c + s;
            }
        }
        if let Some((s, c)) = self.response {
            for y in out.labels.iter_mut() {
                *y = *y * c + s;
            }
        }
        out.normalization = None;
        out
    }
}

/// Standardizes every feature column with population statistics.
pub fn normalize(ds: &Dataset) -> Result<Dataset> {
    normalize_with(ds, Scaling::Standardize, false)
}

/// Scales features with `method`, and the response too if `scale_response`.
pub fn normalize_with(ds: &Dataset, method: Scaling, scale_response: bool) -> Result<Dataset> {
    Normalization::fit(ds, method, scale_response)?.apply(ds)
}

/// Seeded shuffle, then the first `round(fraction * n)` rows go to train.
///
/// If the dataset carries a normalization record, the scaling is refitted on
/// the raw training rows and applied to both sides, so the test rows never
/// influence the statistics.
pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::Config(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let n = ds.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(HarnessError::Data(format!(
            "split {fraction} of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at(n_train);

    match &ds.normalization {
        None => Ok((ds.select(train_idx), ds.select(test_idx))),
        Some(norm) => {
            let raw = norm.invert(ds);
            let train = raw.select(train_idx);
            let refit = Normalization::fit(&train, norm.method, norm.response.is_some())?;
            Ok((refit.apply(&train)?, refit.apply(&raw.select(test_idx))?))
        }
    }
}
