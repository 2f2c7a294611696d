//! Panel container, CSV ingestion and the preliminary transforms.

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

/// An N×T panel: row `i` is component `i`, column `t-1` is time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSeries<R: Real> {
    values: DMatrix<R>,
    labels: Vec<String>,
    time_origin: Option<String>,
}

impl<R: Real> MultiSeries<R> {
    pub fn new(values: DMatrix<R>, labels: Vec<String>) -> Result<Self> {
        let (n, t) = values.shape();
        if n < 1 || t < 2 {
            return Err(invalid(format!("panel must have N >= 1 and T >= 2, got {n}x{t}")));
        }
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} components", labels.len())));
        }
        for t_idx in 0..t {
            for i in 0..n {
                if !values[(i, t_idx)].is_finite() {
                    return Err(Error::Domain {
                        component: i + 1,
                        time: t_idx + 1,
                        msg: "non-finite value".into(),
                    });
                }
            }
        }
        Ok(Self { values, labels, time_origin: None })
    }

    /// Panel with generated labels `y1..yN`.
    pub fn from_matrix(values: DMatrix<R>) -> Result<Self> {
        let labels = default_labels(values.nrows());
        Self::new(values, labels)
    }

    /// Builds a panel from one slice per component.
    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("no components"));
        }
        let t = rows[0].len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != t) {
            return Err(Error::Ragged { row: i + 1, found: r.len(), expected: t });
        }
        Self::from_matrix(DMatrix::from_fn(rows.len(), t, |i, j| rows[i][j]))
    }

    pub fn with_time_origin(mut self, origin: impl Into<String>) -> Self {
        self.time_origin = Some(origin.into());
        self
    }

    /// Same labels and origin, new values of the same component count.
    pub fn with_values(&self, values: DMatrix<R>) -> Result<Self> {
        let mut out = Self::new(values, self.labels.clone())?;
        out.time_origin = self.time_origin.clone();
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn t_len(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<R> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<R> {
        self.values
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn time_origin(&self) -> Option<&str> {
        self.time_origin.as_deref()
    }

    /// Observation at 1-based time `t`.
    pub fn at(&self, t: usize) -> DVector<R> {
        assert!(t >= 1 && t <= self.t_len(), "time index {t} out of 1..={}", self.t_len());
        self.values.column(t - 1).into_owned()
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: R) -> Self {
        Self { values: &self.values * c, ..self.clone() }
    }

    /// Reorders components: output row `k` is input row `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(invalid("not a permutation of the component indices"));
        }
        let values = DMatrix::from_fn(n, self.t_len(), |k, t| self.values[(perm[k], t)]);
        let labels = perm.iter().map(|&p| self.labels[p].clone()).collect();
        Ok(Self { values, labels, time_origin: self.time_origin.clone() })
    }
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("y{i}")).collect()
}

/// Which CSV axis is time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Each CSV column is a component, rows are time points.
    #[default]
    ColumnsAreComponents,
    /// Each CSV row is a component, columns are time points.
    RowsAreComponents,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub delimiter: u8,
    /// First record holds names. With [`Orientation::ColumnsAreComponents`]
    /// they become the component labels; otherwise they are skipped.
    pub has_header: bool,
    pub orientation: Orientation,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { delimiter: b',', has_header: true, orientation: Orientation::ColumnsAreComponents }
    }
}

pub fn load_csv<R: Real>(path: impl AsRef<Path>, options: &CsvOptions) -> Result<MultiSeries<R>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    read_csv(file, options)
}

pub fn read_csv<R: Real, Rd: Read>(reader: Rd, options: &CsvOptions) -> Result<MultiSeries<R>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header: Option<Vec<String>> = if options.has_header {
        let h = rdr.headers().map_err(csv_err)?;
        Some(h.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut table: Vec<Vec<R>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec.position().map_or(table.len() + 1, |p| p.line() as usize);
        let expected = *width.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::Ragged { row, found: rec.len(), expected });
        }
        let mut parsed = Vec::with_capacity(rec.len());
        for (c, cell) in rec.iter().enumerate() {
            let col = c + 1;
            if cell.is_empty() {
                return Err(Error::Parse { row, col, msg: "blank cell".into() });
            }
            let v = R::from_str(cell)
                .map_err(|_| Error::Parse { row, col, msg: format!("not a number: {cell:?}") })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, col, msg: format!("non-finite value: {cell:?}") });
            }
            parsed.push(v);
        }
        table.push(parsed);
    }
    if table.is_empty() {
        return Err(invalid("CSV has no data rows"));
    }
    let (rows, cols) = (table.len(), table[0].len());
    match options.orientation {
        Orientation::RowsAreComponents => {
            MultiSeries::from_matrix(DMatrix::from_fn(rows, cols, |i, j| table[i][j]))
        }
        Orientation::ColumnsAreComponents => {
            let values = DMatrix::from_fn(cols, rows, |i, j| table[j][i]);
            let labels = header.unwrap_or_else(|| default_labels(cols));
            MultiSeries::new(values, labels)
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { row, col: 0, msg: e.to_string() }
}

/// Writes the panel so that [`load_csv`] with the same options reparses it to
/// an identical series. Values use the shortest round-trip representation.
pub fn write_csv<R: Real>(series: &MultiSeries<R>, path: impl AsRef<Path>, options: &CsvOptions) -> Result<()> {
    let path = path.as_ref();
    let io = |source| Error::Io { path: path.display().to_string(), source };
    let mut f = File::create(path).map_err(io)?;
    let mut buf = String::new();
    let d = (options.delimiter as char).to_string();
    let v = series.values();
    match options.orientation {
        Orientation::ColumnsAreComponents => {
            if options.has_header {
                buf.push_str(&series.labels().join(&d));
                buf.push('\n');
            }
            for t in 0..series.t_len() {
                let row: Vec<String> = (0..series.n()).map(|i| v[(i, t)].to_string()).collect();
                buf.push_str(&row.join(&d));
                buf.push('\n');
            }
        }
        Orientation::RowsAreComponents => {
            if options.has_header {
                let h: Vec<String> = (1..=series.t_len()).map(|t| format!("t{t}")).collect();
                buf.push_str(&h.join(&d));
                buf.push('\n');
            }
            for i in 0..series.n() {
                let row: Vec<String> = (0..series.t_len()).map(|t| v[(i, t)].to_string()).collect();
                buf.push_str(&row.join(&d));
                buf.push('\n');
            }
        }
    }
    f.write_all(buf.as_bytes()).map_err(io)
}

/// Per-component preliminary transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    #[default]
    None,
    /// First difference.
    Diff,
    /// First difference of the natural log.
    LogDiff,
    /// Second difference of the natural log.
    DoubleLogDiff,
}

impl TransformKind {
    /// Number of leading observations consumed.
    pub fn order(self) -> usize {
        match self {
            Self::None => 0,
            Self::Diff | Self::LogDiff => 1,
            Self::DoubleLogDiff => 2,
        }
    }

    fn takes_log(self) -> bool {
        matches!(self, Self::LogDiff | Self::DoubleLogDiff)
    }
}

impl FromStr for TransformKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "level" | "" => Ok(Self::None),
            "diff" | "d" => Ok(Self::Diff),
            "log-diff" | "dlog" | "dln" => Ok(Self::LogDiff),
            "double-log-diff" | "d2log" | "d2ln" => Ok(Self::DoubleLogDiff),
            other => Err(invalid(format!("unknown transform {other:?}"))),
        }
    }
}

/// Parses a comma-separated transform list. A single entry applies to all
/// `n` components.
pub fn parse_transform_list(spec: &str, n: usize) -> Result<Vec<TransformKind>> {
    let kinds = spec.split(',').map(TransformKind::from_str).collect::<Result<Vec<_>>>()?;
    match kinds.len() {
        1 => Ok(vec![kinds[0]; n]),
        k if k == n => Ok(kinds),
        k => Err(Error::Dimension(format!("{k} transforms for {n} components"))),
    }
}

/// Applies one transform per component. Components with lower order are
/// truncated from the front so all rows end at the same date.
pub fn apply_transform<R: Real>(series: &MultiSeries<R>, spec: &[TransformKind]) -> Result<MultiSeries<R>> {
    let (n, t) = (series.n(), series.t_len());
    if spec.len() != n {
        return Err(Error::Dimension(format!("{} transforms for {n} components", spec.len())));
    }
    let max_order = spec.iter().map(|k| k.order()).max().unwrap_or(0);
    if t < max_order + 2 {
        return Err(Error::InsufficientData(format!("T = {t} too short for transform order {max_order}")));
    }
    let out_len = t - max_order;
    let v = series.values();
    let mut out = DMatrix::zeros(n, out_len);
    for (i, kind) in spec.iter().enumerate() {
        let mut row: Vec<R> = (0..t).map(|s| v[(i, s)]).collect();
        if kind.takes_log() {
            for (s, x) in row.iter_mut().enumerate() {
                if *x <= R::zero() {
                    return Err(Error::Domain {
                        component: i + 1,
                        time: s + 1,
                        msg: format!("log of non-positive value {x}"),
                    });
                }
                *x = x.ln();
            }
        }
        for _ in 0..kind.order() {
            row = row.windows(2).map(|w| w[1] - w[0]).collect();
        }
        let skip = row.len() - out_len;
        for (s, x) in row[skip..].iter().enumerate() {
            out[(i, s)] = *x;
        }
    }
    series.with_values(out)
}

/// Subtracts the row means. Returns the centered panel and the means.
pub fn center<R: Real>(series: &MultiSeries<R>) -> (MultiSeries<R>, DVector<R>) {
    let mean = row_means(series.values());
    let mut values = series.values().clone();
    for mut col in values.column_iter_mut() {
        col -= &mean;
    }
    let out = MultiSeries { values, ..series.clone() };
    (out, mean)
}

pub(crate) fn row_means<R: Real>(m: &DMatrix<R>) -> DVector<R> {
    let t = R::count(m.ncols());
    m.column_sum() / t
}

/// Replaces the observation at 1-based time `t0`.
pub fn replace_at<R: Real>(series: &MultiSeries<R>, t0: usize, value: &DVector<R>) -> Result<MultiSeries<R>> {
    if t0 < 1 || t0 > series.t_len() {
        return Err(invalid(format!("time index {t0} outside 1..={}", series.t_len())));
    }
    if value.len() != series.n() {
        return Err(Error::Dimension(format!("value has {} entries, panel has {}", value.len(), series.n())));
    }
    if value.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain { component: 0, time: t0, msg: "non-finite replacement".into() });
    }
    let mut values = series.values.clone();
    values.set_column(t0 - 1, value);
    Ok(MultiSeries { values, ..series.clone() })
}

/// JSON sidecar that travels with a CSV file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub labels: Vec<String>,
    #[serde(default)]
    pub transforms: Vec<TransformKind>,
    #[serde(default)]
    pub time_origin: Option<String>,
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<SeriesMeta> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_reader(file).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn write_sidecar(path: impl AsRef<Path>, meta: &SeriesMeta) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(meta).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

impl<R: Real> MultiSeries<R> {
    /// Applies labels and origin from a sidecar.
    pub fn with_meta(mut self, meta: &SeriesMeta) -> Result<Self> {
        if !meta.labels.is_empty() {
            if meta.labels.len() != self.n() {
                return Err(Error::Dimension(format!("sidecar has {} labels for {} components", meta.labels.len(), self.n())));
            }
            self.labels = meta.labels.clone();
        }
        if meta.time_origin.is_some() {
            self.time_origin = meta.time_origin.clone();
        }
        Ok(self)
    }
}
