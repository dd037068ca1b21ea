//! Dataset ingestion and sample generation: benchmark-style CSV loading,
//! chronological train/val/test splits (ETT border convention or 7:1:2
//! ratios), stride-1 sliding windows over z-scored segments, and a seeded
//! synthetic periodic generator for desk-scale experiments.
//!
//! Normalization statistics always come from the train slice alone; val and
//! test segments are prepended with `input_len` rows of context so the first
//! forecast target sits exactly on the split boundary.

use std::path::Path;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A parsed table: `total_t` rows by `n_vars` numeric columns.
#[derive(Debug)]
pub struct SeriesTable {
    pub timestamps: Option<Vec<String>>,
    pub columns: Vec<String>,
    values: Vec<f64>, // row-major [total_t, n_vars]
    pub total_t: usize,
    pub n_vars: usize,
}

impl SeriesTable {
    pub fn new(columns: Vec<String>, values: Vec<f64>, timestamps: Option<Vec<String>>) -> SeriesTable {
        let n_vars = columns.len();
        assert!(n_vars > 0 && values.len() % n_vars == 0, "ragged table");
        let total_t = values.len() / n_vars;
        SeriesTable {
            timestamps,
            columns,
            values,
            total_t,
            n_vars,
        }
    }

    pub fn value(&self, t: usize, var: usize) -> f64 {
        self.values[t * self.n_vars + var]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_vars..(t + 1) * self.n_vars]
    }
}

/// Load a benchmark-style CSV: header line, optional leading date column,
/// numeric columns after it. Any unparseable or non-finite cell fails
/// ingestion with its row and column.
pub fn load_csv(path: &Path) -> Result<SeriesTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))?;
    let header_cells: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_cells.is_empty() {
        return Err(Error::Data(format!("{}: empty header", path.display())));
    }

    let rows: Vec<&str> = lines.collect();
    if rows.is_empty() {
        return Err(Error::Data(format!(
            "{}: header only, no data rows",
            path.display()
        )));
    }

    // a leading date column is detected from the data, not the header
    let first_cell = rows[0].split(',').next().unwrap_or("").trim();
    let has_date = first_cell.parse::<f64>().is_err();
    let skip = usize::from(has_date);
    let columns: Vec<String> = header_cells[skip..].iter().map(|s| s.to_string()).collect();
    if columns.is_empty() {
        return Err(Error::Data(format!(
            "{}: no numeric columns after the date column",
            path.display()
        )));
    }

    let mut values = Vec::with_capacity(rows.len() * columns.len());
    let mut timestamps = has_date.then(|| Vec::with_capacity(rows.len()));
    for (r, line) in rows.iter().enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() + skip {
            return Err(Error::Data(format!(
                "{}: row {} has {} cells, expected {}",
                path.display(),
                r + 1,
                cells.len(),
                columns.len() + skip
            )));
        }
        if let Some(ts) = timestamps.as_mut() {
            ts.push(cells[0].to_string());
        }
        for (c, cell) in cells[skip..].iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: row {}, column {} ({:?}) is not numeric: {:?}",
                    path.display(),
                    r + 1,
                    c + skip + 1,
                    columns[c],
                    cell
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "{}: row {}, column {} ({:?}) is not finite",
                    path.display(),
                    r + 1,
                    c + skip + 1,
                    columns[c]
                )));
            }
            values.push(v);
        }
    }
    Ok(SeriesTable::new(columns, values, timestamps))
}

/// Write a table back out in the same format (used for fixtures).
pub fn write_csv(table: &SeriesTable, path: &Path) -> Result<()> {
    let mut out = String::new();
    if table.timestamps.is_some() {
        out.push_str("date,");
    }
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for t in 0..table.total_t {
        if let Some(ts) = &table.timestamps {
            out.push_str(&ts[t]);
            out.push(',');
        }
        let row: Vec<String> = table.row(t).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DatasetKind {
    /// ETT hourly convention: 12/4/4 months of hourly rows (8640/2880/2880).
    EttHour,
    /// ETT 15-minute convention: four times the hourly borders.
    EttMinute,
    /// Chronological 0.7 / 0.1 / 0.2 split.
    Ratio,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Result<DatasetKind> {
        match s {
            "etth" | "ett_hour" => Ok(DatasetKind::EttHour),
            "ettm" | "ett_minute" => Ok(DatasetKind::EttMinute),
            "ratio" => Ok(DatasetKind::Ratio),
            other => Err(Error::Config(format!(
                "unknown dataset kind {other:?} (expected etth, ettm, or ratio)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::EttHour => "etth",
            DatasetKind::EttMinute => "ettm",
            DatasetKind::Ratio => "ratio",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

/// Segment boundaries (val/test prepend `input_len` rows of context) plus
/// train-slice normalization statistics.
pub struct SplitSpec {
    pub train: (usize, usize),
    pub val: (usize, usize),
    pub test: (usize, usize),
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub input_len: usize,
    pub horizon: usize,
}

impl SplitSpec {
    pub fn segment(&self, name: SplitName) -> (usize, usize) {
        match name {
            SplitName::Train => self.train,
            SplitName::Val => self.val,
            SplitName::Test => self.test,
        }
    }
}

pub fn split(
    table: &SeriesTable,
    kind: DatasetKind,
    input_len: usize,
    horizon: usize,
) -> Result<SplitSpec> {
    let len = table.total_t;
    let (train_end, val_end, test_end) = match kind {
        DatasetKind::EttHour => (8640, 11520, 14400),
        DatasetKind::EttMinute => (34560, 46080, 57600),
        DatasetKind::Ratio => {
            let train = (len as f64 * 0.7) as usize;
            let val = (len as f64 * 0.8) as usize;
            (train, val, len)
        }
    };
    if len < test_end {
        return Err(Error::Data(format!(
            "table has {len} rows, the {} convention needs {test_end}",
            kind.name()
        )));
    }
    if train_end < input_len {
        return Err(Error::Data("train segment shorter than the input window".into()));
    }
    let spec = SplitSpec {
        train: (0, train_end),
        val: (train_end - input_len, val_end),
        test: (val_end - input_len, test_end),
        mean: vec![0.0; table.n_vars],
        std: vec![1.0; table.n_vars],
        input_len,
        horizon,
    };
    for (name, (start, end)) in [
        ("train", spec.train),
        ("val", spec.val),
        ("test", spec.test),
    ] {
        if end - start < input_len + horizon {
            return Err(Error::Data(format!(
                "{name} segment of {} rows cannot hold one window of {} + {}",
                end - start,
                input_len,
                horizon
            )));
        }
    }

    // z-scoring statistics from the train slice only
    let mut spec = spec;
    for var in 0..table.n_vars {
        let mut sum = 0.0;
        for t in 0..train_end {
            sum += table.value(t, var);
        }
        let mean = sum / train_end as f64;
        let mut ss = 0.0;
        for t in 0..train_end {
            ss += (table.value(t, var) - mean).powi(2);
        }
        let std = (ss / train_end as f64).sqrt();
        spec.mean[var] = mean;
        spec.std[var] = if std < 1e-8 { 1.0 } else { std };
    }
    Ok(spec)
}

/// Stride-1 sliding windows over one z-scored segment.
pub struct WindowSet {
    data: Rc<Vec<f64>>, // [seg_len, n_vars]
    pub seg_len: usize,
    pub n_vars: usize,
    pub input_len: usize,
    pub horizon: usize,
}

impl WindowSet {
    pub fn count(&self) -> usize {
        self.seg_len - self.input_len - self.horizon + 1
    }

    /// (input [T,N], target [H,N]) as flat rows for window `i`.
    pub fn window(&self, i: usize) -> (&[f64], &[f64]) {
        assert!(i < self.count(), "window {i} out of range");
        let n = self.n_vars;
        let in_start = i * n;
        let tgt_start = (i + self.input_len) * n;
        (
            &self.data[in_start..in_start + self.input_len * n],
            &self.data[tgt_start..tgt_start + self.horizon * n],
        )
    }

    /// Assemble a batch `([B,T,N], [B,H,N])` from window indices.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let b = indices.len();
        let n = self.n_vars;
        let mut xs = Vec::with_capacity(b * self.input_len * n);
        let mut ys = Vec::with_capacity(b * self.horizon * n);
        for &i in indices {
            let (x, y) = self.window(i);
            xs.extend_from_slice(x);
            ys.extend_from_slice(y);
        }
        (
            Tensor::new(xs, &[b, self.input_len, n]),
            Tensor::new(ys, &[b, self.horizon, n]),
        )
    }
}

/// Windows for one split, z-scored with the split's train statistics.
pub fn windows(table: &SeriesTable, spec: &SplitSpec, name: SplitName) -> Result<WindowSet> {
    let (start, end) = spec.segment(name);
    segment_windows(table, spec, start, end)
}

fn segment_windows(
    table: &SeriesTable,
    spec: &SplitSpec,
    start: usize,
    end: usize,
) -> Result<WindowSet> {
    let seg_len = end - start;
    if seg_len < spec.input_len + spec.horizon {
        return Err(Error::Data(format!(
            "segment of {seg_len} rows cannot hold one window of {} + {}",
            spec.input_len, spec.horizon
        )));
    }
    let n = table.n_vars;
    let mut data = Vec::with_capacity(seg_len * n);
    for t in start..end {
        for var in 0..n {
            data.push((table.value(t, var) - spec.mean[var]) / spec.std[var]);
        }
    }
    Ok(WindowSet {
        data: Rc::new(data),
        seg_len,
        n_vars: n,
        input_len: spec.input_len,
        horizon: spec.horizon,
    })
}

/// Batch index order for one epoch: shuffled with the given seed for
/// training, sequential otherwise. The final partial batch is kept.
pub fn epoch_batches(count: usize, batch_size: usize, shuffle_seed: Option<u64>) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut indices: Vec<usize> = (0..count).collect();
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
    }
    indices.chunks(batch_size).map(|c| c.to_vec()).collect()
}

/// Synthetic periodic table: per variable, a sinusoid at `period`, a slow
/// linear trend, and Gaussian noise. Fully determined by the seed.
pub fn synth_periodic(
    n_vars: usize,
    total_t: usize,
    period: usize,
    phase_jitter: f64,
    noise_std: f64,
    seed: u64,
) -> SeriesTable {
    assert!(n_vars >= 1 && total_t >= 1 && period >= 1, "synth dims must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut amps = Vec::with_capacity(n_vars);
    let mut phases = Vec::with_capacity(n_vars);
    let mut slopes = Vec::with_capacity(n_vars);
    let mut offsets = Vec::with_capacity(n_vars);
    for _ in 0..n_vars {
        amps.push(rng.gen_range(0.8..1.4));
        phases.push(phase_jitter * rng.gen_range(0.0..period as f64));
        slopes.push(rng.gen_range(-0.002..0.002));
        offsets.push(rng.gen_range(-0.5..0.5));
    }
    let mut values = Vec::with_capacity(total_t * n_vars);
    for t in 0..total_t {
        for j in 0..n_vars {
            let angle = 2.0 * std::f64::consts::PI * (t as f64 + phases[j]) / period as f64;
            let noise = if noise_std > 0.0 {
                noise_std * normal.sample(&mut rng)
            } else {
                0.0
            };
            values.push(offsets[j] + amps[j] * angle.sin() + slopes[j] * t as f64 + noise);
        }
    }
    let columns = (0..n_vars).map(|j| format!("var{j}")).collect();
    let timestamps = (0..total_t).map(|t| format!("t{t:06}")).collect();
    SeriesTable::new(columns, values, Some(timestamps))
}
