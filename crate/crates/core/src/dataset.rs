//! Cyclic input/angle datasets: CSV ingestion, validation, branch splitting
//! and the train/test partition.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::linalg::Point;

/// Header of the dataset CSV schema.
pub const CSV_HEADER: &str = "cycle_id,step_index,q,gamma";

/// Moving-average window used when locating the turning point of a cycle.
pub const TURNING_POINT_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: field `{column}` is not numeric: {value:?}")]
    NonNumericField { line: u64, column: &'static str, value: String },
    #[error("ragged cycles: {0}")]
    RaggedCycles(String),
    #[error("cycle {cycle_id}: step_index {step_index} is not strictly increasing")]
    NonIncreasingStep { cycle_id: u32, step_index: u32 },
    #[error("q = {q} outside [{q_min}, {q_max}] (cycle {cycle_id}, step {step_index})")]
    OutOfBounds { q: f64, q_min: f64, q_max: f64, cycle_id: u32, step_index: u32 },
    #[error("invalid bounds [{0}, {1}]")]
    InvalidBounds(f64, f64),
    #[error("cycle {cycle_id}: {changes} direction reversals, expected at most one")]
    MultipleTurningPoints { cycle_id: u32, changes: usize },
    #[error("invalid split: {train} training cycles out of {total}")]
    InvalidSplit { train: usize, total: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub cycle_id: u32,
    pub step_index: u32,
    /// Control input.
    pub q: f64,
    /// Bending angle in degrees.
    pub gamma: f64,
}

impl Sample {
    pub fn point(&self) -> Point {
        [self.q, self.gamma]
    }
}

/// Direction of the control input when a sample was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BranchLabel {
    /// Increasing input (cw).
    Ascending,
    /// Decreasing input (ccw).
    Descending,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub sample: Sample,
    pub label: BranchLabel,
}

/// Samples of every cycle partitioned by branch.
#[derive(Debug, Clone, Default)]
pub struct BranchSplit {
    pub ascending: Vec<LabeledSample>,
    pub descending: Vec<LabeledSample>,
}

impl BranchSplit {
    pub fn ascending_points(&self) -> Vec<Point> {
        self.ascending.iter().map(|s| s.sample.point()).collect()
    }

    pub fn descending_points(&self) -> Vec<Point> {
        self.descending.iter().map(|s| s.sample.point()).collect()
    }
}

/// Validated reciprocating-cycle dataset: `cycles × points_per_cycle`
/// samples sorted by `(cycle_id, step_index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleDataset {
    samples: Vec<Sample>,
    cycles: usize,
    points_per_cycle: usize,
    q_min: f64,
    q_max: f64,
}

impl CycleDataset {
    pub fn new(mut samples: Vec<Sample>, q_min: f64, q_max: f64) -> Result<Self, DatasetError> {
        if !(q_min.is_finite() && q_max.is_finite() && q_min < q_max) {
            return Err(DatasetError::InvalidBounds(q_min, q_max));
        }
        samples.sort_by_key(|s| (s.cycle_id, s.step_index));

        let mut lengths: BTreeMap<u32, usize> = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            if !(s.q >= q_min && s.q <= q_max) {
                return Err(DatasetError::OutOfBounds {
                    q: s.q,
                    q_min,
                    q_max,
                    cycle_id: s.cycle_id,
                    step_index: s.step_index,
                });
            }
            if i > 0 {
                let prev = &samples[i - 1];
                if prev.cycle_id == s.cycle_id && prev.step_index >= s.step_index {
                    return Err(DatasetError::NonIncreasingStep {
                        cycle_id: s.cycle_id,
                        step_index: s.step_index,
                    });
                }
            }
            *lengths.entry(s.cycle_id).or_default() += 1;
        }

        let Some(&points_per_cycle) = lengths.values().next() else {
            return Err(DatasetError::RaggedCycles("dataset contains no cycles".into()));
        };
        if let Some((id, len)) = lengths.iter().find(|(_, &len)| len != points_per_cycle) {
            return Err(DatasetError::RaggedCycles(format!(
                "cycle {id} has {len} samples, expected {points_per_cycle}"
            )));
        }

        Ok(CycleDataset { cycles: lengths.len(), points_per_cycle, samples, q_min, q_max })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn cycles(&self) -> usize {
        self.cycles
    }

    pub fn points_per_cycle(&self) -> usize {
        self.points_per_cycle
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    /// All samples as joint `(q, gamma)` points.
    pub fn points(&self) -> Vec<Point> {
        self.samples.iter().map(Sample::point).collect()
    }

    /// Iterator over the per-cycle sample slices, in `cycle_id` order.
    pub fn cycle_slices(&self) -> impl Iterator<Item = &[Sample]> {
        self.samples.chunks(self.points_per_cycle)
    }

    /// Splits every cycle at its turning point.
    ///
    /// The turning point is the argmax of a centered moving average (window
    /// [`TURNING_POINT_WINDOW`]) of `q`; labels are assigned on the raw
    /// indices, with the turning sample itself labeled ascending.
    pub fn split_cycles(&self) -> Result<BranchSplit, DatasetError> {
        let mut split = BranchSplit::default();
        for cycle in self.cycle_slices() {
            let q: Vec<f64> = cycle.iter().map(|s| s.q).collect();
            let smoothed = moving_average(&q, TURNING_POINT_WINDOW);
            let changes = direction_changes(&smoothed);
            if changes > 1 {
                return Err(DatasetError::MultipleTurningPoints { cycle_id: cycle[0].cycle_id, changes });
            }
            let turn = argmax(&smoothed);
            if turn + 1 == cycle.len() {
                log::warn!("cycle {} has no descending half", cycle[0].cycle_id);
            }
            for (i, s) in cycle.iter().enumerate() {
                if i <= turn {
                    split.ascending.push(LabeledSample { sample: *s, label: BranchLabel::Ascending });
                } else {
                    split.descending.push(LabeledSample { sample: *s, label: BranchLabel::Descending });
                }
            }
        }
        Ok(split)
    }

    /// First `train_cycles` cycles (by id) for training, the rest for test.
    pub fn train_test_split(&self, train_cycles: usize) -> Result<(CycleDataset, CycleDataset), DatasetError> {
        if train_cycles == 0 || train_cycles >= self.cycles {
            return Err(DatasetError::InvalidSplit { train: train_cycles, total: self.cycles });
        }
        let cut = train_cycles * self.points_per_cycle;
        let part = |samples: &[Sample], cycles: usize| CycleDataset {
            samples: samples.to_vec(),
            cycles,
            points_per_cycle: self.points_per_cycle,
            q_min: self.q_min,
            q_max: self.q_max,
        };
        Ok((part(&self.samples[..cut], train_cycles), part(&self.samples[cut..], self.cycles - train_cycles)))
    }

    /// Renders the dataset in the CSV schema (LF line endings, shortest
    /// round-trip decimal representation).
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{},{}", s.cycle_id, s.step_index, s.q, s.gamma);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        crate::io::write_atomic(path.as_ref(), self.to_csv_string().as_bytes())?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R, q_min: f64, q_max: f64) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &'static str| {
            headers.iter().position(|h| h == name).ok_or(DatasetError::MissingColumn(name))
        };
        let idx = [column("cycle_id")?, column("step_index")?, column("q")?, column("gamma")?];

        let mut samples = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |i: usize, name: &'static str| -> Result<&str, DatasetError> {
                record.get(idx[i]).ok_or_else(|| DatasetError::NonNumericField {
                    line,
                    column: name,
                    value: String::new(),
                })
            };
            let int = |i: usize, name: &'static str| -> Result<u32, DatasetError> {
                let raw = field(i, name)?;
                raw.parse().map_err(|_| DatasetError::NonNumericField { line, column: name, value: raw.into() })
            };
            let float = |i: usize, name: &'static str| -> Result<f64, DatasetError> {
                let raw = field(i, name)?;
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(DatasetError::NonNumericField { line, column: name, value: raw.into() }),
                }
            };
            samples.push(Sample {
                cycle_id: int(0, "cycle_id")?,
                step_index: int(1, "step_index")?,
                q: float(2, "q")?,
                gamma: float(3, "gamma")?,
            });
        }
        CycleDataset::new(samples, q_min, q_max)
    }
}

/// Reads and validates a dataset CSV.
pub fn load_csv(path: impl AsRef<Path>, q_min: f64, q_max: f64) -> Result<CycleDataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    CycleDataset::from_csv_reader(std::io::BufReader::new(file), q_min, q_max)
}

/// Centered moving average; the window shrinks symmetrically at the edges.
fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let reach = half.min(i).min(n - 1 - i);
            let slice = &values[i - reach..=i + reach];
            slice.iter().sum::<f64>() / slice.len() as f64
        })
        .collect()
}

fn direction_changes(values: &[f64]) -> usize {
    let mut last = 0i8;
    let mut changes = 0;
    for w in values.windows(2) {
        let d = w[1] - w[0];
        let sign = if d > 0.0 {
            1
        } else if d < 0.0 {
            -1
        } else {
            0
        };
        if sign != 0 {
            if last != 0 && sign != last {
                changes += 1;
            }
            last = sign;
        }
    }
    changes
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
