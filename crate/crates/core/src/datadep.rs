//! Data-dependent read/write current.
//!
//! The current drawn during a burst is linear in the number of ones in the
//! cache line and in the number of bits that toggle relative to the previous
//! transfer:
//!
//! ```text
//! I = i_zero + d_one * n_ones + d_toggle * n_toggles      (mA)
//! ```
//!
//! A separate parameter triple exists for each direction and interleave class.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram_state::InterleaveClass;
use crate::regression::{self, RegressionError};
use crate::trace::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataDepParams {
    /// Current with an all-zero line and no toggling.
    pub i_zero_ma: f64,
    /// Additional current per `1` bit in the line.
    pub d_one_ma: f64,
    /// Additional current per toggled bit.
    pub d_toggle_ma: f64,
}

impl DataDepParams {
    pub const fn new(i_zero_ma: f64, d_one_ma: f64, d_toggle_ma: f64) -> Self {
        DataDepParams { i_zero_ma, d_one_ma, d_toggle_ma }
    }

    /// Constant current, independent of data.
    pub const fn flat(i_ma: f64) -> Self {
        DataDepParams::new(i_ma, 0.0, 0.0)
    }
}

impl fmt::Display for DataDepParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "i_zero={} mA, d_one={} mA/bit, d_toggle={} mA/bit",
            self.i_zero_ma, self.d_one_ma, self.d_toggle_ma
        )
    }
}

/// Counts may be fractional so that expected values from a data
/// distribution can be fed in directly.
pub fn eval_current(p: &DataDepParams, n_ones: f64, n_toggles: f64) -> f64 {
    p.i_zero_ma + p.d_one_ma * n_ones + p.d_toggle_ma * n_toggles
}

/// One parameter triple per interleave class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    pub no_interleave: DataDepParams,
    pub column_only: DataDepParams,
    pub bank_only: DataDepParams,
    pub bank_and_column: DataDepParams,
}

impl ClassParams {
    pub fn uniform(p: DataDepParams) -> Self {
        ClassParams { no_interleave: p, column_only: p, bank_only: p, bank_and_column: p }
    }

    pub fn get(&self, class: InterleaveClass) -> &DataDepParams {
        match class {
            InterleaveClass::NoInterleave => &self.no_interleave,
            InterleaveClass::ColumnOnly => &self.column_only,
            InterleaveClass::BankOnly => &self.bank_only,
            InterleaveClass::BankAndColumn => &self.bank_and_column,
        }
    }

    pub fn get_mut(&mut self, class: InterleaveClass) -> &mut DataDepParams {
        match class {
            InterleaveClass::NoInterleave => &mut self.no_interleave,
            InterleaveClass::ColumnOnly => &mut self.column_only,
            InterleaveClass::BankOnly => &mut self.bank_only,
            InterleaveClass::BankAndColumn => &mut self.bank_and_column,
        }
    }
}

/// Parameters for every (direction, interleave class) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataDepTable {
    pub read: ClassParams,
    pub write: ClassParams,
}

impl DataDepTable {
    pub fn get(&self, dir: Direction, class: InterleaveClass) -> &DataDepParams {
        match dir {
            Direction::Read => self.read.get(class),
            Direction::Write => self.write.get(class),
        }
    }

    pub fn get_mut(&mut self, dir: Direction, class: InterleaveClass) -> &mut DataDepParams {
        match dir {
            Direction::Read => self.read.get_mut(class),
            Direction::Write => self.write.get_mut(class),
        }
    }

    /// All eight entries in (direction, class) order.
    pub fn entries(&self) -> impl Iterator<Item = (Direction, InterleaveClass, &DataDepParams)> {
        [Direction::Read, Direction::Write].into_iter().flat_map(move |d| {
            InterleaveClass::ALL.into_iter().map(move |c| (d, c, self.get(d, c)))
        })
    }

    /// Violations of `i_zero > 0` and the slope sign conventions
    /// (reads: `d_one >= 0`, writes: `d_one <= 0`).
    pub fn sign_issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (dir, class, p) in self.entries() {
            let tag = format!("{}.{class}", dir_name(dir));
            if !(p.i_zero_ma > 0.0) {
                out.push(format!("{tag}: i_zero_ma must be > 0"));
            }
            match dir {
                Direction::Read if p.d_one_ma < 0.0 => out.push(format!("{tag}: read d_one_ma must be >= 0")),
                Direction::Write if p.d_one_ma > 0.0 => out.push(format!("{tag}: write d_one_ma must be <= 0")),
                _ => {}
            }
            if !p.d_one_ma.is_finite() || !p.d_toggle_ma.is_finite() {
                out.push(format!("{tag}: non-finite slope"));
            }
        }
        out
    }
}

pub(crate) fn dir_name(dir: Direction) -> &'static str {
    match dir {
        Direction::Read => "read",
        Direction::Write => "write",
    }
}

/// One calibration measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub n_ones: f64,
    pub n_toggles: f64,
    pub current_ma: f64,
}

impl Sample {
    pub fn new(n_ones: f64, n_toggles: f64, current_ma: f64) -> Self {
        Sample { n_ones, n_toggles, current_ma }
    }
}

/// Which slopes a fit estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMode {
    #[default]
    Full,
    /// `d_toggle` pinned to zero (e.g. no-interleave loops never toggle).
    OnesOnly,
    /// `d_one` pinned to zero.
    TogglesOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples do not vary independently in the fitted regressors (rank deficient)")]
    RankDeficient,
    #[error("non-finite sample value")]
    NonFinite,
}

impl From<RegressionError> for FitError {
    fn from(e: RegressionError) -> Self {
        match e {
            RegressionError::TooFewSamples { needed, got } => FitError::TooFewSamples { needed, got },
            RegressionError::RankDeficient => FitError::RankDeficient,
            RegressionError::NonFinite | RegressionError::LengthMismatch => FitError::NonFinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub params: DataDepParams,
    pub r_squared: f64,
}

/// Ordinary least squares of current against ones and toggle counts.
pub fn fit_params(samples: &[Sample], mode: FitMode) -> Result<Fit, FitError> {
    if samples.len() < 3 {
        return Err(FitError::TooFewSamples { needed: 3, got: samples.len() });
    }
    let ones: Vec<f64> = samples.iter().map(|s| s.n_ones).collect();
    let toggles: Vec<f64> = samples.iter().map(|s| s.n_toggles).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.current_ma).collect();

    let (params, r_squared) = match mode {
        FitMode::Full => {
            let f = regression::fit_plane(&ones, &toggles, &ys)?;
            (DataDepParams::new(f.intercept, f.slope_a, f.slope_b), f.r_squared)
        }
        FitMode::OnesOnly => {
            let f = regression::fit_line(&ones, &ys)?;
            (DataDepParams::new(f.intercept, f.slope, 0.0), f.r_squared)
        }
        FitMode::TogglesOnly => {
            let f = regression::fit_line(&toggles, &ys)?;
            (DataDepParams::new(f.intercept, 0.0, f.slope), f.r_squared)
        }
    };
    Ok(Fit { params, r_squared })
}

/// Absolute percent error of a parameter set against measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentError {
    pub max_pct: f64,
    pub mean_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PercentErrorError {
    #[error("no samples")]
    Empty,
    #[error("sample {index} has non-positive measured current {value}")]
    NonPositive { index: usize, value: f64 },
}

pub fn model_percent_error(p: &DataDepParams, samples: &[Sample]) -> Result<PercentError, PercentErrorError> {
    if samples.is_empty() {
        return Err(PercentErrorError::Empty);
    }
    let mut max_pct: f64 = 0.0;
    let mut sum = 0.0;
    for (index, s) in samples.iter().enumerate() {
        if !(s.current_ma > 0.0) {
            return Err(PercentErrorError::NonPositive { index, value: s.current_ma });
        }
        let pct = (eval_current(p, s.n_ones, s.n_toggles) - s.current_ma).abs() / s.current_ma * 100.0;
        max_pct = max_pct.max(pct);
        sum += pct;
    }
    Ok(PercentError { max_pct, mean_pct: sum / samples.len() as f64 })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleCsvError {
    #[error("line {line}: expected header `n_ones,n_toggles,current_ma`")]
    Header { line: usize },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

pub const SAMPLE_CSV_HEADER: &str = "n_ones,n_toggles,current_ma";

/// Reads calibration samples: header `n_ones,n_toggles,current_ma`, one
/// sample per line. `#` comments and blank lines are skipped.
pub fn parse_samples_csv(text: &str) -> Result<Vec<Sample>, SampleCsvError> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match rows.next() {
        Some((_, h)) if h.replace(' ', "") == SAMPLE_CSV_HEADER => {}
        Some((line, _)) => return Err(SampleCsvError::Header { line }),
        None => return Err(SampleCsvError::Header { line: 1 }),
    }

    rows.map(|(line, l)| {
        let vals: Result<Vec<f64>, _> = l.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => Ok(Sample::new(v[0], v[1], v[2])),
            Ok(v) if v.len() != 3 => Err(SampleCsvError::Malformed {
                line,
                reason: format!("expected 3 fields, got {}", v.len()),
            }),
            _ => Err(SampleCsvError::Malformed { line, reason: format!("bad number in {l:?}") }),
        }
    })
    .collect()
}

pub fn write_samples_csv(samples: &[Sample]) -> String {
    let mut out = String::from(SAMPLE_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.n_ones, s.n_toggles, s.current_ma));
    }
    out
}

/// Parameter tables measured on the three characterised DDR3L vendors.
pub mod measured {
    use super::{ClassParams, DataDepParams as P, DataDepTable};

    pub const VENDOR_A: DataDepTable = DataDepTable {
        read: ClassParams {
            no_interleave: P::new(250.88, 0.449, 0.0),
            column_only: P::new(246.44, 0.433, 0.0515),
            bank_only: P::new(287.24, 0.244, 0.0200),
            bank_and_column: P::new(277.13, 0.267, 0.0200),
        },
        write: ClassParams {
            no_interleave: P::new(489.61, -0.217, 0.0),
            column_only: P::new(531.18, -0.246, 0.0461),
            bank_only: P::new(534.93, -0.249, 0.0225),
            bank_and_column: P::new(537.58, -0.249, 0.0225),
        },
    };

    pub const VENDOR_B: DataDepTable = DataDepTable {
        read: ClassParams {
            no_interleave: P::new(226.69, 0.164, 0.0),
            column_only: P::new(217.42, 0.157, 0.0947),
            bank_only: P::new(228.14, 0.159, 0.0364),
            bank_and_column: P::new(223.61, 0.152, 0.0364),
        },
        write: ClassParams {
            no_interleave: P::new(447.95, -0.191, 0.0),
            column_only: P::new(466.84, -0.215, 0.0166),
            bank_only: P::new(419.99, -0.179, 0.0078),
            bank_and_column: P::new(420.43, -0.179, 0.0078),
        },
    };

    pub const VENDOR_C: DataDepTable = DataDepTable {
        read: ClassParams {
            no_interleave: P::new(222.11, 0.134, 0.0),
            column_only: P::new(234.42, 0.154, 0.0856),
            bank_only: P::new(289.99, 0.034, 0.0455),
            bank_and_column: P::new(266.51, 0.099, 0.0090),
        },
        write: ClassParams {
            // published as -0.000
            no_interleave: P::new(343.41, -0.0, 0.0),
            column_only: P::new(368.29, -0.116, 0.0229),
            bank_only: P::new(304.33, -0.054, 0.0455),
            bank_and_column: P::new(323.22, -0.072, 0.0090),
        },
    };
}
