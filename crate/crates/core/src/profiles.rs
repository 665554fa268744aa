//! Vendor profiles: measured and datasheet IDD currents, timing, the
//! data-dependency tables and structural-variation factors for one part.
//!
//! Profiles are stored as TOML with the unit in every key name
//! (`idd0_ma`, `trcd_ns`, `vdd_v`). See `profiles/vendor_a.toml` for the
//! full key list.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datadep::DataDepTable;
use crate::regression::{self, RegressionError};
use crate::variation::StructuralVariation;

/// Timing constraints in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    pub trcd_ns: f64,
    pub trp_ns: f64,
    pub tras_ns: f64,
    pub trc_ns: f64,
    pub trfc_ns: f64,
    pub tck_ns: f64,
}

impl TimingParams {
    /// DDR3L at 800 MT/s: 13.75/13.75/35 ns, tRC = tRAS + tRP, 2.5 ns clock.
    pub const fn ddr3l_800() -> Self {
        TimingParams {
            trcd_ns: 13.75,
            trp_ns: 13.75,
            tras_ns: 35.0,
            trc_ns: 48.75,
            trfc_ns: 160.0,
            tck_ns: 2.5,
        }
    }

    /// Smallest whole number of clock cycles covering `ns`.
    pub fn cycles(&self, ns: f64) -> u64 {
        // the slack keeps exact multiples (35 ns / 2.5 ns) from rounding up
        ((ns / self.tck_ns) - 1e-9).ceil().max(0.0) as u64
    }

    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("trcd_ns", self.trcd_ns),
            ("trp_ns", self.trp_ns),
            ("tras_ns", self.tras_ns),
            ("trc_ns", self.trc_ns),
            ("trfc_ns", self.trfc_ns),
            ("tck_ns", self.tck_ns),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                out.push(format!("timing.{name} must be > 0, got {v}"));
            }
        }
        if self.trc_ns + 1e-9 < self.tras_ns + self.trp_ns {
            out.push(format!(
                "timing.trc_ns ({}) must be >= tras_ns + trp_ns ({})",
                self.trc_ns,
                self.tras_ns + self.trp_ns
            ));
        }
        out
    }
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams::ddr3l_800()
    }
}

/// The JEDEC current measurements a profile carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IddKey {
    Idd0,
    Idd1,
    Idd2N,
    Idd3N,
    Idd4R,
    Idd4W,
    Idd5B,
    Idd7,
    Idd2P1,
}

impl IddKey {
    pub const ALL: [IddKey; 9] = [
        IddKey::Idd0,
        IddKey::Idd1,
        IddKey::Idd2N,
        IddKey::Idd3N,
        IddKey::Idd4R,
        IddKey::Idd4W,
        IddKey::Idd5B,
        IddKey::Idd7,
        IddKey::Idd2P1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IddKey::Idd0 => "IDD0",
            IddKey::Idd1 => "IDD1",
            IddKey::Idd2N => "IDD2N",
            IddKey::Idd3N => "IDD3N",
            IddKey::Idd4R => "IDD4R",
            IddKey::Idd4W => "IDD4W",
            IddKey::Idd5B => "IDD5B",
            IddKey::Idd7 => "IDD7",
            IddKey::Idd2P1 => "IDD2P1",
        }
    }

    /// Profile file key, e.g. `idd2n_ma`.
    pub fn file_key(self) -> String {
        format!("{}_ma", self.name().to_ascii_lowercase())
    }
}

impl fmt::Display for IddKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for IddKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        IddKey::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown IDD key {s:?}"))
    }
}

/// One current per [`IddKey`], in mA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IddTable {
    pub idd0_ma: f64,
    pub idd1_ma: f64,
    pub idd2n_ma: f64,
    pub idd3n_ma: f64,
    pub idd4r_ma: f64,
    pub idd4w_ma: f64,
    pub idd5b_ma: f64,
    pub idd7_ma: f64,
    pub idd2p1_ma: f64,
}

impl IddTable {
    pub fn get(&self, key: IddKey) -> f64 {
        match key {
            IddKey::Idd0 => self.idd0_ma,
            IddKey::Idd1 => self.idd1_ma,
            IddKey::Idd2N => self.idd2n_ma,
            IddKey::Idd3N => self.idd3n_ma,
            IddKey::Idd4R => self.idd4r_ma,
            IddKey::Idd4W => self.idd4w_ma,
            IddKey::Idd5B => self.idd5b_ma,
            IddKey::Idd7 => self.idd7_ma,
            IddKey::Idd2P1 => self.idd2p1_ma,
        }
    }

    pub fn set(&mut self, key: IddKey, value: f64) {
        let slot = match key {
            IddKey::Idd0 => &mut self.idd0_ma,
            IddKey::Idd1 => &mut self.idd1_ma,
            IddKey::Idd2N => &mut self.idd2n_ma,
            IddKey::Idd3N => &mut self.idd3n_ma,
            IddKey::Idd4R => &mut self.idd4r_ma,
            IddKey::Idd4W => &mut self.idd4w_ma,
            IddKey::Idd5B => &mut self.idd5b_ma,
            IddKey::Idd7 => &mut self.idd7_ma,
            IddKey::Idd2P1 => &mut self.idd2p1_ma,
        };
        *slot = value;
    }

    fn issues(&self, section: &str) -> Vec<String> {
        let mut out: Vec<String> = IddKey::ALL
            .into_iter()
            .filter(|&k| !(self.get(k) > 0.0) || !self.get(k).is_finite())
            .map(|k| format!("{section}.{} must be > 0, got {}", k.file_key(), self.get(k)))
            .collect();
        if self.idd3n_ma < self.idd2n_ma {
            out.push(format!(
                "{section}: idd3n_ma ({}) must be >= idd2n_ma ({})",
                self.idd3n_ma, self.idd2n_ma
            ));
        }
        out
    }
}

/// Everything the energy engine needs to know about one vendor's part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VendorProfile {
    pub name: String,
    pub vdd_v: f64,
    /// Optional I/O-driver current per `1` bit during reads, used to split
    /// read energy into core and I/O parts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub io_per_one_ma: Option<f64>,
    /// Dotted keys of placeholder values that still need calibration.
    #[serde(default)]
    pub synthetic: Vec<String>,
    pub timing: TimingParams,
    /// Measured currents.
    pub idd: IddTable,
    /// Vendor datasheet currents.
    pub idd_datasheet: IddTable,
    pub datadep: DataDepTable,
    pub variation: StructuralVariation,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("cannot read profile {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse profile {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("profile {name} is invalid: {}", issues.join("; "))]
    Invalid { name: String, issues: Vec<String> },
    #[error("no profile named {0:?} (tried file path, $VAMPIRE_PROFILE_DIR and built-ins)")]
    NotFound(String),
}

/// Environment variable naming a directory searched for `<name>.toml`.
pub const PROFILE_DIR_ENV: &str = "VAMPIRE_PROFILE_DIR";

const VENDOR_A_TOML: &str = include_str!("../profiles/vendor_a.toml");
const VENDOR_B_TOML: &str = include_str!("../profiles/vendor_b.toml");
const VENDOR_C_TOML: &str = include_str!("../profiles/vendor_c.toml");

impl VendorProfile {
    pub fn vendor_a() -> Self {
        Self::builtin_from(VENDOR_A_TOML)
    }

    pub fn vendor_b() -> Self {
        Self::builtin_from(VENDOR_B_TOML)
    }

    pub fn vendor_c() -> Self {
        Self::builtin_from(VENDOR_C_TOML)
    }

    fn builtin_from(text: &str) -> Self {
        VendorProfile::from_toml(text).expect("built-in profile parses")
    }

    pub fn builtin_names() -> [&'static str; 3] {
        ["vendor_a", "vendor_b", "vendor_c"]
    }

    /// Built-in profile by name; accepts `vendor_a`, `vendor-a`, `a`.
    pub fn builtin(name: &str) -> Option<Self> {
        let key = name.to_ascii_lowercase().replace('-', "_");
        match key.trim_start_matches("vendor_") {
            "a" => Some(Self::vendor_a()),
            "b" => Some(Self::vendor_b()),
            "c" => Some(Self::vendor_c()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }

    /// Reads and parses a profile without checking invariants.
    pub fn parse_file(path: &Path) -> Result<Self, ProfileError> {
        let text = fs::read_to_string(path).map_err(|source| ProfileError::Io { path: path.into(), source })?;
        Self::from_toml(&text).map_err(|message| ProfileError::Parse { path: path.into(), message })
    }

    /// Reads, parses and validates a profile.
    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        let p = Self::parse_file(path)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProfileError> {
        fs::write(path, self.to_toml()).map_err(|source| ProfileError::Io { path: path.into(), source })
    }

    /// Resolves a profile argument: an existing file path, then
    /// `$VAMPIRE_PROFILE_DIR/<name>[.toml]`, then a built-in name.
    pub fn resolve(arg: &str) -> Result<Self, ProfileError> {
        let direct = Path::new(arg);
        if direct.is_file() {
            return Self::load(direct);
        }
        if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
            let dir = PathBuf::from(dir);
            for candidate in [dir.join(arg), dir.join(format!("{arg}.toml"))] {
                if candidate.is_file() {
                    return Self::load(&candidate);
                }
            }
        }
        Self::builtin(arg).ok_or_else(|| ProfileError::NotFound(arg.to_string()))
    }

    /// All invariant violations; empty when the profile is usable.
    pub fn lint(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.vdd_v > 0.0) || !self.vdd_v.is_finite() {
            out.push(format!("vdd_v must be > 0, got {}", self.vdd_v));
        }
        if let Some(io) = self.io_per_one_ma {
            if !(io >= 0.0) || !io.is_finite() {
                out.push(format!("io_per_one_ma must be >= 0, got {io}"));
            }
        }
        out.extend(self.timing.issues());
        out.extend(self.idd.issues("idd"));
        out.extend(self.idd_datasheet.issues("idd_datasheet"));
        out.extend(self.datadep.sign_issues().into_iter().map(|s| format!("datadep.{s}")));
        out.extend(self.variation.issues());
        out
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let issues = self.lint();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ProfileError::Invalid { name: self.name.clone(), issues })
        }
    }

    pub fn is_synthetic(&self, dotted_key: &str) -> bool {
        self.synthetic.iter().any(|k| k == dotted_key)
    }
}

/// Result of extrapolating a current to a target data rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub current_ma: f64,
    pub r_squared: f64,
    pub intercept_ma: f64,
    pub slope_ma_per_mts: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtrapolationError {
    #[error("need at least two distinct frequencies")]
    DegenerateFit,
    #[error("non-finite input point")]
    NonFinite,
}

/// Fits `I = a + b*f` by least squares to `(MT/s, mA)` points and evaluates
/// it at `target_mts`. At fixed voltage, current is linear in frequency.
pub fn extrapolate_idd(points: &[(f64, f64)], target_mts: f64) -> Result<Extrapolation, ExtrapolationError> {
    let fs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let is: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = regression::fit_line(&fs, &is).map_err(|e| match e {
        RegressionError::NonFinite => ExtrapolationError::NonFinite,
        _ => ExtrapolationError::DegenerateFit,
    })?;
    Ok(Extrapolation {
        current_ma: fit.eval(target_mts),
        r_squared: fit.r_squared,
        intercept_ma: fit.intercept,
        slope_ma_per_mts: fit.slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuardbandRow {
    pub key: IddKey,
    pub measured_ma: f64,
    pub datasheet_ma: f64,
    /// measured / datasheet
    pub ratio: f64,
}

/// Measured-to-datasheet ratio for every IDD key. Both tables always carry
/// every key, so there is no missing-key case.
pub fn guardband_report(profile: &VendorProfile) -> Vec<GuardbandRow> {
    IddKey::ALL
        .into_iter()
        .map(|key| {
            let measured_ma = profile.idd.get(key);
            let datasheet_ma = profile.idd_datasheet.get(key);
            GuardbandRow { key, measured_ma, datasheet_ma, ratio: measured_ma / datasheet_ma }
        })
        .collect()
}
