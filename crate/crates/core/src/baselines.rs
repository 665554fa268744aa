//! Comparison models, IDD measurement loops and error metrics.
//!
//! Two simplified models are provided next to the full one:
//!
//! * [`ModelKind::DramPowerLite`] runs the same integrator on datasheet
//!   currents with flat IDD4R/IDD4W transfer currents and no variation.
//! * [`ModelKind::MicronStyle`] is a utilisation model: IDD3N is charged for
//!   every non-power-down nanosecond and each command adds a fixed quantum on
//!   top of it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::datadep::{ClassParams, DataDepParams, DataDepTable};
use crate::dram_state::{ModuleState, PowerMode};
use crate::energy::{EnergyBreakdown, EnergyError, EnergyModel, EnergyOptions};
use crate::profiles::{IddKey, TimingParams, VendorProfile};
use crate::trace::{validate_timing, CacheLine, Command, CommandKind, Op, Trace, BURST_CYCLES, NUM_BANKS};
use crate::variation::StructuralVariation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Vampire,
    MicronStyle,
    DramPowerLite,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Vampire, ModelKind::MicronStyle, ModelKind::DramPowerLite];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Vampire => "vampire",
            ModelKind::MicronStyle => "micron",
            ModelKind::DramPowerLite => "drampower",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "vampire" => Ok(ModelKind::Vampire),
            "micron" | "micron_style" => Ok(ModelKind::MicronStyle),
            "drampower" | "drampower_lite" | "dpl" => Ok(ModelKind::DramPowerLite),
            _ => Err(format!("unknown model {s:?} (expected vampire, micron or drampower)")),
        }
    }
}

/// Datasheet currents, flat transfer currents, no variation.
pub fn drampower_lite_model(profile: &VendorProfile) -> EnergyModel {
    let ds = profile.idd_datasheet;
    EnergyModel {
        vdd_v: profile.vdd_v,
        timing: profile.timing,
        idd: ds,
        datadep: DataDepTable {
            read: ClassParams::uniform(DataDepParams::flat(ds.idd4r_ma)),
            write: ClassParams::uniform(DataDepParams::flat(ds.idd4w_ma)),
        },
        variation: StructuralVariation::NONE,
        io_per_one_ma: None,
    }
}

/// Utilisation-style estimate on datasheet currents.
pub fn micron_style_energy(trace: &Trace, profile: &VendorProfile, force: bool) -> Result<EnergyBreakdown, EnergyError> {
    let timing = profile.timing;
    if !force {
        let v = validate_timing(trace, &timing);
        if let Some(first) = v.first() {
            return Err(EnergyError::TimingViolation { count: v.len(), first: first.clone() });
        }
    }
    let model = EnergyModel { variation: StructuralVariation::NONE, ..drampower_lite_model(profile) };
    let ds = &model.idd;
    let nj = |ma: f64, ns: f64| ma * profile.vdd_v * ns * 1e-3;
    let burst_ns = BURST_CYCLES as f64 * timing.tck_ns;

    let mut state = ModuleState::new(&timing);
    let mut out = EnergyBreakdown::default();
    let mut t_prev = 0.0;
    for cmd in trace.commands() {
        let now = cmd.cycle as f64 * timing.tck_ns;
        if state.power_mode == PowerMode::FastPowerDown {
            out.power_down_nj += nj(ds.idd2p1_ma, now - t_prev);
        } else {
            out.background_active_nj += nj(ds.idd3n_ma, now - t_prev);
        }
        t_prev = now;
        let ev = state.apply(cmd)?;
        match ev.kind {
            CommandKind::Act => out.act_pre_nj += nj(model.act_pre_current_ma(), timing.trc_ns),
            CommandKind::Rd => out.read_nj += nj((ds.idd4r_ma - ds.idd3n_ma).max(0.0), burst_ns),
            CommandKind::Wr => out.write_nj += nj((ds.idd4w_ma - ds.idd3n_ma).max(0.0), burst_ns),
            CommandKind::Ref => out.refresh_nj += nj((ds.idd5b_ma - ds.idd3n_ma).max(0.0), timing.trfc_ns),
            CommandKind::End => break,
            _ => {}
        }
    }
    out.duration_ns = t_prev;
    Ok(out)
}

/// Energy breakdown of `trace` under the chosen model.
pub fn compute_model(
    kind: ModelKind,
    trace: &Trace,
    profile: &VendorProfile,
    opts: &EnergyOptions,
) -> Result<EnergyBreakdown, EnergyError> {
    match kind {
        ModelKind::Vampire => Ok(EnergyModel::from_profile(profile).run(trace, opts)?.breakdown),
        ModelKind::DramPowerLite => {
            let flat = EnergyOptions { variation: false, ..*opts };
            Ok(drampower_lite_model(profile).run(trace, &flat)?.breakdown)
        }
        ModelKind::MicronStyle => micron_style_energy(trace, profile, opts.force),
    }
}

/// Signed error of `estimate` against `reference`, in percent.
pub fn relative_error_pct(estimate: f64, reference: f64) -> f64 {
    (estimate - reference) / reference * 100.0
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapeError {
    #[error("predicted has {predicted} values, actual has {actual}")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("no values")]
    Empty,
    #[error("actual value {value} at index {index} is not positive")]
    NonPositiveActual { index: usize, value: f64 },
}

/// Mean absolute percentage error, in percent.
pub fn mape(predicted: &[f64], actual: &[f64]) -> Result<f64, MapeError> {
    if predicted.len() != actual.len() {
        return Err(MapeError::LengthMismatch { predicted: predicted.len(), actual: actual.len() });
    }
    if actual.is_empty() {
        return Err(MapeError::Empty);
    }
    if let Some((index, &value)) = actual.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(MapeError::NonPositiveActual { index, value });
    }
    let sum: f64 = predicted.iter().zip(actual).map(|(p, a)| ((p - a) / a).abs()).sum();
    Ok(sum / actual.len() as f64 * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopOptions {
    pub iterations: u32,
    /// Byte repeated across every transferred line.
    pub pattern: u8,
    /// Row opened by every ACT.
    pub row: u16,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions { iterations: 1000, pattern: 0x33, row: 0 }
    }
}

/// A trace reproducing the JEDEC measurement loop for `key`, timed to the
/// minimum whole-cycle spacing allowed by `timing`.
pub fn generate_idd_loop(key: IddKey, timing: &TimingParams, opts: &LoopOptions) -> Trace {
    let n = opts.iterations.max(1) as u64;
    let c = |ns| timing.cycles(ns);
    let (trcd, tras, trc, trp, trfc) = (c(timing.trcd_ns), c(timing.tras_ns), c(timing.trc_ns), c(timing.trp_ns), c(timing.trfc_ns));
    let data = Some(CacheLine::splat(opts.pattern));
    let row = opts.row;
    let banks = NUM_BANKS as u64;
    let mut cmds = Vec::new();
    let end = match key {
        IddKey::Idd0 | IddKey::Idd1 => {
            for i in 0..n {
                let base = i * trc;
                cmds.push(Command::act(base, 0, row));
                if key == IddKey::Idd1 {
                    cmds.push(Command::rd(base + trcd, 0, 0, data));
                }
                cmds.push(Command::pre(base + tras, 0));
            }
            n * trc
        }
        IddKey::Idd2N => n * trc,
        IddKey::Idd3N => {
            for b in 0..banks {
                cmds.push(Command::act(b * BURST_CYCLES, b as u8, row));
            }
            n * trc + banks * BURST_CYCLES
        }
        IddKey::Idd4R | IddKey::Idd4W => {
            for b in 0..banks {
                cmds.push(Command::act(b * BURST_CYCLES, b as u8, row));
            }
            let start = (banks - 1) * BURST_CYCLES + trcd;
            let count = n * banks;
            for k in 0..count {
                let bank = (k % banks) as u8;
                let column = ((k / banks) * 8 % 1024) as u16;
                let cycle = start + k * BURST_CYCLES;
                cmds.push(if key == IddKey::Idd4R {
                    Command::rd(cycle, bank, column, data)
                } else {
                    Command::wr(cycle, bank, column, data)
                });
            }
            start + count * BURST_CYCLES
        }
        IddKey::Idd5B => {
            for i in 0..n {
                cmds.push(Command::new(i * trfc, Op::Ref));
            }
            n * trfc
        }
        IddKey::Idd7 => {
            let period = banks * BURST_CYCLES;
            for i in 0..n {
                for b in 0..banks {
                    let t = i * period + b * BURST_CYCLES;
                    cmds.push(Command::act(t, b as u8, row));
                    cmds.push(Command::rd(t + trcd, b as u8, 0, data));
                    cmds.push(Command::pre(t + tras, b as u8));
                }
            }
            cmds.sort_by_key(|c| c.cycle);
            (n - 1) * period + (banks - 1) * BURST_CYCLES + tras + trp
        }
        IddKey::Idd2P1 => {
            cmds.push(Command::new(0, Op::Pde));
            cmds.push(Command::new(n * trc, Op::Pdx));
            n * trc + 1
        }
    };
    cmds.push(Command::new(end, Op::End));
    Trace::new(cmds).expect("generated loops are ordered")
}

/// Average supply current over the breakdown's duration, in mA.
pub fn average_current_ma(b: &EnergyBreakdown, vdd_v: f64) -> Result<f64, EnergyError> {
    Ok(b.average_power_mw()? / vdd_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datadep::eval_current;
    use crate::dram_state::InterleaveClass;
    use crate::energy::compute_energy;
    use crate::trace::Direction;

    #[test]
    fn every_loop_is_legal() {
        let t = TimingParams::ddr3l_800();
        for key in IddKey::ALL {
            for iterations in [1, 3, 20] {
                let tr = generate_idd_loop(key, &t, &LoopOptions { iterations, ..Default::default() });
                assert!(validate_timing(&tr, &t).is_empty(), "{key} x{iterations}");
                let p = VendorProfile::vendor_a();
                compute_energy(&tr, &p, &EnergyOptions::default()).unwrap();
                micron_style_energy(&tr, &p, false).unwrap();
            }
        }
    }

    #[test]
    fn background_loops_hit_their_currents() {
        let t = TimingParams::ddr3l_800();
        for p in [VendorProfile::vendor_a(), VendorProfile::vendor_b(), VendorProfile::vendor_c()] {
            for key in [IddKey::Idd2N, IddKey::Idd3N, IddKey::Idd5B] {
                let tr = generate_idd_loop(key, &t, &LoopOptions::default());
                let mut b = compute_energy(&tr, &p, &EnergyOptions::default()).unwrap().breakdown;
                // opening the banks is not part of the held-open current
                b.act_pre_nj = 0.0;
                let i = average_current_ma(&b, p.vdd_v).unwrap();
                assert!((i / p.idd.get(key) - 1.0).abs() < 1e-3, "{} {key}: {i}", p.name);
            }
            let tr = generate_idd_loop(IddKey::Idd2P1, &t, &LoopOptions::default());
            let b = compute_energy(&tr, &p, &EnergyOptions::default()).unwrap().breakdown;
            assert!((average_current_ma(&b, p.vdd_v).unwrap() / p.idd.idd2p1_ma - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn idd4_loop_matches_self_consistent_current() {
        let mut p = VendorProfile::vendor_b();
        let target = eval_current(p.datadep.get(Direction::Write, InterleaveClass::BankAndColumn), 256.0, 0.0);
        p.idd.idd4w_ma = target;
        let tr = generate_idd_loop(IddKey::Idd4W, &p.timing, &LoopOptions::default());
        let b = compute_energy(&tr, &p, &EnergyOptions::default()).unwrap().breakdown;
        assert!((average_current_ma(&b, p.vdd_v).unwrap() / target - 1.0).abs() < 0.02);
    }

    #[test]
    fn drampower_lite_equals_full_model_on_its_own_inputs() {
        let mut p = VendorProfile::vendor_a();
        let flat = drampower_lite_model(&p);
        p.idd = flat.idd;
        p.datadep = flat.datadep;
        let tr = generate_idd_loop(IddKey::Idd7, &p.timing, &LoopOptions { iterations: 10, ..Default::default() });
        let a = compute_model(ModelKind::DramPowerLite, &tr, &p, &EnergyOptions::full()).unwrap();
        let b = compute_model(ModelKind::Vampire, &tr, &p, &EnergyOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn micron_not_below_drampower() {
        let p = VendorProfile::vendor_c();
        for key in IddKey::ALL {
            let tr = generate_idd_loop(key, &p.timing, &LoopOptions { iterations: 7, ..Default::default() });
            let m = compute_model(ModelKind::MicronStyle, &tr, &p, &EnergyOptions::default()).unwrap();
            let d = compute_model(ModelKind::DramPowerLite, &tr, &p, &EnergyOptions::default()).unwrap();
            assert!(m.total_nj() >= d.total_nj() - 1e-9, "{key}");
            assert_eq!(m.duration_ns, d.duration_ns);
        }
    }

    #[test]
    fn mape_examples() {
        assert_eq!(mape(&[110.0, 90.0], &[100.0, 100.0]).unwrap(), 10.0);
        assert_eq!(mape(&[1.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(mape(&[], &[]), Err(MapeError::Empty));
        assert_eq!(mape(&[1.0], &[1.0, 2.0]), Err(MapeError::LengthMismatch { predicted: 1, actual: 2 }));
        assert_eq!(mape(&[1.0, 1.0], &[1.0, 0.0]), Err(MapeError::NonPositiveActual { index: 1, value: 0.0 }));
        assert_eq!(relative_error_pct(150.0, 100.0), 50.0);
    }

    #[test]
    fn model_names_roundtrip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("dramsim".parse::<ModelKind>().is_err());
    }
}
