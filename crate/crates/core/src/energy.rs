//! Trace energy integration.
//!
//! Energy is the sum of background energy integrated over time and per-command
//! add-on quanta. Units throughout: mA x V x ns x 1e-3 = nJ.
//!
//! * Background: IDD2N while no bank is active, IDD3N (scaled by the mean idle
//!   factor of the active banks) while at least one is, IDD2P1 in power-down.
//!   A bank counts as active from its ACT until its precharge has completed.
//! * ACT/PRE pair: the part of IDD0 above the background it already pays for,
//!   charged once at ACT for a full tRC and scaled by the row factor.
//! * RD/WR: the data-dependent current above IDD3N for one burst.
//! * REF: IDD5B above IDD2N for tRFC.

use thiserror::Error;

use crate::datadep::{eval_current, DataDepTable};
use crate::dram_state::{IllegalCommand, ModuleState, PowerMode, TransferEvent};
use crate::profiles::{IddTable, TimingParams, VendorProfile};
use crate::trace::{
    validate_timing, CommandKind, DataDistribution, Direction, Trace, Violation, BURST_CYCLES, NUM_BANKS,
};
use crate::variation::{BankContext, StructuralVariation};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyOptions {
    /// Apply bank and row variation factors.
    pub variation: bool,
    /// Skip the timing check.
    pub force: bool,
    /// Scale active background between IDD2N and IDD3N by the number of
    /// active banks instead of jumping to IDD3N as soon as one is open.
    pub interpolate_background: bool,
    /// When set, every RD/WR uses these expected counts and payloads are
    /// ignored.
    pub distribution: Option<DataDistribution>,
}

impl EnergyOptions {
    /// Variation on, everything else default.
    pub fn full() -> Self {
        EnergyOptions { variation: true, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("trace violates timing ({} violations, first: {first})", count)]
    TimingViolation { count: usize, first: Violation },
    #[error(transparent)]
    IllegalCommand(#[from] IllegalCommand),
    #[error("transfer at cycle {cycle} has no payload and no data distribution was given")]
    MissingPayload { cycle: u64 },
    #[error("average power needs a positive duration, got {0} ns")]
    NonPositiveDuration(f64),
}

/// Energy per category in nJ.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub act_pre_nj: f64,
    pub read_nj: f64,
    pub write_nj: f64,
    pub refresh_nj: f64,
    pub background_active_nj: f64,
    pub background_precharged_nj: f64,
    pub power_down_nj: f64,
    /// Encoder/decoder overhead; only the encoding study fills this in.
    pub encoding_nj: f64,
    /// Read energy split, present when the profile models I/O current.
    pub read_core_nj: Option<f64>,
    pub read_io_nj: Option<f64>,
    pub duration_ns: f64,
}

impl EnergyBreakdown {
    pub fn background_nj(&self) -> f64 {
        self.background_active_nj + self.background_precharged_nj + self.power_down_nj
    }

    pub fn total_nj(&self) -> f64 {
        self.act_pre_nj + self.read_nj + self.write_nj + self.refresh_nj + self.background_nj() + self.encoding_nj
    }

    /// `(category, nJ)` rows ending with `total`.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let mut rows = vec![
            ("act_pre", self.act_pre_nj),
            ("read", self.read_nj),
            ("write", self.write_nj),
            ("refresh", self.refresh_nj),
            ("background_active", self.background_active_nj),
            ("background_precharged", self.background_precharged_nj),
            ("power_down", self.power_down_nj),
            ("encoding", self.encoding_nj),
        ];
        if let (Some(core), Some(io)) = (self.read_core_nj, self.read_io_nj) {
            rows.push(("read_core", core));
            rows.push(("read_io", io));
        }
        rows.push(("total", self.total_nj()));
        rows
    }

    pub fn average_power_mw(&self) -> Result<f64, EnergyError> {
        average_power_mw(self.total_nj(), self.duration_ns)
    }
}

/// nJ over ns gives W; the result is in mW.
pub fn average_power_mw(energy_nj: f64, duration_ns: f64) -> Result<f64, EnergyError> {
    if !(duration_ns > 0.0) {
        return Err(EnergyError::NonPositiveDuration(duration_ns));
    }
    Ok(energy_nj / duration_ns * 1e3)
}

/// Add-on energy charged to one command (background excluded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandEnergy {
    pub index: usize,
    pub cycle: u64,
    pub kind: CommandKind,
    pub energy_nj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub breakdown: EnergyBreakdown,
    pub ledger: Vec<CommandEnergy>,
}

/// The currents, timing and factors the integrator works from.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub vdd_v: f64,
    pub timing: TimingParams,
    pub idd: IddTable,
    pub datadep: DataDepTable,
    pub variation: StructuralVariation,
    pub io_per_one_ma: Option<f64>,
}

impl EnergyModel {
    /// Measured currents, data-dependent transfers, the profile's variation.
    pub fn from_profile(p: &VendorProfile) -> Self {
        EnergyModel {
            vdd_v: p.vdd_v,
            timing: p.timing,
            idd: p.idd,
            datadep: p.datadep,
            variation: p.variation,
            io_per_one_ma: p.io_per_one_ma,
        }
    }

    fn nj(&self, ma: f64, ns: f64) -> f64 {
        ma * self.vdd_v * ns * 1e-3
    }

    /// IDD0 minus the background a bank already pays over one tRC.
    pub fn act_pre_current_ma(&self) -> f64 {
        let t = &self.timing;
        let bg = (self.idd.idd3n_ma * t.tras_ns + self.idd.idd2n_ma * (t.trc_ns - t.tras_ns)) / t.trc_ns;
        (self.idd.idd0_ma - bg).max(0.0)
    }

    fn burst_ns(&self) -> f64 {
        BURST_CYCLES as f64 * self.timing.tck_ns
    }

    fn background_ma(&self, state: &ModuleState, t_ns: f64, var: &StructuralVariation, interpolate: bool) -> (f64, Bg) {
        if state.power_mode == PowerMode::FastPowerDown {
            return (self.idd.idd2p1_ma, Bg::PowerDown);
        }
        let active: Vec<usize> = state.active_banks_at(t_ns).collect();
        if active.is_empty() {
            return (self.idd.idd2n_ma, Bg::Precharged);
        }
        let factor = var.mean_idle_factor(active.iter().copied());
        let base = if interpolate {
            let share = active.len() as f64 / NUM_BANKS as f64;
            self.idd.idd2n_ma + (self.idd.idd3n_ma - self.idd.idd2n_ma) * share
        } else {
            self.idd.idd3n_ma
        };
        (base * factor, Bg::Active)
    }

    fn integrate_background(
        &self,
        state: &ModuleState,
        from_ns: f64,
        to_ns: f64,
        var: &StructuralVariation,
        opts: &EnergyOptions,
        out: &mut EnergyBreakdown,
    ) {
        let mut a = from_ns;
        while a < to_ns {
            let b = state.next_close_between(a, to_ns).unwrap_or(to_ns);
            let (ma, bucket) = self.background_ma(state, a, var, opts.interpolate_background);
            let e = self.nj(ma, b - a);
            match bucket {
                Bg::Active => out.background_active_nj += e,
                Bg::Precharged => out.background_precharged_nj += e,
                Bg::PowerDown => out.power_down_nj += e,
            }
            a = b;
        }
    }

    fn transfer_counts(&self, x: &TransferEvent, cycle: u64, opts: &EnergyOptions) -> Result<(f64, f64), EnergyError> {
        if let Some(d) = opts.distribution {
            return Ok((d.expected_ones(), d.expected_toggles()));
        }
        match (x.ones, x.toggles) {
            (Some(o), Some(t)) => Ok((o as f64, t as f64)),
            _ => Err(EnergyError::MissingPayload { cycle }),
        }
    }

    /// Integrates `trace` and returns the breakdown and per-command ledger.
    pub fn run(&self, trace: &Trace, opts: &EnergyOptions) -> Result<EnergyReport, EnergyError> {
        if !opts.force {
            let violations = validate_timing(trace, &self.timing);
            if let Some(first) = violations.first() {
                return Err(EnergyError::TimingViolation { count: violations.len(), first: first.clone() });
            }
        }
        let var = if opts.variation { self.variation } else { StructuralVariation::NONE };
        let tck = self.timing.tck_ns;
        let mut state = ModuleState::new(&self.timing);
        let mut out = EnergyBreakdown::default();
        if self.io_per_one_ma.is_some() {
            out.read_core_nj = Some(0.0);
            out.read_io_nj = Some(0.0);
        }
        let mut ledger = Vec::with_capacity(trace.len());
        let mut t_prev = 0.0;

        for (index, cmd) in trace.commands().iter().enumerate() {
            let now = cmd.cycle as f64 * tck;
            self.integrate_background(&state, t_prev, now, &var, opts, &mut out);
            t_prev = now;
            let ev = state.apply(cmd)?;
            let energy_nj = match ev.kind {
                CommandKind::Act => {
                    let row = ev.row.expect("ACT carries a row");
                    let e = self.nj(self.act_pre_current_ma(), self.timing.trc_ns) * var.row_factor(row);
                    out.act_pre_nj += e;
                    e
                }
                CommandKind::Rd | CommandKind::Wr => {
                    let x = ev.transfer.expect("transfer event");
                    let (ones, toggles) = self.transfer_counts(&x, cmd.cycle, opts)?;
                    let p = self.datadep.get(x.direction, x.class);
                    let add_ma = (eval_current(p, ones, toggles) - self.idd.idd3n_ma).max(0.0);
                    match x.direction {
                        Direction::Read => {
                            let e = self.nj(add_ma, self.burst_ns()) * var.bank_factor(x.bank, BankContext::Read);
                            out.read_nj += e;
                            if let Some(io_ma) = self.io_per_one_ma {
                                let io = self.nj(io_ma * ones, self.burst_ns()).min(e);
                                *out.read_io_nj.as_mut().expect("split enabled") += io;
                                *out.read_core_nj.as_mut().expect("split enabled") += e - io;
                            }
                            e
                        }
                        Direction::Write => {
                            let e = self.nj(add_ma, self.burst_ns()) * var.bank_factor(x.bank, BankContext::Write);
                            out.write_nj += e;
                            e
                        }
                    }
                }
                CommandKind::Ref => {
                    let e = self.nj((self.idd.idd5b_ma - self.idd.idd2n_ma).max(0.0), self.timing.trfc_ns);
                    out.refresh_nj += e;
                    e
                }
                _ => 0.0,
            };
            ledger.push(CommandEnergy { index, cycle: cmd.cycle, kind: ev.kind, energy_nj });
            if ev.kind == CommandKind::End {
                break;
            }
        }
        out.duration_ns = t_prev;
        Ok(EnergyReport { breakdown: out, ledger })
    }
}

#[derive(Clone, Copy)]
enum Bg {
    Active,
    Precharged,
    PowerDown,
}

/// Runs the full model for `profile` over `trace`.
pub fn compute_energy(trace: &Trace, profile: &VendorProfile, opts: &EnergyOptions) -> Result<EnergyReport, EnergyError> {
    EnergyModel::from_profile(profile).run(trace, opts)
}
