//! Per-bank replay of a command trace.
//!
//! [`ModuleState`] follows open rows, power-down intervals, each bank's last
//! accessed column and the last transferred payload, and classifies every
//! RD/WR by how it interleaves with the transfer before it.

use std::fmt;

use thiserror::Error;

use crate::profiles::TimingParams;
use crate::trace::{CacheLine, Command, CommandKind, Direction, Op, NUM_BANKS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterleaveClass {
    /// Same bank and column as the previous transfer.
    NoInterleave,
    /// Same bank, different column.
    ColumnOnly,
    /// Different bank; the column matches that bank's last access.
    BankOnly,
    /// Different bank, and a column that differs from that bank's last access.
    BankAndColumn,
}

impl InterleaveClass {
    pub const ALL: [InterleaveClass; 4] = [
        InterleaveClass::NoInterleave,
        InterleaveClass::ColumnOnly,
        InterleaveClass::BankOnly,
        InterleaveClass::BankAndColumn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterleaveClass::NoInterleave => "no_interleave",
            InterleaveClass::ColumnOnly => "column_only",
            InterleaveClass::BankOnly => "bank_only",
            InterleaveClass::BankAndColumn => "bank_and_column",
        }
    }
}

impl fmt::Display for InterleaveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BankStatus {
    #[default]
    Precharged,
    Activating,
    Active,
    Precharging,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BankState {
    pub status: BankStatus,
    /// Present iff status is Activating or Active.
    pub open_row: Option<u16>,
    /// Column of the most recent RD/WR to this bank; survives precharge.
    pub last_column: Option<u16>,
    act_ns: f64,
    pre_done_ns: f64,
}

impl BankState {
    pub fn is_open(&self) -> bool {
        self.open_row.is_some()
    }

    /// Counted as active for background current: from ACT issue until the
    /// precharge that closes it has completed.
    pub fn is_active_at(&self, t_ns: f64) -> bool {
        match self.status {
            BankStatus::Activating | BankStatus::Active => true,
            BankStatus::Precharging => t_ns < self.pre_done_ns,
            BankStatus::Precharged => false,
        }
    }

    fn settle(&mut self, now_ns: f64, trcd_ns: f64) {
        match self.status {
            BankStatus::Activating if now_ns >= self.act_ns + trcd_ns => self.status = BankStatus::Active,
            BankStatus::Precharging if now_ns >= self.pre_done_ns => self.status = BankStatus::Precharged,
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    #[default]
    Normal,
    FastPowerDown,
}

/// The most recent RD/WR anywhere on the module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LastTransfer {
    pub bank: u8,
    pub column: u16,
    pub payload: Option<CacheLine>,
}

/// Data-transfer details attached to a RD/WR event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferEvent {
    pub direction: Direction,
    pub bank: u8,
    pub column: u16,
    pub class: InterleaveClass,
    /// Ones in the payload; `None` when the command carries no payload.
    pub ones: Option<u32>,
    /// Bits toggled against the previous transfer; zero for the first
    /// transfer, `None` when either payload is absent.
    pub toggles: Option<u32>,
}

/// What the energy engine needs to know about one replayed command.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEvent {
    pub cycle: u64,
    pub kind: CommandKind,
    pub bank: Option<u8>,
    pub row: Option<u16>,
    pub transfer: Option<TransferEvent>,
    /// Banks closed by this command (PRE or PREA).
    pub closed_banks: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("illegal {kind} at cycle {cycle}{}: {reason}", bank.map(|b| format!(" on bank {b}")).unwrap_or_default())]
pub struct IllegalCommand {
    pub cycle: u64,
    pub kind: CommandKind,
    pub bank: Option<u8>,
    pub reason: &'static str,
}

/// Module-wide replay state for one rank of eight banks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleState {
    pub banks: [BankState; NUM_BANKS],
    pub power_mode: PowerMode,
    pub last_xfer: Option<LastTransfer>,
    tck_ns: f64,
    trcd_ns: f64,
    trp_ns: f64,
}

impl ModuleState {
    pub fn new(timings: &TimingParams) -> Self {
        ModuleState {
            banks: [BankState::default(); NUM_BANKS],
            power_mode: PowerMode::Normal,
            last_xfer: None,
            tck_ns: timings.tck_ns,
            trcd_ns: timings.trcd_ns,
            trp_ns: timings.trp_ns,
        }
    }

    pub fn tck_ns(&self) -> f64 {
        self.tck_ns
    }

    /// Banks counted active at `t_ns`.
    pub fn active_banks_at(&self, t_ns: f64) -> impl Iterator<Item = usize> + '_ {
        (0..NUM_BANKS).filter(move |&b| self.banks[b].is_active_at(t_ns))
    }

    /// Earliest pending precharge completion strictly inside `(from, to)`.
    pub fn next_close_between(&self, from_ns: f64, to_ns: f64) -> Option<f64> {
        self.banks
            .iter()
            .filter(|b| b.status == BankStatus::Precharging)
            .map(|b| b.pre_done_ns)
            .filter(|&t| t > from_ns && t < to_ns)
            .min_by(f64::total_cmp)
    }

    fn any_open(&self) -> bool {
        self.banks.iter().any(BankState::is_open)
    }

    fn begin_precharge(&mut self, bank: usize, now_ns: f64) {
        let b = &mut self.banks[bank];
        b.status = BankStatus::Precharging;
        b.open_row = None;
        b.pre_done_ns = now_ns + self.trp_ns;
    }

    /// Applies one command, returning the event record for the energy engine.
    pub fn apply(&mut self, cmd: &Command) -> Result<StateEvent, IllegalCommand> {
        let now_ns = cmd.cycle as f64 * self.tck_ns;
        for b in &mut self.banks {
            b.settle(now_ns, self.trcd_ns);
        }
        let kind = cmd.kind();
        let illegal = |reason| IllegalCommand { cycle: cmd.cycle, kind, bank: cmd.bank(), reason };

        if self.power_mode == PowerMode::FastPowerDown
            && !matches!(kind, CommandKind::Pdx | CommandKind::End)
        {
            return Err(illegal("module is in power-down"));
        }

        let mut event = StateEvent {
            cycle: cmd.cycle,
            kind,
            bank: cmd.bank(),
            row: cmd.row(),
            transfer: None,
            closed_banks: Vec::new(),
        };

        match &cmd.op {
            Op::Act { bank, row } => {
                let b = &mut self.banks[*bank as usize];
                if b.is_open() {
                    return Err(illegal("bank already has an open row"));
                }
                b.status = BankStatus::Activating;
                b.open_row = Some(*row);
                b.act_ns = now_ns;
                b.settle(now_ns, self.trcd_ns);
            }
            Op::Pre { bank } => {
                // PRE to a closed bank is a no-op
                if self.banks[*bank as usize].is_open() {
                    self.begin_precharge(*bank as usize, now_ns);
                    event.closed_banks.push(*bank);
                }
            }
            Op::PreA => {
                for b in 0..NUM_BANKS {
                    if self.banks[b].is_open() {
                        self.begin_precharge(b, now_ns);
                        event.closed_banks.push(b as u8);
                    }
                }
            }
            Op::Rd { bank, column, payload } | Op::Wr { bank, column, payload } => {
                if !self.banks[*bank as usize].is_open() {
                    return Err(illegal("bank has no open row"));
                }
                let class = classify_interleave(
                    self.last_xfer.map(|x| (x.bank, x.column)),
                    self.banks[*bank as usize].last_column,
                    *bank,
                    *column,
                );
                let ones = payload.as_ref().map(count_ones);
                let toggles = match (&self.last_xfer, payload) {
                    (None, _) => Some(0),
                    (Some(LastTransfer { payload: Some(prev), .. }), Some(cur)) => {
                        Some(count_toggles(prev, cur))
                    }
                    _ => None,
                };
                event.transfer = Some(TransferEvent {
                    direction: cmd.direction().expect("transfer"),
                    bank: *bank,
                    column: *column,
                    class,
                    ones,
                    toggles,
                });
                self.banks[*bank as usize].last_column = Some(*column);
                self.last_xfer = Some(LastTransfer { bank: *bank, column: *column, payload: *payload });
            }
            Op::Ref => {
                if self.any_open() {
                    return Err(illegal("refresh requires all banks precharged"));
                }
            }
            Op::Pde => {
                if self.any_open() {
                    return Err(illegal("only precharge power-down is modelled"));
                }
                self.power_mode = PowerMode::FastPowerDown;
            }
            Op::Pdx => {
                if self.power_mode != PowerMode::FastPowerDown {
                    return Err(illegal("module is not in power-down"));
                }
                self.power_mode = PowerMode::Normal;
            }
            Op::End => {}
        }
        Ok(event)
    }
}

/// Classifies a RD/WR against the previous transfer on the module.
///
/// `prev` is the (bank, column) of the most recent transfer, and
/// `bank_last_column` the last column accessed in the current bank.
pub fn classify_interleave(
    prev: Option<(u8, u16)>,
    bank_last_column: Option<u16>,
    bank: u8,
    column: u16,
) -> InterleaveClass {
    match prev {
        None => InterleaveClass::NoInterleave,
        Some((pb, pc)) if pb == bank => {
            if pc == column {
                InterleaveClass::NoInterleave
            } else {
                InterleaveClass::ColumnOnly
            }
        }
        Some(_) => match bank_last_column {
            Some(c) if c != column => InterleaveClass::BankAndColumn,
            _ => InterleaveClass::BankOnly,
        },
    }
}

pub fn count_ones(line: &CacheLine) -> u32 {
    line.0.iter().map(|b| b.count_ones()).sum()
}

/// Hamming distance between two lines.
pub fn count_toggles(prev: &CacheLine, cur: &CacheLine) -> u32 {
    prev.0.iter().zip(cur.0.iter()).map(|(a, b)| (a ^ b).count_ones()).sum()
}
