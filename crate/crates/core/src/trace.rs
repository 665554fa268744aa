//! DRAM command traces: parsing, serialization and timing validation.
//!
//! A trace is line-oriented text. Every non-comment line has the form
//!
//! ```text
//! cycle,KIND[,bank[,row|column[,payload-hex]]]
//! ```
//!
//! where `cycle` counts DRAM clock cycles since the start of the trace and
//! `payload-hex` is the 64-byte cache line transferred by a `RD`/`WR`,
//! written as 128 hex digits. Blank lines and anything after `#` are ignored.
//!
//! | kind   | fields                       |
//! |--------|------------------------------|
//! | `ACT`  | `bank,row`                   |
//! | `PRE`  | `bank`                       |
//! | `PREA` | none                         |
//! | `RD`   | `bank,column[,payload]`      |
//! | `WR`   | `bank,column[,payload]`      |
//! | `REF`, `PDE`, `PDX`, `END` | none     |
//!
//! `END` marks the end of the traced interval; nothing may follow it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::profiles::TimingParams;

/// Number of banks in the single modelled rank.
pub const NUM_BANKS: usize = 8;
/// Highest legal column address.
pub const MAX_COLUMN: u16 = 1023;
/// Bytes in one cache line.
pub const LINE_BYTES: usize = 64;
/// Bits in one cache line.
pub const LINE_BITS: u32 = 512;
/// Clock cycles occupied by one burst-length-8 transfer.
pub const BURST_CYCLES: u64 = 4;

/// One 64-byte cache line as it is read from or written to the module.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct CacheLine(pub [u8; LINE_BYTES]);

impl CacheLine {
    pub const ZERO: CacheLine = CacheLine([0; LINE_BYTES]);

    /// A line with every byte set to `byte`.
    pub fn splat(byte: u8) -> Self {
        CacheLine([byte; LINE_BYTES])
    }

    pub fn bytes(&self) -> &[u8; LINE_BYTES] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, LineHexError> {
        if s.len() != 2 * LINE_BYTES {
            return Err(LineHexError::Length(s.len()));
        }
        let mut out = [0u8; LINE_BYTES];
        hex::decode_to_slice(s, &mut out).map_err(|_| LineHexError::Digit)?;
        Ok(CacheLine(out))
    }
}

impl Default for CacheLine {
    fn default() -> Self {
        CacheLine::ZERO
    }
}

impl fmt::Debug for CacheLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CacheLine({})", self.to_hex())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineHexError {
    #[error("payload has {0} hex digits, expected 128")]
    Length(usize),
    #[error("payload contains a non-hex digit")]
    Digit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CommandKind {
    Act,
    Pre,
    PreA,
    Rd,
    Wr,
    Ref,
    Pde,
    Pdx,
    End,
}

impl CommandKind {
    pub const ALL: [CommandKind; 9] = [
        CommandKind::Act,
        CommandKind::Pre,
        CommandKind::PreA,
        CommandKind::Rd,
        CommandKind::Wr,
        CommandKind::Ref,
        CommandKind::Pde,
        CommandKind::Pdx,
        CommandKind::End,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            CommandKind::Act => "ACT",
            CommandKind::Pre => "PRE",
            CommandKind::PreA => "PREA",
            CommandKind::Rd => "RD",
            CommandKind::Wr => "WR",
            CommandKind::Ref => "REF",
            CommandKind::Pde => "PDE",
            CommandKind::Pdx => "PDX",
            CommandKind::End => "END",
        }
    }

    pub fn is_transfer(self) -> bool {
        matches!(self, CommandKind::Rd | CommandKind::Wr)
    }
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

impl FromStr for CommandKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        CommandKind::ALL
            .into_iter()
            .find(|k| k.mnemonic().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

/// Direction of a data transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Read,
    Write,
}

/// The operation carried by a [`Command`]. Addressing fields exist exactly
/// for the kinds that need them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Act { bank: u8, row: u16 },
    Pre { bank: u8 },
    PreA,
    Rd { bank: u8, column: u16, payload: Option<CacheLine> },
    Wr { bank: u8, column: u16, payload: Option<CacheLine> },
    Ref,
    Pde,
    Pdx,
    End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub cycle: u64,
    pub op: Op,
}

impl Command {
    pub fn new(cycle: u64, op: Op) -> Self {
        Command { cycle, op }
    }

    pub fn act(cycle: u64, bank: u8, row: u16) -> Self {
        Command::new(cycle, Op::Act { bank, row })
    }

    pub fn pre(cycle: u64, bank: u8) -> Self {
        Command::new(cycle, Op::Pre { bank })
    }

    pub fn rd(cycle: u64, bank: u8, column: u16, payload: Option<CacheLine>) -> Self {
        Command::new(cycle, Op::Rd { bank, column, payload })
    }

    pub fn wr(cycle: u64, bank: u8, column: u16, payload: Option<CacheLine>) -> Self {
        Command::new(cycle, Op::Wr { bank, column, payload })
    }

    pub fn kind(&self) -> CommandKind {
        match self.op {
            Op::Act { .. } => CommandKind::Act,
            Op::Pre { .. } => CommandKind::Pre,
            Op::PreA => CommandKind::PreA,
            Op::Rd { .. } => CommandKind::Rd,
            Op::Wr { .. } => CommandKind::Wr,
            Op::Ref => CommandKind::Ref,
            Op::Pde => CommandKind::Pde,
            Op::Pdx => CommandKind::Pdx,
            Op::End => CommandKind::End,
        }
    }

    pub fn bank(&self) -> Option<u8> {
        match self.op {
            Op::Act { bank, .. } | Op::Pre { bank } => Some(bank),
            Op::Rd { bank, .. } | Op::Wr { bank, .. } => Some(bank),
            _ => None,
        }
    }

    pub fn row(&self) -> Option<u16> {
        match self.op {
            Op::Act { row, .. } => Some(row),
            _ => None,
        }
    }

    pub fn column(&self) -> Option<u16> {
        match self.op {
            Op::Rd { column, .. } | Op::Wr { column, .. } => Some(column),
            _ => None,
        }
    }

    pub fn payload(&self) -> Option<&CacheLine> {
        match &self.op {
            Op::Rd { payload, .. } | Op::Wr { payload, .. } => payload.as_ref(),
            _ => None,
        }
    }

    pub fn payload_mut(&mut self) -> Option<&mut Option<CacheLine>> {
        match &mut self.op {
            Op::Rd { payload, .. } | Op::Wr { payload, .. } => Some(payload),
            _ => None,
        }
    }

    pub fn direction(&self) -> Option<Direction> {
        match self.op {
            Op::Rd { .. } => Some(Direction::Read),
            Op::Wr { .. } => Some(Direction::Write),
            _ => None,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.cycle, self.kind())?;
        match &self.op {
            Op::Act { bank, row } => write!(f, ",{bank},{row}"),
            Op::Pre { bank } => write!(f, ",{bank}"),
            Op::Rd { bank, column, payload } | Op::Wr { bank, column, payload } => {
                write!(f, ",{bank},{column}")?;
                match payload {
                    Some(line) => write!(f, ",{}", line.to_hex()),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}

/// How RD/WR payloads are treated while parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Every RD/WR must carry a 64-byte payload.
    #[default]
    Payload,
    /// Payloads are optional and never decoded; the energy engine falls back
    /// to a [`DataDistribution`].
    Distribution,
}

/// Expected data statistics used when a trace carries no payloads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataDistribution {
    ones_fraction: f64,
    toggle_fraction: f64,
}

impl DataDistribution {
    pub fn new(ones_fraction: f64, toggle_fraction: f64) -> Result<Self, DistributionError> {
        for (name, v) in [("ones_fraction", ones_fraction), ("toggle_fraction", toggle_fraction)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DistributionError { name, value: v });
            }
        }
        Ok(DataDistribution { ones_fraction, toggle_fraction })
    }

    pub fn ones_fraction(&self) -> f64 {
        self.ones_fraction
    }

    pub fn toggle_fraction(&self) -> f64 {
        self.toggle_fraction
    }

    /// Expected number of ones in a 512-bit line.
    pub fn expected_ones(&self) -> f64 {
        self.ones_fraction * LINE_BITS as f64
    }

    /// Expected number of toggled bits between consecutive transfers.
    pub fn expected_toggles(&self) -> f64 {
        self.toggle_fraction * LINE_BITS as f64
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{name} must lie in [0, 1], got {value}")]
pub struct DistributionError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("malformed line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("unknown command kind {kind:?} at line {line}")]
    UnknownKind { line: usize, kind: String },
    #[error("missing payload at line {line}")]
    MissingPayload { line: usize },
    #[error("bad payload at line {line}: {source}")]
    Payload { line: usize, source: LineHexError },
    #[error("cycle {cycle} at line {line} precedes previous cycle {previous}")]
    DecreasingCycle { line: usize, cycle: u64, previous: u64 },
    #[error("command after END at line {line}")]
    AfterEnd { line: usize },
}

impl TraceError {
    pub fn line(&self) -> usize {
        match *self {
            TraceError::Malformed { line, .. }
            | TraceError::UnknownKind { line, .. }
            | TraceError::MissingPayload { line }
            | TraceError::Payload { line, .. }
            | TraceError::DecreasingCycle { line, .. }
            | TraceError::AfterEnd { line } => line,
        }
    }
}

/// An ordered, immutable command stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    commands: Vec<Command>,
}

impl Trace {
    /// Builds a trace from commands, checking the ordering invariants the
    /// parser enforces. Line numbers in errors are 1-based command indices.
    pub fn new(commands: Vec<Command>) -> Result<Self, TraceError> {
        let mut previous = 0;
        let mut ended = false;
        for (i, cmd) in commands.iter().enumerate() {
            let line = i + 1;
            if ended {
                return Err(TraceError::AfterEnd { line });
            }
            if cmd.cycle < previous {
                return Err(TraceError::DecreasingCycle { line, cycle: cmd.cycle, previous });
            }
            check_address(cmd, line)?;
            previous = cmd.cycle;
            ended = cmd.kind() == CommandKind::End;
        }
        Ok(Trace { commands })
    }

    pub fn commands(&self) -> &[Command] {
        &self.commands
    }

    pub fn into_commands(self) -> Vec<Command> {
        self.commands
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    /// The cycle at which the traced interval ends: the `END` marker when
    /// present, otherwise the last command's cycle.
    pub fn end_cycle(&self) -> u64 {
        self.commands.last().map_or(0, |c| c.cycle)
    }

    /// Returns true when every RD/WR carries a payload.
    pub fn has_all_payloads(&self) -> bool {
        self.commands
            .iter()
            .filter(|c| c.kind().is_transfer())
            .all(|c| c.payload().is_some())
    }

    /// Canonical text form: one command per line, upper-case mnemonics,
    /// lower-case hex, no comments.
    pub fn serialize(&self) -> String {
        let mut out = String::with_capacity(self.commands.len() * 24);
        for cmd in &self.commands {
            out.push_str(&cmd.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn check_address(cmd: &Command, line: usize) -> Result<(), TraceError> {
    if let Some(bank) = cmd.bank() {
        if bank as usize >= NUM_BANKS {
            return Err(TraceError::Malformed { line, reason: format!("bank {bank} out of range 0..7") });
        }
    }
    if let Some(column) = cmd.column() {
        if column > MAX_COLUMN {
            return Err(TraceError::Malformed {
                line,
                reason: format!("column {column} out of range 0..{MAX_COLUMN}"),
            });
        }
    }
    Ok(())
}

/// Parses trace text.
pub fn parse_trace(text: &str, mode: ParseMode) -> Result<Trace, TraceError> {
    let mut commands = Vec::new();
    let mut previous = 0u64;
    let mut ended = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if ended {
            return Err(TraceError::AfterEnd { line });
        }
        let cmd = parse_line(content, line, mode)?;
        if cmd.cycle < previous {
            return Err(TraceError::DecreasingCycle { line, cycle: cmd.cycle, previous });
        }
        previous = cmd.cycle;
        ended = cmd.kind() == CommandKind::End;
        commands.push(cmd);
    }
    Ok(Trace { commands })
}

fn parse_line(content: &str, line: usize, mode: ParseMode) -> Result<Command, TraceError> {
    let fields: Vec<&str> = content.split(',').map(str::trim).collect();
    let malformed = |reason: String| TraceError::Malformed { line, reason };

    if fields.len() < 2 {
        return Err(malformed("expected at least `cycle,KIND`".into()));
    }
    let cycle: u64 = fields[0]
        .parse()
        .map_err(|_| malformed(format!("bad cycle {:?}", fields[0])))?;
    let kind: CommandKind = fields[1]
        .parse()
        .map_err(|_| TraceError::UnknownKind { line, kind: fields[1].to_string() })?;
    let args = &fields[2..];

    let expect = |n: usize| -> Result<(), TraceError> {
        if args.len() != n {
            Err(TraceError::Malformed {
                line,
                reason: format!("{kind} takes {n} field(s), got {}", args.len()),
            })
        } else {
            Ok(())
        }
    };
    let bank = |s: &str| -> Result<u8, TraceError> {
        match s.parse::<u8>() {
            Ok(b) if (b as usize) < NUM_BANKS => Ok(b),
            _ => Err(TraceError::Malformed { line, reason: format!("bad bank {s:?}") }),
        }
    };

    let op = match kind {
        CommandKind::Act => {
            expect(2)?;
            let row = args[1]
                .parse::<u16>()
                .map_err(|_| malformed(format!("bad row {:?}", args[1])))?;
            Op::Act { bank: bank(args[0])?, row }
        }
        CommandKind::Pre => {
            expect(1)?;
            Op::Pre { bank: bank(args[0])? }
        }
        CommandKind::Rd | CommandKind::Wr => {
            if args.len() < 2 || args.len() > 3 {
                return Err(malformed(format!("{kind} takes bank,column[,payload]")));
            }
            let b = bank(args[0])?;
            let column = match args[1].parse::<u16>() {
                Ok(c) if c <= MAX_COLUMN => c,
                _ => return Err(malformed(format!("bad column {:?}", args[1]))),
            };
            let payload = match (args.get(2), mode) {
                (Some(hex), ParseMode::Payload) => Some(
                    CacheLine::from_hex(hex).map_err(|source| TraceError::Payload { line, source })?,
                ),
                (None, ParseMode::Payload) => return Err(TraceError::MissingPayload { line }),
                // distribution mode never looks at payload bytes
                (_, ParseMode::Distribution) => None,
            };
            if kind == CommandKind::Rd {
                Op::Rd { bank: b, column, payload }
            } else {
                Op::Wr { bank: b, column, payload }
            }
        }
        CommandKind::PreA => {
            expect(0)?;
            Op::PreA
        }
        CommandKind::Ref => {
            expect(0)?;
            Op::Ref
        }
        CommandKind::Pde => {
            expect(0)?;
            Op::Pde
        }
        CommandKind::Pdx => {
            expect(0)?;
            Op::Pdx
        }
        CommandKind::End => {
            expect(0)?;
            Op::End
        }
    };
    Ok(Command { cycle, op })
}

/// Which timing rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// ACT to RD/WR on the same bank.
    Trcd,
    /// PRE to ACT on the same bank.
    Trp,
    /// ACT to PRE on the same bank.
    Tras,
    /// ACT to ACT on the same bank.
    Trc,
    /// REF to the next command.
    Trfc,
    /// RD/WR to a bank without an activated row.
    BankNotActive,
}

impl ViolationKind {
    pub fn name(self) -> &'static str {
        match self {
            ViolationKind::Trcd => "tRCD",
            ViolationKind::Trp => "tRP",
            ViolationKind::Tras => "tRAS",
            ViolationKind::Trc => "tRC",
            ViolationKind::Trfc => "tRFC",
            ViolationKind::BankNotActive => "bank-not-active",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Index of the offending command within the trace.
    pub index: usize,
    pub cycle: u64,
    pub bank: Option<u8>,
    pub kind: ViolationKind,
    /// Required separation in ns (0 for [`ViolationKind::BankNotActive`]).
    pub required_ns: f64,
    /// Observed separation in ns.
    pub actual_ns: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle {}: {} violation", self.cycle, self.kind.name())?;
        if let Some(bank) = self.bank {
            write!(f, " on bank {bank}")?;
        }
        if self.kind != ViolationKind::BankNotActive {
            write!(f, " ({} ns < {} ns)", self.actual_ns, self.required_ns)?;
        }
        Ok(())
    }
}

// Separations are compared in ns; the slack absorbs rounding in cycles*tCK.
const TIMING_SLACK_NS: f64 = 1e-9;

#[derive(Default, Clone, Copy)]
struct BankTiming {
    open: bool,
    last_act: Option<u64>,
    last_pre: Option<u64>,
}

/// Checks the trace against the row-cycle timing constraints. Violations
/// are data: an empty result means the trace is clean.
pub fn validate_timing(trace: &Trace, timings: &TimingParams) -> Vec<Violation> {
    let tck = timings.tck_ns;
    let mut banks = [BankTiming::default(); NUM_BANKS];
    let mut last_ref: Option<u64> = None;
    let mut out = Vec::new();

    for (index, cmd) in trace.commands().iter().enumerate() {
        let now = cmd.cycle;
        let check = |out: &mut Vec<Violation>, since: Option<u64>, required_ns: f64, bank, kind| {
            if let Some(then) = since {
                let actual_ns = (now - then) as f64 * tck;
                if actual_ns + TIMING_SLACK_NS < required_ns {
                    out.push(Violation { index, cycle: now, bank, kind, required_ns, actual_ns });
                }
            }
        };

        if cmd.kind() != CommandKind::End {
            check(&mut out, last_ref, timings.trfc_ns, None, ViolationKind::Trfc);
        }

        match cmd.op {
            Op::Act { bank, .. } => {
                let b = banks[bank as usize];
                check(&mut out, b.last_pre, timings.trp_ns, Some(bank), ViolationKind::Trp);
                check(&mut out, b.last_act, timings.trc_ns, Some(bank), ViolationKind::Trc);
                banks[bank as usize].open = true;
                banks[bank as usize].last_act = Some(now);
            }
            Op::Pre { bank } => {
                let b = banks[bank as usize];
                if b.open {
                    check(&mut out, b.last_act, timings.tras_ns, Some(bank), ViolationKind::Tras);
                    banks[bank as usize].open = false;
                    banks[bank as usize].last_pre = Some(now);
                }
            }
            Op::PreA => {
                for (i, b) in banks.iter_mut().enumerate() {
                    if b.open {
                        check(&mut out, b.last_act, timings.tras_ns, Some(i as u8), ViolationKind::Tras);
                        b.open = false;
                        b.last_pre = Some(now);
                    }
                }
            }
            Op::Rd { bank, .. } | Op::Wr { bank, .. } => {
                let b = banks[bank as usize];
                if b.open {
                    check(&mut out, b.last_act, timings.trcd_ns, Some(bank), ViolationKind::Trcd);
                } else {
                    out.push(Violation {
                        index,
                        cycle: now,
                        bank: Some(bank),
                        kind: ViolationKind::BankNotActive,
                        required_ns: 0.0,
                        actual_ns: 0.0,
                    });
                }
            }
            Op::Ref => last_ref = Some(now),
            Op::Pde | Op::Pdx | Op::End => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn timings() -> TimingParams {
        TimingParams::ddr3l_800()
    }

    #[test]
    fn act_line_maps_fields() {
        let t = parse_trace("0,ACT,2,128", ParseMode::Payload).unwrap();
        assert_eq!(t.commands(), &[Command::act(0, 2, 128)]);
    }

    #[test]
    fn zero_payload_line() {
        let text = format!("14,RD,2,0,{}", "0".repeat(128));
        let t = parse_trace(&text, ParseMode::Payload).unwrap();
        assert_eq!(t.commands()[0], Command::rd(14, 2, 0, Some(CacheLine::ZERO)));
    }

    #[test]
    fn missing_payload_in_payload_mode() {
        let err = parse_trace("5,RD,1,0", ParseMode::Payload).unwrap_err();
        assert_eq!(err, TraceError::MissingPayload { line: 1 });
        assert_eq!(err.to_string(), "missing payload at line 1");
    }

    #[test]
    fn distribution_mode_accepts_missing_payload() {
        let t = parse_trace("5,RD,1,0\n9,WR,1,8,zz", ParseMode::Distribution).unwrap();
        assert!(t.commands().iter().all(|c| c.payload().is_none()));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let short = format!("0,ACT,0,0\n# comment\n\n4,RD,0,0,{}", "ab".repeat(10));
        assert!(matches!(
            parse_trace(&short, ParseMode::Payload),
            Err(TraceError::Payload { line: 4, source: LineHexError::Length(20) })
        ));
        assert!(matches!(
            parse_trace("0,FOO", ParseMode::Payload),
            Err(TraceError::UnknownKind { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("5,REF\n3,REF", ParseMode::Payload),
            Err(TraceError::DecreasingCycle { line: 2, cycle: 3, previous: 5 })
        ));
        assert!(matches!(
            parse_trace("0,ACT,9,0", ParseMode::Payload),
            Err(TraceError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("0,PRE", ParseMode::Payload),
            Err(TraceError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("x,REF", ParseMode::Payload),
            Err(TraceError::Malformed { line: 1, .. })
        ));
        assert!(matches!(
            parse_trace("3,END\n4,REF", ParseMode::Payload),
            Err(TraceError::AfterEnd { line: 2 })
        ));
    }

    #[test]
    fn comments_whitespace_and_case_are_canonicalized() {
        let hex_upper = "AB".repeat(64);
        let text = format!(" 0 , act , 1 , 7  # open\n6,rd,1,3,{hex_upper}\n20,PRE,1\n30,END\n");
        let t = parse_trace(&text, ParseMode::Payload).unwrap();
        let canonical = format!("0,ACT,1,7\n6,RD,1,3,{}\n20,PRE,1\n30,END\n", "ab".repeat(64));
        assert_eq!(t.serialize(), canonical);
        assert_eq!(t.end_cycle(), 30);
    }

    #[test]
    fn trcd_respected_at_six_cycles() {
        let t = Trace::new(vec![Command::act(0, 0, 0), Command::rd(6, 0, 0, None)]).unwrap();
        assert!(validate_timing(&t, &timings()).is_empty());
    }

    #[test]
    fn trcd_violated_at_four_cycles() {
        let t = Trace::new(vec![Command::act(0, 0, 0), Command::rd(4, 0, 0, None)]).unwrap();
        let v = validate_timing(&t, &timings());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::Trcd);
        assert_eq!(v[0].actual_ns, 10.0);
        assert_eq!(v[0].required_ns, 13.75);
    }

    #[test]
    fn empty_trace_is_clean() {
        assert!(validate_timing(&Trace::default(), &timings()).is_empty());
    }

    #[test]
    fn each_rule_fires() {
        let tm = timings();
        let cases: Vec<(Vec<Command>, ViolationKind)> = vec![
            (vec![Command::act(0, 0, 0), Command::pre(10, 0)], ViolationKind::Tras),
            (
                vec![Command::act(0, 0, 0), Command::pre(14, 0), Command::act(17, 0, 1)],
                ViolationKind::Trp,
            ),
            (vec![Command::rd(0, 3, 0, None)], ViolationKind::BankNotActive),
            (
                vec![Command::new(0, Op::Ref), Command::act(10, 0, 0)],
                ViolationKind::Trfc,
            ),
            (
                vec![Command::act(0, 0, 0), Command::new(14, Op::PreA), Command::act(19, 0, 0)],
                ViolationKind::Trc,
            ),
        ];
        for (cmds, expected) in cases {
            let v = validate_timing(&Trace::new(cmds).unwrap(), &tm);
            assert!(v.iter().any(|x| x.kind == expected), "{expected:?} not in {v:?}");
        }
    }

    #[test]
    fn prea_closes_every_open_bank() {
        let t = Trace::new(vec![
            Command::act(0, 0, 0),
            Command::act(4, 5, 0),
            Command::new(20, Op::PreA),
            Command::rd(30, 5, 0, None),
        ])
        .unwrap();
        let v = validate_timing(&t, &timings());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::BankNotActive);
        assert_eq!(v[0].bank, Some(5));
    }

    fn arb_command() -> impl Strategy<Value = Op> {
        let line = proptest::collection::vec(any::<u8>(), 64).prop_map(|v| {
            let mut a = [0u8; 64];
            a.copy_from_slice(&v);
            CacheLine(a)
        });
        prop_oneof![
            (0u8..8, any::<u16>()).prop_map(|(bank, row)| Op::Act { bank, row }),
            (0u8..8).prop_map(|bank| Op::Pre { bank }),
            Just(Op::PreA),
            (0u8..8, 0u16..1024, line.clone())
                .prop_map(|(bank, column, p)| Op::Rd { bank, column, payload: Some(p) }),
            (0u8..8, 0u16..1024, line).prop_map(|(bank, column, p)| Op::Wr { bank, column, payload: Some(p) }),
            Just(Op::Ref),
            Just(Op::Pde),
            Just(Op::Pdx),
        ]
    }

    proptest! {
        #[test]
        fn serialize_parse_roundtrip(ops in proptest::collection::vec((0u64..50, arb_command()), 0..40)) {
            let mut cycle = 0;
            let commands: Vec<Command> = ops
                .into_iter()
                .map(|(gap, op)| {
                    cycle += gap;
                    Command::new(cycle, op)
                })
                .collect();
            let trace = Trace::new(commands).unwrap();
            let text = trace.serialize();
            let parsed = parse_trace(&text, ParseMode::Payload).unwrap();
            prop_assert_eq!(&parsed, &trace);
            prop_assert_eq!(parsed.serialize(), text);
        }
    }
}
