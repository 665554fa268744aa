//! Power-aware cache-line encodings and the study harness that scores them.
//!
//! * `Baseline`: data as is.
//! * `Bdi`: base-delta-immediate compression, zero padded to a full line.
//! * `Optimized`: every byte mapped through a frequency-ranked codebook so
//!   that common bytes carry few ones.
//! * `Owi`: `Optimized`, with writes complemented on the wire and restored by
//!   the device before they reach the cells. Reads move the few-ones pattern
//!   and writes the many-ones one, which suits the opposite signs of the read
//!   and write per-one currents.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::dram_state::count_ones;
use crate::energy::{EnergyBreakdown, EnergyError, EnergyModel, EnergyOptions};
use crate::profiles::VendorProfile;
use crate::trace::{CacheLine, Command, Direction, Trace, LINE_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Baseline,
    Bdi,
    Optimized,
    Owi,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Baseline, Scheme::Bdi, Scheme::Optimized, Scheme::Owi];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Baseline => "baseline",
            Scheme::Bdi => "bdi",
            Scheme::Optimized => "optimized",
            Scheme::Owi => "owi",
        }
    }

    /// Extra command-bus cycles each RD/WR costs.
    pub fn latency_cycles(self) -> u64 {
        match self {
            Scheme::Optimized | Scheme::Owi => 1,
            Scheme::Baseline | Scheme::Bdi => 0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown scheme {s:?} (expected baseline, bdi, optimized or owi)"))
    }
}

/// A byte permutation assigning low-popcount codewords to frequent bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteCodebook {
    encode: [u8; 256],
    decode: [u8; 256],
}

/// Codewords ordered by (popcount, value).
fn codewords() -> [u8; 256] {
    let mut words: [u8; 256] = std::array::from_fn(|i| i as u8);
    words.sort_by_key(|&w| (w.count_ones(), w));
    words
}

impl ByteCodebook {
    pub fn identity() -> Self {
        let id = std::array::from_fn(|i| i as u8);
        ByteCodebook { encode: id, decode: id }
    }

    /// Ranks bytes by descending count (ties by ascending value) and gives
    /// rank k the k-th codeword.
    pub fn from_histogram(hist: &[u64; 256]) -> Self {
        let mut ranked: Vec<u8> = (0..=255).collect();
        ranked.sort_by_key(|&b| (std::cmp::Reverse(hist[b as usize]), b));
        let words = codewords();
        let mut encode = [0u8; 256];
        let mut decode = [0u8; 256];
        for (byte, word) in ranked.into_iter().zip(words) {
            encode[byte as usize] = word;
            decode[word as usize] = byte;
        }
        ByteCodebook { encode, decode }
    }

    pub fn encode_byte(&self, b: u8) -> u8 {
        self.encode[b as usize]
    }

    pub fn decode_byte(&self, b: u8) -> u8 {
        self.decode[b as usize]
    }

    pub fn encode_line(&self, line: &CacheLine) -> CacheLine {
        CacheLine(line.0.map(|b| self.encode_byte(b)))
    }

    pub fn decode_line(&self, line: &CacheLine) -> CacheLine {
        CacheLine(line.0.map(|b| self.decode_byte(b)))
    }
}

/// Byte frequencies over every RD/WR payload in `trace`.
pub fn byte_histogram(trace: &Trace) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for line in trace.commands().iter().filter_map(Command::payload) {
        for &b in &line.0 {
            hist[b as usize] += 1;
        }
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyError {
    #[error("trace carries no RD/WR payloads")]
    NoPayloads,
    #[error("{scheme}: {source}")]
    Energy { scheme: Scheme, source: EnergyError },
}

pub fn build_codebook(trace: &Trace) -> Result<ByteCodebook, StudyError> {
    if !trace.commands().iter().any(|c| c.payload().is_some()) {
        return Err(StudyError::NoPayloads);
    }
    Ok(ByteCodebook::from_histogram(&byte_histogram(trace)))
}

/// How a BDI line was stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BdiForm {
    Zeros,
    /// One 8-byte value repeated across the line.
    Repeated,
    BaseDelta { base_bytes: u8, delta_bytes: u8 },
}

impl BdiForm {
    /// Bytes used before zero padding.
    pub fn compressed_len(self) -> usize {
        match self {
            BdiForm::Zeros => 0,
            BdiForm::Repeated => 8,
            BdiForm::BaseDelta { base_bytes, delta_bytes } => {
                let n = LINE_BYTES / base_bytes as usize;
                base_bytes as usize + n * delta_bytes as usize + n.div_ceil(8)
            }
        }
    }
}

/// (base, delta) widths tried for base-delta compression.
pub const BDI_CONFIGS: [(u8, u8); 6] = [(8, 1), (8, 2), (8, 4), (4, 1), (4, 2), (2, 1)];

fn read_le(bytes: &[u8]) -> u64 {
    bytes.iter().rev().fold(0u64, |acc, &b| (acc << 8) | b as u64)
}

fn write_le(out: &mut [u8], v: u64) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (v >> (8 * i)) as u8;
    }
}

/// Sign-extends the low `bytes` bytes of `v`.
fn sign_extend(v: u64, bytes: usize) -> i64 {
    let shift = 64 - 8 * bytes as u32;
    ((v << shift) as i64) >> shift
}

fn fits(delta: i64, bytes: usize) -> bool {
    let bits = 8 * bytes as u32;
    let lim = 1i64 << (bits - 1);
    (-lim..lim).contains(&delta)
}

fn wrapping_delta(v: u64, base: u64, bytes: usize) -> i64 {
    sign_extend(v.wrapping_sub(base), bytes)
}

/// Layout: `[base][one delta per element][mask]`; mask bit i set means
/// element i is relative to the explicit base, clear means relative to zero.
fn try_base_delta(line: &CacheLine, k: usize, d: usize) -> Option<Vec<u8>> {
    let values: Vec<u64> = line.0.chunks_exact(k).map(read_le).collect();
    let n = values.len();
    let mut base = None;
    let mut deltas = Vec::with_capacity(n);
    let mut mask = vec![0u8; n.div_ceil(8)];
    for (i, &v) in values.iter().enumerate() {
        let from_zero = sign_extend(v, k);
        if fits(from_zero, d) {
            deltas.push(from_zero);
            continue;
        }
        let b = *base.get_or_insert(v);
        let delta = wrapping_delta(v, b, k);
        if !fits(delta, d) {
            return None;
        }
        deltas.push(delta);
        mask[i / 8] |= 1 << (i % 8);
    }
    let mut out = vec![0u8; k];
    write_le(&mut out, base.unwrap_or(0));
    for delta in deltas {
        let start = out.len();
        out.resize(start + d, 0);
        write_le(&mut out[start..], delta as u64);
    }
    out.extend(mask);
    Some(out)
}

/// Smallest BDI representation of `line`, or `None` if nothing fits.
pub fn bdi_compress(line: &CacheLine) -> Option<(BdiForm, Vec<u8>)> {
    if line.0.iter().all(|&b| b == 0) {
        return Some((BdiForm::Zeros, Vec::new()));
    }
    let first = &line.0[..8];
    if line.0.chunks_exact(8).all(|c| c == first) {
        return Some((BdiForm::Repeated, first.to_vec()));
    }
    let mut configs = BDI_CONFIGS;
    // stable: equal sizes keep list order
    configs.sort_by_key(|&(k, d)| BdiForm::BaseDelta { base_bytes: k, delta_bytes: d }.compressed_len());
    configs.into_iter().find_map(|(k, d)| {
        try_base_delta(line, k as usize, d as usize)
            .map(|bytes| (BdiForm::BaseDelta { base_bytes: k, delta_bytes: d }, bytes))
    })
}

pub fn bdi_decompress(form: BdiForm, stored: &CacheLine) -> CacheLine {
    let s = &stored.0;
    match form {
        BdiForm::Zeros => CacheLine::ZERO,
        BdiForm::Repeated => CacheLine(std::array::from_fn(|i| s[i % 8])),
        BdiForm::BaseDelta { base_bytes, delta_bytes } => {
            let (k, d) = (base_bytes as usize, delta_bytes as usize);
            let n = LINE_BYTES / k;
            let base = read_le(&s[..k]);
            let mask = &s[k + n * d..];
            let mut out = [0u8; LINE_BYTES];
            for i in 0..n {
                let at = k + i * d;
                let delta = sign_extend(read_le(&s[at..at + d]), d) as u64;
                let v = if mask[i / 8] & (1 << (i % 8)) != 0 { base.wrapping_add(delta) } else { delta };
                write_le(&mut out[i * k..(i + 1) * k], v);
            }
            CacheLine(out)
        }
    }
}

/// A line as it crosses the device's peripheral circuitry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedLine {
    pub scheme: Scheme,
    pub stored: CacheLine,
    /// BDI form; `None` for other schemes and for incompressible BDI lines.
    pub meta: Option<BdiForm>,
}

pub fn encode_line(line: &CacheLine, scheme: Scheme, book: &ByteCodebook, dir: Direction) -> EncodedLine {
    let (stored, meta) = match scheme {
        Scheme::Baseline => (*line, None),
        Scheme::Optimized => (book.encode_line(line), None),
        Scheme::Owi => {
            let opt = book.encode_line(line);
            match dir {
                Direction::Read => (opt, None),
                Direction::Write => (CacheLine(opt.0.map(|b| !b)), None),
            }
        }
        Scheme::Bdi => match bdi_compress(line) {
            Some((form, bytes)) => {
                let mut out = [0u8; LINE_BYTES];
                out[..bytes.len()].copy_from_slice(&bytes);
                (CacheLine(out), Some(form))
            }
            None => (*line, None),
        },
    };
    EncodedLine { scheme, stored, meta }
}

pub fn decode_line(enc: &EncodedLine, book: &ByteCodebook, dir: Direction) -> CacheLine {
    match enc.scheme {
        Scheme::Baseline => enc.stored,
        Scheme::Optimized => book.decode_line(&enc.stored),
        Scheme::Owi => match dir {
            Direction::Read => book.decode_line(&enc.stored),
            Direction::Write => book.decode_line(&CacheLine(enc.stored.0.map(|b| !b))),
        },
        Scheme::Bdi => match enc.meta {
            Some(form) => bdi_decompress(form, &enc.stored),
            None => enc.stored,
        },
    }
}

/// Rewrites every RD/WR payload to its encoded pattern and delays each
/// command by the latency of all transfers before it.
pub fn encode_trace(trace: &Trace, scheme: Scheme, book: &ByteCodebook) -> Trace {
    let lat = scheme.latency_cycles();
    let mut shift = 0;
    let commands = trace
        .commands()
        .iter()
        .map(|cmd| {
            let mut c = cmd.clone();
            c.cycle += shift;
            if let Some(dir) = cmd.direction() {
                if let Some(Some(line)) = c.payload_mut() {
                    *line = encode_line(line, scheme, book, dir).stored;
                }
                shift += lat;
            }
            c
        })
        .collect();
    Trace::new(commands).expect("uniform delays keep order")
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StudyOptions {
    pub energy: EnergyOptions,
    /// Charged per RD/WR for every scheme except Baseline.
    pub encoding_energy_nj: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub breakdown: EnergyBreakdown,
    pub ratio_to_baseline: f64,
}

/// Scores each scheme on `trace`; results follow the order of `schemes`.
pub fn run_encoding_study(
    trace: &Trace,
    profile: &VendorProfile,
    schemes: &[Scheme],
    opts: &StudyOptions,
) -> Result<Vec<SchemeResult>, StudyError> {
    let book = build_codebook(trace)?;
    let model = EnergyModel::from_profile(profile);
    let energy_opts = EnergyOptions { distribution: None, ..opts.energy };
    let transfers = trace.commands().iter().filter(|c| c.direction().is_some()).count() as f64;
    let score = |scheme: Scheme| -> Result<EnergyBreakdown, StudyError> {
        let encoded = encode_trace(trace, scheme, &book);
        let mut b = model
            .run(&encoded, &energy_opts)
            .map_err(|source| StudyError::Energy { scheme, source })?
            .breakdown;
        if scheme != Scheme::Baseline {
            b.encoding_nj = opts.encoding_energy_nj * transfers;
        }
        Ok(b)
    };
    let baseline = score(Scheme::Baseline)?.total_nj();
    schemes
        .par_iter()
        .map(|&scheme| {
            let breakdown = score(scheme)?;
            let ratio_to_baseline = breakdown.total_nj() / baseline;
            Ok(SchemeResult { scheme, breakdown, ratio_to_baseline })
        })
        .collect()
}

/// Ones in the stored form of `line`.
pub fn stored_ones(line: &CacheLine, scheme: Scheme, book: &ByteCodebook, dir: Direction) -> u32 {
    count_ones(&encode_line(line, scheme, book, dir).stored)
}
