#![allow(dead_code)]

use rand::Rng;
use vampire::trace::{validate_timing, NUM_BANKS};
use vampire::{CacheLine, Command, Direction, Op, TimingParams, Trace};

pub fn random_line(rng: &mut impl Rng) -> CacheLine {
    CacheLine(std::array::from_fn(|_| rng.random()))
}

#[derive(Clone, Copy)]
pub struct Mix {
    pub reads: bool,
    pub writes: bool,
    pub refresh: bool,
}

impl Mix {
    pub const ALL: Mix = Mix { reads: true, writes: true, refresh: true };
}

/// A timing-legal random trace of `steps` scheduling decisions. Payloads come
/// from `payload`. Open banks are precharged before the closing END.
pub fn random_trace<R: Rng>(
    rng: &mut R,
    t: &TimingParams,
    steps: usize,
    mix: Mix,
    mut payload: impl FnMut(&mut R, Direction) -> CacheLine,
) -> Trace {
    let c = |ns: f64| t.cycles(ns);
    let (trcd, tras, trp, trc, trfc) = (c(t.trcd_ns), c(t.tras_ns), c(t.trp_ns), c(t.trc_ns), c(t.trfc_ns));
    let mut open: [Option<u64>; NUM_BANKS] = [None; NUM_BANKS];
    let mut last_act: [Option<u64>; NUM_BANKS] = [None; NUM_BANKS];
    let mut last_pre: [Option<u64>; NUM_BANKS] = [None; NUM_BANKS];
    let mut cmds = Vec::new();
    let mut now = 0u64;
    let ready = |since: Option<u64>, gap: u64, now: u64| since.is_none_or(|s| now >= s + gap);

    for _ in 0..steps {
        let bank = rng.random_range(0..NUM_BANKS);
        match rng.random_range(0..10) {
            0 => now += rng.random_range(1..60),
            1 | 2 => {
                if open[bank].is_none() && ready(last_pre[bank], trp, now) && ready(last_act[bank], trc, now) {
                    cmds.push(Command::act(now, bank as u8, rng.random()));
                    open[bank] = Some(now);
                    last_act[bank] = Some(now);
                }
                now += 1;
            }
            3..=6 => {
                let dir = match (mix.reads, mix.writes) {
                    (true, true) => if rng.random() { Direction::Read } else { Direction::Write },
                    (true, false) => Direction::Read,
                    (false, true) => Direction::Write,
                    (false, false) => {
                        now += 1;
                        continue;
                    }
                };
                match open[bank] {
                    Some(a) if now >= a + trcd => {
                        let column = rng.random_range(0..128u16) * 8;
                        let line = Some(payload(rng, dir));
                        cmds.push(match dir {
                            Direction::Read => Command::rd(now, bank as u8, column, line),
                            Direction::Write => Command::wr(now, bank as u8, column, line),
                        });
                        now += 4;
                    }
                    _ => now += 1,
                }
            }
            7 | 8 => {
                if let Some(a) = open[bank] {
                    if now >= a + tras {
                        cmds.push(Command::pre(now, bank as u8));
                        open[bank] = None;
                        last_pre[bank] = Some(now);
                    }
                }
                now += 1;
            }
            _ => {
                if mix.refresh
                    && open.iter().all(Option::is_none)
                    && last_pre.iter().all(|&p| ready(p, trp, now))
                {
                    cmds.push(Command::new(now, Op::Ref));
                    now += trfc;
                } else {
                    now += 1;
                }
            }
        }
    }
    for bank in 0..NUM_BANKS {
        if let Some(a) = open[bank] {
            now = now.max(a + tras);
            cmds.push(Command::pre(now, bank as u8));
            now += 1;
        }
    }
    cmds.push(Command::new(now + trp, Op::End));
    let trace = Trace::new(cmds).expect("generator keeps cycles ordered");
    let v = validate_timing(&trace, t);
    assert!(v.is_empty(), "generator produced an illegal trace: {}", v[0]);
    trace
}
