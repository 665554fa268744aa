mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vampire::dram_state::count_ones;
use vampire::encoding::{
    bdi_compress, build_codebook, encode_line, encode_trace, run_encoding_study, BdiForm, ByteCodebook, Scheme,
    StudyOptions, BDI_CONFIGS,
};
use vampire::trace::validate_timing;
use vampire::{CacheLine, Direction, VendorProfile};

use common::{random_line, random_trace, Mix};

/// Reference: does some choice of explicit base let every `k`-byte element
/// sit within a signed `d`-byte delta of either zero or that base?
fn reference_fits(line: &[u8; 64], k: usize, d: usize) -> bool {
    let vals: Vec<i128> = line
        .chunks(k)
        .map(|c| {
            let mut v: i128 = 0;
            for (i, &b) in c.iter().enumerate() {
                v |= (b as i128) << (8 * i);
            }
            // two's complement value of the element
            if v >= 1i128 << (8 * k - 1) { v - (1i128 << (8 * k)) } else { v }
        })
        .collect();
    let lim = 1i128 << (8 * d - 1);
    let modulus = 1i128 << (8 * k);
    let small = |v: i128| -lim <= v && v < lim;
    let wrap = |x: i128| {
        let r = x.rem_euclid(modulus);
        if r >= modulus / 2 { r - modulus } else { r }
    };
    let far: Vec<i128> = vals.iter().copied().filter(|&v| !small(v)).collect();
    match far.first() {
        None => true,
        Some(&base) => far.iter().all(|&v| small(wrap(v - base))),
    }
}

fn reference_best(line: &[u8; 64]) -> Option<usize> {
    if line.iter().all(|&b| b == 0) {
        return Some(0);
    }
    if line.chunks(8).all(|c| c == &line[..8]) {
        return Some(8);
    }
    BDI_CONFIGS
        .iter()
        .filter(|&&(k, d)| reference_fits(line, k as usize, d as usize))
        .map(|&(k, d)| {
            let n = 64 / k as usize;
            k as usize + n * d as usize + n.div_ceil(8)
        })
        .min()
}

#[test]
fn bdi_agrees_with_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..20_000 {
        let line = match i % 4 {
            0 => random_line(&mut rng).0,
            1 => {
                let base: u64 = rng.random();
                let mut b = [0u8; 64];
                for k in 0..8 {
                    let v = if rng.random_bool(0.3) { rng.random_range(0..300) } else { base.wrapping_add(rng.random_range(0..70_000)) };
                    b[8 * k..8 * k + 8].copy_from_slice(&v.to_le_bytes());
                }
                b
            }
            2 => {
                let base: u16 = rng.random();
                let mut b = [0u8; 64];
                for k in 0..32 {
                    let v = base.wrapping_add(rng.random_range(0..200));
                    b[2 * k..2 * k + 2].copy_from_slice(&v.to_le_bytes());
                }
                b
            }
            _ => std::array::from_fn(|_| if rng.random_bool(0.9) { 0 } else { rng.random() }),
        };
        let got = bdi_compress(&CacheLine(line)).map(|(f, bytes)| {
            assert_eq!(bytes.len(), f.compressed_len());
            f.compressed_len()
        });
        assert_eq!(got, reference_best(&line), "line {line:?}");
    }
}

#[test]
fn bdi_example_lines() {
    let base = 0x1234_5678u32;
    let mut bytes = [0u8; 64];
    for k in 0..16 {
        bytes[4 * k..4 * k + 4].copy_from_slice(&(base + (k as u32).count_ones() % 2).to_le_bytes());
    }
    let line = CacheLine(bytes);
    let (form, _) = bdi_compress(&line).unwrap();
    assert_eq!(form, BdiForm::BaseDelta { base_bytes: 4, delta_bytes: 1 });
    assert_eq!(reference_best(&bytes), Some(22));
    let enc = encode_line(&line, Scheme::Bdi, &ByteCodebook::identity(), Direction::Write);
    assert!(count_ones(&enc.stored) < count_ones(&line));
    assert!(enc.stored.0[22..].iter().all(|&b| b == 0));

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let random = random_line(&mut rng);
    assert!(bdi_compress(&random).is_none());
    assert_eq!(reference_best(&random.0), None);
}

#[test]
fn bdi_on_incompressible_trace_is_neutral() {
    let p = VendorProfile::vendor_a();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBD1);
    let tr = random_trace(&mut rng, &p.timing, 3000, Mix::ALL, |r, _| random_line(r));
    let r = run_encoding_study(&tr, &p, &[Scheme::Bdi], &StudyOptions::default()).unwrap();
    assert!((r[0].ratio_to_baseline - 1.0).abs() < 0.01, "{}", r[0].ratio_to_baseline);
}

#[test]
fn encoded_traces_stay_legal() {
    let p = VendorProfile::vendor_c();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tr = random_trace(&mut rng, &p.timing, 800, Mix::ALL, |r, _| {
        CacheLine(std::array::from_fn(|_| if r.random_bool(0.7) { 0x5A } else { r.random() }))
    });
    let book = build_codebook(&tr).unwrap();
    for scheme in Scheme::ALL {
        let enc = encode_trace(&tr, scheme, &book);
        assert!(validate_timing(&enc, &p.timing).is_empty(), "{scheme}");
        assert_eq!(enc.len(), tr.len());
        let transfers = tr.commands().iter().filter(|c| c.direction().is_some()).count() as u64;
        assert_eq!(enc.end_cycle(), tr.end_cycle() + transfers * scheme.latency_cycles());
    }
}

#[test]
fn encoding_energy_term_scales_with_accesses() {
    let p = VendorProfile::vendor_b();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tr = random_trace(&mut rng, &p.timing, 500, Mix::ALL, |r, _| random_line(r));
    let n = tr.commands().iter().filter(|c| c.direction().is_some()).count() as f64;
    let plain = run_encoding_study(&tr, &p, &Scheme::ALL, &StudyOptions::default()).unwrap();
    let taxed = run_encoding_study(&tr, &p, &Scheme::ALL, &StudyOptions { encoding_energy_nj: 0.01, ..Default::default() })
        .unwrap();
    for (a, b) in plain.iter().zip(&taxed) {
        let extra = b.breakdown.total_nj() - a.breakdown.total_nj();
        let expect = if a.scheme == Scheme::Baseline { 0.0 } else { 0.01 * n };
        assert!((extra - expect).abs() < 1e-9, "{}", a.scheme);
    }
}
