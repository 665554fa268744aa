use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn vampire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vampire")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn line(byte: u8) -> String {
    format!("{byte:02x}").repeat(64)
}

/// ACT, two reads, a write, PRE, all legal on DDR3L-800.
fn small_trace() -> String {
    format!(
        "# small\n0,ACT,0,5\n6,RD,0,0,{}\n10,RD,0,8,{}\n14,WR,0,16,{}\n24,PRE,0\n40,END\n",
        line(0x0f),
        line(0xff),
        line(0x00)
    )
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn help_and_version_exit_zero() {
    let o = vampire(&["--help"]);
    assert_eq!(code(&o), 0);
    for verb in ["validate-trace", "analyze", "compare", "fit", "extrapolate-idd", "encode", "gen-idd-loop", "profile-lint"] {
        assert!(stdout(&o).contains(verb), "{verb}");
        let h = vampire(&[verb, "--help"]);
        assert_eq!(code(&h), 0, "{verb}");
        assert!(!stdout(&h).is_empty());
    }
    assert_eq!(code(&vampire(&["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&vampire(&[])), 1);
    assert_eq!(code(&vampire(&["no-such-verb"])), 1);
    assert_eq!(code(&vampire(&["analyze"])), 1);
    let o = vampire(&["analyze", "--trace", "x", "--ones-fraction", "0.5"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn analyze_reports_every_category() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "a.trace", &small_trace());
    let o = vampire(&["analyze", "--trace", s(&t)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["category", "energy_nj"]);
    let get = |k: &str| rows.iter().find(|r| r[0] == k).unwrap()[1].parse::<f64>().unwrap();
    let parts: f64 = rows[1..].iter().filter(|r| r[0] != "total" && !r[0].starts_with("read_")).map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((parts - get("total")).abs() < 1e-5);
    assert!(get("read") > 0.0 && get("write") > 0.0 && get("act_pre") > 0.0);
}

#[test]
fn analyze_ledger_and_gnuplot() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "a.trace", &small_trace());
    let ledger = dir.path().join("ledger.csv");
    let o = vampire(&["analyze", "--trace", s(&t), "--ledger", s(&ledger), "--gnuplot"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.starts_with("# category energy_nj\n"));
    assert!(!out.contains(','));
    let led = std::fs::read_to_string(&ledger).unwrap();
    let rows = csv_rows(&led);
    assert_eq!(rows[0], ["cycle", "command", "energy_nj"]);
    assert_eq!(rows[1][..2], ["0", "ACT"]);
    assert_eq!(rows.len(), 1 + 6);
}

#[test]
fn missing_and_malformed_inputs_name_the_file() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.trace");
    let o = vampire(&["analyze", "--trace", s(&missing)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("missing.trace"));

    let bad = write(&dir, "bad.trace", "0,ACT,0,5\n6,FOO,0\n");
    let o = vampire(&["analyze", "--trace", s(&bad)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.trace") && stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = vampire(&["analyze", "--trace", s(&bad), "--profile", "no_such_profile"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn validate_trace_exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(&dir, "good.trace", &small_trace());
    let o = vampire(&["validate-trace", "--trace", s(&good)]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), "index,cycle,bank,constraint,required_ns,actual_ns\n");

    let early = write(&dir, "early.trace", &format!("0,ACT,0,5\n2,RD,0,0,{}\n20,END\n", line(1)));
    let o = vampire(&["validate-trace", "--trace", s(&early)]);
    assert_eq!(code(&o), 2);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[1][..4], ["1", "2", "0", "tRCD"]);

    let o = vampire(&["analyze", "--trace", s(&early)]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&vampire(&["analyze", "--trace", s(&early), "--force"])), 0);

    let broken = write(&dir, "broken.trace", "zero,ACT,0,5\n");
    assert_eq!(code(&vampire(&["validate-trace", "--trace", s(&broken)])), 1);
}

#[test]
fn distribution_mode_accepts_bare_transfers() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "bare.trace", "0,ACT,0,5\n6,RD,0,0\n10,WR,0,8\n24,PRE,0\n40,END\n");
    assert_eq!(code(&vampire(&["analyze", "--trace", s(&t)])), 1);
    let o = vampire(&["analyze", "--trace", s(&t), "--ones-fraction", "0.5", "--toggle-fraction", "0.25"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = vampire(&["analyze", "--trace", s(&t), "--ones-fraction", "1.5", "--toggle-fraction", "0.25"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn compare_orders_models() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a.trace", &small_trace());
    let b = write(&dir, "b.trace", &small_trace());
    let o = vampire(&["compare", "--trace", &format!("{},{}", s(&a), s(&b)), "--profile", "vendor_c"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["trace", "model", "energy_nj", "avg_power_mw", "relative_error_pct"]);
    assert_eq!(rows.len(), 1 + 6);
    assert!(rows[1][0].ends_with("a.trace") && rows[4][0].ends_with("b.trace"));
    let models: Vec<&str> = rows[1..4].iter().map(|r| r[1].as_str()).collect();
    assert_eq!(models, ["vampire", "micron", "drampower"]);
    assert_eq!(rows[1][4].parse::<f64>().unwrap(), 0.0);
    let e = |i: usize| rows[i][2].parse::<f64>().unwrap();
    assert!(e(2) >= e(3));
}

#[test]
fn fit_recovers_exact_plane() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from("n_ones,n_toggles,current_ma\n");
    for k in 0..12u32 {
        let (o, t) = ((k * 37) % 512, (k * 101) % 512);
        text.push_str(&format!("{o},{t},{}\n", 246.44 + 0.433 * o as f64 + 0.0515 * t as f64));
    }
    let p = write(&dir, "samples.csv", &text);
    let o = vampire(&["fit", "--samples", s(&p)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["i_zero_ma", "d_one_ma", "d_toggle_ma", "r_squared", "max_error_pct", "mean_error_pct"]);
    let v: Vec<f64> = rows[1].iter().map(|c| c.parse().unwrap()).collect();
    assert!((v[0] - 246.44).abs() < 1e-5 && (v[1] - 0.433).abs() < 1e-5 && (v[2] - 0.0515).abs() < 1e-5);
    assert_eq!(v[3], 1.0);

    let flat = write(&dir, "flat.csv", "n_ones,n_toggles,current_ma\n10,0,1\n20,0,2\n30,0,3\n");
    assert_eq!(code(&vampire(&["fit", "--samples", s(&flat)])), 2);
    assert_eq!(code(&vampire(&["fit", "--samples", s(&flat), "--mode", "ones"])), 0);
}

#[test]
fn extrapolate_from_points_and_csv() {
    let dir = TempDir::new().unwrap();
    let o = vampire(&["extrapolate-idd", "--point", "1066:80", "--point", "1600:104", "--target", "800"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["target_mts", "current_ma", "r_squared", "intercept_ma", "slope_ma_per_mts"]);
    let expect = 80.0 - 266.0 * 24.0 / 534.0;
    assert!((rows[1][1].parse::<f64>().unwrap() - expect).abs() < 1e-5);

    let p = write(&dir, "pts.csv", "freq_mts,current_ma\n1066,80\n1600,104\n");
    let o2 = vampire(&["extrapolate-idd", "--points", s(&p)]);
    assert_eq!(stdout(&o), stdout(&o2));

    assert_eq!(code(&vampire(&["extrapolate-idd", "--point", "1600:104"])), 2);
    assert_eq!(code(&vampire(&["extrapolate-idd", "--point", "1600-104"])), 1);
}

#[test]
fn encode_schemes_and_emitted_trace() {
    let dir = TempDir::new().unwrap();
    let t = write(&dir, "a.trace", &small_trace());
    let o = vampire(&["encode", "--trace", s(&t)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["scheme", "energy_nj", "ratio_to_baseline"]);
    let names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["baseline", "bdi", "optimized", "owi"]);
    assert_eq!(rows[1][2], "1.000000");

    let emitted = dir.path().join("owi.trace");
    assert_eq!(code(&vampire(&["encode", "--trace", s(&t), "--scheme", "bdi,owi", "--emit-trace", s(&emitted)])), 1);
    let o = vampire(&["encode", "--trace", s(&t), "--scheme", "owi", "--emit-trace", s(&emitted)]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&vampire(&["validate-trace", "--trace", s(&emitted)])), 0);
}

#[test]
fn generated_loops_validate_and_are_deterministic() {
    let dir = TempDir::new().unwrap();
    for kind in ["IDD0", "IDD1", "IDD2N", "IDD2P1", "IDD3N", "IDD4R", "IDD4W", "IDD5B", "IDD7"] {
        let p = dir.path().join(format!("{kind}.trace"));
        let o = vampire(&["gen-idd-loop", "--kind", kind, "--iterations", "10", "--profile", "vendor_b", "--out", s(&p)]);
        assert_eq!(code(&o), 0, "{kind}: {}", stderr(&o));
        assert_eq!(code(&vampire(&["validate-trace", "--trace", s(&p), "--profile", "vendor_b"])), 0, "{kind}");
    }
    let run = |seed: &str| stdout(&vampire(&["gen-idd-loop", "--kind", "IDD4W", "--iterations", "5", "--random-data", "--seed", seed]));
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
    let patterned = stdout(&vampire(&["gen-idd-loop", "--kind", "IDD4W", "--iterations", "5", "--pattern", "a5"]));
    assert!(patterned.contains(&line(0xa5)));
    assert_eq!(code(&vampire(&["gen-idd-loop", "--kind", "IDD9"])), 1);
}

#[test]
fn profile_lint_and_profile_dir() {
    let dir = TempDir::new().unwrap();
    let o = vampire(&["profile-lint", "vendor_a", "vendor_b", "vendor_c"]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&vampire(&["profile", "lint", "vendor_a"])), 0);

    let base = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../core/profiles/vendor_a.toml")).unwrap();
    let custom = base.replace("name = \"vendor_a\"", "name = \"custom\"");
    write(&dir, "custom.toml", &custom);
    let o = Command::new(env!("CARGO_BIN_EXE_vampire"))
        .args(["profile-lint", "custom"])
        .env("VAMPIRE_PROFILE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let broken = custom.replace("vdd_v = 1.35", "vdd_v = -1.35");
    let p = write(&dir, "broken.toml", &broken);
    let o = vampire(&["profile-lint", s(&p)]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("vdd"), "{}", stdout(&o));

    let junk = write(&dir, "junk.toml", "this is = = not toml");
    assert_eq!(code(&vampire(&["profile-lint", s(&junk)])), 1);

    let o = vampire(&["profile", "guardband", "vendor_a"]);
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0], ["key", "measured_ma", "datasheet_ma", "ratio"]);
    assert_eq!(rows.len(), 1 + 9);
}

#[test]
fn output_is_deterministic_across_runs() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("loop.trace");
    vampire(&["gen-idd-loop", "--kind", "IDD7", "--iterations", "30", "--random-data", "--seed", "3", "--out", s(&t)]);
    let list = [s(&t); 4].join(",");
    let a = vampire(&["analyze", "--trace", &list]);
    let b = vampire(&["analyze", "--trace", &list]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    let out = dir.path().join("out.csv");
    vampire(&["analyze", "--trace", &list, "--out", s(&out)]);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), stdout(&a));
}
