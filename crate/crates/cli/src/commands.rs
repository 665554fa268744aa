use std::fmt::Display;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vampire::baselines::{compute_model, generate_idd_loop, relative_error_pct, LoopOptions, ModelKind};
use vampire::datadep::{fit_params, model_percent_error, parse_samples_csv, FitError, FitMode};
use vampire::encoding::{build_codebook, encode_trace, run_encoding_study, Scheme, StudyOptions};
use vampire::profiles::{extrapolate_idd, guardband_report, IddKey, ProfileError};
use vampire::trace::{validate_timing, DataDistribution};
use vampire::{parse_trace, CacheLine, EnergyOptions, ParseMode, Trace, VendorProfile};

use crate::table::{nj, write_output, Table};
use crate::{
    AnalyzeArgs, CompareArgs, EncodeArgs, EngineFlags, ExtrapolateArgs, FitArgs, FitModeArg, GenLoopArgs, GuardbandArgs,
    LintArgs, ModelArg, ProfileVerb, SchemeArg, ValidateArgs, Verb,
};

/// Input, usage and I/O problems.
pub const EXIT_USAGE: u8 = 1;
/// The inputs were read but the model rejects them.
pub const EXIT_DOMAIN: u8 = 2;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_USAGE, error: error.into() }
    }

    fn domain(error: impl Into<anyhow::Error>) -> Self {
        Failure { code: EXIT_DOMAIN, error: error.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::usage(error)
    }
}

type Outcome = Result<u8, Failure>;

pub fn dispatch(verb: Verb) -> Outcome {
    match verb {
        Verb::ValidateTrace(a) => validate(a),
        Verb::Analyze(a) => analyze(a),
        Verb::Compare(a) => compare(a),
        Verb::Fit(a) => fit(a),
        Verb::ExtrapolateIdd(a) => extrapolate(a),
        Verb::Encode(a) => encode(a),
        Verb::GenIddLoop(a) => gen_loop(a),
        Verb::ProfileLint(a) | Verb::Profile(ProfileVerb::Lint(a)) => lint(a),
        Verb::Profile(ProfileVerb::Guardband(a)) => guardband(a),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))
}

fn load_trace(path: &Path, mode: ParseMode) -> Result<Trace, Failure> {
    let text = read_file(path)?;
    parse_trace(&text, mode).map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))
}

fn load_profile(arg: &str) -> Result<VendorProfile, Failure> {
    let p = VendorProfile::resolve(arg).map_err(profile_failure)?;
    p.validate().map_err(profile_failure)?;
    Ok(p)
}

fn profile_failure(e: ProfileError) -> Failure {
    match e {
        ProfileError::Invalid { .. } => Failure::domain(e),
        _ => Failure::usage(e),
    }
}

fn energy_failure(path: &Path, e: impl Display) -> Failure {
    Failure::domain(anyhow!("{}: {e}", path.display()))
}

fn engine_options(f: &EngineFlags) -> Result<(EnergyOptions, ParseMode), Failure> {
    let distribution = match (f.ones_fraction, f.toggle_fraction) {
        (Some(o), Some(t)) => Some(DataDistribution::new(o, t).map_err(Failure::usage)?),
        _ => None,
    };
    let mode = if distribution.is_some() { ParseMode::Distribution } else { ParseMode::Payload };
    let opts = EnergyOptions {
        variation: !f.no_variation,
        force: f.force,
        interpolate_background: f.interpolate_background,
        distribution,
    };
    Ok((opts, mode))
}

fn label(path: &Path) -> String {
    path.display().to_string()
}

/// Runs `f` over every path in parallel, keeping input order, and fails with
/// the first error in that order.
fn per_trace<T: Send>(paths: &[PathBuf], f: impl Fn(&Path) -> Result<T, Failure> + Sync) -> Result<Vec<T>, Failure> {
    paths.par_iter().map(|p| f(p)).collect::<Vec<_>>().into_iter().collect()
}

fn validate(a: ValidateArgs) -> Outcome {
    let profile = load_profile(&a.profile.profile)?;
    let mode = if a.no_payloads { ParseMode::Distribution } else { ParseMode::Payload };
    let trace = load_trace(&a.trace, mode)?;
    let violations = validate_timing(&trace, &profile.timing);
    let mut t = Table::new(&["index", "cycle", "bank", "constraint", "required_ns", "actual_ns"]);
    for v in &violations {
        t.push(vec![
            v.index.to_string(),
            v.cycle.to_string(),
            v.bank.map(|b| b.to_string()).unwrap_or_default(),
            v.kind.name().to_string(),
            v.required_ns.to_string(),
            v.actual_ns.to_string(),
        ]);
    }
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    if violations.is_empty() {
        Ok(0)
    } else {
        eprintln!("{}: {} timing violation(s)", a.trace.display(), violations.len());
        Ok(EXIT_DOMAIN)
    }
}

fn analyze(a: AnalyzeArgs) -> Outcome {
    if a.ledger.is_some() && a.trace.len() != 1 {
        return Err(Failure::usage(anyhow!("--ledger needs exactly one --trace")));
    }
    let profile = load_profile(&a.profile.profile)?;
    let (opts, mode) = engine_options(&a.engine)?;
    let reports = per_trace(&a.trace, |path| {
        let trace = load_trace(path, mode)?;
        vampire::compute_energy(&trace, &profile, &opts).map_err(|e| energy_failure(path, e))
    })?;

    if let Some(ledger_path) = &a.ledger {
        let mut t = Table::new(&["cycle", "command", "energy_nj"]);
        for c in &reports[0].ledger {
            t.push(vec![c.cycle.to_string(), c.kind.to_string(), nj(c.energy_nj)]);
        }
        t.emit(Some(ledger_path), false)?;
    }

    let multi = a.trace.len() > 1;
    let mut t = Table::new(if multi { &["trace", "category", "energy_nj"] } else { &["category", "energy_nj"] });
    for (path, report) in a.trace.iter().zip(&reports) {
        for (category, v) in report.breakdown.rows() {
            let mut row = vec![category.to_string(), nj(v)];
            if multi {
                row.insert(0, label(path));
            }
            t.push(row);
        }
    }
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}

fn model_kind(m: ModelArg) -> ModelKind {
    match m {
        ModelArg::Vampire => ModelKind::Vampire,
        ModelArg::Micron => ModelKind::MicronStyle,
        ModelArg::Drampower => ModelKind::DramPowerLite,
    }
}

fn compare(a: CompareArgs) -> Outcome {
    let profile = load_profile(&a.profile.profile)?;
    let (opts, mode) = engine_options(&a.engine)?;
    let results = per_trace(&a.trace, |path| {
        let trace = load_trace(path, mode)?;
        let reference = compute_model(ModelKind::Vampire, &trace, &profile, &opts)
            .map_err(|e| energy_failure(path, e))?
            .total_nj();
        a.models
            .iter()
            .map(|&m| {
                let kind = model_kind(m);
                let b = compute_model(kind, &trace, &profile, &opts).map_err(|e| energy_failure(path, e))?;
                let power = b.average_power_mw().map_err(|e| energy_failure(path, e))?;
                Ok((kind, b.total_nj(), power, relative_error_pct(b.total_nj(), reference)))
            })
            .collect::<Result<Vec<_>, Failure>>()
    })?;

    let mut t = Table::new(&["trace", "model", "energy_nj", "avg_power_mw", "relative_error_pct"]);
    for (path, rows) in a.trace.iter().zip(results) {
        for (kind, total, power, err) in rows {
            t.push(vec![label(path), kind.name().to_string(), nj(total), format!("{power:.6}"), format!("{err:.6}")]);
        }
    }
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}

fn fit(a: FitArgs) -> Outcome {
    let text = read_file(&a.samples)?;
    let samples = parse_samples_csv(&text).map_err(|e| Failure::usage(anyhow!("{}: {e}", a.samples.display())))?;
    let mode = match a.mode {
        FitModeArg::Full => FitMode::Full,
        FitModeArg::Ones => FitMode::OnesOnly,
        FitModeArg::Toggles => FitMode::TogglesOnly,
    };
    let f = fit_params(&samples, mode).map_err(|e| match e {
        FitError::NonFinite => Failure::usage(anyhow!("{}: {e}", a.samples.display())),
        _ => Failure::domain(anyhow!("{}: {e}", a.samples.display())),
    })?;
    let err = model_percent_error(&f.params, &samples).map_err(|e| Failure::domain(anyhow!("{}: {e}", a.samples.display())))?;
    let mut t = Table::new(&["i_zero_ma", "d_one_ma", "d_toggle_ma", "r_squared", "max_error_pct", "mean_error_pct"]);
    t.push(
        [f.params.i_zero_ma, f.params.d_one_ma, f.params.d_toggle_ma, f.r_squared, err.max_pct, err.mean_pct]
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect(),
    );
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}

fn parse_pair(s: &str, sep: char, origin: &str) -> Result<(f64, f64), Failure> {
    let bad = || Failure::usage(anyhow!("{origin}: expected `freq_mts{sep}current_ma`, got {s:?}"));
    let (f, i) = s.split_once(sep).ok_or_else(bad)?;
    let f: f64 = f.trim().parse().map_err(|_| bad())?;
    let i: f64 = i.trim().parse().map_err(|_| bad())?;
    Ok((f, i))
}

fn extrapolate(a: ExtrapolateArgs) -> Outcome {
    let points: Vec<(f64, f64)> = match &a.points {
        Some(path) => {
            let text = read_file(path)?;
            let mut lines = text
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty());
            match lines.next() {
                Some((_, h)) if h.replace(' ', "") == "freq_mts,current_ma" => {}
                _ => return Err(Failure::usage(anyhow!("{}: expected header `freq_mts,current_ma`", path.display()))),
            }
            lines
                .map(|(n, l)| parse_pair(l, ',', &format!("{} line {n}", path.display())))
                .collect::<Result<_, _>>()?
        }
        None => a.point.iter().map(|p| parse_pair(p, ':', "--point")).collect::<Result<_, _>>()?,
    };
    let e = extrapolate_idd(&points, a.target).map_err(Failure::domain)?;
    let mut t = Table::new(&["target_mts", "current_ma", "r_squared", "intercept_ma", "slope_ma_per_mts"]);
    t.push(
        [a.target, e.current_ma, e.r_squared, e.intercept_ma, e.slope_ma_per_mts]
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect(),
    );
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}

fn scheme(s: SchemeArg) -> Scheme {
    match s {
        SchemeArg::Baseline => Scheme::Baseline,
        SchemeArg::Bdi => Scheme::Bdi,
        SchemeArg::Optimized => Scheme::Optimized,
        SchemeArg::Owi => Scheme::Owi,
    }
}

fn encode(a: EncodeArgs) -> Outcome {
    if a.emit_trace.is_some() && (a.trace.len() != 1 || a.scheme.len() != 1) {
        return Err(Failure::usage(anyhow!("--emit-trace needs exactly one --trace and one --scheme")));
    }
    let profile = load_profile(&a.profile.profile)?;
    let schemes: Vec<Scheme> = a.scheme.iter().map(|&s| scheme(s)).collect();
    let opts = StudyOptions {
        energy: EnergyOptions { variation: !a.no_variation, force: a.force, ..Default::default() },
        encoding_energy_nj: a.encoding_energy_nj,
    };
    let traces = per_trace(&a.trace, |path| load_trace(path, ParseMode::Payload))?;
    let results = a
        .trace
        .par_iter()
        .zip(&traces)
        .map(|(path, trace)| run_encoding_study(trace, &profile, &schemes, &opts).map_err(|e| energy_failure(path, e)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    if let Some(out) = &a.emit_trace {
        let book = build_codebook(&traces[0]).map_err(|e| energy_failure(&a.trace[0], e))?;
        write_output(Some(out), &encode_trace(&traces[0], schemes[0], &book).serialize())?;
    }

    let multi = a.trace.len() > 1;
    let mut t = Table::new(if multi {
        &["trace", "scheme", "energy_nj", "ratio_to_baseline"]
    } else {
        &["scheme", "energy_nj", "ratio_to_baseline"]
    });
    for (path, rows) in a.trace.iter().zip(results) {
        for r in rows {
            let mut row = vec![r.scheme.name().to_string(), nj(r.breakdown.total_nj()), format!("{:.6}", r.ratio_to_baseline)];
            if multi {
                row.insert(0, label(path));
            }
            t.push(row);
        }
    }
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}

fn gen_loop(a: GenLoopArgs) -> Outcome {
    let key: IddKey = a.kind.parse().map_err(|e| Failure::usage(anyhow!("--kind: {e}")))?;
    let pattern = u8::from_str_radix(a.pattern.trim_start_matches("0x"), 16)
        .map_err(|_| Failure::usage(anyhow!("--pattern: expected one hex byte, got {:?}", a.pattern)))?;
    let profile = load_profile(&a.profile.profile)?;
    let trace = generate_idd_loop(key, &profile.timing, &LoopOptions { iterations: a.iterations, pattern, row: a.row });
    let trace = if a.random_data {
        let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
        let mut commands = trace.into_commands();
        for c in &mut commands {
            if let Some(slot) = c.payload_mut() {
                *slot = Some(CacheLine(rng.random()));
            }
        }
        Trace::new(commands).map_err(Failure::usage)?
    } else {
        trace
    };
    write_output(a.out.as_deref(), &trace.serialize())?;
    Ok(0)
}

fn lint(a: LintArgs) -> Outcome {
    let mut code = 0;
    for arg in &a.profiles {
        let issues = match VendorProfile::resolve(arg) {
            Ok(p) => p.lint(),
            Err(ProfileError::Invalid { issues, .. }) => issues,
            Err(e) => return Err(Failure::usage(e)),
        };
        for issue in &issues {
            println!("{arg}: {issue}");
        }
        if issues.is_empty() {
            println!("{arg}: ok");
        } else {
            code = EXIT_DOMAIN;
        }
    }
    Ok(code)
}

fn guardband(a: GuardbandArgs) -> Outcome {
    let p = VendorProfile::resolve(&a.profile).map_err(Failure::usage)?;
    let mut t = Table::new(&["key", "measured_ma", "datasheet_ma", "ratio"]);
    for r in guardband_report(&p) {
        t.push(vec![r.key.name().to_string(), r.measured_ma.to_string(), r.datasheet_ma.to_string(), format!("{:.6}", r.ratio)]);
    }
    t.emit(a.output.out.as_deref(), a.output.gnuplot)?;
    Ok(0)
}
