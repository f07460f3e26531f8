use crate::cli::*;
use crate::error::CliError;
use nfsusy_core::gauged::{
    closure_certificate, intertwining_check_gauged, GaugedCharge, GaugedOperator, PolySubspace, Side, TypeBParams,
    X2Params,
};
use nfsusy_core::mass::MassProfile;
use nfsusy_core::models::{ModelId, ModelInstance, PdmModelInstance, Sectors};
use nfsusy_core::normalizability::{classify_model, table1, table1_defaults, ClassifyOptions, Status, Table1Row};
use nfsusy_core::rational::{fmt_q, parse_rational, q, qi, Q};
use nfsusy_core::spectral::{
    fd_spectrum, verify_eigen_membership, MembershipReport, PdmHamiltonian, SpectralError, SpectralOptions,
    SpectrumResult,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

pub const SCHEMA: &str = "nfsusy/1";

/// Exit statuses: success, mismatch against the reference, error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Model(a) => model(a),
        Command::Analyze(a) => analyze(a),
        Command::Table1(a) => run_table1(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Verify(a) => verify(a, cli.seed),
    }
}

fn split_kv(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| CliError::new("E_USAGE", format!("expected KEY=VALUE, got `{s}`")))
}

fn parse_range(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::new("E_USAGE", format!("expected a range a:b with a < b, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if a < b && a.is_finite() && b.is_finite() {
        Ok((a, b))
    } else {
        Err(bad())
    }
}

struct System {
    base: ModelInstance,
    pdm: Option<PdmModelInstance>,
    mass_params: BTreeMap<String, f64>,
}

impl System {
    fn sectors(&self) -> &dyn Sectors {
        match &self.pdm {
            Some(p) => p,
            None => &self.base,
        }
    }

    fn mass(&self) -> MassProfile {
        self.pdm.as_ref().map_or_else(MassProfile::constant, |p| p.mass.clone())
    }
}

fn build(a: &SystemArgs) -> Result<System, CliError> {
    let id: ModelId = a.id.parse()?;
    let mut params = BTreeMap::new();
    for p in &a.params {
        let (k, v) = split_kv(p)?;
        let x = parse_rational(v).map_err(|e| CliError::new("E_PARAM", format!("parameter {k}: {e}")))?;
        params.insert(k.to_string(), x);
    }
    let mut mass_params = BTreeMap::new();
    for p in &a.mass_params {
        let (k, v) = split_kv(p)?;
        let x: f64 =
            v.parse().map_err(|_| CliError::new("E_PARAM", format!("mass parameter {k}: `{v}` is not a number")))?;
        mass_params.insert(k.to_string(), x);
    }
    let base = ModelInstance::new(id, a.n, &params)?;
    let mass = MassProfile::from_id(&a.mass, &mass_params)?;
    let pdm = if mass.is_constant() { None } else { Some(PdmModelInstance::new(base.clone(), mass)?) };
    log::info!("built {} N={} on mass {}", base.id, base.n, a.mass);
    Ok(System { base, pdm, mass_params })
}

fn emit_json(value: &Value, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Attaches the schema tag to a serialized report.
fn tagged(report: impl Serialize) -> Result<Value, CliError> {
    let mut v = serde_json::to_value(report)?;
    if let Value::Object(m) = &mut v {
        m.insert("schema".into(), SCHEMA.into());
    }
    Ok(v)
}

/// JSON has no infinities; unbounded ends are written as "-inf" / "inf".
fn interval((a, b): (f64, f64)) -> Value {
    let end = |x: f64| {
        if x.is_finite() {
            json!(x)
        } else if x > 0.0 {
            json!("inf")
        } else {
            json!("-inf")
        }
    };
    json!([end(a), end(b)])
}

/// 17 significant digits, enough to round-trip an f64.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut s = header.join(",") + "\n";
    for r in rows {
        s += &r.join(",");
        s.push('\n');
    }
    match path {
        Some(p) => fs::write(p, s)?,
        None => std::io::stdout().write_all(s.as_bytes())?,
    }
    Ok(())
}

fn restricted(base: &ModelInstance, side: Side) -> Value {
    let Some(op) = base.gauged_operator(side) else {
        return Value::Null;
    };
    match closure_certificate(&op, &base.gauged_space(side, None)) {
        Ok(m) => json!({
            "entries": m.entries.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "char_poly": m.char_poly().to_string(),
            "cayley_hamilton": m.cayley_hamilton_holds(),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// A window inside the domain for sampling: ±5 at infinite ends, a small inset at finite ones.
fn sample_window((lo, hi): (f64, f64)) -> (f64, f64) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let d = 1e-3 * (hi - lo);
            (lo + d, hi - d)
        }
        (true, false) => (lo + 1e-3, lo + 10.0),
        (false, true) => (hi - 10.0, hi - 1e-3),
        (false, false) => (-5.0, 5.0),
    }
}

fn model(a: &ModelArgs) -> Result<i32, CliError> {
    let sys = build(&a.system)?;
    let src = sys.sectors();
    let base = &sys.base;
    let mut card = json!({
        "schema": SCHEMA,
        "model": base.id,
        "N": base.n,
        "params": base.params_text(),
        "mass": src.mass_id(),
        "mass_params": sys.mass_params,
        "domain": interval(src.domain()),
        "end_kinds": src.end_kinds(),
        "potential": base.describe_potential(Side::Minus),
        "sectors": {
            "minus": base.sector_basis(Side::Minus),
            "plus": base.sector_basis(Side::Plus),
        },
        "restricted": {
            "minus": restricted(base, Side::Minus),
            "plus": restricted(base, Side::Plus),
        },
    });
    if let Some(p) = &sys.pdm {
        card["sectors"] = json!({ "minus": p.sector_basis(Side::Minus), "plus": p.sector_basis(Side::Plus) });
        card["u_domain"] = interval(p.u_domain);
    }
    if let Some(path) = &a.dump_potential {
        let (lo, hi) = match &a.range {
            Some(r) => parse_range(r)?,
            None => sample_window(src.domain()),
        };
        if a.points < 2 {
            return Err(CliError::new("E_USAGE", "--points must be at least 2"));
        }
        let mass = sys.mass();
        let rows: Vec<Vec<String>> = (0..a.points)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (a.points - 1) as f64;
                vec![num(x), num(src.potential(Side::Minus, x)), num(src.potential(Side::Plus, x)), num(mass.m(x))]
            })
            .collect();
        write_csv(Some(path), &["q", "U_minus", "U_plus", "m"], &rows)?;
        card["potential_dump"] = json!({ "path": path, "range": [lo, hi], "points": a.points });
    }
    emit_json(&card, a.out.as_deref())?;
    Ok(EXIT_OK)
}

fn analyze(a: &AnalyzeArgs) -> Result<i32, CliError> {
    let sys = build(&a.system)?;
    let opts = if a.fast { ClassifyOptions::fast() } else { ClassifyOptions::default() };
    let report = classify_model(sys.sectors(), opts);
    emit_json(&tagged(&report)?, a.out.as_deref())?;
    if report.status == Status::Indeterminate {
        return Err(CliError::new(
            "E_INDETERMINATE",
            "classification is indeterminate; see the verdicts in the report",
        ));
    }
    Ok(if a.expect_paper && report.matches == Some(false) { EXIT_MISMATCH } else { EXIT_OK })
}

fn threads() -> usize {
    std::env::var("NFSUSY_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Deserialize)]
struct DefaultsFile {
    rows: Vec<Table1Row>,
}

fn run_table1(a: &Table1Args) -> Result<i32, CliError> {
    let rows = match &a.defaults {
        Some(p) => serde_json::from_str::<DefaultsFile>(&fs::read_to_string(p)?)?.rows,
        None => table1_defaults(),
    };
    let reports = table1(&rows, threads(), ClassifyOptions::default())?;
    let mut grid = Vec::new();
    let mut it = reports.iter();
    for row in &rows {
        let cells: BTreeMap<&str, Value> = row
            .masses
            .iter()
            .zip(it.by_ref())
            .map(|(m, r)| {
                (m.as_str(), json!({ "classification": r.classification, "paper_expected": r.paper_expected, "match": r.matches }))
            })
            .collect();
        grid.push(json!({ "model": row.model, "N": row.n, "params": row.params, "cells": cells }));
    }
    let mismatches = reports.iter().filter(|r| r.matches == Some(false)).count();
    let indeterminate = reports.iter().filter(|r| r.status == Status::Indeterminate).count();
    let doc = json!({
        "schema": SCHEMA,
        "grid": grid,
        "cells": reports.len(),
        "mismatches": mismatches,
        "indeterminate": indeterminate,
        "all_match": mismatches == 0 && indeterminate == 0,
        "reports": reports,
    });
    emit_json(&doc, a.out.as_deref())?;
    for r in reports.iter().filter(|r| r.matches == Some(false)) {
        log::warn!(
            "{} N={} on {}: got {:?}, reference {:?}",
            r.model,
            r.n,
            r.mass,
            r.classification.map(|c| c.to_string()),
            r.paper_expected.map(|c| c.to_string())
        );
    }
    if indeterminate > 0 {
        return Err(CliError::new("E_INDETERMINATE", format!("{indeterminate} cell(s) could not be classified")));
    }
    Ok(if a.expect_paper && mismatches > 0 { EXIT_MISMATCH } else { EXIT_OK })
}

fn spectrum(a: &SpectrumArgs) -> Result<i32, CliError> {
    let sys = build(&a.system)?;
    let side = match a.side {
        SideArg::Minus => Side::Minus,
        SideArg::Plus => Side::Plus,
    };
    let header = ["index", "eigenvalue", "certified_error", "matched_restricted_eigenvalue"];
    let rows = |s: &SpectrumResult, report: Option<&MembershipReport>| -> Vec<Vec<String>> {
        (0..s.richardson.len())
            .map(|i| {
                let fd = s.richardson[i];
                let m = report.and_then(|r| r.matches.iter().find(|m| m.present && m.fd == Some(fd)));
                vec![i.to_string(), num(fd), num(s.certified_error[i]), m.map_or(String::new(), |m| num(m.restricted))]
            })
            .collect()
    };
    if let Some(r) = &a.range {
        let (lo, hi) = parse_range(r)?;
        let h = match &sys.pdm {
            Some(p) => PdmHamiltonian::from_model(p, side),
            None => {
                let m = sys.base.clone();
                let domain = m.domain0;
                PdmHamiltonian::new(MassProfile::constant(), move |x| m.potential(side, x), domain)
            }
        };
        let s = fd_spectrum(&h, lo, hi, a.grid, a.count)?;
        write_csv(a.out.as_deref(), &header, &rows(&s, None))?;
        return Ok(EXIT_OK);
    }
    let opts = SpectralOptions { n: a.grid, count: a.count };
    match verify_eigen_membership(sys.sectors(), side, a.tol, opts) {
        Ok(report) => {
            write_csv(a.out.as_deref(), &header, &rows(&report.spectrum, Some(&report)))?;
            Ok(EXIT_OK)
        }
        Err(SpectralError::MissingEigenvalue { value, mismatch, report }) => {
            write_csv(a.out.as_deref(), &header, &rows(&report.spectrum, Some(&report)))?;
            Err(CliError::new(
                "E_MISSING_EIGENVALUE",
                format!(
                    "restricted eigenvalue {value} of a normalizable sector has no FD partner (mismatch {mismatch:e})"
                ),
            ))
        }
        Err(e) => Err(e.into()),
    }
}

fn rand_q(rng: &mut StdRng) -> Q {
    q(rng.gen_range(-9..=9), rng.gen_range(1..=5))
}

/// α = 1 + r with r a random positive rational.
fn rand_alpha(rng: &mut StdRng) -> Q {
    qi(1) + q(rng.gen_range(1..=12), rng.gen_range(1..=5))
}

#[derive(Default, Serialize)]
struct Certificate {
    checks: usize,
    residual_max: String,
    status: &'static str,
    failures: Vec<String>,
}

fn verify(a: &VerifyArgs, seed: u64) -> Result<i32, CliError> {
    if a.n == 0 {
        return Err(CliError::new("E_USAGE", "--N must be at least 1"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let n = a.n;
    let mut checks = 0usize;
    let mut failures = Vec::new();
    let mut check = |label: String, ok: Result<bool, String>| {
        checks += 1;
        match ok {
            Ok(true) => {}
            Ok(false) => failures.push(label),
            Err(e) => failures.push(format!("{label}: {e}")),
        }
    };
    for d in 0..a.draws {
        let (om, op, flag_range, charge) = match a.family {
            Family::B => {
                let mut p = TypeBParams {
                    a: std::array::from_fn(|_| rand_q(&mut rng)),
                    b1: rand_q(&mut rng),
                    c0: rand_q(&mut rng),
                };
                if a.what == What::Flag {
                    p.a[3] = qi(0);
                    p.a[4] = qi(0);
                }
                let om = GaugedOperator::type_b(n, &p, Side::Minus);
                let op = GaugedOperator::type_b(n, &p, Side::Plus);
                (om, op, n + 3, GaugedCharge::type_b_factorized(n))
            }
            Family::X2 => {
                let mut p = X2Params {
                    alpha: rand_alpha(&mut rng),
                    a1: rand_q(&mut rng),
                    a2: rand_q(&mut rng),
                    c0: rand_q(&mut rng),
                };
                if a.what == What::Flag {
                    p.a2 = qi(0);
                }
                let om = GaugedOperator::type_x2(n, &p, Side::Minus)?;
                let op = om.with_side(Side::Plus);
                let ch = GaugedCharge::x2_factorized(n, &p.alpha);
                (om, op, n, ch)
            }
        };
        let space = |side: Side, k: usize| -> PolySubspace {
            let al = match &om.family {
                nfsusy_core::gauged::Family::X2(p) => p.alpha.clone(),
                _ => qi(0),
            };
            match (a.family, side) {
                (Family::B, Side::Minus) if k == n && a.what != What::Flag => PolySubspace::type_b(n),
                (Family::B, Side::Minus) => PolySubspace::type_a(k, n),
                (Family::B, Side::Plus) => PolySubspace::type_b_plus(k, n),
                (Family::X2, Side::Minus) => PolySubspace::x2_minus(k, n, &al),
                (Family::X2, Side::Plus) => PolySubspace::x2_plus(k, n, &al),
            }
        };
        match a.what {
            What::Closure => {
                let mm = closure_certificate(&om, &space(Side::Minus, n));
                let mp = closure_certificate(&op, &space(Side::Plus, n));
                match (mm, mp) {
                    (Ok(mm), Ok(mp)) => {
                        check(format!("draw {d}: closure"), Ok(true));
                        check(format!("draw {d}: Cayley-Hamilton (minus)"), Ok(mm.cayley_hamilton_holds()));
                        check(format!("draw {d}: Cayley-Hamilton (plus)"), Ok(mp.cayley_hamilton_holds()));
                        check(
                            format!("draw {d}: partner characteristic polynomials"),
                            Ok(mm.char_poly() == mp.char_poly()),
                        );
                    }
                    (mm, mp) => {
                        let e = mm.err().or(mp.err()).map(|e| e.to_string()).unwrap_or_default();
                        check(format!("draw {d}: closure"), Err(e));
                    }
                }
            }
            What::Flag => {
                for k in 1..=flag_range {
                    for (side, o) in [(Side::Minus, &om), (Side::Plus, &op)] {
                        let r = closure_certificate(o, &space(side, k)).map(|m| m.cayley_hamilton_holds());
                        check(format!("draw {d}: flag {} k={k}", side.as_str()), r.map_err(|e| e.to_string()));
                    }
                }
            }
            What::Intertwine => {
                let r = intertwining_check_gauged(&om, &op, &charge, a.maxdeg).map(|r| r.exact);
                check(format!("draw {d}: intertwining up to degree {}", a.maxdeg), r.map_err(|e| e.to_string()));
            }
        }
    }
    let ok = failures.is_empty();
    let cert = Certificate {
        checks,
        residual_max: if ok { "0".into() } else { "nonzero".into() },
        status: if ok { "exact" } else { "failed" },
        failures,
    };
    let what = format!("{:?}", a.what).to_lowercase();
    let family = if a.family == Family::B { "B" } else { "X2" };
    let mut doc = json!({ "schema": SCHEMA, "what": what, "type": family, "N": n, "draws": a.draws, "seed": seed });
    if a.what == What::Intertwine {
        doc["maxdeg"] = a.maxdeg.into();
    }
    if let (Value::Object(d), Value::Object(c)) = (&mut doc, serde_json::to_value(&cert)?) {
        d.extend(c);
    }
    emit_json(&doc, a.out.as_deref())?;
    Ok(if ok { EXIT_OK } else { EXIT_MISMATCH })
}
