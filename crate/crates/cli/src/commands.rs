//! Command implementations and artifact emission. All numerical work runs
//! first; files are written by a single writer at the end of each command.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use hombif_core::{
    branch_solve, crossing_scan, detect, isolate_crossings, validate_assumptions, AssumptionCheck,
    BranchPoint, CrossingInterval, JumpSystem, SystemFamily,
};

use crate::config::RunConfig;

/// Radians (and every other real in machine output) carry 17 significant
/// digits so artifacts round-trip losslessly and diff cleanly.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct AssumptionJson {
    name: String,
    passed: bool,
    witness: String,
}

#[derive(Serialize)]
struct IntervalJson {
    lo: f64,
    hi: f64,
}

#[derive(Serialize)]
struct BranchJson {
    eps: f64,
    lambda: f64,
    sup_norm: f64,
    residual: f64,
}

#[derive(Serialize)]
struct ReportJson {
    system: String,
    #[serde(rename = "K")]
    k: usize,
    lambda0: f64,
    assumptions: Vec<AssumptionJson>,
    w1_plus: i32,
    w1_minus: i32,
    index: i64,
    parity: i32,
    criterion_met: bool,
    located: Vec<IntervalJson>,
    branches: Vec<BranchJson>,
}

pub struct Emitter {
    pub quiet: bool,
}

impl Emitter {
    pub fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Validates (A0)-(A4); on failure prints every diagnostic and returns the
/// assumption exit code.
fn check_assumptions(
    family: &SystemFamily,
    lambda0: f64,
    emit: &Emitter,
) -> anyhow::Result<Result<Vec<AssumptionCheck>, i32>> {
    let checks = validate_assumptions(family, lambda0)?;
    let mut failed = false;
    for c in &checks {
        let tag = if c.passed { "pass" } else { "FAIL" };
        emit.say(format!("assumption {}: {} ({})", c.name, tag, c.witness));
        if !c.passed {
            eprintln!("assumption {} failed: {}", c.name, c.witness);
            failed = true;
        }
    }
    if failed {
        return Ok(Err(2));
    }
    Ok(Ok(checks))
}

fn report_json(
    config: &RunConfig,
    family: &SystemFamily,
    checks: &[AssumptionCheck],
    report: &hombif_core::BifurcationReport,
    located: &[CrossingInterval],
    branches: &[BranchPoint],
) -> anyhow::Result<String> {
    let json = ReportJson {
        system: family.name.clone(),
        k: config.k,
        lambda0: config.lambda0,
        assumptions: checks
            .iter()
            .map(|c| AssumptionJson {
                name: c.name.clone(),
                passed: c.passed,
                witness: c.witness.clone(),
            })
            .collect(),
        w1_plus: report.w1_plus,
        w1_minus: report.w1_minus,
        index: report.index,
        parity: report.parity,
        criterion_met: report.criterion_met,
        located: located
            .iter()
            .map(|c| IntervalJson { lo: c.lo, hi: c.hi })
            .collect(),
        branches: branches
            .iter()
            .map(|b| BranchJson {
                eps: b.eps,
                lambda: b.lambda,
                sup_norm: b.orbit.amplitude,
                residual: b.orbit.residual,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&json)? + "\n")
}

fn summarize(report: &hombif_core::BifurcationReport, emit: &Emitter) {
    emit.say(format!(
        "w1(E^s(+inf)) = {:+}, w1(E^s(-inf)) = {:+}, index = {}, parity = {:+}",
        report.w1_plus, report.w1_minus, report.index, report.parity
    ));
    emit.say(if report.criterion_met {
        "criterion met: homoclinic bifurcation certified"
    } else {
        "criterion not met"
    });
}

pub fn run_detect(config: &RunConfig, emit: &Emitter) -> anyhow::Result<i32> {
    let family = config.family()?;
    let checks = match check_assumptions(&family, config.lambda0, emit)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let report = detect(&family, config.k, config.lambda0)?;
    summarize(&report, emit);
    let json = report_json(config, &family, &checks, &report, &[], &[])?;
    write_artifact(&config.output.dir, "report.json", &json)?;
    emit.say(format!(
        "report written to {}",
        config.output.dir.join("report.json").display()
    ));
    Ok(0)
}

pub fn run_scan(config: &RunConfig, emit: &Emitter) -> anyhow::Result<i32> {
    let family = config.family()?;
    let checks = match check_assumptions(&family, config.lambda0, emit)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let report = detect(&family, config.k, config.lambda0)?;
    summarize(&report, emit);
    let (n_minus, n_plus) = config.truncation_lengths(&family)?;
    let (rows, located) = hombif_core::scan(&family, config.k, n_minus, n_plus)?;
    let mut csv = String::from("theta,d,sigma_min\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{}",
            sig17(r.theta),
            sig17(r.d),
            sig17(r.sigma_min)
        );
    }
    for c in &located {
        emit.say(format!(
            "crossing isolated in [{}, {}]",
            sig17(c.lo),
            sig17(c.hi)
        ));
    }
    if located.is_empty() {
        emit.say("no sign changes of the crossing determinant");
    }
    let json = report_json(config, &family, &checks, &report, &located, &[])?;
    write_artifact(&config.output.dir, "scan.csv", &csv)?;
    write_artifact(&config.output.dir, "report.json", &json)?;
    emit.say(format!(
        "scan written to {}",
        config.output.dir.join("scan.csv").display()
    ));
    Ok(0)
}

pub fn run_solve(config: &RunConfig, emit: &Emitter) -> anyhow::Result<i32> {
    let family = config.family()?;
    let checks = match check_assumptions(&family, config.lambda0, emit)? {
        Ok(c) => c,
        Err(code) => return Ok(code),
    };
    let report = detect(&family, config.k, config.lambda0)?;
    summarize(&report, emit);
    let (n_minus, n_plus) = config.truncation_lengths(&family)?;
    let (_, located) = hombif_core::scan(&family, config.k, n_minus, n_plus)?;
    let mut branches = Vec::new();
    if report.criterion_met {
        for interval in &located {
            for &eps in &config.eps {
                let b = branch_solve(&family, interval, eps, n_minus, n_plus)?;
                emit.say(format!(
                    "eps = {}: lambda = {}, sup norm = {}, residual = {}",
                    sig17(b.eps),
                    sig17(b.lambda),
                    sig17(b.orbit.amplitude),
                    sig17(b.orbit.residual)
                ));
                branches.push(b);
            }
        }
        if located.is_empty() {
            emit.say("criterion met but no crossing isolated on this grid; increase K");
        }
    } else {
        emit.say("criterion not met; no branches solved");
    }
    // All solves done; emit artifacts.
    let mut branch_csv = String::from("eps,lambda,sup_norm,residual\n");
    for b in &branches {
        let _ = writeln!(
            branch_csv,
            "{},{},{},{}",
            sig17(b.eps),
            sig17(b.lambda),
            sig17(b.orbit.amplitude),
            sig17(b.orbit.residual)
        );
    }
    write_artifact(&config.output.dir, "branch.csv", &branch_csv)?;
    for b in &branches {
        let mut orbit_csv = String::from("n");
        for i in 1..=family.dim {
            let _ = write!(orbit_csv, ",x{i}");
        }
        orbit_csv.push('\n');
        for (i, x) in b.orbit.states.iter().enumerate() {
            let _ = write!(orbit_csv, "{}", i as i64 - b.orbit.n_minus as i64);
            for v in x.iter() {
                let _ = write!(orbit_csv, ",{}", sig17(*v));
            }
            orbit_csv.push('\n');
        }
        write_artifact(
            &config.output.dir,
            &format!("orbit_{:e}.csv", b.eps),
            &orbit_csv,
        )?;
    }
    let json = report_json(config, &family, &checks, &report, &located, &branches)?;
    write_artifact(&config.output.dir, "report.json", &json)?;
    emit.say(format!(
        "artifacts written to {}",
        config.output.dir.display()
    ));
    Ok(0)
}

/// Runs the full worked-example pipeline and compares against the golden
/// values; any mismatch exits nonzero.
pub fn run_verify_example(config: &RunConfig, emit: &Emitter) -> anyhow::Result<i32> {
    let family = config.family()?;
    let report = detect(&family, config.k, config.lambda0)?;
    summarize(&report, emit);
    let jump = JumpSystem::from_family(&family, config.k)?;
    let scan = crossing_scan(&jump, config.lambda0, config.k)?;
    let located = isolate_crossings(&jump, &scan)?;
    let mut mismatches = Vec::new();
    let mut check = |name: &str, ok: bool, got: String| {
        if ok {
            emit.say(format!("verify {name}: ok ({got})"));
        } else {
            mismatches.push(format!("{name}: got {got}"));
        }
    };
    check(
        "w1_plus = -1",
        report.w1_plus == -1,
        report.w1_plus.to_string(),
    );
    check(
        "w1_minus = +1",
        report.w1_minus == 1,
        report.w1_minus.to_string(),
    );
    check("index = 0", report.index == 0, report.index.to_string());
    check(
        "parity = -1",
        report.parity == -1,
        report.parity.to_string(),
    );
    check(
        "criterion met",
        report.criterion_met,
        report.criterion_met.to_string(),
    );
    check(
        "single crossing",
        located.len() == 1,
        format!("{} intervals", located.len()),
    );
    if let Some(c) = located.first() {
        check(
            "interval contains pi",
            c.lo <= PI && PI <= c.hi,
            format!("[{}, {}]", sig17(c.lo), sig17(c.hi)),
        );
    }
    if mismatches.is_empty() {
        emit.say("worked example verified");
        Ok(0)
    } else {
        for m in &mismatches {
            eprintln!("golden mismatch: {m}");
        }
        Ok(1)
    }
}

pub fn run_dump_config(config: &RunConfig) -> anyhow::Result<i32> {
    println!("{}", serde_json::to_string_pretty(config)?);
    Ok(0)
}
