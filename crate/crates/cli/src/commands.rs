use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use qstokes::measurement::{default_plan, measure_plan_exact, measure_plan_sampled};
use qstokes::optics::{compose_gadget, gadget_for, su2};
use qstokes::reconstruct::{reconstruct_all, verify_identities};
use qstokes::stokes::{correlations_from_state, stokes_oracle};
use qstokes::{
    CorrelationSet, IdentityCheck, MeasurementPlan, MeasurementRecord, ReconstructionReport, StokesSummary,
    TwoModeState,
};

use crate::config::{RunConfig, RunMode};
use crate::files::{self, ReportFile, StateFile};

const LABELS: [&str; 4] = ["S0", "S1", "S2", "S3"];

fn print_vector(name: &str, v: &[f64; 4]) {
    // keep rounding noise from printing as -0.00000000
    let cells: Vec<String> = v
        .iter()
        .map(|&x| if x.abs() < 5e-9 { 0.0 } else { x })
        .map(|x| format!("{x:>14.8}"))
        .collect();
    println!("{name:<4}{}", cells.join(""));
}

fn print_matrix(name: &str, m: &[[f64; 4]; 4]) {
    println!("{name}:");
    println!("    {}", LABELS.iter().map(|l| format!("{l:>14}")).collect::<String>());
    for (i, row) in m.iter().enumerate() {
        print_vector(LABELS[i], row);
    }
}

fn print_summary(s: &StokesSummary) {
    print_vector("S", &s.s);
    print_matrix("V (symmetrized variances)", &s.v);
    print_matrix("NO (normally ordered correlations)", &s.no);
}

pub fn build_state(cfg: &RunConfig) -> Result<TwoModeState> {
    let spec = cfg.state_spec()?;
    let state = spec
        .build()
        .context("building state")?
        .with_boundary_threshold(cfg.tolerances.boundary);
    if let Some(w) = state.truncation_warning() {
        log::warn!("{w}");
    }
    Ok(state)
}

fn plan_for(cfg: &RunConfig) -> Result<MeasurementPlan> {
    let p = &cfg.plan;
    let mut plan =
        default_plan(p.theta_phi0.as_deref(), p.theta_phi_half.as_deref())?.with_realization(cfg.realization);
    if p.verify_identities {
        plan = plan.with_identity_settings();
    }
    Ok(plan)
}

pub fn measure(cfg: &RunConfig, state: &TwoModeState) -> Result<Vec<MeasurementRecord>> {
    let plan = plan_for(cfg)?;
    Ok(match cfg.mode {
        RunMode::Exact => measure_plan_exact(state, &plan)?,
        RunMode::Sampled => measure_plan_sampled(state, &plan, cfg.shots, cfg.seed)?,
    })
}

fn oracle_deviation(report: &ReconstructionReport, state: &TwoModeState) -> f64 {
    let direct: CorrelationSet = correlations_from_state(state);
    report
        .corr
        .max_abs_diff(&direct)
        .max(report.summary.max_abs_diff(&stokes_oracle(state)))
}

pub fn cmd_state(cfg: &RunConfig, oracle_check: bool) -> Result<()> {
    let state = build_state(cfg)?;
    let summary = stokes_oracle(&state);
    println!("cutoff          {}", state.cutoff());
    println!("norm            {:.12}", state.norm_sqr().sqrt());
    println!("boundary mass   {:.3e}", state.boundary_mass());
    print_summary(&summary);
    if oracle_check {
        let from_moments = StokesSummary::from_correlations(&correlations_from_state(&state));
        let d = from_moments.max_abs_diff(&summary);
        println!("moment path vs operator oracle: max deviation {d:.3e}");
        if d > cfg.tolerances.oracle {
            log::warn!(
                "moment path and operator oracle differ by {d:.3e} (tolerance {:.1e})",
                cfg.tolerances.oracle
            );
        }
    }
    if let Some(path) = &cfg.outputs.state {
        let file = StateFile {
            format: files::STATE_FORMAT.into(),
            version: files::VERSION,
            spec: cfg.state_spec()?.clone(),
            norm: state.norm_sqr().sqrt(),
            boundary_mass: state.boundary_mass(),
            summary,
        };
        files::write_json(path, &file)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_measure(cfg: &RunConfig) -> Result<()> {
    let state = build_state(cfg)?;
    let records = measure(cfg, &state)?;
    for r in &records {
        let v = r.values;
        println!(
            "{:<16} theta={:>9.6} phi={:>9.6}  I1={:>11.6} I2={:>11.6} G11={:>11.6} G22={:>11.6} G12={:>11.6}",
            r.role.as_str(),
            r.setting.theta,
            r.setting.phi,
            v.i1,
            v.i2,
            v.g11,
            v.g22,
            v.g12
        );
    }
    match &cfg.outputs.records {
        Some(path) => {
            files::write_records(path, &records)?;
            eprintln!("wrote {} records to {}", records.len(), path.display());
        }
        None => eprintln!("{} records (pass --out to save them)", records.len()),
    }
    Ok(())
}

fn print_report(report: &ReconstructionReport) {
    print_summary(&report.summary);
    if let Some(se) = &report.stderr_summary {
        println!("bootstrap standard errors:");
        print_vector("S", &se.s);
        print_matrix("V", &se.v);
    }
    let r = &report.residuals;
    let c = &report.condition_numbers;
    println!("stage            residual      condition");
    println!("first order      {:>10.3e}  {:>12.4}", r.first_order, c.first_order);
    println!("phi=0 family     {:>10.3e}  {:>12.4}", r.family_phi0, c.family_phi0);
    println!(
        "phi=pi/2 family  {:>10.3e}  {:>12.4}",
        r.family_phi_half, c.family_phi_half
    );
    println!("A/B cross-family discrepancy {:.3e}", report.ab_discrepancy);
    if let Some(w) = report.redundancy_residual {
        println!("worst record misfit          {w:.3e}");
    }
}

fn print_identities(checks: &[IdentityCheck]) {
    println!("identity checks:");
    for c in checks {
        println!(
            "  {:<40} records {:>14.8}  moments {:>14.8}  |diff| {:.3e}",
            c.name, c.from_records, c.from_moments, c.discrepancy
        );
    }
}

fn identity_tolerance_warnings(cfg: &RunConfig, checks: &[IdentityCheck], sampled: bool) {
    if sampled {
        return;
    }
    for c in checks.iter().filter(|c| c.discrepancy > cfg.tolerances.identity) {
        log::warn!("identity {:?} off by {:.3e}", c.name, c.discrepancy);
    }
}

pub fn cmd_reconstruct(cfg: &RunConfig, records_path: &Path, identities: bool, oracle_check: bool) -> Result<()> {
    let records = files::read_records(records_path)?;
    let sampled = records.iter().any(|r| r.mode == qstokes::RecordMode::Sampled);
    let report = reconstruct_all(&records, &cfg.reconstruct_options())?;
    print_report(&report);

    let identity_checks = if identities {
        let checks = verify_identities(&report, &records)
            .context("identity checks need the θ = π/4 and 3π/4 records; measure with --verify-identities")?;
        print_identities(&checks);
        identity_tolerance_warnings(cfg, &checks, sampled);
        Some(checks)
    } else {
        None
    };

    let oracle_deviation = if cfg.state.is_some() {
        let state = build_state(cfg)?;
        let d = oracle_deviation(&report, &state);
        println!("max |reconstructed - oracle| = {d:.3e}");
        if oracle_check && !sampled && d > cfg.tolerances.oracle {
            log::warn!(
                "oracle deviation {d:.3e} exceeds tolerance {:.1e}",
                cfg.tolerances.oracle
            );
        }
        Some(d)
    } else if oracle_check {
        bail!("--oracle-check needs the state: pass --state FILE or a config with \"state\"");
    } else {
        None
    };

    if let Some(path) = &cfg.outputs.report {
        let file = ReportFile {
            format: files::REPORT_FORMAT.into(),
            version: files::VERSION,
            report,
            identity_checks,
            oracle_deviation,
        };
        files::write_json(path, &file)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_gadget(theta: f64, phi: f64) -> Result<()> {
    let g = gadget_for(theta, phi)?;
    let residual = compose_gadget(&g).projective_distance(&su2(theta, phi));
    println!(
        "target  theta = {theta:.9} rad ({:.6} deg), phi = {phi:.9} rad ({:.6} deg)",
        theta.to_degrees(),
        phi.to_degrees()
    );
    println!("plate   angle [rad]      angle [deg]   reduced mod 180 [deg]");
    for (name, angle) in [("Q1", g.q1), ("Q2", g.q2), ("H", g.h)] {
        println!(
            "{name:<6}{angle:>13.9}  {:>15.6}  {:>15.6}",
            angle.to_degrees(),
            angle.rem_euclid(PI).to_degrees()
        );
    }
    println!("projective residual min_phase |Q(q1) Q(q2) H(h) - e^(i c) u| = {residual:.3e}");
    Ok(())
}

/// Full pipeline against the oracle; returns the number of failed checks.
pub fn cmd_verify(cfg: &RunConfig) -> Result<usize> {
    let mut cfg = cfg.clone();
    cfg.plan.verify_identities = true;
    let state = build_state(&cfg)?;
    let truth = stokes_oracle(&state);
    let records = measure(&cfg, &state)?;
    let report = reconstruct_all(&records, &cfg.reconstruct_options())?;
    let checks = verify_identities(&report, &records)?;
    let mut failures = 0;
    let mut line = |ok: bool, what: String| {
        println!("[{}] {what}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    match cfg.mode {
        RunMode::Exact => {
            let d = oracle_deviation(&report, &state);
            line(
                d <= cfg.tolerances.oracle,
                format!(
                    "reconstruction vs oracle: {d:.3e} (tolerance {:.1e})",
                    cfg.tolerances.oracle
                ),
            );
            for c in &checks {
                line(
                    c.discrepancy <= cfg.tolerances.identity,
                    format!(
                        "{}: {:.3e} (tolerance {:.1e})",
                        c.name, c.discrepancy, cfg.tolerances.identity
                    ),
                );
            }
        }
        RunMode::Sampled => {
            let se = report
                .stderr_summary
                .context("sampled verification needs bootstrap resamples > 1")?;
            let k = cfg.tolerances.sigma;
            for i in 0..4 {
                let z = (report.summary.s[i] - truth.s[i]).abs() / se.s[i];
                line(
                    z <= k,
                    format!(
                        "{}: {:.6} vs oracle {:.6}, {z:.2} standard errors (limit {k})",
                        LABELS[i], report.summary.s[i], truth.s[i]
                    ),
                );
            }
            for i in 0..4 {
                let z = (report.summary.v[i][i] - truth.v[i][i]).abs() / se.v[i][i];
                line(
                    z <= k,
                    format!(
                        "V{i}{i}: {:.6} vs oracle {:.6}, {z:.2} standard errors (limit {k})",
                        report.summary.v[i][i], truth.v[i][i]
                    ),
                );
            }
        }
    }
    let c = report.condition_numbers;
    let worst = c.first_order.max(c.family_phi0).max(c.family_phi_half);
    line(worst < 1e3, format!("condition numbers: worst {worst:.2} (limit 1e3)"));
    Ok(failures)
}
