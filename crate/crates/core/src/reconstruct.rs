//! Linear inversion of measurement records into field moments.
//!
//! With `c = cos θ`, `s = sin θ` and the canonical rotation `u(θ, φ)`:
//!
//! ```text
//! I1(θ, φ)      = c² n1 + s² n2 + 2cs (cos φ Re⟨a1†a2⟩ - sin φ Im⟨a1†a2⟩)
//! G11(θ, 0)     = c⁴A + s⁴B + c²s² (4N12 + 2Re G) + c³s (4Re X) + cs³ (4Re Y)
//! G11(θ, π/2)   = c⁴A + s⁴B + c²s² (4N12 - 2Re G) - c³s (4Im X) - cs³ (4Im Y)
//! G12(π/4, π/4) = (A + B)/4 + Im G / 2
//! ```
//!
//! The φ = 0 family fixes `A`, `B` and the three real combinations; the
//! φ = π/2 family, with `A` and `B` known, fixes the three imaginary-side
//! combinations; the mixed setting supplies `Im G`. Every stage is a least
//! squares solve whose residual and condition number are reported.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::error::{Error, Result};
use crate::linalg::{self, Lstsq};
use crate::measurement::{
    observables_from_counts, predict_observables, MeasurementRecord, Observables, RecordMode, Role, THETA_TOL,
};
use crate::optics::Su2Element;
use crate::stokes::{CorrelationSet, StokesSummary};
use crate::C64;

/// `[c⁴, s⁴, c²s², c³s, cs³]` for the φ = 0 family.
pub fn phi0_row(theta: f64) -> [f64; 5] {
    let (s, c) = theta.sin_cos();
    [c.powi(4), s.powi(4), c * c * s * s, c.powi(3) * s, c * s.powi(3)]
}

/// `[c²s², c³s, cs³]` for the φ = π/2 family once `A` and `B` are removed.
pub fn phi_half_row(theta: f64) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [c * c * s * s, c.powi(3) * s, c * s.powi(3)]
}

/// Rows of `I1` and `I2` in the unknowns `[n1, n2, Re cross, Im cross]`.
pub fn first_order_rows(theta: f64, phi: f64) -> [[f64; 4]; 2] {
    let (s, c) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let k = 2.0 * c * s;
    [[c * c, s * s, k * cp, -k * sp], [s * s, c * c, -k * cp, k * sp]]
}

const FIRST_ORDER_NAMES: [&str; 4] = ["<a1†a1>", "<a2†a2>", "Re<a1†a2>", "Im<a1†a2>"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrder {
    pub n1: f64,
    pub n2: f64,
    pub cross: C64,
    pub residual: f64,
    pub cond: f64,
}

/// Solves for `n1`, `n2` and `<a1† a2>` from the intensities of every record passed.
pub fn first_order_from_records(records: &[MeasurementRecord]) -> Result<FirstOrder> {
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for r in records {
        let [r1, r2] = first_order_rows(r.setting.theta, r.setting.phi);
        rows.extend_from_slice(&r1);
        rows.extend_from_slice(&r2);
        rhs.push(r.values.i1);
        rhs.push(r.values.i2);
    }
    let a = DMatrix::from_row_slice(rhs.len(), 4, &rows);
    let sol = linalg::lstsq(&a, &DVector::from_vec(rhs)).map_err(|null| {
        let idx = null.direction.iamax();
        Error::RankDeficient {
            stage: "first-order",
            detail: format!("no setting sensitive to {}", FIRST_ORDER_NAMES[idx]),
        }
    })?;
    Ok(FirstOrder {
        n1: sol.x[0],
        n2: sol.x[1],
        cross: C64::new(sol.x[2], sol.x[3]),
        residual: sol.residual,
        cond: sol.cond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondOrder {
    pub a: f64,
    pub b: f64,
    pub n12: f64,
    pub g: C64,
    pub x: C64,
    pub y: C64,
    pub residual_phi0: f64,
    pub residual_phi_half: f64,
    pub cond_phi0: f64,
    pub cond_phi_half: f64,
}

fn solve_family(stage: &'static str, rows: Vec<f64>, cols: usize, rhs: Vec<f64>) -> Result<Lstsq> {
    let n = rhs.len();
    if n < cols {
        return Err(Error::InvalidPlan(format!(
            "{stage} needs at least {cols} records, got {n}"
        )));
    }
    let a = DMatrix::from_row_slice(n, cols, &rows);
    linalg::lstsq(&a, &DVector::from_vec(rhs)).map_err(|null| Error::Singular { stage, cond: null.cond })
}

/// Staged solve for the nine second-order parameters.
pub fn second_order_from_records(records: &[MeasurementRecord]) -> Result<SecondOrder> {
    let by_role = |role| records.iter().filter(move |r| r.role == role);

    let (mut rows, mut rhs) = (Vec::new(), Vec::new());
    for r in by_role(Role::FamilyPhi0) {
        rows.extend_from_slice(&phi0_row(r.setting.theta));
        rhs.push(r.values.g11);
    }
    let s0 = solve_family("phi=0 family", rows, 5, rhs)?;
    let (a, b) = (s0.x[0], s0.x[1]);
    let (c_plus, d_plus, e_plus) = (s0.x[2], s0.x[3], s0.x[4]);

    let (mut rows, mut rhs) = (Vec::new(), Vec::new());
    for r in by_role(Role::FamilyPhiHalf) {
        let full = phi0_row(r.setting.theta);
        rows.extend_from_slice(&phi_half_row(r.setting.theta));
        rhs.push(r.values.g11 - full[0] * a - full[1] * b);
    }
    let s1 = solve_family("phi=pi/2 family", rows, 3, rhs)?;
    // D- = -4 Im X, E- = -4 Im Y
    let (c_minus, d_minus, e_minus) = (s1.x[0], s1.x[1], s1.x[2]);

    let mixed: Vec<&MeasurementRecord> = by_role(Role::Mixed).collect();
    if mixed.is_empty() {
        return Err(Error::MissingSetting("the mixed (pi/4, pi/4) setting".into()));
    }
    let g12 = mixed.iter().map(|r| r.values.g12).sum::<f64>() / mixed.len() as f64;
    let im_g = 2.0 * (g12 - (a + b) / 4.0);

    Ok(SecondOrder {
        a,
        b,
        n12: (c_plus + c_minus) / 8.0,
        g: C64::new((c_plus - c_minus) / 4.0, im_g),
        x: C64::new(d_plus / 4.0, -d_minus / 4.0),
        y: C64::new(e_plus / 4.0, -e_minus / 4.0),
        residual_phi0: s0.residual,
        residual_phi_half: s1.residual,
        cond_phi0: s0.cond,
        cond_phi_half: s1.cond,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    pub first_order: f64,
    pub family_phi0: f64,
    pub family_phi_half: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructOptions {
    /// Predict every recorded observable from the solution and report the
    /// worst mismatch.
    pub redundancy_check: bool,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Absolute tolerance for consistency warnings on exact records.
    pub consistency_tol: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            redundancy_check: true,
            bootstrap_resamples: 500,
            bootstrap_seed: 0,
            consistency_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub corr: CorrelationSet,
    pub summary: StokesSummary,
    pub residuals: StageDiagnostics,
    pub condition_numbers: StageDiagnostics,
    /// Bootstrap standard errors of each moment (real and imaginary parts
    /// stored in the matching fields); sampled input only.
    pub stderr_corr: Option<CorrelationSet>,
    /// Bootstrap standard errors of `S`, `V` and `NO`; sampled input only.
    pub stderr_summary: Option<StokesSummary>,
    /// Worst mismatch of the φ = π/2 family's second-port `G22` against the
    /// staged solution; probes whether `A`, `B` from the φ = 0 family fit.
    pub ab_discrepancy: f64,
    pub redundancy_residual: Option<f64>,
    pub warnings: Vec<String>,
}

struct Core {
    corr: CorrelationSet,
    residuals: StageDiagnostics,
    conds: StageDiagnostics,
}

fn solve_core(records: &[MeasurementRecord]) -> Result<Core> {
    let first: Vec<MeasurementRecord> = records.iter().filter(|r| r.role == Role::FirstOrder).cloned().collect();
    let fo = first_order_from_records(&first)?;
    let so = second_order_from_records(records)?;
    Ok(Core {
        corr: CorrelationSet {
            n1: fo.n1,
            n2: fo.n2,
            cross: fo.cross,
            a: so.a,
            b: so.b,
            n12: so.n12,
            g: so.g,
            x: so.x,
            y: so.y,
        },
        residuals: StageDiagnostics {
            first_order: fo.residual,
            family_phi0: so.residual_phi0,
            family_phi_half: so.residual_phi_half,
        },
        conds: StageDiagnostics {
            first_order: fo.cond,
            family_phi0: so.cond_phi0,
            family_phi_half: so.cond_phi_half,
        },
    })
}

/// Bootstrap spreads: moments, summary, the prediction of every record and
/// the physical-consistency margins.
struct Spread {
    corr: CorrelationSet,
    summary: StokesSummary,
    predictions: Vec<[f64; 5]>,
    margins: [f64; 9],
}

/// Runs both solves, assembles the Stokes summary and, for sampled input,
/// bootstrap standard errors.
///
/// Consistency warnings on sampled input allow five combined standard errors:
/// the record's own error and the bootstrap spread of its prediction.
pub fn reconstruct_all(records: &[MeasurementRecord], opts: &ReconstructOptions) -> Result<ReconstructionReport> {
    let core = solve_core(records)?;
    let corr = core.corr;
    let mut warnings = Vec::new();

    let sampled = records.iter().any(|r| r.mode == RecordMode::Sampled);
    let spread = if sampled && opts.bootstrap_resamples > 1 {
        Some(bootstrap(records, opts.bootstrap_resamples, opts.bootstrap_seed)?)
    } else {
        None
    };
    let tolerance = |idx: usize, k: usize| -> f64 {
        let rec = records[idx].stderr.map_or(0.0, |e| e.to_array()[k]);
        let pred = spread.as_ref().map_or(0.0, |s| s.predictions[idx][k]);
        opts.consistency_tol + 5.0 * rec.hypot(pred)
    };
    let predictions: Vec<[f64; 5]> = records
        .iter()
        .map(|r| Ok(predict_observables(&corr, &r.setting.unitary()?).to_array()))
        .collect::<Result<_>>()?;

    let mut ab_discrepancy: f64 = 0.0;
    for (idx, r) in records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.role == Role::FamilyPhiHalf)
    {
        let d = (predictions[idx][3] - r.values.g22).abs();
        ab_discrepancy = ab_discrepancy.max(d);
        if d > tolerance(idx, 3) {
            warnings.push(format!(
                "A/B inconsistent between families: G22 at theta={:.6} off by {d:.3e}",
                r.setting.theta
            ));
        }
    }

    let redundancy_residual = if opts.redundancy_check {
        let mut worst: f64 = 0.0;
        let mut flagged = 0;
        for (idx, r) in records.iter().enumerate() {
            let meas = r.values.to_array();
            for k in 0..5 {
                let d = (predictions[idx][k] - meas[k]).abs();
                worst = worst.max(d);
                if d > tolerance(idx, k) {
                    flagged += 1;
                }
            }
        }
        if flagged > 0 {
            warnings.push(format!(
                "{flagged} recorded observables disagree with the reconstructed moments (worst {worst:.3e})"
            ));
        }
        Some(worst)
    } else {
        None
    };

    let slack = spread.as_ref().map_or([0.0; 9], |s| s.margins.map(|m| 5.0 * m));
    for v in corr.violations_within(&slack) {
        warnings.push(format!("reconstructed moments: {v}"));
    }

    for w in &warnings {
        log::warn!("{w}");
    }

    Ok(ReconstructionReport {
        summary: StokesSummary::from_correlations(&corr),
        corr,
        residuals: core.residuals,
        condition_numbers: core.conds,
        stderr_corr: spread.as_ref().map(|s| s.corr),
        stderr_summary: spread.as_ref().map(|s| s.summary),
        ab_discrepancy,
        redundancy_residual,
        warnings,
    })
}

/// Multinomial redraw of a histogram as a chain of binomials.
fn resample_counts(counts: &[(u32, u32, u64)], rng: &mut ChaCha20Rng) -> Vec<(u32, u32, u64)> {
    let shots: u64 = counts.iter().map(|c| c.2).sum();
    let mut remaining = shots;
    let mut p_left = 1.0f64;
    let mut out = Vec::with_capacity(counts.len());
    for (i, &(a, b, c)) in counts.iter().enumerate() {
        let p = c as f64 / shots as f64;
        let k = if i + 1 == counts.len() || remaining == 0 {
            remaining
        } else {
            let q = (p / p_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        remaining -= k;
        p_left -= p;
        if k > 0 {
            out.push((a, b, k));
        }
    }
    out
}

fn resample_record(r: &MeasurementRecord, rng: &mut ChaCha20Rng) -> MeasurementRecord {
    let mut out = r.clone();
    if r.mode != RecordMode::Sampled {
        return out;
    }
    if let Some(counts) = &r.counts {
        out.values = observables_from_counts(&resample_counts(counts, rng)).0;
    } else if let Some(se) = &r.stderr {
        let vals = r.values.to_array();
        let errs = se.to_array();
        let mut drawn = [0.0; 5];
        for k in 0..5 {
            drawn[k] = if errs[k] > 0.0 {
                Normal::new(vals[k], errs[k]).expect("finite stderr").sample(rng)
            } else {
                vals[k]
            };
        }
        out.values = Observables::from_array(drawn);
    }
    out
}

fn bootstrap(records: &[MeasurementRecord], resamples: usize, seed: u64) -> Result<Spread> {
    let unitaries: Vec<Su2Element> = records.iter().map(|r| r.setting.unitary()).collect::<Result<_>>()?;
    type Draw = (CorrelationSet, StokesSummary, Vec<[f64; 5]>);
    let draws: Vec<Draw> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let replicate: Vec<MeasurementRecord> = records.iter().map(|r| resample_record(r, &mut rng)).collect();
            let core = solve_core(&replicate)?;
            let preds = unitaries
                .iter()
                .map(|u| predict_observables(&core.corr, u).to_array())
                .collect();
            Ok((core.corr, StokesSummary::from_correlations(&core.corr), preds))
        })
        .collect::<Result<_>>()?;

    let n = draws.len() as f64;
    let std = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = vals.collect();
        let mean = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let mut params = [0.0; 13];
    for (k, p) in params.iter_mut().enumerate() {
        *p = std(&mut draws.iter().map(|d| d.0.to_params()[k]));
    }
    let mut summary = StokesSummary {
        s: [0.0; 4],
        v: [[0.0; 4]; 4],
        no: [[0.0; 4]; 4],
    };
    for i in 0..4 {
        summary.s[i] = std(&mut draws.iter().map(|d| d.1.s[i]));
        for j in 0..4 {
            summary.v[i][j] = std(&mut draws.iter().map(|d| d.1.v[i][j]));
            summary.no[i][j] = std(&mut draws.iter().map(|d| d.1.no[i][j]));
        }
    }
    let predictions = (0..records.len())
        .map(|idx| std::array::from_fn(|k| std(&mut draws.iter().map(|d| d.2[idx][k]))))
        .collect();
    let margins = std::array::from_fn(|k| std(&mut draws.iter().map(|d| d.0.consistency_margins()[k])));
    Ok(Spread {
        corr: CorrelationSet::from_params(&params),
        summary,
        predictions,
        margins,
    })
}

/// One add/subtract combination of `G11` records against the assembled
/// normally ordered Stokes correlations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub from_records: f64,
    pub from_moments: f64,
    pub discrepancy: f64,
}

fn g11_at(records: &[MeasurementRecord], theta: f64, phi: f64) -> Result<f64> {
    let hits: Vec<f64> = records
        .iter()
        .filter(|r| {
            let d = (r.setting.theta - theta).rem_euclid(std::f64::consts::PI);
            (r.setting.phi - phi).abs() < THETA_TOL && (d < THETA_TOL || std::f64::consts::PI - d < THETA_TOL)
        })
        .map(|r| r.values.g11)
        .collect();
    if hits.is_empty() {
        return Err(Error::MissingSetting(format!("theta={theta:.6}, phi={phi:.6}")));
    }
    Ok(hits.iter().sum::<f64>() / hits.len() as f64)
}

/// The θ = π/4 and 3π/4 sums and differences of each family:
///
/// ```text
/// G11(π/4, 0)   + G11(3π/4, 0)   = (<:S0S0:> + <:S2S2:>) / 2
/// G11(π/4, 0)   - G11(3π/4, 0)   =  <:S0S2:>
/// G11(π/4, π/2) + G11(3π/4, π/2) = (<:S0S0:> + <:S3S3:>) / 2
/// G11(π/4, π/2) - G11(3π/4, π/2) = -<:S0S3:>
/// ```
pub fn verify_identities(report: &ReconstructionReport, records: &[MeasurementRecord]) -> Result<Vec<IdentityCheck>> {
    let no = &report.summary.no;
    let q = 3.0 * FRAC_PI_4;
    let (p0, p0b) = (g11_at(records, FRAC_PI_4, 0.0)?, g11_at(records, q, 0.0)?);
    let (ph, phb) = (g11_at(records, FRAC_PI_4, FRAC_PI_2)?, g11_at(records, q, FRAC_PI_2)?);
    let rows = [
        (
            "phi=0 sum: (<:S0S0:>+<:S2S2:>)/2",
            p0 + p0b,
            (no[0][0] + no[2][2]) / 2.0,
        ),
        ("phi=0 difference: <:S0S2:>", p0 - p0b, no[0][2]),
        (
            "phi=pi/2 sum: (<:S0S0:>+<:S3S3:>)/2",
            ph + phb,
            (no[0][0] + no[3][3]) / 2.0,
        ),
        ("phi=pi/2 difference: -<:S0S3:>", ph - phb, -no[0][3]),
    ];
    Ok(rows
        .into_iter()
        .map(|(name, from_records, from_moments)| IdentityCheck {
            name: name.to_string(),
            from_records,
            from_moments,
            discrepancy: (from_records - from_moments).abs(),
        })
        .collect())
}
