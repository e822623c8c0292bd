//! Detector-side simulation: intensities and intensity–intensity
//! correlations of the rotated modes `(b1, b2)^T = u (a1, a2)^T`.
//!
//! Exact records expand the `b`-mode moments in the `a`-mode moments. Sampled
//! records draw photon-number pairs from the rotated state with ideal
//! number-resolving detectors and use factorial-moment estimators.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::TwoModeState;
use crate::optics::{compose_gadget, gadget_for, su2, Su2Element};
use crate::reconstruct::{phi0_row, phi_half_row};
use crate::stokes::{correlations_from_state, CorrelationSet};
use crate::{linalg, C64};

/// Angle tolerance when comparing θ modulo π.
pub const THETA_TOL: f64 = 1e-9;
/// Largest design-matrix condition number accepted for a custom θ set.
pub const MAX_CUSTOM_COND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    /// The ideal rotation matrix.
    AbstractSu2,
    /// The composed quarter/quarter/half wave-plate matrix.
    QqhGadget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSetting {
    pub theta: f64,
    pub phi: f64,
    pub realization: Realization,
}

impl MeasurementSetting {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi,
            realization: Realization::AbstractSu2,
        }
    }

    pub fn with_realization(mut self, realization: Realization) -> Self {
        self.realization = realization;
        self
    }

    /// Mode rotation applied by this setting.
    pub fn unitary(&self) -> Result<Su2Element> {
        match self.realization {
            Realization::AbstractSu2 => Ok(su2(self.theta, self.phi)),
            Realization::QqhGadget => Ok(compose_gadget(&gadget_for(self.theta, self.phi)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FirstOrder,
    FamilyPhi0,
    FamilyPhiHalf,
    Mixed,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::FirstOrder => "first_order",
            Role::FamilyPhi0 => "family_phi0",
            Role::FamilyPhiHalf => "family_phi_half",
            Role::Mixed => "mixed",
        }
    }

    fn parse(s: &str) -> Option<Role> {
        [Role::FirstOrder, Role::FamilyPhi0, Role::FamilyPhiHalf, Role::Mixed]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanEntry {
    pub setting: MeasurementSetting,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementPlan {
    pub entries: Vec<PlanEntry>,
}

pub const DEFAULT_THETA_PHI0: [f64; 5] = [PI / 12.0, FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, 5.0 * PI / 12.0];
pub const DEFAULT_THETA_PHI_HALF: [f64; 3] = [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3];

/// The standard plan: four first-order settings, the φ = 0 family, the
/// φ = π/2 family and the (π/4, π/4) mixed setting.
///
/// Custom θ sets must be pairwise distinct modulo π and give a nonsingular
/// family design matrix.
pub fn default_plan(theta_phi0: Option<&[f64]>, theta_phi_half: Option<&[f64]>) -> Result<MeasurementPlan> {
    let phi0 = theta_phi0.unwrap_or(&DEFAULT_THETA_PHI0);
    let half = theta_phi_half.unwrap_or(&DEFAULT_THETA_PHI_HALF);
    check_theta_set(phi0, 5, "phi=0", |t| phi0_row(t).to_vec())?;
    check_theta_set(half, 3, "phi=pi/2", |t| phi_half_row(t).to_vec())?;

    let mut entries = Vec::with_capacity(4 + phi0.len() + half.len() + 1);
    for (t, p) in [(0.0, 0.0), (FRAC_PI_2, 0.0), (FRAC_PI_4, 0.0), (FRAC_PI_4, FRAC_PI_2)] {
        entries.push(PlanEntry {
            setting: MeasurementSetting::new(t, p),
            role: Role::FirstOrder,
        });
    }
    for &t in phi0 {
        entries.push(PlanEntry {
            setting: MeasurementSetting::new(t, 0.0),
            role: Role::FamilyPhi0,
        });
    }
    for &t in half {
        entries.push(PlanEntry {
            setting: MeasurementSetting::new(t, FRAC_PI_2),
            role: Role::FamilyPhiHalf,
        });
    }
    entries.push(PlanEntry {
        setting: MeasurementSetting::new(FRAC_PI_4, FRAC_PI_4),
        role: Role::Mixed,
    });
    let plan = MeasurementPlan { entries };
    plan.validate()?;
    Ok(plan)
}

fn same_mod_pi(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(PI);
    d < THETA_TOL || PI - d < THETA_TOL
}

fn check_theta_set(thetas: &[f64], min: usize, family: &str, row: impl Fn(f64) -> Vec<f64>) -> Result<()> {
    if thetas.len() < min {
        return Err(Error::DegenerateThetas(format!(
            "{family} family needs at least {min} theta values, got {}",
            thetas.len()
        )));
    }
    if let Some(t) = thetas.iter().find(|t| !t.is_finite()) {
        return Err(Error::DegenerateThetas(format!(
            "{family} family: non-finite theta {t}"
        )));
    }
    for (i, a) in thetas.iter().enumerate() {
        for b in &thetas[i + 1..] {
            if same_mod_pi(*a, *b) {
                return Err(Error::DegenerateThetas(format!(
                    "{family} family: repeated theta {a} and {b} (equal modulo pi)"
                )));
            }
        }
    }
    let cols = row(0.0).len();
    let data: Vec<f64> = thetas.iter().flat_map(|&t| row(t)).collect();
    let cond = linalg::condition_number(&nalgebra::DMatrix::from_row_slice(thetas.len(), cols, &data));
    if cond.is_nan() || cond >= MAX_CUSTOM_COND {
        return Err(Error::DegenerateThetas(format!(
            "{family} family: design matrix is singular (condition number {cond:e})"
        )));
    }
    Ok(())
}

impl MeasurementPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Switches every setting to the given realization.
    pub fn with_realization(mut self, realization: Realization) -> Self {
        for e in &mut self.entries {
            e.setting.realization = realization;
        }
        self
    }

    /// Adds θ = π/4 and 3π/4 to both families, as needed by the
    /// add/subtract identity checks.
    pub fn with_identity_settings(mut self) -> Self {
        let realization = self
            .entries
            .first()
            .map_or(Realization::AbstractSu2, |e| e.setting.realization);
        for (phi, role) in [(0.0, Role::FamilyPhi0), (FRAC_PI_2, Role::FamilyPhiHalf)] {
            for t in [FRAC_PI_4, 3.0 * FRAC_PI_4] {
                self.entries.push(PlanEntry {
                    setting: MeasurementSetting::new(t, phi).with_realization(realization),
                    role,
                });
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let count = |role| self.entries.iter().filter(|e| e.role == role).count();
        let distinct = |role, phi: f64| -> Result<usize> {
            let mut seen: Vec<f64> = Vec::new();
            for e in self.entries.iter().filter(|e| e.role == role) {
                if (e.setting.phi - phi).abs() > THETA_TOL {
                    return Err(Error::InvalidPlan(format!(
                        "{} setting has phi = {}, expected {phi}",
                        role.as_str(),
                        e.setting.phi
                    )));
                }
                if !seen.iter().any(|&t| same_mod_pi(t, e.setting.theta)) {
                    seen.push(e.setting.theta);
                }
            }
            Ok(seen.len())
        };
        if count(Role::FirstOrder) < 4 {
            return Err(Error::InvalidPlan("needs at least 4 first_order settings".into()));
        }
        if distinct(Role::FamilyPhi0, 0.0)? < 5 {
            return Err(Error::InvalidPlan(
                "needs 5 distinct theta values in family_phi0".into(),
            ));
        }
        if distinct(Role::FamilyPhiHalf, FRAC_PI_2)? < 3 {
            return Err(Error::InvalidPlan(
                "needs 3 distinct theta values in family_phi_half".into(),
            ));
        }
        if count(Role::Mixed) != 1 {
            return Err(Error::InvalidPlan("needs exactly one mixed setting".into()));
        }
        for e in &self.entries {
            if e.setting.realization == Realization::QqhGadget {
                gadget_for(e.setting.theta, e.setting.phi)?;
            }
        }
        Ok(())
    }
}

/// The five recorded observables of one setting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observables {
    /// `<b1† b1>`
    pub i1: f64,
    /// `<b2† b2>`
    pub i2: f64,
    /// `<b1† b1† b1 b1>`
    pub g11: f64,
    /// `<b2† b2† b2 b2>`
    pub g22: f64,
    /// `<b1† b2† b1 b2>`
    pub g12: f64,
}

impl Observables {
    pub fn to_array(&self) -> [f64; 5] {
        [self.i1, self.i2, self.g11, self.g22, self.g12]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            i1: a[0],
            i2: a[1],
            g11: a[2],
            g22: a[3],
            g12: a[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementRecord {
    pub setting: MeasurementSetting,
    pub role: Role,
    pub values: Observables,
    pub mode: RecordMode,
    /// 0 for exact records.
    pub shots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Observables>,
    /// Sparse photon-count histogram `(n1, n2, count)` of a sampled record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<(u32, u32, u64)>>,
}

/// `b`-mode observables from `a`-mode moments for `b = u a`.
pub fn predict_observables(corr: &CorrelationSet, u: &Su2Element) -> Observables {
    let m = u.matrix();
    let intensity = |p: usize| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for k in 0..2 {
                acc += m[(p, i)].conj() * m[(p, k)] * corr.second(i, k);
            }
        }
        acc.re
    };
    let pair = |p: usize, q: usize| -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                let cre = m[(p, i)].conj() * m[(q, j)].conj();
                for k in 0..2 {
                    for l in 0..2 {
                        acc += cre * m[(p, k)] * m[(q, l)] * corr.fourth(i, j, k, l);
                    }
                }
            }
        }
        acc.re
    };
    Observables {
        i1: intensity(0),
        i2: intensity(1),
        g11: pair(0, 0),
        g22: pair(1, 1),
        g12: pair(0, 1),
    }
}

fn exact_record(setting: MeasurementSetting, role: Role, values: Observables) -> MeasurementRecord {
    MeasurementRecord {
        setting,
        role,
        values,
        mode: RecordMode::Exact,
        shots: 0,
        seed: None,
        stderr: None,
        counts: None,
    }
}

/// Exact record via the moment transform.
pub fn measure_exact(state: &TwoModeState, setting: MeasurementSetting, role: Role) -> Result<MeasurementRecord> {
    let u = setting.unitary()?;
    let corr = correlations_from_state(state);
    Ok(exact_record(setting, role, predict_observables(&corr, &u)))
}

/// Exact record via rotating the state first and reading the `a`-mode moments.
pub fn measure_exact_via_state(
    state: &TwoModeState,
    setting: MeasurementSetting,
    role: Role,
) -> Result<MeasurementRecord> {
    let rotated = state.apply_unitary(&setting.unitary()?);
    let c = correlations_from_state(&rotated);
    let values = Observables {
        i1: c.n1,
        i2: c.n2,
        g11: c.a,
        g22: c.b,
        g12: c.n12,
    };
    Ok(exact_record(setting, role, values))
}

pub fn measure_sampled(
    state: &TwoModeState,
    setting: MeasurementSetting,
    role: Role,
    shots: u64,
    seed: u64,
) -> Result<MeasurementRecord> {
    measure_sampled_stream(state, setting, role, shots, seed, 0)
}

/// Photon-counting record with `shots` draws from ChaCha20 stream `stream`
/// of `seed`. Identical arguments give a bit-identical record.
pub fn measure_sampled_stream(
    state: &TwoModeState,
    setting: MeasurementSetting,
    role: Role,
    shots: u64,
    seed: u64,
    stream: u64,
) -> Result<MeasurementRecord> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let rotated = state.apply_unitary(&setting.unitary()?);
    let probs = rotated.photon_distribution();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Unnormalized(total));
    }
    let dist = WeightedIndex::new(&probs).map_err(|_| Error::Unnormalized(total))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut hist = vec![0u64; probs.len()];
    for _ in 0..shots {
        hist[dist.sample(&mut rng)] += 1;
    }
    let dim = rotated.dim();
    let counts: Vec<(u32, u32, u64)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(idx, &c)| ((idx / dim) as u32, (idx % dim) as u32, c))
        .collect();
    let (values, stderr) = observables_from_counts(&counts);
    Ok(MeasurementRecord {
        setting,
        role,
        values,
        mode: RecordMode::Sampled,
        shots,
        seed: Some(seed),
        stderr: Some(stderr),
        counts: Some(counts),
    })
}

/// Factorial-moment estimators and their standard errors from a histogram.
pub fn observables_from_counts(counts: &[(u32, u32, u64)]) -> (Observables, Observables) {
    let shots: u64 = counts.iter().map(|c| c.2).sum();
    let n = shots as f64;
    let f = |n1: f64, n2: f64| [n1, n2, n1 * (n1 - 1.0), n2 * (n2 - 1.0), n1 * n2];
    let mut mean = [0.0; 5];
    for &(a, b, c) in counts {
        let v = f(a as f64, b as f64);
        for k in 0..5 {
            mean[k] += c as f64 * v[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut err = [0.0; 5];
    if shots > 1 {
        let mut ss = [0.0; 5];
        for &(a, b, c) in counts {
            let v = f(a as f64, b as f64);
            for k in 0..5 {
                ss[k] += c as f64 * (v[k] - mean[k]).powi(2);
            }
        }
        for k in 0..5 {
            err[k] = (ss[k] / (n - 1.0) / n).sqrt();
        }
    }
    (Observables::from_array(mean), Observables::from_array(err))
}

pub fn measure_plan_exact(state: &TwoModeState, plan: &MeasurementPlan) -> Result<Vec<MeasurementRecord>> {
    plan.entries
        .iter()
        .map(|e| measure_exact(state, e.setting, e.role))
        .collect()
}

/// Samples every setting on its own substream (`stream = entry index`), in parallel.
pub fn measure_plan_sampled(
    state: &TwoModeState,
    plan: &MeasurementPlan,
    shots: u64,
    seed: u64,
) -> Result<Vec<MeasurementRecord>> {
    plan.entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| measure_sampled_stream(state, e.setting, e.role, shots, seed, i as u64))
        .collect()
}

const CSV_HEADER: [&str; 17] = [
    "role",
    "theta",
    "phi",
    "realization",
    "mode",
    "i1",
    "i2",
    "g11",
    "g22",
    "g12",
    "se_i1",
    "se_i2",
    "se_g11",
    "se_g22",
    "se_g12",
    "shots",
    "seed",
];

fn realization_str(r: Realization) -> &'static str {
    match r {
        Realization::AbstractSu2 => "abstract_su2",
        Realization::QqhGadget => "qqh_gadget",
    }
}

/// One row per record; angles in radians. Histograms are not exported.
pub fn write_records_csv<W: Write>(records: &[MeasurementRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let se = r.stderr.unwrap_or_default();
        let mut row = vec![
            r.role.as_str().to_string(),
            format!("{:?}", r.setting.theta),
            format!("{:?}", r.setting.phi),
            realization_str(r.setting.realization).to_string(),
            match r.mode {
                RecordMode::Exact => "exact".into(),
                RecordMode::Sampled => "sampled".into(),
            },
        ];
        row.extend(r.values.to_array().iter().map(|v| format!("{v:?}")));
        row.extend(se.to_array().iter().map(|v| format!("{v:?}")));
        row.push(r.shots.to_string());
        row.push(r.seed.map(|s| s.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<MeasurementRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::InvalidPlan(format!("unexpected CSV header: {:?}", header)));
    }
    let bad = |what: &str, v: &str| Error::InvalidPlan(format!("bad {what} field {v:?} in records CSV"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64> { row[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i], &row[i])) };
        let role = Role::parse(&row[0]).ok_or_else(|| bad("role", &row[0]))?;
        let realization = match &row[3] {
            "abstract_su2" => Realization::AbstractSu2,
            "qqh_gadget" => Realization::QqhGadget,
            v => return Err(bad("realization", v)),
        };
        let mode = match &row[4] {
            "exact" => RecordMode::Exact,
            "sampled" => RecordMode::Sampled,
            v => return Err(bad("mode", v)),
        };
        let values = Observables::from_array([num(5)?, num(6)?, num(7)?, num(8)?, num(9)?]);
        let se = Observables::from_array([num(10)?, num(11)?, num(12)?, num(13)?, num(14)?]);
        let shots = row[15].parse::<u64>().map_err(|_| bad("shots", &row[15]))?;
        let seed = if row[16].is_empty() {
            None
        } else {
            Some(row[16].parse::<u64>().map_err(|_| bad("seed", &row[16]))?)
        };
        out.push(MeasurementRecord {
            setting: MeasurementSetting {
                theta: num(1)?,
                phi: num(2)?,
                realization,
            },
            role,
            values,
            mode,
            shots,
            seed,
            stderr: (mode == RecordMode::Sampled).then_some(se),
            counts: None,
        });
    }
    Ok(out)
}
