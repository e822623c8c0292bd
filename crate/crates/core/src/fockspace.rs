//! Truncated two-mode Fock space.
//!
//! A [`TwoModeState`] stores the amplitudes `c[n1][n2]` for `0 <= n1, n2 <= N`
//! in row-major order. Moments are evaluated by acting with ladder operators
//! directly on the amplitude grid; no operator matrices are built here.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Su2Element;
use crate::C64;

/// Default limit on the probability mass sitting on the grid boundary.
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 1e-10;

/// Tolerance on `1 - <psi|psi>` before a transformed state is flagged.
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
}

/// Exponents of the normally ordered monomial `a1†^p a2†^q a1^r a2^s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MomentSpec {
    pub p: u8,
    pub q: u8,
    pub r: u8,
    pub s: u8,
}

impl MomentSpec {
    pub const MAX_DEGREE: u8 = 4;

    pub fn new(p: u8, q: u8, r: u8, s: u8) -> Result<Self> {
        let degree = p + q + r + s;
        if degree > Self::MAX_DEGREE {
            return Err(Error::MomentDegree { p, q, r, s, degree });
        }
        Ok(Self { p, q, r, s })
    }

    pub fn degree(&self) -> u8 {
        self.p + self.q + self.r + self.s
    }

    /// The Hermitian-conjugate monomial.
    pub fn adjoint(&self) -> Self {
        Self {
            p: self.r,
            q: self.s,
            r: self.p,
            s: self.q,
        }
    }

    /// Every monomial of total degree at most 4.
    pub fn all() -> impl Iterator<Item = MomentSpec> {
        (0..=4u8).flat_map(|p| {
            (0..=4u8).flat_map(move |q| {
                (0..=4u8).flat_map(move |r| (0..=4u8).filter_map(move |s| MomentSpec::new(p, q, r, s).ok()))
            })
        })
    }
}

/// One factor of an operator word: `a_mode` or `a_mode†`, minus `shift`.
///
/// `shift` turns the factor into a displaced mode `d = a - alpha`
/// (or `d† = a† - conj(alpha)`, in which case pass the conjugate yourself).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    pub mode: Mode,
    pub dagger: bool,
    pub shift: C64,
}

impl Ladder {
    pub fn annihilate(mode: Mode) -> Self {
        Self {
            mode,
            dagger: false,
            shift: C64::new(0.0, 0.0),
        }
    }

    pub fn create(mode: Mode) -> Self {
        Self {
            mode,
            dagger: true,
            shift: C64::new(0.0, 0.0),
        }
    }

    /// `a - alpha` for an annihilator, `a† - conj(alpha)` for a creator.
    pub fn displaced(mut self, alpha: C64) -> Self {
        self.shift = if self.dagger { alpha.conj() } else { alpha };
        self
    }
}

/// Reported when a state leaks probability to the edge of the truncated grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationWarning {
    pub boundary_mass: f64,
    pub norm_deficit: f64,
    pub threshold: f64,
}

impl fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "truncation: boundary mass {:.3e}, norm deficit {:.3e} (threshold {:.1e}); increase the cutoff",
            self.boundary_mass, self.norm_deficit, self.threshold
        )
    }
}

/// Pure state of two bosonic modes on the grid `0..=cutoff` per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    cutoff: usize,
    amps: Vec<C64>,
    boundary_threshold: f64,
}

impl TwoModeState {
    /// Wraps raw amplitudes (row-major, `(cutoff+1)^2` entries) and normalizes them.
    pub fn from_amplitudes(cutoff: usize, amps: Vec<C64>) -> Result<Self> {
        check_cutoff(cutoff)?;
        let dim = cutoff + 1;
        if amps.len() != dim * dim {
            return Err(Error::CutoffMismatch(cutoff, (amps.len() as f64).sqrt() as usize - 1));
        }
        if amps.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("amplitudes"));
        }
        let mut state = Self {
            cutoff,
            amps,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
        };
        state.normalize()?;
        Ok(state)
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        Self::fock(0, 0, cutoff)
    }

    pub fn fock(n1: usize, n2: usize, cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        if n1 > cutoff || n2 > cutoff {
            return Err(Error::IndexOutOfRange { n1, n2, cutoff });
        }
        let dim = cutoff + 1;
        let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
        amps[n1 * dim + n2] = C64::new(1.0, 0.0);
        Ok(Self {
            cutoff,
            amps,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
        })
    }

    /// Product of single-mode coherent states `|alpha1> ⊗ |alpha2>`.
    ///
    /// Keep `|alpha|^2 + 6|alpha|` below the cutoff to stay clear of the
    /// truncation threshold.
    pub fn coherent(alpha1: C64, alpha2: C64, cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        check_finite(alpha1, "alpha1")?;
        check_finite(alpha2, "alpha2")?;
        let c1 = poisson_amplitudes(alpha1, cutoff);
        let c2 = poisson_amplitudes(alpha2, cutoff);
        let amps = outer(&c1, &c2);
        Self::from_amplitudes(cutoff, amps)
    }

    /// Displaced two-mode squeezed vacuum `D1(alpha1) D2(alpha2) S(zeta) |0,0>`
    /// with `S(zeta) = exp(conj(zeta) a1 a2 - zeta a1† a2†)`.
    ///
    /// For `zeta = r e^{i vartheta}` the squeezed vacuum is
    /// `sech r * sum_n (-e^{i vartheta} tanh r)^n |n, n>`. The pair series is
    /// carried past the cutoff until `tanh(r)^n < 1e-18` before displacing, so
    /// amplitudes on the grid are exact up to rounding; only the final crop
    /// to `cutoff` truncates. Rule of thumb: `cutoff >= |alpha|^2 + 6|alpha|
    /// + 20 sinh^2 r`.
    pub fn squeezed_coherent(alpha1: C64, alpha2: C64, zeta: C64, cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        check_finite(alpha1, "alpha1")?;
        check_finite(alpha2, "alpha2")?;
        check_finite(zeta, "zeta")?;

        let r = zeta.norm();
        let t = r.tanh();
        let pair_ratio = -C64::from_polar(t, zeta.arg());
        let mut pairs = cutoff;
        if t > 0.0 {
            let needed = (-18.0 * std::f64::consts::LN_10 / t.ln()).ceil();
            let cap = 4 * cutoff + 200;
            pairs = pairs.max((needed.max(0.0) as usize).min(cap));
        }

        let dim = cutoff + 1;
        let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
        let mut weight = C64::new(1.0 / r.cosh(), 0.0);
        for n in 0..=pairs {
            if n > 0 {
                weight *= pair_ratio;
            }
            if weight.norm() < 1e-300 {
                break;
            }
            let w1 = displaced_number_state(alpha1, n, cutoff);
            let w2 = displaced_number_state(alpha2, n, cutoff);
            for (i, x) in w1.iter().enumerate() {
                let wx = weight * x;
                for (j, y) in w2.iter().enumerate() {
                    amps[i * dim + j] += wx * y;
                }
            }
        }
        Self::from_amplitudes(cutoff, amps)
    }

    /// Normalized superposition of basis states `(n1, n2, amplitude)`.
    /// Repeated basis states add.
    pub fn superposition(terms: &[(usize, usize, C64)], cutoff: usize) -> Result<Self> {
        check_cutoff(cutoff)?;
        if terms.is_empty() {
            return Err(Error::EmptySuperposition);
        }
        let dim = cutoff + 1;
        let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
        for &(n1, n2, c) in terms {
            if n1 > cutoff || n2 > cutoff {
                return Err(Error::IndexOutOfRange { n1, n2, cutoff });
            }
            check_finite(c, "superposition amplitude")?;
            amps[n1 * dim + n2] += c;
        }
        Self::from_amplitudes(cutoff, amps)
    }

    pub fn with_boundary_threshold(mut self, threshold: f64) -> Self {
        self.boundary_threshold = threshold;
        self
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, n1: usize, n2: usize) -> C64 {
        if n1 > self.cutoff || n2 > self.cutoff {
            return C64::new(0.0, 0.0);
        }
        self.amps[n1 * self.dim() + n2]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Probability on the outer rim `n1 = N` or `n2 = N`.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.cutoff;
        let dim = self.dim();
        let mut mass = 0.0;
        for i in 0..dim {
            mass += self.amps[i * dim + n].norm_sqr();
            if i != n {
                mass += self.amps[n * dim + i].norm_sqr();
            }
        }
        mass
    }

    pub fn boundary_threshold(&self) -> f64 {
        self.boundary_threshold
    }

    /// `Some` when the boundary mass or the norm loss exceeds the threshold.
    pub fn truncation_warning(&self) -> Option<TruncationWarning> {
        let boundary_mass = self.boundary_mass();
        let norm_deficit = (1.0 - self.norm_sqr()).abs();
        if boundary_mass > self.boundary_threshold || norm_deficit > NORM_DRIFT_TOLERANCE {
            Some(TruncationWarning {
                boundary_mass,
                norm_deficit,
                threshold: self.boundary_threshold,
            })
        } else {
            None
        }
    }

    /// Largest total photon number `n1 + n2` with non-negligible amplitude.
    pub fn max_total_photons(&self, tol: f64) -> usize {
        let dim = self.dim();
        let mut max = 0;
        for (idx, c) in self.amps.iter().enumerate() {
            if c.norm_sqr() > tol {
                max = max.max(idx / dim + idx % dim);
            }
        }
        max
    }

    /// Joint photon-number distribution `P(n1, n2)`, row-major.
    pub fn photon_distribution(&self) -> Vec<f64> {
        self.amps.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &TwoModeState) -> Result<C64> {
        if self.cutoff != other.cutoff {
            return Err(Error::CutoffMismatch(self.cutoff, other.cutoff));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|`, the projective overlap used for state comparisons.
    pub fn fidelity(&self, other: &TwoModeState) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Exact `<a1†^p a2†^q a1^r a2^s>` on the truncated grid.
    ///
    /// Evaluated as the overlap `<a1^p a2^q psi | a1^r a2^s psi>`; only
    /// annihilators act, so nothing leaves the grid.
    pub fn expect_moment(&self, spec: MomentSpec) -> C64 {
        let left = self.lowered(spec.p as usize, spec.q as usize);
        let right = self.lowered(spec.r as usize, spec.s as usize);
        left.iter().zip(&right).map(|(a, b)| a.conj() * b).sum()
    }

    /// `a1^k1 a2^k2 |psi>` on the same grid.
    fn lowered(&self, k1: usize, k2: usize) -> Vec<C64> {
        let dim = self.dim();
        let mut out = vec![C64::new(0.0, 0.0); dim * dim];
        if k1 > self.cutoff || k2 > self.cutoff {
            return out;
        }
        for n1 in k1..dim {
            let f1 = falling_sqrt(n1, k1);
            for n2 in k2..dim {
                let f2 = falling_sqrt(n2, k2);
                out[(n1 - k1) * dim + (n2 - k2)] = self.amps[n1 * dim + n2] * (f1 * f2);
            }
        }
        out
    }

    /// `<psi| W |psi>` for an arbitrary word of (possibly displaced) ladder
    /// operators, leftmost factor applied last.
    ///
    /// Creation operators grow a scratch grid instead of truncating, so the
    /// result is the exact expectation of `W` in the (normalized) state.
    pub fn expect_word(&self, word: &[Ladder]) -> C64 {
        let mut buf = Grid::from_state(self);
        for op in word.iter().rev() {
            buf = buf.apply(op);
        }
        let dim = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for n1 in 0..dim.min(buf.d1) {
            for n2 in 0..dim.min(buf.d2) {
                acc += self.amps[n1 * dim + n2].conj() * buf.get(n1, n2);
            }
        }
        acc
    }

    /// The state `U|psi>` whose mode-`a` moments equal the `b`-mode moments of
    /// `|psi>`, where `(b1, b2)^T = u (a1, a2)^T`.
    ///
    /// `U` is the passive unitary with `U† a_i U = sum_j u_ij a_j`, acting as
    /// `U a_i† U† = sum_j u_ji a_j†` on creation operators. Each total-photon
    /// block is mapped with closed-form polynomial coefficients. Components
    /// pushed beyond the cutoff are dropped and surface as a norm deficit in
    /// [`truncation_warning`](Self::truncation_warning).
    pub fn apply_unitary(&self, u: &Su2Element) -> TwoModeState {
        let m = u.matrix();
        let (u11, u12, u21, u22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let dim = self.dim();
        let sqrt_fact = sqrt_factorials(2 * self.cutoff);
        let binom = binomials(self.cutoff);
        let mut out = vec![C64::new(0.0, 0.0); dim * dim];

        let pow_table = |z: C64| -> Vec<C64> {
            let mut p = Vec::with_capacity(dim);
            let mut acc = C64::new(1.0, 0.0);
            for _ in 0..dim {
                p.push(acc);
                acc *= z;
            }
            p
        };
        let (p11, p12, p21, p22) = (pow_table(u11), pow_table(u12), pow_table(u21), pow_table(u22));

        for n1 in 0..dim {
            // (u11 x + u21 y)^n1, indexed by power of x.
            let first: Vec<C64> = (0..=n1).map(|j| p11[j] * p21[n1 - j] * binom[n1][j]).collect();
            for n2 in 0..dim {
                let c = self.amps[n1 * dim + n2];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let total = n1 + n2;
                let scale = c / (sqrt_fact[n1] * sqrt_fact[n2]);
                for (j, f) in first.iter().enumerate() {
                    for l in 0..=n2 {
                        let k = j + l;
                        if k > self.cutoff || total - k > self.cutoff {
                            continue;
                        }
                        let g = p12[l] * p22[n2 - l] * binom[n2][l];
                        out[k * dim + (total - k)] += scale * f * g * (sqrt_fact[k] * sqrt_fact[total - k]);
                    }
                }
            }
        }
        let state = TwoModeState {
            cutoff: self.cutoff,
            amps: out,
            boundary_threshold: self.boundary_threshold,
        };
        if let Some(w) = state.truncation_warning() {
            log::debug!("apply_unitary: {w}");
        }
        state
    }

    fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        for c in &mut self.amps {
            *c /= norm;
        }
        Ok(())
    }
}

/// Serializable description of a test state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Coherent {
        alpha1: C64,
        alpha2: C64,
        cutoff: usize,
    },
    SqueezedCoherent {
        alpha1: C64,
        alpha2: C64,
        zeta: C64,
        cutoff: usize,
    },
    Fock {
        n1: usize,
        n2: usize,
        cutoff: usize,
    },
    Superposition {
        terms: Vec<(usize, usize, C64)>,
        cutoff: usize,
    },
}

impl StateSpec {
    pub fn build(&self) -> Result<TwoModeState> {
        match self {
            StateSpec::Coherent { alpha1, alpha2, cutoff } => TwoModeState::coherent(*alpha1, *alpha2, *cutoff),
            StateSpec::SqueezedCoherent {
                alpha1,
                alpha2,
                zeta,
                cutoff,
            } => TwoModeState::squeezed_coherent(*alpha1, *alpha2, *zeta, *cutoff),
            StateSpec::Fock { n1, n2, cutoff } => TwoModeState::fock(*n1, *n2, *cutoff),
            StateSpec::Superposition { terms, cutoff } => TwoModeState::superposition(terms, *cutoff),
        }
    }

    pub fn cutoff(&self) -> usize {
        match self {
            StateSpec::Coherent { cutoff, .. }
            | StateSpec::SqueezedCoherent { cutoff, .. }
            | StateSpec::Fock { cutoff, .. }
            | StateSpec::Superposition { cutoff, .. } => *cutoff,
        }
    }
}

/// Growable amplitude buffer for operator words.
struct Grid {
    d1: usize,
    d2: usize,
    data: Vec<C64>,
}

impl Grid {
    fn from_state(s: &TwoModeState) -> Self {
        Self {
            d1: s.dim(),
            d2: s.dim(),
            data: s.amps.clone(),
        }
    }

    fn get(&self, n1: usize, n2: usize) -> C64 {
        self.data[n1 * self.d2 + n2]
    }

    fn apply(self, op: &Ladder) -> Grid {
        let (d1, d2) = match (op.mode, op.dagger) {
            (Mode::One, true) => (self.d1 + 1, self.d2),
            (Mode::Two, true) => (self.d1, self.d2 + 1),
            _ => (self.d1, self.d2),
        };
        let mut out = vec![C64::new(0.0, 0.0); d1 * d2];
        for n1 in 0..self.d1 {
            for n2 in 0..self.d2 {
                let c = self.get(n1, n2);
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                // shift part
                out[n1 * d2 + n2] -= op.shift * c;
                match (op.mode, op.dagger) {
                    (Mode::One, false) if n1 > 0 => {
                        out[(n1 - 1) * d2 + n2] += c * (n1 as f64).sqrt();
                    }
                    (Mode::Two, false) if n2 > 0 => {
                        out[n1 * d2 + n2 - 1] += c * (n2 as f64).sqrt();
                    }
                    (Mode::One, true) => {
                        out[(n1 + 1) * d2 + n2] += c * ((n1 + 1) as f64).sqrt();
                    }
                    (Mode::Two, true) => {
                        out[n1 * d2 + n2 + 1] += c * ((n2 + 1) as f64).sqrt();
                    }
                    _ => {}
                }
            }
        }
        Grid { d1, d2, data: out }
    }
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 1 {
        return Err(Error::InvalidCutoff(cutoff));
    }
    Ok(())
}

fn check_finite(z: C64, what: &'static str) -> Result<()> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `sqrt(n! / (n-k)!)`.
fn falling_sqrt(n: usize, k: usize) -> f64 {
    ((n - k + 1)..=n).map(|m| m as f64).product::<f64>().sqrt()
}

fn sqrt_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 1.0f64;
    out.push(1.0);
    for k in 1..=n {
        acc *= (k as f64).sqrt();
        out.push(acc);
    }
    out
}

fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let mut row = vec![1.0; i + 1];
        for j in 1..i {
            row[j] = rows[i - 1][j - 1] + rows[i - 1][j];
        }
        rows.push(row);
    }
    rows
}

/// Single-mode coherent amplitudes `e^{-|alpha|^2/2} alpha^n / sqrt(n!)`.
fn poisson_amplitudes(alpha: C64, cutoff: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(cutoff + 1);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    out.push(c);
    for n in 1..=cutoff {
        c *= alpha / (n as f64).sqrt();
        out.push(c);
    }
    out
}

fn outer(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// `D(alpha)|n>` restricted to `0..=cutoff`, via the normal-ordered form
/// `e^{-|alpha|^2/2} e^{alpha a†} e^{-conj(alpha) a} |n>`.
fn displaced_number_state(alpha: C64, n: usize, cutoff: usize) -> Vec<C64> {
    // e^{-conj(alpha) a}|n> = sum_k (-conj alpha)^k / k! sqrt(n!/(n-k)!) |n-k>
    let mut lowered = vec![C64::new(0.0, 0.0); n + 1];
    let beta = -alpha.conj();
    let mut coef = C64::new(1.0, 0.0);
    for k in 0..=n {
        if k > 0 {
            coef *= beta * ((n - k + 1) as f64).sqrt() / k as f64;
        }
        lowered[n - k] = coef;
    }
    // e^{alpha a†} applied to each |m>, keeping components <= cutoff
    let mut out = vec![C64::new(0.0, 0.0); cutoff + 1];
    for (m, &c) in lowered.iter().enumerate() {
        if m > cutoff || c.norm_sqr() == 0.0 {
            continue;
        }
        let mut term = c;
        out[m] += term;
        for j in (m + 1)..=cutoff {
            term *= alpha * (j as f64).sqrt() / (j - m) as f64;
            out[j] += term;
        }
    }
    let damp = (-0.5 * alpha.norm_sqr()).exp();
    out.iter_mut().for_each(|c| *c *= damp);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::su2;
    use std::f64::consts::FRAC_PI_4;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn m(p: u8, q: u8, r: u8, s: u8) -> MomentSpec {
        MomentSpec::new(p, q, r, s).unwrap()
    }

    #[test]
    fn vacuum_from_zero_coherent() {
        let s = TwoModeState::coherent(c(0.0, 0.0), c(0.0, 0.0), 5).unwrap();
        assert_eq!(s.amplitude(0, 0), c(1.0, 0.0));
        assert!(s.amplitudes().iter().skip(1).all(|a| a.norm() == 0.0));
    }

    #[test]
    fn coherent_mean_photon_number() {
        let s = TwoModeState::coherent(c(1.0, 0.0), c(0.0, 0.0), 20).unwrap();
        assert!((s.expect_moment(m(1, 0, 1, 0)).re - 1.0).abs() < 1e-10);
        assert!(s.expect_moment(m(0, 1, 0, 1)).norm() < 1e-15);
    }

    #[test]
    fn coherent_matches_bruteforce_poisson_amplitudes() {
        // oracle: amplitudes from exp(-|a|^2/2) a^n / sqrt(n!) with explicit factorials
        let (a1, a2, n) = (c(0.8, 0.3), c(0.5, 0.0), 20usize);
        let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
        let mut amps = vec![c(0.0, 0.0); (n + 1) * (n + 1)];
        for i in 0..=n {
            for j in 0..=n {
                amps[i * (n + 1) + j] =
                    (-(a1.norm_sqr() + a2.norm_sqr()) / 2.0).exp() * a1.powu(i as u32) * a2.powu(j as u32)
                        / (fact(i) * fact(j)).sqrt();
            }
        }
        let norm: f64 = amps.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let brute: Vec<C64> = amps.iter().map(|x| x / norm).collect();
        let s = TwoModeState::coherent(a1, a2, n).unwrap();
        for spec in MomentSpec::all() {
            let dim = n + 1;
            // direct sum over matrix elements of the monomial
            let mut expect = c(0.0, 0.0);
            for i in 0..dim {
                for j in 0..dim {
                    let ket = brute[i * dim + j];
                    if i < spec.r as usize || j < spec.s as usize {
                        continue;
                    }
                    let (i2, j2) = (i - spec.r as usize, j - spec.s as usize);
                    let f = (fact(i) / fact(i2) * fact(j) / fact(j2)).sqrt();
                    let (i3, j3) = (i2 + spec.p as usize, j2 + spec.q as usize);
                    if i3 > n || j3 > n {
                        continue;
                    }
                    let g = (fact(i3) / fact(i2) * fact(j3) / fact(j2)).sqrt();
                    expect += brute[i3 * dim + j3].conj() * ket * f * g;
                }
            }
            let got = s.expect_moment(spec);
            assert!((got - expect).norm() < 1e-10, "{spec:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn squeezed_zero_is_vacuum() {
        let s = TwoModeState::squeezed_coherent(c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), 10).unwrap();
        assert!((s.amplitude(0, 0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn squeezed_without_squeezing_is_coherent() {
        let (a1, a2) = (c(0.7, -0.2), c(0.1, 0.9));
        let s = TwoModeState::squeezed_coherent(a1, a2, c(0.0, 0.0), 18).unwrap();
        let k = TwoModeState::coherent(a1, a2, 18).unwrap();
        for (x, y) in s.amplitudes().iter().zip(k.amplitudes()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn squeezed_has_pair_correlation_but_no_cross_coherence() {
        let (a1, a2, zeta) = (c(0.5, 0.0), c(0.2, 0.0), c(0.3, 0.0));
        let s = TwoModeState::squeezed_coherent(a1, a2, zeta, 30).unwrap();
        let d1 = Ladder::annihilate(Mode::One).displaced(a1);
        let d2 = Ladder::annihilate(Mode::Two).displaced(a2);
        let d2dag = Ladder::create(Mode::Two).displaced(a2);
        assert!(s.expect_word(&[d1, d2dag]).norm() < 1e-8);
        let pair = s.expect_word(&[d1, d2]);
        // <d1 d2> = -e^{i arg zeta} sinh r cosh r
        let r: f64 = 0.3;
        assert!((pair - c(-r.sinh() * r.cosh(), 0.0)).norm() < 1e-10);
        // displacement lands at alpha
        assert!((s.expect_moment(m(0, 0, 1, 0)) - a1).norm() < 1e-10);
        assert!((s.expect_moment(m(0, 0, 0, 1)) - a2).norm() < 1e-10);
        // thermal-like marginal: <d1† d1> = sinh^2 r
        let d1dag = Ladder::create(Mode::One).displaced(a1);
        assert!((s.expect_word(&[d1dag, d1]).re - r.sinh().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn fock_factory() {
        let s = TwoModeState::fock(1, 1, 4).unwrap();
        assert_eq!(s.amplitude(1, 1), c(1.0, 0.0));
        let s = TwoModeState::fock(2, 0, 4).unwrap();
        assert!((s.expect_moment(m(2, 0, 2, 0)).re - 2.0).abs() < 1e-15);
        assert!(matches!(
            TwoModeState::fock(5, 0, 4),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn superposition_examples() {
        let s = TwoModeState::superposition(&[(0, 0, c(1.0, 0.0)), (1, 1, c(1.0, 0.0))], 4).unwrap();
        assert!((s.amplitude(0, 0).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((s.amplitude(1, 1).norm_sqr() - 0.5).abs() < 1e-15);

        let s = TwoModeState::superposition(&[(1, 0, c(1.0, 0.0)), (0, 1, c(1.0, 0.0))], 4).unwrap();
        assert!((s.expect_moment(m(1, 0, 0, 1)) - c(0.5, 0.0)).norm() < 1e-15);

        let s = TwoModeState::superposition(&[(2, 0, c(1.0, 0.0)), (0, 2, c(1.0, 0.0))], 4).unwrap();
        assert!((s.expect_moment(m(2, 0, 0, 2)) - c(1.0, 0.0)).norm() < 1e-14);

        assert!(matches!(
            TwoModeState::superposition(&[(1, 0, c(0.0, 0.0))], 4),
            Err(Error::ZeroNorm)
        ));
        assert!(matches!(
            TwoModeState::superposition(&[], 4),
            Err(Error::EmptySuperposition)
        ));
    }

    #[test]
    fn invalid_inputs() {
        assert!(matches!(TwoModeState::vacuum(0), Err(Error::InvalidCutoff(0))));
        assert!(matches!(
            TwoModeState::squeezed_coherent(c(f64::NAN, 0.0), c(0.0, 0.0), c(0.0, 0.0), 5),
            Err(Error::NonFinite(_))
        ));
        assert!(MomentSpec::new(2, 2, 1, 0).is_err());
    }

    #[test]
    fn vacuum_annihilation_moments_vanish() {
        let s = TwoModeState::vacuum(6).unwrap();
        for spec in MomentSpec::all().filter(|sp| sp.r + sp.s > 0) {
            assert_eq!(s.expect_moment(spec), c(0.0, 0.0));
        }
    }

    #[test]
    fn fock_pair_moment() {
        let s = TwoModeState::fock(1, 1, 4).unwrap();
        assert!((s.expect_moment(m(1, 1, 1, 1)) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn coherent_moments_closed_form() {
        let (a1, a2) = (c(0.6, -0.4), c(-0.3, 0.8));
        let s = TwoModeState::coherent(a1, a2, 25).unwrap();
        for spec in MomentSpec::all() {
            let want = a1.conj().powu(spec.p as u32)
                * a2.conj().powu(spec.q as u32)
                * a1.powu(spec.r as u32)
                * a2.powu(spec.s as u32);
            assert!((s.expect_moment(spec) - want).norm() < 1e-9);
        }
    }

    #[test]
    fn boundary_mass_flags_overfull_grid() {
        let s = TwoModeState::coherent(c(3.0, 0.0), c(0.0, 0.0), 6).unwrap();
        assert!(s.boundary_mass() > 1e-3);
        assert!(s.truncation_warning().is_some());
        let s = TwoModeState::coherent(c(1.0, 0.0), c(0.0, 0.0), 25).unwrap();
        assert!(s.truncation_warning().is_none());
    }

    #[test]
    fn identity_rotation_leaves_state() {
        let s = TwoModeState::superposition(&[(0, 1, c(0.3, 0.1)), (2, 1, c(-0.5, 0.2))], 6).unwrap();
        let t = s.apply_unitary(&su2(0.0, 0.0));
        assert!((s.fidelity(&t).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn beam_splitter_splits_single_photon() {
        // brute force in the 1-photon sector: |1,0> -> U a1† |0> = (u11 a1† + u21 a2†)|0>
        let u = su2(FRAC_PI_4, 0.0);
        let t = TwoModeState::fock(1, 0, 3).unwrap().apply_unitary(&u);
        assert!((t.amplitude(1, 0).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((t.amplitude(0, 1).norm_sqr() - 0.5).abs() < 1e-15);
        assert!((t.amplitude(1, 0) - u.matrix()[(0, 0)]).norm() < 1e-15);
        assert!((t.amplitude(0, 1) - u.matrix()[(1, 0)]).norm() < 1e-15);
    }

    #[test]
    fn coherent_maps_to_rotated_coherent() {
        let (a1, a2) = (c(0.9, 0.2), c(-0.4, 0.5));
        let u = su2(0.7, 1.3);
        let mu = u.matrix();
        let b1 = mu[(0, 0)] * a1 + mu[(0, 1)] * a2;
        let b2 = mu[(1, 0)] * a1 + mu[(1, 1)] * a2;
        let t = TwoModeState::coherent(a1, a2, 25).unwrap().apply_unitary(&u);
        let want = TwoModeState::coherent(b1, b2, 25).unwrap();
        for spec in MomentSpec::all() {
            assert!((t.expect_moment(spec) - want.expect_moment(spec)).norm() < 1e-9);
        }
    }

    #[test]
    fn transformed_moments_follow_mode_map() {
        // <b1> = u11 <a1> + u12 <a2> on an arbitrary superposition
        let s = TwoModeState::superposition(
            &[
                (0, 0, c(0.4, 0.0)),
                (1, 0, c(0.2, 0.3)),
                (0, 1, c(-0.5, 0.1)),
                (1, 2, c(0.3, 0.3)),
            ],
            6,
        )
        .unwrap();
        let u = su2(0.4, 0.9);
        let mu = u.matrix();
        let t = s.apply_unitary(&u);
        let want = mu[(0, 0)] * s.expect_moment(m(0, 0, 1, 0)) + mu[(0, 1)] * s.expect_moment(m(0, 0, 0, 1));
        assert!((t.expect_moment(m(0, 0, 1, 0)) - want).norm() < 1e-12);
    }

    #[test]
    fn state_spec_json_shape() {
        let json = r#"{"kind":"coherent","alpha1":[1.0,0.0],"alpha2":[0.0,0.5],"cutoff":20}"#;
        let spec: StateSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec,
            StateSpec::Coherent {
                alpha1: c(1.0, 0.0),
                alpha2: c(0.0, 0.5),
                cutoff: 20
            }
        );
        assert_eq!(serde_json::to_string(&spec).unwrap(), json);
        let bad = r#"{"kind":"coherent","alpha1":[1.0,0.0],"alpha2":[0.0,0.5],"cutoff":20,"x":1}"#;
        assert!(serde_json::from_str::<StateSpec>(bad).is_err());
        let sup = r#"{"kind":"superposition","terms":[[1,0,[1.0,0.0]],[0,1,[0.0,1.0]]],"cutoff":4}"#;
        let spec: StateSpec = serde_json::from_str(sup).unwrap();
        assert!(spec.build().is_ok());
    }
}
