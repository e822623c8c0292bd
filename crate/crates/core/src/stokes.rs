//! Quantum Stokes operators, their means, variances and normally ordered
//! correlations.
//!
//! With `n̂_i = a_i† a_i` and `E = a1† a2`:
//!
//! ```text
//! S0 = n̂1 + n̂2     S1 = n̂1 - n̂2     S2 = E + E†     S3 = -i (E - E†)
//! ```
//!
//! Writing `S_i = sum_pq σ^i_pq a_p† a_q` with `σ^0 = I` and the Pauli matrices,
//! `½{S_i, S_j} = :S_i S_j: + sum_ps (½{σ^i, σ^j})_ps a_p† a_s`. The linear
//! correction is `S0` on the diagonal, `S_j` in row/column 0 and zero
//! elsewhere, so
//!
//! ```text
//! V_ij = <:S_i S_j:> + K_ij - <S_i><S_j>
//! ```
//!
//! The normally ordered table in terms of the second-order moments is
//!
//! | entry        | value                     |
//! |--------------|---------------------------|
//! | `:S0 S0:`    | A + B + 2 N12             |
//! | `:S1 S1:`    | A + B - 2 N12             |
//! | `:S2 S2:`    | 2 N12 + 2 Re G            |
//! | `:S3 S3:`    | 2 N12 - 2 Re G            |
//! | `:S0 S1:`    | A - B                     |
//! | `:S0 S2:`    | 2 Re X + 2 Re Y           |
//! | `:S0 S3:`    | 2 Im X + 2 Im Y           |
//! | `:S1 S2:`    | 2 Re X - 2 Re Y           |
//! | `:S1 S3:`    | 2 Im X - 2 Im Y           |
//! | `:S2 S3:`    | 2 Im G                    |

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::fockspace::{Ladder, Mode, MomentSpec, TwoModeState};
use crate::C64;

/// First- and second-order normally ordered field moments.
///
/// Only one member of each Hermitian-conjugate pair is stored, so the set has
/// 4 + 9 real degrees of freedom and is Hermitian by construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSet {
    /// `<a1† a1>`
    pub n1: f64,
    /// `<a2† a2>`
    pub n2: f64,
    /// `<a1† a2>`; `<a2† a1>` is its conjugate.
    pub cross: C64,
    /// `<a1† a1† a1 a1>`
    pub a: f64,
    /// `<a2† a2† a2 a2>`
    pub b: f64,
    /// `<a1† a2† a1 a2>`
    pub n12: f64,
    /// `<a1† a1† a2 a2>`; `<a2† a2† a1 a1>` is its conjugate.
    pub g: C64,
    /// `<a1† a1† a1 a2>`; `<a1† a2† a1 a1>` is its conjugate.
    pub x: C64,
    /// `<a1† a2† a2 a2>`; `<a2† a2† a1 a2>` is its conjugate.
    pub y: C64,
}

impl CorrelationSet {
    pub const PARAM_NAMES: [&'static str; 13] = [
        "n1", "n2", "Re cross", "Im cross", "A", "B", "N12", "Re G", "Im G", "Re X", "Im X", "Re Y", "Im Y",
    ];

    pub fn to_params(&self) -> [f64; 13] {
        [
            self.n1,
            self.n2,
            self.cross.re,
            self.cross.im,
            self.a,
            self.b,
            self.n12,
            self.g.re,
            self.g.im,
            self.x.re,
            self.x.im,
            self.y.re,
            self.y.im,
        ]
    }

    pub fn from_params(p: &[f64; 13]) -> Self {
        Self {
            n1: p[0],
            n2: p[1],
            cross: C64::new(p[2], p[3]),
            a: p[4],
            b: p[5],
            n12: p[6],
            g: C64::new(p[7], p[8]),
            x: C64::new(p[9], p[10]),
            y: C64::new(p[11], p[12]),
        }
    }

    /// `<a_i† a_k>` with modes indexed 0 and 1.
    pub fn second(&self, i: usize, k: usize) -> C64 {
        match (i, k) {
            (0, 0) => C64::new(self.n1, 0.0),
            (1, 1) => C64::new(self.n2, 0.0),
            (0, 1) => self.cross,
            (1, 0) => self.cross.conj(),
            _ => panic!("mode index out of range"),
        }
    }

    /// `<a_i† a_j† a_k a_l>` with modes indexed 0 and 1.
    pub fn fourth(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        assert!(i < 2 && j < 2 && k < 2 && l < 2, "mode index out of range");
        // creation and annihilation halves by number of mode-2 operators
        match (i + j, k + l) {
            (0, 0) => C64::new(self.a, 0.0),
            (0, 1) => self.x,
            (0, 2) => self.g,
            (1, 0) => self.x.conj(),
            (1, 1) => C64::new(self.n12, 0.0),
            (1, 2) => self.y,
            (2, 0) => self.g.conj(),
            (2, 1) => self.y.conj(),
            (2, 2) => C64::new(self.b, 0.0),
            _ => unreachable!(),
        }
    }

    /// Largest entry-wise difference over the 13 real parameters.
    pub fn max_abs_diff(&self, other: &CorrelationSet) -> f64 {
        self.to_params()
            .iter()
            .zip(other.to_params().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Slack of each physical-consistency inequality (nonnegativity,
    /// Cauchy–Schwarz); every entry is `>= 0` for a physical state.
    pub fn consistency_margins(&self) -> [f64; 9] {
        [
            self.n1,
            self.n2,
            self.a,
            self.b,
            self.n12,
            self.a + self.n1 - self.n1 * self.n1,
            self.b + self.n2 - self.n2 * self.n2,
            self.n1 * self.n2 - self.cross.norm_sqr(),
            self.a * self.b - self.g.norm_sqr(),
        ]
    }

    /// Physical-consistency violations, if any.
    pub fn violations(&self) -> Vec<String> {
        self.violations_within(&[0.0; 9])
    }

    /// Like [`violations`](Self::violations) with extra per-inequality slack,
    /// e.g. a multiple of the statistical error of each margin.
    pub fn violations_within(&self, slack: &[f64; 9]) -> Vec<String> {
        const BASE: [f64; 9] = [1e-10, 1e-10, 1e-10, 1e-10, 1e-10, 1e-9, 1e-9, 1e-9, 1e-9];
        const MESSAGES: [&str; 9] = [
            "n1 is negative",
            "n2 is negative",
            "A is negative",
            "B is negative",
            "N12 is negative",
            "mode-1 photon-number variance is negative",
            "mode-2 photon-number variance is negative",
            "|<a1† a2>|^2 exceeds n1 n2",
            "|<a1†a1†a2a2>|^2 exceeds A B",
        ];
        self.consistency_margins()
            .iter()
            .enumerate()
            .filter(|&(k, &m)| m < -(BASE[k] + slack[k]))
            .map(|(k, &m)| format!("{} (margin {m:.3e})", MESSAGES[k]))
            .collect()
    }
}

/// Stokes means, the symmetric variance matrix `V` and the normally ordered
/// correlation matrix `NO`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StokesSummary {
    pub s: [f64; 4],
    #[serde(with = "lower_triangular")]
    pub v: [[f64; 4]; 4],
    #[serde(with = "lower_triangular")]
    pub no: [[f64; 4]; 4],
}

impl StokesSummary {
    pub fn from_correlations(corr: &CorrelationSet) -> Self {
        Self {
            s: stokes_means(corr),
            v: to_array(&stokes_variances(corr)),
            no: to_array(&normally_ordered_stokes(corr)),
        }
    }

    /// Largest entry-wise difference over `S`, `V` and `NO`.
    pub fn max_abs_diff(&self, other: &StokesSummary) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..4 {
            d = d.max((self.s[i] - other.s[i]).abs());
            for j in 0..4 {
                d = d.max((self.v[i][j] - other.v[i][j]).abs());
                d = d.max((self.no[i][j] - other.no[i][j]).abs());
            }
        }
        d
    }

    pub fn csv_header() -> Vec<String> {
        let mut h: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        for prefix in ["v", "no"] {
            for i in 0..4 {
                for j in 0..=i {
                    h.push(format!("{prefix}{i}{j}"));
                }
            }
        }
        h
    }

    /// Flat row matching [`csv_header`](Self::csv_header).
    pub fn csv_row(&self) -> Vec<f64> {
        let mut row = self.s.to_vec();
        for m in [&self.v, &self.no] {
            for i in 0..4 {
                for j in 0..=i {
                    row.push(m[i][j]);
                }
            }
        }
        row
    }
}

fn to_array(m: &Matrix4<f64>) -> [[f64; 4]; 4] {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

mod lower_triangular {
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[[f64; 4]; 4], ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| m[i][..=i].to_vec()).collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[[f64; 4]; 4], D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        if rows.len() != 4 || rows.iter().enumerate().any(|(i, r)| r.len() != i + 1) {
            return Err(D::Error::custom("expected lower-triangular rows of length 1, 2, 3, 4"));
        }
        let mut m = [[0.0; 4]; 4];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        Ok(m)
    }
}

pub fn correlations_from_state(state: &TwoModeState) -> CorrelationSet {
    let e = |p, q, r, s| state.expect_moment(MomentSpec { p, q, r, s });
    CorrelationSet {
        n1: e(1, 0, 1, 0).re,
        n2: e(0, 1, 0, 1).re,
        cross: e(1, 0, 0, 1),
        a: e(2, 0, 2, 0).re,
        b: e(0, 2, 0, 2).re,
        n12: e(1, 1, 1, 1).re,
        g: e(2, 0, 0, 2),
        x: e(2, 0, 1, 1),
        y: e(1, 1, 0, 2),
    }
}

/// `(S0, S1, S2, S3)`.
pub fn stokes_means(corr: &CorrelationSet) -> [f64; 4] {
    [
        corr.n1 + corr.n2,
        corr.n1 - corr.n2,
        2.0 * corr.cross.re,
        2.0 * corr.cross.im,
    ]
}

/// `<:S_i S_j:>` from the second-order moments (see the module table).
pub fn normally_ordered_stokes(corr: &CorrelationSet) -> Matrix4<f64> {
    let CorrelationSet { a, b, n12, g, x, y, .. } = *corr;
    let mut m = Matrix4::zeros();
    m[(0, 0)] = a + b + 2.0 * n12;
    m[(1, 1)] = a + b - 2.0 * n12;
    m[(2, 2)] = 2.0 * n12 + 2.0 * g.re;
    m[(3, 3)] = 2.0 * n12 - 2.0 * g.re;
    m[(0, 1)] = a - b;
    m[(0, 2)] = 2.0 * (x.re + y.re);
    m[(0, 3)] = 2.0 * (x.im + y.im);
    m[(1, 2)] = 2.0 * (x.re - y.re);
    m[(1, 3)] = 2.0 * (x.im - y.im);
    m[(2, 3)] = 2.0 * g.im;
    symmetrize(&mut m);
    m
}

/// Linear part of `<½{S_i, S_j}> - <:S_i S_j:>`.
pub fn ordering_correction(s: &[f64; 4]) -> Matrix4<f64> {
    let mut k = Matrix4::zeros();
    for i in 0..4 {
        k[(i, i)] = s[0];
    }
    for j in 1..4 {
        k[(0, j)] = s[j];
        k[(j, 0)] = s[j];
    }
    k
}

/// `V_ij = ½<{S_i, S_j}> - <S_i><S_j>`.
pub fn stokes_variances(corr: &CorrelationSet) -> Matrix4<f64> {
    let s = stokes_means(corr);
    let no = normally_ordered_stokes(corr);
    let k = ordering_correction(&s);
    Matrix4::from_fn(|i, j| no[(i, j)] + k[(i, j)] - s[i] * s[j])
}

fn symmetrize(m: &mut Matrix4<f64>) {
    for i in 0..4 {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

/// Sparse operator on the truncated grid, row-major index `n1 * dim + n2`.
#[derive(Debug, Clone)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for &(r, c, z) in &self.entries {
            out[r] += z * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<C64> {
        let n = self.dim * self.dim;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for &(r, c, z) in &self.entries {
            m[(r, c)] += z;
        }
        m
    }
}

/// Explicit matrices of `S0..S3` on the grid `0..=cutoff` per mode.
pub fn stokes_operators(cutoff: usize) -> [SparseOp; 4] {
    let dim = cutoff + 1;
    let idx = |n1: usize, n2: usize| n1 * dim + n2;
    let mut ops: [SparseOp; 4] = std::array::from_fn(|_| SparseOp {
        dim,
        entries: Vec::new(),
    });
    let i = C64::new(0.0, 1.0);
    for n1 in 0..dim {
        for n2 in 0..dim {
            let col = idx(n1, n2);
            ops[0].entries.push((col, col, C64::new((n1 + n2) as f64, 0.0)));
            ops[1].entries.push((col, col, C64::new(n1 as f64 - n2 as f64, 0.0)));
            // a1† a2 |n1, n2> = sqrt((n1+1) n2) |n1+1, n2-1>
            if n2 > 0 && n1 < cutoff {
                let amp = ((n1 + 1) as f64 * n2 as f64).sqrt();
                let row = idx(n1 + 1, n2 - 1);
                ops[2].entries.push((row, col, C64::new(amp, 0.0)));
                ops[3].entries.push((row, col, -i * amp));
            }
            // a2† a1 |n1, n2> = sqrt(n1 (n2+1)) |n1-1, n2+1>
            if n1 > 0 && n2 < cutoff {
                let amp = (n1 as f64 * (n2 + 1) as f64).sqrt();
                let row = idx(n1 - 1, n2 + 1);
                ops[2].entries.push((row, col, C64::new(amp, 0.0)));
                ops[3].entries.push((row, col, i * amp));
            }
        }
    }
    ops
}

/// Reference summary from explicit operator matrices acting on the state.
///
/// `<S_i>` and `<½{S_i,S_j}> = Re <S_i psi | S_j psi>` come straight from the
/// matrices; `NO` is the symmetrized product minus the ordering correction.
pub fn stokes_oracle(state: &TwoModeState) -> StokesSummary {
    let psi = state.amplitudes();
    let ops = stokes_operators(state.cutoff());
    let applied: Vec<Vec<C64>> = ops.iter().map(|op| op.apply(psi)).collect();
    let dot = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let mut s = [0.0; 4];
    for i in 0..4 {
        s[i] = dot(psi, &applied[i]).re;
    }
    let k = ordering_correction(&s);
    let mut v = [[0.0; 4]; 4];
    let mut no = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let sym = dot(&applied[i], &applied[j]).re;
            v[i][j] = sym - s[i] * s[j];
            no[i][j] = sym - k[(i, j)];
        }
    }
    StokesSummary { s, v, no }
}

/// Both sides of the Gaussian factorization
/// `<d1 d2 d1† d2†> = <d1 d2><d1† d2†> + <d1 d1†><d2 d2†>` for `d_i = a_i - alpha_i`,
/// plus `<d1 d2†>` which must vanish for the two-mode squeezed coherent state.
#[derive(Debug, Clone, Copy)]
pub struct FactorizationCheck {
    pub lhs: C64,
    pub rhs: C64,
    pub cross_coherence: C64,
}

pub fn gaussian_factorization(state: &TwoModeState, alpha1: C64, alpha2: C64) -> FactorizationCheck {
    let d1 = Ladder::annihilate(Mode::One).displaced(alpha1);
    let d2 = Ladder::annihilate(Mode::Two).displaced(alpha2);
    let d1c = Ladder::create(Mode::One).displaced(alpha1);
    let d2c = Ladder::create(Mode::Two).displaced(alpha2);
    let lhs = state.expect_word(&[d1, d2, d1c, d2c]);
    let rhs = state.expect_word(&[d1, d2]) * state.expect_word(&[d1c, d2c])
        + state.expect_word(&[d1, d1c]) * state.expect_word(&[d2, d2c]);
    FactorizationCheck {
        lhs,
        rhs,
        cross_coherence: state.expect_word(&[d1, d2c]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_is_all_zero() {
        let s = TwoModeState::vacuum(5).unwrap();
        let corr = correlations_from_state(&s);
        assert_eq!(corr, CorrelationSet::default());
        let sum = StokesSummary::from_correlations(&corr);
        assert!(sum.csv_row().iter().all(|x| *x == 0.0));
        let o = stokes_oracle(&s);
        assert!(o.csv_row().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn fock_one_one_correlations() {
        let corr = correlations_from_state(&TwoModeState::fock(1, 1, 5).unwrap());
        let want = CorrelationSet {
            n1: 1.0,
            n2: 1.0,
            n12: 1.0,
            ..Default::default()
        };
        assert!(corr.max_abs_diff(&want) < 1e-15);
        let o = stokes_oracle(&TwoModeState::fock(1, 1, 5).unwrap());
        assert_eq!(o.s, [2.0, 0.0, 0.0, 0.0]);
        assert!((o.v[2][2] - 4.0).abs() < 1e-12);
        assert!((o.v[3][3] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn circular_coherent_state() {
        let corr = correlations_from_state(&TwoModeState::coherent(c(1.0, 0.0), c(0.0, 1.0), 25).unwrap());
        assert!((corr.cross - c(0.0, 1.0)).norm() < 1e-10);
        assert!((corr.g - c(-1.0, 0.0)).norm() < 1e-10);
        let s = stokes_means(&corr);
        for (got, want) in s.iter().zip([2.0, 0.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn means_examples() {
        let s = stokes_means(&correlations_from_state(&TwoModeState::fock(1, 0, 3).unwrap()));
        assert_eq!(s, [1.0, 1.0, 0.0, 0.0]);
        let alpha = 0.8;
        let corr = correlations_from_state(&TwoModeState::coherent(c(alpha, 0.0), c(alpha, 0.0), 25).unwrap());
        let s = stokes_means(&corr);
        let want = [2.0 * alpha * alpha, 0.0, 2.0 * alpha * alpha, 0.0];
        for (g, w) in s.iter().zip(want) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_examples() {
        let v = stokes_variances(&correlations_from_state(&TwoModeState::fock(1, 0, 3).unwrap()));
        assert!((v[(2, 2)] - 1.0).abs() < 1e-15);
        assert!((v[(3, 3)] - 1.0).abs() < 1e-15);
        assert!(v[(1, 1)].abs() < 1e-15);
        assert!(v[(0, 0)].abs() < 1e-15);

        let state = TwoModeState::coherent(c(0.7, 0.2), c(-0.3, 0.5), 25).unwrap();
        let corr = correlations_from_state(&state);
        let v = stokes_variances(&corr);
        let s0 = stokes_means(&corr)[0];
        for i in 0..4 {
            assert!((v[(i, i)] - s0).abs() < 1e-9, "V{i}{i}");
        }
        let o = stokes_oracle(&state);
        for i in 0..4 {
            for j in 0..4 {
                assert!((o.v[i][j] - v[(i, j)]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normally_ordered_examples() {
        let corr = correlations_from_state(&TwoModeState::fock(2, 0, 4).unwrap());
        assert!((normally_ordered_stokes(&corr)[(1, 1)] - 2.0).abs() < 1e-14);

        let corr = correlations_from_state(&TwoModeState::coherent(c(0.4, -0.9), c(1.1, 0.3), 25).unwrap());
        let no = normally_ordered_stokes(&corr);
        let s = stokes_means(&corr);
        for i in 0..4 {
            for j in 0..4 {
                assert!((no[(i, j)] - s[i] * s[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn s2s3_anchor() {
        // <:S2 S3:> = 2 Im G; the mixed-setting term -(i/4)(G - G*) is a quarter of it
        let corr = CorrelationSet {
            g: c(0.3, -0.7),
            ..Default::default()
        };
        let no = normally_ordered_stokes(&corr);
        let term = (C64::new(0.0, -0.25) * (corr.g - corr.g.conj())).re;
        assert!((no[(2, 3)] - 4.0 * term).abs() < 1e-15);
    }

    #[test]
    fn summary_json_is_lower_triangular() {
        let corr = correlations_from_state(&TwoModeState::coherent(c(1.0, 0.0), c(0.5, 0.5), 20).unwrap());
        let sum = StokesSummary::from_correlations(&corr);
        let json = serde_json::to_value(sum).unwrap();
        let rows = json["v"].as_array().unwrap();
        assert_eq!(
            rows.iter().map(|r| r.as_array().unwrap().len()).collect::<Vec<_>>(),
            vec![1, 2, 3, 4]
        );
        let back: StokesSummary = serde_json::from_value(json).unwrap();
        assert!(back.max_abs_diff(&sum) == 0.0);
        assert_eq!(StokesSummary::csv_header().len(), sum.csv_row().len());
    }

    #[test]
    fn violations_detect_unphysical_sets() {
        assert!(CorrelationSet::default().violations().is_empty());
        let bad = CorrelationSet {
            n1: 0.1,
            n2: 0.1,
            cross: c(1.0, 0.0),
            ..Default::default()
        };
        assert!(!bad.violations().is_empty());
    }
}
