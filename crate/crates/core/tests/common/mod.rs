#![allow(dead_code)]

use qstokes::{TwoModeState, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Labeled {
    pub label: String,
    pub state: TwoModeState,
}

fn polar(rng: &mut ChaCha8Rng, max: f64) -> C64 {
    let r = max * rng.random::<f64>().sqrt();
    C64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Five states from each family: coherent (|alpha| <= 1.5), squeezed
/// coherent (|zeta| <= 0.4), Fock up to (3, 3), superpositions of up to six
/// basis states.
pub fn test_states(seed: u64) -> Vec<Labeled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for _ in 0..5 {
        let (a1, a2) = (polar(&mut rng, 1.5), polar(&mut rng, 1.5));
        out.push(Labeled {
            label: format!("coherent({a1:.3}, {a2:.3})"),
            state: TwoModeState::coherent(a1, a2, 25).unwrap(),
        });
    }
    for _ in 0..5 {
        let (a1, a2, z) = (polar(&mut rng, 1.5), polar(&mut rng, 1.5), polar(&mut rng, 0.4));
        out.push(Labeled {
            label: format!("squeezed({a1:.3}, {a2:.3}, zeta={z:.3})"),
            state: TwoModeState::squeezed_coherent(a1, a2, z, 25).unwrap(),
        });
    }
    for (n1, n2) in [(0, 0), (1, 0), (1, 1), (2, 3), (3, 3)] {
        out.push(Labeled {
            label: format!("fock({n1}, {n2})"),
            state: TwoModeState::fock(n1, n2, 12).unwrap(),
        });
    }
    for _ in 0..5 {
        let k = rng.random_range(1..=6);
        let terms: Vec<(usize, usize, C64)> = (0..k)
            .map(|_| {
                (
                    rng.random_range(0..=3),
                    rng.random_range(0..=3),
                    polar(&mut rng, 1.0) + C64::new(1e-3, 0.0),
                )
            })
            .collect();
        out.push(Labeled {
            label: format!("superposition({k} terms)"),
            state: TwoModeState::superposition(&terms, 12).unwrap(),
        });
    }
    out
}

/// Worst deviations of the basic moment properties over a set of states.
#[derive(Debug, Default)]
pub struct MomentChecks {
    /// `|<p,q,r,s> - conj(<r,s,p,q>)|` over every degree <= 4 moment.
    pub hermiticity: f64,
    /// `|<a_i a_j†> - <a_j† a_i> - delta_ij|`
    pub commutation: f64,
    /// Largest amplitude change after applying `u` and then `u†`, over
    /// states supported on `n1 + n2 <= N - 2`.
    pub unitary_inverse: f64,
    /// Coherent states only: moment against the product of its amplitudes.
    pub coherent_factorization: f64,
}

pub fn moment_checks(states: &[Labeled]) -> MomentChecks {
    use qstokes::optics::su2;
    use qstokes::{Ladder, Mode, MomentSpec};

    let mut out = MomentChecks::default();
    let u = su2(0.7, 1.1) * su2(0.3, -0.4);
    for t in states {
        let s = &t.state;
        for spec in MomentSpec::all() {
            let d = s.expect_moment(spec) - s.expect_moment(spec.adjoint()).conj();
            out.hermiticity = out.hermiticity.max(d.norm());
        }
        for (i, mi) in [Mode::One, Mode::Two].into_iter().enumerate() {
            for (j, mj) in [Mode::One, Mode::Two].into_iter().enumerate() {
                let lhs = s.expect_word(&[Ladder::annihilate(mi), Ladder::create(mj)])
                    - s.expect_word(&[Ladder::create(mj), Ladder::annihilate(mi)]);
                let delta = if i == j { 1.0 } else { 0.0 };
                out.commutation = out.commutation.max((lhs - delta).norm());
            }
        }
        if s.max_total_photons(0.0) + 2 <= s.cutoff() {
            let back = s.apply_unitary(&u).apply_unitary(&u.adjoint());
            for (a, b) in s.amplitudes().iter().zip(back.amplitudes()) {
                out.unitary_inverse = out.unitary_inverse.max((a - b).norm());
            }
        }
        if t.label.starts_with("coherent") {
            let a1 = s.expect_moment(MomentSpec::new(0, 0, 1, 0).unwrap());
            let a2 = s.expect_moment(MomentSpec::new(0, 0, 0, 1).unwrap());
            for spec in MomentSpec::all() {
                let want = a1.conj().powu(spec.p as u32)
                    * a2.conj().powu(spec.q as u32)
                    * a1.powu(spec.r as u32)
                    * a2.powu(spec.s as u32);
                out.coherent_factorization = out.coherent_factorization.max((s.expect_moment(spec) - want).norm());
            }
        }
    }
    out
}
