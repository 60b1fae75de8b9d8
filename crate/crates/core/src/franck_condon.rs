//! Closed-form Franck-Condon weights for displaced and squeezed vibrational
//! wave functions, and the vibrational correlator series built from them.
//!
//! Emission weights are the populations of `D(r_d) S(r_s)|0>` in the
//! ground-state Fock basis,
//! `S_m = e^{-α r_d²}/cosh r_s · H_m(α r_d / 2√β)² β^m / m!`
//! with `α = tanh r_s + 1` and `β = tanh r_s / 2`. Absorption weights use
//! `α' = tanh r_s - 1` and the imaginary Hermite argument
//! `-i α' r_d e^{r_s} / 2√β` with `(-β)^m`.
//!
//! Both are evaluated through the scaled sequence
//! `u_m = H_m(x) w^m / sqrt(m!)`, which obeys
//! `u_{m+1} = (2xw u_m - 2 sqrt(m) w² u_{m-1}) / sqrt(m+1)` and never forms
//! `m!` or `β^m` on their own. `2xw` stays finite as `β → 0`, where the
//! recurrence reduces to the Poisson weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MoleculeParams;
use crate::numerics::C64;

/// Default tail tolerance for series truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
/// Hard limit on the number of vibronic terms.
pub const MAX_ORDER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FcKind {
    Emission,
    Absorption,
}

/// Franck-Condon weights `S_0..S_{m_max}` of one transition direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcSeries {
    pub kind: FcKind,
    pub weights: Vec<f64>,
    pub m_max: usize,
    pub params: MoleculeParams,
}

impl FcSeries {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

fn check_squeeze(p: &MoleculeParams) -> Result<()> {
    if p.r_s().abs() >= 1.5 {
        return Err(Error::InvalidParameter {
            field: "r_s",
            reason: format!("|r_s| must be below 1.5, got {}", p.r_s()),
        });
    }
    Ok(())
}

/// Prefactor, `2xw` and `w²` of the scaled recurrence.
fn recurrence_terms(p: &MoleculeParams, kind: FcKind) -> (f64, C64, C64) {
    let (r_d, r_s) = (p.r_d(), p.r_s());
    let t = r_s.tanh();
    let beta = 0.5 * t;
    match kind {
        FcKind::Emission => {
            let alpha = t + 1.0;
            let pref = (-r_d * r_d * alpha).exp() / r_s.cosh();
            (pref, C64::new(alpha * r_d, 0.0), C64::new(beta, 0.0))
        }
        FcKind::Absorption => {
            let alpha_p = t - 1.0;
            let e = r_s.exp();
            let pref = (alpha_p * r_d * r_d * e * e).exp() / r_s.cosh();
            // x = -i α' r_d e^{r_s} / 2√β and w = i√β
            (pref, C64::new(alpha_p * r_d * e, 0.0), C64::new(-beta, 0.0))
        }
    }
}

/// Weights `S_0..S_{m_max}` of the given kind.
pub fn fc_weights(p: &MoleculeParams, kind: FcKind, m_max: usize) -> Result<Vec<f64>> {
    check_squeeze(p)?;
    if m_max > MAX_ORDER {
        return Err(Error::SeriesTooLong { limit: MAX_ORDER });
    }
    let (pref, two_xw, w2) = recurrence_terms(p, kind);
    let mut out = Vec::with_capacity(m_max + 1);
    let mut prev = C64::new(0.0, 0.0);
    let mut cur = C64::new(1.0, 0.0);
    for m in 0..=m_max {
        let s = cur * cur * pref;
        if s.im.abs() > 1e-10 * s.re.abs().max(1.0) {
            return Err(Error::InvalidState(format!(
                "weight {m} has imaginary residue {:e}",
                s.im
            )));
        }
        // squared real amplitudes; clamp rounding-level negatives
        out.push(if s.re < 0.0 && s.re > -1e-12 { 0.0 } else { s.re });
        let next = (two_xw * cur - w2 * prev * (2.0 * (m as f64).sqrt()))
            / ((m + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// Emission weight `S_m^em`.
pub fn fc_emission(p: &MoleculeParams, m: usize) -> Result<f64> {
    Ok(fc_weights(p, FcKind::Emission, m)?[m])
}

/// Absorption weight `S_m^ab`.
pub fn fc_absorption(p: &MoleculeParams, m: usize) -> Result<f64> {
    Ok(fc_weights(p, FcKind::Absorption, m)?[m])
}

/// Series truncated at the smallest `M` with `Σ_{m≤M} S_m ≥ 1 - tail_tol`.
/// The weights are non-negative and sum to one, so every omitted weight is
/// below `tail_tol` as well.
pub fn fc_series(p: &MoleculeParams, kind: FcKind, tail_tol: f64) -> Result<FcSeries> {
    if !(1e-14..=1e-6).contains(&tail_tol) {
        return Err(Error::InvalidParameter {
            field: "tail_tol",
            reason: format!("must lie in [1e-14, 1e-6], got {tail_tol:e}"),
        });
    }
    let all = fc_weights(p, kind, MAX_ORDER)?;
    let mut sum = 0.0;
    for (m, &s) in all.iter().enumerate() {
        sum += s;
        if sum >= 1.0 - tail_tol {
            return Ok(FcSeries {
                kind,
                weights: all[..=m].to_vec(),
                m_max: m,
                params: *p,
            });
        }
    }
    Err(Error::SeriesTooLong { limit: MAX_ORDER })
}

/// Vibrational correlator `F(ν, t) = Σ_m S_m e^{-m(iν + Γ)t}`.
pub fn correlator_f(
    kind: FcKind,
    nu: f64,
    t: f64,
    p: &MoleculeParams,
    tail_tol: f64,
) -> Result<C64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "t",
            reason: format!("must be non-negative, got {t}"),
        });
    }
    let series = fc_series(p, kind, tail_tol)?;
    let rate = C64::new(p.big_gamma(), nu) * t;
    Ok(series
        .weights
        .iter()
        .enumerate()
        .map(|(m, &s)| (-rate * m as f64).exp() * s)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::hermite_sequence;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    fn poisson(r: f64, m: usize) -> f64 {
        (-r * r).exp() * r.powi(2 * m as i32) / factorial(m)
    }

    // the closed forms written out literally with unscaled Hermite values
    fn literal(p: &MoleculeParams, kind: FcKind, m: usize) -> f64 {
        let (r_d, r_s) = (p.r_d(), p.r_s());
        let t = r_s.tanh();
        let beta = t / 2.0;
        match kind {
            FcKind::Emission => {
                let alpha = t + 1.0;
                let x = C64::new(alpha * r_d / (2.0 * beta.sqrt()), 0.0);
                let h = hermite_sequence(x, m).unwrap()[m];
                ((-r_d * r_d * alpha).exp() / r_s.cosh() * h * h * beta.powi(m as i32)
                    / factorial(m))
                .re
            }
            FcKind::Absorption => {
                let ap = t - 1.0;
                let x = C64::new(0.0, -ap * r_d * r_s.exp() / (2.0 * beta.sqrt()));
                let h = hermite_sequence(x, m).unwrap()[m];
                let v = (ap * r_d * r_d * (2.0 * r_s).exp()).exp() / r_s.cosh() * h * h
                    * (-beta).powi(m as i32)
                    / factorial(m);
                assert!(v.im.abs() < 1e-10);
                v.re
            }
        }
    }

    fn mol(nu_e: f64, l1: f64) -> MoleculeParams {
        MoleculeParams::new(1.0, nu_e, l1).unwrap()
    }

    #[test]
    fn poisson_limit() {
        let p = mol(1.0, 1.0);
        assert!((fc_emission(&p, 0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        for m in 0..=15 {
            let want = poisson(1.0, m);
            assert!((fc_emission(&p, m).unwrap() - want).abs() < 1e-12);
            assert!((fc_absorption(&p, m).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_landscapes() {
        let p = mol(1.0, 0.0);
        let w = fc_weights(&p, FcKind::Emission, 5).unwrap();
        assert_eq!(w, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let s = fc_series(&p, FcKind::Absorption, 1e-10).unwrap();
        assert_eq!(s.weights, vec![1.0]);
        assert_eq!(s.m_max, 0);
    }

    #[test]
    fn matches_literal_hermite_formula() {
        // the literal form needs β > 0
        for &(nu_e, l1) in &[(2.0, 1.0), (1.5, 0.5), (2f64.sqrt(), 1.0), (1.1, 0.8)] {
            let p = mol(nu_e, l1);
            for kind in [FcKind::Emission, FcKind::Absorption] {
                let w = fc_weights(&p, kind, 20).unwrap();
                for (m, &s) in w.iter().enumerate() {
                    let lit = literal(&p, kind, m);
                    assert!((s - lit).abs() < 1e-12, "{kind:?} nu_e={nu_e} m={m}: {s} vs {lit}");
                }
            }
        }
    }

    #[test]
    fn pure_squeezing_parity() {
        let p = mol(2.0, 0.0);
        for kind in [FcKind::Emission, FcKind::Absorption] {
            let w = fc_weights(&p, kind, 30).unwrap();
            for m in (1..=30).step_by(2) {
                assert!(w[m].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sign_of_lambda1_is_irrelevant() {
        let a = fc_weights(&mol(2.0, 1.0), FcKind::Absorption, 25).unwrap();
        let b = fc_weights(&mol(2.0, -1.0), FcKind::Absorption, 25).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn series_truncation() {
        let s = fc_series(&mol(1.0, 1.0), FcKind::Emission, 1e-10).unwrap();
        // Poisson(1) tail bound: the first M with both conditions
        assert!((12..=16).contains(&s.m_max), "m_max {}", s.m_max);
        assert!(s.sum() >= 1.0 - 1e-10 && s.sum() <= 1.0 + 1e-14);
        assert!(fc_series(&mol(1.0, 1.0), FcKind::Emission, 1e-3).is_err());
        assert!(matches!(
            fc_series(&mol(1.0, 14.0), FcKind::Emission, 1e-10),
            Err(Error::SeriesTooLong { .. })
        ));
    }

    #[test]
    fn emission_absorption_asymmetry() {
        let p = mol(2.0, 1.0);
        let em = fc_weights(&p, FcKind::Emission, 20).unwrap();
        let ab = fc_weights(&p, FcKind::Absorption, 20).unwrap();
        let gap = em.iter().zip(&ab).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-3);
    }

    #[test]
    fn correlator_properties() {
        let p = mol(2.0, 1.0).with_rates(0.01, 0.1).unwrap();
        let f0 = correlator_f(FcKind::Emission, 1.0, 0.0, &p, 1e-12).unwrap();
        assert!((f0.re - 1.0).abs() < 1e-10 && f0.im.abs() < 1e-15);

        let trivial = mol(1.0, 0.0).with_rates(0.01, 0.1).unwrap();
        for t in [0.0, 1.0, 7.5] {
            let f = correlator_f(FcKind::Absorption, 2.0, t, &trivial, 1e-10).unwrap();
            assert!((f - C64::new(1.0, 0.0)).norm() < 1e-15);
        }

        let s = fc_series(&p, FcKind::Emission, 1e-10).unwrap();
        for t in [0.5, 2.0, 10.0] {
            let f = correlator_f(FcKind::Emission, 1.0, t, &p, 1e-10).unwrap();
            let bound: f64 = s
                .weights
                .iter()
                .enumerate()
                .map(|(m, w)| w * (-(m as f64) * 0.1 * t).exp())
                .sum();
            assert!(f.norm() <= bound + 1e-15);
        }
        assert!(correlator_f(FcKind::Emission, 1.0, -1.0, &p, 1e-10).is_err());
    }
}
