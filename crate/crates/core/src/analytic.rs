//! Closed-form spectroscopy of the driven molecule: Laplace-domain response
//! functions, vibronic transfer rates, steady populations, the reduced rate
//! equation and Lorentzian-sum spectra.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::franck_condon::{fc_series, FcKind, FcSeries, DEFAULT_TAIL_TOL};
use crate::model::MoleculeParams;
use crate::numerics::{integrate_ode_at, C64, ZERO};
use crate::spectrum::SpectrumSeries;

const POLE_TOL: f64 = 1e-14;

/// `Ḡ_ab(s)` and `Ḡ_em(s)` for one parameter set.
#[derive(Debug, Clone)]
pub struct ResponseFunctions {
    params: MoleculeParams,
    ab: FcSeries,
    em: FcSeries,
    chi_ab: C64,
    chi_em: C64,
}

impl ResponseFunctions {
    pub fn new(p: &MoleculeParams) -> Result<Self> {
        Self::with_tail_tol(p, DEFAULT_TAIL_TOL)
    }

    pub fn with_tail_tol(p: &MoleculeParams, tail_tol: f64) -> Result<Self> {
        let ab = fc_series(p, FcKind::Absorption, tail_tol)?;
        let em = fc_series(p, FcKind::Emission, tail_tol)?;
        let mut out = Self {
            params: *p,
            ab,
            em,
            chi_ab: ZERO,
            chi_em: ZERO,
        };
        out.chi_ab = out.g(FcKind::Absorption, ZERO)?;
        out.chi_em = out.g(FcKind::Emission, ZERO)?;
        Ok(out)
    }

    /// `Σ_m S_m / (s + γ + mΓ + i(Δ_l ± m ν))`, with `+ν_e` for absorption
    /// and `-ν_g` for emission.
    pub fn g(&self, kind: FcKind, s: C64) -> Result<C64> {
        if !(s.re >= 0.0) || !s.im.is_finite() {
            return Err(Error::InvalidParameter {
                field: "s",
                reason: format!("Laplace variable needs Re(s) >= 0, got {s}"),
            });
        }
        let p = &self.params;
        let (series, shift) = match kind {
            FcKind::Absorption => (&self.ab, p.nu_e()),
            FcKind::Emission => (&self.em, -p.nu_g()),
        };
        let mut acc = ZERO;
        for (m, &w) in series.weights.iter().enumerate() {
            let mf = m as f64;
            let den = s + C64::new(p.gamma() + mf * p.big_gamma(), p.delta_l() + mf * shift);
            if den.norm() < POLE_TOL {
                return Err(Error::Pole { m });
            }
            acc += w / den;
        }
        Ok(acc)
    }

    pub fn g_ab(&self, s: C64) -> Result<C64> {
        self.g(FcKind::Absorption, s)
    }

    pub fn g_em(&self, s: C64) -> Result<C64> {
        self.g(FcKind::Emission, s)
    }

    /// `lim_{s→0} Ḡ_ab`.
    pub fn chi_ab(&self) -> C64 {
        self.chi_ab
    }

    /// `lim_{s→0} Ḡ_em`.
    pub fn chi_em(&self) -> C64 {
        self.chi_em
    }

    pub fn m_max_ab(&self) -> usize {
        self.ab.m_max
    }

    pub fn m_max_em(&self) -> usize {
        self.em.m_max
    }
}

/// One response function at a single Laplace point.
pub fn response_g(p: &MoleculeParams, kind: FcKind, s: C64) -> Result<C64> {
    ResponseFunctions::new(p)?.g(kind, s)
}

/// Upward and downward vibronic rates at one drive frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub up: Vec<f64>,
    pub down: Vec<f64>,
    pub omega: f64,
}

impl RateTable {
    pub fn up_sum(&self) -> f64 {
        self.up.iter().sum()
    }

    pub fn down_sum(&self) -> f64 {
        self.down.iter().sum()
    }
}

/// Franck-Condon weights of both directions, reused across frequencies.
#[derive(Debug, Clone)]
pub struct RateModel {
    params: MoleculeParams,
    ab: FcSeries,
    em: FcSeries,
}

impl RateModel {
    pub fn new(p: &MoleculeParams) -> Result<Self> {
        Ok(Self {
            params: *p,
            ab: fc_series(p, FcKind::Absorption, DEFAULT_TAIL_TOL)?,
            em: fc_series(p, FcKind::Emission, DEFAULT_TAIL_TOL)?,
        })
    }

    pub fn params(&self) -> &MoleculeParams {
        &self.params
    }

    pub fn m_max(&self) -> usize {
        self.ab.m_max.max(self.em.m_max)
    }

    /// `γ_m^↑(ω) = η² S_m^ab (mΓ+γ) / ((mΓ+γ)² + (ω_00 + mν_e - ω)²)` and
    /// `γ_m^↓(ω) = η² S_m^em (mΓ+γ) / ((mΓ+γ)² + (ω_00 - mν_g - ω)²)`.
    pub fn rates(&self, omega: f64) -> RateTable {
        let p = &self.params;
        let eta2 = p.eta_l() * p.eta_l();
        let lorentz = |m: usize, w: f64, centre: f64| {
            let width = m as f64 * p.big_gamma() + p.gamma();
            let det = centre - omega;
            let den = width * width + det * det;
            if den == 0.0 {
                0.0
            } else {
                eta2 * w * width / den
            }
        };
        let up = (self.ab.weights.iter().enumerate())
            .map(|(m, &w)| lorentz(m, w, p.omega_00() + m as f64 * p.nu_e()))
            .collect();
        let down = (self.em.weights.iter().enumerate())
            .map(|(m, &w)| lorentz(m, w, p.omega_00() - m as f64 * p.nu_g()))
            .collect();
        RateTable { up, down, omega }
    }

    /// `Σγ↑ / (γ + Σ(γ↑ + γ↓))` at the laser frequency.
    pub fn steady_population(&self) -> f64 {
        self.rate_equation().fixed_point()
    }

    pub fn rate_equation(&self) -> RateEquation {
        let t = self.rates(self.params.omega_l());
        RateEquation {
            gamma: self.params.gamma(),
            up: t.up_sum(),
            down: t.down_sum(),
        }
    }
}

pub fn rates(p: &MoleculeParams, omega: f64) -> Result<RateTable> {
    Ok(RateModel::new(p)?.rates(omega))
}

/// Steady excited population of the rate picture at the laser frequency.
pub fn steady_population(p: &MoleculeParams) -> Result<f64> {
    Ok(RateModel::new(p)?.steady_population())
}

/// `dp/dt = -2(γ + D) p + 2U (1 - p)` with summed rates `U` and `D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEquation {
    pub gamma: f64,
    pub up: f64,
    pub down: f64,
}

impl RateEquation {
    pub fn relaxation_rate(&self) -> f64 {
        2.0 * (self.gamma + self.down + self.up)
    }

    pub fn fixed_point(&self) -> f64 {
        let total = self.gamma + self.down + self.up;
        if total == 0.0 {
            0.0
        } else {
            self.up / total
        }
    }

    pub fn derivative(&self, pe: f64) -> f64 {
        -2.0 * (self.gamma + self.down) * pe + 2.0 * self.up * (1.0 - pe)
    }

    /// Closed-form solution.
    pub fn at(&self, pe0: f64, t: f64) -> f64 {
        let fp = self.fixed_point();
        fp + (pe0 - fp) * (-self.relaxation_rate() * t).exp()
    }
}

/// Reduced rate-equation trajectory `(t, p_e)` on the given times.
pub fn rate_equation_evolve(p: &MoleculeParams, pe0: f64, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(0.0..=1.0).contains(&pe0) {
        return Err(Error::InvalidParameter {
            field: "p_e0",
            reason: format!("initial population must lie in [0, 1], got {pe0}"),
        });
    }
    let eq = RateModel::new(p)?.rate_equation();
    Ok(times.iter().map(|&t| (t, eq.at(pe0, t))).collect())
}

/// Same trajectory from the adaptive integrator.
pub fn rate_equation_integrate(
    p: &MoleculeParams,
    pe0: f64,
    times: &[f64],
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let eq = RateModel::new(p)?.rate_equation();
    let ys = integrate_ode_at(
        |_, y, dy| dy[0] = C64::new(eq.derivative(y[0].re), 0.0),
        &[C64::new(pe0, 0.0)],
        times,
        tol,
    )?;
    Ok(times.iter().zip(ys).map(|(&t, y)| (t, y[0].re)).collect())
}

fn rate_spectrum(
    p: &MoleculeParams,
    omegas: &[f64],
    pick: impl Fn(&RateTable) -> f64,
    source: &str,
) -> Result<SpectrumSeries> {
    let model = RateModel::new(p)?;
    let values: Vec<f64> = omegas.iter().map(|&w| pick(&model.rates(w))).collect();
    let mut s = SpectrumSeries::new(omegas.to_vec(), values, source)?;
    s.m_max = Some(model.m_max());
    let peak = s.values.iter().cloned().fold(0.0, f64::max);
    if let (Some(first), Some(last)) = (s.values.first(), s.values.last()) {
        if peak > 0.0 && first.max(*last) > 1e-2 * peak {
            s.warnings.push(
                "the grid edges carry more than 1% of the peak; widen the frequency window".into(),
            );
        }
    }
    Ok(s)
}

/// `S_Ab(ω) = Σ_m γ_m^↑(ω)`.
pub fn analytic_absorption_spectrum(p: &MoleculeParams, omegas: &[f64]) -> Result<SpectrumSeries> {
    rate_spectrum(p, omegas, RateTable::up_sum, "analytic absorption: sum of upward rates")
}

/// `S_Em(ω) = Σ_m γ_m^↓(ω)`.
pub fn analytic_emission_spectrum(p: &MoleculeParams, omegas: &[f64]) -> Result<SpectrumSeries> {
    rate_spectrum(p, omegas, RateTable::down_sum, "analytic emission: sum of downward rates")
}

/// `<b(τ) b†(0)>` in the stationary state: `(1 - p_e) e^{-(iν_g + Γ)τ} +
/// p_e e^{-(iν_e + Γ)τ}`.
pub fn vibrational_correlation(p: &MoleculeParams, pe: f64, taus: &[f64]) -> Vec<C64> {
    taus.iter()
        .map(|&t| {
            let g = C64::new(-p.big_gamma() * t, -p.nu_g() * t).exp();
            let e = C64::new(-p.big_gamma() * t, -p.nu_e() * t).exp();
            g * (1.0 - pe) + e * pe
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ONE;

    fn bare() -> MoleculeParams {
        MoleculeParams::new(1.0, 1.0, 0.0)
            .unwrap()
            .with_rates(0.1, 0.5)
            .unwrap()
            .with_drive(0.02, 0.0)
            .unwrap()
    }

    fn squeezed_molecule() -> MoleculeParams {
        MoleculeParams::new(1.0, 2.0, 1.0)
            .unwrap()
            .with_rates(0.01, 0.1)
            .unwrap()
            .with_drive(0.02, 0.0)
            .unwrap()
    }

    #[test]
    fn single_term_response() {
        let r = ResponseFunctions::new(&bare()).unwrap();
        assert!((r.chi_ab() - ONE / 0.1).norm() < 1e-12);
        let p = bare().with_drive(0.02, 0.3).unwrap();
        let q = bare().with_drive(0.02, -0.3).unwrap();
        let a = response_g(&p, FcKind::Absorption, ZERO).unwrap();
        let b = response_g(&q, FcKind::Absorption, ZERO).unwrap();
        assert!((a.im + b.im).abs() < 1e-14 && (a.re - b.re).abs() < 1e-14);
    }

    #[test]
    fn pole_and_domain_errors() {
        let p = MoleculeParams::new(1.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            response_g(&p, FcKind::Emission, ZERO),
            Err(Error::Pole { m: 0 })
        ));
        assert!(response_g(&bare(), FcKind::Emission, C64::new(-1.0, 0.0)).is_err());
    }

    #[test]
    fn response_converged_in_truncation() {
        let p = squeezed_molecule().with_omega_00(0.0).unwrap();
        let base = ResponseFunctions::new(&p).unwrap();
        let tight = ResponseFunctions::with_tail_tol(&p, 1e-14).unwrap();
        assert!(tight.m_max_ab() > base.m_max_ab());
        assert!((tight.chi_ab() - base.chi_ab()).norm() < 1e-8 * base.chi_ab().norm());
        assert!(base.chi_ab().re > 0.0 && base.chi_em().re > 0.0);
    }

    #[test]
    fn rate_properties() {
        let p = squeezed_molecule();
        let model = RateModel::new(&p).unwrap();
        let w = p.omega_00() + 2.0 * p.nu_e();
        let t = model.rates(w);
        let s_ab = crate::franck_condon::fc_absorption(&p, 2).unwrap();
        let want = 0.02f64.powi(2) * s_ab / (2.0 * 0.1 + 0.01);
        assert!((t.up[2] - want).abs() < 1e-15);
        assert!(t.up.iter().chain(&t.down).all(|&r| r >= 0.0));
        for k in 0..50 {
            let t = model.rates(-2.0 + 0.1 * k as f64);
            assert!(t.up_sum() < 0.02f64.powi(2) / 0.01 * 1.0001);
        }
        let b = RateModel::new(&bare()).unwrap().rates(0.2);
        assert_eq!(b.up.len(), 1);
    }

    #[test]
    fn populations() {
        assert_eq!(steady_population(&squeezed_molecule().with_drive(0.0, 0.0).unwrap()).unwrap(), 0.0);
        // weak drive reduces to the linear susceptibility
        let p = squeezed_molecule().with_drive(1e-5, 0.4).unwrap();
        let chi = ResponseFunctions::new(&p).unwrap().chi_ab();
        let pe = steady_population(&p).unwrap();
        let lin = 1e-10 / 0.01 * chi.re;
        assert!((pe - lin).abs() < 1e-6 * lin);
        // monotone in the drive strength
        let mut last = 0.0;
        for k in 1..20 {
            let pe = steady_population(&squeezed_molecule().with_drive(0.01 * k as f64, 0.3).unwrap()).unwrap();
            assert!(pe > last && pe < 1.0);
            last = pe;
        }
    }

    #[test]
    fn rate_equation_solutions() {
        let p = squeezed_molecule().with_drive(0.0, 0.0).unwrap();
        let times = [0.0, 1.0, 10.0, 100.0];
        for (t, pe) in rate_equation_evolve(&p, 1.0, &times).unwrap() {
            assert!((pe - (-0.02 * t).exp()).abs() < 1e-14);
        }
        let p = squeezed_molecule();
        let eq = RateModel::new(&p).unwrap().rate_equation();
        assert!(eq.derivative(eq.fixed_point()).abs() < 1e-16);
        assert_eq!(eq.fixed_point(), steady_population(&p).unwrap());
        let exact = rate_equation_evolve(&p, 0.3, &times).unwrap();
        let num = rate_equation_integrate(&p, 0.3, &times, 1e-11).unwrap();
        for (a, b) in exact.iter().zip(&num) {
            assert!((a.1 - b.1).abs() < 1e-9);
        }
        assert!(rate_equation_evolve(&p, 1.5, &times).is_err());
    }

    #[test]
    fn lorentzian_sum_area() {
        let p = squeezed_molecule().with_omega_00(0.0).unwrap();
        let grid = crate::spectrum::linspace(-30.0, 30.0, 60001);
        for s in [
            analytic_absorption_spectrum(&p, &grid).unwrap(),
            analytic_emission_spectrum(&p, &grid).unwrap(),
        ] {
            assert!(s.values.iter().all(|&v| v >= 0.0));
            let area = s.integral();
            let want = std::f64::consts::PI * 0.02f64.powi(2);
            assert!((area - want).abs() < 0.02 * want, "{area} vs {want}");
        }
    }

    #[test]
    fn mirror_symmetry_without_squeezing() {
        let p = MoleculeParams::new(1.0, 1.0, 1.0)
            .unwrap()
            .with_omega_00(3.0)
            .unwrap()
            .with_rates(0.01, 0.1)
            .unwrap()
            .with_drive(0.001, 0.0)
            .unwrap();
        let up: Vec<f64> = (0..200).map(|k| 3.0 + 0.0173 * k as f64).collect();
        let down: Vec<f64> = up.iter().rev().map(|w| 6.0 - w).collect();
        let a = analytic_absorption_spectrum(&p, &up).unwrap();
        let e = analytic_emission_spectrum(&p, &down).unwrap();
        for (x, y) in a.values.iter().zip(e.values.iter().rev()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300));
        }
    }
}
