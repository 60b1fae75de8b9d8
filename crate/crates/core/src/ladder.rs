//! Per-sublevel population ladder behind the reduced rate equation.
//!
//! Populations `p_m^e` of `|e; m_e>` and `p_m^g` of `|g; m_g>` exchange
//! probability through these flows:
//!
//! - pump `p_0^g → p_m^e` at `2γ_m^↑`
//! - stimulated emission `p_0^e → p_m^g` at `2γ_m^↓`
//! - spontaneous emission `p_0^e → p_m^g` at `2γ_m` with `γ_m = γ S_m^em`
//! - vibrational cascades `p_{m+1} → p_m` at `Γ` in both manifolds
//!
//! Every flow leaves its source at the same rate it feeds its target, so
//! the generator columns sum to zero and total probability is conserved.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::{RateEquation, RateModel};
use crate::error::{Error, Result};
use crate::franck_condon::{fc_series, FcKind, DEFAULT_TAIL_TOL};
use crate::model::MoleculeParams;
use crate::numerics::{integrate_ode_at, C64};

/// Sublevel populations of both manifolds, `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderState {
    pub p_e: Vec<f64>,
    pub p_g: Vec<f64>,
    pub m_max: usize,
}

impl LadderState {
    pub const TOTAL_TOL: f64 = 1e-9;

    /// All population in `|g; 0_g>`.
    pub fn ground(m_max: usize) -> Self {
        let mut s = Self {
            p_e: vec![0.0; m_max + 1],
            p_g: vec![0.0; m_max + 1],
            m_max,
        };
        s.p_g[0] = 1.0;
        s
    }

    /// All population in `|e; m_e>`.
    pub fn excited(m: usize, m_max: usize) -> Result<Self> {
        if m > m_max {
            return Err(Error::Dimension(format!("sublevel {m} above m_max {m_max}")));
        }
        let mut s = Self::ground(m_max);
        s.p_g[0] = 0.0;
        s.p_e[m] = 1.0;
        Ok(s)
    }

    pub fn excited_total(&self) -> f64 {
        self.p_e.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.excited_total() + self.p_g.iter().sum::<f64>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_e.len() != self.m_max + 1 || self.p_g.len() != self.m_max + 1 {
            return Err(Error::Dimension("ladder vectors must have m_max + 1 entries".into()));
        }
        let bad = self
            .p_e
            .iter()
            .chain(&self.p_g)
            .any(|&x| !(-Self::TOTAL_TOL..=1.0 + Self::TOTAL_TOL).contains(&x));
        if bad || (self.total() - 1.0).abs() > Self::TOTAL_TOL {
            return Err(Error::InvalidState(format!(
                "ladder populations must lie in [0, 1] and sum to 1 (sum {})",
                self.total()
            )));
        }
        Ok(())
    }

    fn to_vec(&self) -> Vec<f64> {
        self.p_e.iter().chain(&self.p_g).copied().collect()
    }

    fn from_slice(y: &[f64], m_max: usize) -> Self {
        Self {
            p_e: y[..=m_max].to_vec(),
            p_g: y[m_max + 1..].to_vec(),
            m_max,
        }
    }
}

/// Rate matrix of the ladder; `d/dt [p_e; p_g] = G [p_e; p_g]`.
#[derive(Debug, Clone)]
pub struct Ladder {
    generator: DMatrix<f64>,
    m_max: usize,
    reduced: RateEquation,
}

impl Ladder {
    pub fn new(p: &MoleculeParams) -> Result<Self> {
        let model = RateModel::new(p)?;
        let table = model.rates(p.omega_l());
        let em = fc_series(p, FcKind::Emission, DEFAULT_TAIL_TOL)?;
        let m_max = table.up.len().max(table.down.len()).max(em.weights.len()) - 1;
        let n = m_max + 1;
        let (e, g) = (|m: usize| m, |m: usize| n + m);
        let mut gen = DMatrix::<f64>::zeros(2 * n, 2 * n);
        let mut flow = |from: usize, to: usize, rate: f64| {
            gen[(to, from)] += rate;
            gen[(from, from)] -= rate;
        };
        for (m, &r) in table.up.iter().enumerate() {
            flow(g(0), e(m), 2.0 * r);
        }
        for (m, &r) in table.down.iter().enumerate() {
            flow(e(0), g(m), 2.0 * r);
        }
        for (m, &s) in em.weights.iter().enumerate() {
            flow(e(0), g(m), 2.0 * p.gamma() * s);
        }
        for m in 0..m_max {
            flow(e(m + 1), e(m), p.big_gamma());
            flow(g(m + 1), g(m), p.big_gamma());
        }
        Ok(Self {
            generator: gen,
            m_max,
            reduced: model.rate_equation(),
        })
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// The two-level rate equation built from the same rates.
    pub fn reduced(&self) -> RateEquation {
        self.reduced
    }

    /// Largest column sum; zero for a conserving generator.
    pub fn column_sum_defect(&self) -> f64 {
        self.generator
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }

    /// Largest negative off-diagonal entry (zero for a valid rate matrix).
    pub fn negativity(&self) -> f64 {
        let g = &self.generator;
        let mut worst = 0.0_f64;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                if i != j {
                    worst = worst.max(-g[(i, j)]);
                }
            }
        }
        worst
    }

    /// Stationary populations, normalized to one.
    pub fn steady_state(&self) -> Result<LadderState> {
        let n = self.generator.nrows();
        let mut a = self.generator.clone();
        a.row_mut(0).fill(1.0);
        let mut rhs = DVector::<f64>::zeros(n);
        rhs[0] = 1.0;
        let x = a.lu().solve(&rhs).ok_or_else(|| {
            Error::DegenerateSteadyState("ladder generator has no unique stationary state".into())
        })?;
        let s = LadderState::from_slice(x.as_slice(), self.m_max);
        s.validate()?;
        Ok(s)
    }

    /// Populations at the requested ascending times.
    pub fn evolve(&self, init: &LadderState, times: &[f64], tol: f64) -> Result<Vec<LadderState>> {
        init.validate()?;
        if init.m_max != self.m_max {
            return Err(Error::Dimension(format!(
                "initial state has m_max {} but the ladder has {}",
                init.m_max, self.m_max
            )));
        }
        let g = &self.generator;
        let y0: Vec<C64> = init.to_vec().into_iter().map(|x| C64::new(x, 0.0)).collect();
        let ys = integrate_ode_at(
            |_, y, dy| {
                for (i, d) in dy.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, yj) in y.iter().enumerate() {
                        acc += g[(i, j)] * yj.re;
                    }
                    *d = C64::new(acc, 0.0);
                }
            },
            &y0,
            times,
            tol,
        )?;
        ys.into_iter()
            .map(|y| {
                let re: Vec<f64> = y.iter().map(|z| z.re).collect();
                let s = LadderState::from_slice(&re, self.m_max);
                s.validate()?;
                Ok(s)
            })
            .collect()
    }
}

/// Ladder trajectory from `init` for a molecule driven at its laser frequency.
pub fn ladder_evolve(
    p: &MoleculeParams,
    init: &LadderState,
    times: &[f64],
    tol: f64,
) -> Result<Vec<LadderState>> {
    Ladder::new(p)?.evolve(init, times, tol)
}

/// Largest gap between the ladder's total excited population and the
/// reduced rate equation, both started from the ground state.
pub fn reduction_gap(p: &MoleculeParams, times: &[f64], tol: f64) -> Result<f64> {
    let ladder = Ladder::new(p)?;
    let traj = ladder.evolve(&LadderState::ground(ladder.m_max()), times, tol)?;
    let reduced = ladder.reduced();
    Ok(traj
        .iter()
        .zip(times)
        .map(|(s, &t)| (s.excited_total() - reduced.at(0.0, t)).abs())
        .fold(0.0, f64::max))
}
