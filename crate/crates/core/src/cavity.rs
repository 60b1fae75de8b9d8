//! Molecules in a driven optical cavity: effective molecular response,
//! polariton modes, and transmission from linear response and from the
//! single-molecule master equation.

use serde::{Deserialize, Serialize};

use crate::analytic::ResponseFunctions;
use crate::error::{Error, Result};
use crate::fock::{annihilator, tensor, FockSpace, Operator};
use crate::lindblad::{weak_drive_steady_state, PerturbativeSteadyState};
use crate::model::{cavity_hamiltonian, CavityParams, MolecularOperators, MoleculeParams};
use crate::numerics::{C64, I};

/// Inverse molecular susceptibility `1/χ_ab = Γ_eff + iΔ_eff` at the laser
/// frequency of `p`.
pub fn effective_rates(p: &MoleculeParams) -> Result<(f64, f64)> {
    let chi = ResponseFunctions::new(p)?.chi_ab();
    if chi.norm() < 1e-300 {
        return Err(Error::InvalidParameter {
            field: "chi_ab",
            reason: "molecular susceptibility vanishes".into(),
        });
    }
    let inv = chi.inv();
    Ok((inv.re, inv.im))
}

/// Normal modes of the coupled cavity field and collective coherence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonPair {
    /// Frequencies relative to the cavity resonance; `omega_plus >= omega_minus`.
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_eff: f64,
    pub delta_eff: f64,
}

/// Eigenvalues `λ± = -(κ + Γ_eff + iΔ_eff)/2 ± ½ √((Γ_eff - κ + iΔ_eff)² - 4𝒩g²)`
/// of the drift matrix at a laser tuned to the cavity. Each mode evolves as
/// `e^{λt}`, so its frequency is `-Im λ` and its linewidth `-Re λ`.
pub fn polaritons(p: &MoleculeParams, c: &CavityParams) -> Result<PolaritonPair> {
    c.validate()?;
    let at_cavity = p.with_drive(p.eta_l(), c.omega_c)?;
    let (ge, de) = effective_rates(&at_cavity)?;
    let n = f64::from(c.n_molecules);
    let k = c.kappa();
    let z = (C64::new(ge - k, de).powi(2) - 4.0 * n * c.g * c.g).sqrt();
    let centre = -C64::new(k + ge, de) * 0.5;
    let modes = [centre + z * 0.5, centre - z * 0.5];
    let (hi, lo) = if -modes[0].im >= -modes[1].im {
        (modes[0], modes[1])
    } else {
        (modes[1], modes[0])
    };
    Ok(PolaritonPair {
        omega_plus: -hi.im,
        omega_minus: -lo.im,
        gamma_plus: -hi.re,
        gamma_minus: -lo.re,
        gamma_eff: ge,
        delta_eff: de,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionSource {
    Analytic,
    Numeric,
}

/// Complex transmission over a laser scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionScan {
    pub omega_l_grid: Vec<f64>,
    pub t_complex: Vec<C64>,
    pub t_power: Vec<f64>,
    pub source: TransmissionSource,
    pub photon_dim: Option<usize>,
    pub vib_dim: Option<usize>,
}

impl TransmissionScan {
    fn new(omega_l_grid: Vec<f64>, t_complex: Vec<C64>, source: TransmissionSource) -> Self {
        let t_power = t_complex.iter().map(|t| t.norm_sqr()).collect();
        Self {
            omega_l_grid,
            t_complex,
            t_power,
            source,
            photon_dim: None,
            vib_dim: None,
        }
    }

    /// Indices of local maxima of `|T|²` above `floor`.
    pub fn peaks(&self, floor: f64) -> Vec<usize> {
        let v = &self.t_power;
        (1..v.len().saturating_sub(1))
            .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > floor)
            .collect()
    }
}

/// `T(ω_l) = 2√(κ1κ2) / (𝒩g² χ_ab(ω_l) + κ + i(ω_c - ω_l))`.
pub fn transmission_analytic(
    p: &MoleculeParams,
    c: &CavityParams,
    omega_l_grid: &[f64],
) -> Result<TransmissionScan> {
    c.validate()?;
    let n = f64::from(c.n_molecules);
    let amp = 2.0 * (c.kappa1 * c.kappa2).sqrt();
    let t = omega_l_grid
        .iter()
        .map(|&w| {
            let chi = ResponseFunctions::new(&p.with_drive(p.eta_l(), w)?)?.chi_ab();
            Ok(amp / (chi * (n * c.g * c.g) + c.kappa() + I * (c.omega_c - w)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransmissionScan::new(
        omega_l_grid.to_vec(),
        t,
        TransmissionSource::Analytic,
    ))
}

/// Largest cavity drive, relative to `κ`, accepted by the numeric scan.
pub const MAX_WEAK_DRIVE: f64 = 0.01;

/// Cavity ⊗ molecule operators for the numeric scan at one laser frequency.
#[derive(Debug, Clone)]
pub struct CavitySystem {
    pub h0: Operator,
    pub drive: Operator,
    pub collapses: Vec<(Operator, f64)>,
    pub a: Operator,
    pub levels: Vec<usize>,
}

impl CavitySystem {
    /// Rotating-frame model at the laser frequency of `p`.
    pub fn new(
        p: &MoleculeParams,
        c: &CavityParams,
        vib: FockSpace,
        photon: FockSpace,
    ) -> Result<Self> {
        let undriven = CavityParams { eta_c: 0.0, ..*c };
        let h0 = cavity_hamiltonian(p, &undriven, vib, photon)?;
        let a_ph = annihilator(photon);
        let id_mol = Operator::identity(&[2, vib.dim()]);
        let a = tensor(&a_ph, &id_mol);
        let drive = tensor(&a_ph.adjoint().add(&a_ph.scale(C64::new(-1.0, 0.0)))?, &id_mol)
            .scale(I * c.eta_c);
        let mol = MolecularOperators::new(p, vib)?;
        let id_ph = Operator::identity(&[photon.dim()]);
        let collapses = vec![
            (tensor(&id_ph, &mol.sigma), p.gamma()),
            (tensor(&id_ph, &mol.relaxation), p.big_gamma()),
            (a.clone(), c.kappa1),
            (a.clone(), c.kappa2),
        ];
        let nv = vib.dim();
        let levels = (0..photon.dim() * 2 * nv)
            .map(|i| i / (2 * nv) + usize::from((i / nv) % 2 == 1))
            .collect();
        Ok(Self {
            h0,
            drive,
            collapses,
            a,
            levels,
        })
    }

    pub fn steady_state(&self) -> Result<PerturbativeSteadyState> {
        weak_drive_steady_state(&self.h0, &self.drive, &self.collapses, &self.levels)
    }
}

/// Transmission `2√(κ1κ2) <a> / η_c` from the stationary state of a single
/// molecule in the cavity, one master-equation solve per laser frequency.
pub fn transmission_numeric(
    p: &MoleculeParams,
    c: &CavityParams,
    omega_l_grid: &[f64],
    photon_dim: usize,
    vib: FockSpace,
) -> Result<TransmissionScan> {
    c.validate()?;
    if photon_dim < 3 {
        return Err(Error::InvalidParameter {
            field: "photon_dim",
            reason: format!("need vacuum, one photon and a guard level (>= 3), got {photon_dim}"),
        });
    }
    if c.n_molecules != 1 {
        return Err(Error::InvalidParameter {
            field: "n_molecules",
            reason: "the numeric cavity holds a single molecule".into(),
        });
    }
    if !(c.eta_c > 0.0 && c.eta_c <= MAX_WEAK_DRIVE * c.kappa()) {
        return Err(Error::InvalidParameter {
            field: "eta_c",
            reason: format!(
                "eta_c must be positive and at most {MAX_WEAK_DRIVE} kappa for linear response"
            ),
        });
    }
    let photon = FockSpace::new(photon_dim)?;
    let amp = 2.0 * (c.kappa1 * c.kappa2).sqrt() / c.eta_c;
    let t = omega_l_grid
        .iter()
        .map(|&w| {
            let sys = CavitySystem::new(&p.with_drive(p.eta_l(), w)?, c, vib, photon)?;
            let rho = sys.steady_state()?.rho;
            Ok(rho.expectation(sys.a.matrix()) * amp)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scan = TransmissionScan::new(omega_l_grid.to_vec(), t, TransmissionSource::Numeric);
    scan.photon_dim = Some(photon_dim);
    scan.vib_dim = Some(vib.dim());
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{build_liouvillian, steady_state};

    fn bare_molecule(omega_00: f64) -> MoleculeParams {
        MoleculeParams::new(10.0, 10.0, 0.0)
            .unwrap()
            .with_omega_00(omega_00)
            .unwrap()
            .with_rates(0.01, 20.0)
            .unwrap()
    }

    fn cavity(g: f64, n: u32) -> CavityParams {
        CavityParams {
            omega_c: 0.0,
            g,
            kappa1: 0.5,
            kappa2: 0.5,
            eta_c: 0.001,
            n_molecules: n,
        }
    }

    #[test]
    fn bare_effective_rates() {
        let (ge, de) = effective_rates(&bare_molecule(0.0)).unwrap();
        assert!((ge - 0.01).abs() < 1e-12 && de.abs() < 1e-12);
        let squeezed = MoleculeParams::new(10.0, 20.0, 0.0)
            .unwrap()
            .with_rates(0.01, 20.0)
            .unwrap();
        // small because the zero-phonon term dominates when γ ≪ Γ, but not zero
        assert!(effective_rates(&squeezed).unwrap().1.abs() > 1e-12);
    }

    #[test]
    fn polariton_limits() {
        let p = bare_molecule(0.0);
        let pp = polaritons(&p, &cavity(3.0, 1)).unwrap();
        assert!((pp.gamma_plus + pp.gamma_minus - (pp.gamma_eff + 1.0)).abs() < 1e-10);
        let split = pp.omega_plus - pp.omega_minus;
        let exact = (4.0 * 9.0 - (0.01f64 - 1.0).powi(2)).sqrt();
        assert!((split - exact).abs() < 1e-12 && (split - 6.0).abs() < 0.1);
        let free = polaritons(&p, &cavity(0.0, 1)).unwrap();
        let mut widths = [free.gamma_plus, free.gamma_minus];
        widths.sort_by(f64::total_cmp);
        assert!((widths[0] - 0.01).abs() < 1e-12 && (widths[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cavity_transmission() {
        let p = bare_molecule(0.0);
        let grid = [-2.0, -0.5, 0.0, 0.7];
        let t = transmission_analytic(&p, &cavity(0.0, 1), &grid).unwrap();
        for (w, pow) in grid.iter().zip(&t.t_power) {
            assert!((pow - 1.0 / (1.0 + w * w)).abs() < 1e-14);
        }
        let n = transmission_numeric(&p, &cavity(0.0, 1), &grid, 3, FockSpace::new(2).unwrap())
            .unwrap();
        for (a, b) in t.t_complex.iter().zip(&n.t_complex) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn two_level_cavity_agrees_with_linear_response() {
        let p = bare_molecule(0.0);
        let c = cavity(3.0, 1);
        let grid = [-3.0, -1.0, 0.0, 2.9];
        let a = transmission_analytic(&p, &c, &grid).unwrap();
        let n = transmission_numeric(&p, &c, &grid, 3, FockSpace::new(2).unwrap()).unwrap();
        for (x, y) in a.t_complex.iter().zip(&n.t_complex) {
            assert!((x - y).norm() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn block_solver_matches_dense_cavity() {
        let p = MoleculeParams::new(10.0, 12.0, 0.5)
            .unwrap()
            .with_rates(0.5, 2.0)
            .unwrap()
            .with_drive(0.0, 0.4)
            .unwrap();
        let c = CavityParams { eta_c: 0.005, ..cavity(1.0, 1) };
        let sys = CavitySystem::new(&p, &c, FockSpace::new(4).unwrap(), FockSpace::new(3).unwrap())
            .unwrap();
        let h = sys.h0.add(&sys.drive).unwrap();
        let dense = steady_state(&build_liouvillian(&h, &sys.collapses).unwrap()).unwrap();
        let pert = sys.steady_state().unwrap();
        assert!((dense.matrix() - pert.rho.matrix()).norm() < 1e-10);
    }

    #[test]
    fn input_guards() {
        let p = bare_molecule(0.0);
        let vib = FockSpace::new(2).unwrap();
        assert!(transmission_numeric(&p, &cavity(1.0, 1), &[0.0], 2, vib).is_err());
        assert!(transmission_numeric(&p, &cavity(1.0, 2), &[0.0], 3, vib).is_err());
        let loud = CavityParams { eta_c: 0.5, ..cavity(1.0, 1) };
        assert!(transmission_numeric(&p, &loud, &[0.0], 3, vib).is_err());
    }
}
