//! Parameter sets and Hamiltonian builders.
//!
//! Frequencies and rates are plain numbers; molecular blocks are usually
//! expressed in units of the ground-state vibrational frequency, cavity blocks
//! in units of the cavity loss rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilator, displaced_squeezing_restricted, excited_projector, ground_projector, tensor,
    two_level_sigma, unitarity_defect, FockSpace, Operator,
};
use crate::numerics::{ComplexMatrix, C64, I};

/// Constants of a single driven molecule.
///
/// `lambda2`, `r_d` and `r_s` are derived from the vibrational frequencies
/// and `lambda1`; the constructors keep them consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    nu_g: f64,
    nu_e: f64,
    lambda1: f64,
    lambda2: f64,
    r_d: f64,
    r_s: f64,
    omega_00: f64,
    gamma: f64,
    big_gamma: f64,
    eta_l: f64,
    omega_l: f64,
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("must be positive and finite, got {v}"),
        });
    }
    Ok(())
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("must be non-negative and finite, got {v}"),
        });
    }
    Ok(())
}

fn finite(field: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("must be finite, got {v}"),
        });
    }
    Ok(())
}

impl MoleculeParams {
    /// Molecule with the given vibrational frequencies and linear coupling.
    /// Zero-phonon line, rates and drive start at zero.
    pub fn new(nu_g: f64, nu_e: f64, lambda1: f64) -> Result<Self> {
        positive("nu_g", nu_g)?;
        positive("nu_e", nu_e)?;
        finite("lambda1", lambda1)?;
        let lambda2 = (nu_e * nu_e - nu_g * nu_g) / (4.0 * nu_g * nu_g);
        Ok(Self {
            nu_g,
            nu_e,
            lambda1,
            lambda2,
            r_d: -lambda1 * nu_g * nu_g / (nu_e * nu_e),
            r_s: 0.5 * (nu_e / nu_g).ln(),
            omega_00: 0.0,
            gamma: 0.0,
            big_gamma: 0.0,
            eta_l: 0.0,
            omega_l: 0.0,
        })
    }

    /// Same as [`MoleculeParams::new`] with the excited-state frequency set
    /// through the quadratic coupling, `nu_e = nu_g sqrt(1 + 4 lambda2)`.
    pub fn from_couplings(nu_g: f64, lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda2.is_finite() && lambda2 > -0.25) {
            return Err(Error::InvalidParameter {
                field: "lambda2",
                reason: format!("must exceed -1/4 for a bound excited state, got {lambda2}"),
            });
        }
        let mut p = Self::new(nu_g, nu_g * (1.0 + 4.0 * lambda2).sqrt(), lambda1)?;
        p.lambda2 = lambda2;
        Ok(p)
    }

    pub fn with_omega_00(mut self, omega_00: f64) -> Result<Self> {
        finite("omega_00", omega_00)?;
        self.omega_00 = omega_00;
        Ok(self)
    }

    /// Electronic decay rate `gamma` and vibrational relaxation rate `Gamma`.
    pub fn with_rates(mut self, gamma: f64, big_gamma: f64) -> Result<Self> {
        non_negative("gamma", gamma)?;
        non_negative("Gamma", big_gamma)?;
        self.gamma = gamma;
        self.big_gamma = big_gamma;
        Ok(self)
    }

    /// Laser Rabi amplitude and frequency.
    pub fn with_drive(mut self, eta_l: f64, omega_l: f64) -> Result<Self> {
        non_negative("eta_l", eta_l)?;
        finite("omega_l", omega_l)?;
        self.eta_l = eta_l;
        self.omega_l = omega_l;
        Ok(self)
    }

    /// Re-checks every invariant; useful after deserialization.
    pub fn validate(&self) -> Result<()> {
        positive("nu_g", self.nu_g)?;
        positive("nu_e", self.nu_e)?;
        finite("lambda1", self.lambda1)?;
        finite("omega_00", self.omega_00)?;
        non_negative("gamma", self.gamma)?;
        non_negative("Gamma", self.big_gamma)?;
        non_negative("eta_l", self.eta_l)?;
        finite("omega_l", self.omega_l)?;
        let ratio = self.nu_e * self.nu_e / (self.nu_g * self.nu_g);
        let checks = [
            ("lambda2", 1.0 + 4.0 * self.lambda2, ratio),
            ("r_d", self.r_d, -self.lambda1 / ratio),
            ("r_s", self.r_s, 0.5 * (self.nu_e / self.nu_g).ln()),
        ];
        for (field, got, want) in checks {
            if (got - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("inconsistent with nu_g, nu_e, lambda1 ({got} vs {want})"),
                });
            }
        }
        Ok(())
    }

    pub fn nu_g(&self) -> f64 {
        self.nu_g
    }
    pub fn nu_e(&self) -> f64 {
        self.nu_e
    }
    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }
    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }
    pub fn r_d(&self) -> f64 {
        self.r_d
    }
    pub fn r_s(&self) -> f64 {
        self.r_s
    }
    pub fn omega_00(&self) -> f64 {
        self.omega_00
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    /// Vibrational relaxation rate `Gamma`.
    pub fn big_gamma(&self) -> f64 {
        self.big_gamma
    }
    pub fn eta_l(&self) -> f64 {
        self.eta_l
    }
    pub fn omega_l(&self) -> f64 {
        self.omega_l
    }

    /// Laser detuning `omega_00 - omega_l`.
    pub fn delta_l(&self) -> f64 {
        self.omega_00 - self.omega_l
    }

    /// Bare electronic splitting entering the Hamiltonian,
    /// `omega_00 - (nu_e - nu_g)/2 + lambda1² nu_g³ / nu_e²`.
    pub fn omega_0(&self) -> f64 {
        self.omega_00 - 0.5 * (self.nu_e - self.nu_g)
            + self.lambda1 * self.lambda1 * self.nu_g.powi(3) / (self.nu_e * self.nu_e)
    }
}

/// Microscopic description of two harmonic potential surfaces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPrinciplesParams {
    /// Reduced mass.
    pub mu: f64,
    /// Separation of the two potential minima.
    pub r_eg: f64,
    pub omega_e: f64,
    pub omega_g: f64,
    pub nu_e: f64,
    pub nu_g: f64,
}

impl FirstPrinciplesParams {
    /// Zero-point spread `1/sqrt(2 mu nu_g)`.
    pub fn r_zpm(&self) -> f64 {
        1.0 / (2.0 * self.mu * self.nu_g).sqrt()
    }
}

/// Converts potential-surface data into model constants. The linear coupling
/// carries the sign `-mu nu_e² R_eg R_zpm / nu_g`; observables depend only on
/// its square.
pub fn from_first_principles(fp: &FirstPrinciplesParams) -> Result<MoleculeParams> {
    positive("mu", fp.mu)?;
    positive("nu_e", fp.nu_e)?;
    positive("nu_g", fp.nu_g)?;
    finite("r_eg", fp.r_eg)?;
    finite("omega_e", fp.omega_e)?;
    finite("omega_g", fp.omega_g)?;
    let lambda1 = -fp.mu * fp.nu_e * fp.nu_e * fp.r_eg * fp.r_zpm() / fp.nu_g;
    MoleculeParams::new(fp.nu_g, fp.nu_e, lambda1)?
        .with_omega_00(fp.omega_e - fp.omega_g + 0.5 * (fp.nu_e - fp.nu_g))
}

/// Parameters of a driven lossy cavity holding identical molecules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    pub omega_c: f64,
    /// Single-molecule coupling.
    pub g: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub eta_c: f64,
    pub n_molecules: u32,
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        finite("omega_c", self.omega_c)?;
        non_negative("g", self.g)?;
        non_negative("kappa1", self.kappa1)?;
        non_negative("kappa2", self.kappa2)?;
        positive("kappa", self.kappa())?;
        non_negative("eta_c", self.eta_c)?;
        if self.n_molecules == 0 {
            return Err(Error::InvalidParameter {
                field: "n_molecules",
                reason: "at least one molecule is required".into(),
            });
        }
        Ok(())
    }

    pub fn kappa(&self) -> f64 {
        self.kappa1 + self.kappa2
    }
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn vib_ops(space: FockSpace) -> (ComplexMatrix, ComplexMatrix) {
    let b = annihilator(space).into_matrix();
    let x = &b + b.adjoint();
    (b, x)
}

fn molecular_matrix(p: &MoleculeParams, space: FockSpace, omega_0: f64) -> ComplexMatrix {
    let n = space.dim();
    let (b, x) = vib_ops(space);
    let num = b.adjoint() * &b;
    let x2 = &x * &x;
    let pe = excited_projector().into_matrix();
    let id2 = ComplexMatrix::identity(2, 2);
    let idv = ComplexMatrix::identity(n, n);
    let vib_e = &idv * real(omega_0) + x * real(p.lambda1 * p.nu_g) + x2 * real(p.lambda2 * p.nu_g);
    let h = id2.kronecker(&(num * real(p.nu_g))) + pe.kronecker(&vib_e);
    // exact Hermiticity
    (&h + h.adjoint()) * real(0.5)
}

/// Laboratory-frame Hamiltonian
/// `nu_g b†b + omega_0 σ†σ + lambda1 nu_g (b+b†) σ†σ + lambda2 nu_g (b+b†)² σ†σ`
/// on electronic ⊗ vibration.
pub fn holstein_hamiltonian(p: &MoleculeParams, space: FockSpace) -> Operator {
    Operator::new(molecular_matrix(p, space, p.omega_0()), vec![2, space.dim()])
        .expect("dimensions built consistently")
}

/// Laser term `i eta_l (σ† - σ)` on the electronic factor alone.
pub fn drive_hamiltonian(p: &MoleculeParams) -> Operator {
    let s = two_level_sigma().into_matrix();
    Operator::new((s.adjoint() - s) * (I * p.eta_l), vec![2]).expect("2x2")
}

/// Hamiltonian in the frame rotating at the laser frequency: the electronic
/// splitting is shifted by `-omega_l` and the drive is added.
pub fn driven_hamiltonian(p: &MoleculeParams, space: FockSpace) -> Operator {
    let mut h = molecular_matrix(p, space, p.omega_0() - p.omega_l);
    h += drive_hamiltonian(p)
        .into_matrix()
        .kronecker(&ComplexMatrix::identity(space.dim(), space.dim()));
    Operator::new(h, vec![2, space.dim()]).expect("dimensions built consistently")
}

/// Largest norm lost by the transformed vibrational vacuum.
pub const POLARON_LEAK_TOL: f64 = 1e-4;

/// Conditional transformation `P_g ⊗ 1 + P_e ⊗ D(r_d) S(r_s)`.
///
/// The vibrational block holds the untruncated matrix elements restricted to
/// the space, so it is unitary only away from the truncation edge. The
/// dynamics use it on the vibrational vacuum; if that column loses more
/// than [`POLARON_LEAK_TOL`] of its norm the space is reported as too small.
pub fn polaron_unitary(p: &MoleculeParams, space: FockSpace) -> Result<Operator> {
    let ds = displaced_squeezing_restricted(space, p.r_d, p.r_s)?;
    let defect = unitarity_defect(ds.matrix(), 1);
    if defect > POLARON_LEAK_TOL {
        return Err(Error::Truncation {
            defect,
            dim: space.dim(),
        });
    }
    let idv = Operator::identity(&[space.dim()]);
    tensor(&ground_projector(), &idv).add(&tensor(&excited_projector(), &ds))
}

/// Operators on electronic ⊗ vibration used by the dissipators.
#[derive(Debug, Clone)]
pub struct MolecularOperators {
    /// Electronic lowering `σ ⊗ 1`.
    pub sigma: Operator,
    /// Bare vibrational lowering `1 ⊗ b`.
    pub b: Operator,
    pub polaron: Operator,
    /// Relaxation operator `U b U†`, the lowering operator of whichever
    /// manifold's own oscillator: `b` on the ground manifold and
    /// `cosh(r_s) b + sinh(r_s) b† - r_d e^{r_s}` on the excited one.
    pub relaxation: Operator,
}

impl MolecularOperators {
    pub fn new(p: &MoleculeParams, space: FockSpace) -> Result<Self> {
        let n = space.dim();
        let idv = Operator::identity(&[n]);
        let sigma = tensor(&two_level_sigma(), &idv);
        let b = tensor(&Operator::identity(&[2]), &annihilator(space));
        let polaron = polaron_unitary(p, space)?;
        let bm = annihilator(space).into_matrix();
        let excited = &bm * real(p.r_s.cosh()) + bm.adjoint() * real(p.r_s.sinh())
            - ComplexMatrix::identity(n, n) * real(p.r_d * p.r_s.exp());
        let relaxation = Operator::new(
            ground_projector().into_matrix().kronecker(&bm)
                + excited_projector().into_matrix().kronecker(&excited),
            vec![2, n],
        )?;
        Ok(Self {
            sigma,
            b,
            polaron,
            relaxation,
        })
    }
}

/// Rotating-frame cavity Hamiltonian on photon ⊗ electronic ⊗ vibration:
/// `Δ_c a†a + H_mol(Δ_l) + g(aσ† + a†σ) + i eta_c (a† - a)`.
///
/// The molecule is excited only through the cavity; its own `eta_l` is not
/// used here. Only a single molecule is represented.
pub fn cavity_hamiltonian(
    p: &MoleculeParams,
    c: &CavityParams,
    vib_space: FockSpace,
    photon_space: FockSpace,
) -> Result<Operator> {
    c.validate()?;
    if c.n_molecules != 1 {
        return Err(Error::InvalidParameter {
            field: "n_molecules",
            reason: "the explicit cavity Hamiltonian holds one molecule".into(),
        });
    }
    let np = photon_space.dim();
    let nv = vib_space.dim();
    let a = annihilator(photon_space).into_matrix();
    let idp = ComplexMatrix::identity(np, np);
    let idm = ComplexMatrix::identity(2 * nv, 2 * nv);
    let idv = ComplexMatrix::identity(nv, nv);
    let s = two_level_sigma().into_matrix().kronecker(&idv);

    let mol = molecular_matrix(p, vib_space, p.omega_0() - p.omega_l);
    let mut h = (a.adjoint() * &a * real(c.omega_c - p.omega_l)).kronecker(&idm);
    h += idp.kronecker(&mol);
    let coupling = a.kronecker(&s.adjoint()) * real(c.g);
    h += &coupling + coupling.adjoint();
    h += (a.adjoint() - &a).kronecker(&idm) * (I * c.eta_c);
    Operator::new((&h + h.adjoint()) * real(0.5), vec![np, 2, nv])
}
