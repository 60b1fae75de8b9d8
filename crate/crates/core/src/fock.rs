//! Truncated Fock-space operators and two-level-system operators.

use crate::error::{Error, Result};
use crate::numerics::{expm, kron, max_abs, ComplexMatrix, C64, ONE, ZERO};

/// Truncated single-mode Fock space spanned by `|0>..|dim-1>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    /// Truncation used for overlap oracles and closed-form cross-checks.
    pub const ORACLE_DIM: usize = 64;
    /// Truncation used for Lindblad dynamics.
    pub const DYNAMICS_DIM: usize = 12;
    /// Extra levels used when certifying a truncation.
    pub const CONVERGENCE_PAD: usize = 8;

    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter {
                field: "dim",
                reason: format!("Fock truncation must be at least 2, got {dim}"),
            });
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn padded(&self) -> Self {
        Self {
            dim: self.dim + Self::CONVERGENCE_PAD,
        }
    }
}

/// Square matrix together with the dimensions of its tensor factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: ComplexMatrix,
    factor_dims: Vec<usize>,
}

impl Operator {
    pub fn new(matrix: ComplexMatrix, factor_dims: Vec<usize>) -> Result<Self> {
        let size: usize = factor_dims.iter().product();
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != size || factor_dims.is_empty() {
            return Err(Error::Dimension(format!(
                "{}x{} matrix does not match factor dims {:?}",
                matrix.nrows(),
                matrix.ncols(),
                factor_dims
            )));
        }
        Ok(Self {
            matrix,
            factor_dims,
        })
    }

    pub fn identity(factor_dims: &[usize]) -> Self {
        let n = factor_dims.iter().product();
        Self {
            matrix: ComplexMatrix::identity(n, n),
            factor_dims: factor_dims.to_vec(),
        }
    }

    pub fn zeros(factor_dims: &[usize]) -> Self {
        let n = factor_dims.iter().product();
        Self {
            matrix: ComplexMatrix::zeros(n, n),
            factor_dims: factor_dims.to_vec(),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            factor_dims: self.factor_dims.clone(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.factor_dims != other.factor_dims {
            return Err(Error::Dimension(format!(
                "factor dims {:?} and {:?} differ",
                self.factor_dims, other.factor_dims
            )));
        }
        Ok(())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            matrix: &self.matrix * &other.matrix,
            factor_dims: self.factor_dims.clone(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
            factor_dims: self.factor_dims.clone(),
        })
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            matrix: &self.matrix * c,
            factor_dims: self.factor_dims.clone(),
        }
    }

    /// Conjugation `u · self · u†`.
    pub fn conjugate_by(&self, u: &Self) -> Result<Self> {
        self.check_same(u)?;
        Ok(Self {
            matrix: &u.matrix * &self.matrix * u.matrix.adjoint(),
            factor_dims: self.factor_dims.clone(),
        })
    }

    pub fn hermitian_deviation(&self) -> f64 {
        crate::numerics::hermitian_deviation(&self.matrix)
    }
}

fn single_mode(m: ComplexMatrix) -> Operator {
    let n = m.nrows();
    Operator {
        matrix: m,
        factor_dims: vec![n],
    }
}

/// Lowering operator `b` with `<m-1|b|m> = sqrt(m)`.
pub fn annihilator(space: FockSpace) -> Operator {
    let n = space.dim;
    let mut m = ComplexMatrix::zeros(n, n);
    for k in 1..n {
        m[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    single_mode(m)
}

/// Number operator `b†b`, exact in the truncated space.
pub fn number(space: FockSpace) -> Operator {
    let n = space.dim;
    single_mode(ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        (0..n).map(|k| C64::new(k as f64, 0.0)),
    )))
}

fn displacement_matrix(space: FockSpace, r_d: f64) -> Result<ComplexMatrix> {
    let b = annihilator(space).matrix;
    expm(&((b.adjoint() - b) * C64::new(r_d, 0.0)))
}

fn squeezing_matrix(space: FockSpace, r_s: f64) -> Result<ComplexMatrix> {
    let b = annihilator(space).matrix;
    let b2 = &b * &b;
    expm(&((&b2 - b2.adjoint()) * C64::new(0.5 * r_s, 0.0)))
}

/// Largest change of the lower-half block of a truncated unitary when the
/// truncation is enlarged by [`FockSpace::CONVERGENCE_PAD`] levels.
pub fn truncation_defect(small: &ComplexMatrix, padded: &ComplexMatrix) -> f64 {
    let h = small.nrows() / 2;
    let diff = small.view((0, 0), (h, h)) - padded.view((0, 0), (h, h));
    diff.iter().map(|z| z.norm()).fold(0.0, crate::numerics::nan_max)
}

/// Deviation of `U†U` from the identity on the lowest `block` levels.
pub fn unitarity_defect(u: &ComplexMatrix, block: usize) -> f64 {
    let h = block.min(u.nrows());
    let p = u.adjoint() * u;
    let block = p.view((0, 0), (h, h)) - ComplexMatrix::identity(h, h);
    block.iter().map(|z| z.norm()).fold(0.0, crate::numerics::nan_max)
}

const TRUNCATION_TOL: f64 = 1e-8;

fn certify(small: ComplexMatrix, padded: ComplexMatrix) -> Result<ComplexMatrix> {
    let defect = truncation_defect(&small, &padded).max(unitarity_defect(&small, small.nrows() / 2));
    if defect > TRUNCATION_TOL {
        return Err(Error::Truncation {
            defect,
            dim: small.nrows(),
        });
    }
    Ok(small)
}

fn check_range(field: &'static str, value: f64, limit: f64) -> Result<()> {
    if !value.is_finite() || value.abs() > limit {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("|{field}| must be at most {limit}, got {value}"),
        });
    }
    Ok(())
}

/// Displacement `D(r) = exp(r(b† - b))`.
///
/// The result is certified against a larger truncation: the lower-half block
/// must agree to 1e-8, otherwise [`Error::Truncation`] asks for a larger
/// space. Use [`displacement_truncated`] to skip the certificate.
pub fn displacement(space: FockSpace, r_d: f64) -> Result<Operator> {
    check_range("r_d", r_d, 5.0)?;
    let small = displacement_matrix(space, r_d)?;
    let padded = displacement_matrix(space.padded(), r_d)?;
    Ok(single_mode(certify(small, padded)?))
}

/// Squeezing `S(r) = exp(r(b² - b†²)/2)`, certified like [`displacement`].
pub fn squeezing(space: FockSpace, r_s: f64) -> Result<Operator> {
    check_range("r_s", r_s, 1.5)?;
    let small = squeezing_matrix(space, r_s)?;
    let padded = squeezing_matrix(space.padded(), r_s)?;
    Ok(single_mode(certify(small, padded)?))
}

/// Displacement in the given truncation without the convergence certificate.
/// Dynamics at small truncations use this; their convergence is checked on
/// the observables instead.
pub fn displacement_truncated(space: FockSpace, r_d: f64) -> Result<Operator> {
    check_range("r_d", r_d, 5.0)?;
    Ok(single_mode(displacement_matrix(space, r_d)?))
}

/// Squeezing without the convergence certificate.
pub fn squeezing_truncated(space: FockSpace, r_s: f64) -> Result<Operator> {
    check_range("r_s", r_s, 1.5)?;
    Ok(single_mode(squeezing_matrix(space, r_s)?))
}

fn restricted(
    space: FockSpace,
    build: impl Fn(FockSpace) -> Result<ComplexMatrix>,
) -> Result<ComplexMatrix> {
    let n = space.dim;
    let big = build(FockSpace { dim: 2 * n + 32 })?;
    Ok(big.view((0, 0), (n, n)).into_owned())
}

/// Matrix elements `<m|D(r)|n>` of the untruncated displacement for
/// `m, n < dim`. Unlike [`displacement_truncated`] this is not exactly
/// unitary near the top of the space, but its entries carry no truncation
/// error away from the edge.
pub fn displacement_restricted(space: FockSpace, r_d: f64) -> Result<Operator> {
    check_range("r_d", r_d, 5.0)?;
    Ok(single_mode(restricted(space, |s| displacement_matrix(s, r_d))?))
}

/// Squeezing counterpart of [`displacement_restricted`].
pub fn squeezing_restricted(space: FockSpace, r_s: f64) -> Result<Operator> {
    check_range("r_s", r_s, 1.5)?;
    Ok(single_mode(restricted(space, |s| squeezing_matrix(s, r_s))?))
}

/// Restricted matrix elements of the product `D(r_d) S(r_s)`, formed in the
/// enlarged space before restriction.
pub fn displaced_squeezing_restricted(space: FockSpace, r_d: f64, r_s: f64) -> Result<Operator> {
    check_range("r_d", r_d, 5.0)?;
    check_range("r_s", r_s, 1.5)?;
    Ok(single_mode(restricted(space, |s| {
        Ok(displacement_matrix(s, r_d)? * squeezing_matrix(s, r_s)?)
    })?))
}

/// Kronecker product with concatenated factor dimensions.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    let mut factor_dims = a.factor_dims.clone();
    factor_dims.extend_from_slice(&b.factor_dims);
    Operator {
        matrix: kron(&a.matrix, &b.matrix),
        factor_dims,
    }
}

/// Two-level lowering operator `σ = |g><e|` with `|g>` at index 0.
pub fn two_level_sigma() -> Operator {
    Operator {
        matrix: ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]),
        factor_dims: vec![2],
    }
}

/// Projector `σ†σ = |e><e|`.
pub fn excited_projector() -> Operator {
    Operator {
        matrix: ComplexMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]),
        factor_dims: vec![2],
    }
}

/// Projector `σσ† = |g><g|`.
pub fn ground_projector() -> Operator {
    Operator {
        matrix: ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]),
        factor_dims: vec![2],
    }
}

/// Largest entry of `a - b`.
pub fn max_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    max_abs(&(a - b))
}
