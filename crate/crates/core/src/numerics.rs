//! Dense complex linear algebra and integration kernels.
//!
//! Matrices are `nalgebra` dense matrices of `Complex64`. Everything here is a
//! pure function of its inputs.

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest modulus of any entry.
/// Any non-finite entry makes the result NaN.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0_f64, nan_max)
}

/// `f64::max` that propagates NaN instead of discarding it.
pub fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Largest entrywise deviation of `m` from its adjoint.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = nan_max(dev, (m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn anti_hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] + m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn all_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn require_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!(
            "{what} needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn matmul(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot multiply {}x{} by {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b)
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Matrix exponential.
///
/// Hermitian and anti-Hermitian inputs go through an eigendecomposition, which
/// keeps unitaries generated by anti-Hermitian matrices unitary to rounding.
/// Anything else uses scaling and squaring with a degree-13 Padé approximant.
pub fn expm(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    require_square(m, "expm")?;
    let norm = m.lp_norm(1);
    if !norm.is_finite() {
        return Err(Error::ExpmOverflow { norm });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(m.clone());
    }
    let tol = 1e-14 * (1.0 + max_abs(m));
    let out = if anti_hermitian_deviation(m) <= tol {
        // m = iH with H Hermitian
        let h = m.map(|z| -I * z);
        let (vals, vecs) = eig_hermitian_unchecked(&h);
        let phases = DVector::from_iterator(n, vals.iter().map(|&l| (I * l).exp()));
        scale_columns(&vecs, &phases) * vecs.adjoint()
    } else if hermitian_deviation(m) <= tol {
        let (vals, vecs) = eig_hermitian_unchecked(m);
        if vals.iter().any(|&l| l > 700.0) {
            return Err(Error::ExpmOverflow { norm });
        }
        let w = DVector::from_iterator(n, vals.iter().map(|&l| C64::new(l.exp(), 0.0)));
        scale_columns(&vecs, &w) * vecs.adjoint()
    } else {
        expm_pade13(m, norm)?
    };
    if !all_finite(&out) {
        return Err(Error::ExpmOverflow { norm });
    }
    Ok(out)
}

fn scale_columns(v: &ComplexMatrix, w: &ComplexVector) -> ComplexMatrix {
    let mut out = v.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= w[j];
    }
    out
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Higham (2005), degree 13 only; theta_13 = 5.37.
fn expm_pade13(m: &ComplexMatrix, norm: f64) -> Result<ComplexMatrix> {
    const THETA13: f64 = 5.371920351148152;
    let n = m.nrows();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::ExpmOverflow { norm });
    }
    let a = m * C64::new(2f64.powi(-squarings), 0.0);
    let id = ComplexMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9));
    let u = &a * (u_inner + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1));
    let v_inner = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8));
    let v = v_inner + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = LinearSolver::new(&q)?.solve_matrix(&p);
    for _ in 0..squarings {
        r = &r * &r;
        if !all_finite(&r) {
            return Err(Error::ExpmOverflow { norm });
        }
    }
    Ok(r)
}

fn eig_hermitian_unchecked(m: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let mut eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        // the QR sweeps can break down on clusters of eigenvalues far below
        // the norm; a shift by the norm moves them away from zero
        let shift = max_abs(m).max(1.0) * m.nrows() as f64;
        let n = m.nrows();
        eig = SymmetricEigen::new(m + ComplexMatrix::identity(n, n) * C64::new(shift, 0.0));
        eig.eigenvalues.iter_mut().for_each(|v| *v -= shift);
    }
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matrix whose columns are the matching orthonormal eigenvectors.
pub fn eig_hermitian(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    require_square(m, "eig_hermitian")?;
    let deviation = hermitian_deviation(m);
    if deviation > 1e-10 * (1.0 + max_abs(m)) {
        return Err(Error::NotHermitian { deviation });
    }
    // symmetrize so the solver sees an exactly Hermitian input
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let (vals, vecs) = eig_hermitian_unchecked(&sym);
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence("Hermitian eigensolver returned non-finite values".into()));
    }
    Ok((vals, vecs))
}

/// LU factorization with partial pivoting, reusable across right-hand sides.
pub struct LinearSolver {
    lu: LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    condition: f64,
}

impl LinearSolver {
    /// Largest pivot ratio tolerated before the system is declared singular.
    pub const MAX_CONDITION: f64 = 1e14;

    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        require_square(a, "solve_linear")?;
        let lu = a.clone().lu();
        let u = lu.u();
        let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
        let max = diag.iter().cloned().fold(0.0_f64, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition < Self::MAX_CONDITION) {
            return Err(Error::Singular { condition });
        }
        Ok(Self { lu, condition })
    }

    /// Pivot-ratio estimate of the condition number.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, rhs: &ComplexVector) -> ComplexVector {
        self.lu
            .solve(rhs)
            .expect("factorization was checked for singularity")
    }

    pub fn solve_matrix(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.lu
            .solve(rhs)
            .expect("factorization was checked for singularity")
    }
}

pub fn solve_linear(a: &ComplexMatrix, rhs: &ComplexVector) -> Result<ComplexVector> {
    if a.nrows() != rhs.len() {
        return Err(Error::Dimension(format!(
            "system of size {} with right-hand side of length {}",
            a.nrows(),
            rhs.len()
        )));
    }
    let x = LinearSolver::new(a)?.solve(rhs);
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    Ok(x)
}

/// One accepted point of an adaptive integration.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeState {
    pub t: f64,
    pub y: Vec<C64>,
    /// Step size that produced this point (the initial guess for `t = 0`).
    pub step: f64,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Dopri<F> {
    f: F,
    tol: f64,
    k: [Vec<C64>; 7],
    tmp: Vec<C64>,
    ynew: Vec<C64>,
}

impl<F: FnMut(f64, &[C64], &mut [C64])> Dopri<F> {
    fn new(f: F, n: usize, tol: f64) -> Self {
        let z = || vec![ZERO; n];
        Self {
            f,
            tol,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            ynew: z(),
        }
    }

    fn stage(&mut self, y: &[C64], h: f64, coeffs: &[(usize, f64)], t: f64, out: usize) {
        for i in 0..y.len() {
            let mut acc = y[i];
            for &(j, a) in coeffs {
                acc += self.k[j][i] * (h * a);
            }
            self.tmp[i] = acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k[out]);
        (self.f)(t, tmp, k);
    }

    /// Attempts a step from `(t, y)` with `k[0] = f(t, y)` already set.
    /// Returns the scaled error norm; on success `ynew` and `k[6]` hold the
    /// new state and its derivative.
    fn attempt(&mut self, t: f64, y: &[C64], h: f64) -> f64 {
        self.stage(y, h, &[(0, A21)], t + C2 * h, 1);
        self.stage(y, h, &[(0, A31), (1, A32)], t + C3 * h, 2);
        self.stage(y, h, &[(0, A41), (1, A42), (2, A43)], t + C4 * h, 3);
        self.stage(y, h, &[(0, A51), (1, A52), (2, A53), (3, A54)], t + C5 * h, 4);
        self.stage(
            y,
            h,
            &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)],
            t + h,
            5,
        );
        for i in 0..y.len() {
            self.ynew[i] = y[i]
                + (self.k[0][i] * B1
                    + self.k[2][i] * B3
                    + self.k[3][i] * B4
                    + self.k[4][i] * B5
                    + self.k[5][i] * B6)
                    * h;
        }
        {
            let (ynew, k6) = (&self.ynew, &mut self.k[6]);
            (self.f)(t + h, ynew, k6);
        }
        let mut acc = 0.0;
        for i in 0..y.len() {
            let err = (self.k[0][i] * E1
                + self.k[2][i] * E3
                + self.k[3][i] * E4
                + self.k[4][i] * E5
                + self.k[5][i] * E6
                + self.k[6][i] * E7)
                * h;
            let scale = self.tol + self.tol * y[i].norm().max(self.ynew[i].norm());
            acc += (err.norm() / scale).powi(2);
        }
        (acc / y.len().max(1) as f64).sqrt()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(1e-12..=1e-4).contains(&tol) {
        return Err(Error::InvalidParameter {
            field: "tol",
            reason: format!("must lie in [1e-12, 1e-4], got {tol:e}"),
        });
    }
    Ok(())
}

/// Adaptive Dormand-Prince 5(4) integration of `dy/dt = f(t, y)` from 0 to
/// `t_end`, returning every accepted step (the first entry is the initial
/// condition).
pub fn integrate_ode<F>(f: F, y0: &[C64], t_end: f64, tol: f64) -> Result<Vec<OdeState>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    let mut out = vec![];
    integrate_impl(f, y0, &[t_end], tol, |state, _| out.push(state), true)?;
    Ok(out)
}

/// Same integrator, reporting the state only at the requested (ascending,
/// non-negative) output times. Steps are clipped so that each output time is
/// hit exactly.
pub fn integrate_ode_at<F>(f: F, y0: &[C64], times: &[f64], tol: f64) -> Result<Vec<Vec<C64>>>
where
    F: FnMut(f64, &[C64], &mut [C64]),
{
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter {
            field: "times",
            reason: "output times must be ascending and non-negative".into(),
        });
    }
    let mut out = Vec::with_capacity(times.len());
    integrate_impl(f, y0, times, tol, |state, _| out.push(state.y), false)?;
    Ok(out)
}

fn integrate_impl<F, S>(
    f: F,
    y0: &[C64],
    stops: &[f64],
    tol: f64,
    mut sink: S,
    every_step: bool,
) -> Result<()>
where
    F: FnMut(f64, &[C64], &mut [C64]),
    S: FnMut(OdeState, usize),
{
    check_tol(tol)?;
    let n = y0.len();
    let t_end = stops.last().copied().unwrap_or(0.0);
    let mut solver = Dopri::new(f, n, tol);
    let mut t = 0.0;
    let mut y = y0.to_vec();
    (solver.f)(t, &y, &mut solver.k[0]);

    // initial step guess from the derivative scale
    let ynorm = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let fnorm = solver.k[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = if fnorm > 0.0 {
        (0.01 * (ynorm.max(tol)) / fnorm).min(t_end.max(1e-300))
    } else {
        t_end.max(1e-6)
    };
    if h <= 0.0 {
        h = 1e-6;
    }

    let mut stop_idx = 0;
    if every_step {
        sink(OdeState { t, y: y.clone(), step: h }, 0);
    }
    while stop_idx < stops.len() && stops[stop_idx] <= t {
        if !every_step {
            sink(OdeState { t, y: y.clone(), step: h }, stop_idx);
        }
        stop_idx += 1;
    }
    let mut count = 0usize;
    while stop_idx < stops.len() {
        let target = stops[stop_idx];
        let mut step = h.min(target - t);
        let hits_target = step >= target - t;
        let err = solver.attempt(t, &y, step);
        if err <= 1.0 && err.is_finite() {
            t = if hits_target { target } else { t + step };
            std::mem::swap(&mut y, &mut solver.ynew);
            solver.k.swap(0, 6);
            count += 1;
            if every_step {
                sink(OdeState { t, y: y.clone(), step }, count);
            }
            while stop_idx < stops.len() && stops[stop_idx] <= t {
                if !every_step {
                    sink(OdeState { t, y: y.clone(), step }, stop_idx);
                }
                stop_idx += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // do not let a short clipped step shrink the natural step size
            if !hits_target || factor < 1.0 {
                h = step * factor;
            }
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.25)).clamp(0.1, 0.5)
            } else {
                0.1
            };
            step *= factor;
            h = step;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, step: h });
        }
    }
    Ok(())
}

/// Physicists' Hermite polynomials `H_0(x) .. H_{m_max}(x)` by the three-term
/// recurrence.
pub fn hermite_sequence(x: C64, m_max: usize) -> Result<Vec<C64>> {
    if m_max > 200 {
        return Err(Error::InvalidParameter {
            field: "m_max",
            reason: format!("at most 200, got {m_max}"),
        });
    }
    let mut h = Vec::with_capacity(m_max + 1);
    h.push(ONE);
    if m_max >= 1 {
        h.push(x * 2.0);
    }
    for n in 1..m_max {
        let next = x * 2.0 * h[n] - h[n - 1] * (2.0 * n as f64);
        if !next.re.is_finite() || !next.im.is_finite() {
            return Err(Error::HermiteOverflow { order: n + 1 });
        }
        h.push(next);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        ComplexMatrix::from_fn(n, n, |_, _| C64::new(next(), next()))
    }

    #[test]
    fn matmul_identity_and_zero() {
        let m = lcg_matrix(3, 1);
        let id = ComplexMatrix::identity(3, 3);
        assert_eq!(matmul(&id, &m).unwrap(), m);
        let z = ComplexMatrix::zeros(3, 3);
        assert_eq!(matmul(&m, &z).unwrap(), z);
    }

    #[test]
    fn matmul_matches_triple_loop() {
        let a = lcg_matrix(4, 7);
        let b = lcg_matrix(4, 8);
        let c = matmul(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut acc = ZERO;
                for k in 0..4 {
                    acc += a[(i, k)] * b[(k, j)];
                }
                assert!((acc - c[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn matmul_rejects_mismatch() {
        let a = ComplexMatrix::zeros(2, 3);
        let b = ComplexMatrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn expm_trivial_cases() {
        let z = ComplexMatrix::zeros(4, 4);
        assert!((expm(&z).unwrap() - ComplexMatrix::identity(4, 4)).map(|z| z.norm()).max() < 1e-15);
        let d = ComplexMatrix::from_diagonal_element(3, 3, I * std::f64::consts::PI);
        let e = expm(&d).unwrap();
        for i in 0..3 {
            assert!((e[(i, i)] + ONE).norm() < 1e-14);
        }
        assert!(matches!(
            expm(&ComplexMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn expm_pade_matches_eigen_path() {
        // a generic matrix goes through Padé; compare with a Taylor sum
        let m = lcg_matrix(5, 3) * C64::new(0.7, 0.0);
        let e = expm(&m).unwrap();
        let mut term = ComplexMatrix::identity(5, 5);
        let mut sum = term.clone();
        for k in 1..80 {
            term = &term * &m / C64::new(k as f64, 0.0);
            sum += &term;
        }
        assert!((e - sum).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn expm_large_norm_pade_squaring() {
        let m = lcg_matrix(4, 11) * C64::new(6.0, 0.0);
        let e = expm(&m).unwrap();
        let einv = expm(&(-&m)).unwrap();
        let prod = &e * &einv;
        let err = (prod - ComplexMatrix::identity(4, 4)).map(|z| z.norm()).max();
        assert!(err < 1e-6 * e.map(|z| z.norm()).max() * einv.map(|z| z.norm()).max(), "err {err}");
    }

    #[test]
    fn expm_overflow_is_reported() {
        let m = ComplexMatrix::from_diagonal_element(2, 2, C64::new(1000.0, 0.0));
        assert!(matches!(expm(&m), Err(Error::ExpmOverflow { .. })));
    }

    #[test]
    fn eig_hermitian_small_cases() {
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(3.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(2.0, 0.0),
        ]));
        let (vals, _) = eig_hermitian(&d).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let px = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let (vals, _) = eig_hermitian(&px).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_hermitian_reconstructs() {
        let a = lcg_matrix(6, 5);
        let h = &a + a.adjoint();
        let (vals, v) = eig_hermitian(&h).unwrap();
        let lam = ComplexMatrix::from_diagonal(&DVector::from_iterator(
            6,
            vals.iter().map(|&l| C64::new(l, 0.0)),
        ));
        assert!((&v * lam * v.adjoint() - &h).map(|z| z.norm()).max() < 1e-10);
        assert!((v.adjoint() * &v - ComplexMatrix::identity(6, 6)).map(|z| z.norm()).max() < 1e-9);
    }

    #[test]
    fn eig_hermitian_rejects_non_hermitian() {
        let a = lcg_matrix(3, 2);
        assert!(matches!(
            eig_hermitian(&a),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn solve_linear_cases() {
        let v = DVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(-3.0, 0.5)]);
        let x = solve_linear(&ComplexMatrix::identity(2, 2), &v).unwrap();
        assert_eq!(x, v);
        let two = ComplexMatrix::from_diagonal_element(2, 2, C64::new(2.0, 0.0));
        let x = solve_linear(&two, &DVector::from_vec(vec![C64::new(4.0, 0.0), C64::new(6.0, 0.0)]))
            .unwrap();
        assert!((x[0] - C64::new(2.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - C64::new(3.0, 0.0)).norm() < 1e-15);

        let a = lcg_matrix(8, 9);
        let rhs = DVector::from_iterator(8, (0..8).map(|k| C64::new(k as f64, 1.0)));
        let x = solve_linear(&a, &rhs).unwrap();
        assert!((&a * x - &rhs).norm() / rhs.norm() < 1e-10);
    }

    #[test]
    fn solve_linear_singular() {
        let a = ComplexMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        let rhs = DVector::from_vec(vec![ONE, ONE]);
        assert!(matches!(solve_linear(&a, &rhs), Err(Error::Singular { .. })));
    }

    #[test]
    fn ode_constant_and_decay() {
        let traj = integrate_ode(|_, _, dy| dy.fill(ZERO), &[ONE, I], 3.0, 1e-8).unwrap();
        assert!(traj.iter().all(|s| s.y == vec![ONE, I]));
        assert_eq!(traj.last().unwrap().t, 3.0);

        let traj = integrate_ode(
            |_, y, dy| dy[0] = -y[0],
            &[ONE],
            1.0,
            1e-10,
        )
        .unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.t, 1.0);
        assert!((last.y[0].re - (-1f64).exp()).abs() < 1e-9);
        assert!(traj.iter().all(|s| s.step > 0.0));
    }

    #[test]
    fn ode_output_times_hit_exactly() {
        let times = [0.0, 0.25, 0.5, 2.0];
        let ys = integrate_ode_at(|_, y, dy| dy[0] = I * y[0], &[ONE], &times, 1e-10).unwrap();
        assert_eq!(ys.len(), 4);
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (I * *t).exp()).norm() < 1e-8);
        }
    }

    #[test]
    fn ode_rejects_bad_tolerance() {
        assert!(integrate_ode(|_, _, _| {}, &[ONE], 1.0, 1e-2).is_err());
        assert!(integrate_ode(|_, _, _| {}, &[ONE], 1.0, 1e-13).is_err());
    }

    #[test]
    fn ode_tighter_tolerance_is_more_accurate() {
        let err = |tol: f64| {
            let traj = integrate_ode(|_, y, dy| dy[0] = (-0.5 + 3.0 * I) * y[0], &[ONE], 4.0, tol)
                .unwrap();
            (traj.last().unwrap().y[0] - ((-0.5 + 3.0 * I) * 4.0).exp()).norm()
        };
        let mut prev = err(1e-5);
        for tol in [5e-6, 2.5e-6, 1.25e-6, 1e-8] {
            let e = err(tol);
            assert!(e <= prev, "tol {tol}: {e} > {prev}");
            prev = e;
        }
    }

    fn hermite_explicit(m: usize, x: f64) -> f64 {
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        (0..=m / 2)
            .map(|k| {
                fact(m) / (fact(k) * fact(m - 2 * k))
                    * (-1f64).powi(k as i32)
                    * (2.0 * x).powi((m - 2 * k) as i32)
            })
            .sum()
    }

    #[test]
    fn hermite_values() {
        let h = hermite_sequence(C64::new(1.0, 0.0), 3).unwrap();
        assert_eq!(h[2], C64::new(2.0, 0.0));
        let h0 = hermite_sequence(ZERO, 3).unwrap();
        assert_eq!(h0[3], ZERO);
        let h = hermite_sequence(C64::new(0.5, 0.0), 10).unwrap();
        let oracle = hermite_explicit(10, 0.5);
        assert!((h[10].re - oracle).abs() < 1e-10 * oracle.abs().max(1.0));
        assert!(hermite_sequence(ONE, 201).is_err());
        assert!(matches!(
            hermite_sequence(C64::new(1e200, 0.0), 5),
            Err(Error::HermiteOverflow { .. })
        ));
    }

    #[test]
    fn hermite_derivative_identity() {
        // H_n'(x) = 2n H_{n-1}(x)
        let x = 0.37;
        let step = 1e-6;
        let hp = hermite_sequence(C64::new(x + step, 0.0), 12).unwrap();
        let hm = hermite_sequence(C64::new(x - step, 0.0), 12).unwrap();
        let h = hermite_sequence(C64::new(x, 0.0), 12).unwrap();
        for n in 1..=12 {
            let fd = (hp[n].re - hm[n].re) / (2.0 * step);
            let exact = 2.0 * n as f64 * h[n - 1].re;
            assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "n={n}");
        }
    }
}
