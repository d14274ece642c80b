//! Dense small-matrix numerics: spectra, matrix exponentials, controllability
//! rank and continuous Lyapunov solves.
//!
//! Everything here targets desk-scale systems (n ≤ 12) and favours direct
//! dense factorizations over iterative schemes.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues of a square matrix together with the real eigenvectors of its
/// transpose.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// All eigenvalues with multiplicity; conjugate pairs are both listed.
    pub eigenvalues: Vec<Complex<f64>>,
    /// `(λ, v)` with `Aᵀv = λv`, `‖v‖ = 1`. When a real eigenvalue has a
    /// multi-dimensional eigenspace, an orthonormal basis of it is listed.
    pub real_eigenvectors: Vec<(f64, Vector)>,
}

impl Spectrum {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Real eigenspaces of `Aᵀ`, one orthonormal basis (as columns) per
    /// distinct real eigenvalue.
    pub fn real_eigenspaces(&self) -> Vec<(f64, Matrix)> {
        let mut out: Vec<(f64, Vec<Vector>)> = Vec::new();
        for (lambda, v) in &self.real_eigenvectors {
            match out.iter_mut().find(|(l, _)| l == lambda) {
                Some((_, vs)) => vs.push(v.clone()),
                None => out.push((*lambda, vec![v.clone()])),
            }
        }
        out.into_iter()
            .map(|(l, vs)| (l, Matrix::from_columns(&vs)))
            .collect()
    }
}

pub(crate) fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() && m.nrows() > 0 {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// All eigenvalues of `a`, plus unit real eigenvectors of `aᵀ` for each
/// eigenvalue whose imaginary part is at most `imag_tol`.
pub fn eigen_spectrum(a: &Matrix, imag_tol: f64) -> Result<Spectrum> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    let mut eigenvalues = schur_eigenvalues(a)?;
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    let scale = a.norm().max(1.0);
    let mut reals: Vec<f64> = eigenvalues
        .iter()
        .filter(|z| z.im.abs() <= imag_tol * z.norm().max(1.0))
        .map(|z| z.re)
        .collect();
    reals.sort_by(f64::total_cmp);

    // Cluster numerically repeated real eigenvalues.
    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for r in reals {
        match clusters.last_mut() {
            Some(c) if (r - c[c.len() - 1]).abs() <= cluster_tol => c.push(r),
            _ => clusters.push(vec![r]),
        }
    }

    let at = a.transpose();
    let mut real_eigenvectors = Vec::new();
    for cluster in clusters {
        let lambda = cluster.iter().sum::<f64>() / cluster.len() as f64;
        let shifted = &at - Matrix::identity(n, n) * lambda;
        let svd = SVD::new(shifted, false, true);
        let v_t = svd
            .v_t
            .as_ref()
            .ok_or_else(|| Error::numerical("SVD did not return right singular vectors"))?;
        let sigma_max = svd.singular_values.max().max(1.0);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
        for (k, &idx) in order.iter().enumerate().take(cluster.len()) {
            if k > 0 && svd.singular_values[idx] > 1e-8 * sigma_max {
                break;
            }
            let v: Vector = v_t.row(idx).transpose();
            let v = &v / v.norm();
            real_eigenvectors.push((lambda, v));
        }
    }

    Ok(Spectrum {
        eigenvalues,
        real_eigenvectors,
    })
}

/// Eigenvalues from the real Schur form. The QR iteration occasionally stalls
/// on highly structured inputs (the zero matrix among them); shifting by a
/// multiple of the identity moves the spectrum rigidly and usually unsticks it.
fn schur_eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let base = a.norm().max(1.0);
    for shift in [0.0, 0.5 * base, -0.37 * base, 1.3 * base] {
        let shifted = a + Matrix::identity(n, n) * shift;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, SCHUR_MAX_ITER) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| Complex::new(z.re - shift, z.im))
                .collect());
        }
    }
    Err(Error::Numerical {
        message: "Schur iteration did not converge".into(),
        iterations: Some(SCHUR_MAX_ITER),
    })
}

/// True iff every eigenvalue of `a` has real part below `-tol`.
pub fn is_hurwitz(a: &Matrix, tol: f64) -> Result<bool> {
    let spec = eigen_spectrum(a, 0.0)?;
    Ok(spec.eigenvalues.iter().all(|z| z.re < -tol))
}

// Padé-13 coefficients (Higham 2005).
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
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `e^{A t}` by scaling and squaring with a fixed degree-13 Padé approximant.
pub fn matrix_exponential(a: &Matrix, t: f64) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    if !t.is_finite() {
        return Err(Error::Argument("time must be finite".into()));
    }
    let n = a.nrows();
    let at = a * t;
    let norm = one_norm(&at);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::numerical(format!(
            "matrix exponential overflow: ‖At‖₁ = {norm:e}"
        )));
    }
    let x = at * 2f64.powi(-squarings);
    let id = Matrix::identity(n, n);
    let b = &PADE13;
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + &id * b[1];
    let u = &x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + &id * b[0];
    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::numerical("Padé denominator is singular"))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Error::numerical(format!(
            "matrix exponential overflow: ‖At‖₁ = {norm:e}"
        )))
    }
}

/// Numerical rank: singular values above `tol · σ_max`.
pub fn numerical_rank(m: &Matrix, tol: f64) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn column_space(m: &Matrix, tol: f64) -> Matrix {
    let n = m.nrows();
    if m.ncols() == 0 {
        return Matrix::zeros(n, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Matrix::zeros(n, 0);
    }
    let cols: Vec<Vector> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * smax)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(n, 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Orthonormal basis of the orthogonal complement of the column space of `m`.
pub fn left_null_space(m: &Matrix, tol: f64) -> Matrix {
    let n = m.nrows();
    let range = column_space(m, tol);
    let r = range.ncols();
    if r == n {
        return Matrix::zeros(n, 0);
    }
    let proj = Matrix::identity(n, n) - &range * range.transpose();
    let comp = column_space(&proj, 1e-8);
    comp.columns(0, (n - r).min(comp.ncols())).into_owned()
}

/// The controllability matrix `[M, AM, …, A^{n−1}M]`.
pub fn controllability_matrix(a: &Matrix, m: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    let n = a.nrows();
    if m.nrows() != n {
        return Err(Error::Dimension(format!(
            "M has {} rows, A is {n}x{n}",
            m.nrows()
        )));
    }
    let k = m.ncols();
    let mut out = Matrix::zeros(n, n * k);
    let mut block = m.clone();
    for i in 0..n {
        out.columns_mut(i * k, k).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

/// Numerical rank of the controllability matrix of `(A, M)`. An `n×0` matrix
/// yields 0.
pub fn controllability_rank(a: &Matrix, m: &Matrix, tol: f64) -> Result<usize> {
    let c = controllability_matrix(a, m)?;
    Ok(numerical_rank(&c, tol))
}

fn check_spd(q: &Matrix, what: &str) -> Result<()> {
    ensure_square(q, what)?;
    ensure_finite(q, what)?;
    let asym = (q - q.transpose()).norm();
    if asym > 1e-10 * q.norm().max(1.0) {
        return Err(Error::Precondition(format!("{what} is not symmetric")));
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if lo <= 1e-14 * hi.abs().max(f64::MIN_POSITIVE) || lo <= 0.0 {
        return Err(Error::Precondition(format!(
            "{what} is not positive definite (λ_min = {lo:e})"
        )));
    }
    Ok(())
}

/// Solves `AᵀP + PA = −Q` through the Kronecker-vectorized `n² × n²` system.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "Q is {}x{}, A is {n}x{n}",
            q.nrows(),
            q.ncols()
        )));
    }
    if !is_hurwitz(a, 0.0)? {
        return Err(Error::Precondition("A is not Hurwitz".into()));
    }
    check_spd(q, "Q")?;

    let at = a.transpose();
    let id = Matrix::identity(n, n);
    // Column-major vec: vec(AᵀP) = (I ⊗ Aᵀ) vec P, vec(PA) = (Aᵀ ⊗ I) vec P.
    let k = id.kronecker(&at) + at.kronecker(&id);
    let lu = k.lu();
    let rhs = Vector::from_iterator(n * n, q.iter().map(|v| -v));
    let mut p_vec = lu
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("Lyapunov operator is singular"))?;

    let residual = |p: &Matrix| -> Matrix { a.transpose() * p + p * a + q };
    let mut p = Matrix::from_column_slice(n, n, p_vec.as_slice());
    p = (&p + p.transpose()) * 0.5;
    // One step of iterative refinement.
    let r = residual(&p);
    let r_vec = Vector::from_iterator(n * n, r.iter().map(|v| -v));
    if let Some(delta) = lu.solve(&r_vec) {
        p_vec = Vector::from_column_slice(p.as_slice()) + delta;
        p = Matrix::from_column_slice(n, n, p_vec.as_slice());
        p = (&p + p.transpose()) * 0.5;
    }

    let res = residual(&p).norm();
    if res > 1e-8 * q.norm() {
        return Err(Error::numerical(format!(
            "Lyapunov residual {res:e} exceeds 1e-8·‖Q‖"
        )));
    }
    Ok(p)
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn symmetric_extremes(p: &Matrix) -> (f64, f64) {
    let sym = (p + p.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    (eig.eigenvalues.min(), eig.eigenvalues.max())
}

/// Upper-triangular `M` with `P = MᵀM`.
pub fn cholesky_factor(p: &Matrix) -> Result<Matrix> {
    check_spd(p, "P")?;
    let sym = (p + p.transpose()) * 0.5;
    let chol = sym
        .cholesky()
        .ok_or_else(|| Error::Precondition("P is not positive definite".into()))?;
    Ok(chol.l().transpose())
}

/// `‖x‖_P = √(xᵀPx)`.
pub fn p_norm(p: &Matrix, x: &Vector) -> Result<f64> {
    check_spd(p, "P")?;
    if x.len() != p.nrows() {
        return Err(Error::Dimension(format!(
            "x has length {}, P is {}x{}",
            x.len(),
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(quad_norm(p, x))
}

/// `√(xᵀPx)` without validating `P`.
pub(crate) fn quad_norm(p: &Matrix, x: &Vector) -> f64 {
    x.dot(&(p * x)).max(0.0).sqrt()
}
