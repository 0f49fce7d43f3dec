//! Dense complex matrix helpers shared by every other module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Vectorization is column
//! stacking throughout, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Reciprocal condition number below which a matrix is treated as singular.
pub const SINGULAR_RCOND: f64 = 1e-14;

/// Smallest reciprocal condition number accepted for the lifted Sylvester system.
pub const SYLVESTER_RCOND: f64 = 1e-13;

/// Discriminant threshold factor selecting the defective branch of [`jordan_2x2`].
pub const JORDAN_DEFECTIVE_TOL: f64 = 1e-9;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Builds a matrix from row-major nested rows, rejecting ragged or empty input.
pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Dimension("matrix must have at least one row and column".into()));
    }
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    let m = ComplexMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m)?;
    Ok(m)
}

/// Row-major real entries, for compact literals in tests and presets.
pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count mismatch");
    ComplexMatrix::from_fn(rows, cols, |i, j| c64(entries[i * cols + j], 0.0))
}

/// Row-major complex entries.
pub fn from_complex(rows: usize, cols: usize, entries: &[Complex64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count mismatch");
    ComplexMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j])
}

pub fn ensure_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn ensure_square(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.nrows() == m.ncols() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Largest entry modulus.
pub fn norm_max(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Induced 1-norm (largest column sum).
pub fn norm_one(m: &ComplexMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_fro(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec_cols(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_cols`].
pub fn unvec(v: &ComplexVector, rows: usize, cols: usize) -> ComplexMatrix {
    assert_eq!(v.len(), rows * cols, "unvec length mismatch");
    ComplexMatrix::from_column_slice(rows, cols, v.as_slice())
}

pub fn det(m: &ComplexMatrix) -> Result<Complex64> {
    ensure_square(m, "determinant argument")?;
    Ok(m.clone().determinant())
}

/// Inverse through LU with a reciprocal-condition check.
pub fn inverse(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m, "inverse argument")?;
    let inv = m.clone().lu().try_inverse().ok_or(Error::SingularMatrix)?;
    let rc = rcond_with_inverse(m, &inv);
    if !(rc >= SINGULAR_RCOND) {
        return Err(Error::SingularMatrix);
    }
    ensure_finite(&inv).map_err(|_| Error::SingularMatrix)?;
    Ok(inv)
}

/// 1-norm reciprocal condition number, `1 / (‖M‖₁ ‖M⁻¹‖₁)`; zero when singular.
pub fn rcond(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return 0.0;
    }
    match m.clone().lu().try_inverse() {
        Some(inv) => rcond_with_inverse(m, &inv),
        None => 0.0,
    }
}

fn rcond_with_inverse(m: &ComplexMatrix, inv: &ComplexMatrix) -> f64 {
    let denom = norm_one(m) * norm_one(inv);
    if denom.is_finite() && denom > 0.0 {
        1.0 / denom
    } else {
        0.0
    }
}

/// Solves `M x = b` for a square `M`.
pub fn solve(m: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m, "system matrix")?;
    if m.nrows() != b.nrows() {
        return Err(Error::Dimension("right-hand side row count mismatch".into()));
    }
    if rcond(m) < SINGULAR_RCOND {
        return Err(Error::SingularMatrix);
    }
    m.clone().lu().solve(b).ok_or(Error::SingularMatrix)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn mat_exp(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    ensure_square(m, "matrix exponential argument")?;
    ensure_finite(m)?;
    let n = m.nrows();
    let norm = norm_one(m);
    // Scale until ‖M / 2^s‖₁ ≤ 1/2; the series then converges in ≤ 20 terms.
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * c64(0.5f64.powi(squarings), 0.0);

    let mut result = identity(n);
    let mut term = identity(n);
    for k in 1..=40 {
        term = &term * &scaled * c64(1.0 / k as f64, 0.0);
        result += &term;
        if norm_one(&term) <= f64::EPSILON * 0.25 * norm_one(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    ensure_finite(&result)?;
    Ok(result)
}

/// Solves `A X + X A_z = Q` through the lifted system `(I ⊗ A + A_zᵀ ⊗ I) vec X = vec Q`.
pub fn solve_sylvester(
    a: &ComplexMatrix,
    a_z: &ComplexMatrix,
    q: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    SylvesterSolver::new(a, a_z)?.solve(q)
}

/// Factorized lifted Sylvester operator for repeated solves with fixed `A`, `A_z`.
#[derive(Debug, Clone)]
pub struct SylvesterSolver {
    n: usize,
    m: usize,
    lifted: ComplexMatrix,
    lifted_inv: ComplexMatrix,
}

impl SylvesterSolver {
    pub fn new(a: &ComplexMatrix, a_z: &ComplexMatrix) -> Result<Self> {
        ensure_square(a, "A")?;
        ensure_square(a_z, "A_zeta")?;
        let (n, m) = (a.nrows(), a_z.nrows());
        let lifted = kron(&identity(m), a) + kron(&a_z.transpose(), &identity(n));
        let lifted_inv = lifted.clone().lu().try_inverse().ok_or(Error::SpectraOverlap)?;
        if rcond_with_inverse(&lifted, &lifted_inv) < SYLVESTER_RCOND {
            return Err(Error::SpectraOverlap);
        }
        Ok(Self { n, m, lifted, lifted_inv })
    }

    pub fn solve(&self, q: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (n, m) = (self.n, self.m);
        if q.nrows() != n || q.ncols() != m {
            return Err(Error::Dimension(format!(
                "Sylvester right-hand side must be {n}x{m}, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        let rhs = vec_cols(q);
        let mut x = &self.lifted_inv * &rhs;
        // One step of iterative refinement.
        let r = &rhs - &self.lifted * &x;
        x += &self.lifted_inv * r;
        let sol = unvec(&x, n, m);
        ensure_finite(&sol).map_err(|_| Error::SpectraOverlap)?;
        Ok(sol)
    }
}

/// `M = V J V⁻¹` for a 2×2 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Jordan2 {
    pub v: ComplexMatrix,
    pub j: ComplexMatrix,
    pub defective: bool,
}

impl Jordan2 {
    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        (self.j[(0, 0)], self.j[(1, 1)])
    }
}

fn lex_greater_eq(a: Complex64, b: Complex64) -> bool {
    a.re > b.re || (a.re == b.re && a.im >= b.im)
}

// Scale so the entry of largest modulus (first on ties) equals one.
fn normalize_by_largest(v: [Complex64; 2]) -> [Complex64; 2] {
    let pivot = if v[1].norm() > v[0].norm() { v[1] } else { v[0] };
    [v[0] / pivot, v[1] / pivot]
}

/// Jordan decomposition of a 2×2 matrix.
///
/// Eigenvalues are ordered lexicographically on `(Re, Im)`, larger first.
/// When `|tr² − 4 det| < 1e−9 (1 + ‖M‖²)` the defective form
/// `[[λ, 1], [0, λ]]` is returned, unless `M` is already scalar.
pub fn jordan_2x2(m: &ComplexMatrix) -> Result<Jordan2> {
    if m.nrows() != 2 || m.ncols() != 2 {
        return Err(Error::Dimension("jordan_2x2 expects a 2x2 matrix".into()));
    }
    ensure_finite(m)?;
    let (m11, m12, m21, m22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = m11 + m22;
    let det = m11 * m22 - m12 * m21;
    let disc = tr * tr - det * c64(4.0, 0.0);
    let scale = norm_fro(m);

    if disc.norm() < JORDAN_DEFECTIVE_TOL * (1.0 + scale * scale) {
        let lambda = tr * 0.5;
        let nil = m - identity(2) * lambda;
        let col0 = nil.column(0).norm();
        let col1 = nil.column(1).norm();
        if col0.max(col1) <= 1e-12 * (1.0 + scale) {
            return Ok(Jordan2 {
                v: identity(2),
                j: identity(2) * lambda,
                defective: false,
            });
        }
        // Generalized eigenvector e_k on the larger column; chain vector N e_k.
        let k = if col1 > col0 { 1 } else { 0 };
        let mut v = zeros(2, 2);
        v[(0, 0)] = nil[(0, k)];
        v[(1, 0)] = nil[(1, k)];
        v[(k, 1)] = c64(1.0, 0.0);
        let mut j = identity(2) * lambda;
        j[(0, 1)] = c64(1.0, 0.0);
        return Ok(Jordan2 { v, j, defective: true });
    }

    let root = disc.sqrt();
    let mut l1 = (tr + root) * 0.5;
    let mut l2 = (tr - root) * 0.5;
    if !lex_greater_eq(l1, l2) {
        std::mem::swap(&mut l1, &mut l2);
    }
    let eigvec = |l: Complex64| {
        let a = [m12, l - m11];
        let b = [l - m22, m21];
        let na = a[0].norm_sqr() + a[1].norm_sqr();
        let nb = b[0].norm_sqr() + b[1].norm_sqr();
        normalize_by_largest(if nb > na { b } else { a })
    };
    let (v1, v2) = (eigvec(l1), eigvec(l2));
    let v = from_complex(2, 2, &[v1[0], v2[0], v1[1], v2[1]]);
    let mut j = zeros(2, 2);
    j[(0, 0)] = l1;
    j[(1, 1)] = l2;
    Ok(Jordan2 { v, j, defective: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(r, c, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        norm_max(&(a - b))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(mat_exp(&zeros(2, 2)).unwrap(), identity(2));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])).unwrap();
        assert_relative_eq!(e[(0, 0)].re, std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(e[(1, 1)].re, 1.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_eq!(e[(0, 1)], c64(0.0, 0.0));
    }

    #[test]
    fn exp_of_nilpotent_truncates() {
        let e = mat_exp(&from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(diff(&e, &from_real(2, 2, &[1.0, 1.0, 0.0, 1.0])) < 1e-15);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(mat_exp(&zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn exp_matches_pade_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            let m = random_matrix(&mut rng, n, n) * c64(3.0, 0.0);
            let ours = mat_exp(&m).unwrap();
            let oracle = m.clone().exp();
            assert!(diff(&ours, &oracle) <= 1e-12 * norm_max(&oracle), "n={n}");
        }
    }

    #[test]
    fn exp_of_commuting_sum_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_matrix(&mut rng, 3, 3);
        let q = &p * &p * c64(0.3, 0.1) + identity(3) * c64(0.5, -0.2);
        let lhs = mat_exp(&(&p + &q)).unwrap();
        let rhs = mat_exp(&p).unwrap() * mat_exp(&q).unwrap();
        assert!(diff(&lhs, &rhs) <= 1e-12 * norm_max(&lhs));
    }

    #[test]
    fn exp_similarity_and_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 3, 3);
            let v = random_matrix(&mut rng, 3, 3) + identity(3) * c64(3.0, 0.0);
            let vinv = inverse(&v).unwrap();
            let lhs = mat_exp(&(&v * &m * &vinv)).unwrap();
            let rhs = &v * mat_exp(&m).unwrap() * &vinv;
            assert!(diff(&lhs, &rhs) <= 1e-10 * norm_max(&rhs));
            let d = det(&mat_exp(&m).unwrap()).unwrap();
            let expected = trace(&m).exp();
            assert!((d - expected).norm() <= 1e-10 * expected.norm());
        }
    }

    #[test]
    fn sylvester_scalar() {
        let x = solve_sylvester(
            &from_real(1, 1, &[2.0]),
            &from_real(1, 1, &[3.0]),
            &from_real(1, 1, &[10.0]),
        )
        .unwrap();
        assert_relative_eq!(x[(0, 0)].re, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn sylvester_zero_rhs() {
        let x = solve_sylvester(
            &from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]),
            &from_real(2, 2, &[3.0, 0.0, 0.0, 4.0]),
            &zeros(2, 2),
        )
        .unwrap();
        assert_eq!(x, zeros(2, 2));
    }

    #[test]
    fn sylvester_diagonal_seeded() {
        // Oracle: Gaussian elimination on the 4x4 lifted system, no pivot reuse.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let q = random_matrix(&mut rng, 2, 2);
        let a = from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let az = from_real(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        let x = solve_sylvester(&a, &az, &q).unwrap();
        // Diagonal A and A_z decouple entrywise: x_ij = q_ij / (a_i + az_j).
        let expected = ComplexMatrix::from_fn(2, 2, |i, j| q[(i, j)] / ((i + 1 + j + 3) as f64));
        assert!(diff(&x, &expected) < 1e-15);
        let elim = gaussian_lifted(&a, &az, &q);
        assert!(diff(&x, &elim) < 1e-14);
    }

    fn gaussian_lifted(a: &ComplexMatrix, az: &ComplexMatrix, q: &ComplexMatrix) -> ComplexMatrix {
        let n = a.nrows();
        let size = n * n;
        let mut aug = vec![vec![c64(0.0, 0.0); size + 1]; size];
        for jj in 0..n {
            for ii in 0..n {
                let row = jj * n + ii;
                for k in 0..n {
                    aug[row][jj * n + k] += a[(ii, k)];
                    aug[row][k * n + ii] += az[(k, jj)];
                }
                aug[row][size] = q[(ii, jj)];
            }
        }
        for col in 0..size {
            let p = (col..size)
                .max_by(|&r1, &r2| aug[r1][col].norm().total_cmp(&aug[r2][col].norm()))
                .unwrap();
            aug.swap(col, p);
            for r in 0..size {
                if r != col {
                    let f = aug[r][col] / aug[col][col];
                    for c in col..=size {
                        let v = aug[col][c];
                        aug[r][c] -= f * v;
                    }
                }
            }
        }
        ComplexMatrix::from_fn(n, n, |i, j| aug[j * n + i][size] / aug[j * n + i][j * n + i])
    }

    #[test]
    fn sylvester_matches_elimination_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 1..=4 {
            for _ in 0..5 {
                let a = random_matrix(&mut rng, n, n) + identity(n) * c64(2.0, 0.0);
                let az = random_matrix(&mut rng, n, n) + identity(n) * c64(2.0, 0.0);
                let q = random_matrix(&mut rng, n, n);
                let x = solve_sylvester(&a, &az, &q).unwrap();
                assert!(diff(&x, &gaussian_lifted(&a, &az, &q)) <= 1e-10 * (1.0 + norm_max(&x)));
                let res = norm_max(&(&a * &x + &x * &az - &q));
                let bound = 1e-12
                    * (norm_max(&a) * norm_max(&x) + norm_max(&x) * norm_max(&az) + norm_max(&q));
                assert!(res <= bound * n as f64, "residual {res} bound {bound}");
            }
        }
    }

    #[test]
    fn sylvester_spectra_overlap() {
        let a = from_real(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let az = from_real(2, 2, &[-2.0, 0.0, 0.0, 5.0]);
        assert!(matches!(
            solve_sylvester(&a, &az, &identity(2)),
            Err(Error::SpectraOverlap)
        ));
    }

    fn check_jordan(m: &ComplexMatrix, jd: &Jordan2, tol: f64) {
        let rec = &jd.v * &jd.j * inverse(&jd.v).unwrap();
        assert!(diff(&rec, m) <= tol * norm_fro(m).max(1e-300), "{m} vs {rec}");
    }

    #[test]
    fn jordan_diagonal_input() {
        let m = from_real(2, 2, &[5.0, 0.0, 0.0, 3.0]);
        let jd = jordan_2x2(&m).unwrap();
        assert_eq!(jd.v, identity(2));
        assert_eq!(jd.j, m);
        assert!(!jd.defective);
    }

    #[test]
    fn jordan_pauli_y() {
        let i = c64(0.0, 1.0);
        let m = from_complex(2, 2, &[c64(0.0, 0.0), i, -i, c64(0.0, 0.0)]);
        let jd = jordan_2x2(&m).unwrap();
        assert!(diff(&jd.j, &from_real(2, 2, &[1.0, 0.0, 0.0, -1.0])) < 1e-15);
        check_jordan(&m, &jd, 1e-10);
    }

    #[test]
    fn jordan_defective_block() {
        let m = from_real(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        let jd = jordan_2x2(&m).unwrap();
        assert!(jd.defective);
        assert_eq!(jd.v, identity(2));
        assert_eq!(jd.j, m);
    }

    #[test]
    fn jordan_near_defective_reconstructs() {
        let m = from_complex(
            2,
            2,
            &[c64(1.0, 0.5), c64(0.7, -0.2), c64(1e-12, 0.0), c64(1.0, 0.5)],
        );
        let jd = jordan_2x2(&m).unwrap();
        assert!(jd.defective);
        check_jordan(&m, &jd, 1e-8);
    }

    #[test]
    fn jordan_random_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let m = random_matrix(&mut rng, 2, 2);
            let jd = jordan_2x2(&m).unwrap();
            check_jordan(&m, &jd, 1e-10);
            let (l1, l2) = jd.eigenvalues();
            assert!(lex_greater_eq(l1, l2));
        }
    }

    #[test]
    fn vec_convention() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 2);
        let x = random_matrix(&mut rng, 2, 4);
        let b = random_matrix(&mut rng, 4, 2);
        let lhs = vec_cols(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec_cols(&x);
        assert!(norm_max(&unvec(&(lhs - rhs), 3, 2)) < 1e-13);
        assert_eq!(unvec(&vec_cols(&x), 2, 4), x);
    }

    #[test]
    fn singular_inverse_rejected() {
        let m = from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(inverse(&m), Err(Error::SingularMatrix)));
        assert_eq!(rcond(&zeros(2, 2)), 0.0);
    }
}
