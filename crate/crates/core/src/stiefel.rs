//! Geometry of the Stiefel manifold: orthonormal bases, principal angles,
//! subspace distances, dominant invariant subspaces and uniform random bases.
//!
//! All comparisons between subspaces go through [`principal_angles`] or
//! [`subspace_sq_distance`]; entrywise matrix equality is never meaningful
//! because a subspace has many orthonormal bases.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance for the orthonormality check `H^T H = I`.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Tolerance for the symmetry check of eigendecomposition inputs.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// An M x R real matrix with orthonormal columns (a point on the Stiefel
/// manifold). The invariant `H^T H = I_R` is checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalBasis {
    entries: DMatrix<f64>,
}

impl OrthonormalBasis {
    /// Wraps a matrix after checking `H^T H = I` to within
    /// [`ORTHONORMALITY_TOL`] in max absolute entry.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (m, r) = (entries.nrows(), entries.ncols());
        if m == 0 || r == 0 || r > m {
            return Err(Error::InvalidArgument(format!(
                "basis must be M x R with 1 <= R <= M, got {m} x {r}"
            )));
        }
        let gram = entries.transpose() * &entries;
        let dev = (&gram - DMatrix::<f64>::identity(r, r)).amax();
        if dev > ORTHONORMALITY_TOL {
            return Err(Error::NotOrthonormal {
                max_dev: dev,
                tol: ORTHONORMALITY_TOL,
            });
        }
        Ok(Self { entries })
    }

    /// Ambient dimension M.
    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    /// Subspace dimension R.
    pub fn r(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The orthogonal projector `H H^T` onto the spanned subspace.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.entries * self.entries.transpose()
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }
}

/// The canonical angles between two R-dimensional subspaces, in radians,
/// sorted non-decreasing, each in [0, pi/2].
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles {
    radians: Vec<f64>,
}

impl PrincipalAngles {
    pub fn radians(&self) -> &[f64] {
        &self.radians
    }

    pub fn degrees(&self) -> Vec<f64> {
        self.radians.iter().map(|a| a.to_degrees()).collect()
    }

    pub fn len(&self) -> usize {
        self.radians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radians.is_empty()
    }
}

fn check_same_shape(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<()> {
    if u.m() != v.m() || u.r() != v.r() {
        return Err(Error::DimensionMismatch(format!(
            "bases are {}x{} and {}x{}",
            u.m(),
            u.r(),
            v.m(),
            v.r()
        )));
    }
    Ok(())
}

/// Principal angles between `span(U)` and `span(V)`: the arccosines of the
/// singular values of `U^T V`, clamped to [0, 1] against rounding.
pub fn principal_angles(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<PrincipalAngles> {
    check_same_shape(u, v)?;
    let cross = u.matrix().transpose() * v.matrix();
    let svd = cross.svd(false, false);
    let mut radians: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| s.clamp(0.0, 1.0).acos())
        .collect();
    radians.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
    Ok(PrincipalAngles { radians })
}

/// Squared projection distance `R - ||U^T V||_F^2 = sum_r sin^2(theta_r)`.
/// Symmetric in its arguments and confined to [0, R].
pub fn subspace_sq_distance(u: &OrthonormalBasis, v: &OrthonormalBasis) -> Result<f64> {
    check_same_shape(u, v)?;
    let cross = u.matrix().transpose() * v.matrix();
    let d = u.r() as f64 - cross.norm_squared();
    // Rounding can push the exact-zero case a hair negative.
    Ok(d.max(0.0))
}

/// Eigenvalues and eigenvectors of a symmetric matrix, sorted by eigenvalue
/// in decreasing order.
pub(crate) fn symmetric_eigen_desc(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub(crate) fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let dev = (a - a.transpose()).amax();
    if dev > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            max_dev: dev,
            tol: SYMMETRY_TOL,
        });
    }
    Ok(())
}

/// Basis of the invariant subspace of the R algebraically largest eigenvalues
/// of a symmetric matrix. When the R-th and (R+1)-th eigenvalues tie, any
/// valid invariant-subspace basis may be returned; compare results through
/// subspace distances only.
pub fn principal_subspace(a: &DMatrix<f64>, r: usize) -> Result<OrthonormalBasis> {
    check_symmetric(a)?;
    let m = a.nrows();
    if r == 0 || r > m {
        return Err(Error::InvalidArgument(format!(
            "subspace dimension R={r} must satisfy 1 <= R <= M={m}"
        )));
    }
    let sym = (a + a.transpose()) * 0.5;
    let (_, vectors) = symmetric_eigen_desc(&sym);
    OrthonormalBasis::new(vectors.columns(0, r).into_owned())
}

/// Q factor of the QR factorization with the sign convention that the
/// diagonal of the triangular factor is positive. Applied to a matrix of
/// i.i.d. standard normals this yields the exact uniform distribution on the
/// Stiefel manifold.
pub(crate) fn qr_positive(g: DMatrix<f64>) -> DMatrix<f64> {
    let r_cols = g.ncols();
    let qr = g.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..r_cols {
        if rr[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Draws a basis uniformly distributed on the Stiefel manifold of M x R
/// matrices with orthonormal columns.
pub fn uniform_stiefel<RNG: Rng + ?Sized>(
    m: usize,
    r: usize,
    rng: &mut RNG,
) -> Result<OrthonormalBasis> {
    if m == 0 || r == 0 || r > m {
        return Err(Error::InvalidArgument(format!(
            "requested an {m} x {r} basis; need 1 <= R <= M"
        )));
    }
    let g = DMatrix::from_fn(m, r, |_, _| rng.sample::<f64, _>(StandardNormal));
    OrthonormalBasis::new(qr_positive(g))
}

/// Extends `cols` (orthonormal M-vectors) to `r` orthonormal columns by
/// orthogonalizing standard basis vectors against the current set.
/// Deterministic; used to complete rank-deficient estimates.
pub(crate) fn complete_orthonormal(mut cols: Vec<DVector<f64>>, m: usize, r: usize) -> DMatrix<f64> {
    let mut e = 0;
    while cols.len() < r && e < m {
        let mut v = DVector::zeros(m);
        v[e] = 1.0;
        for c in &cols {
            let proj = c.dot(&v);
            v -= c * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v / n);
        }
        e += 1;
    }
    assert!(cols.len() == r, "orthonormal completion exhausted basis");
    DMatrix::from_columns(&cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_from_cols(m: usize, cols: &[Vec<f64>]) -> OrthonormalBasis {
        let mat = DMatrix::from_fn(m, cols.len(), |i, j| cols[j][i]);
        OrthonormalBasis::new(mat).unwrap()
    }

    fn e(m: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        v
    }

    #[test]
    fn constructor_rejects_non_orthonormal() {
        let mat = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            OrthonormalBasis::new(mat),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    #[test]
    fn angles_of_identical_subspaces_are_zero() {
        let u = basis_from_cols(4, &[e(4, 0), e(4, 1)]);
        let angles = principal_angles(&u, &u).unwrap();
        for &a in angles.radians() {
            assert!(a.abs() < 1e-12, "angle {a} should be 0");
        }
    }

    #[test]
    fn planted_rotation_recovers_angles() {
        // V = span{e1, cos(25deg) e2 + sin(25deg) e3}: cross-Gram is
        // diag(1, cos 25deg), so the angles are exactly {0, 25deg}.
        let theta = 25.0f64.to_radians();
        let u = basis_from_cols(4, &[e(4, 0), e(4, 1)]);
        let mut v2 = vec![0.0; 4];
        v2[1] = theta.cos();
        v2[2] = theta.sin();
        let v = basis_from_cols(4, &[e(4, 0), v2]);
        let angles = principal_angles(&u, &v).unwrap();
        assert!((angles.radians()[0] - 0.0).abs() < 1e-12);
        assert!((angles.radians()[1] - theta).abs() < 1e-12);

        // Distance equals sin^2(25deg) ~ 0.17861 for the same pair.
        let d = subspace_sq_distance(&u, &v).unwrap();
        assert!((d - theta.sin().powi(2)).abs() < 1e-12, "d = {d}");
    }

    #[test]
    fn orthogonal_subspaces_hit_right_angles() {
        let u = basis_from_cols(4, &[e(4, 0), e(4, 1)]);
        let v = basis_from_cols(4, &[e(4, 2), e(4, 3)]);
        let angles = principal_angles(&u, &v).unwrap();
        for &a in angles.radians() {
            assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        let d = subspace_sq_distance(&u, &v).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let u = basis_from_cols(4, &[e(4, 0), e(4, 1)]);
        let v = basis_from_cols(3, &[e(3, 0), e(3, 1)]);
        assert!(principal_angles(&u, &v).is_err());
        assert!(subspace_sq_distance(&u, &v).is_err());
    }

    #[test]
    fn principal_subspace_diagonal_case() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let top = principal_subspace(&a, 2).unwrap();
        let expect = basis_from_cols(3, &[e(3, 0), e(3, 1)]);
        assert!(subspace_sq_distance(&top, &expect).unwrap() < 1e-12);
    }

    #[test]
    fn principal_subspace_of_projector_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = uniform_stiefel(6, 3, &mut rng).unwrap();
        let top = principal_subspace(&h.projector(), 3).unwrap();
        assert!(subspace_sq_distance(&top, &h).unwrap() < 1e-10);
    }

    #[test]
    fn principal_subspace_matches_full_eigendecomposition() {
        // Independent oracle: take all eigenpairs of a random symmetric
        // matrix, keep the top three by eigenvalue, compare subspaces.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = DMatrix::from_fn(6, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = (&g + g.transpose()) * 0.5;
        let result = principal_subspace(&a, 3).unwrap();

        let eig = nalgebra::SymmetricEigen::new(a.clone());
        let mut pairs: Vec<(f64, DVector<f64>)> = (0..6)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect();
        pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
        let cols: Vec<DVector<f64>> = pairs.into_iter().take(3).map(|(_, v)| v).collect();
        let oracle = OrthonormalBasis::new(DMatrix::from_columns(&cols)).unwrap();

        assert!(subspace_sq_distance(&result, &oracle).unwrap() < 1e-8);
    }

    #[test]
    fn principal_subspace_rejects_asymmetric_input() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            principal_subspace(&a, 1),
            Err(Error::NotSymmetric { .. })
        ));
        let id = DMatrix::<f64>::identity(3, 3);
        assert!(principal_subspace(&id, 4).is_err());
    }

    #[test]
    fn eigenvalue_shift_leaves_principal_subspace_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let g = DMatrix::from_fn(5, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = (&g + g.transpose()) * 0.5;
        let shifted = &a + DMatrix::identity(5, 5) * 17.5;
        let p1 = principal_subspace(&a, 2).unwrap();
        let p2 = principal_subspace(&shifted, 2).unwrap();
        assert!(subspace_sq_distance(&p1, &p2).unwrap() < 1e-8);
    }

    #[test]
    fn uniform_stiefel_is_orthonormal_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = uniform_stiefel(5, 3, &mut rng).unwrap();
        let gram = h.matrix().transpose() * h.matrix();
        assert!((gram - DMatrix::<f64>::identity(3, 3)).amax() < 1e-10);

        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        let h2 = uniform_stiefel(5, 3, &mut rng2).unwrap();
        assert_eq!(h.matrix(), h2.matrix());
    }

    #[test]
    fn uniform_stiefel_one_dimensional_signs_are_balanced() {
        // M = R = 1: the draw is +-1; a two-sided binomial test at the 1%
        // level over 10^4 draws allows |#plus - 5000| <= 2.576 * 50 ~ 129.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut plus = 0i64;
        for _ in 0..10_000 {
            let h = uniform_stiefel(1, 1, &mut rng).unwrap();
            let x = h.matrix()[(0, 0)];
            assert!((x.abs() - 1.0).abs() < 1e-12);
            if x > 0.0 {
                plus += 1;
            }
        }
        assert!((plus - 5000).abs() <= 129, "plus count {plus}");
    }

    #[test]
    fn uniform_stiefel_second_moment_matches_theory() {
        // E[H H^T] = (R/M) I for the uniform distribution; Monte Carlo check
        // at M=4, R=2 over 10^5 draws, 0.01 per entry.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut mean = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..n {
            mean += uniform_stiefel(4, 2, &mut rng).unwrap().projector();
        }
        mean /= n as f64;
        let dev = (&mean - DMatrix::<f64>::identity(4, 4) * 0.5).amax();
        assert!(dev < 0.01, "max deviation {dev}");
    }

    #[test]
    fn distance_is_symmetric_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = uniform_stiefel(6, 2, &mut rng).unwrap();
            let v = uniform_stiefel(6, 2, &mut rng).unwrap();
            let duv = subspace_sq_distance(&u, &v).unwrap();
            let dvu = subspace_sq_distance(&v, &u).unwrap();
            assert!((duv - dvu).abs() < 1e-12);
            assert!((0.0..=2.0 + 1e-12).contains(&duv));
        }
    }

    #[test]
    fn distance_equals_sum_of_squared_sines() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let u = uniform_stiefel(7, 3, &mut rng).unwrap();
            let v = uniform_stiefel(7, 3, &mut rng).unwrap();
            let d = subspace_sq_distance(&u, &v).unwrap();
            let s: f64 = principal_angles(&u, &v)
                .unwrap()
                .radians()
                .iter()
                .map(|a| a.sin().powi(2))
                .sum();
            assert!((d - s).abs() < 1e-9, "d = {d}, sum sin^2 = {s}");
        }
    }

    #[test]
    fn angles_ignore_basis_choice_within_subspace() {
        // Right-multiplying by an R x R orthogonal matrix changes only the
        // basis, not the subspace.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = uniform_stiefel(6, 2, &mut rng).unwrap();
        let v = uniform_stiefel(6, 2, &mut rng).unwrap();
        let q = uniform_stiefel(2, 2, &mut rng).unwrap();
        let vq = OrthonormalBasis::new(v.matrix() * q.matrix()).unwrap();
        let a1 = principal_angles(&u, &v).unwrap();
        let a2 = principal_angles(&u, &vq).unwrap();
        for (x, y) in a1.radians().iter().zip(a2.radians()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn completion_extends_partial_basis() {
        let cols = vec![DVector::from_vec(vec![0.0, 1.0, 0.0])];
        let full = complete_orthonormal(cols, 3, 3);
        let gram = full.transpose() * &full;
        assert!((gram - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);
    }
}
