//! Dense-matrix helpers for the oracle and verification paths.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{pauli_mul, to_dense, DMat, OperatorSum, PauliString};

pub fn identity(dim: usize) -> DMat {
    DMat::identity(dim, dim)
}

pub fn commutator(a: &DMat, b: &DMat) -> DMat {
    a * b - b * a
}

/// Largest singular value.
pub fn spectral_norm(m: &DMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `min_theta ||a - e^{i theta} b||` in the spectral norm, with theta chosen
/// as the Frobenius-optimal phase `arg tr(b^dagger a)`.
pub fn phase_aligned_residual(a: &DMat, b: &DMat) -> f64 {
    let overlap: Complex64 = b.adjoint().component_mul(&a.transpose()).sum();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    spectral_norm(&(a - b * phase))
}

/// Residual of `u^dagger u = 1`.
pub fn unitarity_defect(u: &DMat) -> f64 {
    spectral_norm(&(u.adjoint() * u - identity(u.nrows())))
}

/// `(eigenvalues ascending, eigenvectors as columns)` of a Hermitian matrix.
pub fn eigh(h: &DMat) -> (Vec<f64>, DMat) {
    let herm = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMat::from_fn(h.nrows(), h.ncols(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// `exp(-i h t)` for Hermitian `h` via eigendecomposition.
pub fn expm_hermitian(h: &DMat, t: f64) -> DMat {
    let (values, vectors) = eigh(h);
    let phases = DVector::from_iterator(
        values.len(),
        values
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * t)),
    );
    let scaled = DMat::from_fn(vectors.nrows(), vectors.ncols(), |r, c| {
        vectors[(r, c)] * phases[c]
    });
    scaled * vectors.adjoint()
}

/// `exp(-i op t)` as a Pauli sum when all terms of `op` commute: each term
/// contributes a factor `cos(c t) - i sin(c t) P`.
pub fn exp_commuting(op: &OperatorSum, t: f64) -> Result<OperatorSum> {
    let op = op.simplify();
    if !op.terms_commute() {
        return Err(Error::InvalidArgument(
            "exp_commuting requires mutually commuting terms".into(),
        ));
    }
    if op.hermiticity_defect() > 1e-12 {
        return Err(Error::InvalidArgument(
            "exp_commuting requires a Hermitian operator".into(),
        ));
    }
    let mut acc = vec![PauliString::identity(1.0)];
    for term in op.terms() {
        let angle = term.coeff.re * t;
        let unit = term.with_coeff(1.0);
        let (cos, sin) = (angle.cos(), angle.sin());
        let mut next = Vec::with_capacity(acc.len() * 2);
        for a in &acc {
            if cos.abs() >= crate::pauli::PRUNE_THRESHOLD {
                next.push(a.scaled(cos));
            }
            if sin.abs() >= crate::pauli::PRUNE_THRESHOLD {
                next.push(pauli_mul(a, &unit).scaled(Complex64::new(0.0, -sin)));
            }
        }
        acc = OperatorSum::from_terms(op.n_sites(), next)?.simplify().terms().to_vec();
    }
    OperatorSum::from_terms(op.n_sites(), acc)
}

/// Dense `exp(-i op t)`: exact Pauli-product route for commuting sums,
/// eigendecomposition otherwise.
pub fn dense_exp(op: &OperatorSum, t: f64) -> Result<DMat> {
    match exp_commuting(op, t) {
        Ok(u) => to_dense(&u),
        Err(_) => Ok(expm_hermitian(&to_dense(op)?, t)),
    }
}

/// Conjugation `g a g^{-1}` for unitary `g`.
pub fn conjugate(g: &DMat, a: &DMat) -> DMat {
    g * a * g.adjoint()
}

/// Real symmetric tridiagonal exponential column: `exp(-i t T) e_1` where `T`
/// has diagonal `alpha` and off-diagonal `beta`.
pub fn tridiagonal_exp_first_column(alpha: &[f64], beta: &[f64], t: f64) -> Vec<Complex64> {
    let k = alpha.len();
    let mut tri = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        tri[(i, i)] = alpha[i];
        if i + 1 < k {
            tri[(i, i + 1)] = beta[i];
            tri[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(tri);
    (0..k)
        .map(|r| {
            (0..k)
                .map(|c| {
                    let v = eig.eigenvectors[(r, c)] * eig.eigenvectors[(0, c)];
                    Complex64::from_polar(v, -eig.eigenvalues[c] * t)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::Pauli::*;

    #[test]
    fn commuting_exponential_matches_eigendecomposition() {
        let op = OperatorSum::from_terms(
            3,
            vec![
                PauliString::new(0.7, &[(0, Z), (1, Z)]),
                PauliString::new(-1.3, &[(1, X), (2, X)]).scaled(0.0),
                PauliString::new(0.4, &[(2, Z)]),
                PauliString::new(1.1, &[(0, X), (1, X)]),
            ],
        )
        .unwrap();
        let exact = dense_exp(&op, 0.9).unwrap();
        let oracle = expm_hermitian(&to_dense(&op).unwrap(), 0.9);
        assert!((exact - oracle).norm() < 1e-12);
    }

    #[test]
    fn phase_alignment_removes_global_phase() {
        let a = expm_hermitian(
            &to_dense(&OperatorSum::from_terms(2, vec![PauliString::new(0.3, &[(0, X), (1, Y)])]).unwrap())
                .unwrap(),
            1.0,
        );
        let b = &a * Complex64::from_polar(1.0, 0.77);
        assert!(phase_aligned_residual(&a, &b) < 1e-13);
        assert!(phase_aligned_residual(&a, &identity(4)) > 0.1);
    }

    #[test]
    fn tridiagonal_exponential_is_unit_norm() {
        let col = tridiagonal_exp_first_column(&[0.3, -1.0, 2.0], &[0.5, 0.8], 1.7);
        let n: f64 = col.iter().map(|c| c.norm_sqr()).sum();
        assert!((n - 1.0).abs() < 1e-13);
    }
}
