//! Initial states.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::eigh;
use crate::error::{Error, Result};
use crate::ladder::{closed_form_d0, lower, upper, LadderConfig};
use crate::pauli::{to_dense, StateVector};

/// Qubit count above which [`d0_eigenstate`] refuses to diagonalize.
pub const EIGENSTATE_QUBITS: usize = 12;

/// Rung-antiparallel Neel state: `S_i` up for even `i`, down for odd `i`,
/// and `sigma_i` opposite to `S_i`.
pub fn neel_state(cfg: &LadderConfig) -> Result<StateVector> {
    cfg.validate()?;
    let mut index = 0usize;
    for i in 0..cfg.l {
        if i % 2 == 1 {
            index |= 1 << upper(i);
        } else {
            index |= 1 << lower(i);
        }
    }
    StateVector::basis(cfg.n_spins(), index)
}

/// Independent Haar-random single-qubit states from a seeded ChaCha8 stream.
pub fn random_product_state(n_sites: usize, seed: u64) -> Result<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qubits: Vec<(Complex64, Complex64)> = (0..n_sites)
        .map(|_| {
            let cos_theta = 1.0 - 2.0 * rng.random::<f64>();
            let phi = 2.0 * PI * rng.random::<f64>();
            let half = cos_theta.clamp(-1.0, 1.0).acos() / 2.0;
            (Complex64::new(half.cos(), 0.0), Complex64::from_polar(half.sin(), phi))
        })
        .collect();
    StateVector::product(&qubits)
}

/// Basis state from a bit string written qubit 0 first, e.g. `"0110"`.
pub fn basis_from_bits(bits: &str) -> Result<StateVector> {
    let mut index = 0usize;
    for (q, ch) in bits.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => index |= 1 << q,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "bit string may only contain 0 and 1, found {other:?}"
                )))
            }
        }
    }
    StateVector::basis(bits.len(), index)
}

/// The `index`-th eigenvector (ascending energy) of the closed-form `D_0`.
pub fn d0_eigenstate(cfg: &LadderConfig, index: usize) -> Result<StateVector> {
    if cfg.n_spins() > EIGENSTATE_QUBITS {
        return Err(Error::SizeGuard {
            what: "d0_eigenstate",
            n_sites: cfg.n_spins(),
            limit: EIGENSTATE_QUBITS,
        });
    }
    let d0 = to_dense(&closed_form_d0(cfg)?)?;
    let (values, vectors) = eigh(&d0);
    if index >= values.len() {
        return Err(Error::InvalidArgument(format!(
            "eigenstate index {index} exceeds dimension {}",
            values.len()
        )));
    }
    let mut psi = StateVector::from_column(cfg.n_spins(), &vectors.column(index).into_owned())?;
    psi.normalize();
    Ok(psi)
}
