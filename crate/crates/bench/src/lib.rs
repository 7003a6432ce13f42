//! Shared fixtures for the benchmarks.

use floquet_core::ladder::build_protocol;
use floquet_core::{states, DriveProtocol, LadderConfig, StateVector};

/// Ladder with the reference couplings at `J / Omega = 0.026`.
pub fn reference_ladder(l: usize) -> LadderConfig {
    LadderConfig::reference(l, 1.0 / 0.026)
}

pub fn fixture(l: usize) -> (LadderConfig, DriveProtocol, StateVector) {
    let cfg = reference_ladder(l);
    let protocol = build_protocol(&cfg).expect("reference ladder is valid");
    let psi = states::random_product_state(cfg.n_spins(), 1).expect("valid size");
    (cfg, protocol, psi)
}
