//! The four-step driven two-leg ladder.
//!
//! Sites are laid out rung-major: qubit `2i` carries the upper-chain spin
//! `S_i`, qubit `2i + 1` the lower-chain spin `sigma_i`. Spin operators are
//! Pauli matrices (eigenvalues +-1), so `J_1 tau T = pi/2` turns every resonant
//! two-body term into a `-i P` rotation and the resonant period propagator into
//! a single Pauli string.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{dense_exp, exp_commuting};
use crate::error::{Error, Result};
use crate::pauli::{DMat, OperatorSum, Pauli, PauliString};
use crate::protocol::{DriveProtocol, Segment, SegmentKind};

/// Dense constructions refuse ladders with more qubits than this.
pub const DENSE_LADDER_QUBITS: usize = 14;

/// Tolerance on `X_raw^2 = e^{i phi} I`.
pub const X_SQUARE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderConfig {
    /// Ladder length; `2L` spins in total.
    pub l: usize,
    /// Driving frequency `Omega`.
    pub omega: f64,
    /// Fraction of each half period spent in the resonant step.
    pub tau: f64,
    /// Weak-drive scale `J`.
    pub j: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub g_z: f64,
    pub g_zz: f64,
    pub lambda_a: f64,
    pub lambda_b: f64,
}

impl LadderConfig {
    /// Reference couplings: `tau = 0.25`, `J = 1`,
    /// `g_x = g_y = 0.45225`, `g_z = 0.7`, `g_zz = 1.3`,
    /// `lambda_a = lambda_b = 0.5`.
    pub fn reference(l: usize, omega: f64) -> Self {
        Self {
            l,
            omega,
            tau: 0.25,
            j: 1.0,
            g_x: 0.45225,
            g_y: 0.45225,
            g_z: 0.7,
            g_zz: 1.3,
            lambda_a: 0.5,
            lambda_b: 0.5,
        }
    }

    pub fn with_lambdas(mut self, lambda_a: f64, lambda_b: f64) -> Self {
        self.lambda_a = lambda_a;
        self.lambda_b = lambda_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 4 || self.l % 2 != 0 {
            return Err(Error::InvalidConfig {
                field: "L",
                message: format!("must be even and >= 4, got {}", self.l),
            });
        }
        if 2 * self.l > 64 {
            return Err(Error::InvalidConfig {
                field: "L",
                message: format!("{} spins exceed the 64-qubit register", 2 * self.l),
            });
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidConfig {
                field: "omega",
                message: format!("must be positive, got {}", self.omega),
            });
        }
        if !(self.tau > 0.0 && self.tau < 0.5) {
            return Err(Error::InvalidConfig {
                field: "tau",
                message: format!("must lie in (0, 1/2), got {}", self.tau),
            });
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return Err(Error::InvalidConfig {
                field: "j",
                message: format!("must be positive, got {}", self.j),
            });
        }
        let couplings = [
            ("g_x", self.g_x),
            ("g_y", self.g_y),
            ("g_z", self.g_z),
            ("g_zz", self.g_zz),
            ("lambda_a", self.lambda_a),
            ("lambda_b", self.lambda_b),
        ];
        for (field, v) in couplings {
            if !v.is_finite() {
                return Err(Error::InvalidConfig {
                    field,
                    message: "must be finite".into(),
                });
            }
        }
        Ok(())
    }

    pub fn n_spins(&self) -> usize {
        2 * self.l
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// `J' = J / (1/2 - tau)`
    pub fn j_prime(&self) -> f64 {
        self.j / (0.5 - self.tau)
    }

    /// `J_1 = Omega / (4 tau)`
    pub fn j1(&self) -> f64 {
        self.omega / (4.0 * self.tau)
    }

    /// Index `L/2 - 1` of the left site adjacent to the center bond.
    pub fn center(&self) -> usize {
        self.l / 2 - 1
    }

    pub fn is_symmetric(&self) -> bool {
        self.lambda_a == self.lambda_b
    }
}

/// Qubit hosting `S_i`.
pub fn upper(i: usize) -> usize {
    2 * i
}

/// Qubit hosting `sigma_i`.
pub fn lower(i: usize) -> usize {
    2 * i + 1
}

fn term(coeff: f64, ops: &[(usize, Pauli)]) -> PauliString {
    PauliString::new(coeff, ops)
}

/// `H_{0,a}`: `ZZ`/`XX` bonds on the left half and `YY`/`ZZ` bonds on the
/// right half, all with strength `J_1`.
pub fn resonant_a(cfg: &LadderConfig) -> OperatorSum {
    use Pauli::*;
    let (l, j1) = (cfg.l, cfg.j1());
    let mut h = OperatorSum::zero(2 * l);
    for i in 0..l / 2 - 1 {
        h.push(term(j1, &[(upper(i), Z), (upper(i + 1), Z)]));
        h.push(term(j1, &[(lower(i), X), (lower(i + 1), X)]));
    }
    for i in l / 2..l - 1 {
        h.push(term(j1, &[(upper(i), Y), (upper(i + 1), Y)]));
        h.push(term(j1, &[(lower(i), Z), (lower(i + 1), Z)]));
    }
    h.simplify()
}

/// On-site block `g_zz S^z sigma^z + g_x S^x + g_z S^z + g_y sigma^y + g_z sigma^z` at site `i`.
fn onsite(cfg: &LadderConfig, i: usize, scale: f64, h: &mut OperatorSum) {
    use Pauli::*;
    let (s, p) = (upper(i), lower(i));
    h.push(term(scale * cfg.g_zz, &[(s, Z), (p, Z)]));
    h.push(term(scale * cfg.g_x, &[(s, X)]));
    h.push(term(scale * cfg.g_z, &[(s, Z)]));
    h.push(term(scale * cfg.g_y, &[(p, Y)]));
    h.push(term(scale * cfg.g_z, &[(p, Z)]));
}

fn weak_bond(i: usize, scale: f64, h: &mut OperatorSum) {
    use Pauli::*;
    h.push(term(scale, &[(upper(i), X), (upper(i + 1), X)]));
    h.push(term(scale, &[(lower(i), Y), (lower(i + 1), Y)]));
}

/// `V_a`: left-half `XX`/`YY` bonds `i = 0..L/2-2` and on-site terms on the
/// left half `i = 0..L/2-1`, scaled by `J'`.
pub fn weak_a(cfg: &LadderConfig) -> OperatorSum {
    let jp = cfg.j_prime();
    let mut h = OperatorSum::zero(cfg.n_spins());
    for i in 0..cfg.l / 2 - 1 {
        weak_bond(i, jp, &mut h);
    }
    for i in 0..cfg.l / 2 {
        onsite(cfg, i, jp, &mut h);
    }
    h.simplify()
}

/// Center coupling `V^sc_a` (on-site part at `* + 1`) or `V^sc_b` (at `*`).
pub fn center_coupling(cfg: &LadderConfig, first_half: bool) -> OperatorSum {
    let c = cfg.center();
    let (lambda, site) = if first_half {
        (cfg.lambda_a, c + 1)
    } else {
        (cfg.lambda_b, c)
    };
    let scale = cfg.j_prime() * lambda;
    let mut h = OperatorSum::zero(cfg.n_spins());
    weak_bond(c, scale, &mut h);
    onsite(cfg, site, scale, &mut h);
    h.simplify()
}

/// Site relabeling `i -> L-1-i` within each chain.
pub fn mirror_qubit(q: usize, l: usize) -> usize {
    let (site, chain) = (q / 2, q % 2);
    2 * (l - 1 - site) + chain
}

/// Conjugation by the mirror `g_M`, realized as a qubit permutation.
pub fn mirror_transform(op: &OperatorSum, l: usize) -> OperatorSum {
    op.map_sites(|q| mirror_qubit(q, l))
}

/// The driven ladder as four segments:
/// `H_{0,a}`, `V_a + V^sc_a`, `H_{0,b}`, `V_b + V^sc_b`.
pub fn build_protocol(cfg: &LadderConfig) -> Result<DriveProtocol> {
    cfg.validate()?;
    let t = cfg.period();
    let h0a = resonant_a(cfg);
    let h0b = mirror_transform(&h0a, cfg.l).simplify();
    let va = weak_a(cfg);
    let vb = mirror_transform(&va, cfg.l);
    let second = (va + center_coupling(cfg, true)).simplify();
    let fourth = (vb + center_coupling(cfg, false)).simplify();
    let resonant = cfg.tau * t;
    let weak = 0.5 * t - resonant;
    DriveProtocol::new(vec![
        Segment::new(h0a, resonant, SegmentKind::Resonant),
        Segment::new(second, weak, SegmentKind::Weak),
        Segment::new(h0b, resonant, SegmentKind::Resonant),
        Segment::new(fourth, weak, SegmentKind::Weak),
    ])
}

fn dense_guard(cfg: &LadderConfig, what: &'static str) -> Result<()> {
    if cfg.n_spins() > DENSE_LADDER_QUBITS {
        return Err(Error::SizeGuard {
            what,
            n_sites: cfg.n_spins(),
            limit: DENSE_LADDER_QUBITS,
        });
    }
    Ok(())
}

/// Permutation matrix of the mirror relabeling; `g_M^2 = 1` exactly.
pub fn build_mirror_unitary(l: usize) -> Result<DMat> {
    let n = 2 * l;
    if n > DENSE_LADDER_QUBITS {
        return Err(Error::SizeGuard {
            what: "build_mirror_unitary",
            n_sites: n,
            limit: DENSE_LADDER_QUBITS,
        });
    }
    let dim = 1usize << n;
    let mut g = DMat::zeros(dim, dim);
    for b in 0..dim {
        let mut image = 0usize;
        for q in 0..n {
            if b >> q & 1 == 1 {
                image |= 1 << mirror_qubit(q, l);
            }
        }
        g[(image, b)] = Complex64::new(1.0, 0.0);
    }
    Ok(g)
}

/// `exp(-i H_{0,b} tau T) exp(-i H_{0,a} tau T)` as a Pauli sum, before phase fixing.
pub fn resonant_period_string(cfg: &LadderConfig) -> Result<OperatorSum> {
    cfg.validate()?;
    let dt = cfg.tau * cfg.period();
    let h0a = resonant_a(cfg);
    let h0b = mirror_transform(&h0a, cfg.l);
    exp_commuting(&h0b, dt)?.product(&exp_commuting(&h0a, dt)?)
}

/// `X = U_0(T)` phase-fixed so that `X^2 = +1`.
pub fn build_x_operator(cfg: &LadderConfig) -> Result<DMat> {
    cfg.validate()?;
    dense_guard(cfg, "build_x_operator")?;
    let dt = cfg.tau * cfg.period();
    let h0a = resonant_a(cfg);
    let h0b = mirror_transform(&h0a, cfg.l);
    let raw = dense_exp(&h0b, dt)? * dense_exp(&h0a, dt)?;
    fix_square_phase(raw)
}

/// Rescales `u` by `e^{-i phi/2}` where `u^2 = e^{i phi} 1`; fails when `u^2`
/// is not proportional to the identity.
pub fn fix_square_phase(u: DMat) -> Result<DMat> {
    let dim = u.nrows();
    let sq = &u * &u;
    let c = sq.trace() / dim as f64;
    // Frobenius bounds the spectral norm and avoids an SVD at large dimension.
    let residual = (&sq - DMat::identity(dim, dim) * c).norm();
    if residual > X_SQUARE_TOLERANCE || (c.norm() - 1.0).abs() > X_SQUARE_TOLERANCE {
        return Err(Error::NotProportionalToIdentity { residual });
    }
    let half = Complex64::from_polar(1.0, -c.arg() / 2.0);
    Ok(u * half)
}

/// The Pauli string `[S^x_0 S^x_* S^x_{*+1} S^x_{L-1}][sigma^y_0 sigma^y_* sigma^y_{*+1} sigma^y_{L-1}]`.
pub fn x_closed_form_string(cfg: &LadderConfig) -> OperatorSum {
    let c = cfg.center();
    let sites = [0, c, c + 1, cfg.l - 1];
    let mut ops = Vec::new();
    for &s in &sites {
        ops.push((upper(s), Pauli::X));
        ops.push((lower(s), Pauli::Y));
    }
    OperatorSum::from_terms(cfg.n_spins(), vec![PauliString::new(1.0, &ops)])
        .expect("sites lie inside the ladder")
}

/// Phase-aligned distance between `U_0(T)` and [`x_closed_form_string`],
/// compared string by string.
pub fn x_closed_form_residual(cfg: &LadderConfig) -> Result<f64> {
    let u = resonant_period_string(cfg)?;
    let closed = x_closed_form_string(cfg);
    let coeff = match u.terms() {
        [single] if single.ops() == closed.terms()[0].ops() => single.coeff,
        _ => return Ok(f64::INFINITY),
    };
    let aligned = u.scaled(coeff.conj() / coeff.norm());
    Ok(aligned.max_difference(&closed) + (coeff.norm() - 1.0).abs())
}

/// Closed form of the zeroth-order prethermal Hamiltonian
/// `D_0 = D_0^L + D_0^R + D_0^c`.
///
/// The left half carries the sign flips produced by conjugation with
/// `exp(-i H_{0,a} tau T)`: a bond flips once per endpoint on site `0` or `*`,
/// and site `0` keeps only its `X`/`Y` fields and a flipped rung term. Site
/// `L-1` keeps only the terms commuting with `X`. The center bond is weighted
/// by `lambda_a + lambda_b`, site `*` by `lambda_b - 1` and site `*+1` by
/// `1 - lambda_a`.
pub fn closed_form_d0(cfg: &LadderConfig) -> Result<OperatorSum> {
    use Pauli::*;
    cfg.validate()?;
    let (l, j, c) = (cfg.l, cfg.j, cfg.center());
    let mut d = OperatorSum::zero(cfg.n_spins());

    // D^L
    for i in 0..c {
        let mut sign = 1.0;
        if i == 0 {
            sign = -sign;
        }
        if i + 1 == c {
            sign = -sign;
        }
        weak_bond(i, sign * j, &mut d);
    }
    let reduced = |d: &mut OperatorSum, i: usize, scale: f64| {
        d.push(term(scale * cfg.g_zz, &[(upper(i), Z), (lower(i), Z)]));
        d.push(term(scale * cfg.g_x, &[(upper(i), X)]));
        d.push(term(scale * cfg.g_y, &[(lower(i), Y)]));
    };
    reduced(&mut d, 0, -j);
    for i in 1..c {
        onsite(cfg, i, j, &mut d);
    }

    // D^R
    for i in l / 2..l - 1 {
        weak_bond(i, j, &mut d);
    }
    for i in c + 2..l - 1 {
        onsite(cfg, i, j, &mut d);
    }
    reduced(&mut d, l - 1, j);

    // D^c
    weak_bond(c, j * (cfg.lambda_a + cfg.lambda_b), &mut d);
    reduced(&mut d, c, j * (cfg.lambda_b - 1.0));
    reduced(&mut d, c + 1, j * (1.0 - cfg.lambda_a));

    Ok(d.simplify())
}

/// `O_odd = S^x_{L/2-1} - S^x_{L/2}`
pub fn odd_operator(cfg: &LadderConfig) -> OperatorSum {
    let c = cfg.center();
    OperatorSum::from_terms(
        cfg.n_spins(),
        vec![
            term(1.0, &[(upper(c), Pauli::X)]),
            term(-1.0, &[(upper(c + 1), Pauli::X)]),
        ],
    )
    .expect("sites lie inside the ladder")
}

/// `O_odd,2 = sigma^y_{L/2-1} - sigma^y_{L/2}`
pub fn odd_operator_2(cfg: &LadderConfig) -> OperatorSum {
    let c = cfg.center();
    OperatorSum::from_terms(
        cfg.n_spins(),
        vec![
            term(1.0, &[(lower(c), Pauli::Y)]),
            term(-1.0, &[(lower(c + 1), Pauli::Y)]),
        ],
    )
    .expect("sites lie inside the ladder")
}
