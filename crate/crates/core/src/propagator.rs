//! Time evolution under piecewise-constant drives.
//!
//! Segments whose Pauli terms mutually commute are applied as exact products
//! of Pauli rotations; all other segments go through a Lanczos projection with
//! full reorthogonalization and adaptive substeps.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dense::{dense_exp, expm_hermitian};
use crate::error::{Error, Result};
use crate::ladder::{mirror_transform, resonant_a, LadderConfig, DENSE_LADDER_QUBITS};
use crate::pauli::{to_dense, CompiledOperator, DMat, OperatorSum, StateVector};
use crate::protocol::DriveProtocol;

/// Dense oracle propagation refuses more qubits than this.
pub const DENSE_ORACLE_QUBITS: usize = 12;

/// Offsets closer than `BOUNDARY_SNAP * T` to a segment boundary are taken as
/// the boundary itself.
const BOUNDARY_SNAP: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovSettings {
    pub max_subspace: usize,
    /// Bound on the a-posteriori error estimate of each substep.
    pub tolerance: f64,
    /// Largest time step taken with a single Krylov basis.
    pub max_substep: f64,
}

impl Default for KrylovSettings {
    fn default() -> Self {
        Self {
            max_subspace: 30,
            tolerance: 1e-12,
            max_substep: 1.0,
        }
    }
}

impl KrylovSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_subspace < 2 {
            return Err(Error::InvalidConfig {
                field: "max_subspace",
                message: format!("must be >= 2, got {}", self.max_subspace),
            });
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidConfig {
                field: "tolerance",
                message: format!("must be positive, got {}", self.tolerance),
            });
        }
        if !(self.max_substep > 0.0) {
            return Err(Error::InvalidConfig {
                field: "max_substep",
                message: format!("must be positive, got {}", self.max_substep),
            });
        }
        Ok(())
    }
}

/// `exp(-i angle P)` for a unit Hermitian Pauli string `P = phase X^x Z^z`.
#[derive(Clone, Copy, Debug)]
struct Rotation {
    x: u64,
    z: u64,
    phase: Complex64,
    rate: f64,
}

impl Rotation {
    fn apply(&self, amps: &mut [Complex64], dt: f64) {
        let angle = self.rate * dt;
        let (c, s) = (angle.cos(), angle.sin());
        let sign = |b: usize| {
            if (b as u64 & self.z).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mis = Complex64::new(0.0, -s) * self.phase;
        if self.x == 0 {
            for (b, a) in amps.iter_mut().enumerate() {
                *a *= c + mis * sign(b);
            }
            return;
        }
        let x = self.x as usize;
        for b in 0..amps.len() {
            let p = b ^ x;
            if p < b {
                continue;
            }
            let (lo, hi) = (amps[b], amps[p]);
            // (P psi)[b] = phase * sign(b ^ x) * psi[b ^ x]
            amps[b] = lo * c + mis * sign(p) * hi;
            amps[p] = hi * c + mis * sign(b) * lo;
        }
    }
}

#[derive(Clone, Debug)]
enum Action {
    Rotations(Vec<Rotation>),
    Krylov(CompiledOperator),
}

/// A segment Hamiltonian prepared for repeated exponentiation.
#[derive(Clone, Debug)]
pub struct SegmentPropagator {
    n_sites: usize,
    action: Action,
}

impl SegmentPropagator {
    pub fn new(h: &OperatorSum) -> Result<Self> {
        let h = h.simplify();
        let defect = h.hermiticity_defect();
        if defect > 1e-12 {
            return Err(Error::NonHermitian { imag: defect });
        }
        let action = if h.terms_commute() {
            Action::Rotations(
                h.terms()
                    .iter()
                    .map(|t| {
                        let (x, z, phase) = t.with_coeff(1.0).masks();
                        Rotation {
                            x,
                            z,
                            phase,
                            rate: t.coeff.re,
                        }
                    })
                    .collect(),
            )
        } else {
            Action::Krylov(h.compile())
        };
        Ok(Self {
            n_sites: h.n_sites(),
            action,
        })
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.action, Action::Rotations(_))
    }

    /// Replaces `psi` by `exp(-i h dt) psi`.
    pub fn apply(&self, psi: &mut StateVector, dt: f64, settings: &KrylovSettings) -> Result<()> {
        if psi.n_sites() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                found: psi.n_sites(),
            });
        }
        if dt == 0.0 {
            return Ok(());
        }
        match &self.action {
            Action::Rotations(rots) => {
                for r in rots {
                    r.apply(psi.amps_mut(), dt);
                }
            }
            Action::Krylov(op) => {
                if !op.is_zero() {
                    lanczos_evolve(op, psi.amps_mut(), dt, settings)?;
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigendecomposition of a real symmetric tridiagonal matrix.
struct Tridiagonal {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl Tridiagonal {
    fn new(alpha: &[f64], beta: &[f64]) -> Self {
        let k = alpha.len();
        let mut m = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            m[(i, i)] = alpha[i];
            if i + 1 < k {
                m[(i, i + 1)] = beta[i];
                m[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(m);
        Self {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i t T) e_1`
    fn exp_column(&self, t: f64) -> Vec<Complex64> {
        let k = self.values.len();
        let weights: Vec<Complex64> = (0..k)
            .map(|c| Complex64::from_polar(self.vectors[(0, c)], -self.values[c] * t))
            .collect();
        (0..k)
            .map(|r| (0..k).map(|c| weights[c] * self.vectors[(r, c)]).sum())
            .collect()
    }
}

fn lanczos_evolve(
    op: &CompiledOperator,
    amps: &mut [Complex64],
    dt: f64,
    settings: &KrylovSettings,
) -> Result<()> {
    settings.validate()?;
    let dim = amps.len();
    let m_max = settings.max_subspace.min(dim);
    let direction = dt.signum();
    let mut remaining = dt.abs();
    let mut step = remaining.min(settings.max_substep);
    let min_step = dt.abs() * 1e-10;

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
    let mut w = vec![ZERO; dim];
    while remaining > 0.0 {
        let beta0 = norm(amps);
        if beta0 == 0.0 {
            return Ok(());
        }
        basis.clear();
        basis.push(amps.iter().map(|a| a / beta0).collect());
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        let mut accepted: Option<(f64, Vec<Complex64>)> = None;
        let mut last_estimate = f64::INFINITY;

        for j in 0..m_max {
            op.apply_into(&basis[j], &mut w);
            let mut a_j = 0.0;
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let c = dot(v, &w);
                    if i == j {
                        a_j += c.re;
                    }
                    for (wk, vk) in w.iter_mut().zip(v) {
                        *wk -= c * vk;
                    }
                }
            }
            alpha.push(a_j);
            let b_j = norm(&w);
            let breakdown = b_j <= 1e-13 * (a_j.abs() + beta.last().copied().unwrap_or(0.0)).max(1e-300);
            let tri = Tridiagonal::new(&alpha, &beta);

            if breakdown {
                // invariant subspace: the projection is exact for any step
                let s = remaining.min(settings.max_substep.max(step));
                accepted = Some((s, tri.exp_column(direction * s)));
                break;
            }
            let mut s = step;
            loop {
                let col = tri.exp_column(direction * s);
                let estimate = b_j * col[j].norm() * beta0;
                last_estimate = estimate;
                if estimate <= settings.tolerance {
                    accepted = Some((s, col));
                    break;
                }
                if j + 1 < m_max || s / 2.0 < min_step {
                    break;
                }
                s /= 2.0;
            }
            if accepted.is_some() {
                break;
            }
            beta.push(b_j);
            basis.push(w.iter().map(|x| x / b_j).collect());
        }

        let (s, col) = accepted.ok_or(Error::KrylovNonConvergence {
            estimate: last_estimate,
            substep: step,
        })?;
        for a in amps.iter_mut() {
            *a = ZERO;
        }
        for (c, v) in col.iter().zip(&basis) {
            let c = c * beta0;
            for (a, vk) in amps.iter_mut().zip(v) {
                *a += c * vk;
            }
        }
        remaining -= s;
        if remaining <= dt.abs() * 1e-15 {
            break;
        }
        step = (2.0 * s).min(remaining).min(settings.max_substep);
    }
    Ok(())
}

/// `exp(-i h dt) psi` with the result renormalized to the input norm.
pub fn evolve_segment(
    psi: &StateVector,
    h: &OperatorSum,
    dt: f64,
    settings: &KrylovSettings,
) -> Result<StateVector> {
    if dt < 0.0 {
        return Err(Error::InvalidArgument(format!("dt must be >= 0, got {dt}")));
    }
    let mut out = psi.clone();
    let before = psi.norm();
    SegmentPropagator::new(h)?.apply(&mut out, dt, settings)?;
    let after = out.norm();
    if after > 0.0 {
        for a in out.amps_mut() {
            *a *= before / after;
        }
    }
    Ok(out)
}

/// Exact `exp(-i h dt) psi` through a dense eigendecomposition.
pub fn dense_oracle_evolve(psi: &StateVector, h: &OperatorSum, dt: f64) -> Result<StateVector> {
    if psi.n_sites() > DENSE_ORACLE_QUBITS {
        return Err(Error::SizeGuard {
            what: "dense_oracle_evolve",
            n_sites: psi.n_sites(),
            limit: DENSE_ORACLE_QUBITS,
        });
    }
    if h.n_sites() != psi.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: psi.n_sites(),
            found: h.n_sites(),
        });
    }
    let u = expm_hermitian(&to_dense(h)?, dt);
    StateVector::from_column(psi.n_sites(), &(u * psi.to_column()))
}

/// A state observed during [`evolve_protocol`].
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a> {
    pub m: usize,
    pub offset_index: usize,
    pub offset: f64,
    pub t: f64,
    pub state: &'a StateVector,
}

#[derive(Clone, Copy, Debug)]
enum Step {
    Emit(usize),
    Evolve(usize, f64),
}

fn schedule(protocol: &DriveProtocol, offsets: &[f64]) -> Result<Vec<Step>> {
    let period = protocol.period();
    for w in offsets.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::InvalidArgument("sample offsets must be strictly increasing".into()));
        }
    }
    if let Some(&o) = offsets.iter().find(|&&o| !(o >= 0.0 && o < period)) {
        return Err(Error::InvalidArgument(format!(
            "sample offset {o} lies outside [0, {period})"
        )));
    }
    let snap = BOUNDARY_SNAP * period;
    let mut steps = Vec::new();
    let mut next = 0;
    let mut start = 0.0;
    for (k, seg) in protocol.segments().iter().enumerate() {
        let end = start + seg.duration;
        let mut cursor = start;
        while next < offsets.len() && offsets[next] < end - snap {
            let o = offsets[next].max(cursor);
            if o - cursor > snap {
                steps.push(Step::Evolve(k, o - cursor));
                cursor = o;
            }
            steps.push(Step::Emit(next));
            next += 1;
        }
        if end - cursor > 0.0 {
            steps.push(Step::Evolve(k, end - cursor));
        }
        start = end;
    }
    Ok(steps)
}

/// Evolves `psi0` for `n_periods` periods, calling `visit` at
/// `t = m T + offset` for every period `m < n_periods` and every offset.
/// With `n_periods = 0` a single sample at `t = 0` is emitted. Returns the
/// state at `t = n_periods T`.
pub fn evolve_protocol<F>(
    psi0: &StateVector,
    protocol: &DriveProtocol,
    n_periods: usize,
    sample_offsets: &[f64],
    settings: &KrylovSettings,
    mut visit: F,
) -> Result<StateVector>
where
    F: FnMut(Sample<'_>) -> Result<()>,
{
    settings.validate()?;
    if psi0.n_sites() != protocol.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: protocol.n_sites(),
            found: psi0.n_sites(),
        });
    }
    let steps = schedule(protocol, sample_offsets)?;
    let props = protocol
        .segments()
        .iter()
        .map(|s| SegmentPropagator::new(&s.hamiltonian))
        .collect::<Result<Vec<_>>>()?;
    let period = protocol.period();
    let mut psi = psi0.clone();
    if n_periods == 0 {
        visit(Sample {
            m: 0,
            offset_index: 0,
            offset: 0.0,
            t: 0.0,
            state: &psi,
        })?;
        return Ok(psi);
    }
    for m in 0..n_periods {
        for step in &steps {
            match *step {
                Step::Emit(i) => {
                    let offset = sample_offsets[i];
                    visit(Sample {
                        m,
                        offset_index: i,
                        offset,
                        t: m as f64 * period + offset,
                        state: &psi,
                    })?;
                }
                Step::Evolve(k, dt) => {
                    props[k].apply(&mut psi, dt, settings)?;
                    psi.normalize();
                }
            }
        }
    }
    Ok(psi)
}

/// Dense `U(t_end, t_start)` of a protocol, for `0 <= t_start <= t_end`.
pub fn dense_evolution_operator(protocol: &DriveProtocol, t_start: f64, t_end: f64) -> Result<DMat> {
    let n = protocol.n_sites();
    if n > DENSE_LADDER_QUBITS {
        return Err(Error::SizeGuard {
            what: "dense_evolution_operator",
            n_sites: n,
            limit: DENSE_LADDER_QUBITS,
        });
    }
    if !(t_start >= 0.0 && t_end >= t_start) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= t_start <= t_end, got [{t_start}, {t_end}]"
        )));
    }
    let dim = 1usize << n;
    let period = protocol.period();
    let exps: Vec<(f64, OperatorSum)> = protocol
        .segments()
        .iter()
        .map(|s| (s.duration, s.hamiltonian.clone()))
        .collect();
    let mut u = DMat::identity(dim, dim);
    let mut seg_start = (t_start / period).floor() * period;
    let mut k = 0usize;
    let snap = BOUNDARY_SNAP * period;
    while seg_start < t_end - snap {
        let (d, h) = &exps[k % exps.len()];
        let seg_end = seg_start + d;
        let a = seg_start.max(t_start);
        let b = seg_end.min(t_end);
        if b - a > snap {
            u = dense_exp(h, b - a)? * u;
        }
        seg_start = seg_end;
        k += 1;
    }
    Ok(u)
}

/// Resonant-drive propagator `U_0(t)` for `t >= 0`: `exp(-i H_{0,a} t)` up
/// to `tau T`, frozen until `T/2`, then `exp(-i H_{0,b} (t - T/2))` up to
/// `T/2 + tau T`, frozen until `T`; later times use `U_0(t + T) = U_0(t) U_0(T)`.
pub fn u0_at(cfg: &LadderConfig, t: f64) -> Result<DMat> {
    cfg.validate()?;
    if cfg.n_spins() > DENSE_LADDER_QUBITS {
        return Err(Error::SizeGuard {
            what: "u0_at",
            n_sites: cfg.n_spins(),
            limit: DENSE_LADDER_QUBITS,
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("u0_at needs t >= 0, got {t}")));
    }
    let period = cfg.period();
    let resonant = cfg.tau * period;
    let h0a = resonant_a(cfg);
    let h0b = mirror_transform(&h0a, cfg.l);
    let within = |s: f64| -> Result<DMat> {
        if s <= 0.5 * period {
            dense_exp(&h0a, s.min(resonant))
        } else {
            let first = dense_exp(&h0a, resonant)?;
            Ok(dense_exp(&h0b, (s - 0.5 * period).min(resonant))? * first)
        }
    };
    let whole = (t / period).floor();
    let mut rest = t - whole * period;
    if rest < BOUNDARY_SNAP * period && whole > 0.0 {
        rest = 0.0;
    }
    let mut u = within(rest)?;
    if whole > 0.0 {
        let x_raw = within(period)?;
        for _ in 0..whole as usize {
            u = &u * &x_raw;
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{phase_aligned_residual, spectral_norm};
    use crate::ladder::{build_mirror_unitary, build_protocol, build_x_operator};
    use crate::pauli::{Pauli, PauliString};
    use std::f64::consts::PI;

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let mut psi = StateVector::from_amps(n, amps).unwrap();
        psi.normalize();
        psi
    }

    fn single(n: usize, coeff: f64, ops: &[(usize, Pauli)]) -> OperatorSum {
        OperatorSum::from_terms(n, vec![PauliString::new(coeff, ops)]).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let psi = random_state(4, 1);
        let h = single(4, 1.0, &[(0, Pauli::X), (1, Pauli::Y)]) + single(4, 0.5, &[(1, Pauli::X)]);
        let out = evolve_segment(&psi, &h, 0.0, &KrylovSettings::default()).unwrap();
        assert_eq!(out, psi);
    }

    #[test]
    fn eigenstate_picks_up_phase() {
        let psi = StateVector::basis(3, 0).unwrap();
        let h = single(3, 1.0, &[(0, Pauli::Z)]);
        let out = evolve_segment(&psi, &h, 0.7, &KrylovSettings::default()).unwrap();
        assert!((out.amps()[0] - Complex64::from_polar(1.0, -0.7)).norm() < 1e-14);
    }

    #[test]
    fn rabi_rotation() {
        let psi = StateVector::basis(1, 0).unwrap();
        let h = single(1, 1.0, &[(0, Pauli::X)]);
        let out = dense_oracle_evolve(&psi, &h, PI / 2.0).unwrap();
        assert!(out.amps()[0].norm() < 1e-14);
        assert!((out.amps()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
        let fast = evolve_segment(&psi, &h, PI / 2.0, &KrylovSettings::default()).unwrap();
        assert!((fast.amps()[1] - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn dense_semigroup() {
        let psi = random_state(4, 2);
        let h = single(4, 0.3, &[(0, Pauli::X), (2, Pauli::Z)])
            + single(4, -0.8, &[(1, Pauli::Y)])
            + single(4, 1.1, &[(1, Pauli::Z), (3, Pauli::X)]);
        let split = dense_oracle_evolve(&dense_oracle_evolve(&psi, &h, 0.4).unwrap(), &h, 0.9).unwrap();
        let joint = dense_oracle_evolve(&psi, &h, 1.3).unwrap();
        assert!(split.combine(Complex64::new(1.0, 0.0), &joint, Complex64::new(-1.0, 0.0)).unwrap().norm() < 1e-12);
    }

    #[test]
    fn rotations_match_dense() {
        use Pauli::*;
        let n = 5;
        let h = single(n, 0.7, &[(0, Z), (1, Z)])
            + single(n, -1.2, &[(1, X), (2, X)]).scaled(0.0)
            + single(n, 0.9, &[(2, Y), (3, Y)])
            + single(n, 0.4, &[(4, Y)])
            + single(n, 1.5, &[(0, X), (1, X)]);
        let prop = SegmentPropagator::new(&h).unwrap();
        assert!(prop.is_exact());
        let psi = random_state(n, 3);
        let mut fast = psi.clone();
        prop.apply(&mut fast, 0.83, &KrylovSettings::default()).unwrap();
        let exact = dense_oracle_evolve(&psi, &h, 0.83).unwrap();
        assert!(fast.fidelity(&exact) > 1.0 - 1e-13);
    }

    #[test]
    fn krylov_matches_dense_on_random_operator() {
        use Pauli::*;
        let n = 6;
        let mut h = OperatorSum::zero(n);
        for i in 0..n - 1 {
            h.push(PauliString::new(0.9, &[(i, X), (i + 1, X)]));
            h.push(PauliString::new(0.4 + 0.1 * i as f64, &[(i, Z)]));
            h.push(PauliString::new(-0.6, &[(i, Y), (i + 1, Z)]));
        }
        let prop = SegmentPropagator::new(&h).unwrap();
        assert!(!prop.is_exact());
        let psi = random_state(n, 4);
        for dt in [0.05, 1.0, 7.5] {
            let out = evolve_segment(&psi, &h, dt, &KrylovSettings::default()).unwrap();
            let exact = dense_oracle_evolve(&psi, &h, dt).unwrap();
            assert!(out.fidelity(&exact) > 1.0 - 1e-11, "dt = {dt}");
        }
    }

    #[test]
    fn tiny_subspace_still_converges_by_substepping() {
        use Pauli::*;
        let h = single(4, 1.0, &[(0, X), (1, X)]) + single(4, 0.7, &[(1, Z)]) + single(4, 0.3, &[(2, Y), (3, X)]) + single(4, 0.5, &[(0, Z), (3, Z)]);
        let settings = KrylovSettings {
            max_subspace: 4,
            ..KrylovSettings::default()
        };
        let psi = random_state(4, 5);
        let out = evolve_segment(&psi, &h, 2.0, &settings).unwrap();
        let exact = dense_oracle_evolve(&psi, &h, 2.0).unwrap();
        assert!(out.fidelity(&exact) > 1.0 - 1e-11);
    }

    #[test]
    fn settings_are_validated() {
        let bad = KrylovSettings {
            max_subspace: 1,
            ..KrylovSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = KrylovSettings {
            tolerance: 0.0,
            ..KrylovSettings::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn time_reversal() {
        use Pauli::*;
        let h = single(4, 1.0, &[(0, X), (1, X)]) + single(4, 0.7, &[(1, Z)]) + single(4, 0.3, &[(2, Y), (3, X)]);
        let psi = random_state(4, 6);
        let prop = SegmentPropagator::new(&h).unwrap();
        let mut out = psi.clone();
        let settings = KrylovSettings::default();
        prop.apply(&mut out, 1.7, &settings).unwrap();
        prop.apply(&mut out, -1.7, &settings).unwrap();
        assert!(out.fidelity(&psi) > 1.0 - 1e-9);
    }

    #[test]
    fn zero_periods_emits_initial_sample() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let p = build_protocol(&cfg).unwrap();
        let psi = random_state(8, 7);
        let mut seen = Vec::new();
        evolve_protocol(&psi, &p, 0, &[0.0, cfg.period() / 2.0], &KrylovSettings::default(), |s| {
            seen.push((s.m, s.t, s.state.clone()));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen.len(), 1);
        assert_eq!(seen[0].1, 0.0);
        assert_eq!(seen[0].2, psi);
    }

    #[test]
    fn zero_hamiltonians_leave_state_fixed() {
        use crate::protocol::{Segment, SegmentKind};
        let zero = OperatorSum::zero(3);
        let p = DriveProtocol::new(vec![
            Segment::new(zero.clone(), 0.3, SegmentKind::Resonant),
            Segment::new(zero, 0.7, SegmentKind::Weak),
        ])
        .unwrap();
        let psi = random_state(3, 8);
        let mut count = 0;
        evolve_protocol(&psi, &p, 5, &[0.0, 0.5], &KrylovSettings::default(), |s| {
            assert_eq!(*s.state, psi);
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 10);
    }

    #[test]
    fn offsets_must_fit_period() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let p = build_protocol(&cfg).unwrap();
        let psi = random_state(8, 9);
        let s = KrylovSettings::default();
        assert!(evolve_protocol(&psi, &p, 1, &[cfg.period()], &s, |_| Ok(())).is_err());
        assert!(evolve_protocol(&psi, &p, 1, &[0.2, 0.1], &s, |_| Ok(())).is_err());
    }

    #[test]
    fn split_offsets_match_dense_operator() {
        let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
        let p = build_protocol(&cfg).unwrap();
        let t = cfg.period();
        let offsets = [0.0, 0.1 * t, 0.5 * t, 0.6 * t];
        let psi = random_state(8, 10);
        let mut samples = Vec::new();
        evolve_protocol(&psi, &p, 2, &offsets, &KrylovSettings::default(), |s| {
            samples.push((s.t, s.state.clone()));
            Ok(())
        })
        .unwrap();
        assert_eq!(samples.len(), 8);
        for (time, state) in samples {
            let u = dense_evolution_operator(&p, 0.0, time).unwrap();
            let exact = StateVector::from_column(8, &(u * psi.to_column())).unwrap();
            assert!(state.fidelity(&exact) > 1.0 - 1e-11, "t = {time}");
        }
    }

    #[test]
    fn u0_endpoints() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let id = DMat::identity(256, 256);
        assert!((u0_at(&cfg, 0.0).unwrap() - &id).norm() < 1e-14);
        let x = build_x_operator(&cfg).unwrap();
        let ut = u0_at(&cfg, cfg.period()).unwrap();
        assert!(phase_aligned_residual(&ut, &x) < 1e-10);
        // frozen during the weak windows
        let a = u0_at(&cfg, 0.3 * cfg.period()).unwrap();
        let b = u0_at(&cfg, 0.45 * cfg.period()).unwrap();
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn u0_half_period_squares_to_x_inverse() {
        // [U_0(T/2)^{-1} g_M]^2 = X^{-1} g_M^2 with g_M^2 = 1
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let g = build_mirror_unitary(4).unwrap();
        let gi = u0_at(&cfg, cfg.period() / 2.0).unwrap().adjoint() * &g;
        let x = build_x_operator(&cfg).unwrap();
        assert!(phase_aligned_residual(&(&gi * &gi), &x.adjoint()) < 1e-10);
    }

    #[test]
    fn period_propagator_mirror_shift() {
        let cfg = LadderConfig::reference(4, 8.0 * PI);
        let p = build_protocol(&cfg).unwrap();
        let t = cfg.period();
        let g = build_mirror_unitary(4).unwrap();
        let u = dense_evolution_operator(&p, 0.0, t).unwrap();
        let shifted = dense_evolution_operator(&p, t / 2.0, 1.5 * t).unwrap();
        assert!(spectral_norm(&(&g * u * g.adjoint() - shifted)) < 1e-9);
    }
}
