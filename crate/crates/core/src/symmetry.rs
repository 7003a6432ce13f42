//! Dynamical space-time symmetries of the drive: checks of `g H(t) g^-1`
//! against shifted or reflected times, interaction-picture elements, the
//! extended group algebra and the micromotion residual.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::{expm_hermitian, phase_aligned_residual, spectral_norm, unitarity_defect};
use crate::error::{Error, Result};
use crate::ladder::{
    build_mirror_unitary, build_protocol, build_x_operator, closed_form_d0, mirror_transform,
    resonant_period_string, LadderConfig,
};
use crate::observables::{paired_samples, OddObservable, TrajectoryRecord};
use crate::pauli::{commutator, to_dense, DMat, OperatorSum};
use crate::propagator::{dense_evolution_operator, u0_at};
use crate::protocol::{DriveProtocol, SegmentKind};
use crate::vanvleck::{dn_from_table, kick_sum, FourierTable, Route};

/// Default tolerance of the group-algebra checks.
pub const ALGEBRA_TOLERANCE: f64 = 1e-9;

/// Tolerance of the `[g^int]^2 = X^-1 g^2` check in [`interaction_picture_element`].
pub const SQUARE_TOLERANCE: f64 = 1e-10;

/// Sample points per segment when comparing time-dependent operators.
pub const SAMPLES_PER_SEGMENT: usize = 8;

/// Qubit limit of the dense symmetry checks.
pub const SYMMETRY_QUBITS: usize = 12;

const UNITARITY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryKind {
    Unitary,
    /// The matrix composed with complex conjugation in the computational basis.
    Antiunitary,
}

#[derive(Clone, Debug)]
pub struct SymmetryElement {
    pub kind: SymmetryKind,
    pub matrix: DMat,
    pub label: String,
}

impl SymmetryElement {
    pub fn new(kind: SymmetryKind, matrix: DMat, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if !matrix.is_square() || !matrix.nrows().is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "{label}: matrix of shape {:?} is not a qubit operator",
                matrix.shape()
            )));
        }
        let defect = unitarity_defect(&matrix);
        if defect > UNITARITY_TOLERANCE {
            return Err(Error::VerificationFailed {
                relation: format!("{label} unitarity"),
                residual: defect,
                tolerance: UNITARITY_TOLERANCE,
            });
        }
        Ok(SymmetryElement { kind, matrix, label })
    }

    pub fn unitary(matrix: DMat, label: impl Into<String>) -> Result<Self> {
        Self::new(SymmetryKind::Unitary, matrix, label)
    }

    pub fn antiunitary(matrix: DMat, label: impl Into<String>) -> Result<Self> {
        Self::new(SymmetryKind::Antiunitary, matrix, label)
    }

    pub fn identity(n_sites: usize) -> Self {
        let dim = 1usize << n_sites;
        SymmetryElement {
            kind: SymmetryKind::Unitary,
            matrix: DMat::identity(dim, dim),
            label: "identity".into(),
        }
    }

    /// Pure complex conjugation.
    pub fn conjugation(n_sites: usize) -> Self {
        SymmetryElement {
            kind: SymmetryKind::Antiunitary,
            ..Self::identity(n_sites)
        }
        .with_label("conjugation")
    }

    /// Ladder mirror `g_M`.
    pub fn mirror(cfg: &LadderConfig) -> Result<Self> {
        Self::unitary(build_mirror_unitary(cfg.l)?, "mirror")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `g a g^-1`.
    pub fn act(&self, a: &DMat) -> DMat {
        match self.kind {
            SymmetryKind::Unitary => &self.matrix * a * self.matrix.adjoint(),
            SymmetryKind::Antiunitary => &self.matrix * a.conjugate() * self.matrix.adjoint(),
        }
    }

    /// `g^2` as a linear operator.
    pub fn square(&self) -> DMat {
        match self.kind {
            SymmetryKind::Unitary => &self.matrix * &self.matrix,
            SymmetryKind::Antiunitary => &self.matrix * self.matrix.conjugate(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub relation: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl SymmetryReport {
    pub fn new(relation: impl Into<String>, max_residual: f64, tolerance: f64) -> Self {
        SymmetryReport {
            relation: relation.into(),
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
        }
    }
}

fn dense_check(n_sites: usize, what: &'static str) -> Result<()> {
    if n_sites > SYMMETRY_QUBITS {
        return Err(Error::SizeGuard {
            what,
            n_sites,
            limit: SYMMETRY_QUBITS,
        });
    }
    Ok(())
}

/// Midpoints of the intervals cut by the segment boundaries of one period
/// and their images under `map`.
fn refined_midpoints(protocol: &DriveProtocol, map: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let period = protocol.period();
    if !(period > 0.0) {
        return Err(Error::NotAlignable("protocol has zero period".into()));
    }
    let mut cuts: Vec<f64> = protocol.boundaries();
    cuts.extend(protocol.boundaries().iter().map(|&b| map(b).rem_euclid(period)));
    cuts.push(period);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * period);
    Ok(cuts
        .windows(2)
        .filter(|w| w[1] - w[0] > 1e-12 * period)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect())
}

fn check_dynamical(
    protocol: &DriveProtocol,
    g: &SymmetryElement,
    relation: String,
    map: impl Fn(f64) -> f64 + Copy,
    tolerance: f64,
) -> Result<SymmetryReport> {
    dense_check(protocol.n_sites(), "dynamical symmetry check")?;
    if g.dim() != 1usize << protocol.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: protocol.n_sites(),
            found: g.dim().trailing_zeros() as usize,
        });
    }
    let dense: Vec<DMat> = protocol
        .segments()
        .iter()
        .map(|s| to_dense(&s.hamiltonian))
        .collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for t in refined_midpoints(protocol, map)? {
        let lhs = g.act(&dense[protocol.segment_at(t)]);
        let rhs = &dense[protocol.segment_at(map(t))];
        worst = worst.max(spectral_norm(&(lhs - rhs)));
    }
    Ok(SymmetryReport::new(relation, worst, tolerance))
}

/// Residual of `g H(t) g^-1 = H(t + T/2)` over one period.
pub fn check_unitary_dynamical_symmetry(
    protocol: &DriveProtocol,
    g: &SymmetryElement,
    tolerance: f64,
) -> Result<SymmetryReport> {
    if g.kind != SymmetryKind::Unitary {
        return Err(Error::InvalidArgument(format!("{} is not unitary", g.label)));
    }
    let half = 0.5 * protocol.period();
    check_dynamical(protocol, g, format!("{}: H(t) -> H(t + T/2)", g.label), move |t| t + half, tolerance)
}

/// Residual of `g H(t) g^-1 = H(T/2 - t)` over one period, with `g`
/// antiunitary.
pub fn check_antiunitary_dynamical_symmetry(
    protocol: &DriveProtocol,
    g: &SymmetryElement,
    tolerance: f64,
) -> Result<SymmetryReport> {
    if g.kind != SymmetryKind::Antiunitary {
        return Err(Error::InvalidArgument(format!("{} is not antiunitary", g.label)));
    }
    let half = 0.5 * protocol.period();
    check_dynamical(protocol, g, format!("{}: H(t) -> H(T/2 - t)", g.label), move |t| half - t, tolerance)
}

/// `g^int = U_0(T/2)^-1 g`. When `g` maps the first resonant segment onto
/// the second, `[g^int]^2 = X^-1 g^2` is verified up to a phase.
pub fn interaction_picture_element(cfg: &LadderConfig, g: &SymmetryElement) -> Result<SymmetryElement> {
    dense_check(cfg.n_spins(), "interaction_picture_element")?;
    let protocol = build_protocol(cfg)?;
    if g.dim() != 1usize << cfg.n_spins() {
        return Err(Error::DimensionMismatch {
            expected: cfg.n_spins(),
            found: g.dim().trailing_zeros() as usize,
        });
    }
    let half = u0_at(cfg, 0.5 * cfg.period())?;
    let element = SymmetryElement {
        kind: g.kind,
        matrix: half.adjoint() * &g.matrix,
        label: format!("{}^int", g.label),
    };
    if g.kind == SymmetryKind::Unitary {
        let segs = protocol.segments();
        let h0a = to_dense(&segs[0].hamiltonian)?;
        let h0b = to_dense(&segs[2].hamiltonian)?;
        if spectral_norm(&(g.act(&h0a) - h0b)) <= SQUARE_TOLERANCE * (1.0 + spectral_norm(&h0a)) {
            let x = build_x_operator(cfg)?;
            let expected = x.adjoint() * g.square();
            let residual = phase_aligned_residual(&element.square(), &expected);
            if residual > SQUARE_TOLERANCE {
                return Err(Error::VerificationFailed {
                    relation: format!("[{}]^2 = X^-1 {}^2", element.label, g.label),
                    residual,
                    tolerance: SQUARE_TOLERANCE,
                });
            }
        }
    }
    Ok(element)
}

/// `H_int(t) = U_0(t)^dagger V(t) U_0(t)` of the ladder, piecewise constant
/// on the segments of two periods.
#[derive(Clone, Debug)]
pub struct InteractionDrive {
    period: f64,
    starts: Vec<f64>,
    ops: Vec<DMat>,
}

impl InteractionDrive {
    pub fn ladder(cfg: &LadderConfig) -> Result<Self> {
        dense_check(cfg.n_spins(), "InteractionDrive")?;
        let protocol = build_protocol(cfg)?;
        let dim = 1usize << cfg.n_spins();
        let mut starts = Vec::new();
        let mut ops = Vec::new();
        let mut t = 0.0;
        for _ in 0..2 {
            for seg in protocol.segments() {
                starts.push(t);
                ops.push(match seg.kind {
                    SegmentKind::Resonant => DMat::zeros(dim, dim),
                    SegmentKind::Weak => {
                        let u0 = u0_at(cfg, t)?;
                        u0.adjoint() * to_dense(&seg.hamiltonian)? * u0
                    }
                });
                t += seg.duration;
            }
        }
        Ok(InteractionDrive {
            period: 2.0 * protocol.period(),
            starts,
            ops,
        })
    }

    /// Length of the base period, `2T`.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn at(&self, t: f64) -> &DMat {
        let t = t.rem_euclid(self.period);
        let k = self.starts.iter().rposition(|&s| s <= t).unwrap_or(0);
        &self.ops[k]
    }

    /// [`SAMPLES_PER_SEGMENT`] interior points of every segment of `[0, 2T)`.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut ends = self.starts[1..].to_vec();
        ends.push(self.period);
        self.starts
            .iter()
            .zip(ends)
            .flat_map(|(&a, b)| {
                (0..SAMPLES_PER_SEGMENT)
                    .map(move |k| a + (k as f64 + 0.5) * (b - a) / SAMPLES_PER_SEGMENT as f64)
            })
            .collect()
    }
}

/// Draws a unitary from the QR decomposition of a complex Gaussian matrix.
pub fn random_unitary(dim: usize, seed: u64) -> DMat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { rng.sample(StandardNormal) };
    let m = DMat::from_fn(dim, dim, |_, _| Complex64::new(gauss(), gauss()));
    m.qr().q()
}

fn max_over<F: Fn(f64) -> Result<f64>>(times: &[f64], f: F) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        worst = worst.max(f(t)?);
    }
    Ok(worst)
}

/// Sample times for the rotation-operator relations.
fn kick_times(period: f64) -> Vec<f64> {
    (0..12).map(|k| (k as f64 + 0.37) * period / 6.0).collect()
}

/// Group-algebra checks of the ladder with the phase-fixed `X` and the
/// interaction-picture mirror.
pub fn group_algebra_report(cfg: &LadderConfig) -> Result<Vec<SymmetryReport>> {
    let x = build_x_operator(cfg)?;
    let g_int = interaction_picture_element(cfg, &SymmetryElement::mirror(cfg)?)?;
    let mut reports = drive_relation_reports(cfg, &x, &g_int.matrix)?;
    reports.extend(rotation_relation_reports(cfg, &x, &g_int.matrix)?);
    Ok(reports)
}

/// The relations on `H_int`, `X` and `g^int` alone, with caller-supplied
/// `X` and `g^int` (e.g. for negative controls).
pub fn drive_relation_reports(cfg: &LadderConfig, x: &DMat, g_int: &DMat) -> Result<Vec<SymmetryReport>> {
    let tol = ALGEBRA_TOLERANCE;
    let period = cfg.period();
    let drive = InteractionDrive::ladder(cfg)?;
    let times = drive.sample_times();
    let conj = |u: &DMat, a: &DMat| u * a * u.adjoint();
    let dim = x.nrows();
    let identity = DMat::identity(dim, dim);
    let g_m = build_mirror_unitary(cfg.l)?;

    let mut reports = Vec::new();
    reports.push(SymmetryReport::new(
        "X H_int(t) X^-1 = H_int(t - T)",
        max_over(&times, |t| Ok(spectral_norm(&(conj(x, drive.at(t)) - drive.at(t - period)))))?,
        tol,
    ));
    reports.push(SymmetryReport::new(
        "g^int H_int(t) g^int^-1 = H_int(t + T/2)",
        max_over(&times, |t| {
            Ok(spectral_norm(&(conj(g_int, drive.at(t)) - drive.at(t + 0.5 * period))))
        })?,
        tol,
    ));
    reports.push(SymmetryReport::new(
        "g^int X g^int^-1 = X",
        phase_aligned_residual(&conj(g_int, x), x),
        tol,
    ));
    reports.push(SymmetryReport::new(
        "[g^int]^2 = X^-1 g^2",
        phase_aligned_residual(&(g_int * g_int), &(x.adjoint() * &g_m * &g_m)),
        tol,
    ));
    reports.push(SymmetryReport::new("X^2 = 1", spectral_norm(&(x * x - &identity)), tol));
    Ok(reports)
}

/// Relations of the rotation operators `K^[1]`, `K^[2]` and of `D_0..D_2`
/// under `X` and `g^int`.
pub fn rotation_relation_reports(cfg: &LadderConfig, x: &DMat, g_int: &DMat) -> Result<Vec<SymmetryReport>> {
    let tol = ALGEBRA_TOLERANCE;
    let period = cfg.period();
    let conj = |u: &DMat, a: &DMat| u * a * u.adjoint();
    let mut reports = Vec::new();
    let table = FourierTable::ladder(cfg)?;
    let kt = kick_times(period);
    for order in 1..=2 {
        let kick = |t: f64| table.kick(t, order, Route::Exact);
        reports.push(SymmetryReport::new(
            format!("X K{order}(t) X^-1 = K{order}(t - T)"),
            max_over(&kt, |t| Ok(spectral_norm(&(conj(x, &kick(t)?) - kick(t - period)?))))?,
            tol,
        ));
        reports.push(SymmetryReport::new(
            format!("g^int K{order}(t) g^int^-1 = K{order}(t + T/2)"),
            max_over(&kt, |t| {
                Ok(spectral_norm(&(conj(g_int, &kick(t)?) - kick(t + 0.5 * period)?)))
            })?,
            tol,
        ));
    }
    for n in 0..=2 {
        let d = dn_from_table(&table, n)?;
        let scale = 1.0 + spectral_norm(&d);
        reports.push(SymmetryReport::new(
            format!("[X, D{n}] = 0"),
            spectral_norm(&crate::dense::commutator(x, &d)) / scale,
            tol,
        ));
        reports.push(SymmetryReport::new(
            format!("[g^int, D{n}] = 0"),
            spectral_norm(&crate::dense::commutator(g_int, &d)) / scale,
            tol,
        ));
    }
    Ok(reports)
}

/// `U_int(t2, t1) = U_0(t2)^-1 U(t2, t1) U_0(t1)`.
pub fn interaction_evolution(cfg: &LadderConfig, t2: f64, t1: f64) -> Result<DMat> {
    let protocol = build_protocol(cfg)?;
    let u = dense_evolution_operator(&protocol, t1, t2)?;
    Ok(u0_at(cfg, t2)?.adjoint() * u * u0_at(cfg, t1)?)
}

/// Phase-aligned residual of `g^int U_int(t, 0) g^int^-1 = U_int(t + T/2, T/2)`.
pub fn interaction_evolution_mirror_residual(cfg: &LadderConfig, t: f64) -> Result<f64> {
    let g_int = interaction_picture_element(cfg, &SymmetryElement::mirror(cfg)?)?;
    let half = 0.5 * cfg.period();
    let lhs = g_int.act(&interaction_evolution(cfg, t, 0.0)?);
    Ok(phase_aligned_residual(&lhs, &interaction_evolution(cfg, t + half, half)?))
}

/// Phase-aligned residual of `g'_M U_n(0) [g^int_M]^-1 = U_n(0) e^{i D_n T/2}`
/// with `g'_M = U(T/2)^-1 g_M` and `U_n = e^{-i K_n}`.
pub fn projective_mirror_residual(cfg: &LadderConfig, n: usize) -> Result<f64> {
    let table = FourierTable::ladder(cfg)?;
    let g = build_mirror_unitary(cfg.l)?;
    let g_int = interaction_picture_element(cfg, &SymmetryElement::mirror(cfg)?)?;
    let half = 0.5 * cfg.period();
    let g_proj = dense_evolution_operator(&build_protocol(cfg)?, 0.0, half)?.adjoint() * g;
    let frame = expm_hermitian(&kick_sum(&table, 0.0, n)?, 1.0);
    let lhs = g_proj * &frame * g_int.matrix.adjoint();
    let rhs = frame * expm_hermitian(&dn_from_table(&table, n)?, -half);
    Ok(phase_aligned_residual(&lhs, &rhs))
}

/// Norms certifying that `op` is a valid probe of the mirror symmetry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableConditions {
    /// `|| g_M O g_M^-1 - alpha O ||` (string level).
    pub mirror: f64,
    /// Bound on `|| [X, O] ||`.
    pub x_commutator: f64,
    /// Bound on `|| [D_0, O] ||`; recorded, not required to vanish.
    pub d0_commutator: f64,
}

/// String-level conditions on `op` for mirror eigenvalue `alpha_sign`;
/// valid at any size.
pub fn observable_conditions(cfg: &LadderConfig, op: &OperatorSum, alpha_sign: f64) -> Result<ObservableConditions> {
    let mirror = mirror_transform(op, cfg.l).max_difference(&op.scaled(alpha_sign));
    let x = resonant_period_string(cfg)?;
    Ok(ObservableConditions {
        mirror,
        x_commutator: commutator(&x, op)?.simplify().norm_bound(),
        d0_commutator: commutator(&closed_form_d0(cfg)?, op)?.simplify().norm_bound(),
    })
}

/// `r(m) = <O(mT + T/2)> - alpha_sign <O(mT)>` per period.
pub fn micromotion_residual(
    traj: &[TrajectoryRecord],
    half_period: f64,
    alpha_sign: f64,
    which: OddObservable,
) -> Result<Vec<(usize, f64)>> {
    if alpha_sign.abs() != 1.0 {
        return Err(Error::InvalidArgument(format!("alpha_sign must be +1 or -1, got {alpha_sign}")));
    }
    Ok(paired_samples(traj, half_period)?
        .into_iter()
        .map(|(zero, half)| (zero.m, which.value(half) - alpha_sign * which.value(zero)))
        .collect())
}
