//! Experiment pipelines behind the CLI modes.

use std::collections::BTreeMap;

use floquet_core::dense::spectral_norm;
use floquet_core::ladder::{
    build_protocol, center_coupling, closed_form_d0, mirror_transform, odd_operator, odd_operator_2,
    resonant_a, weak_a, x_closed_form_residual,
};
use floquet_core::observables::{
    entanglement_entropy, expectation_compiled, odd_observable_series, page_value, plateau_detect,
    OddObservable, OddSeries, Plateau, TrajectoryRecord,
};
use floquet_core::symmetry::{
    check_unitary_dynamical_symmetry, drive_relation_reports, group_algebra_report,
    interaction_evolution_mirror_residual, interaction_picture_element, observable_conditions,
    projective_mirror_residual, random_unitary, ObservableConditions, SymmetryElement, SymmetryReport,
    ALGEBRA_TOLERANCE,
};
use floquet_core::vanvleck::{framed_propagator_error, FourierTable, Route};
use floquet_core::{evolve_protocol, states, LadderConfig, StateVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Derived, InitialState, Mode, PlateauSeries, PlateauSettings, RunSpec};
use crate::error::CliError;

/// Largest ladder (in spins) on which the dense symmetry and expansion
/// checks are run.
pub const DENSE_REPORT_QUBITS: usize = 8;

/// Seed of the random unitary used as a negative control.
pub const NEGATIVE_CONTROL_SEED: u64 = 20;

pub fn initial_state(state: &InitialState, cfg: &LadderConfig) -> Result<StateVector, CliError> {
    let psi = match state {
        InitialState::Neel => states::neel_state(cfg),
        InitialState::RandomProduct(seed) => states::random_product_state(cfg.n_spins(), *seed),
        InitialState::D0Eigenstate(index) => states::d0_eigenstate(cfg, *index),
        InitialState::Basis(bits) => {
            if bits.len() != cfg.n_spins() {
                return Err(CliError::Config {
                    path: "run.initial_state".into(),
                    message: format!("basis state needs {} bits, got {}", cfg.n_spins(), bits.len()),
                });
            }
            states::basis_from_bits(bits)
        }
    };
    psi.map_err(CliError::core("observables"))
}

/// Samples every offset of every period; the entropy is only evaluated on
/// periods divisible by `spec.entropy_stride` (NaN elsewhere).
pub fn run_trajectory(spec: &RunSpec, cfg: &LadderConfig) -> Result<Vec<TrajectoryRecord>, CliError> {
    let protocol = build_protocol(cfg).map_err(CliError::core("ladder_model"))?;
    let psi = initial_state(&spec.initial_state, cfg)?;
    let o1 = odd_operator(cfg).compile();
    let o2 = odd_operator_2(cfg).compile();
    let d0 = closed_form_d0(cfg).map_err(CliError::core("ladder_model"))?.compile();
    let n_spins = cfg.n_spins() as f64;
    let period = cfg.period();
    let offsets: Vec<f64> = spec.sample_offsets.iter().map(|f| f * period).collect();
    let mut records = Vec::with_capacity(spec.n_periods * offsets.len());
    let mut observe = |s: floquet_core::Sample<'_>| -> floquet_core::Result<()> {
        let s_ent = if s.m % spec.entropy_stride == 0 {
            entanglement_entropy(s.state, cfg.l)?
        } else {
            f64::NAN
        };
        records.push(TrajectoryRecord {
            m: s.m,
            t: s.t,
            offset: s.offset,
            o_odd: expectation_compiled(&o1, s.state)?,
            o_odd2: expectation_compiled(&o2, s.state)?,
            s_ent,
            energy_density: expectation_compiled(&d0, s.state)? / n_spins,
            extra: BTreeMap::new(),
        });
        Ok(())
    };
    evolve_protocol(&psi, &protocol, spec.n_periods, &offsets, &spec.krylov, &mut observe)
        .map_err(CliError::core("propagator"))?;
    Ok(records)
}

/// Detected plateau in period units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauAnnotation {
    pub series: PlateauSeries,
    pub window: usize,
    pub slope_tol: f64,
    /// `found`, `none` or `degenerate`.
    pub status: String,
    pub start_m: Option<usize>,
    pub end_m: Option<usize>,
    pub length_periods: usize,
}

/// Per-period plateau series at offset 0: `(m, value)`.
pub fn plateau_series(records: &[TrajectoryRecord], series: PlateauSeries) -> Vec<(usize, f64)> {
    records
        .iter()
        .filter(|r| r.offset == 0.0)
        .map(|r| {
            let v = match series {
                PlateauSeries::Entropy => r.s_ent,
                PlateauSeries::EnergyDensity => r.energy_density,
            };
            (r.m, v)
        })
        .filter(|(_, v)| v.is_finite())
        .collect()
}

pub fn detect_plateau(
    records: &[TrajectoryRecord],
    settings: &PlateauSettings,
) -> Result<PlateauAnnotation, CliError> {
    let samples = plateau_series(records, settings.series);
    let stride = match samples.as_slice() {
        [a, b, ..] => b.0 - a.0,
        _ => 1,
    };
    let window = (settings.window / stride).max(2);
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let mut annotation = PlateauAnnotation {
        series: settings.series,
        window: settings.window,
        slope_tol: settings.slope_tol,
        status: "none".into(),
        start_m: None,
        end_m: None,
        length_periods: 0,
    };
    if values.len() < 3 * window {
        annotation.status = "too-short".into();
        return Ok(annotation);
    }
    // the slope tolerance is per period, the detector works per sample
    let found = plateau_detect(&values, window, settings.slope_tol * stride as f64)
        .map_err(CliError::core("observables"))?;
    if let Some((a, b)) = found.range() {
        annotation.start_m = Some(samples[a].0);
        annotation.end_m = Some(samples[b].0);
        annotation.length_periods = samples[b].0 - samples[a].0 + stride;
    }
    annotation.status = match found {
        Plateau::Found { .. } => "found",
        Plateau::NoneFound => "none",
        Plateau::Degenerate { .. } => "degenerate",
    }
    .into();
    Ok(annotation)
}

/// Statistics of `O^s` for one odd observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicromotionSummary {
    /// `max_m |<O(mT)>|` over the whole run.
    pub max_abs_at_period: f64,
    /// Mean of `O^s` over the plateau (whole run when none was found).
    pub plateau_mean: f64,
    /// Mean of `|O^s|` over the same periods.
    pub plateau_mean_abs: f64,
    pub plateau_max_abs: f64,
    pub n_periods_averaged: usize,
}

pub fn summarize_micromotion(series: &OddSeries, plateau: &PlateauAnnotation) -> MicromotionSummary {
    let (lo, hi) = match (plateau.start_m, plateau.end_m) {
        (Some(a), Some(b)) => (a, b),
        _ => (0, usize::MAX),
    };
    let inside: Vec<f64> = series
        .m
        .iter()
        .zip(&series.symmetric)
        .filter(|(m, _)| (lo..=hi).contains(*m))
        .map(|(_, v)| *v)
        .collect();
    let n = inside.len().max(1) as f64;
    MicromotionSummary {
        max_abs_at_period: series.at_period.iter().fold(0.0, |a, v| a.max(v.abs())),
        plateau_mean: inside.iter().sum::<f64>() / n,
        plateau_mean_abs: inside.iter().map(|v| v.abs()).sum::<f64>() / n,
        plateau_max_abs: inside.iter().fold(0.0, |a, v| a.max(v.abs())),
        n_periods_averaged: inside.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveReport {
    pub config: LadderConfig,
    pub derived: Derived,
    pub initial_state: String,
    pub seed: Option<u64>,
    pub n_periods: usize,
    pub page_value: f64,
    pub plateau: PlateauAnnotation,
    pub o_odd: MicromotionSummary,
    pub o_odd2: MicromotionSummary,
    pub o_odd_conditions: ObservableConditions,
    pub o_odd2_conditions: ObservableConditions,
}

#[derive(Clone, Debug)]
pub struct EvolveResult {
    pub records: Vec<TrajectoryRecord>,
    pub o_odd: OddSeries,
    pub o_odd2: OddSeries,
    pub report: EvolveReport,
}

pub fn run_evolve(spec: &RunSpec) -> Result<EvolveResult, CliError> {
    let cfg = spec.config;
    let records = run_trajectory(spec, &cfg)?;
    let half = 0.5 * cfg.period();
    let series = |which| odd_observable_series(&records, half, which).map_err(CliError::core("observables"));
    let o_odd = series(OddObservable::Upper)?;
    let o_odd2 = series(OddObservable::Lower)?;
    let plateau = detect_plateau(&records, &spec.plateau)?;
    let conditions = |op| observable_conditions(&cfg, &op, -1.0).map_err(CliError::core("symmetry"));
    let report = EvolveReport {
        config: cfg,
        derived: spec.derived(),
        initial_state: spec.initial_state.to_string(),
        seed: spec.initial_state.seed(),
        n_periods: spec.n_periods,
        page_value: page_value(cfg.l),
        o_odd: summarize_micromotion(&o_odd, &plateau),
        o_odd2: summarize_micromotion(&o_odd2, &plateau),
        plateau,
        o_odd_conditions: conditions(odd_operator(&cfg))?,
        o_odd2_conditions: conditions(odd_operator_2(&cfg))?,
    };
    Ok(EvolveResult {
        records,
        o_odd,
        o_odd2,
        report,
    })
}

/// One point of a `(lambda_a, lambda_b)` sweep.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub result: EvolveResult,
}

/// Runs [`run_evolve`] on every grid point, in parallel.
pub fn run_sweep(spec: &RunSpec, grid: &[(f64, f64)]) -> Result<Vec<SweepPoint>, CliError> {
    if grid.is_empty() {
        return Err(CliError::Config {
            path: "run.lambda_grid".into(),
            message: "sweep needs at least one (lambda_a, lambda_b) point".into(),
        });
    }
    grid.par_iter()
        .map(|&(a, b)| {
            let mut point = spec.clone();
            point.config = spec.config.with_lambdas(a, b);
            if let Err(floquet_core::Error::InvalidConfig { field, message }) = point.config.validate() {
                return Err(CliError::Config {
                    path: format!("run.lambda_grid.{field}"),
                    message,
                });
            }
            Ok(SweepPoint {
                lambda_a: a,
                lambda_b: b,
                result: run_evolve(&point)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheckReport {
    pub config: LadderConfig,
    pub derived: Derived,
    /// Pauli-string identities, valid at any size.
    pub string_level: Vec<SymmetryReport>,
    /// Dense checks; empty above [`DENSE_REPORT_QUBITS`].
    pub dense: Vec<SymmetryReport>,
    /// Checks fed a random unitary; every entry is expected to fail.
    pub negative_controls: Vec<SymmetryReport>,
    pub o_odd_conditions: ObservableConditions,
    pub o_odd2_conditions: ObservableConditions,
    pub notes: Vec<String>,
}

impl SymmetryCheckReport {
    pub fn all_passed(&self) -> bool {
        self.string_level.iter().chain(&self.dense).all(|r| r.passed)
            && self.negative_controls.iter().all(|r| !r.passed)
    }
}

pub fn run_symmetry_check(spec: &RunSpec) -> Result<SymmetryCheckReport, CliError> {
    let cfg = spec.config;
    let l = cfg.l;
    let h0a = resonant_a(&cfg);
    let h0b = mirror_transform(&h0a, l);
    let va = weak_a(&cfg);
    let vb = mirror_transform(&va, l);
    let sc_a = center_coupling(&cfg, true);
    let sc_b = center_coupling(&cfg, false);
    let string_level = vec![
        SymmetryReport::new("g_M H_0a g_M^-1 = H_0b", mirror_transform(&h0a, l).max_difference(&h0b), 0.0),
        SymmetryReport::new("g_M H_0b g_M^-1 = H_0a", mirror_transform(&h0b, l).max_difference(&h0a), 0.0),
        SymmetryReport::new("g_M V_a g_M^-1 = V_b", mirror_transform(&va, l).max_difference(&vb), 0.0),
        SymmetryReport::new("g_M V^sc_a g_M^-1 = V^sc_b", mirror_transform(&sc_a, l).max_difference(&sc_b), 0.0),
        SymmetryReport::new(
            "U_0(T) = X closed form",
            x_closed_form_residual(&cfg).map_err(CliError::core("ladder_model"))?,
            1e-10,
        ),
    ];
    let mut notes = Vec::new();
    let mut dense = Vec::new();
    let mut negative_controls = Vec::new();
    if cfg.n_spins() <= DENSE_REPORT_QUBITS {
        let protocol = build_protocol(&cfg).map_err(CliError::core("ladder_model"))?;
        let mirror = SymmetryElement::mirror(&cfg).map_err(CliError::core("symmetry"))?;
        dense.push(
            check_unitary_dynamical_symmetry(&protocol, &mirror, ALGEBRA_TOLERANCE).map_err(CliError::core("symmetry"))?,
        );
        dense.extend(group_algebra_report(&cfg).map_err(CliError::core("symmetry"))?);
        let period = cfg.period();
        let mut worst: f64 = 0.0;
        for s in [0.25, 0.5, 1.0, 1.5] {
            worst = worst.max(interaction_evolution_mirror_residual(&cfg, s * period).map_err(CliError::core("symmetry"))?);
        }
        dense.push(SymmetryReport::new(
            "g^int U_int(t, 0) g^int^-1 = U_int(t + T/2, T/2)",
            worst,
            ALGEBRA_TOLERANCE,
        ));
        let mut doubled = cfg;
        doubled.omega *= 2.0;
        for n in 0..=2 {
            // approximate relation: only its shrinking with frequency is checked
            let r = projective_mirror_residual(&cfg, n).map_err(CliError::core("symmetry"))?;
            let r2 = projective_mirror_residual(&doubled, n).map_err(CliError::core("symmetry"))?;
            dense.push(SymmetryReport::new(
                format!("g'_M U_{n}(0) g^int^-1 = U_{n}(0) e^(i D_{n} T/2) at 2 omega, against the omega residual"),
                r2,
                r,
            ));
        }
        let x = floquet_core::ladder::build_x_operator(&cfg).map_err(CliError::core("ladder_model"))?;
        let g_int = interaction_picture_element(&cfg, &mirror).map_err(CliError::core("symmetry"))?;
        let fake = random_unitary(x.nrows(), NEGATIVE_CONTROL_SEED);
        let mut with_fake_x = drive_relation_reports(&cfg, &fake, &g_int.matrix).map_err(CliError::core("symmetry"))?;
        let mut with_fake_g = drive_relation_reports(&cfg, &x, &fake).map_err(CliError::core("symmetry"))?;
        for r in with_fake_x.iter_mut().chain(with_fake_g.iter_mut()) {
            r.relation = format!("[random unitary] {}", r.relation);
        }
        negative_controls.push(with_fake_x.remove(0));
        negative_controls.push(with_fake_g.remove(1));
    } else {
        notes.push(format!(
            "dense checks skipped: {} spins exceeds the limit of {DENSE_REPORT_QUBITS}",
            cfg.n_spins()
        ));
    }
    let conditions = |op| observable_conditions(&cfg, &op, -1.0).map_err(CliError::core("symmetry"));
    Ok(SymmetryCheckReport {
        config: cfg,
        derived: spec.derived(),
        string_level,
        dense,
        negative_controls,
        o_odd_conditions: conditions(odd_operator(&cfg))?,
        o_odd2_conditions: conditions(odd_operator_2(&cfg))?,
        notes,
    })
}

/// One row of the van Vleck verification table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanVleckRow {
    pub order: usize,
    /// `||V^[order]||` (spectral norm).
    pub norm: f64,
    /// `||V^[order]||` with the frequency doubled.
    pub norm_at_double_omega: f64,
    pub hermiticity_defect: f64,
    /// `||V^[order]_exact - V^[order]_truncated||` at the default cutoff.
    pub truncation_difference: f64,
    /// `||int K^[order] dt||` over the base period (orders >= 1).
    pub kick_gauge_residual: Option<f64>,
    /// Framed two-period propagator error of `D_order`.
    pub framed_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanVleckReport {
    pub config: LadderConfig,
    pub derived: Derived,
    pub m_max: usize,
    /// `||D_0 - closed form||`.
    pub closed_form_residual: f64,
    pub rows: Vec<VanVleckRow>,
}

pub fn run_vanvleck_verify(spec: &RunSpec) -> Result<VanVleckReport, CliError> {
    let cfg = spec.config;
    if cfg.n_spins() > DENSE_REPORT_QUBITS {
        return Err(CliError::core("vanvleck")(floquet_core::Error::SizeGuard {
            what: "vanvleck-verify",
            n_sites: cfg.n_spins(),
            limit: DENSE_REPORT_QUBITS,
        }));
    }
    let table = FourierTable::ladder(&cfg).map_err(CliError::core("vanvleck"))?;
    let mut doubled = cfg;
    doubled.omega *= 2.0;
    let table2 = FourierTable::ladder(&doubled).map_err(CliError::core("vanvleck"))?;
    let closed = floquet_core::to_dense(&closed_form_d0(&cfg).map_err(CliError::core("ladder_model"))?)
        .map_err(CliError::core("pauli_core"))?;
    let d0 = table.effective_term(0, Route::Exact).map_err(CliError::core("vanvleck"))?;
    let mut rows = Vec::new();
    for order in 0..=spec.order {
        let term = table.effective_term(order, Route::Exact).map_err(CliError::core("vanvleck"))?;
        let truncated = table
            .effective_term(order, Route::Truncated(table.m_max()))
            .map_err(CliError::core("vanvleck"))?;
        let term2 = table2.effective_term(order, Route::Exact).map_err(CliError::core("vanvleck"))?;
        rows.push(VanVleckRow {
            order,
            norm: spectral_norm(&term),
            norm_at_double_omega: spectral_norm(&term2),
            hermiticity_defect: spectral_norm(&(&term - term.adjoint())),
            truncation_difference: spectral_norm(&(&term - truncated)),
            kick_gauge_residual: if order == 0 {
                None
            } else {
                Some(table.kick_gauge_residual(order, 64).map_err(CliError::core("vanvleck"))?)
            },
            framed_error: framed_propagator_error(&cfg, order).map_err(CliError::core("vanvleck"))?,
        });
    }
    Ok(VanVleckReport {
        config: cfg,
        derived: spec.derived(),
        m_max: table.m_max(),
        closed_form_residual: spectral_norm(&(d0 - closed)),
        rows,
    })
}

/// Result of any mode.
#[derive(Clone, Debug)]
pub enum Bundle {
    Evolve(Box<EvolveResult>),
    SymmetryCheck(SymmetryCheckReport),
    VanvleckVerify(VanVleckReport),
    Sweep(Vec<SweepPoint>),
}

pub fn run_experiment(spec: &RunSpec) -> Result<Bundle, CliError> {
    Ok(match spec.mode {
        Mode::Evolve => Bundle::Evolve(Box::new(run_evolve(spec)?)),
        Mode::SymmetryCheck => Bundle::SymmetryCheck(run_symmetry_check(spec)?),
        Mode::VanvleckVerify => Bundle::VanvleckVerify(run_vanvleck_verify(spec)?),
        Mode::Sweep => Bundle::Sweep(run_sweep(spec, &spec.lambda_grid)?),
    })
}
