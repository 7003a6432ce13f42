use std::f64::consts::PI;

use floquet_core::ladder::{build_protocol, closed_form_d0, odd_operator};
use floquet_core::observables::{expectation, odd_observable_series, OddObservable, TrajectoryRecord};
use floquet_core::propagator::dense_evolution_operator;
use floquet_core::{evolve_protocol, states, KrylovSettings, LadderConfig, StateVector};
use std::collections::BTreeMap;

#[test]
fn trajectory_matches_dense_floquet_operator() {
    let cfg = LadderConfig::reference(4, 8.0 * PI);
    let protocol = build_protocol(&cfg).unwrap();
    let psi0 = states::neel_state(&cfg).unwrap();
    let half = 0.5 * cfg.period();
    let u_half = dense_evolution_operator(&protocol, 0.0, half).unwrap();
    let u_period = dense_evolution_operator(&protocol, 0.0, cfg.period()).unwrap();
    let o = odd_operator(&cfg);
    let mut records = Vec::new();
    let mut exact = psi0.to_column();
    evolve_protocol(&psi0, &protocol, 30, &[0.0, half], &KrylovSettings::default(), |s| {
        let reference = if s.offset_index == 0 {
            exact.clone()
        } else {
            let mid = &u_half * &exact;
            exact = &u_period * &exact;
            mid
        };
        let oracle = StateVector::from_column(cfg.n_spins(), &reference)?;
        assert!(s.state.fidelity(&oracle) > 1.0 - 1e-10, "m = {}", s.m);
        records.push(TrajectoryRecord {
            m: s.m,
            t: s.t,
            offset: s.offset,
            o_odd: expectation(&o, s.state)?,
            o_odd2: 0.0,
            s_ent: 0.0,
            energy_density: 0.0,
            extra: BTreeMap::new(),
        });
        Ok(())
    })
    .unwrap();
    let series = odd_observable_series(&records, half, OddObservable::Upper).unwrap();
    assert_eq!(series.len(), 30);
    for k in 0..30 {
        assert!((series.symmetric[k] - series.at_period[k] - series.at_half[k]).abs() < 1e-15);
    }
}

#[test]
fn d0_eigenstate_is_stationary_under_d0() {
    let cfg = LadderConfig::reference(4, 8.0 * PI).with_lambdas(0.8, 1.2);
    let d0 = closed_form_d0(&cfg).unwrap();
    let psi = states::d0_eigenstate(&cfg, 3).unwrap();
    let e = expectation(&d0, &psi).unwrap();
    let evolved = floquet_core::evolve_segment(&psi, &d0, 2.7, &KrylovSettings::default()).unwrap();
    assert!((expectation(&d0, &evolved).unwrap() - e).abs() < 1e-10);
    assert!(evolved.fidelity(&psi) > 1.0 - 1e-10);
}
