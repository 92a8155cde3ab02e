mod common;

use std::sync::Arc;

use heom_core::bath::{BathModes, BathSpec, Mode};
use heom_core::control::{hamiltonian, DriveParams};
use heom_core::hierarchy::*;
use heom_core::qubit::Bloch4;
use heom_core::HeomError;
use proptest::prelude::*;

#[test]
fn small_hierarchy_matches_dense_matrix_exponential() {
    let worst = common::small_instance_max_deviation();
    assert!(worst < 1e-8, "largest ADO difference {worst:e}");
}

fn test_modes() -> BathModes {
    BathModes::new(vec![
        Mode { d_re: 0.03, d_im: -0.01, omega: 0.0, gamma: 2.0 },
        Mode { d_re: 0.02, d_im: 0.004, omega: 0.0, gamma: 0.4 },
    ])
    .unwrap()
}

fn driven_root(config: &HeomConfig, t_end: f64) -> Vec<Bloch4<f64>> {
    let mut prop = Propagator::<f64>::new(config).unwrap();
    let mut state = HierarchyState::factorized(prop.indices().clone(), Bloch4::excited());
    let drive = DriveParams::resonant(1.0, 0.5, 0.3);
    let mut out = Vec::new();
    prop.evolve(&mut state, &|t| hamiltonian(&drive, t), t_end, |s| out.push(s.root())).unwrap();
    out
}

#[test]
fn rk4_error_falls_sixteenfold_when_the_step_halves() {
    let mut config = HeomConfig::new(test_modes(), 3);
    let t_end = 4.0;
    let mut finals = Vec::new();
    for dt in [0.08, 0.04, 0.02] {
        config.dt = dt;
        finals.push(*driven_root(&config, t_end).last().unwrap());
    }
    let e1 = finals[0].sub(finals[1]).max_abs();
    let e2 = finals[1].sub(finals[2]).max_abs();
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}, differences {e1:e} {e2:e}");
}

#[test]
fn pruning_leaves_the_reduced_dynamics_unchanged() {
    let mut full = HeomConfig::new(test_modes(), 3);
    full.prune = false;
    let mut pruned = full.clone();
    pruned.prune = true;
    assert!(pruned.index_set().unwrap().len() < full.index_set().unwrap().len());
    let a = driven_root(&full, 3.0);
    let b = driven_root(&pruned, 3.0);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(x.sub(*y).max_abs() < 1e-13);
    }
}

#[test]
fn hierarchy_preserves_trace_and_keeps_the_root_physical() {
    let config = HeomConfig::new(test_modes(), 3);
    for r in driven_root(&config, 6.0) {
        assert!((r.trace() - 1.0).abs() < 1e-12);
        assert!(r.length() <= 1.0 + 1e-8);
    }
}

#[test]
fn snapshot_round_trips_and_rejects_other_runs() {
    let config = HeomConfig::new(test_modes(), 2);
    let spec = BathSpec::reference(1.0);
    let mut prop = Propagator::<f64>::new(&config).unwrap();
    let mut state = HierarchyState::factorized(prop.indices().clone(), Bloch4::excited());
    prop.evolve(&mut state, &|t| hamiltonian(&DriveParams::idle(1.0), t), 1.0, |_| {}).unwrap();

    let key = SnapshotKey::new(&spec, &config.modes, config.n_max, config.dt);
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &key, &state).unwrap();
    let back: HierarchyState<f64> = read_snapshot(bytes.as_slice(), &key, prop.indices().clone()).unwrap();
    assert_eq!(back.data, state.data);
    assert_eq!(back.t, state.t);

    let other = SnapshotKey::new(&BathSpec::reference(0.5), &config.modes, config.n_max, config.dt);
    assert_ne!(other.id(), key.id());
    let err = read_snapshot::<f64, _>(bytes.as_slice(), &other, prop.indices().clone()).unwrap_err();
    assert!(matches!(err, HeomError::SnapshotMismatch(_)));

    let deeper = HeomConfig::new(test_modes(), 3);
    let err = read_snapshot::<f64, _>(bytes.as_slice(), &key, Arc::new(deeper.index_set().unwrap())).unwrap_err();
    assert!(matches!(err, HeomError::SnapshotMismatch(_)));

    assert!(read_snapshot::<f64, _>(&b"not a snapshot at all"[..], &key, prop.indices().clone()).is_err());
}

#[test]
fn memory_budget_is_enforced() {
    let modes = BathModes::new(vec![Mode { d_re: 0.01, d_im: 0.0, omega: 0.5, gamma: 1.0 }; 12]).unwrap();
    let mut config = HeomConfig::new(modes, 10);
    config.memory_budget = 1 << 20;
    assert!(matches!(Propagator::<f64>::new(&config), Err(HeomError::ResourceLimit { .. })));
}

#[test]
fn blow_up_is_reported_with_its_location() {
    let modes = BathModes::new(vec![Mode { d_re: 0.05, d_im: 0.0, omega: 0.0, gamma: 50.0 }]).unwrap();
    let mut config = HeomConfig::new(modes, 3);
    config.dt = 0.5;
    let mut prop = Propagator::<f64>::new(&config).unwrap();
    let mut state = HierarchyState::factorized(prop.indices().clone(), Bloch4::excited());
    let err = prop.evolve(&mut state, &|t| hamiltonian(&DriveParams::idle(1.0), t), 200.0, |_| {}).unwrap_err();
    assert!(matches!(err, HeomError::NonFinite { .. }), "{err}");
}

#[test]
fn reference_counts() {
    assert_eq!(enumerate_indices(10, 3).unwrap().len(), 1771);
    assert_eq!(binomial(24, 10), 1_961_256);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn enumeration_matches_brute_force(k in 1usize..4, n_max in 0usize..4) {
        let set = enumerate_indices(k, n_max).unwrap();
        let slots = 2 * k;
        let mut count = 0usize;
        let mut tuple = vec![0u8; slots];
        loop {
            let depth: usize = tuple.iter().map(|&v| v as usize).sum();
            if depth <= n_max {
                count += 1;
                let i = set.position(&tuple[..k], &tuple[k..]).unwrap();
                let (m, n) = set.get(i);
                prop_assert_eq!(&m[..], &tuple[..k]);
                prop_assert_eq!(&n[..], &tuple[k..]);
            }
            let mut j = 0;
            loop {
                if j == slots {
                    break;
                }
                tuple[j] += 1;
                if tuple[j] as usize > n_max {
                    tuple[j] = 0;
                    j += 1;
                } else {
                    break;
                }
            }
            if j == slots {
                break;
            }
        }
        prop_assert_eq!(set.len(), count);
        prop_assert_eq!(set.len() as u128, binomial((slots + n_max) as u64, n_max as u64));
    }
}
