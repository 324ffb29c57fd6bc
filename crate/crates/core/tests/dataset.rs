use std::collections::HashSet;
use std::sync::Arc;

use deeponet::dataset::*;
use deeponet::solvers::{antiderivative_exact, PdeConfig};
use deeponet::spaces::{GrfSampler, InputFunction, InputSpace, SensorGrid};
use deeponet::Error;
use proptest::prelude::*;

const GRF: InputSpace = InputSpace::Grf { length_scale: 0.2 };

fn fine() -> Arc<SensorGrid> {
    Arc::new(SensorGrid::uniform(0.0, 1.0, 1001).unwrap())
}

#[test]
fn hundred_functions_hundred_locations() {
    let ds = build_ode_dataset(Problem::Antiderivative, GRF, 100, 100, 100, 1).unwrap();
    assert_eq!(ds.len(), 10_000);
    assert_eq!(ds.u_ids().len(), 100);
    assert_eq!(ds.m(), 100);
    assert_eq!(ds.dropped(), 0);
    assert!(ds.records().all(|r| r.u_sensors.len() == 100));
}

#[test]
fn constant_one_gives_target_equal_location() {
    let u = InputFunction::constant(fine(), 1.0).unwrap();
    let ds = build_ode_dataset_from_inputs(Problem::Antiderivative, &[u], 10, 1, 4).unwrap();
    assert_eq!(ds.len(), 1);
    let r = ds.record(0);
    assert!((r.target - r.y[0]).abs() < 1e-10);
    assert!(r.u_sensors.iter().all(|&v| v == 1.0));
}

#[test]
fn builds_are_deterministic() {
    let a = build_ode_dataset(Problem::NonlinearOde, GRF, 20, 30, 3, 9).unwrap();
    let b = build_ode_dataset(Problem::NonlinearOde, GRF, 20, 30, 3, 9).unwrap();
    assert_eq!(a, b);
    let c = build_ode_dataset(Problem::NonlinearOde, GRF, 20, 30, 3, 10).unwrap();
    assert_ne!(a.targets(), c.targets());
}

#[test]
fn antiderivative_targets_match_quadrature_oracle() {
    let seed = 21;
    let ds = build_ode_dataset(Problem::Antiderivative, GRF, 50, 400, 1, seed).unwrap();
    let sampler = GrfSampler::new(0.2, fine()).unwrap();
    for i in (0..ds.len()).step_by(4).take(100) {
        let r = ds.record(i);
        let u = sampler.sample(seed, r.u_id);
        let exact = antiderivative_exact(&u, r.y[0]).unwrap();
        assert!((r.target - exact).abs() < 1e-6, "record {i}: {} vs {exact}", r.target);
    }
}

#[test]
fn pendulum_locations_cover_horizon() {
    let ds = build_ode_dataset(Problem::Pendulum { k: 1.0, horizon: 3.0 }, GRF, 10, 50, 4, 2).unwrap();
    let ys = ds.ys();
    assert!(ys.iter().all(|&y| (0.0..=3.0).contains(&y)));
    assert!(ys.iter().any(|&y| y > 2.0));
    assert_eq!(ds.sensors().last(), 3.0);
}

#[test]
fn divergent_trajectories_are_dropped_and_counted() {
    let ok = InputFunction::constant(fine(), 0.5).unwrap();
    let bad = InputFunction::constant(fine(), -400.0).unwrap();
    let ds = build_ode_dataset_from_inputs(Problem::NonlinearOde, &[ok.clone(), bad.clone(), ok], 5, 3, 0).unwrap();
    assert_eq!(ds.len(), 6);
    assert_eq!(ds.dropped(), 3);
    assert_eq!(ds.u_ids(), &[0, 2]);
    let err = build_ode_dataset_from_inputs(Problem::NonlinearOde, &[bad], 5, 3, 0).unwrap_err();
    assert!(matches!(err, Error::AllDiverged(1)));
}

#[test]
fn invalid_sizes_rejected() {
    assert!(build_ode_dataset(Problem::Antiderivative, GRF, 1, 10, 1, 0).is_err());
    assert!(build_ode_dataset(Problem::Antiderivative, GRF, 10, 0, 1, 0).is_err());
    assert!(build_ode_dataset(Problem::Antiderivative, GRF, 10, 1, 0, 0).is_err());
    let pde = Problem::DiffusionReaction { diffusion: 0.01, reaction: 0.01 };
    assert!(build_ode_dataset(pde, GRF, 10, 1, 1, 0).is_err());
    assert!(build_pde_dataset(GRF, 10, 1, 10_001, 0).is_err());
    assert!(build_pde_dataset(GRF, 10, 1, 0, 0).is_err());
}

#[test]
fn pde_dataset_sizes() {
    let ds = build_pde_dataset(GRF, 100, 100, 1000, 5).unwrap();
    assert_eq!(ds.len(), 100_000);
    assert_eq!(ds.dim_y(), 2);
    for u in 0..100 {
        let cells: HashSet<(u64, u64)> = (u * 1000..(u + 1) * 1000)
            .map(|i| {
                let y = ds.record(i).y;
                (y[0].to_bits(), y[1].to_bits())
            })
            .collect();
        assert_eq!(cells.len(), 1000, "points drawn without replacement");
    }
}

#[test]
fn zero_source_gives_zero_targets() {
    let zero = InputFunction::constant(fine(), 0.0).unwrap();
    let ds = build_pde_dataset_from_inputs(&PdeConfig::default(), &[zero], 20, 500, 1).unwrap();
    assert!(ds.targets().iter().all(|&t| t == 0.0));
}

#[test]
fn exhaustive_sampling_hits_every_grid_point_once() {
    let ds = build_pde_dataset(GRF, 10, 2, 10_000, 3).unwrap();
    for u in 0..2 {
        let cells: HashSet<(u64, u64)> = (u * 10_000..(u + 1) * 10_000)
            .map(|i| {
                let y = ds.record(i).y;
                ((y[0] * 99.0).round() as u64, (y[1] * 99.0).round() as u64)
            })
            .collect();
        assert_eq!(cells.len(), 10_000);
    }
}

#[test]
fn split_examples() {
    let pool = build_ode_dataset(Problem::Antiderivative, GRF, 10, 3, 5, 0).unwrap();
    let (train, test) = split_by_u(&pool, 2, 1, 4).unwrap();
    assert_eq!(train.len(), 10);
    assert_eq!(test.len(), 5);
    let tr: HashSet<u64> = train.records().map(|r| r.u_id).collect();
    assert!(test.records().all(|r| !tr.contains(&r.u_id)));

    let (all, none) = split_by_u(&pool, 3, 0, 4).unwrap();
    assert!(none.is_empty());
    assert_eq!(all.len(), 15);

    let again = split_by_u(&pool, 2, 1, 4).unwrap();
    assert_eq!(again.0, train);
    assert_eq!(again.1, test);
    assert!(split_by_u(&pool, 3, 1, 4).is_err());
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for ds in [
        build_ode_dataset(Problem::Pendulum { k: 1.0, horizon: 1.0 }, GRF, 12, 7, 3, 8).unwrap(),
        build_pde_dataset(GRF, 15, 3, 40, 8).unwrap(),
    ] {
        let path = dir.path().join("ds.bin");
        save_dataset(&ds, &path).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back, ds);
        for (a, b) in back.targets().iter().zip(ds.targets()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn corrupt_files_rejected() {
    let ds = build_ode_dataset(Problem::Antiderivative, GRF, 8, 4, 2, 1).unwrap();
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &ds).unwrap();
    for cut in [3, 20, bytes.len() / 2, bytes.len() - 1] {
        let err = read_dataset(&mut &bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "cut {cut}: {err}");
    }
    let mut wrong = bytes.clone();
    wrong[4] = b'9';
    assert!(matches!(read_dataset(&mut &wrong[..]), Err(Error::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(read_dataset(&mut &extra[..]).is_err());
}

#[test]
fn shape_check_catches_sensor_mismatch() {
    let ds = build_ode_dataset(Problem::Antiderivative, GRF, 8, 2, 2, 1).unwrap();
    assert!(ds.check_shapes(8, 1).is_ok());
    assert!(matches!(ds.check_shapes(10, 1), Err(Error::Shape(_))));
    assert!(ds.check_shapes(8, 2).is_err());
}

#[test]
fn csv_export_header() {
    let ds = build_pde_dataset(GRF, 3, 1, 2, 1).unwrap();
    let mut out = Vec::new();
    ds.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("u_1,u_2,u_3,x,t,target"));
    assert_eq!(lines.count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn split_is_disjoint_and_complete(n_u in 1usize..12, y_per_u in 1usize..4, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let pool = build_ode_dataset(Problem::Antiderivative, GRF, 4, n_u, y_per_u, seed % 1000).unwrap();
        let train_u = ((n_u as f64) * frac) as usize;
        let (train, test) = split_by_u(&pool, train_u, n_u - train_u, seed).unwrap();
        let tr: HashSet<u64> = train.u_ids().iter().copied().collect();
        let te: HashSet<u64> = test.u_ids().iter().copied().collect();
        prop_assert!(tr.is_disjoint(&te));
        prop_assert_eq!(tr.len() + te.len(), n_u);
        prop_assert_eq!(train.len() + test.len(), pool.len());
        prop_assert!(train.records().chain(test.records()).all(|r| r.u_sensors.len() == 4));
    }
}
