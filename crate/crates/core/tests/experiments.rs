use num_complex::Complex64;
use saf_core::harness::io::{format_model, parse_model, read_model, read_observation, write_model, write_observation};
use saf_core::harness::{
    bench_summary, run_single_solve, run_success_sweep, run_timing_bench, success_rates,
    ExperimentKind, ExperimentSpec,
};
use saf_core::prelude::*;

#[test]
fn success_sweep_extremes() {
    let mut spec = ExperimentSpec::new(ExperimentKind::SuccessSweep, Field::Real);
    spec.ratios = vec![1.0, 3.0];
    spec.trials = 50;
    spec.seed = 21;
    let rates = success_rates(&run_success_sweep(&spec).unwrap());
    assert_eq!(rates[0].m, 100);
    assert_eq!(rates[0].successes, 0, "{rates:?}");
    assert_eq!(rates[1].m, 300);
    assert_eq!(rates[1].successes, 50, "{rates:?}");
}

#[test]
fn bench_iterations_are_in_range() {
    let mut spec = ExperimentSpec::new(ExperimentKind::TimingBench, Field::Real);
    spec.algorithms = vec![ObjectiveKind::default()];
    spec.trials = 20;
    spec.seed = 22;
    let rows = run_timing_bench(&spec).unwrap();
    let s = &bench_summary(&rows)[0];
    assert!(s.successes >= 15, "{s:?}");
    assert!((100.0..=1500.0).contains(&s.mean_iterations), "{s:?}");
    for r in rows.iter().filter(|r| r.success) {
        assert!(r.final_nmse <= 1e-14);
    }
}

#[test]
fn solve_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let seed = RngSeed::new(23, 0);
    let x = sample_gaussian_vector(40, Field::Real, &mut seed.derive(0).rng()).unwrap();
    let model = build_gaussian_model(160, 40, Field::Real, &mut seed.derive(1).rng()).unwrap();
    let obs = observe(&model, &x, Noise::None, &mut seed.derive(2).rng()).unwrap();
    let (mp, op) = (dir.path().join("model.txt"), dir.path().join("obs.txt"));
    write_model(&mp, &model).unwrap();
    write_observation(&op, &obs).unwrap();
    let (model2, obs2) = (read_model(&mp).unwrap(), read_observation(&op).unwrap());
    assert_eq!(obs2, obs);
    let cfg = SolverConfig::new(ObjectiveKind::default(), Field::Real);
    let res = run_single_solve(&model2, &obs2, &cfg, &InitConfig::with_seed(seed.derive(3))).unwrap();
    assert!(nmse(&res.z, &x).unwrap() < 1e-5);
    assert_eq!(res.trace.records.len(), res.trace.iterations() + 1);
}

#[test]
fn cdp_model_dump_has_unit_modulus_masks() {
    let model = build_cdp_model(DftShape::TwoD { rows: 8, cols: 8 }, 3, Field::Real, &mut RngSeed::new(24, 0).rng()).unwrap();
    let text = format_model(&model);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "cdp real 3 2d 8 8");
    let mut count = 0;
    for line in lines {
        let (re, im) = line.split_once(',').unwrap();
        let d = Complex64::new(re.parse().unwrap(), im.parse().unwrap());
        assert!((d.norm() - 1.0).abs() < 1e-15);
        count += 1;
    }
    assert_eq!(count, 3 * 64);
    assert_eq!(format_model(&parse_model(&text, "dump").unwrap()), text);
}

#[test]
fn every_objective_decreases_its_loss_from_the_shared_start() {
    let seed = RngSeed::new(25, 0);
    let x = sample_gaussian_vector(30, Field::Complex, &mut seed.derive(0).rng()).unwrap();
    let model = build_gaussian_model(180, 30, Field::Complex, &mut seed.derive(1).rng()).unwrap();
    let obs = observe(&model, &x, Noise::None, &mut seed.derive(2).rng()).unwrap();
    let z0 = initialize(&model, &obs, &InitConfig::with_seed(seed.derive(3))).unwrap();
    for obj in [ObjectiveKind::default(), ObjectiveKind::Af, ObjectiveKind::Wf] {
        let mut cfg = SolverConfig::new(obj, Field::Complex);
        cfg.max_iters = 50;
        let (_, trace) = solver::run(&model, &obs, &cfg, &z0, Some(&x)).unwrap();
        let first = trace.records.first().unwrap().loss;
        let last = trace.final_record().unwrap().loss;
        assert!(last < first, "{obj}: {first} -> {last}");
    }
}
