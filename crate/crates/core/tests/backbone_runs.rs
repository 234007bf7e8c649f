//! Seeded ensembles of complete backbone runs.

use sas_ckt::ckt::fit_decay;
use sas_ckt::engine::{run_sas, BackboneConfig};
use sas_ckt::rng::RngStream;
use sas_ckt::stats::median;
use sas_ckt::task::Task;

fn sphere_1d() -> Task {
    Task::from_fn("sphere", vec![-5.0], vec![5.0], |x| x[0] * x[0]).unwrap()
}

fn sphere_2d() -> Task {
    Task::from_fn("sphere", vec![-5.0; 2], vec![5.0; 2], |x| {
        (x[0] - 1.3).powi(2) + (x[1] + 2.1).powi(2)
    })
    .unwrap()
}

#[test]
fn bo_lcb_beats_its_initial_design_on_1d_sphere() {
    let cfg = BackboneConfig::bo_lcb().with_budget(10, 60);
    let mut init = Vec::new();
    let mut last = Vec::new();
    for seed in 0..10 {
        let mut task = sphere_1d();
        let trace = run_sas(&mut task, &cfg, &mut RngStream::new(seed)).unwrap();
        assert_eq!(task.eval_count(), 60);
        init.push(trace.records[cfg.n_init - 1].best_so_far);
        last.push(trace.final_best().unwrap());
    }
    assert!(median(&last) < 0.05 * median(&init));
}

#[test]
fn bo_lcb_beats_random_search() {
    let cfg = BackboneConfig::bo_lcb().with_budget(10, 60);
    let (mut sas, mut random) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let mut task = sphere_1d();
        sas.push(run_sas(&mut task, &cfg, &mut RngStream::new(seed)).unwrap().final_best().unwrap());
        let mut rng = RngStream::new(1000 + seed);
        let best = (0..60)
            .map(|_| task.evaluate(&[rng.uniform()]))
            .fold(f64::INFINITY, f64::min);
        random.push(best);
    }
    assert!(median(&sas) < median(&random));
}

#[test]
fn decay_fits_a_real_convergence_trace() {
    let cfg = BackboneConfig::bo_lcb().with_budget(20, 100);
    let mut r2 = Vec::new();
    for seed in 0..5 {
        let trace = run_sas(&mut sphere_2d(), &cfg, &mut RngStream::new(seed)).unwrap();
        let fit = fit_decay(&trace.best_so_far(), None).unwrap();
        assert!(!fit.degenerate);
        r2.push(fit.r2);
    }
    // BO staircases drop by orders of magnitude and then stall, which a
    // single exponential only follows loosely
    assert!(median(&r2) > 0.8, "R2 values {r2:?}");
}

#[test]
fn rbf_pov_runs_are_deterministic_and_within_budget() {
    let cfg = BackboneConfig::rbf_pov().with_budget(10, 40);
    let a = run_sas(&mut sphere_2d(), &cfg, &mut RngStream::new(8)).unwrap();
    let b = run_sas(&mut sphere_2d(), &cfg, &mut RngStream::new(8)).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.records.len(), 40);
    assert!(a.final_best().unwrap() < a.records[9].best_so_far);
}
