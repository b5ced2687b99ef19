use fdmc_core::channel::{sample_channel_realization, trial_rng, CellGeometry, LargeScaleParams};
use fdmc_core::model::ProblemInstance;
use fdmc_core::sca::{solve, SolverConfig};
use fdmc_core::units::dbm_to_watts;
use std::time::Instant;

#[test]
fn probe_criterion_3_4() {
    let geom = CellGeometry::default();
    let params = LargeScaleParams::default();
    let mut worst_dev: f64 = 0.0;
    let mut n_binary = 0;
    let mut monotone_ok = true;
    let started = Instant::now();
    let n_inst = 20;
    for seed in 0..n_inst {
        let gains = sample_channel_realization(&geom, &params, 8, 2, 2, &mut trial_rng(9000 + seed, 0)).unwrap();
        let inst = ProblemInstance::with_unit_weights(
            gains, dbm_to_watts(31.0), dbm_to_watts(18.0), params.rho_linear()).unwrap();
        let config = SolverConfig::for_operating_point(inst.p_max_dl, params.noise_dl_watts());
        let t0 = Instant::now();
        let report = solve(&inst, &config).unwrap();
        for w in report.lifted_trajectory_objectives.windows(2) {
            if w[1] > w[0] + 1e-9 { monotone_ok = false; }
        }
        if report.max_binary_deviation <= 1e-3 { n_binary += 1; }
        worst_dev = worst_dev.max(report.max_binary_deviation);
        assert!(report.feasibility.is_feasible());
        eprintln!("seed {seed}: dev {:.2e} iters {} conv {} thr {:.2} took {:?}",
            report.max_binary_deviation, report.iterations_used, report.converged,
            report.weighted_throughput, t0.elapsed());
    }
    eprintln!("binary: {n_binary}/{n_inst}, worst dev {worst_dev:.3e}, monotone {monotone_ok}, total {:?}", started.elapsed());
    assert!(monotone_ok);
    assert!(n_binary >= n_inst * 95 / 100);
}
