use fdmc_core::baselines::{decoupled_baseline, hd_baseline};
use fdmc_core::channel::{sample_channel_realization, trial_rng, CellGeometry, LargeScaleParams};
use fdmc_core::model::ProblemInstance;
use fdmc_core::sca::{solve, SolverConfig};
use fdmc_core::units::dbm_to_watts;
use std::time::Instant;

fn run(n_sub: usize, k: usize, p_dbm: f64, seed: u64) {
    let geom = CellGeometry::default();
    let params = LargeScaleParams::default();
    let gains = sample_channel_realization(&geom, &params, n_sub, k, k, &mut trial_rng(seed, 0)).unwrap();
    let inst = ProblemInstance::with_unit_weights(
        gains, dbm_to_watts(p_dbm), dbm_to_watts(18.0), params.rho_linear()).unwrap();
    let config = SolverConfig::for_operating_point(inst.p_max_dl, params.noise_dl_watts());
    let t0 = Instant::now();
    let prop = solve(&inst, &config).unwrap();
    let t1 = Instant::now();
    let dec = decoupled_baseline(&inst, &config).unwrap();
    let t2 = Instant::now();
    let hd = hd_baseline(&inst, &config).unwrap();
    let t3 = Instant::now();
    eprintln!("N={n_sub} K=J={k} P={p_dbm} seed {seed}: prop {:.2} ({:?}) dec {:.2} ({:?}) hd {:.2} ({:?})",
        prop.weighted_throughput, t1-t0, dec.weighted_throughput, t2-t1, hd.weighted_throughput, t3-t2);
    assert!(prop.weighted_throughput >= dec.weighted_throughput * 0.98,
        "proposed below decoupled");
    assert!(prop.weighted_throughput >= hd.weighted_throughput * 0.98, "proposed below HD");
}

#[test]
#[ignore]
fn probe_scale() {
    run(16, 4, 10.0, 42);
    run(16, 4, 46.0, 42);
    run(16, 4, 31.0, 45);
    run(16, 8, 31.0, 43);
}
