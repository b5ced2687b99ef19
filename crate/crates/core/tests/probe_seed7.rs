use fdmc_core::baselines::{brute_force_oracle, PowerGrid};
use fdmc_core::channel::{sample_channel_realization, trial_rng, CellGeometry, LargeScaleParams};
use fdmc_core::model::ProblemInstance;
use fdmc_core::sca::{solve, SolverConfig};
use fdmc_core::units::dbm_to_watts;
use std::time::Instant;

#[test]
#[ignore]
fn probe_bad_seeds() {
    let geom = CellGeometry::default();
    let params = LargeScaleParams::default();
    for seed in 0..10u64 {
        let gains = sample_channel_realization(&geom, &params, 4, 2, 2, &mut trial_rng(7000 + seed, 0)).unwrap();
        let inst = ProblemInstance::with_unit_weights(
            gains.clone(), dbm_to_watts(31.0), dbm_to_watts(18.0), params.rho_linear()).unwrap();
        let t0 = Instant::now();
        let oracle = brute_force_oracle(&inst, &PowerGrid::default()).unwrap();
        let dt = t0.elapsed();
        if dt.as_secs_f64() > 1.0 || seed == 0 {
            eprintln!("seed {seed}: oracle {:.3} nodes {} took {:?}", oracle.objective, oracle.nodes_visited, dt);
            for i in 0..4 {
                if let Some((m, r)) = oracle.allocation.pair_on(i) {
                    eprintln!("  sub {i}: (m{m},r{r}) p {:.3e} q {:.3e}", oracle.allocation.p[[i,m]], oracle.allocation.q[[i,r]]);
                }
            }
            if seed == 0 {
                let config = SolverConfig::for_operating_point(inst.p_max_dl, params.noise_dl_watts());
                let rep = solve(&inst, &config).unwrap();
                eprintln!("  sca {:.3}", rep.weighted_throughput);
                for i in 0..4 {
                    if let Some((m, r)) = rep.final_allocation.pair_on(i) {
                        eprintln!("  sca sub {i}: (m{m},r{r}) p {:.3e} q {:.3e}", rep.final_allocation.p[[i,m]], rep.final_allocation.q[[i,r]]);
                    }
                }
            }
        }
    }
}
