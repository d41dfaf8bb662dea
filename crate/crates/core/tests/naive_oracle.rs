mod common;

use common::naive_trajectory;
use quench_core::rng::derive_seed;
use quench_core::solver::{ModelParams, Simulator};

#[test]
fn small_instance_matches_direct_implementation() {
    for (lambda, gamma, kappa) in [(0.4, 0.0, 0.1), (1.4, 0.1, 0.5), (3.0, 0.0, 1.0)] {
        let p = ModelParams {
            m: 5,
            n_steps: 10,
            lambda,
            gamma,
            kappa1: kappa,
            kappa2: kappa,
            ..ModelParams::default()
        };
        let sim = Simulator::new(&p).unwrap();
        for i in 0..20 {
            let seed = derive_seed(2024, i);
            let path = sim.noise_path(seed);
            let got = sim.trajectory(&path);
            let want = naive_trajectory(&p, &path.bm_increments, &path.fbm_increments);
            assert_eq!(got.len(), want.len(), "lambda {lambda} seed {i}");
            for (g, w) in got.iter().zip(&want) {
                for (x, y) in g.iter().zip(w) {
                    // the state that crosses the quench level can be far above 1
                    assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "lambda {lambda} seed {i}: {x} vs {y}");
                }
            }
            let r = sim.run(seed);
            assert_eq!(r.steps_taken + 1, want.len());
        }
    }
}
