use stula_core::potentials::{by_id, dot, norm, pow_abs, CATALOG_IDS};
use stula_core::rng::{chain_rng, uniform_in_ball};
use stula_core::sampler::{drift, lambda_max, run_chains, tamed_drift};
use stula_core::{ChainConfig, InitLaw, Scheme};

fn sampled(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = chain_rng(seed, 0);
    (0..n).map(|_| uniform_in_ball(&mut rng, dim, 10.0)).collect()
}

#[test]
fn drift_lemmas_hold_for_every_dissipative_potential() {
    let mut checked = 0;
    for id in CATALOG_IDS.iter().copied().chain(["regularized:double_well:0.1:2"]) {
        let p = by_id(id, None).unwrap();
        let Some(d) = p.dissipativity() else { continue };
        let g = p.growth();
        let lmax = lambda_max(&p).unwrap();
        let c_h = g.coefficient + d.a;
        for lambda in [lmax, lmax / 10.0, lmax / 100.0] {
            for x in sampled(p.dim(), 10_000, 3) {
                let hl = tamed_drift(&p, lambda, &x).unwrap();
                let h = p.gradient(&x).unwrap();
                let nx = norm(&x);
                let growth = d.a * nx + c_h / lambda.sqrt() - norm(&hl);
                assert!(growth >= -1e-9 * norm(&hl).max(1.0), "{id} growth at {x:?}");
                let diss = dot(&hl, &x) - (0.5 * d.a * nx * nx - d.b);
                assert!(diss >= -1e-9 * nx.powi(2).max(1.0), "{id} dissipativity at {x:?}");
                let diff: Vec<f64> = hl.iter().zip(&h).map(|(a, b)| a - b).collect();
                let bound = lambda.sqrt() * (norm(&h) + d.a * nx) * pow_abs(nx, 2.0 * g.exponent);
                assert!(bound - norm(&diff) >= -1e-9 * bound.max(1.0), "{id} taming at {x:?}");
            }
        }
        checked += 1;
    }
    assert!(checked >= 5);
}

#[test]
fn linear_drift_is_not_tamed() {
    let p = by_id("quadratic", Some(3)).unwrap();
    for x in sampled(3, 10_000, 4) {
        for lambda in [1e-4, 0.01, 0.2] {
            assert_eq!(tamed_drift(&p, lambda, &x).unwrap(), p.gradient(&x).unwrap());
            assert_eq!(drift(&p, Scheme::Ula, lambda, &x).unwrap(), p.gradient(&x).unwrap());
        }
    }
    let init = InitLaw::Gaussian { mean: vec![1.0; 3], scale: 2.0 };
    let s = ChainConfig::new(Scheme::Stula, 2.0, 0.005, 2_000, 8, 42, init.clone());
    let u = ChainConfig::new(Scheme::Ula, 2.0, 0.005, 2_000, 8, 42, init);
    assert_eq!(run_chains(&p, &s).unwrap(), run_chains(&p, &u).unwrap());
}
