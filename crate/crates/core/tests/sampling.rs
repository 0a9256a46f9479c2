use stula_core::potentials::{by_id, CATALOG_IDS};
use stula_core::sampler::{lambda_max, run_chains, second_moment_bound};
use stula_core::{ChainConfig, InitLaw, Scheme};

#[test]
fn ula_stationary_variance_on_quadratic() {
    let p = by_id("quadratic", None).unwrap();
    let cfg = ChainConfig::new(Scheme::Ula, 1.0, 0.01, 100_000, 100, 17, InitLaw::Point { x0: vec![0.0] })
        .with_burn_in(10_000)
        .with_thin(9);
    let b = run_chains(&p, &cfg).unwrap();
    assert_eq!(b.n_draws(), 1_000_000);
    let n = b.n_draws() as f64;
    let mean = b.samples.iter().sum::<f64>() / n;
    let var = b.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let exact = 1.0 / (1.0 - 0.005);
    assert!((var / exact - 1.0).abs() < 0.02, "{var}");
}

#[test]
fn second_moments_stay_below_the_uniform_bound() {
    for id in CATALOG_IDS.iter().copied().chain(["regularized:double_well:0.1:2"]) {
        let p = by_id(id, None).unwrap();
        if p.dissipativity().is_none() || p.is_non_confining() {
            continue;
        }
        let lmax = lambda_max(&p).unwrap();
        let init = InitLaw::Gaussian { mean: vec![0.5; p.dim()], scale: 1.0 };
        let bound = second_moment_bound(&p, 1.0, init.second_moment()).unwrap();
        let n_steps = ((5.0 / lmax) as usize).min(20_000);
        let cfg = ChainConfig::new(Scheme::Stula, 1.0, lmax, n_steps, 64, 5, init);
        let b = run_chains(&p, &cfg).unwrap();
        assert!(!b.diverged, "{id}");
        let worst = b.second_moment.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(worst <= bound, "{id}: {worst} > {bound}");
        assert_eq!(b.second_moment.len(), n_steps + 1);
    }
}

#[test]
fn tamed_baseline_stays_finite_where_ula_explodes() {
    let p = by_id("quartic", None).unwrap();
    let init = InitLaw::Point { x0: vec![10.0] };
    let ula = ChainConfig::new(Scheme::Ula, 1.0, 0.1, 100, 4, 3, init.clone());
    assert!(run_chains(&p, &ula).is_err());
    let tula = ChainConfig::new(Scheme::Tula, 1.0, 0.1, 10_000, 4, 3, init);
    assert!(!run_chains(&p, &tula).unwrap().diverged);
}
