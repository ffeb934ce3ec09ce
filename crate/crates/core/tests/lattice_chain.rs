use gibbs_lines_core::lattice::{exact_boltzmann, BoundaryCurve, EnsembleData, Grid, UniformPathSampler, DEFAULT_STATE_CAP};
use gibbs_lines_core::mcmc::{build_generator, empirical_distribution, run_coupled, CoupledState, RunConfig};
use gibbs_lines_core::numeric::{ks_distance, lattice_ks_distance, total_variation};
use gibbs_lines_core::observables::lattice_midpoints;
use gibbs_lines_core::rng::seed_policy;
use gibbs_lines_core::special::normal_cdf;
use gibbs_lines_core::{Error, Hamiltonian};

fn small_instance() -> EnsembleData {
    let grid = Grid::new(0.0, 1.0, 2).unwrap();
    EnsembleData::new(grid, vec![0], vec![0], BoundaryCurve::pos_inf(), BoundaryCurve::constant(-2.0)).unwrap()
}

#[test]
fn chain_converges_to_exact_law() {
    let h = Hamiltonian::exponential(1.0).unwrap();
    let data = small_instance();
    let exact = exact_boltzmann(&data, &h, DEFAULT_STATE_CAP).unwrap();
    let cfg = RunConfig { event_budget: 2_000 + 50_000 * 12, seed: 4, burn_in: 2_000, thinning: 12 };
    let emp = empirical_distribution(&data, &exact, &h, &cfg, &mut seed_policy(4, 0)).unwrap();
    let tv = total_variation(&emp, &exact.probabilities);
    assert!(tv < 0.03, "tv = {tv}");
}

#[test]
fn generator_on_two_curve_instance_has_boltzmann_null_vector() {
    let grid = Grid::new(0.0, 1.0, 2).unwrap();
    let data = EnsembleData::new(
        grid,
        vec![1, 0],
        vec![0, 0],
        BoundaryCurve::from_fn(&grid, |t| (1.5 + t).into()),
        BoundaryCurve::constant(-1.0),
    )
    .unwrap();
    let h = Hamiltonian::exp_plus_square(1.0).unwrap();
    let gen = build_generator(&data, &h, DEFAULT_STATE_CAP).unwrap();
    let exact = exact_boltzmann(&data, &h, DEFAULT_STATE_CAP).unwrap();
    let pi = gen.stationary_distribution().unwrap();
    assert!(total_variation(&pi, &exact.probabilities) < 1e-8);
    assert!(gen.detailed_balance_residual(&exact.probabilities) < 1e-12);
}

#[test]
fn coupling_with_convex_catalog_entries() {
    let grid = Grid::new(0.0, 1.0, 4).unwrap();
    let low = EnsembleData::new(grid, vec![0, -2], vec![1, -1], BoundaryCurve::constant(2.0), BoundaryCurve::constant(-3.0)).unwrap();
    let high = EnsembleData::new(grid, vec![1, 0], vec![2, 0], BoundaryCurve::pos_inf(), BoundaryCurve::constant(-2.5)).unwrap();
    for h in [Hamiltonian::exponential(1.0).unwrap(), Hamiltonian::poly_exp(), Hamiltonian::exp_plus_square(2.0).unwrap()] {
        let mut c = CoupledState::maximal(&low, &high).unwrap();
        let cfg = RunConfig { event_budget: 200_000, seed: 1, burn_in: 0, thinning: 1 };
        let rep = run_coupled(&mut c, &h, &cfg, &mut seed_policy(1, 0), false).unwrap();
        assert_eq!(rep.violations, 0, "{}", h.name());
        assert!(c.is_ordered());
    }
}

#[test]
fn nonconvex_override_counts_violations() {
    // A bump is concave near its peak. With both boundaries one lattice step
    // from the pinned endpoints, the upper chain is pushed down and the lower
    // chain up, so shared uniforms split them apart.
    let grid = Grid::new(0.0, 1.0, 2).unwrap();
    let low = EnsembleData::new(grid, vec![0], vec![0], BoundaryCurve::pos_inf(), BoundaryCurve::constant(-0.6)).unwrap();
    let high = EnsembleData::new(grid, vec![0], vec![0], BoundaryCurve::pos_inf(), BoundaryCurve::constant(0.6)).unwrap();
    let bump = Hamiltonian::custom("bump", |x: f64| 20.0 * (-8.0 * x * x).exp(), 0.0, None, false);
    let mut c = CoupledState::maximal(&low, &high).unwrap();
    let cfg = RunConfig { event_budget: 200_000, seed: 2, burn_in: 0, thinning: 1 };
    let rep = run_coupled(&mut c, &bump, &cfg, &mut seed_policy(2, 0), true).unwrap();
    assert!(rep.violations > 0, "{rep:?}");
    let strict = bump.clone().with_declared_convex(true);
    let mut c = CoupledState::maximal(&low, &high).unwrap();
    match run_coupled(&mut c, &strict, &cfg, &mut seed_policy(2, 0), false) {
        Err(Error::CouplingViolation { trace_json, .. }) => {
            let v: serde_json::Value = serde_json::from_str(&trace_json).unwrap();
            assert!(v["recent_events"].as_array().is_some_and(|a| !a.is_empty()));
        }
        other => panic!("expected a violation, got {other:?}"),
    }
}

#[test]
fn free_lattice_midpoint_is_near_gaussian() {
    let grid = Grid::new(0.0, 1.0, 16).unwrap();
    let sampler = UniformPathSampler::new(grid.steps());
    let mids = lattice_midpoints(&sampler, &grid, 0, 0, 50_000, &mut seed_policy(6, 0)).unwrap();
    let cdf = |x: f64| normal_cdf(x / 0.5);
    let d = lattice_ks_distance(&mids, grid.dx, cdf);
    assert!(d < 0.02, "lattice KS {d}");
    // Against the continuous law directly the distance is bounded below by half an atom.
    assert!(ks_distance(&mids, cdf) > 0.02);
}
