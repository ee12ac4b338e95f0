use afmm::market::{form_belief, init_sim, simulate_run, step, EnvSnapshot, SimConfig};
use afmm::metrics::action_similarity;
use afmm::population::{build_population, AgentSpec, ParamRange, PopulationConfig};
use afmm::seeding::rng_from_seed;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn short(horizon: usize) -> SimConfig<f64> {
    SimConfig {
        horizon,
        burn_in: horizon / 10,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn position_limits_are_never_breached(
        seed in 0u64..10_000,
        kappa in 0.1f64..5.0,
        autonomy in 0.0f64..1.0,
        coupling in 0.0f64..1.0,
        observability in 0.0f64..1.0,
        limit in 0.5f64..20.0,
        outage_prob in 0.0f64..0.05,
    ) {
        let cfg = SimConfig { kappa, outage_prob, ..short(300) };
        let pcfg = PopulationConfig {
            n_agents: 30,
            autonomy: ParamRange::fixed(autonomy),
            coupling: ParamRange::fixed(coupling),
            observability: ParamRange::fixed(observability),
            position_limit: limit,
            ..Default::default()
        };
        let pop = build_population(&pcfg, seed).unwrap();
        let mut state = init_sim(&cfg, pop, seed).unwrap();
        while !state.is_finished() {
            step(&mut state).unwrap();
            for (book, agent) in state.books().iter().zip(&state.population().agents) {
                prop_assert!(book.position.abs() <= agent.position_limit);
            }
        }
    }

    #[test]
    fn zero_autonomy_market_never_moves(seed in 0u64..10_000, sigma_s in 0.0f64..3.0, kappa in 0.1f64..5.0) {
        let cfg = SimConfig { sigma_s, kappa, ..short(200) };
        let pcfg = PopulationConfig { n_agents: 20, autonomy: ParamRange::fixed(0.0), ..Default::default() };
        let res = simulate_run(&cfg, &pcfg, seed).unwrap();
        prop_assert!(res.records.iter().all(|r| r.p == cfg.p0 && r.q_total == 0.0));
    }

    #[test]
    fn similarity_is_a_correlation(seed in 0u64..10_000, coupling in 0.0f64..1.0) {
        let cfg = short(200);
        let pcfg = PopulationConfig { n_agents: 20, coupling: ParamRange::fixed(coupling), ..Default::default() };
        let res = simulate_run(&cfg, &pcfg, seed).unwrap();
        let actions: Vec<Vec<f64>> = (0..20).map(|i| res.records.iter().map(|r| r.actions[i]).collect()).collect();
        let pairs: Vec<(usize, usize)> = (0..20).flat_map(|i| (i + 1..20).map(move |j| (i, j))).collect();
        for p in action_similarity(&actions, cfg.rho_window, &pairs).unwrap() {
            prop_assert!((-1.0..=1.0).contains(&p.rho));
        }
        if let Some(r) = res.metrics.mean_rho {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }
}

#[test]
fn belief_error_variance_does_not_depend_on_heterogeneity() {
    let sigma_m = 0.7;
    let n = 100_000;
    let variance = |h: f64| {
        let agent = AgentSpec {
            id: 0,
            autonomy: 0.5,
            heterogeneity: h,
            coupling: 0.5,
            observability: 0.5,
            vendor_id: 0,
            vendor_exposure: 1.0,
            weight: 1.0,
            position_limit: 10.0,
        };
        let mut rng = rng_from_seed(99);
        let errs: Vec<f64> = (0..n)
            .map(|_| {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let idio: f64 = StandardNormal.sample(&mut rng);
                let env = EnvSnapshot {
                    t: 0,
                    v: 100.0,
                    s: 100.0,
                    m: sigma_m * xi,
                    news: 0.0,
                    stress: 0.0,
                    depth: 1.0,
                    vendor_failed: vec![false],
                };
                form_belief(&agent, &env, sigma_m, idio) - env.v
            })
            .collect();
        let mean = errs.iter().sum::<f64>() / n as f64;
        errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    };
    let vs: Vec<f64> = [0.0, 0.5, 1.0].iter().map(|&h| variance(h)).collect();
    for v in &vs {
        assert!((v / vs[0] - 1.0).abs() < 0.05, "{vs:?}");
        assert!((v / (sigma_m * sigma_m) - 1.0).abs() < 0.05, "{vs:?}");
    }
}

#[test]
fn identical_seeds_give_identical_runs() {
    let cfg = short(500);
    let pcfg = PopulationConfig::default();
    let a = simulate_run(&cfg, &pcfg, 7).unwrap();
    let b = simulate_run(&cfg, &pcfg, 7).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.records, simulate_run(&cfg, &pcfg, 8).unwrap().records);
}

#[test]
fn f32_and_f64_runs_agree_on_a_quiet_market() {
    let cfg64 = SimConfig::<f64> {
        sigma_v: 0.0,
        jump_prob: 0.0,
        sigma_s: 0.0,
        sigma_m: 0.0,
        outage_prob: 0.0,
        ..short(100)
    };
    let cfg32 = SimConfig::<f32> {
        sigma_v: 0.0,
        jump_prob: 0.0,
        sigma_s: 0.0,
        sigma_m: 0.0,
        outage_prob: 0.0,
        horizon: 100,
        burn_in: 10,
        ..Default::default()
    };
    let a = simulate_run(&cfg64, &PopulationConfig::default(), 3).unwrap();
    let b = simulate_run(&cfg32, &PopulationConfig::default(), 3).unwrap();
    assert_eq!(a.metrics.pricing_error_rmse, 0.0);
    assert_eq!(b.metrics.pricing_error_rmse, 0.0);
    assert_eq!(a.records.len(), b.records.len());
}
