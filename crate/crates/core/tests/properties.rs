use gbsb::chaos::normalized_distance;
use gbsb::engine::{init_state, Dynamics, InitMode, SolverState};
use gbsb::model::{CutGraph, Edge};
use gbsb::prelude::*;
use gbsb::spectral::residual;
use proptest::collection::vec;
use proptest::prelude::*;

fn spins(n: usize) -> impl Strategy<Value = SpinConfig> {
    vec(prop_oneof![Just(1i8), Just(-1i8)], n).prop_map(|s| SpinConfig::new(s).unwrap())
}

fn instance_and_spins() -> impl Strategy<Value = (IsingInstance, SpinConfig)> {
    (2usize..24, any::<u64>()).prop_flat_map(|(n, seed)| {
        let inst = gen_random_dense(n, seed).unwrap();
        (Just(inst), spins(n))
    })
}

/// Simple graphs with distinct undirected edges and nonzero integer weights.
fn graph() -> impl Strategy<Value = CutGraph> {
    (2usize..20).prop_flat_map(|n| {
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let count = all.len();
        (
            Just(n),
            proptest::sample::subsequence(all, 0..=count),
            vec(prop_oneof![-5i64..=-1, 1i64..=5], count),
        )
            .prop_map(|(n, pairs, weights)| {
                let edges = pairs
                    .into_iter()
                    .zip(weights)
                    .map(|((i, j), w)| Edge { i, j, w })
                    .collect();
                CutGraph::new(n, edges).unwrap()
            })
    })
}

fn graph_and_spins() -> impl Strategy<Value = (CutGraph, SpinConfig)> {
    graph().prop_flat_map(|g| {
        let n = g.n();
        (Just(g), spins(n))
    })
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_even_under_global_flip((inst, s) in instance_and_spins()) {
        prop_assert_eq!(ising_energy(&inst, &s).unwrap(), ising_energy(&inst, &s.flipped()).unwrap());
    }

    #[test]
    fn cut_and_energy_add_up((g, s) in graph_and_spins()) {
        let inst = maxcut_to_ising(&g).unwrap();
        let e = ising_energy(&inst, &s).unwrap();
        prop_assert_eq!(2.0 * cut_value(&g, &s).unwrap() as f64 + e, g.total_weight() as f64);
        prop_assert_eq!(inst.cut_from_energy(e), Some(cut_value(&g, &s).unwrap()));
    }

    #[test]
    fn gset_text_round_trips(g in graph()) {
        prop_assert_eq!(parse_gset(&g.to_gset()).unwrap(), g);
    }

    #[test]
    fn instance_json_round_trips(n in 2usize..30, seed in any::<u64>()) {
        let inst = gen_random_dense(n, seed).unwrap();
        prop_assert_eq!(IsingInstance::from_json(&inst.to_json()).unwrap(), inst);
    }

    #[test]
    fn maxcut_json_keeps_total_weight(g in graph()) {
        let inst = maxcut_to_ising(&g).unwrap();
        let back = IsingInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back.cut_weight(), Some(g.total_weight()));
    }

    #[test]
    fn generator_is_deterministic(n in 2usize..40, seed in any::<u64>()) {
        prop_assert_eq!(gen_random_dense(n, seed).unwrap(), gen_random_dense(n, seed).unwrap());
    }

    #[test]
    fn distance_is_a_scaled_metric(
        a in vec(-1.0f64..=1.0, 1..50),
        seed in any::<u64>(),
    ) {
        let n = a.len();
        let b = init_state(n, seed, InitMode::UniformRandom).x;
        let c = init_state(n, seed ^ 1, InitMode::UniformRandom).x;
        let d = |u: &[f64], v: &[f64]| normalized_distance(u, v).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!((0.0..=1.0).contains(&d(&a, &b)));
    }

    #[test]
    fn dt_is_linear_in_factor(lmax in 0.1f64..100.0, ratio in -1.0f64..-1e-3, f in 0.01f64..1.0) {
        let lmin = ratio * lmax;
        let base = tune_dt(lmin, lmax, 1.0).unwrap();
        let dt = tune_dt(lmin, lmax, f).unwrap();
        prop_assert!((dt - f * base).abs() <= 1e-12 * base);
    }

    #[test]
    fn eigenvector_residual_within_tolerance(n in 2usize..90, seed in any::<u64>()) {
        let inst = gen_random_dense(n, seed).unwrap();
        let est = gbsb::spectral::extreme_eigenvalues_default(&inst).unwrap();
        let beta = gbsb::spectral::gershgorin_bound(&inst);
        let (vmax, vmin) = (est.v_max.clone().unwrap(), est.v_min.clone().unwrap());
        prop_assert!(residual(&inst, est.lambda_max, &vmax) <= est.tolerance * beta * 1.0001);
        prop_assert!(residual(&inst, est.lambda_min, &vmin) <= est.tolerance * beta * 1.0001);
        prop_assert!(est.lambda_min < 0.0 && est.lambda_max > 0.0);
    }
}

fn evolve_checked(
    inst: &IsingInstance,
    cfg: &SolverConfig,
    tuning: &TuningResult,
    seed: u64,
    mut check: impl FnMut(&SolverState, &SolverState) -> Result<(), TestCaseError>,
) -> Result<(), TestCaseError> {
    let mut dynamics = Dynamics::new(inst, cfg, tuning).unwrap();
    let mut state = init_state(inst.n(), seed, cfg.init_mode);
    while state.m < cfg.steps {
        let before = state.clone();
        dynamics.step(&mut state).unwrap();
        check(&before, &state)?;
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn positions_stay_inside_walls(
        n in 2usize..40,
        seed in any::<u64>(),
        a in 0.0f64..2.0,
        steps in 1usize..300,
        dt_scale in 0.2f64..1.5,
    ) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, steps, a).with_dt(tuning.dt * dt_scale);
        evolve_checked(&inst, &cfg, &tuning, seed, |_, s| {
            prop_assert!(s.x.iter().all(|x| x.abs() <= 1.0));
            Ok(())
        })?;
    }

    #[test]
    fn wall_hits_stop_the_oscillator(n in 2usize..30, seed in any::<u64>(), steps in 1usize..200) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, steps, 0.3);
        let c = tuning.c;
        evolve_checked(&inst, &cfg, &tuning, seed, |before, after| {
            for i in 0..before.x.len() {
                // Unclamped position, recomputed from the pre-step state.
                let h: f64 = (0..before.x.len()).map(|j| inst.get(i, j) * before.x[j]).sum();
                let y = before.y[i] - (after.p[i] * before.x[i] - c * h) * tuning.dt;
                let x = before.x[i] + y * tuning.dt;
                if x.abs() > 1.0 + 1e-9 {
                    prop_assert_eq!(after.y[i], 0.0);
                    prop_assert_eq!(after.x[i].abs(), 1.0);
                }
            }
            Ok(())
        })?;
    }

    #[test]
    fn bifurcation_parameters_decrease(
        n in 2usize..30,
        seed in any::<u64>(),
        a in 0.0f64..=1.0,
        steps in 1usize..300,
    ) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, steps, a);
        evolve_checked(&inst, &cfg, &tuning, seed, |before, after| {
            for (p0, p1) in before.p.iter().zip(&after.p) {
                prop_assert!(p1 <= p0);
                prop_assert!((-1e-12..=1.0).contains(p1), "p = {}", p1);
            }
            Ok(())
        })?;
    }

    #[test]
    fn linear_schedule_without_control(n in 2usize..20, seed in any::<u64>(), steps in 2usize..400) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, steps, 0.0);
        evolve_checked(&inst, &cfg, &tuning, seed, |_, after| {
            if after.m < steps {
                let expected = 1.0 - after.m as f64 / steps as f64;
                prop_assert!(after.p.iter().all(|p| (p - expected).abs() <= 1e-12));
            }
            Ok(())
        })?;
    }

    #[test]
    fn zero_control_is_ballistic_sb(
        n in 2usize..30,
        seed in any::<u64>(),
        steps in 1usize..300,
        dt in 0.05f64..1.4,
        c_scale in 0.3f64..1.5,
    ) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let cfg = SolverConfig::new(Variant::Gbsb, steps, 0.0)
            .with_dt(dt)
            .with_c(tuning.c * c_scale)
            .with_seed(seed)
            .with_sample_stride(1);
        let g = run(&inst, &cfg, &tuning).unwrap();
        let b = run(&inst, &cfg.clone().with_variant(Variant::Bsb), &tuning).unwrap();
        let (tg, tb) = (g.trajectory.unwrap(), b.trajectory.unwrap());
        prop_assert_eq!(tg.len(), tb.len());
        for (sg, sb) in tg.iter().zip(&tb) {
            prop_assert_eq!(bits(&sg.x), bits(&sb.x));
        }
        prop_assert_eq!(g.final_spins, b.final_spins);
    }

    #[test]
    fn parallel_rows_do_not_change_results(n in 2usize..80, seed in any::<u64>(), steps in 1usize..200) {
        let inst = gen_random_dense(n, seed).unwrap();
        let tuning = tune(&inst, TuneMode::Numerical, 1.25).unwrap();
        let mut cfg = SolverConfig::new(Variant::Gbsb, steps, 0.3).with_seed(seed).with_sample_stride(7);
        let serial = run(&inst, &cfg, &tuning).unwrap();
        cfg.parallel = true;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let parallel = pool.install(|| run(&inst, &cfg, &tuning)).unwrap();
        prop_assert_eq!(serial.trajectory, parallel.trajectory);
        prop_assert_eq!(serial.energy.to_bits(), parallel.energy.to_bits());
    }
}
