//! Property and fuzz tests for the crate's advertised invariants: grid
//! coverage, bracket soundness, schedule caps, noise bounds, budget
//! ledgers, regularity of the built-in problems, and
//! scheduling-independence.

use std::sync::Arc;

use proptest::prelude::*;

use grasp_core::base::{run_sgd, run_unixgrad};
use grasp_core::ensemble::{
    sample_trajectory_candidates, select_by_gradient_norm, Candidate, CandidateSource,
};
use grasp_core::grasp::{
    allocate_budget, grasp_c, grasp_nc, selfbound_c_dmax, selfbound_nc_ranges, DmaxOption,
    ScheduleKind, SearchGrid, UserInputs,
};
use grasp_core::problems::{GradientNoise, NoiseModel, Problem, StochasticOracle, ValueNoise};
use grasp_core::vector;

proptest! {
    // every target in [lo, hi] is covered by a cell within a factor two
    #[test]
    fn grid_coverage(lo_exp in -6.0f64..2.0, span in 0.0f64..6.0, frac in 0.0f64..1.0) {
        let lo = 10f64.powf(lo_exp);
        let hi = lo * 10f64.powf(span);
        let grid = SearchGrid::geometric(lo, hi).unwrap();
        let target = lo * (hi / lo).powf(frac);
        let cell = grid.cell_covering(target).expect("covered");
        let v = grid.value(cell);
        prop_assert!(v / 2.0 <= target && target <= v);
    }

    // whenever the true constants fall under the self-bounded caps, the
    // optimal step size lies inside the computed bracket
    #[test]
    fn step_bracket_sandwich(
        g0_exp in -3.0f64..3.0,
        t in 10u64..1_000_000,
        l_floor_exp in -4.0f64..1.0,
        f_floor_exp in -4.0f64..1.0,
        conf in 0.01f64..0.32,
        l_exp in -4.0f64..6.0,
        f_exp in -4.0f64..6.0,
        d_exp in -6.0f64..6.0,
    ) {
        let mut u = UserInputs::new(t, conf);
        u.smoothness_floor = 10f64.powf(l_floor_exp);
        u.gap_floor = 10f64.powf(f_floor_exp);
        let r = selfbound_nc_ranges(10f64.powf(g0_exp), t, &u).unwrap();
        prop_assert!(r.eta_min <= r.eta_max);
        let (l_true, f_true, noise_sq) =
            (10f64.powf(l_exp), 10f64.powf(f_exp), 10f64.powf(d_exp));
        if l_true <= r.l_max && f_true <= r.f_max && noise_sq <= r.delta_sq_max {
            let l_bar = l_true.max(u.smoothness_floor);
            let f_bar = f_true.max(u.gap_floor);
            let n = SearchGrid::geometric(r.eta_min, r.eta_max).unwrap().len() as u64;
            let t_prime = (t / (2 * n)).max(1);
            let opt = (1.0 / (2.0 * l_bar))
                .min((2.0 * f_bar / (l_bar * noise_sq * t_prime as f64)).sqrt());
            prop_assert!(r.eta_min <= opt && opt <= r.eta_max,
                "opt {opt} outside [{}, {}]", r.eta_min, r.eta_max);
        }
    }

    // the distance bound grows with the gradient estimate and the budget
    #[test]
    fn distance_bound_monotonicity(
        g in 0.0f64..100.0,
        dg in 0.0f64..10.0,
        t in 1u64..100_000,
        dt in 0u64..100_000,
        l0 in 0.1f64..10.0,
    ) {
        let mut u = UserInputs::new(t, 0.1);
        u.value_lower_bound = Some(0.0);
        let a = selfbound_c_dmax(DmaxOption::GradientBased, g, 0.0, &u, t).unwrap();
        let b = selfbound_c_dmax(DmaxOption::GradientBased, g + dg, 0.0, &u, t).unwrap();
        let c = selfbound_c_dmax(DmaxOption::GradientBased, g, 0.0, &u, t + dt).unwrap();
        prop_assert!(b >= a && c >= a);
        let va = selfbound_c_dmax(DmaxOption::ValueBased, 0.0, l0, &u, t).unwrap();
        let vb = selfbound_c_dmax(DmaxOption::ValueBased, 0.0, l0 + dg, &u, t).unwrap();
        let vc = selfbound_c_dmax(DmaxOption::ValueBased, 0.0, l0, &u, t + dt).unwrap();
        prop_assert!(vb >= va && vc >= va);
    }

    // allocated schedules never exceed their cap
    #[test]
    fn schedules_stay_under_cap(n in 1usize..200, cap_exp in 1.0f64..6.0) {
        let cap = 10f64.powf(cap_exp) as u64;
        for kind in [ScheduleKind::Uniform, ScheduleKind::Harmonic, ScheduleKind::Basel] {
            if let Ok(s) = allocate_budget(n, cap, kind) {
                prop_assert!(s.total() <= cap);
                prop_assert!(s.budgets.iter().all(|&b| b >= 1));
            }
        }
    }

    // the proximal step solves its quadratic: no feasible point does better
    #[test]
    fn prox_step_is_optimal(
        ax in -3.0f64..3.0, ay in -3.0f64..3.0,
        dx in -2.0f64..2.0, dy in -2.0f64..2.0,
        scale in 0.01f64..5.0,
        radius in 0.1f64..4.0,
        px in -1.0f64..1.0, py in -1.0f64..1.0,
    ) {
        let anchor = [ax, ay];
        let dir = [dx, dy];
        let center = [0.5, -0.25];
        let obj = |x: &[f64]| {
            vector::dot(&dir, x)
                + vector::dist(x, &anchor).powi(2) / (2.0 * scale)
        };
        let star = grasp_core::base::prox_step(&anchor, &dir, scale, &center, radius);
        prop_assert!(vector::dist(&star, &center) <= radius + 1e-9);
        // compare against a random feasible point
        let probe = [
            center[0] + px * radius / 1.5,
            center[1] + py * radius / 1.5,
        ];
        prop_assert!(obj(&star) <= obj(&probe) + 1e-9);
    }
}

#[test]
fn noise_bounds_hold_under_fuzz() {
    let p = Arc::new(Problem::quadratic(vec![1.0, -2.0], vec![1.0, 3.0]).unwrap());
    let models = [
        NoiseModel::constant(0.4, 0.7),
        NoiseModel {
            gradient: GradientNoise::LinearRadial {
                center: vec![0.0, 0.0],
                base: 0.05,
                slope: 0.1,
                cap: 10.0,
            },
            value: ValueNoise::GapScaled {
                v0: 0.01,
                v1: 0.5,
                cap: 3.0,
            },
        },
        NoiseModel {
            gradient: GradientNoise::Custom {
                bound_at: Arc::new(|x: &[f64]| 0.2 + 0.1 * x[0].sin().abs()),
                cap: 0.3,
            },
            value: ValueNoise::Uniform { bound: 0.2 },
        },
    ];
    for (mi, nm) in models.iter().enumerate() {
        let mut o = StochasticOracle::new(Arc::clone(&p), nm.clone(), mi as u64, None);
        let mut probe = o.derive_rng();
        use rand::Rng;
        for _ in 0..50_000 {
            let x = [probe.random_range(-4.0..4.0), probe.random_range(-4.0..4.0)];
            let g = o.query_gradient(&x).unwrap();
            let bound = nm.gradient.bound_at(&x);
            assert!(vector::dist(&g, &p.gradient(&x)) <= bound * (1.0 + 1e-12) + 1e-300);
            let v = o.query_value(&x).unwrap();
            let vb = nm.value.halfwidth(p.true_gap(&x).unwrap());
            assert!((v - p.objective(&x)).abs() <= vb * (1.0 + 1e-12) + 1e-300);
        }
    }
}

#[test]
fn query_means_converge_to_the_truth() {
    let p = Arc::new(Problem::quadratic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
    let x = [2.0, 0.0];
    // gradient: sphere noise bounded by 0.1; mean of 1e5 draws within 0.01
    let mut o = StochasticOracle::new(Arc::clone(&p), NoiseModel::constant(0.1, 0.0), 3, None);
    let n = 100_000u64;
    let mut acc = vec![0.0, 0.0];
    for _ in 0..n {
        let g = o.query_gradient(&x).unwrap();
        assert!(vector::dist(&g, &[2.0, 0.0]) <= 0.1 * (1.0 + 1e-12));
        vector::axpy_mut(&mut acc, 1.0, &g);
    }
    let mean = vector::scale(&acc, 1.0 / n as f64);
    assert!(vector::dist(&mean, &[2.0, 0.0]) < 0.01);

    // value: uniform noise bounded by 1; mean within 0.02
    let mut o = StochasticOracle::new(Arc::clone(&p), NoiseModel::constant(0.0, 1.0), 4, None);
    let mut acc = 0.0;
    for _ in 0..n {
        let v = o.query_value(&x).unwrap();
        assert!((v - 2.0).abs() <= 1.0);
        acc += v;
    }
    assert!((acc / n as f64 - 2.0).abs() < 0.02);
}

#[test]
fn built_in_problems_certify_their_regularity_constants() {
    use rand::Rng;
    let problems = vec![
        Problem::quadratic(vec![1.0, -0.5, 2.0], vec![0.5, 1.0, 3.0]).unwrap(),
        Problem::hoelder_power(vec![0.5, -1.0], 0.0, 1.3).unwrap(),
        Problem::hoelder_power(vec![0.5, -1.0], 0.5, 1.3).unwrap(),
        Problem::hoelder_power(vec![0.5, -1.0], 1.0, 1.3).unwrap(),
        Problem::logistic_small(3, 40, 9, 0.05).unwrap(),
        Problem::smooth_nonconvex(vec![0.3, -1.7], 0.1, 5.0).unwrap(),
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    use rand::SeedableRng;
    for p in &problems {
        let t = p.truth().unwrap().clone();
        let d = p.dim();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..d)
                .map(|j| t.x_star[j] + rng.random_range(-5.0..5.0))
                .collect();
            let y: Vec<f64> = (0..d)
                .map(|j| t.x_star[j] + rng.random_range(-5.0..5.0))
                .collect();
            let dist = vector::dist(&x, &y);
            if dist == 0.0 {
                continue;
            }
            let grad_diff = vector::dist(&p.gradient(&x), &p.gradient(&y));
            if t.smoothness.is_finite() {
                assert!(
                    grad_diff <= t.smoothness * dist * (1.0 + 1e-9),
                    "{}: smoothness violated",
                    p.name()
                );
            }
            let (l_nu, nu) = t.hoelder;
            assert!(
                grad_diff <= l_nu * dist.powf(nu) * (1.0 + 1e-9),
                "{}: hoelder violated: {} > {}",
                p.name(),
                grad_diff,
                l_nu * dist.powf(nu)
            );
            if t.lipschitz.is_finite() {
                assert!(
                    (p.objective(&x) - p.objective(&y)).abs() <= t.lipschitz * dist * (1.0 + 1e-9),
                    "{}: lipschitz violated",
                    p.name()
                );
            }
            assert!(
                p.objective(&x) >= t.l_star - 1e-9,
                "{}: value below optimum",
                p.name()
            );
        }
    }
}

#[test]
fn base_algorithms_spend_exactly_their_budgets() {
    let p = Arc::new(Problem::quadratic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
    let noise = NoiseModel::constant(0.3, 0.0);
    for t in [1u64, 7, 100, 1234] {
        let mut o = StochasticOracle::new(Arc::clone(&p), noise.clone(), t, Some(t));
        let run = run_sgd(&mut o, &[1.0, 1.0], 0.1, t).unwrap();
        assert_eq!(run.calls, t);
        assert_eq!(o.calls_used(), t);
        assert_eq!(run.trajectory.len(), t as usize);
    }
    for pairs in [1u64, 9, 250] {
        let mut o = StochasticOracle::new(Arc::clone(&p), noise.clone(), pairs, Some(2 * pairs));
        let run = run_unixgrad(&mut o, &[1.0, 1.0], 2.0, pairs).unwrap();
        assert_eq!(run.calls, 2 * pairs);
        assert_eq!(o.calls_used(), 2 * pairs);
    }
}

#[test]
fn selectors_spend_exactly_candidates_times_samples() {
    let p = Arc::new(Problem::quadratic(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
    let mut o = StochasticOracle::new(Arc::clone(&p), NoiseModel::constant(0.5, 0.5), 8, None);
    let mut cs: Vec<Candidate> = (1..=7)
        .map(|i| Candidate::new(vec![i as f64, 0.0], CandidateSource::GridCell { cell: i }))
        .collect();
    select_by_gradient_norm(&mut cs, &mut o, 33).unwrap();
    assert_eq!(o.calls_used(), 7 * 33);
}

#[test]
fn orchestrator_ledgers_never_exceed_the_budget() {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for trial in 0..30u64 {
        let p = Arc::new(
            Problem::quadratic(
                vec![rng.random_range(-5.0..5.0)],
                vec![rng.random_range(0.2..3.0)],
            )
            .unwrap(),
        );
        let t = rng.random_range(600u64..5000);
        let mut u = UserInputs::new(t, rng.random_range(0.02..0.3));
        u.smoothness_floor = 10f64.powf(rng.random_range(-3.0..0.0));
        u.gap_floor = 10f64.powf(rng.random_range(-3.0..0.0));
        u.distance_floor = 10f64.powf(rng.random_range(-3.0..0.0));
        let noise = NoiseModel::constant(0.25, 0.25);
        let x0 = [rng.random_range(-3.0..3.0)];
        for which in 0..3 {
            let mut o = StochasticOracle::new(Arc::clone(&p), noise.clone(), trial, Some(t));
            let res = match which {
                0 => grasp_nc(&mut o, &x0, &u),
                1 => grasp_c(&mut o, &x0, &u),
                _ => grasp_core::grasp::grasp_c_nolb(&mut o, &x0, &u),
            };
            match res {
                Ok(r) => {
                    assert!(
                        r.ledger.total() <= t,
                        "ledger {} over cap {t}",
                        r.ledger.total()
                    );
                    assert_eq!(r.ledger.total(), o.calls_used());
                }
                Err(grasp_core::grasp::GraspError::InsufficientBudget(_)) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }
}

#[test]
fn trajectory_sampling_matches_its_seed_not_the_call_site() {
    // sampling indices depend only on the derived stream
    let p = Arc::new(Problem::quadratic(vec![0.0], vec![1.0]).unwrap());
    let trajectory: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
    let mut o1 = StochasticOracle::new(Arc::clone(&p), NoiseModel::noiseless(), 5, None);
    let mut o2 = StochasticOracle::new(Arc::clone(&p), NoiseModel::noiseless(), 5, None);
    let mut r1 = o1.derive_rng();
    let _ = o2.query_value(&[1.0]).unwrap(); // consume parent randomness
    let mut r2 = o2.derive_rng();
    let a = sample_trajectory_candidates(&trajectory, 6, &mut r1, 1).unwrap();
    let b = sample_trajectory_candidates(&trajectory, 6, &mut r2, 1).unwrap();
    for (ca, cb) in a.iter().zip(&b) {
        assert_eq!(ca.point, cb.point);
    }
}

#[cfg(feature = "parallel")]
#[test]
fn results_are_identical_across_thread_counts() {
    let run = || {
        let p = Arc::new(Problem::smooth_nonconvex(vec![2.0, 2.0], 0.1, 5.0).unwrap());
        let mut o = StochasticOracle::new(
            Arc::clone(&p),
            NoiseModel::constant(0.1, 0.0),
            42,
            Some(20_000),
        );
        let mut u = UserInputs::new(20_000, 0.05);
        u.smoothness_floor = 0.01;
        u.gap_floor = 0.01;
        let res = grasp_nc(&mut o, &[0.0, 0.0], &u).unwrap();
        (
            res.output.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            res.ledger.total(),
            res.selected.to_string(),
        )
    };
    let pool1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let pool8 = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .unwrap();
    let a = pool1.install(run);
    let b = pool8.install(run);
    assert_eq!(a, b);
}
