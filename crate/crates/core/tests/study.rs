use quadprice::pricing::price_call;
use quadprice::quadrature::QuadSpec;
use quadprice::study::{run_problematic_census, run_switch_census, SamplingPlan, PROBLEM_ERROR, PROBLEM_FEVALS};
use quadprice::switch::{decide, EvalStrategy, F0_GATE, OMEGA0};
use quadprice::testcases::test_case_1;

const DECADES: [(f64, f64); 5] = [(1e-6, 1e-5), (1e-5, 1e-4), (1e-4, 1e-3), (1e-3, 1e-2), (1e-2, 1e-1)];

#[test]
fn switching_fades_with_sigma() {
    for eps in [1e-3, 1e-6] {
        let f: Vec<f64> = DECADES
            .iter()
            .map(|&(lo, hi)| run_switch_census(&SamplingPlan::new(10_000, lo, hi, eps, 2024)).unwrap().switch_fraction())
            .collect();
        assert!(f.windows(2).all(|w| w[1] <= w[0]), "eps {eps}: {f:?}");
        assert!(f[0] > 0.05, "eps {eps}: {f:?}");
    }
}

#[test]
fn census_ignores_thread_count() {
    let plan = SamplingPlan::new(2_000, 1e-5, 1e-4, 1e-6, 5);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = one.install(|| run_switch_census(&plan)).unwrap();
    let b = run_switch_census(&plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.histogram.total(), plan.n);
}

#[test]
fn decisions_respect_both_gates() {
    let plan = SamplingPlan::new(5_000, 1e-6, 1e-3, 1e-6, 9);
    let mut par = 0;
    for i in 0..plan.n {
        let (p, q) = plan.draw(i);
        let Ok(d) = decide(&p, &q) else { continue };
        if d.par {
            par += 1;
            assert!(d.o > OMEGA0 && d.f0 > F0_GATE && d.o > d.threshold, "draw {i}: {d:?}");
        }
    }
    assert!(par > 0);
}

/// Problematic draws among the first `limit` whose `f0` falls below the gate, and the worst integral error.
fn gated_draws(plan: &SamplingPlan, limit: usize) -> (usize, Vec<u64>, f64) {
    let spec = QuadSpec::default();
    let (mut checked, mut problematic, mut worst) = (0, Vec::new(), 0.0f64);
    for i in 0..plan.n {
        let (p, q) = plan.draw(i);
        let Ok(d) = decide(&p, &q) else { continue };
        if d.f0 >= F0_GATE {
            continue;
        }
        let w = price_call(&p, &q, &spec, EvalStrategy::WorkingOnly).unwrap();
        let e = price_call(&p, &q, &spec, EvalStrategy::ExtendedFull(32)).unwrap();
        let err = (w.integral - e.integral).abs();
        worst = worst.max(err);
        if err > PROBLEM_ERROR || w.quad.fevals > PROBLEM_FEVALS {
            problematic.push(i);
        }
        checked += 1;
        if checked == limit {
            break;
        }
    }
    (checked, problematic, worst)
}

#[test]
fn tiny_f0_draws_stay_near_zero() {
    let (n, bad, worst) = gated_draws(&SamplingPlan::new(4_000, 1e-2, 1e-1, 1e-6, 13), 100);
    assert_eq!(n, 100);
    assert!(bad.is_empty(), "{bad:?}");
    assert!(worst <= PROBLEM_ERROR);

    // At small sigma a few gated draws cross the 1e-8 line; the error stays tiny in absolute terms.
    let (n, bad, worst) = gated_draws(&SamplingPlan::new(4_000, 1e-5, 1e-4, 1e-6, 13), 300);
    println!("sigma in [1e-5, 1e-4]: {} of {n} gated draws problematic {bad:?}, worst error {worst:e}", bad.len());
    assert_eq!(n, 300);
    assert!(worst < 1e-6 && bad.len() * 20 < n, "{worst:e} {bad:?}");
}

#[test]
fn large_sigma_reference_case_is_easy() {
    let s = test_case_1(0.1);
    let spec = QuadSpec::default();
    let w = price_call(&s.params, &s.quote, &spec, EvalStrategy::WorkingOnly).unwrap();
    let e = price_call(&s.params, &s.quote, &spec, EvalStrategy::ExtendedFull(32)).unwrap();
    assert!((w.integral - e.integral).abs() <= PROBLEM_ERROR);
    assert!(w.quad.fevals <= PROBLEM_FEVALS);
    assert!(!w.decision.par);
}

#[test]
fn problem_counts_add_up() {
    let plan = SamplingPlan::new(200, 1e-5, 1e-4, 1e-6, 11);
    let r = run_problematic_census(&plan, &QuadSpec::default(), 32).unwrap();
    let pc = r.problems.unwrap();
    assert_eq!(pc.problematic_switched + pc.missed_draws.len() as u64, pc.problematic);
    assert!(pc.problematic <= pc.err_gt_1e8 + pc.fevals_gt_1e4);
    assert!(pc.problematic_switched + pc.switched_not_problematic <= r.switch_on);
    // The decision is a heuristic: report how much it covers rather than demand all of it.
    println!(
        "problematic {} switched {} missed {:?} false alarms {}",
        pc.problematic, pc.problematic_switched, pc.missed_draws, pc.switched_not_problematic
    );
    assert!(pc.problematic_switched * 2 >= pc.problematic);
}
