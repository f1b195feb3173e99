//! Binary search and random search, on a synthetic threshold model and on
//! real training runs.

use lipstep::bounds::lipschitz_report;
use lipstep::experiments::generate_teacher_student;
use lipstep::net::{Activation, Dataset, NetworkArch, ParamVector};
use lipstep::optim::gd_train;
use lipstep::tuner::{
    binary_search_tune, binary_search_with, random_search_tune, random_search_with, Evaluation,
    TunerResult,
};

/// Training succeeds exactly below `eta_true`, with loss `1/eta`.
fn threshold(eta_true: f64) -> impl FnMut(f64) -> lipstep::Result<Evaluation> {
    move |eta| {
        let ok = eta < eta_true;
        Ok(Evaluation {
            final_loss: if ok { 1.0 / eta } else { f64::INFINITY },
            monotone: ok,
            diverged: !ok,
            trace: None,
        })
    }
}

fn final_anchor(r: &TunerResult) -> f64 {
    r.history.last().unwrap().anchor.unwrap()
}

fn successes(r: &TunerResult) -> i32 {
    r.history.iter().filter(|t| t.counted && t.success == Some(true)).count() as i32
}

#[test]
fn anchor_approaches_the_threshold() {
    let alpha = 1.0;
    for i in 1..400 {
        let u_true = i as f64 / 400.0;
        let mut previous_gap = f64::INFINITY;
        for evals in [0, 5, 10, 20, 40] {
            let r = binary_search_with(alpha, evals, threshold(1.0 / u_true)).unwrap();
            let gap = final_anchor(&r) - u_true;
            assert!(gap >= 0.0, "anchor crossed the threshold");
            assert!(gap <= previous_gap);
            // Each success at least halves the distance from the anchor to
            // the threshold.
            assert!(gap <= (alpha - u_true) * 0.5_f64.powi(successes(&r)) * (1.0 + 1e-12));
            previous_gap = gap;
        }
        assert!(previous_gap <= 0.06 * (alpha - u_true), "u_true {u_true}: gap {previous_gap}");
    }
}

#[test]
fn threshold_just_above_guaranteed_rate_needs_many_failures_first() {
    // With 1/eta_true = 1 - 2^-12 the trials 1/2, 3/4, 7/8, ... all fail until
    // the inverse step passes the threshold, so ten evaluations never move
    // the anchor.
    let u_true = 1.0 - 2.0_f64.powi(-12);
    let r = binary_search_with(1.0, 10, threshold(1.0 / u_true)).unwrap();
    assert_eq!(successes(&r), 0);
    assert_eq!(final_anchor(&r), 1.0);
    let inverse: Vec<f64> = r.history.iter().skip(1).map(|t| 1.0 / t.eta).collect();
    for (j, u) in inverse.iter().enumerate() {
        assert!((u - (1.0 - 0.5_f64.powi(j as i32 + 1))).abs() < 1e-12);
    }
    let r = binary_search_with(1.0, 13, threshold(1.0 / u_true)).unwrap();
    assert_eq!(successes(&r), 1);
}

fn check_invariants(r: &TunerResult, alpha: f64) {
    let chosen = r.chosen_eta.unwrap();
    let mut best = f64::INFINITY;
    for t in &r.history {
        assert!(t.eta >= 1.0 / alpha, "{} below {}", t.eta, 1.0 / alpha);
        if t.success == Some(true) {
            assert!(t.monotone && !t.diverged);
            assert!(t.final_loss <= best);
            best = t.final_loss;
        }
    }
    assert_eq!(r.best_loss, Some(best));
    let picked = r.history.iter().rev().find(|t| t.eta == chosen).unwrap();
    assert!(picked.monotone && !picked.diverged);
    let trace = r.best_trace.as_ref().unwrap();
    assert!(trace.monotone && !trace.diverged && trace.eta == chosen);
}

#[test]
fn binary_search_on_real_training_keeps_its_invariants() {
    let archs = [
        NetworkArch::one_layer(5, 4, Activation::Relu).unwrap(),
        NetworkArch::one_layer(5, 4, Activation::Sigmoid).unwrap(),
        NetworkArch::two_layer(4, 3, 2, Activation::Relu).unwrap(),
        NetworkArch::two_layer(4, 3, 2, Activation::Sigmoid).unwrap(),
    ];
    for (i, arch) in archs.iter().enumerate() {
        for seed in 0..5 {
            let ts = generate_teacher_student(arch, 40, 100 * i as u64 + seed).unwrap();
            let beta = 1.05 * ts.init.max_abs();
            let alpha = lipschitz_report(arch, &ts.data, Some(beta)).unwrap().alpha;
            let r = binary_search_tune(arch, &ts.init, &ts.data, alpha, 10, 50).unwrap();
            assert_eq!(r.baseline_monotone, Some(true), "{arch} seed {seed}");
            assert_eq!(r.evaluations, 10);
            check_invariants(&r, alpha);
        }
    }
}

#[test]
fn every_trial_reuses_the_same_initialization() {
    let arch = NetworkArch::one_layer(3, 2, Activation::Sigmoid).unwrap();
    let ts = generate_teacher_student(&arch, 20, 9).unwrap();
    let alpha = lipschitz_report(&arch, &ts.data, None).unwrap().alpha;
    let r = binary_search_tune(&arch, &ts.init, &ts.data, alpha, 6, 30).unwrap();
    for t in &r.history {
        let (trace, _) = gd_train(&arch, &ts.init, &ts.data, t.eta, 30).unwrap();
        assert_eq!(trace.final_loss().to_bits(), t.final_loss.to_bits());
    }
}

#[test]
fn random_search_is_reproducible() {
    let arch = NetworkArch::one_layer(3, 2, Activation::Relu).unwrap();
    let ts = generate_teacher_student(&arch, 20, 4).unwrap();
    let run = |seed| random_search_tune(&arch, &ts.init, &ts.data, (1e-4, 1.0), 8, 30, seed);
    let a = run(77).unwrap();
    assert_eq!(a, run(77).unwrap());
    assert_eq!(a.to_json().unwrap(), run(77).unwrap().to_json().unwrap());
    let other: Vec<f64> = run(78).unwrap().history.iter().map(|t| t.eta).collect();
    assert_ne!(a.history.iter().map(|t| t.eta).collect::<Vec<_>>(), other);
    for t in &a.history {
        assert!((1e-4..=1.0).contains(&t.eta));
    }
}

#[test]
fn degenerate_interval_returns_its_point() {
    let r = random_search_with((0.3, 0.3), 1, 5, threshold(1.0)).unwrap();
    assert_eq!(r.chosen_eta, Some(0.3));
}

#[test]
fn random_search_can_find_nothing_where_binary_search_cannot_fail() {
    // Large positive inputs and weights keep every ReLU unit active, so the
    // loss is a quadratic with curvature alpha > 100 and every rate in
    // [0.5, 1] overshoots.
    let arch = NetworkArch::one_layer(2, 2, Activation::Relu).unwrap();
    let data = Dataset::from_rows(
        &[vec![30.0, 10.0], vec![20.0, 25.0], vec![15.0, 30.0]],
        // Near the initial outputs 18, 23 and 24, so the initial loss is tiny.
        &[vec![18.1], vec![23.1], vec![24.1]],
    )
    .unwrap();
    let init = ParamVector::new(&arch, vec![0.3, 0.2, 0.1, 0.4]).unwrap();
    let alpha = lipschitz_report(&arch, &data, None).unwrap().alpha;
    assert!(alpha > 100.0);

    let random = random_search_tune(&arch, &init, &data, (0.5, 1.0), 10, 50, 1).unwrap();
    assert!(random.no_valid_rate);
    assert_eq!(random.chosen_eta, None);
    assert!(random.history.iter().all(|t| t.diverged));

    let binary = binary_search_tune(&arch, &init, &data, alpha, 10, 50).unwrap();
    assert!(!binary.no_valid_rate);
    assert_eq!(binary.baseline_monotone, Some(true));
    check_invariants(&binary, alpha);
}

/// The ReLU constant is the curvature on each linear piece of the loss; the
/// gradient itself jumps where a unit switches on or off, so a trajectory
/// crossing a kink can overshoot even at `1/alpha`. The search then has no
/// monotone anchor and stays at the guaranteed rate without spending budget.
#[test]
fn non_monotone_baseline_stops_the_search() {
    let arch = NetworkArch::one_layer(2, 2, Activation::Relu).unwrap();
    let data = Dataset::from_rows(
        &[vec![30.0, -10.0], vec![20.0, 25.0], vec![-15.0, 30.0]],
        &[vec![1.0], vec![2.0], vec![0.5]],
    )
    .unwrap();
    let init = ParamVector::new(&arch, vec![0.3, 0.2, 0.1, 0.4]).unwrap();
    let alpha = lipschitz_report(&arch, &data, None).unwrap().alpha;
    let r = binary_search_tune(&arch, &init, &data, alpha, 10, 50).unwrap();
    assert_eq!(r.baseline_monotone, Some(false));
    assert_eq!(r.evaluations, 0);
    assert_eq!(r.history.len(), 1);
    assert_eq!(r.chosen_eta, Some(1.0 / alpha));
    let trace = r.best_trace.unwrap();
    assert!(!trace.diverged && trace.final_loss() < trace.initial_loss());
}
