//! Oracle and property checks for the network, the Hessian oracle and the
//! bounds built on top of them.

use lipstep::bounds::{
    lipschitz_report, multi_output_sigmoid_bound, multi_output_sigmoid_bound_safe,
    one_layer_relu_exact, BoundMethod, StackedGram,
};
use lipstep::eigen::{
    brauer_cassini_bound, gershgorin_bound, power_iteration_default, symmetric_max_eigenvalue,
};
use lipstep::experiments::generate_teacher_student;
use lipstep::net::{
    gradient, hessian_numeric, hessian_numeric_raw, loss, max_hessian_eig_sampled,
    sampled_hessian_eigs, sigmoid, stencil_is_smooth, Activation, Dataset, NetworkArch,
    ParamVector, SampleRegion, DEFAULT_HESSIAN_CAP,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn normal_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect()).collect()
}

fn random_params(arch: &NetworkArch, rng: &mut ChaCha8Rng, half_width: f64) -> ParamVector {
    let values = (0..arch.param_count())
        .map(|_| rng.random_range(-half_width..half_width))
        .collect();
    ParamVector::new(arch, values).unwrap()
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The loss written out from scratch, sharing no code with the library.
fn loss_by_hand(arch: &NetworkArch, theta: &[f64], xs: &[Vec<f64>], ys: &[Vec<f64>]) -> f64 {
    let act: fn(f64) -> f64 = match arch.activation() {
        Activation::Relu => relu,
        Activation::Sigmoid => sigmoid,
    };
    let d = arch.input_dim();
    let widths = arch.hidden_widths();
    let k1 = widths[0];
    let hidden = |x: &[f64]| -> Vec<f64> {
        (0..k1).map(|l| act(dot(x, &theta[l * d..(l + 1) * d]))).collect()
    };
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let h = hidden(x);
        let out: Vec<f64> = if widths.len() == 2 {
            let w = &theta[k1 * d..];
            vec![(0..widths[1]).map(|a| act(dot(&h, &w[a * k1..(a + 1) * k1]))).sum()]
        } else if arch.output_dim() > 1 {
            let w = &theta[k1 * d..];
            (0..arch.output_dim()).map(|m| dot(&h, &w[m * k1..(m + 1) * k1])).collect()
        } else {
            vec![h.iter().sum()]
        };
        total += out.iter().zip(y).map(|(f, t)| (f - t).powi(2)).sum::<f64>();
    }
    total / (2.0 * xs.len() as f64)
}

#[test]
fn loss_matches_its_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let archs = [
        NetworkArch::one_layer(3, 2, Activation::Relu).unwrap(),
        NetworkArch::one_layer(3, 2, Activation::Sigmoid).unwrap(),
        NetworkArch::two_layer(3, 2, 2, Activation::Relu).unwrap(),
        NetworkArch::two_layer(3, 2, 3, Activation::Sigmoid).unwrap(),
        NetworkArch::multi_output(3, 2, 4, Activation::Sigmoid).unwrap(),
    ];
    for arch in archs {
        for _ in 0..10 {
            let xs = normal_rows(&mut rng, 2, arch.input_dim());
            let ys = normal_rows(&mut rng, 2, arch.output_dim());
            let data = Dataset::from_rows(&xs, &ys).unwrap();
            let p = random_params(&arch, &mut rng, 2.0);
            let got = loss(&arch, &p, &data).unwrap().value();
            let want = loss_by_hand(&arch, p.as_slice(), &xs, &ys);
            assert!((got - want).abs() <= 1e-12 * want.max(1.0), "{arch}: {got} vs {want}");
        }
    }
}

#[test]
fn gradient_vanishes_at_the_teacher() {
    let archs = [
        NetworkArch::one_layer(4, 3, Activation::Relu).unwrap(),
        NetworkArch::one_layer(4, 3, Activation::Sigmoid).unwrap(),
        NetworkArch::two_layer(4, 3, 2, Activation::Relu).unwrap(),
        NetworkArch::two_layer(4, 3, 2, Activation::Sigmoid).unwrap(),
    ];
    for (seed, arch) in archs.iter().enumerate() {
        let ts = generate_teacher_student(arch, 30, seed as u64).unwrap();
        assert!(loss(arch, &ts.teacher, &ts.data).unwrap().value() < 1e-20);
        let g = gradient(arch, &ts.teacher, &ts.data).unwrap();
        let worst = g.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-10, "{arch}: {worst}");
    }
}

#[test]
fn raw_hessian_is_symmetric_before_symmetrization() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 20 {
        let act = if checked % 2 == 0 { Activation::Sigmoid } else { Activation::Relu };
        let arch = if checked % 4 < 2 {
            NetworkArch::one_layer(3, 2, act).unwrap()
        } else {
            NetworkArch::two_layer(3, 2, 2, act).unwrap()
        };
        let data = Dataset::from_rows(
            &normal_rows(&mut rng, 4, 3),
            &normal_rows(&mut rng, 4, 1),
        )
        .unwrap();
        let p = random_params(&arch, &mut rng, 1.0);
        if !stencil_is_smooth(&arch, &p, &data) {
            continue;
        }
        let h = hessian_numeric_raw(&arch, &p, &data, DEFAULT_HESSIAN_CAP).unwrap();
        let diff = &h - h.transpose();
        let inf_norm = diff
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(inf_norm < 1e-7, "{arch}: {inf_norm:e}");
        checked += 1;
    }
}

#[test]
fn relu_hessian_is_the_masked_gram_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (d, k, n) = (3, 3, 5);
    let arch = NetworkArch::one_layer(d, k, Activation::Relu).unwrap();
    let mut checked = 0;
    while checked < 10 {
        let xs = normal_rows(&mut rng, n, d);
        let data = Dataset::from_rows(&xs, &normal_rows(&mut rng, n, 1)).unwrap();
        let p = random_params(&arch, &mut rng, 1.0);
        if !stencil_is_smooth(&arch, &p, &data) {
            continue;
        }
        let theta = p.as_slice();
        let mut expected = DMatrix::<f64>::zeros(k * d, k * d);
        for x in &xs {
            let a = DMatrix::from_fn(k * d, 1, |r, _| {
                let unit = r / d;
                if dot(x, &theta[unit * d..(unit + 1) * d]) > 0.0 {
                    x[r % d]
                } else {
                    0.0
                }
            });
            expected += &a * a.transpose();
        }
        expected /= n as f64;
        let h = hessian_numeric(&arch, &p, &data).unwrap();
        let err = (&h - &expected).norm() / expected.norm().max(1e-12);
        assert!(err < 1e-4, "relative Frobenius error {err:e}");
        checked += 1;
    }
}

#[test]
fn all_active_relu_curvature_reaches_k_norm_squared() {
    let x = vec![0.7, 1.3, 0.2];
    let norm_sq: f64 = x.iter().map(|v| v * v).sum();
    for k in [1, 2, 4] {
        let arch = NetworkArch::one_layer(3, k, Activation::Relu).unwrap();
        let data = Dataset::from_rows(std::slice::from_ref(&x), &[vec![0.5]]).unwrap();
        let eigs =
            sampled_hessian_eigs(&arch, &data, 20, SampleRegion::PositiveBox { beta: 1.0 }, 3)
                .unwrap();
        let target = k as f64 * norm_sq;
        for e in eigs {
            assert!((e - target).abs() / target < 1e-6, "k={k}: {e} vs {target}");
        }
        let exact = one_layer_relu_exact(&arch, &data).unwrap().alpha;
        assert!((exact - target).abs() / target < 1e-12);
    }
}

#[test]
fn sigmoid_curvature_stays_below_bound_on_small_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let arch = NetworkArch::one_layer(2, 3, Activation::Sigmoid).unwrap();
    let data = Dataset::from_rows(&normal_rows(&mut rng, 3, 2), &normal_rows(&mut rng, 3, 1))
        .unwrap();
    let alpha = lipschitz_report(&arch, &data, None).unwrap().alpha;
    let sampled = max_hessian_eig_sampled(&arch, &data, 100, 3.0, 1).unwrap();
    assert!(sampled <= alpha, "{sampled} > {alpha}");
}

#[test]
fn relu_exact_matches_explicit_four_by_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..10 {
        let xs = normal_rows(&mut rng, 3, 2);
        let data = Dataset::from_rows(&xs, &normal_rows(&mut rng, 3, 1)).unwrap();
        let arch = NetworkArch::one_layer(2, 2, Activation::Relu).unwrap();
        let mut m = DMatrix::<f64>::zeros(4, 4);
        for x in &xs {
            let a = [x[0], x[1], x[0], x[1]];
            for r in 0..4 {
                for c in 0..4 {
                    m[(r, c)] += a[r] * a[c] / 3.0;
                }
            }
        }
        let dense = m.symmetric_eigen().eigenvalues.max();
        let alpha = one_layer_relu_exact(&arch, &data).unwrap().alpha;
        // Power iteration converges to 1e-10 relative by default.
        assert!((alpha - dense).abs() <= 1e-10 * dense, "{alpha} vs {dense}");
    }
}

#[test]
fn power_iteration_matches_dense_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let b = DMatrix::from_fn(8, 8, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = b.transpose() * b;
        let dense = m.clone().symmetric_eigen().eigenvalues.max();
        let power = power_iteration_default(&m).unwrap();
        assert!((power - dense).abs() / dense < 1e-8, "{power} vs {dense}");
    }
}

#[test]
fn multi_output_expression_hand_evaluation() {
    // k1 = 2 hidden units, k2 = 2 outputs, beta = 1, x = [1, -2], o = [0.5, 1].
    let arch = NetworkArch::multi_output(2, 2, 2, Activation::Sigmoid).unwrap();
    let data = Dataset::from_rows(&[vec![1.0, -2.0]], &[vec![0.5, 1.0]]).unwrap();
    let r = multi_output_sigmoid_bound(&arch, &data, 1.0).unwrap();
    // ||x||_inf = 2, ||x||_1 = 3:
    //   4/16 * 6 + [(2 - 0.5) + (2 - 1)] * 0.1 * 6 + 4/4 * 2 + 2/4 * (2 - 0.5) * 2
    let expected = 1.5 + 1.5 + 2.0 + 1.5;
    assert!((r.alpha - expected).abs() < 1e-12, "{}", r.alpha);
    assert!(!r.is_exact);
    assert_eq!(r.beta, Some(1.0));
}

/// The multi-output expression has no term for the output-weight block, so at
/// `x = 0` it reports zero while the loss is still curved in those weights.
#[test]
fn multi_output_expression_misses_output_weight_curvature() {
    let arch = NetworkArch::multi_output(2, 3, 2, Activation::Sigmoid).unwrap();
    let data = Dataset::from_rows(&[vec![0.0, 0.0]], &[vec![0.3, -0.2]]).unwrap();
    let plain = multi_output_sigmoid_bound(&arch, &data, 1.0).unwrap();
    assert_eq!(plain.alpha, 0.0);
    assert!(!plain.warnings.is_empty());
    // Every hidden unit outputs 1/2, so each output's block is (1/4) * ones(3x3).
    let sampled = max_hessian_eig_sampled(&arch, &data, 5, 1.0, 0).unwrap();
    assert!((sampled - 0.75).abs() < 1e-6, "{sampled}");
    let safe = multi_output_sigmoid_bound_safe(&arch, &data, 1.0).unwrap();
    assert!(safe.alpha >= sampled);
}

#[test]
fn safe_multi_output_bound_dominates_sampled_curvature() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for inst in 0..20u64 {
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=3);
        let m = rng.random_range(2..=3);
        let n = rng.random_range(1..=5);
        let arch = NetworkArch::multi_output(d, k, m, Activation::Sigmoid).unwrap();
        let scale = [0.1, 1.0, 3.0][inst as usize % 3];
        let data = generate_teacher_student(&arch, n, inst)
            .unwrap()
            .data
            .scale_inputs(scale)
            .unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let alpha = multi_output_sigmoid_bound_safe(&arch, &data, beta).unwrap().alpha;
            let sampled = max_hessian_eig_sampled(&arch, &data, 50, beta, inst).unwrap();
            assert!(sampled <= alpha, "{arch}, beta {beta}: {sampled} > {alpha}");
        }
    }
}

fn dataset_strategy(max_n: usize, d: usize) -> impl Strategy<Value = Dataset> {
    (1..=max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(prop::collection::vec(-3.0..3.0_f64, d), n),
            prop::collection::vec(-2.0..2.0_f64, n),
        )
            .prop_map(|(xs, ys)| {
                let ys: Vec<Vec<f64>> = ys.into_iter().map(|y| vec![y]).collect();
                Dataset::from_rows(&xs, &ys).unwrap()
            })
    })
}

fn nonzero(data: &Dataset) -> bool {
    !data.all_inputs_zero()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stacked_gram_is_k_copies_of_the_data_gram(
        data in dataset_strategy(6, 3).prop_filter("nonzero", nonzero),
        k in prop::sample::select(vec![1usize, 2, 4]),
    ) {
        let stacked = StackedGram::new(&data, k);
        let big = symmetric_max_eigenvalue(stacked.matrix());
        let small = symmetric_max_eigenvalue(&lipstep::bounds::data_gram(&data));
        prop_assert!((big - k as f64 * small).abs() <= 1e-10 * big.max(1e-300));
    }

    #[test]
    fn relu_constant_scales_with_the_square_of_the_input(
        data in dataset_strategy(6, 3),
        c in 0.1..10.0_f64,
    ) {
        let arch = NetworkArch::one_layer(3, 2, Activation::Relu).unwrap();
        let base = one_layer_relu_exact(&arch, &data).unwrap().alpha;
        let scaled = one_layer_relu_exact(&arch, &data.scale_inputs(c).unwrap()).unwrap().alpha;
        prop_assert!((scaled - c * c * base).abs() <= 1e-10 * scaled.max(1e-300));
    }

    #[test]
    fn bounds_are_means_of_per_sample_bounds(
        data in dataset_strategy(6, 2),
        beta in 0.1..3.0_f64,
    ) {
        let archs = [
            NetworkArch::one_layer(2, 3, Activation::Sigmoid).unwrap(),
            NetworkArch::two_layer(2, 3, 2, Activation::Relu).unwrap(),
            NetworkArch::two_layer(2, 3, 2, Activation::Sigmoid).unwrap(),
        ];
        for arch in archs {
            let whole = lipschitz_report(&arch, &data, Some(beta)).unwrap().alpha;
            let mean = (0..data.len())
                .map(|i| lipschitz_report(&arch, &data.sample(i), Some(beta)).unwrap().alpha)
                .sum::<f64>() / data.len() as f64;
            prop_assert!((whole - mean).abs() <= 1e-12 * whole.abs().max(1.0));
        }
    }

    #[test]
    fn relu_constant_is_subadditive_over_samples(data in dataset_strategy(6, 3)) {
        let arch = NetworkArch::one_layer(3, 2, Activation::Relu).unwrap();
        let n = data.len() as f64;
        // N * alpha is lambda_max of the summed Gram matrices.
        let whole = n * one_layer_relu_exact(&arch, &data).unwrap().alpha;
        let parts: f64 = (0..data.len())
            .map(|i| one_layer_relu_exact(&arch, &data.sample(i)).unwrap().alpha)
            .sum();
        prop_assert!(whole <= parts * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn two_layer_bounds_grow_with_beta(
        data in dataset_strategy(4, 2).prop_filter("nonzero", nonzero),
        beta in 0.05..3.0_f64,
        step in 0.01..1.0_f64,
    ) {
        for act in [Activation::Relu, Activation::Sigmoid] {
            let arch = NetworkArch::two_layer(2, 2, 2, act).unwrap();
            let lo = lipschitz_report(&arch, &data, Some(beta)).unwrap();
            let hi = lipschitz_report(&arch, &data, Some(beta + step)).unwrap();
            prop_assert!(hi.alpha >= lo.alpha);
            prop_assert_eq!(lo.beta, Some(beta));
            prop_assert!((lo.eta * lo.alpha - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn one_layer_reports_carry_no_beta(data in dataset_strategy(4, 2).prop_filter("nonzero", nonzero)) {
        for act in [Activation::Relu, Activation::Sigmoid] {
            let arch = NetworkArch::one_layer(2, 2, act).unwrap();
            let r = lipschitz_report(&arch, &data, Some(1.0)).unwrap();
            prop_assert_eq!(r.beta, None);
            prop_assert!(!r.method.needs_beta());
            prop_assert_eq!(r.is_exact, r.method == BoundMethod::Relu1LExact);
            prop_assert!((r.eta * r.alpha - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn eigen_bounds_are_ordered(
        n in 2usize..=10,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let m = b.transpose() * b;
        let lambda = power_iteration_default(&m).unwrap();
        let brauer = brauer_cassini_bound(&m).unwrap();
        let gersh = gershgorin_bound(&m);
        // A few ulps of slack: for n = 2 the Cassini bound is exactly lambda_max.
        let slack = 1.0 + 4.0 * f64::EPSILON;
        prop_assert!(lambda <= brauer * slack, "{} > {}", lambda, brauer);
        prop_assert!(brauer <= gersh * slack, "{} > {}", brauer, gersh);
    }

    #[test]
    fn brauer_never_exceeds_gershgorin_on_general_matrices(
        entries in prop::collection::vec(-5.0..5.0_f64, 25),
        diag in prop::collection::vec(0.0..5.0_f64, 5),
    ) {
        let mut m = DMatrix::from_vec(5, 5, entries);
        for (i, v) in diag.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        let brauer = brauer_cassini_bound(&m).unwrap();
        prop_assert!(brauer <= gershgorin_bound(&m) * (1.0 + 4.0 * f64::EPSILON));
    }
}
