mod common;

use infogeo::bounds::*;
use infogeo::divergence::{ConvexGenerator, PriorDensity};
use infogeo::estimation::*;
use infogeo::geometry::{alpha_metric, fisher_metric};
use infogeo::linalg::psd_margin;
use infogeo::{DiffConfig, EscortMap, ParametricModel};
use nalgebra::DMatrix;

const ALPHAS: [f64; 4] = [0.5, 0.9, 1.5, 2.0];

/// Built-in models that admit an unbiased single-draw estimator, with one.
fn unbiased_fixtures() -> Vec<(ParametricModel, EstimatorTable, Vec<Vec<f64>>)> {
    let line: Vec<Vec<f64>> = (1..=9).map(|i| vec![0.1 * i as f64]).collect();
    let simplex = vec![vec![0.2, 0.3], vec![1.0 / 3.0, 1.0 / 3.0], vec![0.1, 0.6], vec![0.7, 0.1]];
    vec![
        (ParametricModel::bernoulli(), EstimatorTable::sample_mean(1), line.clone()),
        (ParametricModel::binomial(3).unwrap(), EstimatorTable::sample_mean(3), line),
        (ParametricModel::categorical(3).unwrap(), EstimatorTable::indicator(3).unwrap(), simplex),
    ]
}

#[test]
fn fixtures_are_unbiased() {
    for (m, est, grid) in unbiased_fixtures() {
        assert!(unbiasedness_check(&m, &est, &grid, &Weighting::Plain).unwrap().passed);
        for a in ALPHAS {
            let w = Weighting::EscortTransformed(EscortMap::alpha(a).unwrap());
            assert!(unbiasedness_check(&m, &est, &grid, &w).unwrap().passed);
        }
    }
}

#[test]
fn classical_bound_and_efficiency() {
    for (m, est, grid) in unbiased_fixtures() {
        for t in &grid {
            let r = crlb_check(&m, t, &est).unwrap();
            assert!(r.holds());
            if m.name().starts_with("categorical") || m.name() == "bernoulli" {
                assert!(r.psd_margin.unwrap().abs() <= 1e-12, "{} {t:?}", m.name());
            }
        }
    }
}

#[test]
fn alpha_bound_holds_for_transformed_error() {
    for (m, est, grid) in unbiased_fixtures() {
        for t in &grid {
            for a in ALPHAS {
                let r = alpha_crlb_check(&m, t, &est, a).unwrap();
                assert!(r.holds(), "{} {t:?} α={a}: {:?}", m.name(), r.psd_margin);
            }
        }
    }
}

#[test]
fn literal_escort_estimator_can_violate_the_alpha_bound() {
    // Cov_{p^(α)}[(p/p^(α))·θ̂] is not centered at the transformed error and
    // falls below [G^(α)]⁻¹ here: Bernoulli, θ = 0.8, α = 2, θ̂(x) = x.
    let m = ParametricModel::bernoulli();
    let f = EscortMap::alpha(2.0).unwrap();
    let est = EstimatorTable::sample_mean(1);
    let literal = exact_moments(&m, &[0.8], &est, &Weighting::EscortTransformed(f)).unwrap();
    let bound = alpha_metric(&m, &[0.8], 2.0).unwrap().inverse().unwrap();
    let margin = psd_margin(&literal.covariance, &bound);
    assert!(margin < -0.4, "{margin}");
    // The escort estimator is still unbiased under the escort weighting.
    assert!((literal.mean[0] - 0.8).abs() < 1e-14);
}

#[test]
fn alpha_bound_is_attained_on_bernoulli() {
    let m = ParametricModel::bernoulli();
    for t in [0.2, 0.5, 0.8] {
        for a in ALPHAS {
            let r = alpha_crlb_check(&m, &[t], &EstimatorTable::sample_mean(1), a).unwrap();
            assert!(r.psd_margin.unwrap().abs() < 1e-12);
        }
    }
}

#[test]
fn generalized_bound_for_fixture_pairs() {
    let cube = EscortMap::custom("cube", |p: &[f64]| {
        let s: f64 = p.iter().map(|v| v.powi(3)).sum();
        p.iter().map(|v| v.powi(3) / s).collect()
    });
    let pairs = [
        (ConvexGenerator::kl(), EscortMap::Identity),
        (ConvexGenerator::kl(), EscortMap::alpha(2.0).unwrap()),
        (ConvexGenerator::chi_squared(), EscortMap::alpha(1.5).unwrap()),
        (ConvexGenerator::alpha_escort(1.5).unwrap(), cube),
    ];
    for (m, est, grid) in unbiased_fixtures() {
        for t in &grid {
            for (f, map) in &pairs {
                let r = gen_crlb_check(&m, t, &est, f, map).unwrap();
                assert!(r.holds(), "{} {t:?} {}: {:?}", m.name(), map.name(), r.psd_margin);
            }
        }
    }
}

#[test]
fn generalized_bound_fails_for_contracting_escorts() {
    // For F = alpha(α), G^(f,F) = α²·G^(α). The transformed error attains
    // [G^(α)]⁻¹ on bernoulli, so [G^(f,F)]⁻¹ = [G^(α)]⁻¹/α² exceeds the
    // covariance whenever α < 1.
    let m = ParametricModel::bernoulli();
    let est = EstimatorTable::sample_mean(1);
    for t in [0.1, 0.5, 0.9] {
        let r = gen_crlb_check(&m, &[t], &est, &ConvexGenerator::kl(), &EscortMap::alpha(0.5).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Violated);
        let attained = alpha_crlb_check(&m, &[t], &est, 0.5).unwrap();
        let cov = attained.covariance.unwrap()[(0, 0)];
        assert!((r.bound[(0, 0)] - 4.0 * cov).abs() < 1e-12);
    }
}

#[test]
fn dual_coordinates_on_logit_linear_families() {
    let bern = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let two = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.5, 1.0]);
    let line: Vec<Vec<f64>> = (-4..=4).map(|i| vec![0.5 * i as f64]).collect();
    let plane = vec![vec![0.0, 0.0], vec![0.5, -1.0], vec![-1.5, 0.7]];
    for a in [1.0, 0.5, 2.0] {
        let em = ExponentialEscortModel::logit_linear(bern.clone(), vec![-5.0], vec![5.0], a).unwrap();
        let r = dual_coordinates_check(&em, &line).unwrap();
        assert!(r.passed, "α={a}: {r:?}");
        let em = ExponentialEscortModel::logit_linear(two.clone(), vec![-3.0; 2], vec![3.0; 2], a).unwrap();
        let r = dual_coordinates_check(&em, &plane).unwrap();
        assert!(r.passed, "α={a}: {r:?}");
    }
}

#[test]
fn sigmoid_values_at_zero() {
    let em = ExponentialEscortModel::logit_linear(DMatrix::from_column_slice(2, 1, &[0.0, 1.0]), vec![-5.0], vec![5.0], 1.0)
        .unwrap();
    assert!((em.potential(&[0.0]) - 2f64.ln()).abs() < 1e-15);
    let g = fisher_metric(em.base(), &[0.0]).unwrap();
    assert!((g.entries()[(0, 0)] - 0.25).abs() < 1e-15);
}

#[test]
fn constant_statistic_is_rejected() {
    let em = ExponentialEscortModel::logit_linear(DMatrix::from_column_slice(2, 1, &[1.0, 1.0]), vec![-1.0], vec![1.0], 1.0)
        .unwrap();
    assert!(dual_coordinates_check(&em, &[vec![0.0]]).is_err());
}

fn ramp_grid() -> (PriorDensity, ThetaGrid) {
    (PriorDensity::ramp(0.0, 1.0).unwrap(), ThetaGrid::midpoint(&[0.0], &[1.0], 201).unwrap())
}

#[test]
fn bayesian_bound_with_ramp_prior() {
    let m = ParametricModel::bernoulli();
    let (prior, grid) = ramp_grid();
    let (r, bb) = bayesian_crlb_check(&m, &prior, &grid, &EstimatorTable::sample_mean(1), 1.0, None).unwrap();
    assert!(r.psd_margin.unwrap() >= -1e-6);
    assert!(bb.jensen_margin >= -1e-9);
    let total: f64 = bb.weights.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn bayesian_alpha_bound_with_ramp_prior() {
    let m = ParametricModel::bernoulli();
    let (prior, grid) = ramp_grid();
    let est = EstimatorTable::sample_mean(1);
    for a in [0.9, 2.0] {
        let (r, bb) = bayesian_crlb_check(&m, &prior, &grid, &est, a, None).unwrap();
        assert!(r.psd_margin.unwrap() >= -1e-6, "α={a}: {:?}", r.psd_margin);
        assert!(bb.jensen_margin >= -1e-9);
    }
}

#[test]
fn bayesian_alpha_reduces_to_classical_cases() {
    let m = ParametricModel::bernoulli();
    let est = EstimatorTable::sample_mean(1);
    let (prior, grid) = ramp_grid();
    // α = 1: the same numbers as the Bayesian bound.
    let (a, _) = bayesian_crlb_check(&m, &prior, &grid, &est, 1.0, None).unwrap();
    let b = bayesian_bound(&m, &prior, &grid, 1.0, None).unwrap();
    assert_eq!(a.bound, b.bound);
    // Uniform prior: J = 0 and the bound is the averaged α-metric.
    let uniform = PriorDensity::uniform(vec![0.0], vec![1.0]).unwrap();
    for alpha in [0.9, 2.0] {
        let (r, _) = bayesian_crlb_check(&m, &uniform, &grid, &est, alpha, None).unwrap();
        let classical = integrated_classical_bound(&m, &grid, alpha).unwrap();
        assert_eq!(r.bound, classical.bound);
        assert!(r.holds());
    }
}

#[test]
fn matrix_jensen_for_builtin_priors() {
    let priors = [
        PriorDensity::uniform(vec![0.05], vec![0.95]).unwrap(),
        PriorDensity::ramp(0.0, 1.0).unwrap(),
        PriorDensity::beta(2.0, 3.0).unwrap(),
    ];
    for m in [ParametricModel::bernoulli(), ParametricModel::binomial(3).unwrap()] {
        for prior in &priors {
            let (lo, hi) = prior.support();
            let grid = ThetaGrid::midpoint(lo, hi, 64).unwrap();
            for a in [1.0, 0.5, 2.0] {
                let bb = bayesian_bound(&m, prior, &grid, a, None).unwrap();
                assert!(bb.jensen_margin >= -1e-9, "{} {} α={a}", m.name(), prior.name());
            }
        }
    }
    let m = ParametricModel::categorical(3).unwrap();
    let prior = PriorDensity::product(vec![
        PriorDensity::uniform(vec![0.05], vec![0.45]).unwrap(),
        PriorDensity::ramp(0.05, 0.45).unwrap(),
    ])
    .unwrap();
    let grid = ThetaGrid::midpoint(&[0.05, 0.05], &[0.45, 0.45], 12).unwrap();
    let bb = bayesian_bound(&m, &prior, &grid, 1.0, None).unwrap();
    assert!(bb.jensen_margin >= -1e-9);
}

#[test]
fn hybrid_masks() {
    let m = ParametricModel::categorical(3).unwrap();
    let uniform = PriorDensity::uniform(vec![0.05, 0.05], vec![0.45, 0.45]).unwrap();
    let grid = ThetaGrid::midpoint(&[0.05, 0.05], &[0.45, 0.45], 10).unwrap();
    let all_det = bayesian_bound(&m, &uniform, &grid, 1.0, Some(&HybridMask::all_deterministic(2))).unwrap();
    let classical = integrated_classical_bound(&m, &grid, 1.0).unwrap();
    assert_eq!(all_det.bound, classical.bound);

    let ramp = PriorDensity::product(vec![
        PriorDensity::ramp(0.05, 0.45).unwrap(),
        PriorDensity::ramp(0.05, 0.45).unwrap(),
    ])
    .unwrap();
    let none = bayesian_bound(&m, &ramp, &grid, 1.0, Some(&HybridMask::all_random(2))).unwrap();
    let plain = bayesian_bound(&m, &ramp, &grid, 1.0, None).unwrap();
    assert_eq!(none.bound, plain.bound);
    // A deterministic first component removes exactly the prior information
    // touching it; the random block keeps J_22.
    let half = bayesian_bound(&m, &ramp, &grid, 1.0, Some(&HybridMask::new(2, &[0]).unwrap())).unwrap();
    let det = bayesian_bound(&m, &ramp, &grid, 1.0, Some(&HybridMask::all_deterministic(2))).unwrap();
    assert_eq!(half.information[(0, 0)], det.information[(0, 0)]);
    assert_eq!(half.information[(0, 1)], det.information[(0, 1)]);
    assert_eq!(half.information[(1, 1)], plain.information[(1, 1)]);
}

#[test]
fn uniform_bayesian_bound_matches_quadrature() {
    let m = ParametricModel::bernoulli();
    let prior = PriorDensity::uniform(vec![0.1], vec![0.9]).unwrap();
    let grid = ThetaGrid::midpoint(&[0.1], &[0.9], 201).unwrap();
    let b = bayesian_bound(&m, &prior, &grid, 1.0, None).unwrap();
    let oracle = 0.182047845325367471;
    assert!((b.bound[(0, 0)] / oracle - 1.0).abs() < 1e-3);
}

#[test]
fn coarse_grids_are_rejected() {
    let m = ParametricModel::bernoulli();
    let prior = PriorDensity::uniform(vec![0.1], vec![0.9]).unwrap();
    let explicit = ThetaGrid::explicit(vec![vec![0.5]; 20]).unwrap();
    assert!(bayesian_bound(&m, &prior, &explicit, 1.0, None).is_err());
}

#[test]
fn zero_estimator_attains_the_biased_bound() {
    let m = ParametricModel::bernoulli();
    let zero = EstimatorTable::constant(2, &[0.0]).unwrap();
    for i in 1..=9 {
        let t = 0.1 * i as f64;
        let bound = biased_cr_bound(&m, &[t], |z| vec![-z[0]], &DiffConfig::default()).unwrap();
        let r = exact_moments(&m, &[t], &zero, &Weighting::Plain).unwrap();
        let mse = r.covariance[(0, 0)] + (r.mean[0] - t).powi(2);
        assert!((mse - t * t).abs() <= 1e-12);
        assert!((bound[(0, 0)] - mse).abs() <= 1e-12);
    }
}

#[test]
fn biased_bound_lower_bounds_mse() {
    // θ̂(x) = (x + 1)/3 on bernoulli has bias (1 − 2θ)/3.
    let m = ParametricModel::bernoulli();
    let est = EstimatorTable::from_rows("shrunk", &[vec![1.0 / 3.0], vec![2.0 / 3.0]]).unwrap();
    for i in 1..=9 {
        let t = 0.1 * i as f64;
        let bound = biased_cr_bound(&m, &[t], |z| vec![(1.0 - 2.0 * z[0]) / 3.0], &DiffConfig::default()).unwrap();
        let r = exact_moments(&m, &[t], &est, &Weighting::Plain).unwrap();
        let mse = r.covariance[(0, 0)] + (r.mean[0] - t).powi(2);
        assert!(mse >= bound[(0, 0)] - 1e-12);
    }
}

#[test]
fn barankin_examples() {
    let m = ParametricModel::bernoulli();
    let two = barankin_bound(&m, &[0.5], &TestPointSet::new(0.5, &[0.5, 0.6]).unwrap()).unwrap();
    assert!((two - 0.25).abs() <= 1e-10);
    for t in [0.2, 0.5, 0.7] {
        let eps = barankin_bound(&m, &[t], &TestPointSet::new(t, &[t, t + 1e-3]).unwrap()).unwrap();
        let crlb = 1.0 / fisher_metric(&m, &[t]).unwrap().entries()[(0, 0)];
        assert!((eps / crlb - 1.0).abs() <= 1e-3);
    }
}

#[test]
fn barankin_search_is_bracketed() {
    let cands: Vec<f64> = (1..20).map(|i| 0.05 * i as f64).collect();
    for (m, est) in [
        (ParametricModel::bernoulli(), EstimatorTable::sample_mean(1)),
        (ParametricModel::binomial(3).unwrap(), EstimatorTable::sample_mean(3)),
    ] {
        for t in [0.3, 0.5] {
            let var = exact_moments(&m, &[t], &est, &Weighting::Plain).unwrap().covariance[(0, 0)];
            let crlb = 1.0 / fisher_metric(&m, &[t]).unwrap().entries()[(0, 0)];
            let near = barankin_bound(&m, &[t], &TestPointSet::new(t, &[t, t + 1e-3]).unwrap()).unwrap();
            let mut grid = cands.clone();
            grid.push(t + 1e-3);
            let mut last = 0.0;
            for n in 1..=3 {
                let (v, witness) = barankin_search(&m, &[t], &grid, n).unwrap();
                assert!(v >= last, "monotone in n");
                assert!(v <= var + 1e-9, "{} θ={t} n={n}: {v} > {var}", m.name());
                assert!(v >= near && v >= crlb * (1.0 - 1e-2) && v >= crlb - 1e-6);
                assert_eq!(witness.points()[0], t);
                last = v;
            }
        }
    }
}

#[test]
fn barankin_rejects_vector_parameters() {
    let m = ParametricModel::categorical(3).unwrap();
    assert!(barankin_bound(&m, &[0.2, 0.3], &TestPointSet::new(0.2, &[0.2]).unwrap()).is_err());
}

#[test]
fn bound_report_contract() {
    let bound = DMatrix::from_element(1, 1, 0.25);
    let ok = BoundReport::new("t", bound.clone()).compare(DMatrix::from_element(1, 1, 0.25 - 1e-10)).unwrap();
    assert_eq!(ok.verdict, Verdict::Holds);
    let bad = BoundReport::new("t", bound.clone()).compare(DMatrix::from_element(1, 1, 0.2)).unwrap();
    assert_eq!(bad.verdict, Verdict::Violated);
    assert_eq!(BoundReport::new("t", bound).verdict, Verdict::NotCompared);
}

#[test]
fn monte_carlo_matches_exact_moments() {
    let m = ParametricModel::bernoulli();
    let est = EstimatorTable::sample_mean(1);
    let big = monte_carlo_moments(&m, &[0.5], &est, 1_000_000, 42).unwrap();
    assert!((big.covariance[(0, 0)] - 0.25).abs() <= 3.0 * 3.5e-4);
    // Errors shrink roughly like 1/√n across seeds.
    let exact = 0.3 * 0.7;
    let m2 = |n: u64| -> f64 {
        (0..10)
            .map(|s| (monte_carlo_moments(&m, &[0.3], &est, n, s).unwrap().covariance[(0, 0)] - exact).powi(2))
            .sum::<f64>()
            / 10.0
    };
    let (small, large) = (m2(1_000).sqrt(), m2(100_000).sqrt());
    assert!(large < small / 3.0, "{small} vs {large}");
    assert!(small < 5.0 * 0.0138 && large < 5.0 * 0.00138);
}

#[test]
fn categorical_indicator_moments() {
    let m = ParametricModel::categorical(3).unwrap();
    let t = [1.0 / 3.0, 1.0 / 3.0];
    let r = exact_moments(&m, &t, &EstimatorTable::indicator(3).unwrap(), &Weighting::Plain).unwrap();
    let inv = fisher_metric(&m, &t).unwrap().inverse().unwrap();
    assert!((&r.covariance - inv).amax() <= 1e-12);
    let _ = common::builtins();
}
