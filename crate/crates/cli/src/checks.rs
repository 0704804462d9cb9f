//! Check execution. Each check produces one record per (order, point).
//!
//! Errors returned from here are infrastructure failures (exit 2); a
//! mathematical violation is a record with `pass = false` (exit 1).

use anyhow::{anyhow, bail, Result};
use infogeo::bounds::{
    alpha_crlb_check, barankin_bound, barankin_search, bayesian_crlb_check, biased_cr_bound, gen_crlb_check,
    BoundReport, HybridMask, TestPointSet, ThetaGrid,
};
use infogeo::divergence::{bayesian_i_alpha, bayesian_kl_on_model, BayesianAlphaForm, PriorDensity};
use infogeo::estimation::{
    dual_coordinates_check, exact_moments, monte_carlo_moments, unbiasedness_check, ExponentialEscortModel,
    Weighting,
};
use infogeo::geometry::{alpha_metric, bayesian_metric, duality_residual, eguchi_metric, fisher_metric, gen_metric, MetricMatrix};
use infogeo::manifold::Family;
use infogeo::variants::compare_variants;
use infogeo::{EscortMap, ParametricModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{
    applies_to, build_generator, check_alphas, check_divergence, CheckDef, DivergenceDef, EscortSpec, Fixture,
    ModelCase, SuiteConfig,
};
use crate::report::{matrix, record, CheckRecord};

struct Ctx<'a> {
    suite: &'a SuiteConfig,
    case: &'a ModelCase,
    check: &'a CheckDef,
}

impl Ctx<'_> {
    fn model(&self) -> &ParametricModel {
        &self.case.model
    }

    fn name(&self, alpha: Option<f64>, theta: Option<&[f64]>) -> String {
        let mut tags = Vec::new();
        if let Some(a) = alpha {
            tags.push(format!("alpha={a}"));
        }
        if let Some(t) = theta {
            tags.push(format!("theta={t:?}"));
        }
        let tags = if tags.is_empty() { String::new() } else { format!("[{}]", tags.join(",")) };
        format!("{}/{}{tags}", self.case.label, self.check.kind)
    }

    fn inputs(&self, at: Value) -> Value {
        json!({
            "model": self.case.spec,
            "estimator": self.case.estimator.as_ref().map(|f| &f.spec),
            "prior": self.case.prior_spec,
            "check": self.check,
            "diff": self.suite.diff,
            "seed": self.suite.seed,
            "at": at,
        })
    }

    fn estimator(&self) -> Result<&Fixture> {
        self.case
            .estimator
            .as_ref()
            .ok_or_else(|| anyhow!("{} has no estimator", self.case.label))
    }

    fn prior(&self) -> Result<&PriorDensity> {
        self.case
            .prior
            .as_ref()
            .ok_or_else(|| anyhow!("{} has no prior", self.case.label))
    }

    fn alphas(&self) -> Vec<f64> {
        check_alphas(self.check, &self.suite.alphas)
    }

    fn tol(&self, default: f64) -> f64 {
        self.check.tolerance.unwrap_or(default)
    }
}

/// Runs `checks` on every model they apply to. With `claims`, estimators
/// marked unbiased get an unbiasedness record even when none was requested.
pub fn run_checks(suite: &SuiteConfig, checks: &[CheckDef], claims: bool) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for case in &suite.models {
        let explicit = checks.iter().any(|c| c.kind == "unbiasedness" && applies_to(c, case));
        if claims && !explicit && case.estimator.as_ref().is_some_and(|f| f.unbiased) {
            let claim = CheckDef {
                kind: "unbiasedness".into(),
                ..Default::default()
            };
            out.extend(run_check(suite, case, &claim)?);
        }
        for c in checks.iter().filter(|c| applies_to(c, case)) {
            out.extend(run_check(suite, case, c)?);
        }
    }
    Ok(out)
}

pub fn run_check(suite: &SuiteConfig, case: &ModelCase, check: &CheckDef) -> Result<Vec<CheckRecord>> {
    let cx = Ctx { suite, case, check };
    match check.kind.as_str() {
        "metric" => metric(&cx),
        "scale-relation" => scale_relation(&cx),
        "duality" => duality(&cx),
        "crlb" => escort_bound(&cx, &[1.0]),
        "alpha-crlb" => escort_bound(&cx, &cx.alphas()),
        "efficiency" => efficiency(&cx),
        "generalized-crlb" => generalized(&cx),
        "unbiasedness" => unbiasedness(&cx),
        "bayesian-crlb" => bayesian(&cx),
        "biased-crlb" => biased(&cx),
        "barankin" => barankin(&cx),
        "dual-coordinates" => dual_coordinates(&cx),
        "bayesian-nonnegativity" => nonnegativity(&cx),
        "variants" => variants(&cx),
        "monte-carlo" => monte_carlo(&cx),
        other => bail!("unknown check `{other}`"),
    }
}

fn metric_for(m: &ParametricModel, theta: &[f64], alpha: f64) -> Result<MetricMatrix> {
    Ok(if alpha == 1.0 {
        fisher_metric(m, theta)?
    } else {
        alpha_metric(m, theta, alpha)?
    })
}

fn escort_of(spec: Option<&EscortSpec>) -> Result<EscortMap> {
    spec.map_or(Ok(EscortMap::Identity), EscortSpec::build).map_err(|e| anyhow!(e))
}

/// The closed-form metric a divergence should induce.
fn closed_form(d: &DivergenceDef, m: &ParametricModel, prior: Option<&PriorDensity>, theta: &[f64], alpha: f64) -> Result<MetricMatrix> {
    let prior = || prior.ok_or_else(|| anyhow!("divergence `{}` needs a prior", d.name));
    Ok(match d.name.as_str() {
        "kl" => fisher_metric(m, theta)?,
        "i_alpha" => alpha_metric(m, theta, alpha)?,
        "generalized_f" => gen_metric(
            m,
            theta,
            &build_generator(d.f.as_deref()).map_err(|e| anyhow!(e))?,
            &escort_of(d.escort.as_ref())?,
        )?,
        "bayesian_kl" => bayesian_metric(m, prior()?, theta, 1.0)?.total,
        "bayesian_i_alpha" => bayesian_metric(m, prior()?, theta, alpha)?.total,
        other => bail!("no closed form for `{other}`"),
    })
}

/// Orders a divergence is evaluated at; `None` for divergences without one.
fn divergence_orders(d: &DivergenceDef, cx_alphas: Vec<f64>) -> Vec<Option<f64>> {
    if d.takes_alpha() {
        d.alpha.map_or(cx_alphas, |a| vec![a]).into_iter().map(Some).collect()
    } else {
        vec![None]
    }
}

fn metric(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let d = check_divergence(cx.check);
    let tol = cx.tol(1e-4);
    let mut out = Vec::new();
    for alpha in divergence_orders(&d, cx.alphas()) {
        let handle = d.build(alpha, cx.case.prior.as_ref()).map_err(|e| anyhow!(e))?;
        for theta in &cx.case.points {
            let fd = eguchi_metric(&handle, cx.model(), theta, &cx.suite.diff)?;
            let exact = closed_form(&d, cx.model(), cx.case.prior.as_ref(), theta, alpha.unwrap_or(1.0))?;
            let rel = fd.relative_distance(&exact);
            out.push(record(
                cx.name(alpha, Some(theta)),
                &cx.inputs(json!({"theta": theta, "alpha": alpha})),
                vec![
                    ("divergence", json!(handle.name())),
                    ("eguchi", matrix(fd.entries())),
                    ("closed_form", matrix(exact.entries())),
                    ("relative_error", json!(rel)),
                ],
                tol,
                rel <= tol,
            ));
        }
    }
    Ok(out)
}

fn scale_relation(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let f = build_generator(cx.check.f.as_deref()).map_err(|e| anyhow!(e))?;
    let tol = cx.tol(1e-8);
    let mut out = Vec::new();
    for alpha in cx.alphas() {
        let escort = EscortMap::for_order(alpha)?;
        for theta in &cx.case.points {
            let generalized = gen_metric(cx.model(), theta, &f, &escort)?;
            let scaled = metric_for(cx.model(), theta, alpha)?.entries() * (alpha * alpha);
            let rel = (generalized.entries() - &scaled).norm() / scaled.norm();
            out.push(record(
                cx.name(Some(alpha), Some(theta)),
                &cx.inputs(json!({"theta": theta, "alpha": alpha})),
                vec![
                    ("generalized", matrix(generalized.entries())),
                    ("alpha_squared_times_alpha_metric", matrix(&scaled)),
                    ("relative_error", json!(rel)),
                ],
                tol,
                rel <= tol,
            ));
        }
    }
    Ok(out)
}

fn duality(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let d = check_divergence(cx.check);
    let tol = cx.tol(3e-3);
    let cfg = cx.suite.third_order_diff();
    let mut out = Vec::new();
    for alpha in divergence_orders(&d, cx.alphas()) {
        let handle = d.build(alpha, cx.case.prior.as_ref()).map_err(|e| anyhow!(e))?;
        for theta in &cx.case.points {
            let r = duality_residual(&handle, cx.model(), theta, &cfg)?;
            out.push(record(
                cx.name(alpha, Some(theta)),
                &cx.inputs(json!({"theta": theta, "alpha": alpha, "scheme": cfg.scheme})),
                vec![
                    ("divergence", json!(handle.name())),
                    ("residual", json!(r.residual)),
                    ("max_abs_residual", json!(r.max_abs)),
                ],
                tol,
                r.max_abs <= tol,
            ));
        }
    }
    Ok(out)
}

fn bound_record(cx: &Ctx<'_>, name: String, inputs: Value, report: &BoundReport, tol: f64) -> CheckRecord {
    let margin = report.psd_margin.unwrap_or(f64::NAN);
    let mut values = vec![("bound", matrix(&report.bound)), ("psd_margin", json!(margin))];
    if let Some(c) = &report.covariance {
        values.push(("covariance", matrix(c)));
    }
    record(name, &cx.inputs(inputs), values, tol, margin >= -tol)
}

/// Classical (α = 1) and α bounds for the transformed error.
fn escort_bound(cx: &Ctx<'_>, alphas: &[f64]) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let mut out = Vec::new();
    for &alpha in alphas {
        for theta in &cx.case.points {
            let r = alpha_crlb_check(cx.model(), theta, est, alpha)?;
            let tol = cx.tol(r.tolerance());
            let name = cx.name((cx.check.kind != "crlb").then_some(alpha), Some(theta));
            out.push(bound_record(cx, name, json!({"theta": theta, "alpha": alpha}), &r, tol));
        }
    }
    Ok(out)
}

fn efficiency(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let tol = cx.tol(1e-12);
    let mut out = Vec::new();
    for alpha in cx.alphas() {
        for theta in &cx.case.points {
            let r = alpha_crlb_check(cx.model(), theta, est, alpha)?;
            let cov = r.covariance.as_ref().expect("compared report");
            let gap = (cov - &r.bound).amax();
            out.push(record(
                cx.name(Some(alpha), Some(theta)),
                &cx.inputs(json!({"theta": theta, "alpha": alpha})),
                vec![
                    ("bound", matrix(&r.bound)),
                    ("covariance", matrix(cov)),
                    ("max_abs_gap", json!(gap)),
                ],
                tol,
                gap <= tol,
            ));
        }
    }
    Ok(out)
}

fn generalized(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let f = build_generator(cx.check.f.as_deref()).map_err(|e| anyhow!(e))?;
    let escort = escort_of(cx.check.escort.as_ref())?;
    let mut out = Vec::new();
    for theta in &cx.case.points {
        let r = gen_crlb_check(cx.model(), theta, est, &f, &escort)?;
        let tol = cx.tol(r.tolerance());
        let inputs = json!({"theta": theta, "f": f.name(), "escort": escort.name()});
        out.push(bound_record(cx, cx.name(None, Some(theta)), inputs, &r, tol));
    }
    Ok(out)
}

/// The suite's points, or a 9-per-axis midpoint grid of the model box.
fn points_or_default(case: &ModelCase) -> Result<Vec<Vec<f64>>> {
    if !case.points.is_empty() {
        return Ok(case.points.clone());
    }
    let (l, u) = case.model.domain();
    let grid = ThetaGrid::midpoint(l, u, 9)?;
    Ok(grid
        .points()
        .iter()
        .filter(|p| case.model.check_point(p).is_ok())
        .cloned()
        .collect())
}

fn unbiasedness(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let fixture = cx.estimator()?;
    let points = points_or_default(cx.case)?;
    let r = unbiasedness_check(cx.model(), &fixture.table, &points, &Weighting::Plain)?;
    let tol = cx.tol(r.tolerance);
    Ok(vec![record(
        cx.name(None, None),
        &cx.inputs(json!({"points": points, "claimed_unbiased": fixture.unbiased})),
        vec![
            ("estimator", json!(r.estimator)),
            ("max_deviation", json!(r.max_deviation)),
            ("worst_theta", json!(r.worst_theta)),
            ("claimed_unbiased", json!(fixture.unbiased)),
        ],
        tol,
        r.max_deviation <= tol,
    )])
}

fn bayesian(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let prior = cx.prior()?;
    let (l, u) = prior.support();
    let n = cx.check.grid_points.unwrap_or(201);
    let grid = ThetaGrid::midpoint(l, u, n)?;
    let mask = cx
        .check
        .deterministic
        .as_ref()
        .map(|det| HybridMask::new(cx.model().dim(), det))
        .transpose()?;
    let tol = cx.tol(1e-6);
    let mut out = Vec::new();
    for alpha in cx.alphas() {
        let (r, bb) = bayesian_crlb_check(cx.model(), prior, &grid, est, alpha, mask.as_ref())?;
        let margin = r.psd_margin.unwrap_or(f64::NAN);
        out.push(record(
            cx.name(Some(alpha), None),
            &cx.inputs(json!({"alpha": alpha, "grid_points": n})),
            vec![
                ("bound", matrix(&r.bound)),
                ("covariance", matrix(r.covariance.as_ref().expect("compared report"))),
                ("information", matrix(&bb.information)),
                ("psd_margin", json!(margin)),
                ("jensen_margin", json!(bb.jensen_margin)),
                ("grid_points", json!(grid.len())),
            ],
            tol,
            margin >= -tol && bb.jensen_margin >= -tol,
        ));
    }
    Ok(out)
}

fn biased(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let m = cx.model();
    let k = m.dim();
    let bias = |t: &[f64]| -> Vec<f64> {
        exact_moments(m, t, est, &Weighting::Plain)
            .map(|r| r.mean.iter().zip(t).map(|(a, b)| a - b).collect())
            .unwrap_or_else(|_| vec![f64::NAN; k])
    };
    let mut out = Vec::new();
    for theta in &cx.case.points {
        let bound = biased_cr_bound(m, theta, bias, &cx.suite.diff)?;
        let moments = exact_moments(m, theta, est, &Weighting::Plain)?;
        let b = nalgebra::DVector::from_vec(bias(theta));
        let mse = &moments.covariance + &b * b.transpose();
        let r = BoundReport::new("biased-crlb", bound).compare(mse)?;
        let tol = cx.tol(r.tolerance());
        let mut rec = bound_record(cx, cx.name(None, Some(theta)), json!({"theta": theta}), &r, tol);
        rec.values.insert("bias".into(), json!(b.as_slice()));
        out.push(rec);
    }
    Ok(out)
}

fn barankin(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let m = cx.model();
    let tol = cx.tol(1e-9);
    let n = cx.check.subset_size.unwrap_or(2);
    let mut out = Vec::new();
    for theta in &cx.case.points {
        let t = theta[0];
        let candidates: Vec<f64> = match &cx.check.candidates {
            Some(c) => c.clone(),
            None => (1..20).map(|i| i as f64 / 20.0).collect(),
        }
        .into_iter()
        .filter(|c| (c - t).abs() > 1e-12 && m.check_point(&[*c]).is_ok())
        .collect();
        let variance = exact_moments(m, theta, est, &Weighting::Plain)?.covariance[(0, 0)];
        let crlb = 1.0 / fisher_metric(m, theta)?.entries()[(0, 0)];
        let (best, set) = barankin_search(m, theta, &candidates, n)?;
        let mut pass = best <= variance + tol;
        let mut values = vec![
            ("barankin", json!(best)),
            ("test_points", json!(set.points())),
            ("variance", json!(variance)),
            ("crlb", json!(crlb)),
        ];
        if let Some(tp) = &cx.check.test_points {
            let mut pts = vec![t];
            pts.extend(tp);
            let fixed = barankin_bound(m, theta, &TestPointSet::new(t, &pts)?)?;
            pass &= fixed <= variance + tol;
            values.push(("barankin_fixed_points", json!(fixed)));
        }
        out.push(record(
            cx.name(None, Some(theta)),
            &cx.inputs(json!({"theta": theta, "candidates": candidates, "subset_size": n})),
            values,
            tol,
            pass,
        ));
    }
    Ok(out)
}

fn dual_coordinates(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let m = cx.model();
    let Family::LogitLinear { statistics } = m.family() else {
        bail!("the dual-coordinates check needs a logit-linear model");
    };
    let (l, u) = m.domain();
    let mut out = Vec::new();
    for alpha in cx.alphas() {
        let em = ExponentialEscortModel::logit_linear(statistics.clone(), l.to_vec(), u.to_vec(), alpha)?;
        let r = dual_coordinates_check(&em, &cx.case.points)?;
        let tol = cx.tol(r.tolerance);
        let gaps = [r.invariant_gap, r.potential_gap, r.dual_gap, r.efficiency_gap, r.hessian_gap];
        out.push(record(
            cx.name(Some(alpha), None),
            &cx.inputs(json!({"alpha": alpha, "points": cx.case.points})),
            vec![
                ("invariant_gap", json!(r.invariant_gap)),
                ("potential_gap", json!(r.potential_gap)),
                ("dual_gap", json!(r.dual_gap)),
                ("efficiency_gap", json!(r.efficiency_gap)),
                ("hessian_gap", json!(r.hessian_gap)),
            ],
            tol,
            gaps.iter().all(|g| *g <= tol),
        ));
    }
    Ok(out)
}

/// A point drawn uniformly from the prior support shrunk by 1% on each
/// side, rejected until it lies in the model domain.
fn draw_point(rng: &mut ChaCha8Rng, m: &ParametricModel, prior: &PriorDensity) -> Result<Vec<f64>> {
    let (l, u) = prior.support();
    for _ in 0..1000 {
        let p: Vec<f64> = l
            .iter()
            .zip(u)
            .map(|(a, b)| a + (b - a) * (0.01 + 0.98 * rng.random::<f64>()))
            .collect();
        if m.check_point(&p).is_ok() {
            return Ok(p);
        }
    }
    bail!("cannot draw points of {} from the prior support", m.name())
}

fn nonnegativity(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let m = cx.model();
    let prior = cx.prior()?;
    let form = match cx.check.form.as_deref().unwrap_or("normalized") {
        "normalized" => BayesianAlphaForm::Normalized,
        "displayed" => BayesianAlphaForm::Displayed,
        "proof-alpha-factor" => BayesianAlphaForm::ProofAlphaFactor,
        other => bail!("unknown form `{other}`"),
    };
    let triples = cx.check.triples.unwrap_or(500);
    let fixed: Option<Vec<f64>> = cx.check.alphas.clone().or(cx.check.alpha.map(|a| vec![a]));
    let mut rng = ChaCha8Rng::seed_from_u64(cx.suite.seed);
    let mut worst = (f64::INFINITY, json!(null));
    let mut limit_gap = 0.0_f64;
    for i in 0..triples {
        let theta = draw_point(&mut rng, m, prior)?;
        let theta_prime = draw_point(&mut rng, m, prior)?;
        let alpha = match &fixed {
            Some(a) => a[i % a.len()],
            None => loop {
                let a = 0.1 + 2.9 * rng.random::<f64>();
                if (a - 1.0).abs() > 1e-3 {
                    break a;
                }
            },
        };
        let v = bayesian_i_alpha(m, prior, &theta, &theta_prime, alpha, form)?;
        if v < worst.0 {
            worst = (v, json!({"theta": theta, "theta_prime": theta_prime, "alpha": alpha}));
        }
        if i < 20 {
            let kl = bayesian_kl_on_model(m, prior, &theta, &theta_prime)?;
            for a in [1.0 - 1e-3, 1.0 + 1e-3] {
                limit_gap = limit_gap.max((bayesian_i_alpha(m, prior, &theta, &theta_prime, a, form)? - kl).abs());
            }
        }
    }
    let tol = cx.tol(1e-12);
    let inputs = cx.inputs(json!({"triples": triples, "form": format!("{form:?}")}));
    let mut out = vec![record(
        cx.name(None, None),
        &inputs,
        vec![("min_value", json!(worst.0)), ("worst_triple", worst.1), ("triples", json!(triples))],
        tol,
        worst.0 >= -tol,
    )];
    if form == BayesianAlphaForm::Normalized {
        let limit_tol = 5e-3;
        out.push(record(
            format!("{}/bayesian-alpha-limit", cx.case.label),
            &inputs,
            vec![("max_gap_to_bayesian_kl", json!(limit_gap)), ("offset", json!(1e-3))],
            limit_tol,
            limit_gap <= limit_tol,
        ));
    }
    Ok(out)
}

fn variants(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let tol = cx.tol(1e-10);
    let mut out = Vec::new();
    for alpha in cx.alphas() {
        for theta in &cx.case.points {
            let r = compare_variants(cx.model(), theta, alpha)?;
            let to_m = |rows: &Vec<Vec<f64>>| DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]);
            let ours = to_m(&r.ours);
            let scale = ours.amax().max(1.0);
            let conversion = r.conversion_gap / scale;
            let mut values = vec![
                ("ours", json!(r.ours)),
                ("naudts", json!(r.naudts)),
                ("bercher", json!(r.bercher)),
                ("naudts_ratio", json!(r.naudts_ratio)),
                ("relative_conversion_gap", json!(conversion)),
            ];
            let mut pass = conversion <= tol;
            if alpha == 1.0 {
                let gap = (to_m(&r.naudts) - &ours).amax().max((to_m(&r.bercher) - &ours).amax()) / scale;
                values.push(("relative_gap_at_one", json!(gap)));
                pass &= gap <= 1e-12;
            }
            out.push(record(
                cx.name(Some(alpha), Some(theta)),
                &cx.inputs(json!({"theta": theta, "alpha": alpha})),
                values,
                tol,
                pass,
            ));
        }
    }
    Ok(out)
}

fn monte_carlo(cx: &Ctx<'_>) -> Result<Vec<CheckRecord>> {
    let est = &cx.estimator()?.table;
    let n = cx.check.samples.unwrap_or(100_000);
    let tol = cx.tol(6.0);
    let mut out = Vec::new();
    for theta in &cx.case.points {
        let mc = monte_carlo_moments(cx.model(), theta, est, n, cx.suite.seed)?;
        let exact = exact_moments(cx.model(), theta, est, &Weighting::Plain)?;
        // Largest deviation of the sample mean in standard errors.
        let z = (0..est.dim())
            .map(|i| {
                let dev = (mc.mean[i] - exact.mean[i]).abs();
                let se = (exact.covariance[(i, i)] / n as f64).sqrt();
                if se > 0.0 {
                    dev / se
                } else if dev == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        out.push(record(
            cx.name(None, Some(theta)),
            &cx.inputs(json!({"theta": theta, "samples": n})),
            vec![
                ("mc_mean", json!(mc.mean.as_slice())),
                ("exact_mean", json!(exact.mean.as_slice())),
                ("mc_covariance", matrix(&mc.covariance)),
                ("max_z", json!(z)),
            ],
            tol,
            z <= tol,
        ));
    }
    Ok(out)
}

/// The divergences a `divergence` or `metric` run uses: the suite's list,
/// else `kl` plus `i_alpha` at every suite order other than 1.
pub fn selected_divergences(suite: &SuiteConfig) -> Vec<DivergenceDef> {
    if !suite.divergences.is_empty() {
        return suite.divergences.clone();
    }
    let mut out = vec![DivergenceDef {
        name: "kl".into(),
        ..Default::default()
    }];
    out.extend(suite.alphas.iter().filter(|a| **a != 1.0).map(|a| DivergenceDef {
        name: "i_alpha".into(),
        alpha: Some(*a),
        ..Default::default()
    }));
    out
}

/// `D(θ, θ′)` and `D(θ, θ)` for every selected divergence.
pub fn divergence_values(suite: &SuiteConfig) -> Result<Vec<CheckRecord>> {
    let tol = 1e-12;
    let mut out = Vec::new();
    for case in &suite.models {
        let theta = case
            .points
            .first()
            .ok_or_else(|| anyhow!("{} has no `theta` to evaluate at", case.label))?;
        let theta_prime = case
            .theta_prime
            .as_ref()
            .ok_or_else(|| anyhow!("{} has no `theta_prime`", case.label))?;
        for d in selected_divergences(suite) {
            for alpha in divergence_orders(&d, suite.alphas()) {
                let h = d.build(alpha, case.prior.as_ref()).map_err(|e| anyhow!(e))?;
                let value = h.eval(&case.model, theta, theta_prime)?;
                let diagonal = h.eval(&case.model, theta, theta)?;
                let check = CheckDef {
                    kind: "divergence".into(),
                    divergence: Some(d.name.clone()),
                    alpha,
                    ..Default::default()
                };
                let cx = Ctx { suite, case, check: &check };
                out.push(record(
                    format!("{}/{}", case.label, h.name()),
                    &cx.inputs(json!({"theta": theta, "theta_prime": theta_prime, "divergence": d})),
                    vec![("value", json!(value)), ("diagonal", json!(diagonal))],
                    tol,
                    value >= -tol && diagonal.abs() <= tol,
                ));
            }
        }
    }
    Ok(out)
}

/// The metric checks for every selected divergence.
pub fn metric_checks(suite: &SuiteConfig) -> Vec<CheckDef> {
    selected_divergences(suite)
        .into_iter()
        .map(|d| CheckDef {
            kind: "metric".into(),
            divergence: Some(d.name),
            alpha: d.alpha,
            f: d.f,
            escort: d.escort,
            form: d.form,
            ..Default::default()
        })
        .collect()
}

/// The bound checks: pointwise α bounds at the suite orders, plus the
/// Bayesian bound for models with a prior.
pub fn bound_checks(suite: &SuiteConfig) -> Vec<CheckDef> {
    let mut out = vec![CheckDef {
        kind: "alpha-crlb".into(),
        ..Default::default()
    }];
    let with_prior: Vec<String> = suite
        .models
        .iter()
        .filter(|m| m.prior.is_some())
        .map(|m| m.label.clone())
        .collect();
    if !with_prior.is_empty() {
        out.push(CheckDef {
            kind: "bayesian-crlb".into(),
            models: Some(with_prior),
            ..Default::default()
        });
    }
    out
}
