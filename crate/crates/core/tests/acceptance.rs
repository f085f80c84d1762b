//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS/FAIL line; the process fails if any does.

use std::process::ExitCode;
use std::result::Result;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use scorelab::estimation::*;
use scorelab::gmrf::*;
use scorelab::modelsel::*;
use scorelab::numerics::{minimize, Matrix, SeedSpec};
use scorelab::scores::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn propriety() -> Outcome {
    let rules = vec![
        RuleSpec::Log,
        RuleSpec::Brier,
        RuleSpec::tsallis(1.5).unwrap(),
        RuleSpec::tsallis(2.0).unwrap(),
        RuleSpec::tsallis(3.0).unwrap(),
        RuleSpec::bregman(ConvexFn::tlogt()).unwrap(),
    ];
    let mut failures = Vec::new();
    let mut checked = 0;
    for k in [2, 3] {
        let mut all = rules.clone();
        all.push(rule_from_loss(LossTable::zero_one(k)));
        for rule in &all {
            let report = check_propriety(rule, k, 0.01);
            checked += report.pairs_checked;
            if !report.passed {
                failures.push(format!(
                    "{} k={k}: margin {} ({:?})",
                    report.rule, report.worst_margin, report.error
                ));
            }
        }
    }
    ensure(failures.is_empty(), format!("{checked} pairs; violations: {failures:?}"))
}

fn unbiased_score_equation() -> Outcome {
    let normal = LocationFamily::normal(1.0);
    let cases: [(RuleSpec, &dyn ParametricFamily, [f64; 5]); 3] = [
        (RuleSpec::Log, &normal, [-2.0, -0.5, 0.0, 1.3, 4.0]),
        (RuleSpec::tsallis(2.0).unwrap(), &normal, [-1.0, 0.2, 0.7, 2.0, 3.5]),
        (RuleSpec::Brier, &BernoulliFamily, [0.1, 0.3, 0.5, 0.7, 0.9]),
    ];
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (c, (rule, family, thetas)) in cases.iter().enumerate() {
        for (i, &t) in thetas.iter().enumerate() {
            let mc = check_unbiased_estimating_equation(rule, *family, &[t], 100_000, SeedSpec::new(200 + c as u64, i as u64))
                .map_err(|e| e.to_string())?;
            let z = mc.mean[0].abs() / mc.standard_error[0];
            worst = worst.max(z);
            if z > 4.0 {
                failures.push(format!("{} θ={t}: z={z:.2}", rule.label()));
            }
        }
    }
    ensure(failures.is_empty(), format!("15 cases, max |mean|/SE = {worst:.2} {failures:?}"))
}

fn gmrf_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut used = 0;
    for r in 0..50 {
        let model = TridiagonalModel::new(2.0, 0.6, 200).unwrap();
        let data = simulate_chain(&model, 1, SeedSpec::new(300, r)).map_err(|e| e.to_string())?;
        if chain_statistics(&data).degenerate {
            continue;
        }
        used += 1;
        let closed = hyvarinen_closed_form(&data).map_err(|e| e.to_string())?;
        let closed = [closed.lambda_hat.unwrap(), closed.alpha_hat];

        let score = minimize(
            |t| hyvarinen_objective(&TridiagonalModel::new(t[0], t[1], 200).unwrap(), &data),
            &[1.0, 0.0],
            1e-14,
        )
        .map_err(|e| e.to_string())?;
        let score = [-score.argmin[1] / score.argmin[0], score.argmin[0]];

        let pseudo = minimize(
            |t| {
                if !(t[1] > 0.0) {
                    return f64::INFINITY;
                }
                let m = TridiagonalModel::new(t[1], -t[0] * t[1], 200).unwrap();
                -pseudo_loglik(&m, &data).unwrap()
            },
            &[0.0, 1.0],
            1e-14,
        )
        .map_err(|e| e.to_string())?;
        let pseudo = pseudo.argmin;

        for (a, b) in [(&closed[..], &score[..]), (&closed[..], &pseudo[..]), (&score[..], &pseudo[..])] {
            for i in 0..2 {
                worst = worst.max((a[i] - b[i]).abs());
            }
        }
    }
    let example = hyvarinen_closed_form(&ChainData::single(vec![1.0, -1.0, 2.0]).unwrap()).map_err(|e| e.to_string())?;
    let example_ok = (example.lambda_hat.unwrap() + 6.0 / 11.0).abs() < 1e-12
        && (example.alpha_hat - 1.1).abs() < 1e-12
        && (example.beta_hat - 0.6).abs() < 1e-12
        && !example.in_omega;
    ensure(
        worst < 1e-6 && example_ok && used > 0,
        format!("{used} data sets, max pairwise gap {worst:.2e}; y=(1,-1,2) example {}", if example_ok { "ok" } else { "wrong" }),
    )
}

fn determinant_identity() -> Outcome {
    let mut rng = SeedSpec::new(400, 0).rng();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=50usize);
        let alpha: f64 = rng.random_range(0.1..10.0);
        let beta = alpha * rng.random_range(-0.499..0.499);
        let model = TridiagonalModel::new(alpha, beta, n).unwrap();
        let fast = tridiag_logdet(&model).map_err(|e| e.to_string())?;
        let (dense, sign) = model.precision_matrix().log_abs_determinant().map_err(|e| e.to_string())?;
        if sign <= 0.0 {
            return Err(format!("dense determinant not positive at α={alpha}, β={beta}"));
        }
        // relative error of det is |e^{Δ log det} − 1|
        worst = worst.max((fast - dense).exp_m1().abs());
    }
    let det = tridiag_logdet(&TridiagonalModel::new(2.0, 0.5, 3).unwrap()).unwrap().exp();
    ensure(
        worst < 1e-8 && (det - 7.0).abs() < 1e-12,
        format!("max relative error {worst:.2e}; N=3 α=2 β=0.5 det = {det}"),
    )
}

fn wishart_closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    for r in 0..5 {
        let model = TridiagonalModel::new(2.0, 0.7, 3).unwrap();
        let chains = simulate_chain(&model, 12, SeedSpec::new(500, r)).map_err(|e| e.to_string())?;
        let data = WishartData::from_chain(&chains).map_err(|e| e.to_string())?;
        let WishartFit::Full { phi_hat } = wishart_hyvarinen_estimate(&data, false).map_err(|e| e.to_string())? else {
            return Err("unrestricted fit returned a tridiagonal result".into());
        };
        let sym = |t: &[f64]| {
            Matrix::from_rows(&[vec![t[0], t[3], t[4]], vec![t[3], t[1], t[5]], vec![t[4], t[5], t[2]]]).unwrap()
        };
        let min = minimize(|t| wishart_criterion(&data, &sym(t)).unwrap(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 1e-16)
            .map_err(|e| e.to_string())?;
        let numeric = sym(&min.argmin);
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((numeric[(i, j)] - phi_hat[i][j]).abs());
            }
        }
    }
    let data = WishartData::new(Matrix::identity(2).scale(2.0), 5).unwrap();
    let full = wishart_hyvarinen_estimate(&data, false).map_err(|e| e.to_string())?;
    let restricted = wishart_hyvarinen_estimate(&data, true).map_err(|e| e.to_string())?;
    let identity_ok = match full {
        WishartFit::Full { phi_hat } => phi_hat
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, v)| (v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12)),
        _ => false,
    };
    let restricted_ok = matches!(restricted,
        WishartFit::Tridiagonal { alpha_hat, beta_hat, .. } if (alpha_hat - 1.0).abs() < 1e-12 && beta_hat.abs() < 1e-12);
    ensure(
        worst < 1e-8 && identity_ok && restricted_ok,
        format!("max |numeric − (ν−N−1)S⁻¹| = {worst:.2e}; S=2I example {}", if identity_ok && restricted_ok { "ok" } else { "wrong" }),
    )
}

fn robustness() -> Outcome {
    let opts = RobustnessOptions::default();
    let mut cases = vec![
        (ConvexFn::tlogt(), LocationShape::Normal, false),
        (ConvexFn::power(2.0).unwrap(), LocationShape::Normal, true),
        // ψ″(0) = 0 for γ > 2
        (ConvexFn::power(3.0).unwrap(), LocationShape::Normal, true),
    ];
    for shape in LocationShape::ALL {
        cases.push((ConvexFn::brier(), shape, true));
    }
    let mut correct = 0;
    let mut wrong = Vec::new();
    for (psi, shape, bounded) in &cases {
        let report = brobustness_check(psi, *shape, opts);
        if report.classified_bounded == *bounded {
            correct += 1;
        } else {
            wrong.push(format!("{}/{}", psi.name(), shape.name()));
        }
    }
    ensure(correct == cases.len(), format!("{correct}/{} classifications correct {wrong:?}", cases.len()))
}

fn sandwich() -> Outcome {
    let family = LocationFamily::normal(1.0);
    let (reps, n) = (500u64, 500usize);
    let mut lines = Vec::new();
    let mut ok = true;
    for rule in [RuleSpec::Log, RuleSpec::tsallis(2.0).unwrap()] {
        let (j, k) = model_based_jk(&rule, &family, &[0.0]).map_err(|e| e.to_string())?;
        let g_inv = j[(0, 0)] / (k[(0, 0)] * k[(0, 0)]);
        let mut scaled = Vec::with_capacity(reps as usize);
        for r in 0..reps {
            let mut rng = SeedSpec::new(700, r).rng();
            let data: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.sample::<f64, _>(StandardNormal)]).collect();
            let fit = minimum_score_estimate(&rule, &family, &data, None).map_err(|e| e.to_string())?;
            scaled.push((n as f64).sqrt() * fit.theta_hat[0]);
        }
        let mean = scaled.iter().sum::<f64>() / reps as f64;
        let var = scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let rel = (var / g_inv - 1.0).abs();
        ok &= rel < 0.15;
        lines.push(format!("{}: empirical {var:.4} vs G⁻¹ {g_inv:.4} ({:.1}%)", rule.label(), 100.0 * rel));
    }
    ensure(ok, lines.join("; "))
}

fn conjugate(m: f64, tau2: f64, sigma: f64, x0: f64) -> BayesModelSpec {
    let post_var = 1.0 / (1.0 / tau2 + 1.0 / (sigma * sigma));
    let post_mean = post_var * (m / tau2 + x0 / (sigma * sigma));
    let half = 12.0 * post_var.sqrt();
    BayesModelSpec::new(
        "conjugate",
        LocationFamily::normal(sigma),
        Prior::normal(vec![m], vec![tau2]).unwrap(),
        vec![(post_mean - half, post_mean + half)],
    )
    .unwrap()
}

fn homogeneity() -> Outcome {
    let mut rng = SeedSpec::new(800, 0).rng();
    let mut broken = Vec::new();
    for t in 0..20 {
        // quoted densities: scores, pairwise differences and ranking
        let quotes: Vec<DensityModel> = (0..3)
            .map(|_| {
                let w: f64 = rng.random_range(0.2..0.8);
                DensityModel::normal_mixture(
                    &[w, 1.0 - w],
                    &[rng.random_range(-2.0..0.0), rng.random_range(0.0..2.0)],
                    &[rng.random_range(0.5..1.5), rng.random_range(0.5..1.5)],
                )
            })
            .collect();
        let x = [rng.random_range(-2.0..2.0)];
        let shifts: Vec<f64> = (0..3).map(|_| rng.random_range(-100.0..100.0)).collect();
        let score = |q: &DensityModel| RuleSpec::Hyvarinen.score_density(&x, q).unwrap();
        let base: Vec<f64> = quotes.iter().map(score).collect();
        let moved: Vec<f64> = quotes.iter().zip(&shifts).map(|(q, c)| score(&q.shifted(*c))).collect();
        let diffs = |s: &[f64]| vec![s[0] - s[1], s[0] - s[2], s[1] - s[2]];
        let order = |s: &[f64]| {
            let mut idx = vec![0, 1, 2];
            idx.sort_by(|a, b| s[*a].total_cmp(&s[*b]));
            idx
        };
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        if bits(&base) != bits(&moved) || bits(&diffs(&base)) != bits(&diffs(&moved)) || order(&base) != order(&moved) {
            broken.push(format!("density test {t}"));
        }

        // priors: the full comparison report
        let data = vec![vec![rng.random_range(-1.0..1.0)], vec![rng.random_range(-1.0..1.0)]];
        let models = vec![
            conjugate(rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0), 1.0, data[0][0]),
            BayesModelSpec::new("flat", LocationFamily::normal(1.0), Prior::flat(), vec![(-10.0, 10.0)]).unwrap(),
        ];
        let refs: Vec<&dyn MarginalModel> = models.iter().map(|m| m as &dyn MarginalModel).collect();
        let reference = compare_models(&RuleSpec::Hyvarinen, &refs, &data);
        let shifted: Vec<BayesModelSpec> = models.iter().map(|m| m.with_prior_shift(rng.random_range(-100.0..100.0))).collect();
        let refs: Vec<&dyn MarginalModel> = shifted.iter().map(|m| m as &dyn MarginalModel).collect();
        let report = compare_models(&RuleSpec::Hyvarinen, &refs, &data);
        let sd = score_difference(&RuleSpec::Hyvarinen, &models[0], &models[1], &data).map_err(|e| e.to_string())?;
        let sd_moved = score_difference(&RuleSpec::Hyvarinen, &shifted[0], &shifted[1], &data).map_err(|e| e.to_string())?;
        if report != reference || sd.to_bits() != sd_moved.to_bits() {
            broken.push(format!("prior test {t}"));
        }
    }
    ensure(broken.is_empty(), format!("20 shift tests, bit differences in {broken:?}"))
}

fn random_design(rng: &mut impl Rng, n: usize, p: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) }).collect())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

fn model_selection_formulas() -> Outcome {
    let ones = NormalLinearModel::new(Matrix::new(3, 1, vec![1.0; 3]).unwrap(), 1.0).unwrap();
    let example = nlm_improper_hyvarinen(&ones, &[0.0, 1.0, 2.0]).map_err(|e| e.to_string())?;

    let mut rng = SeedSpec::new(900, 0).rng();
    let mut gaps_exact = 0;
    for _ in 0..20 {
        let n = rng.random_range(5..40usize);
        let p = rng.random_range(1..=(n - 1).min(5));
        let sigma2: f64 = rng.random_range(0.2..5.0);
        let m = NormalLinearModel::new(random_design(&mut rng, n, p), sigma2).map_err(|e| e.to_string())?;
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
        if aic_gap(&m, &y).map_err(|e| e.to_string())? == -2.0 * n as f64 {
            gaps_exact += 1;
        }
    }

    let x = random_design(&mut rng, 15, 2);
    let y: Vec<f64> = (0..15).map(|i| 0.5 + x[(i, 1)] + rng.sample::<f64, _>(StandardNormal)).collect();
    let flat = NormalLinearModel::new(x, 1.0).unwrap();
    let target = nlm_improper_hyvarinen(&flat, &y).map_err(|e| e.to_string())?;
    let mut gaps = Vec::new();
    for v in [1e2, 1e4, 1e6] {
        let m = flat
            .clone()
            .with_prior(LinearPrior::Normal {
                mean: vec![0.0; 2],
                cov: Matrix::identity(2).scale(v),
            })
            .map_err(|e| e.to_string())?;
        gaps.push((nlm_proper_hyvarinen(&m, &y).map_err(|e| e.to_string())? - target).abs());
    }
    let monotone = gaps[0] > gaps[1] && gaps[1] > gaps[2];
    ensure(
        example == -2.0 && gaps_exact == 20 && monotone,
        format!("example = {example}; aic_gap exact on {gaps_exact}/20 designs; proper-prior gaps {gaps:?}"),
    )
}

fn predictive_identity() -> Outcome {
    let mut rng = SeedSpec::new(1000, 0).rng();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m: f64 = rng.random_range(-2.0..2.0);
        let tau2: f64 = rng.random_range(0.2..4.0);
        let sigma: f64 = rng.random_range(0.5..2.0);
        let x0: f64 = rng.random_range(-3.0..3.0);
        let model = conjugate(m, tau2, sigma, x0);
        let decomposed = hyvarinen_predictive_score(&model, &[vec![x0]]).map_err(|e| e.to_string())?;
        let direct = RuleSpec::Hyvarinen
            .score_density(&[x0], &DensityModel::normal(m, (tau2 + sigma * sigma).sqrt()))
            .map_err(|e| e.to_string())?;
        worst = worst.max((decomposed - direct).abs());
    }
    let flat = BayesModelSpec::new("flat", LocationFamily::normal(1.3), Prior::flat(), vec![(-15.0, 17.0)]).unwrap();
    let zero = hyvarinen_predictive_score(&flat, &[vec![0.8]]).map_err(|e| e.to_string())?;
    ensure(
        worst < 1e-5 && zero.abs() < 1e-6,
        format!("max deviation {worst:.2e} over 20 configurations; flat prior {zero:.2e}"),
    )
}

fn selection_rate(n: usize, reps: u64) -> Result<f64, String> {
    let mut wins = 0;
    for r in 0..reps {
        let mut rng = SeedSpec::new(1100 + n as u64, r).rng();
        let x = random_design(&mut rng, n, 2);
        let y: Vec<f64> = (0..n).map(|_| 1.0 + rng.sample::<f64, _>(StandardNormal)).collect();
        let small = NormalLinearModel::new(Matrix::new(n, 1, vec![1.0; n]).unwrap(), 1.0).map_err(|e| e.to_string())?;
        let big = NormalLinearModel::new(x, 1.0).map_err(|e| e.to_string())?;
        let a = prequential_hyvarinen(&small, &y).map_err(|e| e.to_string())?;
        let b = prequential_hyvarinen(&big, &y).map_err(|e| e.to_string())?;
        if a < b {
            wins += 1;
        }
    }
    Ok(wins as f64 / reps as f64)
}

fn prequential_consistency() -> Outcome {
    let small = selection_rate(50, 200)?;
    let large = selection_rate(500, 200)?;
    ensure(
        large >= 0.9 && large > small,
        format!("true model chosen at N=50: {:.1}%, at N=500: {:.1}%", 100.0 * small, 100.0 * large),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("propriety", propriety),
        ("unbiased score equation", unbiased_score_equation),
        ("gmrf estimator equivalence", gmrf_equivalence),
        ("tridiagonal determinant", determinant_identity),
        ("wishart closed forms", wishart_closed_forms),
        ("robustness classification", robustness),
        ("sandwich covariance", sandwich),
        ("homogeneity", homogeneity),
        ("model-selection formulas", model_selection_formulas),
        ("predictive-score identity", predictive_identity),
        ("prequential consistency", prequential_consistency),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
