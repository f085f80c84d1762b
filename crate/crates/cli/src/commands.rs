use rayon::prelude::*;
use scorelab::estimation::{minimum_score_estimate, model_based_jk, score_value, Member, ParametricFamily};
use scorelab::gmrf::{
    chain_statistics, exact_mle, hyvarinen_closed_form, refit_in_omega, simulate_chain, wishart_criterion,
    wishart_hyvarinen_estimate, ChainData, HyvarinenFit, TridiagonalModel, WishartData, WishartFit,
};
use scorelab::modelsel::{prequential_hyvarinen, prequential_terms, report_from_entries, ModelEntry};
use scorelab::numerics::{Matrix, SeedSpec};
use scorelab::scores::{self, RuleSpec};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::ingest::{read_table, Schema};
use crate::models::{self, Built, GridDefaults};
use crate::registry;
use crate::report::{matrix, num, nums, opt_matrix, opt_num, Output};
use crate::{
    CompareArgs, EstimateArgs, GmrfArgs, PreqArgs, ProprietyArgs, RuleArgs, ScoreArgs, SimulateArgs, WishartArgs,
};

/// Outcome count when the family quotes discrete distributions.
fn discrete_support(family: &dyn ParametricFamily) -> Option<usize> {
    match family.member(&family.initial_guess(&[])) {
        Ok(Member::Discrete(q)) => Some(q.len()),
        _ => None,
    }
}

fn rule_for(args: &RuleArgs, family: &dyn ParametricFamily) -> Result<RuleSpec, CliError> {
    registry::rule(&args.rule, args.gamma, args.psi.as_deref(), discrete_support(family))
}

fn observations(path: &std::path::Path) -> Result<Vec<Vec<f64>>, CliError> {
    Ok(read_table(path, &Schema::exact("x (one observation per row)", 1))?.rows)
}

pub fn score(args: &ScoreArgs) -> Result<Output, CliError> {
    let family = registry::family(&args.family.family, args.family.scale)?;
    let rule = rule_for(&args.rule, family.as_ref())?;
    if args.theta.len() != family.dimension() {
        return Err(CliError::Validation(format!(
            "--theta has {} value(s); the {} family has {} parameter(s)",
            args.theta.len(),
            family.name(),
            family.dimension()
        )));
    }
    let data = observations(&args.data)?;
    let scores = data
        .iter()
        .map(|x| score_value(&rule, family.as_ref(), x, &args.theta))
        .collect::<Result<Vec<f64>, _>>()?;
    let total: f64 = scores.iter().sum();
    Ok(Output::new(json!({
        "rule": rule.label(),
        "family": family.name(),
        "theta": nums(&args.theta),
        "n": scores.len(),
        "scores": nums(&scores),
        "total": num(total),
        "mean": num(total / scores.len() as f64),
    })))
}

pub fn estimate(args: &EstimateArgs) -> Result<Output, CliError> {
    let family = registry::family(&args.family.family, args.family.scale)?;
    let rule = rule_for(&args.rule, family.as_ref())?;
    let data = observations(&args.data)?;
    let fit = minimum_score_estimate(&rule, family.as_ref(), &data, args.start.as_deref())?;
    let out = Output::new(json!({
        "rule": rule.label(),
        "family": family.name(),
        "theta_hat": nums(&fit.theta_hat),
        "total_score": num(fit.total_score),
        "n": fit.n,
        "j": opt_matrix(fit.j.as_ref()),
        "k": opt_matrix(fit.k.as_ref()),
        "godambe": opt_matrix(fit.godambe.as_ref()),
        "sandwich_cov": opt_matrix(fit.sandwich_cov.as_ref()),
    }))
    .diagnostic("converged", json!(fit.converged))
    .diagnostic("iterations", json!(fit.iterations))
    .diagnostic("gradient_norm", num(fit.gradient_norm))
    .diagnostic("asymptotics_note", json!(fit.asymptotics_note));
    Ok(out)
}

fn hyvarinen_json(fit: &HyvarinenFit) -> Value {
    json!({
        "lambda_hat": opt_num(fit.lambda_hat),
        "alpha_hat": num(fit.alpha_hat),
        "beta_hat": num(fit.beta_hat),
        "in_omega": fit.in_omega,
        "projected": fit.projected,
    })
}

fn chains(path: &std::path::Path) -> Result<ChainData, CliError> {
    let table = read_table(path, &Schema::any_width("y1, ..., yN (one chain per row, one site per column)"))?;
    Ok(ChainData::new(table.rows)?)
}

pub fn gmrf_fit(args: &GmrfArgs) -> Result<Output, CliError> {
    let data = chains(&args.data)?;
    let stats = chain_statistics(&data);
    let fit = hyvarinen_closed_form(&data)?;
    let mut results = json!({
        "sites": data.sites(),
        "replicates": data.replicates(),
        "statistics": {
            "c_yz": num(stats.c_yz),
            "c_zz": num(stats.c_zz),
            "c_yy": num(stats.c_yy),
            "c_yy_dot_z": num(stats.c_yy_dot_z),
            "degenerate": stats.degenerate,
        },
        "hyvarinen": hyvarinen_json(&fit),
    });
    let mut out = Output::default().diagnostic("in_omega", json!(fit.in_omega));
    if !fit.in_omega {
        out = out.diagnostic(
            "note",
            json!("the estimate violates α > 2|β|, so the fitted precision is not positive definite for every N"),
        );
    }
    if stats.degenerate {
        out = out.diagnostic("degenerate", json!("c_zz = 0: λ̂ is undefined and β̂ is reported as 0"));
    }
    if let Some(eps) = args.refit_epsilon {
        if !(eps > 0.0) {
            return Err(CliError::Validation(format!("--refit-epsilon must be positive, got {eps}")));
        }
        results["refit"] = hyvarinen_json(&refit_in_omega(&data, fit, eps));
    }
    if args.mle {
        match exact_mle(&data) {
            Ok(m) => {
                results["mle"] = json!({
                    "alpha_hat": num(m.alpha_hat),
                    "beta_hat": num(m.beta_hat),
                    "neg_loglik": num(m.neg_loglik),
                    "converged": m.converged,
                })
            }
            Err(e) => out.failure = Some(format!("maximum-likelihood fit failed: {e}")),
        }
    }
    out.results = results;
    Ok(out)
}

pub fn wishart_fit(args: &WishartArgs) -> Result<Output, CliError> {
    let data = match (&args.data, &args.scatter, args.nu) {
        (Some(path), None, _) => WishartData::from_chain(&chains(path)?)?,
        (None, Some(path), Some(nu)) => {
            let table = read_table(path, &Schema::any_width("s1, ..., sN (the N×N scatter matrix)"))?;
            let s = Matrix::from_rows(&table.rows).map_err(|e| CliError::Validation(e.to_string()))?;
            WishartData::new(s, nu)?
        }
        _ => return Err(CliError::Validation("give either --data, or --scatter with --nu".into())),
    };
    let fit = wishart_hyvarinen_estimate(&data, args.tridiagonal)?;
    let (phi, fit_json) = match &fit {
        WishartFit::Full { phi_hat } => {
            let phi = Matrix::from_rows(phi_hat).map_err(|e| CliError::Numeric(e.to_string()))?;
            let j = json!({ "form": "full", "phi_hat": matrix(&phi) });
            (phi, j)
        }
        WishartFit::Tridiagonal { alpha_hat, beta_hat, in_omega } => {
            let phi = TridiagonalModel::new(*alpha_hat, *beta_hat, data.sites())?.precision_matrix();
            let j = json!({
                "form": "tridiagonal",
                "alpha_hat": num(*alpha_hat),
                "beta_hat": num(*beta_hat),
                "in_omega": in_omega,
            });
            (phi, j)
        }
    };
    let criterion = wishart_criterion(&data, &phi)?;
    Ok(Output::new(json!({
        "sites": data.sites(),
        "nu": data.nu(),
        "fit": fit_json,
        "criterion": num(criterion),
    }))
    .diagnostic("in_omega", json!(fit.in_omega())))
}

fn responses(path: &std::path::Path) -> Result<Vec<f64>, CliError> {
    Ok(read_table(path, &Schema::exact("y (one response per row)", 1))?.column())
}

pub fn compare(args: &CompareArgs) -> Result<Output, CliError> {
    let rule = match registry::rule(&args.rule, None, None, None)? {
        r @ (RuleSpec::Log | RuleSpec::Hyvarinen) => r,
        other => {
            return Err(CliError::Validation(format!(
                "model comparison supports the log and hyvarinen rules, not {}",
                other.label()
            )))
        }
    };
    let y = responses(&args.data)?;
    let grid = GridDefaults {
        lo: args.grid.grid_lo,
        hi: args.grid.grid_hi,
        points: args.grid.grid_points,
    };
    let loaded = models::load(&args.models, grid, &y)?;
    let data: Vec<Vec<f64>> = y.iter().map(|v| vec![*v]).collect();
    let entries: Vec<ModelEntry> = loaded
        .par_iter()
        .map(|m| {
            let scored = m.model.as_ref().map_err(Clone::clone).and_then(|b| b.score(&rule, &data));
            match scored {
                Ok(s) => ModelEntry {
                    model_id: m.id.clone(),
                    score: Some(s.value),
                    scale_arbitrary: s.scale_arbitrary,
                    errors: Vec::new(),
                },
                Err(e) => ModelEntry {
                    model_id: m.id.clone(),
                    score: None,
                    scale_arbitrary: false,
                    errors: vec![e],
                },
            }
        })
        .collect();
    let report = report_from_entries(rule.label(), entries);
    let mut sd = report.difference_matrix();
    for &i in &report.ranking {
        sd[i][i] = Some(0.0);
    }
    let ids: Vec<&str> = report.models.iter().map(|m| m.model_id.as_str()).collect();
    let failed = report.models.iter().filter(|m| !m.errors.is_empty()).count();
    let mut out = Output::new(json!({
        "rule": report.rule,
        "models": report.models.iter().map(|m| json!({
            "model_id": m.model_id,
            "score": opt_num(m.score),
            "scale_arbitrary": m.scale_arbitrary,
            "errors": m.errors,
        })).collect::<Vec<_>>(),
        "difference_matrix": sd.iter().map(|row| row.iter().map(|v| opt_num(*v)).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "ranking": report.ranking.iter().map(|&i| ids[i]).collect::<Vec<_>>(),
        "ties": report.ties.iter().map(|&(a, b)| [ids[a], ids[b]]).collect::<Vec<_>>(),
        "winner": report.winner().map(|i| ids[i]),
    }));
    let arbitrary: Vec<&str> = report.models.iter().filter(|m| m.scale_arbitrary).map(|m| m.model_id.as_str()).collect();
    if !arbitrary.is_empty() {
        out = out.diagnostic(
            "scale_arbitrary",
            json!(format!(
                "{} carry the arbitrary constant of an improper prior and are left out of differences and ranking",
                arbitrary.join(", ")
            )),
        );
    }
    if failed > 0 {
        out.failure = Some(format!("{failed} of {} models could not be scored", ids.len()));
    }
    Ok(out)
}

pub fn preq(args: &PreqArgs) -> Result<Output, CliError> {
    let y = responses(&args.data)?;
    let grid = GridDefaults {
        lo: None,
        hi: None,
        points: None,
    };
    let loaded = models::load(&args.models, grid, &y)?;
    let rows: Vec<(Option<f64>, Option<Vec<f64>>, Vec<String>)> = loaded
        .par_iter()
        .map(|m| {
            let model = match &m.model {
                Ok(Built::Linear(model)) => model,
                Ok(Built::Bayes(_)) => return (None, None, vec!["prequential scoring needs a normal-linear model".into()]),
                Err(e) => return (None, None, vec![e.clone()]),
            };
            let total = prequential_hyvarinen(model, &y);
            let terms = args.terms.then(|| prequential_terms(model, &y));
            match (total, terms) {
                (Ok(t), None) => (Some(t), None, Vec::new()),
                (Ok(t), Some(Ok(terms))) => (Some(t), Some(terms), Vec::new()),
                (Err(e), _) | (_, Some(Err(e))) => (None, None, vec![e.to_string()]),
            }
        })
        .collect();
    let mut ranking: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].0.is_some()).collect();
    ranking.sort_by(|&a, &b| rows[a].0.unwrap().total_cmp(&rows[b].0.unwrap()).then(a.cmp(&b)));
    let failed = rows.iter().filter(|r| !r.2.is_empty()).count();
    let mut out = Output::new(json!({
        "models": loaded.iter().zip(&rows).map(|(m, (score, terms, errors))| {
            let mut entry = json!({ "model_id": m.id, "score": opt_num(*score), "errors": errors });
            if let Some(t) = terms {
                entry["terms"] = nums(t);
            }
            entry
        }).collect::<Vec<_>>(),
        "ranking": ranking.iter().map(|&i| loaded[i].id.as_str()).collect::<Vec<_>>(),
    }))
    .diagnostic("scale", json!("scores are twice the Hyvärinen score of each one-step predictive"));
    if failed > 0 {
        out.failure = Some(format!("{failed} of {} models could not be scored", rows.len()));
    }
    Ok(out)
}

fn mean_and_covariance(points: &[Vec<f64>]) -> (Vec<f64>, Matrix) {
    let (n, p) = (points.len(), points[0].len());
    let mut mean = vec![0.0; p];
    for x in points {
        for i in 0..p {
            mean[i] += x[i] / n as f64;
        }
    }
    let mut cov = Matrix::zeros(p, p);
    for x in points {
        for i in 0..p {
            for j in 0..p {
                cov[(i, j)] += (x[i] - mean[i]) * (x[j] - mean[j]) / (n.max(2) - 1) as f64;
            }
        }
    }
    (mean, cov)
}

fn replicate_failures(errors: &[(usize, String)]) -> Value {
    Value::Array(errors.iter().map(|(r, e)| json!({ "replicate": r, "error": e })).collect())
}

pub fn simulate(args: &SimulateArgs) -> Result<Output, CliError> {
    let seed = args
        .seed
        .ok_or_else(|| CliError::Validation("simulate needs --seed (or SCORELAB_SEED)".into()))?;
    if args.replicates == 0 || args.n == 0 {
        return Err(CliError::Validation("--replicates and --n must be positive".into()));
    }
    if args.family == "gmrf" {
        return simulate_gmrf(args, seed);
    }
    let family = registry::family(&args.family, args.scale)?;
    let rule_name = args
        .rule
        .as_deref()
        .ok_or_else(|| CliError::Validation("simulate needs --rule for this family".into()))?;
    let rule = registry::rule(rule_name, args.gamma, args.psi.as_deref(), discrete_support(family.as_ref()))?;
    let theta = args
        .theta
        .clone()
        .ok_or_else(|| CliError::Validation("simulate needs the true --theta".into()))?;
    if theta.len() != family.dimension() || !family.theta_domain().contains(&theta) {
        return Err(CliError::Validation(format!("--theta {theta:?} is not a parameter of {}", family.name())));
    }
    if !family.has_sampler() {
        return Err(CliError::Validation(format!("the {} family has no sampler", family.name())));
    }
    // replicates run in any order; results are collected by index
    let runs: Vec<Result<(Vec<f64>, bool), String>> = (0..args.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = SeedSpec::new(seed, r as u64).rng();
            let data: Vec<Vec<f64>> = (0..args.n).map(|_| family.sample(&theta, &mut rng).expect("sampler")).collect();
            minimum_score_estimate(&rule, family.as_ref(), &data, Some(&theta))
                .map(|fit| (fit.theta_hat, fit.converged))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut estimates = Vec::new();
    let mut converged = 0;
    let mut failures = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok((t, c)) => {
                converged += usize::from(c);
                estimates.push(t);
            }
            Err(e) => failures.push((r, e)),
        }
    }
    let root_n = (args.n as f64).sqrt();
    let (summary, empirical) = if estimates.is_empty() {
        (Value::Null, Value::Null)
    } else {
        let scaled: Vec<Vec<f64>> = estimates
            .iter()
            .map(|t| t.iter().zip(&theta).map(|(a, b)| root_n * (a - b)).collect())
            .collect();
        let (mean, _) = mean_and_covariance(&estimates);
        let (_, cov) = mean_and_covariance(&scaled);
        (nums(&mean), matrix(&cov))
    };
    let model_based = match model_based_jk(&rule, family.as_ref(), &theta) {
        Ok((j, k)) => k
            .inverse()
            .and_then(|ki| ki.matmul(&j)?.matmul(&ki))
            .ok()
            .map(|m| matrix(&m.symmetrized())),
        Err(_) => None,
    };
    let mut out = Output::new(json!({
        "rule": rule.label(),
        "family": family.name(),
        "theta": nums(&theta),
        "n": args.n,
        "replicates": args.replicates,
        "seed": seed,
        "mean_estimate": summary,
        "scaled_covariance": empirical,
        "sandwich_covariance": model_based,
        "estimates": estimates.iter().map(|t| nums(t)).collect::<Vec<_>>(),
    }))
    .diagnostic("converged", json!(converged))
    .diagnostic("failures", replicate_failures(&failures));
    if !failures.is_empty() {
        out.failure = Some(format!("{} of {} replicates failed", failures.len(), args.replicates));
    }
    Ok(out)
}

fn simulate_gmrf(args: &SimulateArgs, seed: u64) -> Result<Output, CliError> {
    let (Some(alpha), Some(beta), Some(sites)) = (args.alpha, args.beta, args.sites) else {
        return Err(CliError::Validation("simulating a chain needs --alpha, --beta and --sites".into()));
    };
    let model = TridiagonalModel::new(alpha, beta, sites)?;
    model.check_omega()?;
    let runs: Vec<Result<HyvarinenFit, String>> = (0..args.replicates)
        .into_par_iter()
        .map(|r| {
            simulate_chain(&model, args.nu, SeedSpec::new(seed, r as u64))
                .and_then(|d| hyvarinen_closed_form(&d))
                .map_err(|e| e.to_string())
        })
        .collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(f) => fits.push(f),
            Err(e) => failures.push((r, e)),
        }
    }
    let points: Vec<Vec<f64>> = fits.iter().map(|f| vec![f.alpha_hat, f.beta_hat]).collect();
    let (mean, cov) = if points.is_empty() {
        (Value::Null, Value::Null)
    } else {
        let (m, c) = mean_and_covariance(&points);
        (nums(&m), matrix(&c))
    };
    let mut out = Output::new(json!({
        "family": "gmrf",
        "alpha": num(alpha),
        "beta": num(beta),
        "sites": sites,
        "nu": args.nu,
        "replicates": args.replicates,
        "seed": seed,
        "mean_estimate": mean,
        "estimate_covariance": cov,
        "in_omega": fits.iter().filter(|f| f.in_omega).count(),
        "estimates": points.iter().map(|p| nums(p)).collect::<Vec<_>>(),
    }))
    .diagnostic("failures", replicate_failures(&failures));
    if !failures.is_empty() {
        out.failure = Some(format!("{} of {} replicates failed", failures.len(), args.replicates));
    }
    Ok(out)
}

pub fn check_propriety(args: &ProprietyArgs) -> Result<Output, CliError> {
    let rule = registry::rule(&args.rule.rule, args.rule.gamma, args.rule.psi.as_deref(), Some(args.support))?;
    let r = scores::check_propriety(&rule, args.support, args.step);
    if let Some(e) = r.error {
        return Err(CliError::Validation(e));
    }
    Ok(Output::new(json!({
        "rule": r.rule,
        "support_size": r.support_size,
        "grid_step": num(r.grid_step),
        "pairs_checked": r.pairs_checked,
        "passed": r.passed,
        "worst_margin": num(r.worst_margin),
        "worst_p": nums(&r.worst_p),
        "worst_q": nums(&r.worst_q),
        "min_gap_off_diagonal": num(r.min_gap_off_diagonal),
        "zero_gap_pairs": r.zero_gap_pairs,
        "strictly_proper_on_grid": r.strictly_proper_on_grid,
    })))
}
