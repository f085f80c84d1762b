use serde::Serialize;

use super::{DiscreteDistribution, RuleSpec};

const VIOLATION_TOLERANCE: f64 = 1e-9;
const ZERO_GAP: f64 = 1e-12;

/// Outcome of a brute-force propriety check over a probability lattice.
#[derive(Debug, Clone, Serialize)]
pub struct ProprietyReport {
    pub rule: String,
    pub support_size: usize,
    pub grid_step: f64,
    pub pairs_checked: usize,
    pub passed: bool,
    /// Smallest `S(P, Q) − S(P, P)` over all pairs, including `Q = P`.
    pub worst_margin: f64,
    pub worst_p: Vec<f64>,
    pub worst_q: Vec<f64>,
    /// Smallest gap over pairs with `Q ≠ P`.
    pub min_gap_off_diagonal: f64,
    /// Pairs with `Q ≠ P` whose gap is within 1e-12 of zero.
    pub zero_gap_pairs: usize,
    pub strictly_proper_on_grid: bool,
    pub error: Option<String>,
}

/// All probability vectors of length `k` whose entries are multiples of `step`.
pub fn simplex_lattice(k: usize, step: f64) -> Vec<Vec<f64>> {
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    fill(&mut counts, 0, n, n, &mut out);
    out
}

fn fill(counts: &mut [usize], pos: usize, left: usize, n: usize, out: &mut Vec<Vec<f64>>) {
    let k = counts.len();
    if pos + 1 == k {
        counts[pos] = left;
        out.push(counts.iter().map(|&c| c as f64 / n as f64).collect());
        return;
    }
    for c in 0..=left {
        counts[pos] = c;
        fill(counts, pos + 1, left - c, n, out);
    }
}

/// Check `S(P, Q) ≥ S(P, P) − 1e-9` for every pair of lattice points on the
/// simplex of dimension `support_size`. Problems with the inputs or the rule
/// are reported in `error` rather than returned as failures.
pub fn check_propriety(rule: &RuleSpec, support_size: usize, grid_step: f64) -> ProprietyReport {
    let mut report = ProprietyReport {
        rule: rule.label(),
        support_size,
        grid_step,
        pairs_checked: 0,
        passed: false,
        worst_margin: f64::INFINITY,
        worst_p: Vec::new(),
        worst_q: Vec::new(),
        min_gap_off_diagonal: f64::INFINITY,
        zero_gap_pairs: 0,
        strictly_proper_on_grid: false,
        error: None,
    };
    if !(2..=4).contains(&support_size) {
        report.error = Some(format!("support size {support_size} outside 2..=4"));
        return report;
    }
    if !(grid_step > 0.0 && grid_step <= 0.05) {
        report.error = Some(format!("grid step {grid_step} outside (0, 0.05]"));
        return report;
    }
    let lattice = simplex_lattice(support_size, grid_step);
    let mut scores = Vec::with_capacity(lattice.len());
    for q in &lattice {
        let dist = DiscreteDistribution::from_probs(q.clone()).expect("lattice point on simplex");
        match rule.score_vector(&dist) {
            Ok(s) => scores.push(s),
            Err(e) => {
                report.error = Some(e.to_string());
                return report;
            }
        }
    }

    let expected = |p: &[f64], s: &[f64]| -> f64 {
        p.iter()
            .zip(s)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, v)| w * v)
            .sum()
    };
    let mut worst = (f64::INFINITY, 0, 0);
    for (i, p) in lattice.iter().enumerate() {
        let own = expected(p, &scores[i]);
        for (j, s) in scores.iter().enumerate() {
            let cross = expected(p, s);
            let gap = if cross == own { 0.0 } else { cross - own };
            report.pairs_checked += 1;
            if gap < worst.0 || gap.is_nan() {
                worst = (gap, i, j);
            }
            if i != j {
                if gap < report.min_gap_off_diagonal {
                    report.min_gap_off_diagonal = gap;
                }
                if gap.abs() <= ZERO_GAP {
                    report.zero_gap_pairs += 1;
                }
            }
        }
    }
    report.worst_margin = worst.0;
    report.worst_p = lattice[worst.1].clone();
    report.worst_q = lattice[worst.2].clone();
    report.passed = worst.0 >= -VIOLATION_TOLERANCE;
    report.strictly_proper_on_grid = report.passed && report.zero_gap_pairs == 0;
    report
}
