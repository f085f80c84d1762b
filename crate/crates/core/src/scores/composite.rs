use super::{DensityModel, DiscreteDistribution, JointDiscrete, Result, RuleSpec, ScoreError};

/// Distribution quoted for one component of a composite score.
#[derive(Debug, Clone)]
pub enum ComponentQuote {
    Discrete(JointDiscrete),
    Density(DensityModel),
}

/// One term `S_k(x_k, Q_k)` of a composite score, where `x_k` collects the
/// coordinates of `x` listed in `subset`.
#[derive(Debug, Clone)]
pub struct CompositeComponent {
    pub rule: RuleSpec,
    pub subset: Vec<usize>,
    pub quote: ComponentQuote,
}

/// `Σ_k S_k(x_k, Q_k)`. Coordinates fed to a discrete component must be
/// nonnegative integers; failures carry the index of the component.
pub fn composite_score(x: &[f64], components: &[CompositeComponent]) -> Result<f64> {
    if components.is_empty() {
        return Err(ScoreError::Specification(
            "composite score needs at least one component".into(),
        ));
    }
    let mut total = 0.0;
    for (index, c) in components.iter().enumerate() {
        total += component_score(x, c).map_err(|source| ScoreError::Component {
            index,
            source: Box::new(source),
        })?;
    }
    Ok(total)
}

fn component_score(x: &[f64], c: &CompositeComponent) -> Result<f64> {
    let sub: Vec<f64> = c
        .subset
        .iter()
        .map(|&v| {
            x.get(v).copied().ok_or(ScoreError::DimensionMismatch {
                expected: v + 1,
                got: x.len(),
            })
        })
        .collect::<Result<_>>()?;
    match &c.quote {
        ComponentQuote::Density(q) => c.rule.score_density(&sub, q),
        ComponentQuote::Discrete(q) => {
            let states: Vec<usize> = sub
                .iter()
                .map(|&v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(ScoreError::Specification(format!(
                            "discrete component needs integer states, got {v}"
                        )))
                    }
                })
                .collect::<Result<_>>()?;
            c.rule.score_joint(&states, q)
        }
    }
}

/// A joint model specified through the full conditional of each site given
/// all the others.
pub trait FullConditionals {
    type State;

    fn sites(&self) -> usize;

    /// `S₀(x_v, Q_v)` where `Q_v` is the conditional of site `v` given the
    /// rest of `config`.
    fn site_score(&self, rule: &RuleSpec, site: usize, config: &[Self::State]) -> Result<f64>;
}

/// `Σ_v S₀(x_v, Q_v)` over all sites.
pub fn pseudo_score<M>(x: &[M::State], model: &M, base: &RuleSpec) -> Result<f64>
where
    M: FullConditionals + ?Sized,
{
    if x.len() != model.sites() {
        return Err(ScoreError::DimensionMismatch {
            expected: model.sites(),
            got: x.len(),
        });
    }
    let mut total = 0.0;
    for site in 0..model.sites() {
        total += model.site_score(base, site, x)?;
    }
    Ok(total)
}

impl FullConditionals for JointDiscrete {
    type State = usize;

    fn sites(&self) -> usize {
        self.variables()
    }

    fn site_score(&self, rule: &RuleSpec, site: usize, config: &[usize]) -> Result<f64> {
        let cond = self.conditional(site, config)?;
        rule.score_discrete(config[site], &cond)
    }
}

/// Binary Ising model on a `rows × cols` grid with 4-neighbour coupling.
/// States are 0/1 and map to spins −1/+1; the joint is proportional to
/// `exp(h Σ s_v + J Σ_{v∼w} s_v s_w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingLattice {
    pub rows: usize,
    pub cols: usize,
    pub field: f64,
    pub coupling: f64,
}

impl IsingLattice {
    pub fn new(rows: usize, cols: usize, field: f64, coupling: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(ScoreError::Specification("empty lattice".into()));
        }
        Ok(Self {
            rows,
            cols,
            field,
            coupling,
        })
    }

    fn neighbours(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let (r, c) = (site / self.cols, site % self.cols);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(site - self.cols);
        }
        if r + 1 < self.rows {
            out.push(site + self.cols);
        }
        if c > 0 {
            out.push(site - 1);
        }
        if c + 1 < self.cols {
            out.push(site + 1);
        }
        out.into_iter()
    }

    /// `P(x_v = 1 | rest) = σ(2(h + J Σ_{w∼v} s_w))`.
    pub fn conditional(&self, site: usize, config: &[usize]) -> Result<DiscreteDistribution> {
        self.check(config)?;
        let local: f64 = self.neighbours(site).map(|w| spin(config[w])).sum();
        let eta = 2.0 * (self.field + self.coupling * local);
        let p1 = 1.0 / (1.0 + (-eta).exp());
        DiscreteDistribution::from_probs(vec![1.0 - p1, p1])
    }

    /// Exact joint by enumeration; practical up to about 20 sites.
    pub fn joint(&self) -> Result<JointDiscrete> {
        let n = self.rows * self.cols;
        if n > 20 {
            return Err(ScoreError::Specification(format!(
                "{n} sites are too many to enumerate"
            )));
        }
        let probe = JointDiscrete::new(vec![2; n], {
            let mut v = vec![0.0; 1 << n];
            v[0] = 1.0;
            v
        })?;
        let energies: Vec<f64> = (0..1usize << n)
            .map(|i| {
                let x = probe.decode(i);
                let mut e = 0.0;
                for v in 0..n {
                    e += self.field * spin(x[v]);
                    for w in self.neighbours(v).filter(|&w| w > v) {
                        e += self.coupling * spin(x[v]) * spin(x[w]);
                    }
                }
                e
            })
            .collect();
        let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = energies.iter().map(|e| (e - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        JointDiscrete::new(vec![2; n], weights.iter().map(|w| w / total).collect())
    }

    fn check(&self, config: &[usize]) -> Result<()> {
        if config.len() != self.rows * self.cols {
            return Err(ScoreError::DimensionMismatch {
                expected: self.rows * self.cols,
                got: config.len(),
            });
        }
        if let Some(&s) = config.iter().find(|&&s| s > 1) {
            return Err(ScoreError::OutOfSupport { index: s, size: 2 });
        }
        Ok(())
    }
}

fn spin(state: usize) -> f64 {
    if state == 1 {
        1.0
    } else {
        -1.0
    }
}

impl FullConditionals for IsingLattice {
    type State = usize;

    fn sites(&self) -> usize {
        self.rows * self.cols
    }

    fn site_score(&self, rule: &RuleSpec, site: usize, config: &[usize]) -> Result<f64> {
        rule.score_discrete(config[site], &self.conditional(site, config)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bit(q: f64) -> JointDiscrete {
        JointDiscrete::from_distribution(DiscreteDistribution::bernoulli(q).unwrap())
    }

    #[test]
    fn composite_examples() {
        let comps = vec![
            CompositeComponent {
                rule: RuleSpec::Brier,
                subset: vec![0],
                quote: ComponentQuote::Discrete(bit(0.5)),
            },
            CompositeComponent {
                rule: RuleSpec::Brier,
                subset: vec![1],
                quote: ComponentQuote::Discrete(bit(0.5)),
            },
        ];
        for x in [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            assert_abs_diff_eq!(composite_score(&x, &comps).unwrap(), 0.5, epsilon = 1e-15);
        }

        let a = DensityModel::normal(0.0, 1.0);
        let b = DensityModel::normal(1.0, 2.0);
        let logs = vec![
            CompositeComponent {
                rule: RuleSpec::Log,
                subset: vec![0],
                quote: ComponentQuote::Density(a.clone()),
            },
            CompositeComponent {
                rule: RuleSpec::Log,
                subset: vec![1],
                quote: ComponentQuote::Density(b.clone()),
            },
        ];
        let x = [0.3, -0.4];
        let joint = -(a.log_density(&[0.3]) + b.log_density(&[-0.4]));
        assert_abs_diff_eq!(composite_score(&x, &logs).unwrap(), joint, epsilon = 1e-14);
        assert_abs_diff_eq!(
            composite_score(&x, &logs[..1]).unwrap(),
            RuleSpec::Log.score_density(&[0.3], &a).unwrap(),
            epsilon = 0.0
        );
    }

    #[test]
    fn component_errors_carry_index() {
        let comps = vec![
            CompositeComponent {
                rule: RuleSpec::Log,
                subset: vec![0],
                quote: ComponentQuote::Discrete(bit(0.5)),
            },
            CompositeComponent {
                rule: RuleSpec::Hyvarinen,
                subset: vec![1],
                quote: ComponentQuote::Discrete(bit(0.5)),
            },
        ];
        assert!(matches!(
            composite_score(&[0.0, 1.0], &comps),
            Err(ScoreError::Component { index: 1, .. })
        ));
        assert!(matches!(
            composite_score(&[0.5, 1.0], &comps),
            Err(ScoreError::Component { index: 0, .. })
        ));
    }

    #[test]
    fn pseudo_examples() {
        let free = IsingLattice::new(2, 2, 0.0, 0.0).unwrap();
        let x = [1, 0, 0, 1];
        assert_abs_diff_eq!(pseudo_score(&x, &free, &RuleSpec::Log).unwrap(), 4.0 * 2f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(pseudo_score(&x, &free, &RuleSpec::Brier).unwrap(), 1.0, epsilon = 1e-15);

        let single = IsingLattice::new(1, 1, 0.4, 0.9).unwrap();
        let marginal = single.joint().unwrap();
        for s in 0..2 {
            assert_abs_diff_eq!(
                pseudo_score(&[s], &single, &RuleSpec::Log).unwrap(),
                RuleSpec::Log.score_discrete(s, marginal.flat()).unwrap(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn lattice_conditionals_agree_with_enumerated_joint() {
        let model = IsingLattice::new(2, 3, 0.2, -0.35).unwrap();
        let joint = model.joint().unwrap();
        let rule = RuleSpec::pseudo(RuleSpec::Log);
        for i in [0usize, 7, 22, 63] {
            let x = joint.decode(i);
            let a = pseudo_score(&x, &model, &RuleSpec::Log).unwrap();
            let b = pseudo_score(&x, &joint, &RuleSpec::Log).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            assert_abs_diff_eq!(rule.score_joint(&x, &joint).unwrap(), b, epsilon = 1e-12);
        }
    }
}
