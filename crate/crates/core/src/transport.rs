//! Exact minimum-cost transportation between finite distributions.
//!
//! The solver runs successive shortest augmenting paths (Bellman-Ford on the
//! residual graph) over any [`Scalar`]. Instances here are tiny (at most a
//! few dozen cells), so no attempt is made at speed.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Configuration, Page};
use crate::scalar::Scalar;

/// A finite probability distribution over configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigDistribution<S = crate::Rational> {
    weights: BTreeMap<Configuration, S>,
}

impl<S: Scalar> ConfigDistribution<S> {
    /// Merges repeated keys, strips zero weights, and requires the rest to
    /// be positive, of one size, and to sum to exactly one.
    pub fn new(items: impl IntoIterator<Item = (Configuration, S)>) -> Result<Self> {
        let d = Self::from_mass(items)?;
        let total = d.total();
        if !total.near(&S::one()) {
            return Err(Error::input(format!("distribution sums to {total}, not 1")));
        }
        Ok(d)
    }

    /// Like [`ConfigDistribution::new`] without the unit-mass requirement.
    pub(crate) fn from_mass(items: impl IntoIterator<Item = (Configuration, S)>) -> Result<Self> {
        let mut weights: BTreeMap<Configuration, S> = BTreeMap::new();
        for (x, w) in items {
            if w < S::zero() {
                return Err(Error::input(format!("negative weight on {x}")));
            }
            let slot = weights.entry(x).or_insert_with(S::zero);
            *slot = slot.clone() + w;
        }
        weights.retain(|_, w| !w.is_zero());
        let Some(k) = weights.keys().next().map(Configuration::k) else {
            return Err(Error::input("distribution has empty support"));
        };
        if weights.keys().any(|x| x.k() != k) {
            return Err(Error::input("distribution mixes configuration sizes"));
        }
        Ok(ConfigDistribution { weights })
    }

    pub fn point(x: Configuration) -> Self {
        ConfigDistribution {
            weights: BTreeMap::from([(x, S::one())]),
        }
    }

    /// Uniform over the given configurations.
    pub fn uniform(xs: impl IntoIterator<Item = Configuration>) -> Result<Self> {
        let xs: Vec<Configuration> = xs.into_iter().collect();
        let w = S::one() / S::from_count(xs.len() as u32);
        Self::new(xs.into_iter().map(|x| (x, w.clone())))
    }

    /// `Σ λᵢ πᵢ`.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (&'a S, &'a ConfigDistribution<S>)>) -> Result<Self> {
        let mut items = Vec::new();
        for (lam, pi) in parts {
            for (x, w) in &pi.weights {
                items.push((x.clone(), lam.clone() * w.clone()));
            }
        }
        Self::new(items)
    }

    pub fn get(&self, x: &Configuration) -> S {
        self.weights.get(x).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, &S)> {
        self.weights.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Configuration> {
        self.weights.keys()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn k(&self) -> usize {
        self.weights.keys().next().map(Configuration::k).unwrap_or(0)
    }

    fn total(&self) -> S {
        self.weights.values().fold(S::zero(), |a, w| a + w.clone())
    }

    /// Probability that page `p` is resident.
    pub fn page_probability(&self, p: Page) -> S {
        self.weights
            .iter()
            .filter(|(x, _)| x.contains(p))
            .fold(S::zero(), |a, (_, w)| a + w.clone())
    }
}

impl<S: Scalar> fmt::Display for ConfigDistribution<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (x, w)) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{w}{x}")?;
        }
        Ok(())
    }
}

pub type EdgeCost<'a, S> = Box<dyn Fn(&Configuration, &Configuration) -> S + 'a>;

/// Non-zero cells `(source, sink, flow)` of a plan.
pub type Cells<S> = Vec<(usize, usize, S)>;

/// Sources, sinks, and an edge cost between them.
pub struct TransportInstance<'a, S> {
    pub sources: Vec<(Configuration, S)>,
    pub sinks: Vec<(Configuration, S)>,
    pub edge_cost: EdgeCost<'a, S>,
}

/// A coupling of the two marginals, keyed by `(source, sink)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan<S = crate::Rational> {
    flow: BTreeMap<(Configuration, Configuration), S>,
}

impl<S: Scalar> TransportPlan<S> {
    pub fn flow(&self) -> &BTreeMap<(Configuration, Configuration), S> {
        &self.flow
    }

    pub fn get(&self, x: &Configuration, y: &Configuration) -> S {
        self.flow.get(&(x.clone(), y.clone())).cloned().unwrap_or_else(S::zero)
    }

    /// Outgoing flow from `x`, in sink order.
    pub fn row<'a>(&'a self, x: &'a Configuration) -> impl Iterator<Item = (&'a Configuration, &'a S)> + 'a {
        self.flow.iter().filter(move |((a, _), _)| a == x).map(|((_, b), w)| (b, w))
    }

    pub fn cost(&self, edge_cost: impl Fn(&Configuration, &Configuration) -> S) -> S {
        self.flow
            .iter()
            .fold(S::zero(), |acc, ((a, b), w)| acc + w.clone() * edge_cost(a, b))
    }

    pub fn source_marginal(&self, x: &Configuration) -> S {
        self.flow
            .iter()
            .filter(|((a, _), _)| a == x)
            .fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }

    pub fn sink_marginal(&self, y: &Configuration) -> S {
        self.flow
            .iter()
            .filter(|((_, b), _)| b == y)
            .fold(S::zero(), |acc, (_, w)| acc + w.clone())
    }
}

/// Index-level solver: returns the non-zero cells `(i, j, flow)` of an
/// optimal plan and its cost.
pub fn solve_indexed<S: Scalar>(
    supply: &[S],
    demand: &[S],
    cost: impl Fn(usize, usize) -> S,
) -> Result<(Cells<S>, S)> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::input("transport instance has an empty side"));
    }
    if supply.iter().chain(demand).any(|w| *w < S::zero()) {
        return Err(Error::input("negative marginal"));
    }
    let total_s = supply.iter().fold(S::zero(), |a, w| a + w.clone());
    let total_d = demand.iter().fold(S::zero(), |a, w| a + w.clone());
    if !total_s.near(&total_d) {
        return Err(Error::input(format!(
            "marginals have different mass ({total_s} vs {total_d})"
        )));
    }
    let c: Vec<Vec<S>> = (0..m).map(|i| (0..n).map(|j| cost(i, j)).collect()).collect();
    let mut flow = vec![vec![S::zero(); n]; m];
    let mut left: Vec<S> = supply.to_vec();
    let mut need: Vec<S> = demand.to_vec();

    // Node ids: sources 0..m, sinks m..m+n.
    #[derive(Clone, Copy)]
    enum Via {
        Forward(usize),  // reached sink j from source i
        Backward(usize), // reached source i from sink j
    }

    while need.iter().any(Scalar::clearly_positive) {
        let mut dist: Vec<Option<S>> = vec![None; m + n];
        let mut pred: Vec<Option<Via>> = vec![None; m + n];
        for i in 0..m {
            if left[i].clearly_positive() {
                dist[i] = Some(S::zero());
            }
        }
        for _ in 0..(m + n) {
            let mut changed = false;
            for i in 0..m {
                let Some(di) = dist[i].clone() else { continue };
                for j in 0..n {
                    let cand = di.clone() + c[i][j].clone();
                    if dist[m + j].as_ref().is_none_or(|d| cand < *d) {
                        dist[m + j] = Some(cand);
                        pred[m + j] = Some(Via::Forward(i));
                        changed = true;
                    }
                }
            }
            for j in 0..n {
                let Some(dj) = dist[m + j].clone() else { continue };
                for i in 0..m {
                    if flow[i][j].clearly_positive() {
                        let cand = dj.clone() - c[i][j].clone();
                        if dist[i].as_ref().is_none_or(|d| cand < *d) {
                            dist[i] = Some(cand);
                            pred[i] = Some(Via::Backward(j));
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let target = (0..n)
            .filter(|&j| need[j].clearly_positive() && dist[m + j].is_some())
            .min_by(|&a, &b| {
                dist[m + a]
                    .as_ref()
                    .unwrap()
                    .partial_cmp(dist[m + b].as_ref().unwrap())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            })
            .ok_or_else(|| Error::InvalidState("no augmenting path in transport".into()))?;

        // Walk back to a source with spare supply, collecting cells.
        let mut cells: Vec<(usize, usize, bool)> = Vec::new();
        let mut node = m + target;
        let start = loop {
            match pred[node] {
                Some(Via::Forward(i)) => {
                    cells.push((i, node - m, true));
                    node = i;
                }
                Some(Via::Backward(j)) => {
                    cells.push((node, j, false));
                    node = m + j;
                }
                None => break node,
            }
        };
        debug_assert!(start < m && left[start].clearly_positive());
        let mut amount = if left[start] < need[target] {
            left[start].clone()
        } else {
            need[target].clone()
        };
        for &(i, j, fwd) in &cells {
            if !fwd && flow[i][j] < amount {
                amount = flow[i][j].clone();
            }
        }
        for &(i, j, fwd) in &cells {
            if fwd {
                flow[i][j] = flow[i][j].clone() + amount.clone();
            } else {
                flow[i][j] = flow[i][j].clone() - amount.clone();
            }
        }
        left[start] = left[start].clone() - amount.clone();
        need[target] = need[target].clone() - amount;
    }

    let mut cells = Vec::new();
    let mut total = S::zero();
    for (i, row) in flow.into_iter().enumerate() {
        for (j, f) in row.into_iter().enumerate() {
            if f.clearly_positive() {
                total += f.clone() * c[i][j].clone();
                cells.push((i, j, f));
            }
        }
    }
    Ok((cells, total))
}

/// Minimum-cost plan for a configuration-level instance.
///
/// Sources and sinks are sorted (and zero weights dropped) before solving,
/// so the returned plan depends only on the instance's content.
pub fn solve_min_cost<S: Scalar>(inst: &TransportInstance<'_, S>) -> Result<(TransportPlan<S>, S)> {
    let prep = |side: &[(Configuration, S)]| -> Vec<(Configuration, S)> {
        let mut v: Vec<_> = side.iter().filter(|(_, w)| !w.is_zero()).cloned().collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    };
    let src = prep(&inst.sources);
    let dst = prep(&inst.sinks);
    if src.windows(2).any(|w| w[0].0 == w[1].0) || dst.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::input("transport side lists a configuration twice"));
    }
    let supply: Vec<S> = src.iter().map(|(_, w)| w.clone()).collect();
    let demand: Vec<S> = dst.iter().map(|(_, w)| w.clone()).collect();
    let (cells, total) = solve_indexed(&supply, &demand, |i, j| (inst.edge_cost)(&src[i].0, &dst[j].0))?;
    let flow = cells
        .into_iter()
        .map(|(i, j, f)| ((src[i].0.clone(), dst[j].0.clone()), f))
        .collect();
    Ok((TransportPlan { flow }, total))
}

fn sides<S: Scalar>(d: &ConfigDistribution<S>) -> Vec<(Configuration, S)> {
    d.iter().map(|(x, w)| (x.clone(), w.clone())).collect()
}

/// Earth mover's distance between distributions under the swap metric.
pub fn distribution_distance<S: Scalar>(pi: &ConfigDistribution<S>, sigma: &ConfigDistribution<S>) -> Result<S> {
    if pi.k() != sigma.k() {
        return Err(Error::input("distributions over different cache sizes"));
    }
    let inst = TransportInstance {
        sources: sides(pi),
        sinks: sides(sigma),
        edge_cost: Box::new(|x: &Configuration, y: &Configuration| S::from_count(x.moves_to(y))),
    };
    Ok(solve_min_cost(&inst)?.1)
}

/// Optimal plan for moving `pi` to `sigma` while serving `r`.
pub fn step_plan<S: Scalar>(
    pi: &ConfigDistribution<S>,
    r: Page,
    sigma: &ConfigDistribution<S>,
) -> Result<(TransportPlan<S>, S)> {
    if pi.k() != sigma.k() {
        return Err(Error::input("distributions over different cache sizes"));
    }
    let inst = TransportInstance {
        sources: sides(pi),
        sinks: sides(sigma),
        edge_cost: Box::new(move |x: &Configuration, y: &Configuration| S::from_count(x.serve_cost(r, y))),
    };
    solve_min_cost(&inst)
}

/// Expected cost of one step of a distributional algorithm.
pub fn step_cost<S: Scalar>(pi: &ConfigDistribution<S>, r: Page, sigma: &ConfigDistribution<S>) -> Result<S> {
    Ok(step_plan(pi, r, sigma)?.1)
}
