//! Knowledge states and their certification.
//!
//! A knowledge state pairs a distribution over configurations with a
//! zero-minimum estimator. On each request an algorithm moves to a weighted
//! set of subsequent states; the step's cost is the transport cost from the
//! current distribution to the weighted mixture of the subsequents, and its
//! adjustment is the largest constant keeping
//! `(ω ∧ r) >= adjust + Σ λᵢ ωᵢ` everywhere.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::estimator::{Estimator, LipschitzFn, WeightedSum};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::model::Page;
use crate::scalar::{min_of, Scalar};
use crate::transport::{step_cost, ConfigDistribution};

#[derive(Clone, Debug, PartialEq)]
pub struct KnowledgeState<S = crate::Rational> {
    pub pi: ConfigDistribution<S>,
    pub omega: Estimator<S>,
}

impl<S: Scalar> KnowledgeState<S> {
    pub fn new(pi: ConfigDistribution<S>, omega: Estimator<S>) -> Result<Self> {
        if !omega.has_zero_minimum() {
            return Err(Error::InvalidState("knowledge-state estimator must have zero minimum".into()));
        }
        if pi.k() != omega.k() {
            return Err(Error::InvalidState("distribution and estimator disagree on k".into()));
        }
        if let Some(x) = pi.support().find(|x| !omega.in_support(x)) {
            return Err(Error::InvalidState(format!(
                "distribution puts mass on {x} outside the estimator support"
            )));
        }
        Ok(KnowledgeState { pi, omega })
    }
}

/// Weighted next states; weights are positive and sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Subsequents<S = crate::Rational> {
    branches: Vec<(S, KnowledgeState<S>)>,
}

impl<S: Scalar> Subsequents<S> {
    pub fn new(branches: Vec<(S, KnowledgeState<S>)>) -> Result<Self> {
        if branches.is_empty() || branches.iter().any(|(w, _)| *w <= S::zero()) {
            return Err(Error::input("subsequent weights must be positive"));
        }
        let total = branches.iter().fold(S::zero(), |a, (w, _)| a + w.clone());
        if !total.near(&S::one()) {
            return Err(Error::input(format!("subsequent weights sum to {total}")));
        }
        Ok(Subsequents { branches })
    }

    pub fn single(state: KnowledgeState<S>) -> Self {
        Subsequents {
            branches: vec![(S::one(), state)],
        }
    }

    pub fn branches(&self) -> &[(S, KnowledgeState<S>)] {
        &self.branches
    }

    /// `π̄ = Σ λᵢ πᵢ`.
    pub fn mixture(&self) -> ConfigDistribution<S> {
        ConfigDistribution::mixture(self.branches.iter().map(|(w, k)| (w, &k.pi)))
            .expect("mixture of distributions with unit total weight")
    }

    /// `Σ λᵢ ωᵢ` as an evaluable function.
    pub fn estimator_mix(&self) -> WeightedSum<S> {
        WeightedSum::new(self.branches.iter().map(|(w, k)| (w.clone(), k.omega.clone())).collect())
            .expect("weights validated on construction")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionOutcome<S = crate::Rational> {
    pub subs: Subsequents<S>,
    pub adjust: S,
    pub cost: S,
    pub mixture: ConfigDistribution<S>,
}

/// The largest adjustment compatible with the update inequality. It can be
/// negative.
pub fn max_adjust<S: Scalar>(k: &KnowledgeState<S>, r: Page, subs: &Subsequents<S>) -> S {
    let updated = k.omega.update(r);
    let mix = subs.estimator_mix();
    updated
        .entries()
        .map(|(x, v)| v.clone() - mix.eval(x))
        .reduce(min_of)
        .expect("estimator support is never empty")
}

pub fn check_update_inequality<S: Scalar>(k: &KnowledgeState<S>, r: Page, subs: &Subsequents<S>, adjust: &S) -> bool {
    *adjust <= max_adjust(k, r, subs)
}

pub fn action_outcome<S: Scalar>(k: &KnowledgeState<S>, r: Page, subs: Subsequents<S>) -> Result<ActionOutcome<S>> {
    let mixture = subs.mixture();
    let cost = step_cost(&k.pi, r, &mixture)?;
    let adjust = max_adjust(k, r, &subs);
    Ok(ActionOutcome {
        subs,
        adjust,
        cost,
        mixture,
    })
}

/// A symmetry-distinct action of a rule table, reduced to what the
/// potential inequality needs.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionRecord<S = crate::Rational> {
    /// Short name such as `Bd`.
    pub label: String,
    pub state_class: String,
    pub request_class: String,
    pub cost: S,
    pub adjust: S,
    /// Subsequent classes with their total weights.
    pub next: Vec<(S, String)>,
}

impl<S: Scalar> ActionRecord<S> {
    pub fn delta_phi(&self, phi: &PotentialTable<S>) -> S {
        self.next
            .iter()
            .fold(S::zero(), |acc, (w, cls)| acc + w.clone() * phi.get(cls))
            - phi.get(&self.state_class)
    }
}

/// Potential values per state class.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTable<S = crate::Rational> {
    values: BTreeMap<String, S>,
}

impl<S: Scalar> PotentialTable<S> {
    pub fn new(values: impl IntoIterator<Item = (String, S)>) -> Result<Self> {
        let values: BTreeMap<String, S> = values.into_iter().collect();
        if let Some((c, _)) = values.iter().find(|(_, v)| **v < S::zero()) {
            return Err(Error::input(format!("potential of {c} is negative")));
        }
        Ok(PotentialTable { values })
    }

    /// Panics if `class` is missing: a table must cover every class it is
    /// checked against.
    pub fn get(&self, class: &str) -> S {
        self.values
            .get(class)
            .cloned()
            .unwrap_or_else(|| panic!("potential table has no entry for class {class}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &S)> {
        self.values.iter()
    }

    pub fn with(&self, class: &str, v: S) -> Result<Self> {
        let mut values = self.values.clone();
        values.insert(class.to_string(), v);
        PotentialTable::new(values)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionCheck<S = crate::Rational> {
    pub label: String,
    pub state_class: String,
    pub request_class: String,
    pub cost: S,
    pub adjust: S,
    pub delta_phi: S,
    /// `C·adjust − cost − ΔΦ`; the potential inequality holds iff this is
    /// non-negative.
    pub slack: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport<S = crate::Rational> {
    pub ratio: S,
    pub checks: Vec<ActionCheck<S>>,
    pub feasible: bool,
}

impl<S: Scalar> VerificationReport<S> {
    pub fn check(&self, label: &str) -> Option<&ActionCheck<S>> {
        self.checks.iter().find(|c| c.label == label)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ActionCheck<S>> {
        self.checks.iter().filter(|c| c.slack < S::zero())
    }
}

pub fn verify_potential<S: Scalar>(actions: &[ActionRecord<S>], phi: &PotentialTable<S>, ratio: &S) -> VerificationReport<S> {
    let checks: Vec<ActionCheck<S>> = actions
        .iter()
        .map(|a| {
            let delta_phi = a.delta_phi(phi);
            let slack = ratio.clone() * a.adjust.clone() - a.cost.clone() - delta_phi.clone();
            ActionCheck {
                label: a.label.clone(),
                state_class: a.state_class.clone(),
                request_class: a.request_class.clone(),
                cost: a.cost.clone(),
                adjust: a.adjust.clone(),
                delta_phi,
                slack,
            }
        })
        .collect();
    let feasible = checks.iter().all(|c| c.slack >= S::zero()) && phi.iter().all(|(_, v)| *v >= S::zero());
    VerificationReport {
        ratio: ratio.clone(),
        checks,
        feasible,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Synthesis<S = crate::Rational> {
    Feasible { ratio: S, table: PotentialTable<S> },
    Infeasible,
}

/// Linear program over `(Φ(class)..., C?)` encoding every action's
/// inequality `cost + ΔΦ <= C·adjust`.
pub struct PotentialLp<'a, S> {
    actions: &'a [ActionRecord<S>],
    classes: Vec<String>,
    ratio: Option<S>,
    fixed: BTreeMap<String, S>,
}

impl<'a, S: Scalar> PotentialLp<'a, S> {
    /// `ratio = None` leaves `C` as a variable.
    pub fn new(actions: &'a [ActionRecord<S>], ratio: Option<S>) -> Self {
        let mut classes: Vec<String> = actions
            .iter()
            .flat_map(|a| std::iter::once(a.state_class.clone()).chain(a.next.iter().map(|(_, c)| c.clone())))
            .collect();
        classes.sort();
        classes.dedup();
        PotentialLp {
            actions,
            classes,
            ratio,
            fixed: BTreeMap::new(),
        }
    }

    /// Pins `Φ(class) = value`.
    pub fn fix(mut self, class: &str, value: S) -> Self {
        self.fixed.insert(class.to_string(), value);
        self
    }

    fn width(&self) -> usize {
        self.classes.len() + usize::from(self.ratio.is_none())
    }

    fn index(&self, class: &str) -> usize {
        self.classes.iter().position(|c| c == class).expect("known class")
    }

    fn program(&self, objective: Vec<S>) -> LinearProgram<S> {
        let n = self.width();
        let mut lp = LinearProgram::minimize(objective);
        for a in self.actions {
            let mut row = vec![S::zero(); n];
            for (w, c) in &a.next {
                let i = self.index(c);
                row[i] = row[i].clone() + w.clone();
            }
            let src = self.index(&a.state_class);
            row[src] = row[src].clone() - S::one();
            let rhs = match &self.ratio {
                Some(c) => c.clone() * a.adjust.clone() - a.cost.clone(),
                None => {
                    row[n - 1] = -a.adjust.clone();
                    -a.cost.clone()
                }
            };
            lp.constrain(row, Relation::Le, rhs);
        }
        for (class, v) in &self.fixed {
            if let Some(i) = self.classes.iter().position(|c| c == class) {
                let mut row = vec![S::zero(); n];
                row[i] = S::one();
                lp.constrain(row, Relation::Eq, v.clone());
            }
        }
        lp
    }

    fn table(&self, x: &[S]) -> PotentialTable<S> {
        PotentialTable::new(self.classes.iter().cloned().zip(x.iter().cloned())).expect("LP keeps variables non-negative")
    }

    /// With `C` fixed: the feasible table of least total potential. With `C`
    /// free: the least feasible `C`, then the least total potential at it.
    pub fn solve(&self) -> Synthesis<S> {
        let n = self.width();
        let sum_phi: Vec<S> = (0..n)
            .map(|i| if i < self.classes.len() { S::one() } else { S::zero() })
            .collect();
        match &self.ratio {
            Some(c) => match self.program(sum_phi).solve() {
                LpOutcome::Optimal { x, .. } => Synthesis::Feasible {
                    ratio: c.clone(),
                    table: self.table(&x),
                },
                _ => Synthesis::Infeasible,
            },
            None => {
                let mut obj = vec![S::zero(); n];
                obj[n - 1] = S::one();
                let best = match self.program(obj).solve() {
                    LpOutcome::Optimal { value, .. } => value,
                    _ => return Synthesis::Infeasible,
                };
                let pinned = PotentialLp {
                    actions: self.actions,
                    classes: self.classes.clone(),
                    ratio: Some(best.clone()),
                    fixed: self.fixed.clone(),
                };
                match pinned.solve() {
                    Synthesis::Feasible { table, .. } => Synthesis::Feasible { ratio: best, table },
                    Synthesis::Infeasible => Synthesis::Infeasible,
                }
            }
        }
    }

    /// Feasible interval of `Φ(class)`; the upper end is `None` when
    /// unbounded. `None` overall when the program is infeasible.
    pub fn range(&self, class: &str) -> Option<(S, Option<S>)> {
        let n = self.width();
        let i = self.index(class);
        let mut obj = vec![S::zero(); n];
        obj[i] = S::one();
        let lo = self.program(obj.clone()).solve().optimal()?.1;
        obj[i] = -S::one();
        let hi = match self.program(obj).solve() {
            LpOutcome::Optimal { value, .. } => Some(-value),
            LpOutcome::Unbounded => None,
            LpOutcome::Infeasible => return None,
        };
        Some((lo, hi))
    }
}

/// Convenience wrapper: see [`PotentialLp::solve`].
pub fn synthesize_potential<S: Scalar>(actions: &[ActionRecord<S>], ratio: Option<S>) -> Synthesis<S> {
    PotentialLp::new(actions, ratio).solve()
}
