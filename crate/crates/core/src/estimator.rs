//! Estimators: non-negative Lipschitz functions on configurations, stored by
//! their (finite, minimal) support.
//!
//! An estimator `ω` with support `S` evaluates anywhere as
//! `ω(y) = min_{x in S} ω(x) + d(x, y)`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{service_support, Configuration, Page};
use crate::scalar::{min_of, Scalar};

/// Anything that can be evaluated at a configuration and is 1-Lipschitz.
pub trait LipschitzFn<S: Scalar> {
    fn eval(&self, y: &Configuration) -> S;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Estimator<S = crate::Rational> {
    k: usize,
    entries: BTreeMap<Configuration, S>,
}

impl<S: Scalar> Estimator<S> {
    /// Builds an estimator from raw `(configuration, value)` pairs, dropping
    /// every entry that another entry already implies.
    pub fn minimize_support(raw: impl IntoIterator<Item = (Configuration, S)>) -> Result<Self> {
        let mut merged: BTreeMap<Configuration, S> = BTreeMap::new();
        for (x, v) in raw {
            if v < S::zero() {
                return Err(Error::input(format!("negative estimator value at {x}")));
            }
            match merged.get_mut(&x) {
                Some(old) if v < *old => *old = v,
                Some(_) => {}
                None => {
                    merged.insert(x, v);
                }
            }
        }
        let k = match merged.keys().next() {
            Some(x) => x.k(),
            None => return Err(Error::input("estimator needs at least one support entry")),
        };
        if merged.keys().any(|x| x.k() != k) {
            return Err(Error::input("estimator entries mix configuration sizes"));
        }
        let items: Vec<(Configuration, S)> = merged.into_iter().collect();
        let entries: BTreeMap<Configuration, S> = items
            .iter()
            .enumerate()
            .filter(|(i, (y, vy))| {
                !items.iter().enumerate().any(|(j, (x, vx))| {
                    j != *i && *vy >= vx.clone() + S::from_count(x.moves_to(y))
                })
            })
            .map(|(_, e)| e.clone())
            .collect();
        debug_assert!(!entries.is_empty());
        Ok(Estimator { k, entries })
    }

    /// The zero estimator supported on the given configurations.
    pub fn zero_on(support: impl IntoIterator<Item = Configuration>) -> Result<Self> {
        Self::minimize_support(support.into_iter().map(|x| (x, S::zero())))
    }

    /// `d(start, ·)`: the work function of the empty request sequence.
    pub fn distance_from(start: &Configuration) -> Self {
        Estimator {
            k: start.k(),
            entries: BTreeMap::from([(start.clone(), S::zero())]),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn support(&self) -> impl Iterator<Item = &Configuration> {
        self.entries.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Configuration, &S)> {
        self.entries.iter()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn in_support(&self, x: &Configuration) -> bool {
        self.entries.contains_key(x)
    }

    pub fn evaluate(&self, y: &Configuration) -> S {
        debug_assert_eq!(y.k(), self.k);
        let mut it = self.entries.iter();
        let (x0, v0) = it.next().expect("estimator support is never empty");
        let mut best = v0.clone() + S::from_count(x0.moves_to(y));
        for (x, v) in it {
            let cand = v.clone() + S::from_count(x.moves_to(y));
            best = min_of(best, cand);
        }
        best
    }

    pub fn min_value(&self) -> S {
        self.entries
            .values()
            .cloned()
            .reduce(min_of)
            .expect("estimator support is never empty")
    }

    /// `ω ∧ r`: the cheapest way to reach each configuration while serving
    /// `r`, computed from the support alone.
    pub fn update(&self, r: Page) -> Estimator<S> {
        let mut candidates: Vec<Configuration> = Vec::new();
        for x in self.entries.keys() {
            candidates.extend(service_support(x, r));
            candidates.push(x.clone());
        }
        candidates.sort_unstable();
        candidates.dedup();
        let scored = candidates.into_iter().map(|z| {
            let v = self
                .entries
                .iter()
                .map(|(x, w)| w.clone() + S::from_count(x.serve_cost(r, &z)))
                .reduce(min_of)
                .expect("non-empty support");
            (z, v)
        });
        Estimator::minimize_support(scored).expect("update of an estimator is an estimator")
    }

    /// Splits into a zero-minimum estimator and the subtracted minimum.
    pub fn normalize(&self) -> (Estimator<S>, S) {
        let m = self.min_value();
        (self.shift(-m.clone()), m)
    }

    pub fn shift(&self, c: S) -> Estimator<S> {
        Estimator {
            k: self.k,
            entries: self
                .entries
                .iter()
                .map(|(x, v)| (x.clone(), v.clone() + c.clone()))
                .collect(),
        }
    }

    pub fn has_zero_minimum(&self) -> bool {
        self.min_value().is_zero()
    }

    /// True iff `self >= rho` everywhere. Checking the support suffices for
    /// any Lipschitz `rho`.
    pub fn dominates(&self, rho: &impl LipschitzFn<S>) -> bool {
        self.entries.iter().all(|(y, v)| *v >= rho.eval(y))
    }
}

impl<S: Scalar> LipschitzFn<S> for Estimator<S> {
    fn eval(&self, y: &Configuration) -> S {
        self.evaluate(y)
    }
}

/// `Σ λᵢ ωᵢ + c` with non-negative weights summing to one.
#[derive(Clone, Debug)]
pub struct WeightedSum<S = crate::Rational> {
    terms: Vec<(S, Estimator<S>)>,
    constant: S,
}

impl<S: Scalar> WeightedSum<S> {
    pub fn new(terms: Vec<(S, Estimator<S>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::input("weighted sum needs at least one term"));
        }
        if terms.iter().any(|(w, _)| *w < S::zero()) {
            return Err(Error::input("weights must be non-negative"));
        }
        let total = terms.iter().fold(S::zero(), |acc, (w, _)| acc + w.clone());
        if !total.near(&S::one()) {
            return Err(Error::input(format!("weights sum to {total}, not 1")));
        }
        Ok(WeightedSum {
            terms,
            constant: S::zero(),
        })
    }

    pub fn single(omega: Estimator<S>) -> Self {
        WeightedSum {
            terms: vec![(S::one(), omega)],
            constant: S::zero(),
        }
    }

    pub fn plus(mut self, c: S) -> Self {
        self.constant += c;
        self
    }

    pub fn terms(&self) -> &[(S, Estimator<S>)] {
        &self.terms
    }
}

impl<S: Scalar> LipschitzFn<S> for WeightedSum<S> {
    fn eval(&self, y: &Configuration) -> S {
        self.terms
            .iter()
            .fold(self.constant.clone(), |acc, (w, om)| acc + w.clone() * om.evaluate(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bar::parse_bar;
    use crate::model::{configurations, universe};
    use crate::Rational;

    fn bar(s: &str, k: usize) -> Estimator {
        parse_bar(s, k).unwrap()
    }

    fn c(s: &str) -> Configuration {
        Configuration::of(s)
    }

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn p(ch: char) -> Page {
        Page::letter(ch)
    }

    /// Brute-force `ω ∧ r` over every configuration of `pages`.
    fn update_exhaustive(om: &Estimator, r: Page, pages: &[Page]) -> Vec<(Configuration, Rational)> {
        let all = configurations(pages, om.k());
        all.iter()
            .map(|y| {
                let v = all
                    .iter()
                    .map(|x| om.evaluate(x) + Rational::from_count(x.serve_cost(r, y)))
                    .min()
                    .unwrap();
                (y.clone(), v)
            })
            .collect()
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(bar("ab||", 2).evaluate(&c("ab")), q(0, 1));
        assert_eq!(bar("ab||", 2).evaluate(&c("ac")), q(1, 1));
        assert_eq!(bar("a|bc|", 2).evaluate(&c("bc")), q(1, 1));
    }

    #[test]
    fn minimize_support_examples() {
        let om = Estimator::minimize_support([(c("ab"), q(0, 1)), (c("ac"), q(2, 1))]).unwrap();
        assert_eq!(om.support().cloned().collect::<Vec<_>>(), vec![c("ab")]);
        let om = Estimator::minimize_support([(c("ab"), q(0, 1))]).unwrap();
        assert_eq!(om.support_len(), 1);
        let om = Estimator::minimize_support([(c("ab"), q(0, 1)), (c("ac"), q(0, 1))]).unwrap();
        assert_eq!(om.support_len(), 2);
        assert!(Estimator::<Rational>::minimize_support([]).is_err());
        assert!(Estimator::minimize_support([(c("ab"), q(-1, 2))]).is_err());
        assert!(Estimator::minimize_support([(c("ab"), q(0, 1)), (c("abc"), q(0, 1))]).is_err());
    }

    #[test]
    fn minimize_preserves_values() {
        let raw = vec![(c("ab"), q(0, 1)), (c("ac"), q(1, 1)), (c("bc"), q(1, 2)), (c("cd"), q(3, 1))];
        let om = Estimator::minimize_support(raw.clone()).unwrap();
        for y in configurations(&universe(5), 2) {
            let direct = raw
                .iter()
                .map(|(x, v)| v.clone() + Rational::from_count(x.moves_to(&y)))
                .min()
                .unwrap();
            assert_eq!(om.evaluate(&y), direct, "at {y}");
        }
    }

    #[test]
    fn update_examples() {
        let up = bar("ab||", 2).update(p('c'));
        assert_eq!(up, bar("c|ab|", 2).shift(q(1, 1)));
        assert_eq!(bar("a|bc|", 2).update(p('b')), bar("ab||", 2));
        assert_eq!(bar("abc|||", 3).update(p('d')), bar("d|abc||", 3).shift(q(1, 1)));
    }

    #[test]
    fn update_matches_exhaustive_minimization() {
        let pages = universe(6);
        for (s, k) in [("a|bc|", 2), ("ab||", 2), ("a|bcd||", 3), ("a|bc|de|", 3), ("ab||cde|", 3)] {
            let om = bar(s, k);
            for r in &pages {
                let up = om.update(*r);
                for (y, v) in update_exhaustive(&om, *r, &pages) {
                    assert_eq!(up.evaluate(&y), v, "{s} ^ {r} at {y}");
                }
            }
        }
    }

    #[test]
    fn dominates_examples() {
        let ab = bar("ab||", 2);
        assert!(ab.dominates(&ab));
        let lhs = bar("a|bc|", 2).update(p('d'));
        let rhs = WeightedSum::new(vec![
            (q(1, 3), bar("da||", 2)),
            (q(1, 3), bar("db||", 2)),
            (q(1, 3), bar("dc||", 2)),
        ])
        .unwrap()
        .plus(q(1, 3));
        assert!(lhs.dominates(&rhs));
        let shifted = WeightedSum::single(bar("a|bc|", 2)).plus(q(1, 2));
        assert!(!ab.dominates(&shifted));
    }

    #[test]
    fn dominates_agrees_with_exhaustive_check() {
        let pages = universe(5);
        let cands = ["ab||", "a|bc|", "c|ab|", "d|abc|", "ad||", "b|cd|"];
        for l in cands {
            for r in cands {
                for shift in [q(0, 1), q(1, 3), q(-1, 2)] {
                    let lhs = bar(l, 2);
                    let rho = WeightedSum::single(bar(r, 2)).plus(shift.clone());
                    let everywhere = configurations(&pages, 2).iter().all(|y| lhs.evaluate(y) >= rho.eval(y));
                    assert_eq!(lhs.dominates(&rho), everywhere, "{l} vs {r}+{shift}");
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let (n, m) = bar("c|ab|", 2).shift(q(1, 1)).normalize();
        assert_eq!((n, m), (bar("c|ab|", 2), q(1, 1)));
        assert_eq!(bar("ab||", 2).normalize(), (bar("ab||", 2), q(0, 1)));
        let (n, m) = bar("abf|||", 3).shift(q(1, 1)).normalize();
        assert_eq!((n, m), (bar("abf|||", 3), q(1, 1)));
    }

    #[test]
    fn weighted_sum_examples() {
        let one = WeightedSum::single(bar("ab||", 2));
        assert_eq!(one.eval(&c("ac")), q(1, 1));
        let third = WeightedSum::new(vec![
            (q(1, 3), bar("da||", 2)),
            (q(1, 3), bar("db||", 2)),
            (q(1, 3), bar("dc||", 2)),
        ])
        .unwrap();
        assert_eq!(third.eval(&c("ad")), q(2, 3));
        let ff = WeightedSum::new(
            ["fa||bc|", "fb||ac|", "fc||ab|", "fa||de|", "fb||de|", "fc||de|"]
                .iter()
                .map(|s| (q(1, 6), bar(s, 3)))
                .collect(),
        )
        .unwrap();
        assert_eq!(ff.eval(&c("abf")), q(5, 6));
        assert!(WeightedSum::new(vec![(q(1, 2), bar("ab||", 2))]).is_err());
    }

    #[test]
    fn iterated_update_tracks_offsets() {
        // Offsets stay bar-representable: values equal the distance to the
        // zero set of the normalized estimator.
        let seq = "cadbcaebdc";
        let pages = universe(5);
        let mut om = Estimator::<Rational>::distance_from(&c("ab"));
        for ch in seq.chars() {
            om = om.update(p(ch)).normalize().0;
            let zeros: Vec<_> = om.entries().filter(|(_, v)| num_traits::Zero::is_zero(*v)).map(|(x, _)| x.clone()).collect();
            for y in configurations(&pages, 2) {
                let d = zeros.iter().map(|z| z.moves_to(&y)).min().unwrap();
                assert_eq!(om.evaluate(&y), Rational::from_count(d));
            }
        }
    }

    #[test]
    fn float_instantiation_agrees() {
        let om: Estimator<f64> = Estimator::zero_on([c("ab"), c("ac")]).unwrap();
        let up = om.update(p('d'));
        assert_eq!(up.min_value(), 1.0);
        assert_eq!(up.support_len(), 3);
    }
}
