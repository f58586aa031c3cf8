//! Optimal offline paging cost.
//!
//! [`WorkFunction`] tracks, for every cache over the pages seen so far, the
//! cheapest way to serve the prefix and end there. [`opt_cost_classical`]
//! is an independent check: evict the page needed farthest in the future.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{configurations, Configuration, Page};
use crate::simulate::RequestSequence;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkFunction {
    k: usize,
    pages: Vec<Page>,
    values: BTreeMap<Configuration, u32>,
}

impl WorkFunction {
    /// `ω⁰(x) = d(s⁰, x)` over caches on the initial pages.
    pub fn new(initial: &Configuration) -> Self {
        Self::with_pages(initial, &[])
    }

    /// Starts with `pages` tracked in addition to the initial cache.
    pub fn with_pages(initial: &Configuration, pages: &[Page]) -> Self {
        let mut all: Vec<Page> = initial.pages().iter().chain(pages).copied().collect();
        all.sort_unstable();
        all.dedup();
        let values = configurations(&all, initial.k())
            .into_iter()
            .map(|x| {
                let d = initial.moves_to(&x);
                (x, d)
            })
            .collect();
        WorkFunction {
            k: initial.k(),
            pages: all,
            values,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn values(&self) -> &BTreeMap<Configuration, u32> {
        &self.values
    }

    fn extend(&mut self, p: Page) {
        if self.pages.contains(&p) {
            return;
        }
        self.pages.push(p);
        self.pages.sort_unstable();
        let fresh: Vec<(Configuration, u32)> = configurations(&self.pages, self.k)
            .into_iter()
            .filter(|x| x.contains(p))
            .map(|x| {
                let v = self.reach(&x);
                (x, v)
            })
            .collect();
        self.values.extend(fresh);
    }

    fn reach(&self, x: &Configuration) -> u32 {
        self.values
            .iter()
            .map(|(y, w)| w + y.moves_to(x))
            .min()
            .expect("work function is never empty")
    }

    /// `ω ∧ r`: `x ↦ min_y ω(y) + cost(y, r, x)`.
    pub fn step(&mut self, r: Page) {
        self.extend(r);
        let next = self
            .values
            .keys()
            .map(|x| {
                let v = self
                    .values
                    .iter()
                    .map(|(y, w)| w + y.serve_cost(r, x))
                    .min()
                    .expect("non-empty");
                (x.clone(), v)
            })
            .collect();
        self.values = next;
    }

    /// Value at any cache, including ones over untracked pages.
    pub fn value(&self, x: &Configuration) -> Result<u32> {
        if x.k() != self.k {
            return Err(Error::input(format!("{x} is not a {}-page cache", self.k)));
        }
        Ok(self.values.get(x).copied().unwrap_or_else(|| self.reach(x)))
    }

    pub fn min(&self) -> u32 {
        *self.values.values().min().expect("non-empty")
    }
}

/// Optimal cost of serving `seq` from `initial`, and the final work function.
pub fn opt_cost(seq: &RequestSequence, initial: &Configuration) -> (u32, WorkFunction) {
    let mut w = WorkFunction::new(initial);
    for &r in seq.requests() {
        w.step(r);
    }
    (w.min(), w)
}

/// Cheapest way to serve `seq` from `initial` and end with cache `x`.
pub fn opt_cost_to(seq: &RequestSequence, initial: &Configuration, x: &Configuration) -> Result<u32> {
    opt_cost(seq, initial).1.value(x)
}

/// Fault count of farthest-in-future eviction.
pub fn opt_cost_classical(seq: &RequestSequence, initial: &Configuration) -> u32 {
    let reqs = seq.requests();
    let mut cache: Vec<Page> = initial.pages().to_vec();
    let mut faults = 0;
    for (t, &r) in reqs.iter().enumerate() {
        if cache.contains(&r) {
            continue;
        }
        faults += 1;
        let next_use = |p: Page| reqs[t + 1..].iter().position(|&q| q == p).unwrap_or(usize::MAX);
        let (slot, _) = cache
            .iter()
            .enumerate()
            .max_by_key(|(_, &p)| (next_use(p), std::cmp::Reverse(p)))
            .expect("cache is non-empty");
        cache[slot] = r;
    }
    faults
}
