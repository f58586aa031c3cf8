//! Running a rule table on a request sequence: the exact expected-cost
//! (distributional) run, the behavioral chain that samples one cache at a
//! time, and seeded Monte Carlo over the behavioral chain.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::k2k3::{RuleTable, StateClass};
use crate::ks::KnowledgeState;
use crate::model::{Configuration, Page};
use crate::scalar::Scalar;
use crate::transport::{step_plan, ConfigDistribution};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RequestSequence {
    requests: Vec<Page>,
}

impl RequestSequence {
    pub fn new(requests: Vec<Page>) -> Self {
        RequestSequence { requests }
    }

    /// Parses a letter string such as `"cabc"`.
    pub fn letters(s: &str) -> Self {
        RequestSequence::new(s.chars().map(Page::letter).collect())
    }

    pub fn requests(&self) -> &[Page] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    pub fn push(&mut self, r: Page) {
        self.requests.push(r);
    }

    /// One page token per line; blank lines and `#` comments are skipped.
    pub fn parse_lines(text: &str) -> Result<Self> {
        let mut requests = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                requests.push(line.parse()?);
            }
        }
        Ok(RequestSequence { requests })
    }

    pub fn to_lines(&self) -> String {
        self.requests.iter().map(|p| format!("{p}\n")).collect()
    }
}

impl fmt::Display for RequestSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.requests.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for RequestSequence {
    type Err = Error;

    /// Whitespace- or comma-separated page tokens.
    fn from_str(s: &str) -> Result<Self> {
        let requests = s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        Ok(RequestSequence { requests })
    }
}

/// Expected cost and adjustment of a single step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<S> {
    pub cost: S,
    pub adjust: S,
}

/// The distribution over knowledge states after each prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionalRun<S = crate::Rational> {
    mix: BTreeMap<StateClass, S>,
    pub expected_cost: S,
    pub expected_adjust: S,
    pub step_log: Vec<StepRecord<S>>,
}

impl<S: Scalar> DistributionalRun<S> {
    pub fn start(rules: &RuleTable<S>, initial: &Configuration) -> Result<Self> {
        Ok(Self::from_state(rules.initial(initial)?))
    }

    pub fn from_state(cls: StateClass) -> Self {
        DistributionalRun {
            mix: BTreeMap::from([(cls, S::one())]),
            expected_cost: S::zero(),
            expected_adjust: S::zero(),
            step_log: Vec::new(),
        }
    }

    pub fn mix(&self) -> &BTreeMap<StateClass, S> {
        &self.mix
    }

    pub fn step(&mut self, rules: &RuleTable<S>, r: Page) {
        let mut cost = S::zero();
        let mut adjust = S::zero();
        let mut next: BTreeMap<StateClass, S> = BTreeMap::new();
        for (cls, p) in &self.mix {
            if cls.classify(r).is_trivial() {
                *next.entry(cls.clone()).or_insert_with(S::zero) += p.clone();
                continue;
            }
            let sum = rules.summary(cls, r);
            cost += p.clone() * sum.cost.clone();
            adjust += p.clone() * sum.adjust.clone();
            for (w, c) in rules.transition(cls, r) {
                *next.entry(c).or_insert_with(S::zero) += p.clone() * w;
            }
        }
        self.mix = next;
        self.expected_cost += cost.clone();
        self.expected_adjust += adjust.clone();
        self.step_log.push(StepRecord { cost, adjust });
    }

    pub fn stepped(mut self, rules: &RuleTable<S>, r: Page) -> Self {
        self.step(rules, r);
        self
    }

    pub fn run(rules: &RuleTable<S>, initial: &Configuration, seq: &RequestSequence) -> Result<Self> {
        let mut run = Self::start(rules, initial)?;
        for &r in seq.requests() {
            run.step(rules, r);
        }
        Ok(run)
    }

    /// Probability that page `p` is cached.
    pub fn page_probability(&self, p: Page) -> S {
        self.mix.iter().fold(S::zero(), |acc, (cls, w)| {
            acc + w.clone() * cls.realize::<S>().pi.page_probability(p)
        })
    }

    /// The expected estimator value at `x`.
    pub fn expected_estimator(&self, x: &Configuration) -> S {
        self.mix.iter().fold(S::zero(), |acc, (cls, w)| {
            acc + w.clone() * cls.realize::<S>().omega.evaluate(x)
        })
    }

    /// Pages appearing in any state of the mix.
    pub fn active_pages(&self) -> Vec<Page> {
        let mut v: Vec<Page> = self.mix.keys().flat_map(|c| c.pages().iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// The cache distribution averaged over the mix.
    pub fn cache_distribution(&self) -> ConfigDistribution<S> {
        let parts: Vec<(S, ConfigDistribution<S>)> =
            self.mix.iter().map(|(c, w)| (w.clone(), c.realize::<S>().pi)).collect();
        ConfigDistribution::mixture(parts.iter().map(|(w, d)| (w, d))).expect("mix weights sum to one")
    }
}

/// Transition probabilities of the behavioral chain for one state and request.
///
/// From cache `x` the chain moves to `y` with probability `γ(x,y)/π(x)`, for a
/// fixed minimal transport `γ` from `π` to the subsequent mixture `π̄`; then
/// picks subsequent `i` with probability `λᵢσᵢ(y)/π̄(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<S = crate::Rational> {
    pub state: KnowledgeState<S>,
    pub moves: BTreeMap<Configuration, Vec<(Configuration, S)>>,
    pub branches: BTreeMap<Configuration, Vec<(StateClass, S)>>,
}

impl<S: Scalar> Kernel<S> {
    pub fn new(rules: &RuleTable<S>, cls: &StateClass, r: Page) -> Result<Self> {
        let state = cls.realize::<S>();
        let mut subs: BTreeMap<StateClass, S> = BTreeMap::new();
        for (w, c) in rules.transition(cls, r) {
            *subs.entry(c).or_insert_with(S::zero) += w;
        }
        let realized: Vec<(StateClass, S, ConfigDistribution<S>)> = subs
            .into_iter()
            .map(|(c, w)| {
                let pi = c.realize::<S>().pi;
                (c, w, pi)
            })
            .collect();
        let mixture = ConfigDistribution::mixture(realized.iter().map(|(_, w, d)| (w, d)))?;
        let (plan, _) = step_plan(&state.pi, r, &mixture)?;
        let mut moves: BTreeMap<Configuration, Vec<(Configuration, S)>> = BTreeMap::new();
        for ((x, y), f) in plan.flow() {
            let px = state.pi.get(x);
            moves.entry(x.clone()).or_default().push((y.clone(), f.clone() / px));
        }
        let mut branches: BTreeMap<Configuration, Vec<(StateClass, S)>> = BTreeMap::new();
        for (y, py) in mixture.iter() {
            let row = realized
                .iter()
                .filter_map(|(c, w, d)| {
                    let sy = d.get(y);
                    (!sy.is_zero()).then(|| (c.clone(), w.clone() * sy / py.clone()))
                })
                .collect();
            branches.insert(y.clone(), row);
        }
        Ok(Kernel { state, moves, branches })
    }
}

/// One cache plus the knowledge state it is drawn from.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BehavioralState {
    pub config: Configuration,
    pub ks: StateClass,
}

impl BehavioralState {
    pub fn new(config: Configuration, ks: StateClass) -> Result<Self> {
        let pi = ks.realize::<crate::Rational>().pi;
        if num_traits::Zero::is_zero(&pi.get(&config)) {
            return Err(Error::InvalidState(format!("{config} has zero probability in {ks}")));
        }
        Ok(BehavioralState { config, ks })
    }

    pub fn start(rules: &RuleTable<impl Scalar>, initial: &Configuration) -> Result<Self> {
        BehavioralState::new(initial.clone(), rules.initial(initial)?)
    }
}

/// Kernels keyed by `(state, request)`, computed on demand.
#[derive(Debug, Default)]
pub struct KernelCache<S = crate::Rational> {
    map: HashMap<(StateClass, Page), Arc<Kernel<S>>>,
}

impl<S: Scalar> KernelCache<S> {
    pub fn new() -> Self {
        KernelCache { map: HashMap::new() }
    }

    pub fn get(&mut self, rules: &RuleTable<S>, cls: &StateClass, r: Page) -> Arc<Kernel<S>> {
        self.map
            .entry((cls.clone(), r))
            .or_insert_with(|| Arc::new(Kernel::new(rules, cls, r).expect("rule tables yield valid kernels")))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

fn pick<T, S: Scalar>(row: &[(T, S)], u: f64) -> &T {
    let mut acc = 0.0;
    for (t, w) in row {
        acc += w.approx();
        if u < acc {
            return t;
        }
    }
    &row.last().expect("non-empty row").0
}

/// Advances one cache by one request, drawing from `rng`.
pub fn behavioral_step<S: Scalar, R: Rng>(
    st: &BehavioralState,
    rules: &RuleTable<S>,
    cache: &mut KernelCache<S>,
    r: Page,
    rng: &mut R,
) -> (BehavioralState, u32) {
    if st.ks.classify(r).is_trivial() {
        return (st.clone(), 0);
    }
    let kernel = cache.get(rules, &st.ks, r);
    let row = kernel
        .moves
        .get(&st.config)
        .unwrap_or_else(|| panic!("{} has no mass in {}", st.config, st.ks));
    let y = pick(row, rng.gen::<f64>()).clone();
    let ks = pick(&kernel.branches[&y], rng.gen::<f64>()).clone();
    let cost = st.config.serve_cost(r, &y);
    (BehavioralState { config: y, ks }, cost)
}

/// The exact joint law of `(cache, state)` after each step, together with
/// the expected cost of each step.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactChain<S = crate::Rational> {
    pub laws: Vec<BTreeMap<BehavioralState, S>>,
    pub step_costs: Vec<S>,
}

pub fn behavioral_chain_exact<S: Scalar>(
    rules: &RuleTable<S>,
    initial: &Configuration,
    seq: &RequestSequence,
) -> Result<ExactChain<S>> {
    let mut cache = KernelCache::new();
    let start = BehavioralState::start(rules, initial)?;
    let mut law = BTreeMap::from([(start, S::one())]);
    let mut laws = vec![law.clone()];
    let mut step_costs = Vec::with_capacity(seq.len());
    for &r in seq.requests() {
        let mut next: BTreeMap<BehavioralState, S> = BTreeMap::new();
        let mut cost = S::zero();
        for (st, q) in &law {
            if st.ks.classify(r).is_trivial() {
                *next.entry(st.clone()).or_insert_with(S::zero) += q.clone();
                continue;
            }
            let kernel = cache.get(rules, &st.ks, r);
            for (y, pm) in &kernel.moves[&st.config] {
                let qm = q.clone() * pm.clone();
                cost += qm.clone() * S::from_count(st.config.serve_cost(r, y));
                for (c, pb) in &kernel.branches[y] {
                    let key = BehavioralState { config: y.clone(), ks: c.clone() };
                    *next.entry(key).or_insert_with(S::zero) += qm.clone() * pb.clone();
                }
            }
        }
        law = next;
        laws.push(law.clone());
        step_costs.push(cost);
    }
    Ok(ExactChain { laws, step_costs })
}

/// Sample statistics of per-trial total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarlo {
    pub trials: u64,
    pub mean: f64,
    pub variance: f64,
}

impl MonteCarlo {
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }
}

/// Runs the behavioral chain `trials` times. Trial `i` draws from stream
/// `i` of a ChaCha8 generator seeded with `seed`, so the result depends only
/// on `(seed, trials)`.
pub fn monte_carlo(
    rules: &RuleTable<crate::Rational>,
    initial: &Configuration,
    seq: &RequestSequence,
    trials: u64,
    seed: u64,
) -> Result<MonteCarlo> {
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    // Every kernel a trial can need lies on the support of the distributional run.
    let mut cache = KernelCache::new();
    let mut run = DistributionalRun::start(rules, initial)?;
    for &r in seq.requests() {
        for cls in run.mix().keys() {
            if !cls.classify(r).is_trivial() {
                cache.get(rules, cls, r);
            }
        }
        run.step(rules, r);
    }
    let start = BehavioralState::start(rules, initial)?;
    let costs: Vec<u64> = (0..trials)
        .into_par_iter()
        .map_init(
            || KernelCache { map: cache.map.clone() },
            |local, i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                let mut st = start.clone();
                let mut total = 0u64;
                for &r in seq.requests() {
                    let (next, c) = behavioral_step(&st, rules, local, r, &mut rng);
                    st = next;
                    total += u64::from(c);
                }
                total
            },
        )
        .collect();
    let n = trials as f64;
    let sum: u128 = costs.iter().map(|&c| u128::from(c)).sum();
    let sq: u128 = costs.iter().map(|&c| u128::from(c) * u128::from(c)).sum();
    let mean = sum as f64 / n;
    let variance = if trials > 1 {
        (sq as f64 - sum as f64 * mean) / (n - 1.0)
    } else {
        0.0
    };
    Ok(MonteCarlo {
        trials,
        mean,
        variance: variance.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn cls(s: &str) -> StateClass {
        s.parse().unwrap()
    }

    fn c(s: &str) -> Configuration {
        Configuration::of(s)
    }

    #[test]
    fn sequence_formats() {
        let s = RequestSequence::parse_lines("# header\na\n\n b \nc # trailing\np30\n").unwrap();
        assert_eq!(s.to_string(), "a b c p30");
        assert_eq!(RequestSequence::parse_lines(&s.to_lines()).unwrap(), s);
        assert_eq!("a,b c".parse::<RequestSequence>().unwrap(), RequestSequence::letters("abc"));
        assert!(RequestSequence::parse_lines("a\n?\n").is_err());
    }

    #[test]
    fn distributional_examples() {
        let k2 = RuleTable::<Rational>::k2();
        let run = DistributionalRun::start(&k2, &c("ab")).unwrap().stepped(&k2, Page::letter('c'));
        assert_eq!(run.mix(), &BTreeMap::from([(cls("K2:B(c;a,b)"), q(1, 1))]));
        assert_eq!((run.expected_cost.clone(), run.expected_adjust.clone()), (q(1, 1), q(1, 1)));

        let run = DistributionalRun::from_state(cls("K2:B(a;b,c)")).stepped(&k2, Page::letter('d'));
        assert_eq!(run.mix().len(), 3);
        assert!(run.mix().values().all(|w| *w == q(1, 3)));
        assert_eq!((run.expected_cost.clone(), run.expected_adjust.clone()), (q(1, 1), q(1, 3)));

        let before = DistributionalRun::from_state(cls("K2:B(a;b,c)"));
        let after = before.clone().stepped(&k2, Page::letter('a'));
        assert_eq!(after.mix(), before.mix());
        assert_eq!(after.expected_cost, q(0, 1));
        assert_eq!(after.step_log, vec![StepRecord { cost: q(0, 1), adjust: q(0, 1) }]);
    }

    #[test]
    fn behavioral_examples() {
        let k2 = RuleTable::<Rational>::k2();
        let chain = behavioral_chain_exact(&k2, &c("ab"), &RequestSequence::letters("c")).unwrap();
        let b = cls("K2:B(c;a,b)");
        let want = BTreeMap::from([
            (BehavioralState { config: c("ac"), ks: b.clone() }, q(1, 2)),
            (BehavioralState { config: c("bc"), ks: b }, q(1, 2)),
        ]);
        assert_eq!(chain.laws[1], want);
        assert_eq!(chain.step_costs, vec![q(1, 1)]);

        let mut cache = KernelCache::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = cls("K2:B(a;b,c)");
        let at_ab = BehavioralState::new(c("ab"), b.clone()).unwrap();
        let (_, cost) = behavioral_step(&at_ab, &k2, &mut cache, Page::letter('b'), &mut rng);
        assert_eq!(cost, 0);
        let at_ac = BehavioralState::new(c("ac"), b.clone()).unwrap();
        let (next, cost) = behavioral_step(&at_ac, &k2, &mut cache, Page::letter('b'), &mut rng);
        assert_eq!((cost, next.config), (1, c("ab")));
        let (same, cost) = behavioral_step(&at_ac, &k2, &mut cache, Page::letter('a'), &mut rng);
        assert_eq!((same, cost), (at_ac, 0));
        assert!(BehavioralState::new(c("bc"), b).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let k2 = RuleTable::<Rational>::k2();
        let seq = RequestSequence::letters("cbdacbd");
        let a = monte_carlo(&k2, &c("ab"), &seq, 1, 42).unwrap();
        assert_eq!(a.mean.fract(), 0.0);
        assert_eq!(a, monte_carlo(&k2, &c("ab"), &seq, 1, 42).unwrap());
        let many = monte_carlo(&k2, &c("ab"), &seq, 2000, 9).unwrap();
        assert_eq!(many, monte_carlo(&k2, &c("ab"), &seq, 2000, 9).unwrap());
        let mut padded = seq.clone();
        padded.push(Page::letter('d'));
        assert_eq!(many.mean, monte_carlo(&k2, &c("ab"), &padded, 2000, 9).unwrap().mean);
        assert!(monte_carlo(&k2, &c("ab"), &seq, 0, 1).is_err());
    }
}
