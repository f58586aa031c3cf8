//! The K2 (2-cache) and K3 (3-cache) knowledge-state algorithms.
//!
//! States are named by a class letter plus role pages grouped into
//! equivalence classes, e.g. `K3:F(a;b,c;d,e)`. Pages within a group can be
//! transposed without changing the state, so each group is stored sorted.
//! The first group is always the forced block: every support configuration
//! holds those pages, and requesting one of them is trivial.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use smallvec::SmallVec;

use crate::bar::BarString;
use crate::error::{Error, Result};
use crate::ks::{action_outcome, ActionRecord, KnowledgeState, PotentialTable, Subsequents};
use crate::model::{Configuration, Page};
use crate::scalar::Scalar;
use crate::transport::ConfigDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Family {
    K2,
    K3,
}

impl Family {
    pub fn k(self) -> usize {
        match self {
            Family::K2 => 2,
            Family::K3 => 3,
        }
    }

    pub fn kinds(self) -> &'static [Kind] {
        match self {
            Family::K2 => &[Kind::A, Kind::B],
            Family::K3 => &[Kind::A, Kind::B, Kind::C, Kind::D, Kind::E, Kind::F],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::K2 => "K2",
            Family::K3 => "K3",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k2" => Ok(Family::K2),
            "k3" => Ok(Family::K3),
            _ => Err(Error::parse(s, "expected k2 or k3")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Kind {
    pub fn letter(self) -> char {
        b"ABCDEF"[self as usize] as char
    }

    fn from_letter(c: char) -> Option<Kind> {
        Some(match c {
            'A' => Kind::A,
            'B' => Kind::B,
            'C' => Kind::C,
            'D' => Kind::D,
            'E' => Kind::E,
            'F' => Kind::F,
            _ => return None,
        })
    }
}

/// Group sizes for each class; `None` if the family has no such class.
fn shape(family: Family, kind: Kind) -> Option<&'static [usize]> {
    use Kind::*;
    Some(match (family, kind) {
        (Family::K2, A) => &[2],
        (Family::K2, B) => &[1, 2],
        (Family::K3, A) => &[3],
        (Family::K3, B) => &[1, 3],
        (Family::K3, C) => &[2, 2],
        (Family::K3, D) => &[1, 4],
        (Family::K3, E) => &[2, 1, 2],
        (Family::K3, F) => &[1, 2, 2],
        _ => return None,
    })
}

/// A knowledge state up to transposition of equivalent pages.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateClass {
    family: Family,
    kind: Kind,
    roles: SmallVec<[Page; 5]>,
}

impl StateClass {
    pub fn new(family: Family, kind: Kind, groups: &[&[Page]]) -> Result<Self> {
        let sizes = shape(family, kind).ok_or_else(|| Error::input(format!("{family} has no class {}", kind.letter())))?;
        if groups.len() != sizes.len() || groups.iter().zip(sizes).any(|(g, &n)| g.len() != n) {
            return Err(Error::input(format!(
                "class {family}:{} needs groups of sizes {sizes:?}",
                kind.letter()
            )));
        }
        let mut roles: SmallVec<[Page; 5]> = SmallVec::new();
        for g in groups {
            let mut g = g.to_vec();
            g.sort_unstable();
            roles.extend(g);
        }
        let mut all = roles.clone();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("role pages must be distinct"));
        }
        Ok(StateClass { family, kind, roles })
    }

    fn of(family: Family, kind: Kind, groups: &[&[Page]]) -> Self {
        StateClass::new(family, kind, groups).expect("rule produces a well-formed class")
    }

    /// The class instance with roles `a, b, c, ...` in group order.
    pub fn representative(family: Family, kind: Kind) -> Self {
        let sizes = shape(family, kind).expect("class exists");
        let roles = (0..sizes.iter().sum::<usize>() as u32).map(Page).collect();
        StateClass { family, kind, roles }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    /// Class name used for potential lookups (`"A"`, `"B"`, ...).
    pub fn class_name(&self) -> String {
        self.kind.letter().to_string()
    }

    pub fn groups(&self) -> Vec<&[Page]> {
        let mut out = Vec::new();
        let mut at = 0;
        for &n in shape(self.family, self.kind).expect("valid class") {
            out.push(&self.roles[at..at + n]);
            at += n;
        }
        out
    }

    pub fn pages(&self) -> &[Page] {
        &self.roles
    }

    pub fn classify(&self, r: Page) -> RequestClass {
        self.groups()
            .iter()
            .position(|g| g.contains(&r))
            .map_or(RequestClass::New, |i| RequestClass::Group(i as u8))
    }

    /// Distribution and bar string of the state.
    pub fn realize<S: Scalar>(&self) -> KnowledgeState<S> {
        let g = self.groups();
        let conf = |ps: &[Page]| Configuration::new(ps.iter().copied()).expect("distinct roles");
        let q = |n: i64, d: i64| S::ratio(n, d);
        let (dist, blocks): (Vec<(Configuration, S)>, Vec<Vec<Page>>) = match (self.family, self.kind) {
            (Family::K2, Kind::A) => (vec![(conf(g[0]), S::one())], vec![g[0].to_vec(), vec![]]),
            (Family::K2, Kind::B) => {
                let (a, b, c) = (g[0][0], g[1][0], g[1][1]);
                (
                    vec![(conf(&[a, b]), q(1, 2)), (conf(&[a, c]), q(1, 2))],
                    vec![vec![a], vec![b, c]],
                )
            }
            (Family::K3, Kind::A) => (vec![(conf(g[0]), S::one())], vec![g[0].to_vec(), vec![], vec![]]),
            (Family::K3, Kind::B) => {
                let a = g[0][0];
                let dist = pairs(g[1]).map(|(x, y)| (conf(&[a, x, y]), q(1, 3))).collect();
                (dist, vec![vec![a], g[1].to_vec(), vec![]])
            }
            (Family::K3, Kind::C) => {
                let (a, b) = (g[0][0], g[0][1]);
                (
                    g[1].iter().map(|&x| (conf(&[a, b, x]), q(1, 2))).collect(),
                    vec![vec![a, b], vec![], g[1].to_vec()],
                )
            }
            (Family::K3, Kind::D) => {
                let a = g[0][0];
                let dist = pairs(g[1]).map(|(x, y)| (conf(&[a, x, y]), q(1, 6))).collect();
                (dist, vec![vec![a], g[1].to_vec(), vec![]])
            }
            (Family::K3, Kind::E) => {
                let (a, b, c) = (g[0][0], g[0][1], g[1][0]);
                let mut dist = vec![(conf(&[a, b, c]), q(1, 2))];
                dist.extend(g[2].iter().map(|&x| (conf(&[a, b, x]), q(1, 4))));
                let mut last = vec![c];
                last.extend_from_slice(g[2]);
                (dist, vec![vec![a, b], vec![], last])
            }
            (Family::K3, Kind::F) => {
                let a = g[0][0];
                let mut dist = vec![(conf(&[a, g[1][0], g[1][1]]), q(1, 2))];
                for &x in g[1] {
                    for &y in g[2] {
                        dist.push((conf(&[a, x, y]), q(1, 8)));
                    }
                }
                (dist, vec![vec![a], g[1].to_vec(), g[2].to_vec()])
            }
            (Family::K2, _) => unreachable!("K2 has only classes A and B"),
        };
        let pi = ConfigDistribution::new(dist).expect("state distributions sum to one");
        let omega = BarString::new(blocks).expect("well-formed bar string").estimator();
        KnowledgeState::new(pi, omega).expect("state distribution lies in estimator support")
    }

    pub fn bar_string(&self) -> BarString {
        crate::bar::format_bar(&self.realize::<crate::Rational>().omega).expect("states are bar-representable")
    }
}

fn pairs(ps: &[Page]) -> impl Iterator<Item = (Page, Page)> + '_ {
    ps.iter()
        .enumerate()
        .flat_map(move |(i, &x)| ps[i + 1..].iter().map(move |&y| (x, y)))
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}(", self.family, self.kind.letter())?;
        for (i, g) in self.groups().iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            for (j, p) in g.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{p}")?;
            }
        }
        f.write_str(")")
    }
}

impl FromStr for StateClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::parse(s, why);
        let (fam, rest) = s.trim().split_once(':').ok_or_else(|| bad("missing family prefix"))?;
        let family: Family = fam.parse()?;
        let mut chars = rest.chars();
        let kind = chars.next().and_then(Kind::from_letter).ok_or_else(|| bad("unknown class letter"))?;
        let body = chars
            .as_str()
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .ok_or_else(|| bad("expected parenthesized role groups"))?;
        let groups: Vec<Vec<Page>> = body
            .split(';')
            .map(|g| g.split(',').map(|t| t.parse::<Page>()).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let refs: Vec<&[Page]> = groups.iter().map(Vec::as_slice).collect();
        StateClass::new(family, kind, &refs).map_err(|e| bad(&e.to_string()))
    }
}

impl Serialize for StateClass {
    fn serialize<Ser: Serializer>(&self, s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.collect_str(self)
    }
}

/// Which role group a request hits, or `New` for a page outside the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RequestClass {
    Group(u8),
    New,
}

impl RequestClass {
    pub fn is_trivial(self) -> bool {
        self == RequestClass::Group(0)
    }
}

/// Which subsequent family the K3 `D` + new-page action uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DfVariant {
    /// Uniform over the ten `A` states holding the new page.
    #[default]
    NewPage,
    /// Uniform over the ten `A` states holding the old forced page, as the
    /// action list prints it. Admits no potential.
    ForcedPage,
}

/// Cost and adjustment of one action; invariant under page relabeling.
#[derive(Clone, Debug, PartialEq)]
pub struct StepSummary<S> {
    pub cost: S,
    pub adjust: S,
}

/// A complete knowledge-state algorithm for one cache size.
#[derive(Clone, Debug)]
pub struct RuleTable<S = crate::Rational> {
    family: Family,
    df: DfVariant,
    summaries: HashMap<(Kind, RequestClass), StepSummary<S>>,
    actions: Vec<ActionRecord<S>>,
}

impl<S: Scalar> RuleTable<S> {
    pub fn k2() -> Self {
        Self::build(Family::K2, DfVariant::default())
    }

    pub fn k3() -> Self {
        Self::build(Family::K3, DfVariant::default())
    }

    pub fn k3_with(df: DfVariant) -> Self {
        Self::build(Family::K3, df)
    }

    pub fn for_family(family: Family) -> Self {
        Self::build(family, DfVariant::default())
    }

    fn build(family: Family, df: DfVariant) -> Self {
        let mut table = RuleTable::<S> {
            family,
            df,
            summaries: HashMap::new(),
            actions: Vec::new(),
        };
        for &kind in family.kinds() {
            let rep = StateClass::representative(family, kind);
            let state = rep.realize::<S>();
            let n_groups = rep.groups().len();
            let next_page = Page(rep.pages().len() as u32);
            let requests = (0..n_groups)
                .map(|i| rep.groups()[i][0])
                .chain(std::iter::once(next_page));
            for r in requests {
                let rc = rep.classify(r);
                let next = table.transition(&rep, r);
                let subs = Subsequents::new(next.iter().map(|(w, c)| (w.clone(), c.realize())).collect())
                    .expect("rule weights sum to one");
                let out = action_outcome(&state, r, subs).expect("rule transport is well-formed");
                let mut merged: Vec<(S, String)> = Vec::new();
                for (w, c) in &next {
                    let name = c.class_name();
                    match merged.iter_mut().find(|(_, n)| *n == name) {
                        Some(slot) => slot.0 = slot.0.clone() + w.clone(),
                        None => merged.push((w.clone(), name)),
                    }
                }
                table.actions.push(ActionRecord {
                    label: format!("{}{}", kind.letter(), r),
                    state_class: rep.class_name(),
                    request_class: r.to_string(),
                    cost: out.cost.clone(),
                    adjust: out.adjust.clone(),
                    next: merged,
                });
                table.summaries.insert(
                    (kind, rc),
                    StepSummary {
                        cost: out.cost,
                        adjust: out.adjust,
                    },
                );
            }
        }
        table
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn k(&self) -> usize {
        self.family.k()
    }

    pub fn df_variant(&self) -> DfVariant {
        self.df
    }

    /// The competitive ratio the algorithm is designed for.
    pub fn ratio(&self) -> S {
        match self.family {
            Family::K2 => S::ratio(3, 2),
            Family::K3 => S::ratio(11, 6),
        }
    }

    /// Symmetry-distinct actions, in class then request order.
    pub fn actions(&self) -> &[ActionRecord<S>] {
        &self.actions
    }

    pub fn action(&self, label: &str) -> Option<&ActionRecord<S>> {
        self.actions.iter().find(|a| a.label == label)
    }

    pub fn initial(&self, cache: &Configuration) -> Result<StateClass> {
        if cache.k() != self.k() {
            return Err(Error::input(format!("{} needs a {}-page initial cache", self.family, self.k())));
        }
        StateClass::new(self.family, Kind::A, &[cache.pages()])
    }

    pub fn summary(&self, cls: &StateClass, r: Page) -> &StepSummary<S> {
        &self.summaries[&(cls.kind, cls.classify(r))]
    }

    /// Weighted subsequent classes for request `r`.
    pub fn transition(&self, cls: &StateClass, r: Page) -> Vec<(S, StateClass)> {
        use Kind::*;
        let rc = cls.classify(r);
        if rc.is_trivial() {
            return vec![(S::one(), cls.clone())];
        }
        let g = cls.groups();
        let fam = cls.family;
        let one = |c: StateClass| vec![(S::one(), c)];
        // pages of group i other than r
        let rest = |i: usize| -> Vec<Page> { g[i].iter().copied().filter(|&p| p != r).collect() };
        match (fam, cls.kind, rc) {
            (Family::K2, A, RequestClass::New) => one(StateClass::of(fam, B, &[&[r], g[0]])),
            (Family::K2, B, RequestClass::Group(1)) => one(StateClass::of(fam, A, &[&[r, g[0][0]]])),
            (Family::K2, B, RequestClass::New) => {
                let a = g[0][0];
                let w = S::ratio(1, 3);
                [a, g[1][0], g[1][1]]
                    .into_iter()
                    .map(|x| (w.clone(), StateClass::of(fam, A, &[&[r, x]])))
                    .collect()
            }
            (Family::K3, A, RequestClass::New) => one(StateClass::of(fam, B, &[&[r], g[0]])),
            (Family::K3, B, RequestClass::Group(1)) => {
                one(StateClass::of(fam, C, &[&[g[0][0], r], &rest(1)]))
            }
            (Family::K3, B, RequestClass::New) => {
                let mut old = vec![g[0][0]];
                old.extend_from_slice(g[1]);
                one(StateClass::of(fam, D, &[&[r], &old]))
            }
            (Family::K3, C, RequestClass::Group(1)) => {
                one(StateClass::of(fam, A, &[&[g[0][0], g[0][1], r]]))
            }
            (Family::K3, C, RequestClass::New) => one(StateClass::of(fam, F, &[&[r], g[0], g[1]])),
            (Family::K3, D, RequestClass::Group(1)) => {
                // The three remaining pages are symmetric; the lowest one takes
                // the half-weight slot of E.
                let others = rest(1);
                one(StateClass::of(fam, E, &[&[g[0][0], r], &others[..1], &others[1..]]))
            }
            (Family::K3, D, RequestClass::New) => {
                let (anchor, pool): (Page, Vec<Page>) = match self.df {
                    DfVariant::NewPage => (r, cls.pages().to_vec()),
                    DfVariant::ForcedPage => {
                        let mut pool = g[1].to_vec();
                        pool.push(r);
                        (g[0][0], pool)
                    }
                };
                let w = S::ratio(1, 10);
                pairs(&pool)
                    .map(|(x, y)| (w.clone(), StateClass::of(fam, A, &[&[anchor, x, y]])))
                    .collect()
            }
            (Family::K3, E, RequestClass::Group(_)) => {
                one(StateClass::of(fam, A, &[&[g[0][0], g[0][1], r]]))
            }
            (Family::K3, E, RequestClass::New) => {
                one(StateClass::of(fam, A, &[&[r, g[0][0], g[0][1]]]))
            }
            (Family::K3, F, RequestClass::Group(1)) => {
                one(StateClass::of(fam, E, &[&[g[0][0], r], &rest(1), g[2]]))
            }
            (Family::K3, F, RequestClass::Group(2)) => {
                one(StateClass::of(fam, C, &[&[g[0][0], r], g[1]]))
            }
            (Family::K3, F, RequestClass::New) => {
                let a = g[0][0];
                let (b, c) = (g[1][0], g[1][1]);
                let w = S::ratio(1, 6);
                let firsts = [a, b, c];
                let mut out = Vec::with_capacity(6);
                for &x in &firsts {
                    let others: Vec<Page> = firsts.iter().copied().filter(|&y| y != x).collect();
                    out.push((w.clone(), StateClass::of(fam, C, &[&[r, x], &others])));
                }
                for &x in &firsts {
                    out.push((w.clone(), StateClass::of(fam, C, &[&[r, x], g[2]])));
                }
                out
            }
            (f, k, rc) => unreachable!("no rule for {f}:{} on {rc:?}", k.letter()),
        }
    }

    /// Full action outcome for a concrete state, computed from scratch.
    pub fn outcome(&self, cls: &StateClass, r: Page) -> Result<crate::ks::ActionOutcome<S>> {
        let subs = Subsequents::new(self.transition(cls, r).into_iter().map(|(w, c)| (w, c.realize())).collect())?;
        action_outcome(&cls.realize(), r, subs)
    }

    fn table(&self, values: &[(Kind, S)]) -> PotentialTable<S> {
        PotentialTable::new(
            values
                .iter()
                .filter(|(k, _)| self.family.kinds().contains(k))
                .map(|(k, v)| (k.letter().to_string(), v.clone())),
        )
        .expect("non-negative table")
    }

    /// The potential as printed alongside the algorithm.
    pub fn printed_potentials(&self) -> PotentialTable<S> {
        let q = |n, d| S::ratio(n, d);
        match self.family {
            Family::K2 => self.table(&[(Kind::A, q(0, 1)), (Kind::B, q(1, 2))]),
            Family::K3 => self.table(&[
                (Kind::A, q(0, 1)),
                (Kind::B, q(5, 6)),
                (Kind::C, q(1, 2)),
                (Kind::D, q(1, 2)),
                (Kind::E, q(1, 1)),
                (Kind::F, q(5, 4)),
            ]),
        }
    }

    /// A potential that passes at [`RuleTable::ratio`]: the printed table
    /// with `Φ(D)` raised to `3/2` for K3.
    pub fn certified_potentials(&self) -> PotentialTable<S> {
        match self.family {
            Family::K2 => self.printed_potentials(),
            Family::K3 => self.printed_potentials().with("D", S::ratio(3, 2)).expect("non-negative"),
        }
    }
}
