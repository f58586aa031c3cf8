//! Pages, cache configurations, and the paging cost structure.
//!
//! Moving between configurations costs one per page swapped in. Serving a
//! request `r` on the way from `x` to `y` forces `r` to be resident at some
//! point, which adds a fault when neither endpoint holds it.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// An interned page token.
///
/// Pages `0..26` print as `a`..`z`; larger ids print as `p<id>`. The order
/// is only used to pick canonical forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Page(pub u32);

impl Page {
    pub fn letter(c: char) -> Page {
        assert!(c.is_ascii_lowercase(), "page letter must be a-z");
        Page(c as u32 - 'a' as u32)
    }
}

impl fmt::Display for Page {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 < 26 {
            write!(f, "{}", char::from(b'a' + self.0 as u8))
        } else {
            write!(f, "p{}", self.0)
        }
    }
}

impl FromStr for Page {
    type Err = Error;

    fn from_str(s: &str) -> Result<Page> {
        let t = s.trim();
        let bytes = t.as_bytes();
        match bytes {
            [c] if c.is_ascii_lowercase() => Ok(Page((c - b'a') as u32)),
            [b'p', rest @ ..] if !rest.is_empty() && rest.iter().all(u8::is_ascii_digit) => t[1..]
                .parse()
                .map(Page)
                .map_err(|_| Error::parse(s, "page id out of range")),
            _ => Err(Error::parse(s, "page tokens are a single letter a-z or p<number>")),
        }
    }
}

impl Serialize for Page {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The first `n` pages `a, b, c, ...`.
pub fn universe(n: u32) -> Vec<Page> {
    (0..n).map(Page).collect()
}

/// A set of distinct resident pages, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pages: SmallVec<[Page; 4]>,
}

impl Configuration {
    pub fn new(pages: impl IntoIterator<Item = Page>) -> Result<Self> {
        let mut pages: SmallVec<[Page; 4]> = pages.into_iter().collect();
        pages.sort_unstable();
        if pages.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::input("configuration pages must be distinct"));
        }
        if pages.is_empty() {
            return Err(Error::input("configuration must hold at least one page"));
        }
        Ok(Configuration { pages })
    }

    /// Builds from letters, e.g. `Configuration::of("abc")`. Panics on repeats.
    pub fn of(letters: &str) -> Self {
        Configuration::new(letters.chars().map(Page::letter)).expect("distinct letters")
    }

    pub fn k(&self) -> usize {
        self.pages.len()
    }

    pub fn pages(&self) -> &[Page] {
        &self.pages
    }

    pub fn contains(&self, p: Page) -> bool {
        self.pages.binary_search(&p).is_ok()
    }

    /// `|self \ other|`; both sides must have the same size.
    pub fn moves_to(&self, other: &Configuration) -> u32 {
        debug_assert_eq!(self.k(), other.k());
        let (mut i, mut j, mut common) = (0, 0, 0u32);
        let (a, b) = (&self.pages, &other.pages);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        a.len() as u32 - common
    }

    /// `self - out + r`.
    pub fn swap(&self, out: Page, r: Page) -> Configuration {
        let mut pages: SmallVec<[Page; 4]> = self.pages.iter().copied().filter(|&p| p != out).collect();
        debug_assert_eq!(pages.len() + 1, self.pages.len());
        let pos = pages.binary_search(&r).expect_err("incoming page not resident");
        pages.insert(pos, r);
        Configuration { pages }
    }

    /// Service cost for `r` when moving from `self` to `y` (same size assumed).
    pub fn serve_cost(&self, r: Page, y: &Configuration) -> u32 {
        let d = self.moves_to(y);
        if self.contains(r) || y.contains(r) {
            d
        } else if d == 0 {
            2
        } else {
            d + 1
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, p) in self.pages.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Distance between configurations: the number of pages that must be swapped.
pub fn distance(x: &Configuration, y: &Configuration) -> Result<u32> {
    if x.k() != y.k() {
        return Err(Error::input(format!(
            "configurations {x} and {y} have different sizes"
        )));
    }
    Ok(x.moves_to(y))
}

/// Cost of serving request `r` while moving from `x` to `y`.
pub fn service_cost(x: &Configuration, r: Page, y: &Configuration) -> Result<u32> {
    distance(x, y)?;
    Ok(x.serve_cost(r, y))
}

/// The configurations reachable from `x` by serving `r` as cheaply as
/// possible: `{x}` on a hit, otherwise one per evicted page.
pub fn service_support(x: &Configuration, r: Page) -> Vec<Configuration> {
    if x.contains(r) {
        vec![x.clone()]
    } else {
        x.pages().iter().map(|&a| x.swap(a, r)).collect()
    }
}

/// All `k`-subsets of `pages`, in lexicographic order of the sorted input.
pub fn configurations(pages: &[Page], k: usize) -> Vec<Configuration> {
    let mut sorted = pages.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec(src: &[Page], start: usize, k: usize, pick: &mut Vec<Page>, out: &mut Vec<Configuration>) {
        if pick.len() == k {
            out.push(Configuration {
                pages: pick.iter().copied().collect(),
            });
            return;
        }
        for i in start..src.len() {
            if src.len() - i < k - pick.len() {
                break;
            }
            pick.push(src[i]);
            rec(src, i + 1, k, pick, out);
            pick.pop();
        }
    }
    if k > 0 {
        rec(&sorted, 0, k, &mut pick, &mut out);
    }
    out
}

/// A `k`-cache instance: the cache size and the starting cache content.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CacheProblem {
    k: usize,
    initial: Configuration,
}

impl CacheProblem {
    pub fn new(k: usize, initial: Configuration) -> Result<Self> {
        if k == 0 || initial.k() != k {
            return Err(Error::input(format!(
                "initial cache {initial} does not hold exactly {k} pages"
            )));
        }
        Ok(CacheProblem { k, initial })
    }

    /// Cache of size `k` holding the first `k` pages.
    pub fn standard(k: usize) -> Self {
        let initial = Configuration::new(universe(k as u32)).expect("distinct");
        CacheProblem { k, initial }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn check(&self, x: &Configuration) -> Result<()> {
        if x.k() == self.k {
            Ok(())
        } else {
            Err(Error::input(format!("{x} is not a {}-configuration", self.k)))
        }
    }
}
