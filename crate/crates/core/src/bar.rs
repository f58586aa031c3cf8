//! Bar notation for paging offset functions.
//!
//! A bar string lists page names split by exactly `k` bars. Its support is
//! every `k`-configuration that, for each `i`, has at least `i` members
//! written left of the `i`-th bar; the estimator is zero there.
//!
//! Input is whitespace-insensitive and accepts both `a | b c | |` and the
//! compact `a|bc|`. Canonical output uses single spaces.

use std::fmt;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::model::{configurations, Configuration, Page};
use crate::scalar::Scalar;

/// Page blocks; block `i` holds the pages between bar `i` and bar `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BarString {
    blocks: Vec<Vec<Page>>,
}

impl BarString {
    pub fn new(blocks: Vec<Vec<Page>>) -> Result<Self> {
        let k = blocks.len();
        let mut seen: Vec<Page> = blocks.iter().flatten().copied().collect();
        let total = seen.len();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != total {
            return Err(Error::input("bar string repeats a page"));
        }
        let mut left = 0;
        for (i, b) in blocks.iter().enumerate() {
            left += b.len();
            if left < i + 1 {
                return Err(Error::input(format!(
                    "only {left} page(s) left of bar {}",
                    i + 1
                )));
            }
        }
        if k == 0 {
            return Err(Error::input("bar string needs at least one bar"));
        }
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        Ok(BarString { blocks })
    }

    pub fn parse(s: &str, k: usize) -> Result<Self> {
        let mut blocks: Vec<Vec<Page>> = vec![Vec::new()];
        let bytes = s.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let b = bytes[i];
            if b == b'|' {
                blocks.push(Vec::new());
                i += 1;
            } else if b.is_ascii_whitespace() {
                i += 1;
            } else if b == b'p' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit) {
                let start = i;
                i += 1;
                while bytes.get(i).is_some_and(u8::is_ascii_digit) {
                    i += 1;
                }
                let page: Page = s[start..i].parse()?;
                blocks.last_mut().expect("non-empty").push(page);
            } else if b.is_ascii_lowercase() {
                blocks.last_mut().expect("non-empty").push(Page((b - b'a') as u32));
                i += 1;
            } else {
                return Err(Error::parse(s, format!("unexpected character {:?}", b as char)));
            }
        }
        let trailing = blocks.pop().expect("non-empty");
        if blocks.len() != k {
            return Err(Error::parse(s, format!("expected {k} bars, found {}", blocks.len())));
        }
        if !trailing.is_empty() {
            return Err(Error::parse(s, "pages after the last bar"));
        }
        BarString::new(blocks).map_err(|e| Error::parse(s, e.to_string()))
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<Page>] {
        &self.blocks
    }

    /// The forced block: pages present in every support configuration.
    pub fn pages(&self) -> Vec<Page> {
        self.blocks.iter().flatten().copied().collect()
    }

    pub fn support(&self) -> Vec<Configuration> {
        let k = self.k();
        // block index of each listed page
        let block_of = |p: Page| self.blocks.iter().position(|b| b.contains(&p)).expect("listed page");
        configurations(&self.pages(), k)
            .into_iter()
            .filter(|x| {
                let mut counts = vec![0usize; k];
                for &p in x.pages() {
                    counts[block_of(p)] += 1;
                }
                let mut left = 0;
                counts.iter().enumerate().all(|(i, c)| {
                    left += c;
                    left > i
                })
            })
            .collect()
    }

    pub fn estimator<S: Scalar>(&self) -> Estimator<S> {
        Estimator::zero_on(self.support()).expect("bar strings have non-empty support")
    }

    /// `ab||`-style rendering; only meaningful when every page prints as a
    /// single letter.
    pub fn compact(&self) -> String {
        let mut s = String::new();
        for b in &self.blocks {
            for p in b {
                s.push_str(&p.to_string());
            }
            s.push('|');
        }
        s
    }
}

impl fmt::Display for BarString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut tokens: Vec<String> = Vec::new();
        for b in &self.blocks {
            tokens.extend(b.iter().map(Page::to_string));
            tokens.push("|".into());
        }
        f.write_str(&tokens.join(" "))
    }
}

/// Parses a bar string straight into its zero estimator.
pub fn parse_bar<S: Scalar>(s: &str, k: usize) -> Result<Estimator<S>> {
    Ok(BarString::parse(s, k)?.estimator())
}

/// Finds a bar string whose support is exactly the support of `omega`.
///
/// Returns `None` when `omega` has a non-zero value on its support or no
/// block assignment reproduces it. Among valid strings, pages are placed as
/// far left as possible, in page order.
pub fn format_bar<S: Scalar>(omega: &Estimator<S>) -> Option<BarString> {
    if omega.entries().any(|(_, v)| !v.is_zero()) {
        return None;
    }
    let k = omega.k();
    let target: Vec<Configuration> = omega.support().cloned().collect();
    let mut pages: Vec<Page> = target.iter().flat_map(|x| x.pages().iter().copied()).collect();
    pages.sort_unstable();
    pages.dedup();

    fn search(
        pages: &[Page],
        k: usize,
        assign: &mut Vec<usize>,
        target: &[Configuration],
    ) -> Option<BarString> {
        if assign.len() == pages.len() {
            let mut blocks = vec![Vec::new(); k];
            for (p, &b) in pages.iter().zip(assign.iter()) {
                blocks[b].push(*p);
            }
            let bs = BarString::new(blocks).ok()?;
            return (bs.support() == target).then_some(bs);
        }
        for b in 0..k {
            assign.push(b);
            if let Some(found) = search(pages, k, assign, target) {
                return Some(found);
            }
            assign.pop();
        }
        None
    }

    search(&pages, k, &mut Vec::with_capacity(pages.len()), &target)
}
