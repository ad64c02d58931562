use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordered wavelet indices (s, k) with strictly increasing scale index s.
///
/// Paths order lexicographically with the empty path first, so a sorted list
/// is the depth-first preorder of the scattering tree.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path {
    steps: Vec<(usize, usize)>,
}

impl Path {
    pub fn empty() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn new(steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Argument(format!(
                "path {steps:?} is not frequency-decreasing"
            )));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn order(&self) -> usize {
        self.steps.len()
    }

    pub fn last_scale(&self) -> Option<usize> {
        self.steps.last().map(|s| s.0)
    }

    /// Extends the path; the new scale must be coarser than the last one.
    pub fn child(&self, s: usize, k: usize) -> Result<Self> {
        if self.last_scale().is_some_and(|last| s <= last) {
            return Err(Error::Argument(format!("scale {s} does not follow {self}")));
        }
        let mut steps = self.steps.clone();
        steps.push((s, k));
        Ok(Self { steps })
    }

    pub fn parent(&self) -> Option<Self> {
        (!self.steps.is_empty()).then(|| Self {
            steps: self.steps[..self.steps.len() - 1].to_vec(),
        })
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return f.write_str("()");
        }
        let parts: Vec<String> = self.steps.iter().map(|(s, k)| format!("{s}:{k}")).collect();
        f.write_str(&parts.join("/"))
    }
}

impl FromStr for Path {
    type Err = Error;

    /// Parses the `Display` form, e.g. `()` or `0:1/2:3`.
    fn from_str(text: &str) -> Result<Self> {
        if text == "()" {
            return Ok(Self::empty());
        }
        let steps = text
            .split('/')
            .map(|part| {
                let (s, k) = part
                    .split_once(':')
                    .ok_or_else(|| Error::Argument(format!("bad path step '{part}'")))?;
                let parse = |v: &str| {
                    v.parse::<usize>()
                        .map_err(|_| Error::Argument(format!("bad path step '{part}'")))
                };
                Ok((parse(s)?, parse(k)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(steps)
    }
}

/// All frequency-decreasing paths of length ≤ m_max, in lexicographic order.
pub fn enumerate_paths(j: usize, c: usize, m_max: usize) -> Vec<Path> {
    fn grow(prefix: &Path, j: usize, c: usize, m_max: usize, out: &mut Vec<Path>) {
        out.push(prefix.clone());
        if prefix.order() == m_max {
            return;
        }
        let first = prefix.last_scale().map_or(0, |s| s + 1);
        for s in first..j {
            for k in 0..c {
                let mut steps = prefix.steps.clone();
                steps.push((s, k));
                grow(&Path { steps }, j, c, m_max, out);
            }
        }
    }
    let mut out = Vec::new();
    grow(&Path::empty(), j, c, m_max, &mut out);
    out
}

/// Σ_{q ≤ m_max} C^q · binom(J, q).
pub fn path_count(j: usize, c: usize, m_max: usize) -> usize {
    (0..=m_max.min(j))
        .map(|q| c.pow(q as u32) * binom(j, q))
        .sum()
}

pub(crate) fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}
