use std::fmt;

use itertools::Itertools;
use serde::Serialize;

use crate::error::{Error, Result};

/// Sorted multiset of the N-1 photon numbers on the non-teleported resource modes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Multiset {
    elems: Vec<usize>,
}

impl Multiset {
    pub fn new(mut elems: Vec<usize>) -> Result<Self> {
        if elems.is_empty() {
            return Err(Error::Domain("a multiset needs at least one element (N >= 2)".into()));
        }
        elems.sort_unstable();
        Ok(Multiset { elems })
    }

    pub fn elems(&self) -> &[usize] {
        &self.elems
    }

    /// Number of ports N = len + 1.
    pub fn ports(&self) -> usize {
        self.elems.len() + 1
    }

    pub fn unique(&self) -> Vec<usize> {
        self.elems.iter().copied().dedup().collect()
    }

    pub fn multiplicity(&self, v: usize) -> usize {
        self.elems.iter().filter(|&&e| e == v).count()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.elems.binary_search(&v).is_ok()
    }

    pub fn sum(&self) -> usize {
        self.elems.iter().sum()
    }

    pub fn max(&self) -> usize {
        *self.elems.last().expect("nonempty")
    }

    /// (value, multiplicity) pairs in ascending order.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        self.elems.iter().copied().dedup_with_count().map(|(c, v)| (v, c)).collect()
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.elems.iter().join(","))
    }
}

/// All multisets of N-1 values in 0..=cap, in lexicographic order.
pub fn enumerate_multisets(ports: usize, cap: usize) -> Result<Vec<Multiset>> {
    if ports < 2 {
        return Err(Error::Domain(format!("N = {ports} ports; need N >= 2")));
    }
    Ok((0..=cap)
        .combinations_with_replacement(ports - 1)
        .map(|elems| Multiset { elems })
        .collect())
}

pub fn multiset_count(ports: usize, cap: usize) -> u128 {
    // C(cap + N - 1, N - 1)
    let k = (ports - 1) as u128;
    let n = cap as u128 + k;
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}
