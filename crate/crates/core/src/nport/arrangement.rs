use std::collections::{BTreeMap, HashMap};

use super::multiset::Multiset;

/// Slot contents: `None` is the marker for the teleported mode's photon number.
pub type Slot = Option<usize>;

/// Distinct orderings of (marker, M) with the composition tables used by the channel sums.
#[derive(Debug, Clone)]
pub struct Arrangements {
    multiset: Multiset,
    seqs: Vec<Vec<Slot>>,
    index: HashMap<Vec<Slot>, usize>,
    marker_pos: Vec<usize>,
    tilde: Vec<usize>,
    swaps: BTreeMap<usize, Vec<Vec<usize>>>,
    rotations: Vec<Vec<usize>>,
}

fn next_permutation(v: &mut [Slot]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl Arrangements {
    pub fn new(multiset: &Multiset) -> Self {
        let mut cur: Vec<Slot> = std::iter::once(None).chain(multiset.elems().iter().map(|&e| Some(e))).collect();
        let mut seqs = vec![cur.clone()];
        while next_permutation(&mut cur) {
            seqs.push(cur.clone());
        }
        let index: HashMap<Vec<Slot>, usize> = seqs.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let marker_pos: Vec<usize> = seqs.iter().map(|s| s.iter().position(Option::is_none).unwrap()).collect();
        let tilde = (0..seqs.len()).filter(|&i| marker_pos[i] == 0).collect();

        let mut swaps = BTreeMap::new();
        for v in multiset.unique() {
            let table = seqs
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let j0 = marker_pos[i];
                    (0..s.len())
                        .filter(|&j| s[j] == Some(v))
                        .map(|j| {
                            let mut t = s.clone();
                            t.swap(j0, j);
                            index[&t]
                        })
                        .collect()
                })
                .collect();
            swaps.insert(v, table);
        }

        let n = multiset.ports();
        let rotations = seqs
            .iter()
            .map(|s| {
                (0..n)
                    .map(|r| {
                        let mut t = vec![None; n];
                        for (i, &x) in s.iter().enumerate() {
                            t[(i + r) % n] = x;
                        }
                        index[&t]
                    })
                    .collect()
            })
            .collect();

        Arrangements { multiset: multiset.clone(), seqs, index, marker_pos, tilde, swaps, rotations }
    }

    pub fn multiset(&self) -> &Multiset {
        &self.multiset
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn seq(&self, i: usize) -> &[Slot] {
        &self.seqs[i]
    }

    pub fn seqs(&self) -> &[Vec<Slot>] {
        &self.seqs
    }

    pub fn index_of(&self, seq: &[Slot]) -> Option<usize> {
        self.index.get(seq).copied()
    }

    pub fn marker_position(&self, i: usize) -> usize {
        self.marker_pos[i]
    }

    /// Arrangements with the marker in the first slot.
    pub fn tilde(&self) -> &[usize] {
        &self.tilde
    }

    pub fn in_tilde(&self, i: usize) -> bool {
        self.marker_pos[i] == 0
    }

    /// Non-identity elements of `i · P_v`: the marker exchanged with each slot holding v.
    pub fn swaps_with(&self, i: usize, v: usize) -> &[usize] {
        self.swaps.get(&v).map(|t| t[i].as_slice()).unwrap_or(&[])
    }

    /// `i · P_v` including the identity.
    pub fn compose(&self, i: usize, v: usize) -> Vec<usize> {
        std::iter::once(i).chain(self.swaps_with(i, v).iter().copied()).collect()
    }

    /// Index of the sequence cyclically shifted right by r slots.
    pub fn rotate(&self, i: usize, r: usize) -> usize {
        self.rotations[i][r % self.multiset.ports()]
    }

    /// Unique split of i into a marker-first arrangement and an element of P_v.
    /// Returns (tilde index, v) where v is `None` when i is itself in the tilde set.
    pub fn decompose(&self, i: usize) -> (usize, Option<usize>) {
        let j0 = self.marker_pos[i];
        if j0 == 0 {
            return (i, None);
        }
        let s = &self.seqs[i];
        let v = s[0].expect("slot 0 holds a value when the marker is elsewhere");
        let mut t = s.clone();
        t.swap(0, j0);
        (self.index[&t], Some(v))
    }

    /// First slot and tail with the marker replaced by `v`.
    pub fn substitute(&self, i: usize, v: usize) -> (usize, Vec<usize>) {
        let s: Vec<usize> = self.seqs[i].iter().map(|x| x.unwrap_or(v)).collect();
        (s[0], s[1..].to_vec())
    }
}

pub fn arrangement_count(multiset: &Multiset) -> usize {
    let n = multiset.ports();
    let fact = |k: usize| (1..=k).product::<usize>();
    multiset.multiplicities().iter().fold(fact(n), |acc, &(_, c)| acc / fact(c))
}
