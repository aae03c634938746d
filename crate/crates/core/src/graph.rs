//! Collaboration graphs over firms, degree sequences, and the enumeration
//! machinery used by the exhaustive stability searches.
//!
//! Edges are stored as canonical pairs `(i, j)` with `i < j`. The labeled
//! graphs on `n` firms are indexed by bitmasks over the `C(n, 2)` possible
//! pairs, taken in lexicographic order.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on `n` for exhaustive enumeration (2^21 graphs).
pub const DEFAULT_ENUMERATION_CAP: usize = 7;

/// Largest `n` whose pair set still fits in a `u64` mask.
pub const MAX_MASK_FIRMS: usize = 11;

/// Swap attempts per edge used by [`random_realization`].
pub const DEFAULT_SWAPS_PER_EDGE: usize = 10;

/// Simple undirected graph on firms `0..n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct CollaborationGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for CollaborationGraph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        CollaborationGraph::from_edges(r.n, r.edges)
    }
}

impl From<CollaborationGraph> for GraphRepr {
    fn from(g: CollaborationGraph) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.edges.into_iter().collect(),
        }
    }
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl CollaborationGraph {
    /// Graph with `n` firms and no links.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: BTreeSet::new(),
        }
    }

    /// The complete graph `g^N`.
    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self { n, edges }
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(n);
        for (i, j) in edges {
            g.check_pair(i, j)?;
            if !g.edges.insert(canonical(i, j)) {
                return Err(Error::EdgeExists(i.min(j), i.max(j)));
            }
        }
        Ok(g)
    }

    /// Graph whose edge set is the bitmask `mask` over [`pairs`]`(n)`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let edges = pairs(n)
            .into_iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, p)| p)
            .collect();
        Self { n, edges }
    }

    /// Inverse of [`CollaborationGraph::from_mask`]; only meaningful for `n <= 11`.
    pub fn mask(&self) -> u64 {
        pairs(self.n)
            .into_iter()
            .enumerate()
            .filter(|(_, p)| self.edges.contains(p))
            .fold(0u64, |m, (b, _)| m | 1 << b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Canonical pairs absent from the graph.
    pub fn non_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n)
            .flat_map(move |i| (i + 1..self.n).map(move |j| (i, j)))
            .filter(move |p| !self.edges.contains(p))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&canonical(i, j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == i || b == i)
            .count()
    }

    /// `η_i(g)` for every firm.
    pub fn degree_sequence(&self) -> DegreeSequence {
        let mut k = vec![0; self.n];
        for &(i, j) in &self.edges {
            k[i] += 1;
            k[j] += 1;
        }
        DegreeSequence(k)
    }

    /// `g + ij`.
    pub fn add_link(&self, i: usize, j: usize) -> Result<Self> {
        self.check_pair(i, j)?;
        let mut g = self.clone();
        if !g.edges.insert(canonical(i, j)) {
            return Err(Error::EdgeExists(i.min(j), i.max(j)));
        }
        Ok(g)
    }

    /// `g - ij`.
    pub fn drop_link(&self, i: usize, j: usize) -> Result<Self> {
        self.check_pair(i, j)?;
        let mut g = self.clone();
        if !g.edges.remove(&canonical(i, j)) {
            return Err(Error::EdgeMissing(i.min(j), i.max(j)));
        }
        Ok(g)
    }

    /// Relabel firms: firm `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Invalid(format!(
                "permutation of length {} for {} firms",
                perm.len(),
                self.n
            )));
        }
        Self::from_edges(self.n, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(Error::SelfLoop(i));
        }
        for index in [i, j] {
            if index >= self.n {
                return Err(Error::FirmOutOfRange { index, n: self.n });
            }
        }
        Ok(())
    }

    /// Plain-text form: header `n=<count>`, then one `i j` per line.
    pub fn to_text(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for (i, j) in self.edges() {
            s.push_str(&format!("{i} {j}\n"));
        }
        s
    }

    /// Parse the format written by [`CollaborationGraph::to_text`]. Blank
    /// lines and `#` comments are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let n = header
            .strip_prefix("n=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| Error::Parse {
                line: no,
                msg: format!("expected 'n=<count>', got '{header}'"),
            })?;
        let mut edges = Vec::new();
        for (no, line) in lines {
            let parts: Vec<_> = line.split_whitespace().collect();
            let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
            match parsed.as_deref() {
                Some(&[i, j]) => edges.push((i, j)),
                _ => {
                    return Err(Error::Parse {
                        line: no,
                        msg: format!("expected 'i j', got '{line}'"),
                    })
                }
            }
        }
        Self::from_edges(n, edges)
    }

    /// Graphviz rendering, nodes annotated with their degree.
    pub fn to_dot(&self, name: &str) -> String {
        let k = self.degree_sequence();
        let mut s = format!("graph {name} {{\n");
        for (i, d) in k.as_slice().iter().enumerate() {
            s.push_str(&format!("  {i} [label=\"{i} (deg {d})\"];\n"));
        }
        for (i, j) in self.edges() {
            s.push_str(&format!("  {i} -- {j};\n"));
        }
        s.push_str("}\n");
        s
    }
}

impl fmt::Display for CollaborationGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} {{", self.n)?;
        for (idx, (i, j)) in self.edges().enumerate() {
            if idx > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}-{j}")?;
        }
        write!(f, "}}")
    }
}

/// Target or realized degrees `k_i`, one per firm.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct DegreeSequence(Vec<usize>);

impl TryFrom<Vec<usize>> for DegreeSequence {
    type Error = Error;

    fn try_from(k: Vec<usize>) -> Result<Self> {
        DegreeSequence::new(k)
    }
}

impl From<DegreeSequence> for Vec<usize> {
    fn from(k: DegreeSequence) -> Self {
        k.0
    }
}

impl DegreeSequence {
    /// Every entry must lie in `0..=n-1` where `n = k.len()`.
    pub fn new(k: Vec<usize>) -> Result<Self> {
        let n = k.len();
        if n == 0 {
            return Err(Error::Invalid("empty degree sequence".into()));
        }
        if let Some(&degree) = k.iter().find(|&&d| d > n - 1) {
            return Err(Error::DomainError { degree, max: n - 1 });
        }
        Ok(Self(k))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn sum(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn is_graphical(&self) -> bool {
        is_graphical(&self.0)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut k = vec![0; self.0.len()];
        for (i, &d) in self.0.iter().enumerate() {
            k[perm[i]] = d;
        }
        Self(k)
    }
}

/// Erdős–Gallai test.
pub fn is_graphical(k: &[usize]) -> bool {
    let n = k.len();
    if k.iter().any(|&d| d >= n.max(1)) && n > 0 {
        return false;
    }
    if k.iter().sum::<usize>() % 2 == 1 {
        return false;
    }
    let mut d = k.to_vec();
    d.sort_unstable_by(|a, b| b.cmp(a));
    let mut head = 0;
    for r in 1..=n {
        head += d[r - 1];
        let tail: usize = d[r..].iter().map(|&x| x.min(r)).sum();
        if head > r * (r - 1) + tail {
            return false;
        }
    }
    true
}

/// Havel–Hakimi construction. Ties are broken toward the lowest firm index,
/// so the result is deterministic.
pub fn realize_degree_sequence(k: &DegreeSequence) -> Result<CollaborationGraph> {
    if !k.is_graphical() {
        return Err(Error::NotGraphical(k.0.clone()));
    }
    let n = k.len();
    let mut rem: Vec<usize> = k.0.clone();
    let mut g = CollaborationGraph::empty(n);
    loop {
        let mut order: Vec<usize> = (0..n).filter(|&i| rem[i] > 0).collect();
        if order.is_empty() {
            break;
        }
        order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
        let v = order[0];
        let d = rem[v];
        rem[v] = 0;
        for &u in order.iter().skip(1).take(d) {
            rem[u] -= 1;
            g.edges.insert(canonical(u, v));
        }
    }
    debug_assert_eq!(&g.degree_sequence(), k);
    Ok(g)
}

/// The `C(n, 2)` canonical pairs in lexicographic order; bit `b` of an
/// enumeration mask refers to `pairs(n)[b]`.
pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded { n, cap });
    }
    if n > MAX_MASK_FIRMS {
        return Err(Error::CapExceeded {
            n,
            cap: MAX_MASK_FIRMS,
        });
    }
    Ok(())
}

/// Number of labeled graphs on `n` firms, checked against `cap`.
pub fn graph_count(n: usize, cap: usize) -> Result<u64> {
    check_cap(n, cap)?;
    Ok(1u64 << (n * n.saturating_sub(1) / 2))
}

/// All `2^(n(n-1)/2)` labeled graphs on `n` firms, in mask order.
pub fn enumerate_graphs(
    n: usize,
    cap: usize,
) -> Result<impl Iterator<Item = CollaborationGraph> + Send> {
    let count = graph_count(n, cap)?;
    Ok((0..count).map(move |mask| CollaborationGraph::from_mask(n, mask)))
}

/// Every labeled graph with degree sequence `k`, by backtracking over pairs.
pub fn enumerate_realizations(k: &DegreeSequence, cap: usize) -> Result<Vec<CollaborationGraph>> {
    if !k.is_graphical() {
        return Err(Error::NotGraphical(k.0.clone()));
    }
    let n = k.len();
    check_cap(n, cap)?;

    struct Search {
        n: usize,
        rem: Vec<usize>,
        edges: Vec<(usize, usize)>,
        out: Vec<CollaborationGraph>,
    }

    impl Search {
        fn run(&mut self, i: usize, j: usize) {
            if i >= self.n {
                self.out.push(CollaborationGraph {
                    n: self.n,
                    edges: self.edges.iter().copied().collect(),
                });
                return;
            }
            if j >= self.n {
                if self.rem[i] == 0 {
                    self.run(i + 1, i + 2);
                }
                return;
            }
            let available = self.n - j;
            if self.rem[i] > available {
                return;
            }
            if self.rem[i] > 0 && self.rem[j] > 0 {
                self.rem[i] -= 1;
                self.rem[j] -= 1;
                self.edges.push((i, j));
                self.run(i, j + 1);
                self.edges.pop();
                self.rem[i] += 1;
                self.rem[j] += 1;
            }
            if self.rem[i] < available {
                self.run(i, j + 1);
            }
        }
    }

    let mut search = Search {
        n,
        rem: k.0.clone(),
        edges: Vec::new(),
        out: Vec::new(),
    };
    search.run(0, 1);
    Ok(search.out)
}

/// One member of `[g]_η` drawn by degree-preserving double edge swaps
/// starting from the Havel–Hakimi graph. Deterministic per seed.
pub fn random_realization(k: &DegreeSequence, seed: u64) -> Result<CollaborationGraph> {
    let swaps = DEFAULT_SWAPS_PER_EDGE * k.sum() / 2;
    random_realization_with(k, seed, swaps)
}

pub fn random_realization_with(
    k: &DegreeSequence,
    seed: u64,
    swap_attempts: usize,
) -> Result<CollaborationGraph> {
    let mut g = realize_degree_sequence(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    if edges.len() < 2 {
        return Ok(g);
    }
    for _ in 0..swap_attempts {
        let picked: Vec<usize> = (0..edges.len())
            .collect::<Vec<_>>()
            .choose_multiple(&mut rng, 2)
            .copied()
            .collect();
        let (a, b) = (picked[0], picked[1]);
        let (u, v) = edges[a];
        let (mut x, mut y) = edges[b];
        if rng.gen_bool(0.5) {
            std::mem::swap(&mut x, &mut y);
        }
        // u-v, x-y  ->  u-x, v-y
        if u == x || v == y {
            continue;
        }
        let e1 = canonical(u, x);
        let e2 = canonical(v, y);
        if g.edges.contains(&e1) || g.edges.contains(&e2) {
            continue;
        }
        g.edges.remove(&edges[a]);
        g.edges.remove(&edges[b]);
        g.edges.insert(e1);
        g.edges.insert(e2);
        edges[a] = e1;
        edges[b] = e2;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Reference five-firm graph with degrees [2, 3, 4, 3, 2].
    fn figure_one() -> CollaborationGraph {
        CollaborationGraph::from_edges(5, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)])
            .unwrap()
    }

    fn k(v: &[usize]) -> DegreeSequence {
        DegreeSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn degree_sequences() {
        assert_eq!(
            CollaborationGraph::empty(3).degree_sequence(),
            k(&[0, 0, 0])
        );
        assert_eq!(
            CollaborationGraph::complete(4).degree_sequence(),
            k(&[3, 3, 3, 3])
        );
        let g = figure_one();
        assert_eq!(g.degree_sequence(), k(&[2, 3, 4, 3, 2]));
        assert_eq!(g.degree_sequence().sum(), 2 * g.edge_count());
    }

    #[test]
    fn add_and_drop() {
        let g = CollaborationGraph::empty(2).add_link(0, 1).unwrap();
        assert_eq!(g.degree_sequence(), k(&[1, 1]));

        let f = figure_one();
        let dropped = f.drop_link(1, 2).unwrap();
        assert_eq!(dropped.degree_sequence(), k(&[2, 2, 3, 3, 2]));
        assert_eq!(dropped.add_link(2, 1).unwrap(), f);

        assert!(matches!(f.add_link(3, 3), Err(Error::SelfLoop(3))));
        assert!(matches!(f.add_link(0, 1), Err(Error::EdgeExists(0, 1))));
        assert!(matches!(f.drop_link(0, 4), Err(Error::EdgeMissing(0, 4))));
        assert!(matches!(
            f.add_link(0, 9),
            Err(Error::FirmOutOfRange { index: 9, .. })
        ));
    }

    #[test]
    fn graphical_examples() {
        assert!(is_graphical(&[2, 3, 4, 3, 2]));
        assert!(!is_graphical(&[3, 3, 3]));
        assert!(is_graphical(&[1, 1]));
        assert!(!is_graphical(&[3, 3, 1, 1]));
        assert!(is_graphical(&[0]));
    }

    #[test]
    fn havel_hakimi_examples() {
        let g = realize_degree_sequence(&k(&[2, 3, 4, 3, 2])).unwrap();
        assert_eq!(g.degree_sequence(), k(&[2, 3, 4, 3, 2]));
        assert_eq!(
            realize_degree_sequence(&k(&[0, 0])).unwrap(),
            CollaborationGraph::empty(2)
        );

        // the only labeled graphs with degrees [1,1,2] are paths centred on firm 2
        let path = realize_degree_sequence(&k(&[1, 1, 2])).unwrap();
        let brute: Vec<_> = enumerate_graphs(3, 7)
            .unwrap()
            .filter(|g| g.degree_sequence() == k(&[1, 1, 2]))
            .collect();
        assert_eq!(brute, vec![path]);

        assert!(matches!(
            realize_degree_sequence(&k(&[2, 2, 0])),
            Err(Error::NotGraphical(_))
        ));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_graphs(2, 7).unwrap().count(), 2);
        assert_eq!(enumerate_graphs(3, 7).unwrap().count(), 8);
        assert_eq!(enumerate_graphs(4, 7).unwrap().count(), 64);
        assert!(matches!(
            enumerate_graphs(8, 7).map(|_| ()),
            Err(Error::CapExceeded { n: 8, cap: 7 })
        ));
        assert!(enumerate_graphs(12, 20).is_err());
    }

    #[test]
    fn realization_examples() {
        assert_eq!(enumerate_realizations(&k(&[1, 1]), 7).unwrap().len(), 1);
        let tri = enumerate_realizations(&k(&[2, 2, 2]), 7).unwrap();
        assert_eq!(tri, vec![CollaborationGraph::complete(3)]);
    }

    #[test]
    fn realizations_match_exhaustive_filter() {
        for target in [
            vec![2, 3, 4, 3, 2],
            vec![1, 1, 1, 1],
            vec![2, 2, 2, 1, 1],
            vec![0, 0, 0],
        ] {
            let target = k(&target);
            let n = target.len();
            let mut fast: Vec<u64> = enumerate_realizations(&target, 7)
                .unwrap()
                .iter()
                .map(|g| g.mask())
                .collect();
            let mut brute: Vec<u64> = enumerate_graphs(n, 7)
                .unwrap()
                .filter(|g| g.degree_sequence() == target)
                .map(|g| g.mask())
                .collect();
            fast.sort_unstable();
            brute.sort_unstable();
            let len = fast.len();
            fast.dedup();
            assert_eq!(fast.len(), len, "duplicates for {target:?}");
            assert_eq!(fast, brute, "{target:?}");
        }
    }

    #[test]
    fn random_realization_is_seeded() {
        let target = k(&[2, 3, 4, 3, 2]);
        let a = random_realization(&target, 7).unwrap();
        let b = random_realization(&target, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.degree_sequence(), target);
        // many seeds reach more than one member of the class
        let distinct: BTreeSet<u64> = (0..40)
            .map(|s| random_realization(&target, s).unwrap().mask())
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn text_and_dot() {
        let g = figure_one();
        let text = g.to_text();
        assert!(text.starts_with("n=5\n0 1\n"));
        assert_eq!(CollaborationGraph::from_text(&text).unwrap(), g);
        assert!(CollaborationGraph::from_text("n=3\n0 0\n").is_err());
        assert!(matches!(
            CollaborationGraph::from_text("5\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let dot = g.to_dot("G");
        assert!(dot.contains("2 -- 4;"));
        assert!(dot.contains("2 [label=\"2 (deg 4)\"]"));
    }

    #[test]
    fn mask_round_trip() {
        for mask in 0..1024u64 {
            assert_eq!(CollaborationGraph::from_mask(5, mask).mask(), mask);
        }
    }
}
