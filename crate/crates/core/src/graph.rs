//! Relation graphs over the item set, family generators, and the pair
//! coverage sets used by the sample-complexity machinery.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unordered item pair, canonically stored as `(i, j)` with `i < j`.
/// Items are 0-based in memory; file formats are 1-based.
pub type Pair = (usize, usize);

/// Number of unordered pairs over `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// All unordered pairs over `n` items in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<Pair> {
    let mut out = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((i, j));
        }
    }
    out
}

/// Lexicographic rank of the pair `(i, j)` with `i < j` among all pairs.
pub fn pair_rank(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (n - 1) - i * (i + 1) / 2 + j - 1
}

/// Named graph families with analytically known independent sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "disconnected")]
    Disconnected,
    #[serde(rename = "clique")]
    Clique,
    #[serde(rename = "r-cliques", alias = "r_disconnected_cliques")]
    RDisconnectedCliques,
    #[serde(rename = "d-regular", alias = "d_regular")]
    DRegular,
    #[serde(rename = "k-tree", alias = "k_ary_tree")]
    KAryTree,
    #[serde(rename = "star")]
    Star,
    #[serde(rename = "cycle")]
    Cycle,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Disconnected => "disconnected",
            Family::Clique => "clique",
            Family::RDisconnectedCliques => "r-cliques",
            Family::DRegular => "d-regular",
            Family::KAryTree => "k-tree",
            Family::Star => "star",
            Family::Cycle => "cycle",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disconnected" => Ok(Family::Disconnected),
            "clique" => Ok(Family::Clique),
            "r-cliques" | "r_disconnected_cliques" => Ok(Family::RDisconnectedCliques),
            "d-regular" | "d_regular" => Ok(Family::DRegular),
            "k-tree" | "k_ary_tree" => Ok(Family::KAryTree),
            "star" => Ok(Family::Star),
            "cycle" => Ok(Family::Cycle),
            other => Err(Error::invalid(format!("unknown graph family `{other}`"))),
        }
    }
}

/// Undirected graph over `n` items with a designated independent set.
#[derive(Clone, Debug)]
pub struct RelationGraph {
    n: usize,
    edges: Vec<Pair>,
    adj: Vec<Vec<usize>>,
    independent_set: Vec<usize>,
    family: Option<(Family, usize)>,
}

impl RelationGraph {
    /// Builds a graph from an edge list and an explicit independent set.
    ///
    /// Edges are canonicalized and deduplicated. Fails on self-loops,
    /// out-of-range indices, or an edge inside the independent set.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = Pair>,
        independent_set: Vec<usize>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one item"));
        }
        let mut canonical = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at item {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            canonical.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<Pair> = canonical.into_iter().collect();

        let mut independent_set = independent_set;
        independent_set.sort_unstable();
        independent_set.dedup();
        if independent_set.is_empty() {
            return Err(Error::invalid("independent set must be nonempty"));
        }
        if let Some(&bad) = independent_set.iter().find(|&&v| v >= n) {
            return Err(Error::invalid(format!(
                "independent item {bad} out of range for n = {n}"
            )));
        }
        let mut member = vec![false; n];
        for &v in &independent_set {
            member[v] = true;
        }
        if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| member[a] && member[b]) {
            return Err(Error::invalid(format!(
                "edge ({a}, {b}) joins two independent-set members"
            )));
        }

        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }

        Ok(Self {
            n,
            edges,
            adj,
            independent_set,
            family: None,
        })
    }

    /// Generates a canonical member of a graph family with its analytic
    /// maximal independent set. Only the d-regular family consumes the seed.
    pub fn family(family: Family, n: usize, param: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("graph needs at least one item"));
        }
        let (edges, independent_set) = match family {
            Family::Disconnected => (Vec::new(), (0..n).collect()),
            Family::Clique => (all_pairs(n), vec![0]),
            Family::RDisconnectedCliques => {
                let r = param;
                if r == 0 || !n.is_multiple_of(r) {
                    return Err(Error::invalid(format!(
                        "r = {r} must be positive and divide n = {n}"
                    )));
                }
                let d = n / r;
                let mut edges = Vec::new();
                for c in 0..r {
                    let base = c * d;
                    for i in 0..d {
                        for j in (i + 1)..d {
                            edges.push((base + i, base + j));
                        }
                    }
                }
                (edges, (0..r).map(|c| c * d).collect())
            }
            Family::DRegular => {
                let d = param;
                if d >= n || !(n * d).is_multiple_of(2) {
                    return Err(Error::invalid(format!(
                        "no simple {d}-regular graph on {n} nodes (need d < n and n*d even)"
                    )));
                }
                let edges = pairing_model(n, d, seed)?;
                let ind = greedy_independent_set(n, &edges);
                (edges, ind)
            }
            Family::KAryTree => {
                let k = param;
                if k == 0 {
                    return Err(Error::invalid("tree arity must be positive"));
                }
                let height = full_tree_height(n, k).ok_or_else(|| {
                    Error::invalid(format!("n = {n} is not a full {k}-ary tree size"))
                })?;
                let mut edges = Vec::new();
                for v in 0..n {
                    for c in 1..=k {
                        let child = k * v + c;
                        if child < n {
                            edges.push((v, child));
                        }
                    }
                }
                // The maximum independent set of a full tree takes every other
                // level starting from the leaves, i.e. depths with the same
                // parity as the height.
                let ind = (0..n)
                    .filter(|&v| node_depth(v, k) % 2 == height % 2)
                    .collect();
                (edges, ind)
            }
            Family::Star => {
                if n < 2 {
                    return Err(Error::invalid("star graph needs at least 2 items"));
                }
                ((1..n).map(|v| (0, v)).collect(), (1..n).collect())
            }
            Family::Cycle => {
                if n < 3 {
                    return Err(Error::invalid("cycle graph needs at least 3 items"));
                }
                let edges: Vec<Pair> = (0..n)
                    .map(|v| {
                        let w = (v + 1) % n;
                        (v.min(w), v.max(w))
                    })
                    .collect();
                let ind = greedy_independent_set(n, &edges);
                (edges, ind)
            }
        };
        let mut graph = Self::new(n, edges, independent_set)?;
        graph.family = Some((family, param));
        Ok(graph)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Pair] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The fixed maximal independent set, ascending.
    pub fn independent_set(&self) -> &[usize] {
        &self.independent_set
    }

    /// Independence number: size of the fixed independent set.
    pub fn alpha(&self) -> usize {
        self.independent_set.len()
    }

    pub fn family_tag(&self) -> Option<(Family, usize)> {
        self.family
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.adj[a].binary_search(&b).is_ok()
    }

    pub fn is_independent(&self, v: usize) -> bool {
        self.independent_set.binary_search(&v).is_ok()
    }

    /// Closed neighborhood of `v` intersected with the independent set,
    /// ascending.
    pub fn closed_independent_neighborhood(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adj[v]
            .iter()
            .copied()
            .filter(|&u| self.is_independent(u))
            .collect();
        if self.is_independent(v) {
            out.push(v);
            out.sort_unstable();
        }
        out
    }

    /// Text form: header `n <count>`, line `independent <1-based indices>`,
    /// then one `i j` edge per line (1-based).
    pub fn to_edge_list_string(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        s.push_str("independent");
        for &v in &self.independent_set {
            s.push_str(&format!(" {}", v + 1));
        }
        s.push('\n');
        for &(a, b) in &self.edges {
            s.push_str(&format!("{} {}\n", a + 1, b + 1));
        }
        s
    }

    /// Parses the edge-list text format produced by
    /// [`RelationGraph::to_edge_list_string`].
    pub fn from_edge_list_str(text: &str) -> Result<Self> {
        let mut n = None;
        let mut independent = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let head = tokens.next().unwrap();
            match head {
                "n" => {
                    let value: usize = tokens
                        .next()
                        .ok_or_else(|| Error::parse(line_no, "missing item count"))?
                        .parse()
                        .map_err(|_| Error::parse(line_no, "item count is not an integer"))?;
                    n = Some(value);
                }
                "independent" => {
                    let mut items = Vec::new();
                    for tok in tokens {
                        let v: usize = tok.parse().map_err(|_| {
                            Error::parse(line_no, format!("bad independent index `{tok}`"))
                        })?;
                        if v == 0 {
                            return Err(Error::parse(line_no, "indices are 1-based"));
                        }
                        items.push(v - 1);
                    }
                    independent = Some(items);
                }
                _ => {
                    let a: usize = head.parse().map_err(|_| {
                        Error::parse(line_no, format!("bad edge endpoint `{head}`"))
                    })?;
                    let b_tok = tokens
                        .next()
                        .ok_or_else(|| Error::parse(line_no, "edge line needs two endpoints"))?;
                    let b: usize = b_tok.parse().map_err(|_| {
                        Error::parse(line_no, format!("bad edge endpoint `{b_tok}`"))
                    })?;
                    if a == 0 || b == 0 {
                        return Err(Error::parse(line_no, "indices are 1-based"));
                    }
                    edges.push((a - 1, b - 1));
                }
            }
        }
        let n = n.ok_or_else(|| Error::parse(0, "missing `n <count>` header"))?;
        let independent =
            independent.ok_or_else(|| Error::parse(0, "missing `independent` line"))?;
        Self::new(n, edges, independent)
    }
}

/// Greedy maximal independent set by ascending item index.
pub fn greedy_independent_set(n: usize, edges: &[Pair]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut chosen = vec![false; n];
    let mut blocked = vec![false; n];
    for v in 0..n {
        if !blocked[v] {
            chosen[v] = true;
            for &u in &adj[v] {
                blocked[u] = true;
            }
        }
    }
    (0..n).filter(|&v| chosen[v]).collect()
}

/// Uniform pairing-model construction of a simple d-regular graph, rejecting
/// multigraphs; gives up after 1000 attempts.
fn pairing_model(n: usize, d: usize, seed: u64) -> Result<Vec<Pair>> {
    if d == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    'attempt: for _ in 0..1000 {
        stubs.shuffle(&mut rng);
        let mut seen = BTreeSet::new();
        for chunk in stubs.chunks_exact(2) {
            let (a, b) = (chunk[0], chunk[1]);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue 'attempt;
            }
        }
        return Ok(seen.into_iter().collect());
    }
    Err(Error::invalid(format!(
        "pairing model failed to produce a simple {d}-regular graph on {n} nodes after 1000 attempts"
    )))
}

/// Height of the full k-ary tree with exactly `n` nodes, if `n` is a full
/// tree size.
fn full_tree_height(n: usize, k: usize) -> Option<usize> {
    let mut total: usize = 1;
    let mut level: usize = 1;
    let mut height = 0usize;
    loop {
        if total == n {
            return Some(height);
        }
        if total > n {
            return None;
        }
        level = level.checked_mul(k)?;
        total = total.checked_add(level)?;
        height += 1;
    }
}

/// Depth of node `v` in the 0-based k-ary heap layout (children of `v` are
/// `k*v + 1 ..= k*v + k`).
fn node_depth(mut v: usize, k: usize) -> usize {
    let mut depth = 0;
    while v > 0 {
        v = (v - 1) / k;
        depth += 1;
    }
    depth
}

/// For every independent node `k`, the set `M_k` of candidate pairs (over all
/// unordered pairs) whose closed neighborhood reaches `k`: a pair `(i, j)`
/// belongs to `M_k` iff `k` lies in the closed neighborhood of `i` or of `j`.
#[derive(Clone, Debug)]
pub struct EdgeCoverSets {
    n: usize,
    basis: Vec<usize>,
    sets: Vec<Vec<u32>>,
}

impl EdgeCoverSets {
    pub fn from_graph(g: &RelationGraph) -> Self {
        let n = g.n();
        let basis = g.independent_set().to_vec();
        let mut position = vec![usize::MAX; n];
        for (pos, &item) in basis.iter().enumerate() {
            position[item] = pos;
        }
        // Per-node closed independent neighborhood expressed in basis positions.
        let reach: Vec<Vec<usize>> = (0..n)
            .map(|v| {
                g.closed_independent_neighborhood(v)
                    .into_iter()
                    .map(|item| position[item])
                    .collect()
            })
            .collect();
        let mut sets = vec![Vec::new(); basis.len()];
        let mut rank = 0u32;
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                touched.clear();
                touched.extend_from_slice(&reach[i]);
                touched.extend_from_slice(&reach[j]);
                touched.sort_unstable();
                touched.dedup();
                for &pos in &touched {
                    sets[pos].push(rank);
                }
                rank += 1;
            }
        }
        Self { n, basis, sets }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Independent-set items, ascending; positions index into the sets.
    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    /// `M_k` for an independent item, as lexicographic pair ranks.
    pub fn pairs_for(&self, item: usize) -> Result<&[u32]> {
        let pos = self
            .basis
            .binary_search(&item)
            .map_err(|_| Error::NotInIndependentSet(item))?;
        Ok(&self.sets[pos])
    }

    /// `n_k = |M_k|`.
    pub fn set_size(&self, item: usize) -> Result<usize> {
        Ok(self.pairs_for(item)?.len())
    }

    /// `M_k` by basis position (0..alpha).
    pub fn pairs_at(&self, pos: usize) -> &[u32] {
        &self.sets[pos]
    }

    /// Union and intersection sizes `(c_I, d_I)` of the `M_k` over the given
    /// independent items.
    pub fn overlap(&self, items: &[usize]) -> Result<(usize, usize)> {
        if items.is_empty() {
            return Err(Error::invalid("overlap needs a nonempty subset"));
        }
        let mut sets = Vec::with_capacity(items.len());
        for &item in items {
            sets.push(self.pairs_for(item)?);
        }
        Ok((union_size(&sets), intersection_size(&sets)))
    }
}

fn union_size(sets: &[&[u32]]) -> usize {
    let mut merged: Vec<u32> = sets.iter().flat_map(|s| s.iter().copied()).collect();
    merged.sort_unstable();
    merged.dedup();
    merged.len()
}

fn intersection_size(sets: &[&[u32]]) -> usize {
    let mut current: Vec<u32> = sets[0].to_vec();
    for s in &sets[1..] {
        let mut next = Vec::with_capacity(current.len().min(s.len()));
        let (mut a, mut b) = (0, 0);
        while a < current.len() && b < s.len() {
            match current[a].cmp(&s[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    next.push(current[a]);
                    a += 1;
                    b += 1;
                }
            }
        }
        current = next;
        if current.is_empty() {
            break;
        }
    }
    current.len()
}
