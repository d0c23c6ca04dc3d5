//! Graph and label containers, block count statistics, confusion matrices,
//! and the preprocessing steps applied to raw weighted networks.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How edge entries are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    /// 0/1 adjacency, used by the Bernoulli block model.
    Binary,
    /// Nonnegative integer multiplicities, used by the Poisson degree-corrected model.
    Counts,
}

/// Undirected graph without self-loops, stored as sorted neighbor lists.
///
/// The adjacency is symmetric by construction: every stored entry `(j, w)` in
/// the list of `i` has a twin `(i, w)` in the list of `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    mode: EdgeMode,
    adjacency: Vec<Vec<(usize, u32)>>,
}

/// What happened while normalizing raw edges into a [`Graph`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub self_loops_dropped: usize,
    /// Repeated unordered pairs, collapsed in binary mode and summed in counts mode.
    pub duplicates: usize,
    pub zero_weight_skipped: usize,
}

impl Graph {
    pub fn empty(n: usize, mode: EdgeMode) -> Self {
        Graph {
            mode,
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from undirected 0-based edges `(i, j, weight)`.
    ///
    /// Self-loops are dropped, repeated pairs are collapsed (binary) or summed
    /// (counts). Either orientation of a pair counts as the same edge.
    pub fn from_edges<I>(n: usize, mode: EdgeMode, edges: I) -> Result<(Self, BuildReport)>
    where
        I: IntoIterator<Item = (usize, usize, u32)>,
    {
        let mut report = BuildReport::default();
        let mut pairs: Vec<(usize, usize, u32)> = Vec::new();
        for (i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) references a node outside 0..{n}"
                )));
            }
            if i == j {
                report.self_loops_dropped += 1;
                continue;
            }
            if w == 0 {
                report.zero_weight_skipped += 1;
                continue;
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            pairs.push((a, b, w));
        }
        pairs.sort_unstable_by_key(|&(a, b, _)| (a, b));

        let mut merged: Vec<(usize, usize, u32)> = Vec::with_capacity(pairs.len());
        for (a, b, w) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == a && last.1 == b => {
                    report.duplicates += 1;
                    match mode {
                        EdgeMode::Binary => last.2 = 1,
                        EdgeMode::Counts => {
                            last.2 = last.2.checked_add(w).ok_or_else(|| {
                                Error::InvalidInput(format!("edge weight overflow at ({a}, {b})"))
                            })?
                        }
                    }
                }
                _ => merged.push((
                    a,
                    b,
                    match mode {
                        EdgeMode::Binary => 1,
                        EdgeMode::Counts => w,
                    },
                )),
            }
        }

        let mut adjacency = vec![Vec::new(); n];
        for (a, b, w) in merged {
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok((Graph { mode, adjacency }, report))
    }

    /// Builds a graph from a dense square matrix, validating symmetry, a zero
    /// diagonal, and (in binary mode) 0/1 entries.
    pub fn from_dense(entries: &DMatrix<u32>, mode: EdgeMode) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "adjacency must be square, got {}x{}",
                n,
                entries.ncols()
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            if entries[(i, i)] != 0 {
                return Err(Error::InvalidInput(format!("self-loop at node {}", i + 1)));
            }
            for j in 0..n {
                let w = entries[(i, j)];
                if w != entries[(j, i)] {
                    return Err(Error::InvalidInput(format!(
                        "adjacency not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if mode == EdgeMode::Binary && w > 1 {
                    return Err(Error::InvalidInput(format!(
                        "binary adjacency has entry {w} at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
                if w > 0 {
                    adjacency[i].push((j, w));
                }
            }
        }
        Ok(Graph { mode, adjacency })
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn mode(&self) -> EdgeMode {
        self.mode
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, u32)] {
        &self.adjacency[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> u32 {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(v, _)| v)
            .map(|pos| self.adjacency[i][pos].1)
            .unwrap_or(0)
    }

    /// Iterates over unordered pairs `i < j` with nonzero weight.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| j > i)
                .map(move |&(j, w)| (i, j, w))
        })
    }

    /// Sum of weights over unordered pairs.
    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| w as u64).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut dense = DMatrix::zeros(n, n);
        for (i, list) in self.adjacency.iter().enumerate() {
            for &(j, w) in list {
                dense[(i, j)] = w as f64;
            }
        }
        dense
    }

    /// Binarizes a counts graph via `A > 0`.
    pub fn binarized(&self) -> Graph {
        Graph {
            mode: EdgeMode::Binary,
            adjacency: self
                .adjacency
                .iter()
                .map(|list| list.iter().map(|&(j, _)| (j, 1)).collect())
                .collect(),
        }
    }

    /// Reinterprets the entries as counts; binary graphs are valid count graphs.
    pub fn as_counts(&self) -> Graph {
        Graph {
            mode: EdgeMode::Counts,
            adjacency: self.adjacency.clone(),
        }
    }

    /// Subgraph induced by `nodes`, relabeled in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Graph {
        let mut position = vec![usize::MAX; self.n()];
        for (new, &old) in nodes.iter().enumerate() {
            position[old] = new;
        }
        let adjacency = nodes
            .iter()
            .map(|&old| {
                let mut list: Vec<(usize, u32)> = self.adjacency[old]
                    .iter()
                    .filter(|&&(j, _)| position[j] != usize::MAX)
                    .map(|&(j, w)| (position[j], w))
                    .collect();
                list.sort_unstable_by_key(|&(j, _)| j);
                list
            })
            .collect();
        Graph {
            mode: self.mode,
            adjacency,
        }
    }
}

/// Community labels, 0-based internally; files and reports use 1-based labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    labels: Vec<usize>,
    k: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("block count must be at least 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidInput(format!(
                "label {} exceeds block count {k}",
                bad + 1
            )));
        }
        Ok(Assignment { labels, k })
    }

    /// Parses 1-based labels; `k` is the largest label.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::InvalidInput("labels are 1-based; found 0".into()));
        }
        let k = labels.iter().copied().max().unwrap_or(1);
        Assignment::new(labels.iter().map(|&l| l - 1).collect(), k)
    }

    pub fn constant(n: usize) -> Self {
        Assignment {
            labels: vec![0; n],
            k: 1,
        }
    }

    /// Contiguous blocks of the given sizes, in order.
    pub fn from_block_sizes(sizes: &[usize]) -> Self {
        let labels = sizes
            .iter()
            .enumerate()
            .flat_map(|(a, &s)| std::iter::repeat_n(a, s))
            .collect();
        Assignment {
            labels,
            k: sizes.len().max(1),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|&l| l + 1).collect()
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn empty_blocks(&self) -> usize {
        self.block_sizes().iter().filter(|&&s| s == 0).count()
    }

    pub(crate) fn set(&mut self, i: usize, label: usize) {
        debug_assert!(label < self.k);
        self.labels[i] = label;
    }

    /// Relabels blocks by order of first appearance. Empty blocks keep the
    /// highest indices, so `k` is unchanged.
    pub fn canonical(&self) -> Assignment {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Assignment { labels, k: self.k }
    }

    /// True when both assignments induce the same partition of the nodes.
    pub fn same_partition(&self, other: &Assignment) -> bool {
        self.len() == other.len() && self.canonical().labels == other.canonical().labels
    }
}

impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.labels.iter().map(|&l| l + 1))
    }
}

/// Block sufficient statistics of a (graph, assignment) pair.
///
/// `n_pair` and `m_pair` are ordered-pair sums: within-block entries count
/// every unordered pair twice.
#[derive(Debug, Clone, PartialEq)]
pub struct CountStats {
    pub n_block: Vec<usize>,
    pub n_pair: DMatrix<f64>,
    pub m_pair: DMatrix<f64>,
}

impl CountStats {
    pub fn k(&self) -> usize {
        self.n_block.len()
    }

    pub fn n(&self) -> usize {
        self.n_block.iter().sum()
    }

    /// Builds the statistics directly from block sizes and the ordered-pair
    /// edge sums.
    pub fn from_parts(n_block: Vec<usize>, m_pair: DMatrix<f64>) -> Self {
        let n_pair = pair_counts(&n_block);
        CountStats {
            n_block,
            n_pair,
            m_pair,
        }
    }
}

/// Ordered-pair counts: `n_a (n_a - 1)` on the diagonal and `n_a n_b` off it.
pub fn pair_counts(n_block: &[usize]) -> DMatrix<f64> {
    let k = n_block.len();
    DMatrix::from_fn(k, k, |a, b| {
        let na = n_block[a] as f64;
        if a == b {
            na * (na - 1.0)
        } else {
            na * n_block[b] as f64
        }
    })
}

pub fn count_stats(g: &Graph, z: &Assignment) -> Result<CountStats> {
    if z.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: z.len(),
        });
    }
    let k = z.k();
    let mut m_pair = DMatrix::zeros(k, k);
    for i in 0..g.n() {
        let a = z.label(i);
        for &(j, w) in g.neighbors(i) {
            m_pair[(a, z.label(j))] += w as f64;
        }
    }
    Ok(CountStats::from_parts(z.block_sizes(), m_pair))
}

/// Joint label proportions `R[a][b] = #{i : z_hat_i = a, z_true_i = b} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix(pub DMatrix<f64>);

impl ConfusionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub fn confusion(z_hat: &Assignment, z_true: &Assignment) -> Result<ConfusionMatrix> {
    if z_hat.len() != z_true.len() {
        return Err(Error::LengthMismatch {
            expected: z_true.len(),
            got: z_hat.len(),
        });
    }
    let n = z_hat.len();
    let mut r = DMatrix::zeros(z_hat.k(), z_true.k());
    if n == 0 {
        return Ok(ConfusionMatrix(r));
    }
    let unit = 1.0 / n as f64;
    for (&a, &b) in z_hat.labels().iter().zip(z_true.labels()) {
        r[(a, b)] += unit;
    }
    Ok(ConfusionMatrix(r))
}

pub fn degrees(g: &Graph) -> Vec<f64> {
    (0..g.n())
        .map(|i| g.neighbors(i).iter().map(|&(_, w)| w as f64).sum())
        .collect()
}

fn check_square_symmetric(w: &DMatrix<f64>) -> Result<()> {
    let n = w.nrows();
    if w.ncols() != n {
        return Err(Error::InvalidInput(format!(
            "weight matrix must be square, got {}x{}",
            n,
            w.ncols()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[(i, j)] != w[(j, i)] {
                return Err(Error::InvalidInput(format!(
                    "weight matrix not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

/// The threshold value `W_alpha` used by [`threshold_quantile`]: the
/// `ceil(alpha * M)`-th smallest of the `M` strict upper-triangle entries.
pub fn upper_quantile(w: &DMatrix<f64>, alpha: f64) -> Result<f64> {
    check_square_symmetric(w)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("quantile level {alpha} outside (0, 1)")));
    }
    let n = w.nrows();
    let mut upper: Vec<f64> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| w[(i, j)])
        .collect();
    if upper.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if upper.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("weight matrix contains NaN".into()));
    }
    upper.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered"));
    let rank = ((alpha * upper.len() as f64).ceil() as usize).clamp(1, upper.len());
    Ok(upper[rank - 1])
}

/// Binary graph with `A_ij = 1` iff `W_ij >= W_alpha`, diagonal forced to zero.
pub fn threshold_quantile(w: &DMatrix<f64>, alpha: f64) -> Result<Graph> {
    let cut = upper_quantile(w, alpha)?;
    let n = w.nrows();
    let edges = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| w[(i, j)] >= cut)
        .map(|(i, j)| (i, j, 1));
    Graph::from_edges(n, EdgeMode::Binary, edges).map(|(g, _)| g)
}

/// `W_ij = T_ij + T_ji` for a directed weight matrix `T`.
pub fn symmetrize_trade(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if t.nrows() != t.ncols() {
        return Err(Error::InvalidInput(format!(
            "trade matrix must be square, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(t + t.transpose())
}

/// Largest connected component plus the map between old and new indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub graph: Graph,
    /// `new_to_old[new] = old`, increasing.
    pub new_to_old: Vec<usize>,
    /// `old_to_new[old]` is `None` for nodes outside the component.
    pub old_to_new: Vec<Option<usize>>,
}

/// Connected components as sorted node lists, ordered by smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.n();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut members = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in g.neighbors(v) {
                if !seen[u] {
                    seen[u] = true;
                    members.push(u);
                    queue.push_back(u);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

/// Ties in size go to the component holding the smallest node index.
pub fn largest_connected_component(g: &Graph) -> Result<Component> {
    if g.n() == 0 {
        return Err(Error::EmptyGraph);
    }
    let components = connected_components(g);
    let mut best = &components[0];
    for c in &components[1..] {
        if c.len() > best.len() {
            best = c;
        }
    }
    let mut old_to_new = vec![None; g.n()];
    for (new, &old) in best.iter().enumerate() {
        old_to_new[old] = Some(new);
    }
    Ok(Component {
        graph: g.induced(best),
        new_to_old: best.clone(),
        old_to_new,
    })
}
