//! Label estimation: normalized-Laplacian spectral clustering, SCORE,
//! k-means, and a greedy profile-likelihood refiner.

mod eigen;
mod kmeans;
mod refine;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{degrees, Assignment, Graph};

pub use eigen::{top_eigenpairs, EigenPairs};
pub use kmeans::{kmeans, KMeansConfig, KMeansResult};
pub use refine::{exhaustive_max_profile, refine_labels, Refinement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Spectral,
    Score,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::Score => "score",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingKind {
    LaplacianU,
    ScoreV,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: DMatrix<f64>,
    pub kind: EmbeddingKind,
    /// SCORE ratio entries clipped to `[-log n, log n]`.
    pub clamped: usize,
}

/// `D^{-1/2} A D^{-1/2}`; isolated nodes give zero rows and columns.
pub fn normalized_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n();
    let scale: Vec<f64> = degrees(g)
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        for &(j, w) in g.neighbors(i) {
            l[(i, j)] = w as f64 * scale[i] * scale[j];
        }
    }
    l
}

fn laplacian_embedding(eig: &EigenPairs, k: usize) -> EmbeddingMatrix {
    EmbeddingMatrix {
        rows: eig.vectors.columns(0, k).into_owned(),
        kind: EmbeddingKind::LaplacianU,
        clamped: 0,
    }
}

/// `V = (1, v_2 / v_1, ..., v_k / v_1)` with ratios clipped to `+-log n`.
fn score_embedding(eig: &EigenPairs, k: usize) -> EmbeddingMatrix {
    let n = eig.vectors.nrows();
    let bound = (n as f64).ln().max(0.0);
    let v1 = eig.vectors.column(0);
    // orient the leading vector so its entries are mostly positive
    let sign = if v1.sum() < 0.0 { -1.0 } else { 1.0 };
    let mut clamped = 0;
    let rows = DMatrix::from_fn(n, k, |i, j| {
        if j == 0 {
            return 1.0;
        }
        let num = eig.vectors[(i, j)];
        let den = sign * v1[i];
        let ratio = if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                num.signum() * f64::INFINITY
            }
        } else {
            num / den
        };
        if ratio.abs() > bound {
            clamped += 1;
            ratio.signum() * bound
        } else {
            ratio
        }
    });
    EmbeddingMatrix {
        rows,
        kind: EmbeddingKind::ScoreV,
        clamped,
    }
}

/// Labels from one clustering run plus the diagnostics worth reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub assignment: Assignment,
    /// Zero-degree nodes, placed by nearest centroid after clustering.
    pub isolated: Vec<usize>,
    pub clamped: usize,
    pub degenerate: bool,
}

/// Eigenpairs for one graph and method, computed once and reused across
/// candidate block counts.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    method: Method,
    eig: EigenPairs,
    isolated: Vec<usize>,
    n: usize,
}

impl SpectralBasis {
    pub fn new(g: &Graph, method: Method, k_max: usize) -> Result<Self> {
        let n = g.n();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if k_max == 0 || k_max > n {
            return Err(Error::InvalidInput(format!("k = {k_max} exceeds n = {n}")));
        }
        let m = match method {
            Method::Spectral => normalized_laplacian(g),
            Method::Score => g.to_dense(),
        };
        let eig = top_eigenpairs(&m, k_max)?;
        let isolated = degrees(g)
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(SpectralBasis { method, eig, isolated, n })
    }

    pub fn eigenpairs(&self) -> &EigenPairs {
        &self.eig
    }

    pub fn embedding(&self, k: usize) -> Result<EmbeddingMatrix> {
        if k == 0 || k > self.eig.k() {
            return Err(Error::InvalidInput(format!(
                "embedding of dimension {k} from {} eigenpairs",
                self.eig.k()
            )));
        }
        Ok(match self.method {
            Method::Spectral => laplacian_embedding(&self.eig, k),
            Method::Score => score_embedding(&self.eig, k),
        })
    }

    pub fn cluster(&self, k: usize, cfg: &KMeansConfig) -> Result<Clustering> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidInput(format!("k = {k} exceeds n = {}", self.n)));
        }
        if k == 1 {
            return Ok(Clustering {
                assignment: Assignment::constant(self.n),
                isolated: self.isolated.clone(),
                clamped: 0,
                degenerate: false,
            });
        }
        let emb = self.embedding(k)?;
        let active: Vec<usize> = (0..self.n).filter(|i| self.isolated.binary_search(i).is_err()).collect();
        if active.len() < k {
            return Err(Error::Degenerate(format!(
                "{} connected nodes cannot fill {k} clusters",
                active.len()
            )));
        }
        let sub = DMatrix::from_fn(active.len(), k, |r, c| emb.rows[(active[r], c)]);
        let res = kmeans(&sub, k, cfg)?;
        let mut labels = vec![0; self.n];
        for (r, &i) in active.iter().enumerate() {
            labels[i] = res.assignment.label(r);
        }
        for &i in &self.isolated {
            let mut best = (0, f64::INFINITY);
            for a in 0..k {
                let d = (emb.rows.row(i) - res.centroids.row(a)).norm_squared();
                if d < best.1 {
                    best = (a, d);
                }
            }
            labels[i] = best.0;
        }
        Ok(Clustering {
            assignment: Assignment::new(labels, k)?.canonical(),
            isolated: self.isolated.clone(),
            clamped: emb.clamped,
            degenerate: res.degenerate,
        })
    }
}

/// k-means on the leading `k` eigenvectors of the normalized Laplacian.
pub fn spectral_clustering(g: &Graph, k: usize, cfg: &KMeansConfig) -> Result<Clustering> {
    SpectralBasis::new(g, Method::Spectral, k.min(g.n()).max(1))?.cluster(k, cfg)
}

/// SCORE: k-means on entrywise ratios of the leading adjacency eigenvectors.
pub fn score(g: &Graph, k: usize, cfg: &KMeansConfig) -> Result<Clustering> {
    SpectralBasis::new(g, Method::Score, k.min(g.n()).max(1))?.cluster(k, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeMode;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn clique_pair(size: usize) -> Graph {
        let mut edges = Vec::new();
        for block in 0..2 {
            let base = block * size;
            for i in 0..size {
                for j in (i + 1)..size {
                    edges.push((base + i, base + j, 1));
                }
            }
        }
        Graph::from_edges(2 * size, EdgeMode::Binary, edges).unwrap().0
    }

    fn planted(sizes: &[usize], p: f64, q: f64, seed: u64) -> (Graph, Assignment) {
        let z = Assignment::from_block_sizes(sizes);
        let n = z.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let t = if z.label(i) == z.label(j) { p } else { q };
                if rng.random::<f64>() < t {
                    edges.push((i, j, 1));
                }
            }
        }
        (Graph::from_edges(n, EdgeMode::Binary, edges).unwrap().0, z)
    }

    #[test]
    fn laplacian_examples() {
        let (edge, _) = Graph::from_edges(2, EdgeMode::Binary, [(0, 1, 1)]).unwrap();
        assert_eq!(normalized_laplacian(&edge), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));

        // 6-cycle: 2-regular
        let (ring, _) = Graph::from_edges(6, EdgeMode::Binary, (0..6).map(|i| (i, (i + 1) % 6, 1))).unwrap();
        let l = normalized_laplacian(&ring);
        assert!((l - ring.to_dense() / 2.0).amax() < 1e-15);
    }

    #[test]
    fn laplacian_entrywise_oracle() {
        let (g, _) = planted(&[6, 6], 0.5, 0.2, 3);
        let l = normalized_laplacian(&g);
        let d = degrees(&g);
        for i in 0..12 {
            for j in 0..12 {
                let expected = if d[i] > 0.0 && d[j] > 0.0 {
                    g.entry(i, j) as f64 / (d[i] * d[j]).sqrt()
                } else {
                    0.0
                };
                assert!((l[(i, j)] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn disjoint_cliques_recovered() {
        let g = clique_pair(5);
        let truth = Assignment::from_block_sizes(&[5, 5]);
        for c in [
            spectral_clustering(&g, 2, &KMeansConfig::default()).unwrap(),
            score(&g, 2, &KMeansConfig::default()).unwrap(),
        ] {
            assert!(c.assignment.same_partition(&truth));
        }
    }

    #[test]
    fn single_cluster() {
        let (g, _) = planted(&[10], 0.3, 0.3, 4);
        assert!(spectral_clustering(&g, 1, &KMeansConfig::default())
            .unwrap()
            .assignment
            .labels()
            .iter()
            .all(|&l| l == 0));
        assert!(score(&g, 1, &KMeansConfig::default()).unwrap().assignment.labels().iter().all(|&l| l == 0));
        assert!(spectral_clustering(&g, 11, &KMeansConfig::default()).is_err());
    }

    #[test]
    fn isolated_nodes_are_flagged() {
        let mut edges: Vec<_> = clique_pair(4).edges().collect();
        edges.push((0, 4, 1));
        let (g, _) = Graph::from_edges(10, EdgeMode::Binary, edges).unwrap();
        let c = spectral_clustering(&g, 2, &KMeansConfig::default()).unwrap();
        assert_eq!(c.isolated, vec![8, 9]);
        assert_eq!(c.assignment.len(), 10);
    }

    #[test]
    fn score_first_column_is_one_and_ratios_bounded() {
        let (g, _) = planted(&[20, 20], 0.5, 0.05, 5);
        let basis = SpectralBasis::new(&g, Method::Score, 3).unwrap();
        let emb = basis.embedding(3).unwrap();
        let bound = 40f64.ln();
        for i in 0..40 {
            assert_eq!(emb.rows[(i, 0)], 1.0);
            assert!(emb.rows[(i, 1)].abs() <= bound && emb.rows[(i, 2)].abs() <= bound);
        }
    }

    #[test]
    fn planted_partition_agreement() {
        let (g, truth) = planted(&[30, 40, 50], 0.4, 0.03, 6);
        let cfg = KMeansConfig::with_seed(1);
        let a = spectral_clustering(&g, 3, &cfg).unwrap().assignment;
        let b = score(&g, 3, &cfg).unwrap().assignment;
        assert!(a.same_partition(&truth));
        assert!(b.same_partition(&a));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn permutation_covariant(seed in any::<u64>()) {
            let (g, _) = planted(&[15, 15], 0.6, 0.05, seed);
            let n = g.n();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 77);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            // node i of g becomes node perm[i] of h
            let h = Graph::from_edges(n, EdgeMode::Binary, g.edges().map(|(i, j, w)| (perm[i], perm[j], w))).unwrap().0;
            let cfg = KMeansConfig::with_seed(3);
            let zg = spectral_clustering(&g, 2, &cfg).unwrap().assignment;
            let zh = spectral_clustering(&h, 2, &cfg).unwrap().assignment;
            let mapped = Assignment::new((0..n).map(|i| zh.label(perm[i])).collect(), 2).unwrap();
            prop_assert!(zg.same_partition(&mapped));
        }
    }
}
