use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Assignment;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            restarts: 20,
            max_iter: 100,
            seed: 0,
        }
    }
}

impl KMeansConfig {
    pub fn with_seed(seed: u64) -> Self {
        KMeansConfig {
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Labels relabeled by first appearance.
    pub assignment: Assignment,
    /// `k x d`, row `a` is the centroid of block `a`.
    pub centroids: DMatrix<f64>,
    pub wcss: f64,
    /// Fewer distinct rows than clusters, or an empty cluster in the result.
    pub degenerate: bool,
}

struct Points {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Points {
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

fn dist2(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: Vec<f64>,
    wcss: f64,
    degenerate: bool,
}

fn seed_centroids(p: &Points, k: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, bool) {
    let d = p.d;
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..p.n);
    centroids.extend_from_slice(p.row(first));
    let mut nearest: Vec<f64> = (0..p.n).map(|i| dist2(p.row(i), p.row(first))).collect();
    let mut degenerate = false;
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = p.n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            degenerate = true;
            rng.random_range(0..p.n)
        };
        centroids.extend_from_slice(p.row(pick));
        for (i, slot) in nearest.iter_mut().enumerate() {
            *slot = slot.min(dist2(p.row(i), p.row(pick)));
        }
    }
    (centroids, degenerate)
}

fn nearest_centroid(x: &[f64], centroids: &[f64], d: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (a, c) in centroids.chunks(d).enumerate() {
        let v = dist2(x, c);
        if v < best.1 {
            best = (a, v);
        }
    }
    best
}

fn lloyd(p: &Points, k: usize, max_iter: usize, mut centroids: Vec<f64>, mut degenerate: bool) -> Run {
    let d = p.d;
    let mut labels = vec![usize::MAX; p.n];
    let mut dist = vec![0.0; p.n];
    for _ in 0..max_iter {
        let mut changed = false;
        for i in 0..p.n {
            let (a, v) = nearest_centroid(p.row(i), &centroids, d);
            dist[i] = v;
            if labels[i] != a {
                labels[i] = a;
                changed = true;
            }
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        // refill empty clusters with the worst-fitted point of a shared cluster
        for a in 0..k {
            if sizes[a] > 0 {
                continue;
            }
            let donor = (0..p.n)
                .filter(|&i| sizes[labels[i]] > 1)
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if dist[b] >= dist[i] => Some(b),
                    _ => Some(i),
                });
            match donor {
                Some(i) if dist[i] > 0.0 => {
                    sizes[labels[i]] -= 1;
                    labels[i] = a;
                    sizes[a] = 1;
                    dist[i] = 0.0;
                    changed = true;
                }
                _ => degenerate = true,
            }
        }
        let mut sums = vec![0.0; k * d];
        for i in 0..p.n {
            let l = labels[i];
            for (s, x) in sums[l * d..(l + 1) * d].iter_mut().zip(p.row(i)) {
                *s += x;
            }
        }
        for a in 0..k {
            if sizes[a] > 0 {
                for t in 0..d {
                    centroids[a * d + t] = sums[a * d + t] / sizes[a] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for i in 0..p.n {
        let (a, _) = nearest_centroid(p.row(i), &centroids, d);
        labels[i] = a;
    }
    let wcss = (0..p.n)
        .map(|i| dist2(p.row(i), &centroids[labels[i] * d..(labels[i] + 1) * d]))
        .sum();
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    if sizes.contains(&0) {
        degenerate = true;
    }
    Run {
        labels,
        centroids,
        wcss,
        degenerate,
    }
}

/// k-means on the rows of `rows`: k-means++ seeding, Lloyd iterations, best
/// of `cfg.restarts` runs by within-cluster sum of squares. Distance ties go
/// to the lowest centroid index.
pub fn kmeans(rows: &DMatrix<f64>, k: usize, cfg: &KMeansConfig) -> Result<KMeansResult> {
    let n = rows.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("k = {k} clusters for {n} rows")));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("k-means input contains non-finite values".into()));
    }
    let d = rows.ncols();
    let points = Points {
        data: (0..n).flat_map(|i| rows.row(i).iter().copied().collect::<Vec<_>>()).collect(),
        n,
        d,
    };
    let mut rng = seeding::rng(cfg.seed);
    let mut best: Option<Run> = None;
    for _ in 0..cfg.restarts.max(1) {
        let (init, degenerate) = seed_centroids(&points, k, &mut rng);
        let run = lloyd(&points, k, cfg.max_iter.max(1), init, degenerate);
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");

    let raw = Assignment::new(best.labels.clone(), k)?;
    let canonical = raw.canonical();
    let mut order = vec![usize::MAX; k];
    for (old, new) in raw.labels().iter().zip(canonical.labels()) {
        order[*new] = *old;
    }
    // empty clusters keep the remaining centroid slots in index order
    let unused: Vec<usize> = (0..k).filter(|a| !order.contains(a)).collect();
    let mut unused = unused.into_iter();
    for slot in order.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = unused.next().expect("slots match clusters");
    }
    let centroids = DMatrix::from_fn(k, d, |a, t| best.centroids[order[a] * d + t]);
    Ok(KMeansResult {
        assignment: canonical,
        centroids,
        wcss: best.wcss,
        degenerate: best.degenerate,
    })
}
