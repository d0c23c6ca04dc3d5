//! Bernoulli stochastic block model: likelihoods, MLEs, the block merge
//! construction, and the asymptotic reference quantities for underfitted,
//! exactly fitted and overfitted models.
//!
//! Convention: every log-likelihood is the halved sum over *ordered* block
//! pairs, `1/2 * sum_{a,b} [m_ab log t_ab + (n_ab - m_ab) log(1 - t_ab)]`,
//! which equals the sum of Bernoulli log-pmfs over unordered node pairs.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Assignment, ConfusionMatrix, CountStats};

const SIMPLEX_TOL: f64 = 1e-9;
const ROUNDING_TOL: f64 = 1e-12;

/// `x log x + (1 - x) log(1 - x)` with `0 log 0 = 0`.
pub fn gamma(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("gamma argument {x} outside [0, 1]")));
    }
    Ok(xlogx(x) + xlogx(1.0 - x))
}

/// [`gamma`] for ratios that may overshoot [0, 1] by rounding only.
fn gamma_rounded(x: f64) -> Result<f64> {
    if x > 1.0 && x <= 1.0 + ROUNDING_TOL {
        return gamma(1.0);
    }
    if (-ROUNDING_TOL..0.0).contains(&x) {
        return gamma(0.0);
    }
    gamma(x)
}

pub(crate) fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// `x log y`, treating `0 log 0` as 0 and refusing `x > 0` with `y = 0`.
fn xlogy(x: f64, y: f64, what: &str) -> Result<f64> {
    if x == 0.0 {
        Ok(0.0)
    } else if y <= 0.0 {
        Err(Error::Degenerate(format!(
            "{what}: log of {y} with positive count {x}"
        )))
    } else {
        Ok(x * y.ln())
    }
}

/// Block probability matrix and block proportions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SbmParams {
    #[serde(serialize_with = "crate::rows::serialize")]
    pub theta: DMatrix<f64>,
    pub proportions: Vec<f64>,
}

impl SbmParams {
    pub fn new(theta: DMatrix<f64>, proportions: Vec<f64>) -> Result<Self> {
        let k = theta.nrows();
        if theta.ncols() != k || proportions.len() != k {
            return Err(Error::InvalidInput(format!(
                "theta is {}x{} but {} proportions given",
                k,
                theta.ncols(),
                proportions.len()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let t = theta[(a, b)];
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Domain(format!("theta[{a}][{b}] = {t} outside [0, 1]")));
                }
                if t != theta[(b, a)] {
                    return Err(Error::InvalidInput(format!("theta not symmetric at ({a}, {b})")));
                }
            }
        }
        if proportions.iter().any(|&p| p < 0.0) || (proportions.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput("proportions must lie on the simplex".into()));
        }
        Ok(SbmParams { theta, proportions })
    }

    /// Parameters with proportions taken from block sizes.
    pub fn with_sizes(theta: DMatrix<f64>, sizes: &[usize]) -> Result<Self> {
        let n: usize = sizes.iter().sum();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        SbmParams::new(theta, sizes.iter().map(|&s| s as f64 / n as f64).collect())
    }

    pub fn k(&self) -> usize {
        self.theta.nrows()
    }
}

fn check_dims(cs: &CountStats, theta: &DMatrix<f64>) -> Result<()> {
    if theta.nrows() != cs.k() || theta.ncols() != cs.k() {
        return Err(Error::InvalidInput(format!(
            "theta is {}x{} but counts have {} blocks",
            theta.nrows(),
            theta.ncols(),
            cs.k()
        )));
    }
    Ok(())
}

pub fn log_likelihood(cs: &CountStats, params: &SbmParams) -> Result<f64> {
    check_dims(cs, &params.theta)?;
    let k = cs.k();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            let t = params.theta[(a, b)];
            let m = cs.m_pair[(a, b)];
            let nn = cs.n_pair[(a, b)];
            let what = format!("block pair ({}, {})", a + 1, b + 1);
            total += xlogy(m, t, &what)? + xlogy(nn - m, 1.0 - t, &what)?;
        }
    }
    Ok(0.5 * total)
}

/// Maximum likelihood block probabilities `m_ab / n_ab`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaEstimate {
    /// Undefined entries (empty block pairs) are stored as 0.
    pub params: SbmParams,
    /// Block pairs `a <= b` with `n_ab = 0`.
    pub undefined: Vec<(usize, usize)>,
}

pub fn mle_theta(cs: &CountStats) -> Result<ThetaEstimate> {
    let k = cs.k();
    let n = cs.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut undefined = Vec::new();
    let mut theta = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let nn = cs.n_pair[(a, b)];
            if nn == 0.0 {
                undefined.push((a, b));
                continue;
            }
            let t = cs.m_pair[(a, b)] / nn;
            if t > 1.0 {
                return Err(Error::Domain(format!(
                    "edge count exceeds pair count in block pair ({}, {}); binary graph required",
                    a + 1,
                    b + 1
                )));
            }
            theta[(a, b)] = t;
            theta[(b, a)] = t;
        }
    }
    let proportions = cs.n_block.iter().map(|&s| s as f64 / n as f64).collect();
    Ok(ThetaEstimate {
        params: SbmParams { theta, proportions },
        undefined,
    })
}

/// Log-likelihood at the MLE, `1/2 * sum_{a,b} n_ab * gamma(m_ab / n_ab)`.
pub fn profile_log_likelihood(cs: &CountStats) -> Result<f64> {
    let k = cs.k();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            let nn = cs.n_pair[(a, b)];
            if nn > 0.0 {
                total += nn * gamma(cs.m_pair[(a, b)] / nn)?;
            }
        }
    }
    Ok(0.5 * total)
}

/// `F(M, t) = sum_{a,b} t_ab * gamma(M_ab / t_ab)`, skipping `t_ab = 0`.
pub fn f_objective(m: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<f64> {
    if m.shape() != t.shape() {
        return Err(Error::InvalidInput("F arguments differ in shape".into()));
    }
    let mut total = 0.0;
    for (&mv, &tv) in m.iter().zip(t.iter()) {
        if tv == 0.0 {
            if mv != 0.0 {
                return Err(Error::Domain(format!("F: mass {mv} on an empty cell")));
            }
            continue;
        }
        total += tv * gamma(mv / tv)?;
    }
    Ok(total)
}

/// Population objective `G(R, theta*)` for a `k' x k` confusion matrix.
pub fn g_objective(r: &ConfusionMatrix, theta_star: &DMatrix<f64>) -> Result<f64> {
    let r = r.matrix();
    if r.ncols() != theta_star.nrows() || theta_star.nrows() != theta_star.ncols() {
        return Err(Error::InvalidInput(format!(
            "confusion matrix has {} columns but theta* is {}x{}",
            r.ncols(),
            theta_star.nrows(),
            theta_star.ncols()
        )));
    }
    let row_mass: Vec<f64> = r.row_iter().map(|row| row.sum()).collect();
    let mixed = r * theta_star * r.transpose();
    let kp = r.nrows();
    let mut total = 0.0;
    for a in 0..kp {
        for b in 0..kp {
            let s = row_mass[a] * row_mass[b];
            if s == 0.0 {
                continue;
            }
            total += s * gamma_rounded(mixed[(a, b)] / s)?;
        }
    }
    Ok(total)
}

/// Merge of two blocks of a k-block model into a (k-1)-block model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeScheme {
    /// The merged pair `(a, b)`, 0-based, `a < b`.
    pub pair: (usize, usize),
    /// `relabel[c]` is the (k-1)-block label of old block `c`: `b` joins `a`
    /// and every block above `b` shifts down by one.
    pub relabel: Vec<usize>,
    #[serde(serialize_with = "crate::rows::serialize")]
    pub merged_theta: DMatrix<f64>,
    pub merged_props: Vec<f64>,
}

impl MergeScheme {
    pub fn merge_labels(&self, z: &Assignment) -> Result<Assignment> {
        if z.k() != self.relabel.len() {
            return Err(Error::InvalidInput(format!(
                "assignment has {} blocks, merge expects {}",
                z.k(),
                self.relabel.len()
            )));
        }
        Assignment::new(
            z.labels().iter().map(|&l| self.relabel[l]).collect(),
            self.relabel.len() - 1,
        )
    }

    /// Pools block sizes and edge sums through the relabel map.
    pub fn pool_counts(&self, cs: &CountStats) -> Result<CountStats> {
        let k = self.relabel.len();
        if cs.k() != k {
            return Err(Error::InvalidInput(format!(
                "counts have {} blocks, merge expects {k}",
                cs.k()
            )));
        }
        let mut sizes = vec![0; k - 1];
        let mut m = DMatrix::zeros(k - 1, k - 1);
        for c in 0..k {
            sizes[self.relabel[c]] += cs.n_block[c];
            for d in 0..k {
                m[(self.relabel[c], self.relabel[d])] += cs.m_pair[(c, d)];
            }
        }
        Ok(CountStats::from_parts(sizes, m))
    }

    /// Ordered block pairs touched by the merge.
    pub fn touched_pairs(&self) -> Vec<(usize, usize)> {
        let k = self.relabel.len();
        let (a, b) = self.pair;
        let hit = |c: usize| c == a || c == b;
        (0..k)
            .flat_map(|c| (0..k).map(move |d| (c, d)))
            .filter(|&(c, d)| hit(c) || hit(d))
            .collect()
    }
}

fn relabel_map(k: usize, a: usize, b: usize) -> Vec<usize> {
    (0..k)
        .map(|c| match c {
            c if c == b => a,
            c if c > b => c - 1,
            c => c,
        })
        .collect()
}

/// Merges blocks `a < b` (0-based) by proportion-weighted averages of theta.
pub fn merge(params: &SbmParams, a: usize, b: usize) -> Result<MergeScheme> {
    let k = params.k();
    if k < 2 {
        return Err(Error::InvalidInput("merging needs at least two blocks".into()));
    }
    if a >= b || b >= k {
        return Err(Error::InvalidInput(format!(
            "merge pair ({}, {}) must satisfy 1 <= a < b <= {k}",
            a + 1,
            b + 1
        )));
    }
    let relabel = relabel_map(k, a, b);
    let p = &params.proportions;
    let mut merged_props = vec![0.0; k - 1];
    for c in 0..k {
        merged_props[relabel[c]] += p[c];
    }
    let mut num = DMatrix::<f64>::zeros(k - 1, k - 1);
    let mut den = DMatrix::<f64>::zeros(k - 1, k - 1);
    let mut plain = DMatrix::<f64>::zeros(k - 1, k - 1);
    let mut cells = DMatrix::<f64>::zeros(k - 1, k - 1);
    for c in 0..k {
        for d in 0..k {
            let (x, y) = (relabel[c], relabel[d]);
            let w = p[c] * p[d];
            num[(x, y)] += w * params.theta[(c, d)];
            den[(x, y)] += w;
            plain[(x, y)] += params.theta[(c, d)];
            cells[(x, y)] += 1.0;
        }
    }
    // zero total weight: fall back to the unweighted average
    let merged_theta = DMatrix::from_fn(k - 1, k - 1, |x, y| {
        if den[(x, y)] > 0.0 {
            num[(x, y)] / den[(x, y)]
        } else {
            plain[(x, y)] / cells[(x, y)]
        }
    });
    Ok(MergeScheme {
        pair: (a, b),
        relabel,
        merged_theta,
        merged_props,
    })
}

fn merge_confusion(scheme: &MergeScheme, p: &[f64]) -> ConfusionMatrix {
    let k = p.len();
    let mut r = DMatrix::zeros(k - 1, k);
    for c in 0..k {
        r[(scheme.relabel[c], c)] = p[c];
    }
    ConfusionMatrix(r)
}

/// The merge maximizing `G` among all `C(k, 2)` pairs; near-ties (relative
/// 1e-12) go to the lexicographically smallest pair.
pub fn best_merge(params: &SbmParams) -> Result<MergeScheme> {
    let k = params.k();
    if k < 2 {
        return Err(Error::InvalidInput("merging needs at least two blocks".into()));
    }
    let mut best: Option<(f64, MergeScheme)> = None;
    for a in 0..k {
        for b in (a + 1)..k {
            let scheme = merge(params, a, b)?;
            let value = g_objective(&merge_confusion(&scheme, &params.proportions), &params.theta)?;
            let better = match &best {
                None => true,
                Some((top, _)) => value > top + 1e-12 * top.abs().max(1e-300),
            };
            if better {
                best = Some((value, scheme));
            }
        }
    }
    Ok(best.expect("k >= 2 gives at least one pair").1)
}

/// Empirical pair densities `n_ab / n^2`, the finite-n stand-in for `C_ab`.
pub fn pair_density(cs: &CountStats) -> DMatrix<f64> {
    let n = cs.n() as f64;
    &cs.n_pair / (n * n)
}

/// Reference parameters of the normal limit for `n^-1 L_{k,k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnderfitAsymptotics {
    /// Per-`n^2` mean parameter; the centering of `n^-1 L_{k,k-1}` is `n * mu`.
    pub mu: f64,
    /// Variance parameter `sigma(theta*)` with the quarter prefactor.
    pub sigma: f64,
    /// Variance of the pair-level linear term when each unordered node pair
    /// is counted once; twice `sigma`.
    pub sigma_unordered: f64,
    #[serde(serialize_with = "crate::rows::serialize")]
    pub c_ab: DMatrix<f64>,
}

impl UnderfitAsymptotics {
    pub fn centered_mean(&self, n: usize) -> f64 {
        n as f64 * self.mu
    }
}

fn interior(t: f64) -> bool {
    t > 0.0 && t < 1.0
}

pub fn underfit_asymptotics(
    params: &SbmParams,
    scheme: &MergeScheme,
    pair_density: &DMatrix<f64>,
) -> Result<UnderfitAsymptotics> {
    let k = params.k();
    if scheme.relabel.len() != k || pair_density.shape() != (k, k) {
        return Err(Error::InvalidInput("merge scheme or pair density does not match theta".into()));
    }
    let mut mu = 0.0;
    let mut s = 0.0;
    for (c, d) in scheme.touched_pairs() {
        let star = params.theta[(c, d)];
        let merged = scheme.merged_theta[(scheme.relabel[c], scheme.relabel[d])];
        if !interior(star) || !interior(merged) {
            return Err(Error::Degenerate(format!(
                "theta on merged pair ({}, {}) must lie strictly inside (0, 1)",
                c + 1,
                d + 1
            )));
        }
        let cab = pair_density[(c, d)];
        mu += cab * (star * (merged / star).ln() + (1.0 - star) * ((1.0 - merged) / (1.0 - star)).ln());
        let log_odds = (merged * (1.0 - star) / ((1.0 - merged) * star)).ln();
        s += cab * star * (1.0 - star) * log_odds * log_odds;
    }
    Ok(UnderfitAsymptotics {
        mu: 0.5 * mu,
        sigma: 0.25 * s,
        sigma_unordered: 0.5 * s,
        c_ab: pair_density.clone(),
    })
}

/// `n * mu` for a homogeneous network (within probability `p`, between `q`)
/// with every pair density equal to `c3` and merge weight `x1`.
///
/// The four ordered pairs inside the merged block contribute; pairs with the
/// untouched blocks keep probability `q` and vanish.
pub fn homogeneous_mu(p: f64, q: f64, c3: f64, x1: f64, n: usize) -> Result<f64> {
    if !interior(p) || !interior(q) {
        return Err(Error::Domain(format!("p = {p} and q = {q} must lie in (0, 1)")));
    }
    if !interior(x1) {
        return Err(Error::Domain(format!("x1 = {x1} must lie in (0, 1)")));
    }
    if c3 <= 0.0 {
        return Err(Error::Domain(format!("pair density {c3} must be positive")));
    }
    let within = p * (x1 + (q / p) * (1.0 - x1)).ln()
        + (1.0 - p) * (x1 + ((1.0 - q) / (1.0 - p)) * (1.0 - x1)).ln();
    let between = q * ((p / q) * x1 + (1.0 - x1)).ln()
        + (1.0 - q) * (((1.0 - p) / (1.0 - q)) * x1 + (1.0 - x1)).ln();
    // (c3 / 2) * [2 * within + 2 * between]
    Ok(n as f64 * c3 * (within + between))
}

/// `2 * (profile log-likelihood - log-likelihood at the truth)` and its
/// quadratic approximation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilksStatistic {
    pub exact: f64,
    /// `sum_{a <= b} N_ab (theta_hat - theta*)^2 / (theta* (1 - theta*))` with
    /// `N_ab` the number of unordered node pairs in the block pair.
    pub quadratic_form: f64,
}

pub fn wilks_statistic(cs_hat: &CountStats, params_star: &SbmParams) -> Result<WilksStatistic> {
    check_dims(cs_hat, &params_star.theta)?;
    let exact = 2.0 * (profile_log_likelihood(cs_hat)? - log_likelihood(cs_hat, params_star)?);
    let k = cs_hat.k();
    let mut quadratic_form = 0.0;
    for a in 0..k {
        for b in a..k {
            let ordered = cs_hat.n_pair[(a, b)];
            if ordered == 0.0 {
                continue;
            }
            let unordered = if a == b { ordered / 2.0 } else { ordered };
            let star = params_star.theta[(a, b)];
            if !interior(star) {
                return Err(Error::Degenerate(format!(
                    "theta*[{}][{}] = {star} on the boundary",
                    a + 1,
                    b + 1
                )));
            }
            let diff = cs_hat.m_pair[(a, b)] / ordered - star;
            quadratic_form += unordered * diff * diff / (star * (1.0 - star));
        }
    }
    Ok(WilksStatistic {
        exact,
        quadratic_form,
    })
}

/// Upper bound on the overfit exponent `alpha` for a fitted `k_plus > k`.
pub fn overfit_alpha_bound(k: usize, k_plus: usize, n: usize, c: f64) -> Result<f64> {
    if k == 0 || k_plus <= k || n < 2 || c <= 0.0 {
        return Err(Error::Domain(format!(
            "need k_plus > k >= 1, n >= 2 and C > 0 (got k = {k}, k_plus = {k_plus}, n = {n}, C = {c})"
        )));
    }
    let lk = (k_plus as f64).ln();
    let nf = n as f64;
    Ok(1.0 - c / lk + (2.0 * nf.ln() + (k as f64).ln()) / (nf * lk))
}
