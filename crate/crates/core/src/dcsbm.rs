//! Poisson degree-corrected block model.
//!
//! Normalizing constants `-sum log A_ij!` are omitted from every likelihood
//! here. They depend on the graph alone, so they cancel whenever two
//! assignments or two block counts are compared on the same graph.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{count_stats, degrees, Assignment, CountStats, Graph};
use crate::sbm::xlogx;

const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcsbmParams {
    #[serde(serialize_with = "crate::rows::serialize")]
    pub theta: DMatrix<f64>,
    pub omega: Vec<f64>,
    pub proportions: Vec<f64>,
}

impl DcsbmParams {
    /// Validates `theta >= 0`, symmetry, and `sum_{i in a} omega_i = n_a`.
    pub fn new(theta: DMatrix<f64>, omega: Vec<f64>, z: &Assignment) -> Result<Self> {
        let k = z.k();
        if theta.shape() != (k, k) {
            return Err(Error::InvalidInput(format!(
                "theta is {}x{} but the assignment has {k} blocks",
                theta.nrows(),
                theta.ncols()
            )));
        }
        if omega.len() != z.len() {
            return Err(Error::LengthMismatch {
                expected: z.len(),
                got: omega.len(),
            });
        }
        for a in 0..k {
            for b in 0..k {
                if !(theta[(a, b)] >= 0.0) || !theta[(a, b)].is_finite() {
                    return Err(Error::Domain(format!("rate theta[{a}][{b}] = {}", theta[(a, b)])));
                }
                if theta[(a, b)] != theta[(b, a)] {
                    return Err(Error::InvalidInput(format!("theta not symmetric at ({a}, {b})")));
                }
            }
        }
        if omega.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("node weights must be finite and nonnegative".into()));
        }
        let sizes = z.block_sizes();
        let mut sums = vec![0.0; k];
        for (i, &w) in omega.iter().enumerate() {
            sums[z.label(i)] += w;
        }
        for a in 0..k {
            let target = sizes[a] as f64;
            if (sums[a] - target).abs() > CONSTRAINT_TOL * target.max(1.0) {
                return Err(Error::InvalidInput(format!(
                    "node weights in block {} sum to {} instead of {}",
                    a + 1,
                    sums[a],
                    sizes[a]
                )));
            }
        }
        let n = z.len().max(1) as f64;
        Ok(DcsbmParams {
            theta,
            omega,
            proportions: sizes.iter().map(|&s| s as f64 / n).collect(),
        })
    }
}

fn xlogy(x: f64, y: f64, what: impl Fn() -> String) -> Result<f64> {
    if x == 0.0 {
        Ok(0.0)
    } else if y <= 0.0 {
        Err(Error::Degenerate(format!("{}: log of {y} with positive count {x}", what())))
    } else {
        Ok(x * y.ln())
    }
}

/// `sum_i d_i log omega_i + 1/2 sum_{a,b} (m_ab log theta_ab - n_ab theta_ab)`.
pub fn log_likelihood_dcsbm(g: &Graph, params: &DcsbmParams, z: &Assignment) -> Result<f64> {
    if params.omega.len() != g.n() {
        return Err(Error::LengthMismatch {
            expected: g.n(),
            got: params.omega.len(),
        });
    }
    let cs = count_stats(g, z)?;
    if params.theta.shape() != (cs.k(), cs.k()) {
        return Err(Error::InvalidInput("theta does not match the assignment".into()));
    }
    let mut node_term = 0.0;
    for (i, d) in degrees(g).into_iter().enumerate() {
        node_term += xlogy(d, params.omega[i], || format!("node {}", i + 1))?;
    }
    let k = cs.k();
    let mut block_term = 0.0;
    for a in 0..k {
        for b in 0..k {
            let t = params.theta[(a, b)];
            block_term += xlogy(cs.m_pair[(a, b)], t, || format!("block pair ({}, {})", a + 1, b + 1))?
                - cs.n_pair[(a, b)] * t;
        }
    }
    Ok(node_term + 0.5 * block_term)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    pub omega: Vec<f64>,
    /// Blocks with zero total degree; their weights fall back to 1.
    pub degenerate_blocks: Vec<usize>,
}

/// `omega_i = n_a d_i / sum_{j in a} d_j`.
pub fn mle_omega(d: &[f64], z: &Assignment) -> Result<OmegaEstimate> {
    if d.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            got: d.len(),
        });
    }
    let sizes = z.block_sizes();
    let mut totals = vec![0.0; z.k()];
    for (i, &di) in d.iter().enumerate() {
        totals[z.label(i)] += di;
    }
    let degenerate_blocks: Vec<usize> = (0..z.k()).filter(|&a| sizes[a] > 0 && totals[a] == 0.0).collect();
    let omega = d
        .iter()
        .enumerate()
        .map(|(i, &di)| {
            let a = z.label(i);
            if totals[a] == 0.0 {
                1.0
            } else {
                sizes[a] as f64 * di / totals[a]
            }
        })
        .collect();
    Ok(OmegaEstimate {
        omega,
        degenerate_blocks,
    })
}

/// Profile of the Poisson block model without degree correction,
/// `1/2 sum_{a,b} (m_ab log(m_ab / n_ab) - m_ab)`.
pub fn poisson_sbm_profile(cs: &CountStats) -> Result<f64> {
    let k = cs.k();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            let m = cs.m_pair[(a, b)];
            if m == 0.0 {
                continue;
            }
            let nn = cs.n_pair[(a, b)];
            if nn == 0.0 {
                return Err(Error::Degenerate(format!(
                    "edges on empty block pair ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
            total += m * (m / nn).ln() - m;
        }
    }
    Ok(0.5 * total)
}

/// The degree part of the profile once `omega` is profiled out:
/// `sum_a D_a log(n_a / D_a)`, with `D_a` the block degree totals.
pub(crate) fn omega_block_term(n_block: &[usize], block_degree: &[f64]) -> f64 {
    n_block
        .iter()
        .zip(block_degree)
        .map(|(&na, &da)| if da > 0.0 { da * (na as f64 / da).ln() } else { 0.0 })
        .sum()
}

/// `sum_i d_i log d_i`, the assignment-free part of the plug-in degree term.
pub(crate) fn degree_entropy(d: &[f64]) -> f64 {
    d.iter().map(|&x| xlogx(x)).sum()
}

/// Plug-in profile: the likelihood at `omega = mle_omega` and
/// `theta_ab = m_ab / n_ab`.
pub fn profile_log_likelihood_dcsbm(g: &Graph, z: &Assignment) -> Result<f64> {
    let cs = count_stats(g, z)?;
    let d = degrees(g);
    let block_degree: Vec<f64> = cs.m_pair.row_iter().map(|r| r.sum()).collect();
    Ok(degree_entropy(&d) + omega_block_term(&cs.n_block, &block_degree) + poisson_sbm_profile(&cs)?)
}

/// Rates `m_ab / n_ab`, 0 on empty block pairs.
pub fn mle_rates(cs: &CountStats) -> DMatrix<f64> {
    DMatrix::from_fn(cs.k(), cs.k(), |a, b| {
        let nn = cs.n_pair[(a, b)];
        if nn > 0.0 {
            cs.m_pair[(a, b)] / nn
        } else {
            0.0
        }
    })
}
