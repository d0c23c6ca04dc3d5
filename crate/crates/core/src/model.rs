//! Dispatch between the Bernoulli and the degree-corrected Poisson profile,
//! plus an incrementally updated block state for local search.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dcsbm::{omega_block_term, profile_log_likelihood_dcsbm};
use crate::error::{Error, Result};
use crate::graph::{count_stats, degrees, Assignment, CountStats, EdgeMode, Graph};
use crate::sbm::{gamma, profile_log_likelihood};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sbm,
    Dcsbm,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Sbm => "sbm",
            Model::Dcsbm => "dcsbm",
        }
    }

    pub fn profile(self, g: &Graph, z: &Assignment) -> Result<f64> {
        match self {
            Model::Sbm => {
                require_binary(g)?;
                profile_log_likelihood(&count_stats(g, z)?)
            }
            Model::Dcsbm => profile_log_likelihood_dcsbm(g, z),
        }
    }
}

fn require_binary(g: &Graph) -> Result<()> {
    if g.mode() == EdgeMode::Counts && g.edges().any(|(_, _, w)| w > 1) {
        return Err(Error::InvalidInput(
            "the Bernoulli model needs a binary graph; binarize multi-edges first".into(),
        ));
    }
    Ok(())
}

/// Block sufficient statistics kept in sync with an assignment under
/// single-node moves. The profile is split into per-ordered-pair terms so a
/// move is scored by re-evaluating the rows and columns it touches.
pub(crate) struct BlockState<'g> {
    model: Model,
    g: &'g Graph,
    z: Assignment,
    n_block: Vec<usize>,
    m_pair: DMatrix<f64>,
    degree: Vec<f64>,
    block_degree: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'g> BlockState<'g> {
    pub fn new(model: Model, g: &'g Graph, z: Assignment) -> Result<Self> {
        if model == Model::Sbm {
            require_binary(g)?;
        }
        let CountStats { n_block, m_pair, .. } = count_stats(g, &z)?;
        let degree = degrees(g);
        let block_degree = m_pair.row_iter().map(|r| r.sum()).collect();
        let k = z.k();
        Ok(BlockState {
            model,
            g,
            z,
            n_block,
            m_pair,
            degree,
            block_degree,
            scratch: vec![0.0; k],
        })
    }

    #[cfg(test)]
    pub fn assignment(&self) -> &Assignment {
        &self.z
    }

    pub fn into_assignment(self) -> Assignment {
        self.z
    }

    fn pair_term(&self, a: usize, b: usize) -> f64 {
        let na = self.n_block[a] as f64;
        let nn = if a == b { na * (na - 1.0) } else { na * self.n_block[b] as f64 };
        let m = self.m_pair[(a, b)];
        match self.model {
            Model::Sbm => {
                if nn > 0.0 {
                    // rounding cannot push m / nn outside [0, 1] for integer counts
                    0.5 * nn * gamma((m / nn).min(1.0)).unwrap_or(0.0)
                } else {
                    0.0
                }
            }
            Model::Dcsbm => {
                if m > 0.0 && nn > 0.0 {
                    0.5 * (m * (m / nn).ln() - m)
                } else {
                    0.0
                }
            }
        }
    }

    fn block_term(&self, a: usize) -> f64 {
        match self.model {
            Model::Sbm => 0.0,
            Model::Dcsbm => omega_block_term(&self.n_block[a..=a], &self.block_degree[a..=a]),
        }
    }

    /// Sum of all profile terms involving blocks `a` or `b`.
    fn touched(&self, a: usize, b: usize) -> f64 {
        let k = self.z.k();
        let mut s = self.block_term(a) + if a != b { self.block_term(b) } else { 0.0 };
        for c in 0..k {
            s += self.pair_term(a, c);
            if b != a {
                s += self.pair_term(b, c);
            }
            if c != a && c != b {
                s += self.pair_term(c, a);
                if b != a {
                    s += self.pair_term(c, b);
                }
            }
        }
        s
    }

    /// Full profile from the current block statistics.
    #[cfg(test)]
    pub fn profile(&self) -> f64 {
        let k = self.z.k();
        let mut s = 0.0;
        for a in 0..k {
            for b in 0..k {
                s += self.pair_term(a, b);
            }
            s += self.block_term(a);
        }
        if self.model == Model::Dcsbm {
            s += crate::dcsbm::degree_entropy(&self.degree);
        }
        s
    }

    fn load_links(&mut self, i: usize) {
        self.scratch.iter_mut().for_each(|v| *v = 0.0);
        for &(j, w) in self.g.neighbors(i) {
            self.scratch[self.z.label(j)] += w as f64;
        }
    }

    fn shift(&mut self, i: usize, from: usize, to: usize) {
        let k = self.z.k();
        for c in 0..k {
            let e = self.scratch[c];
            self.m_pair[(from, c)] -= e;
            self.m_pair[(c, from)] -= e;
        }
        self.n_block[from] -= 1;
        self.block_degree[from] -= self.degree[i];
        for c in 0..k {
            let e = self.scratch[c];
            self.m_pair[(to, c)] += e;
            self.m_pair[(c, to)] += e;
        }
        self.n_block[to] += 1;
        self.block_degree[to] += self.degree[i];
    }

    /// Best strictly improving move for node `i`, as `(target, gain)`.
    /// Moves that would empty a block are not considered.
    pub fn best_move(&mut self, i: usize, tol: f64) -> Option<(usize, f64)> {
        let from = self.z.label(i);
        if self.n_block[from] <= 1 {
            return None;
        }
        self.load_links(i);
        let mut best: Option<(usize, f64)> = None;
        for to in 0..self.z.k() {
            if to == from {
                continue;
            }
            let before = self.touched(from, to);
            self.shift(i, from, to);
            let after = self.touched(from, to);
            self.shift(i, to, from);
            let gain = after - before;
            if gain > tol && best.is_none_or(|(_, g)| gain > g) {
                best = Some((to, gain));
            }
        }
        best
    }

    pub fn apply(&mut self, i: usize, to: usize) {
        let from = self.z.label(i);
        self.load_links(i);
        self.shift(i, from, to);
        self.z.set(i, to);
    }
}
