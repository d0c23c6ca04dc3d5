use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Assignment, Graph};
use crate::model::{BlockState, Model};

/// Smallest profile gain treated as an improvement.
const GAIN_TOL: f64 = 1e-9;
const EXHAUSTIVE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub assignment: Assignment,
    pub profile_before: f64,
    pub profile: f64,
    pub moves: usize,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out while moves were still being accepted.
    pub converged: bool,
}

/// Greedy single-node label moves. Nodes are visited in index order; each
/// takes its best strictly improving move, if any. Moves that would empty a
/// block are skipped. Stops after a sweep without moves or after `max_sweeps`.
pub fn refine_labels(g: &Graph, z0: &Assignment, model: Model, max_sweeps: usize) -> Result<Refinement> {
    let profile_before = model.profile(g, z0)?;
    let mut state = BlockState::new(model, g, z0.clone())?;
    let mut moves = 0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = false;
        for i in 0..g.n() {
            if let Some((to, _)) = state.best_move(i, GAIN_TOL) {
                state.apply(i, to);
                moves += 1;
                moved = true;
            }
        }
        if !moved {
            converged = true;
            break;
        }
    }
    let assignment = state.into_assignment();
    let profile = model.profile(g, &assignment)?;
    // the exact recomputation guards against accumulated rounding
    let (assignment, profile) = if profile < profile_before {
        (z0.clone(), profile_before)
    } else {
        (assignment, profile)
    };
    Ok(Refinement {
        assignment,
        profile_before,
        profile,
        moves,
        sweeps,
        converged,
    })
}

/// Maximum profile likelihood over every assignment with at most `k` labels,
/// enumerating each partition once as a restricted growth string.
pub fn exhaustive_max_profile(g: &Graph, k: usize, model: Model) -> Result<(f64, Assignment)> {
    let n = g.n();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if (k.min(n) as f64).powi(n as i32) > EXHAUSTIVE_LIMIT {
        return Err(Error::InvalidInput(format!(
            "exhaustive search over {k}^{n} assignments is too large"
        )));
    }
    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let z = Assignment::new(labels.clone(), k)?;
        let value = model.profile(g, &z)?;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, labels.clone()));
        }
        // next restricted growth string: labels[i] <= 1 + max(labels[..i])
        let mut i = n - 1;
        loop {
            if i == 0 {
                let (value, labels) = best.expect("at least one assignment");
                return Ok((value, Assignment::new(labels, k)?));
            }
            let cap = labels[..i].iter().copied().max().unwrap_or(0) + 1;
            if labels[i] < cap.min(k - 1) {
                labels[i] += 1;
                labels[i + 1..].iter_mut().for_each(|l| *l = 0);
                break;
            }
            i -= 1;
        }
    }
}
