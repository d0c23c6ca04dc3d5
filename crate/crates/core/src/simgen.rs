//! Random block-model instances for the simulation designs.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Assignment, EdgeMode, Graph};

/// Block sizes of the growing designs; the first `k` entries give a
/// `k`-block network.
pub const SIZE_SEQUENCE: [usize; 8] = [60, 90, 120, 150, 60, 90, 120, 150];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmDesign {
    pub block_sizes: Vec<usize>,
    #[serde(with = "matrix_rows")]
    pub theta: DMatrix<f64>,
    pub seed: u64,
}

mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        crate::rows::serialize(m, s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(serde::de::Error::custom("theta must be square"));
        }
        Ok(DMatrix::from_fn(k, k, |a, b| rows[a][b]))
    }
}

impl SbmDesign {
    pub fn new(block_sizes: Vec<usize>, theta: DMatrix<f64>, seed: u64) -> Result<Self> {
        let d = SbmDesign {
            block_sizes,
            theta,
            seed,
        };
        d.validate()?;
        Ok(d)
    }

    /// Checks sizes, symmetry and the `[0, 1]` range; used after
    /// deserializing a design file too.
    pub fn validate(&self) -> Result<()> {
        let k = self.block_sizes.len();
        if k == 0 || self.block_sizes.contains(&0) {
            return Err(Error::InvalidInput("block sizes must be positive".into()));
        }
        if self.theta.shape() != (k, k) {
            return Err(Error::InvalidInput(format!(
                "theta is {}x{} for {k} blocks",
                self.theta.nrows(),
                self.theta.ncols()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let t = self.theta[(a, b)];
                if !(0.0..=1.0).contains(&t) {
                    return Err(Error::Domain(format!("theta[{a}][{b}] = {t} outside [0, 1]")));
                }
                if t != self.theta[(b, a)] {
                    return Err(Error::InvalidInput(format!("theta not symmetric at ({a}, {b})")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn k(&self) -> usize {
        self.block_sizes.len()
    }

    /// Contiguous true labels.
    pub fn truth(&self) -> Assignment {
        Assignment::from_block_sizes(&self.block_sizes)
    }

    /// Smallest block fraction `min_a n_a / n`.
    pub fn min_fraction(&self) -> f64 {
        *self.block_sizes.iter().min().expect("validated") as f64 / self.n() as f64
    }
}

/// The first `k` entries of [`SIZE_SEQUENCE`].
pub fn sequence_sizes(k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > SIZE_SEQUENCE.len() {
        return Err(Error::InvalidInput(format!("k = {k} outside 1..=8")));
    }
    Ok(SIZE_SEQUENCE[..k].to_vec())
}

/// `k` blocks of near-equal size, larger blocks first.
pub fn balanced_sizes(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("cannot split {n} nodes into {k} blocks")));
    }
    Ok((0..k).map(|a| n / k + usize::from(a < n % k)).collect())
}

/// `base (1 + r)` on the diagonal, `base` elsewhere.
pub fn homogeneous_theta(k: usize, base: f64, r: f64) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let within = base * (1.0 + r);
    for v in [base, within] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("probability {v} outside [0, 1]")));
        }
    }
    Ok(DMatrix::from_fn(k, k, |a, b| if a == b { within } else { base }))
}

const NONHOMOGENEOUS: [[f64; 4]; 4] = [
    [0.20, 0.04, 0.05, 0.03],
    [0.03, 0.20, 0.03, 0.05],
    [0.05, 0.03, 0.25, 0.04],
    [0.03, 0.05, 0.04, 0.25],
];

/// `rho` times the fixed 4x4 design matrix. The displayed matrix is not
/// symmetric; its upper triangle is used and mirrored.
pub fn nonhomogeneous_theta(rho: f64) -> Result<DMatrix<f64>> {
    if !(rho > 0.0) || rho * 0.25 > 1.0 {
        return Err(Error::Domain(format!("rho = {rho} must lie in (0, 4]")));
    }
    Ok(DMatrix::from_fn(4, 4, |a, b| rho * NONHOMOGENEOUS[a.min(b)][a.max(b)]))
}

/// Bernoulli edges for every unordered pair, drawn in row-major order.
pub fn sample_sbm<R: Rng>(design: &SbmDesign, rng: &mut R) -> Result<(Graph, Assignment)> {
    design.validate()?;
    let z = design.truth();
    let n = z.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < design.theta[(z.label(i), z.label(j))] {
                edges.push((i, j, 1));
            }
        }
    }
    let (g, _) = Graph::from_edges(n, EdgeMode::Binary, edges)?;
    Ok((g, z))
}

/// Node-weight distribution: with probability `uniform_weight` a draw from
/// `U[uniform_low, uniform_high]`, otherwise one of the atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaMixture {
    pub uniform_weight: f64,
    pub uniform_low: f64,
    pub uniform_high: f64,
    /// `(value, probability)` pairs.
    pub atoms: Vec<(f64, f64)>,
}

impl Default for OmegaMixture {
    fn default() -> Self {
        OmegaMixture {
            uniform_weight: 0.8,
            uniform_low: 3.0 / 5.0,
            uniform_high: 7.0 / 5.0,
            atoms: vec![(7.0 / 11.0, 0.1), (15.0 / 11.0, 0.1)],
        }
    }
}

impl OmegaMixture {
    /// Every node gets weight 1.
    pub fn point_mass() -> Self {
        OmegaMixture {
            uniform_weight: 0.0,
            uniform_low: 1.0,
            uniform_high: 1.0,
            atoms: vec![(1.0, 1.0)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.uniform_weight + self.atoms.iter().map(|a| a.1).sum::<f64>();
        if (total - 1.0).abs() > 1e-12 || self.uniform_weight < 0.0 || self.atoms.iter().any(|a| a.1 < 0.0) {
            return Err(Error::InvalidInput(format!("mixture weights sum to {total}")));
        }
        if self.uniform_low > self.uniform_high || self.uniform_low < 0.0 || self.atoms.iter().any(|a| a.0 < 0.0) {
            return Err(Error::InvalidInput("mixture support must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.uniform_weight * (self.uniform_low + self.uniform_high) / 2.0
            + self.atoms.iter().map(|(v, p)| v * p).sum::<f64>()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = rng.random::<f64>();
        if u < self.uniform_weight {
            return self.uniform_low + (self.uniform_high - self.uniform_low) * rng.random::<f64>();
        }
        let mut acc = self.uniform_weight;
        for &(value, p) in &self.atoms {
            acc += p;
            if u < acc {
                return value;
            }
        }
        self.atoms.last().map_or(1.0, |a| a.0)
    }
}

/// Poisson counts `A_ij ~ Poisson(omega_i omega_j theta_ab)` for `i < j`.
/// Weights are drawn i.i.d. from the mixture and then rescaled inside each
/// block so that they sum to the block size. No self-loops.
pub fn sample_dcsbm<R: Rng>(
    design: &SbmDesign,
    mixture: &OmegaMixture,
    rng: &mut R,
) -> Result<(Graph, Assignment, Vec<f64>)> {
    design.validate()?;
    mixture.validate()?;
    let z = design.truth();
    let n = z.len();
    let mut omega: Vec<f64> = (0..n).map(|_| mixture.sample(rng)).collect();
    let mut sums = vec![0.0; z.k()];
    for i in 0..n {
        sums[z.label(i)] += omega[i];
    }
    for i in 0..n {
        let a = z.label(i);
        if sums[a] > 0.0 {
            omega[i] *= design.block_sizes[a] as f64 / sums[a];
        } else {
            omega[i] = 1.0;
        }
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let rate = omega[i] * omega[j] * design.theta[(z.label(i), z.label(j))];
            if rate <= 0.0 {
                continue;
            }
            let draw = Poisson::new(rate)
                .map_err(|e| Error::Domain(format!("Poisson rate {rate}: {e}")))?
                .sample(rng);
            if draw > 0.0 {
                edges.push((i, j, draw as u32));
            }
        }
    }
    let (g, _) = Graph::from_edges(n, EdgeMode::Counts, edges)?;
    Ok((g, z, omega))
}
