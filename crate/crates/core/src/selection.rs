//! Penalized profile likelihood criteria and the scan over candidate block
//! counts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Assignment, Graph};
use crate::model::Model;
use crate::seeding;
use crate::spectral::{refine_labels, KMeansConfig, Method, SpectralBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    Cbic,
    Bic,
    WangBickel,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Cbic => "cbic",
            PenaltyKind::Bic => "bic",
            PenaltyKind::WangBickel => "wang-bickel",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub lambda: f64,
}

impl Penalty {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda = {lambda} must be finite and nonnegative")));
        }
        Ok(Penalty { kind, lambda })
    }

    pub fn cbic(lambda: f64) -> Self {
        Penalty {
            kind: PenaltyKind::Cbic,
            lambda,
        }
    }

    pub fn bic() -> Self {
        Penalty {
            kind: PenaltyKind::Bic,
            lambda: 0.0,
        }
    }
}

/// `cbic: lambda n log k + k(k+1)/2 log n`, `bic: k(k+1)/2 log n`,
/// `wang-bickel: lambda k(k+1)/2 n log n`.
pub fn penalty_value(p: &Penalty, k: usize, n: usize) -> f64 {
    let kf = k as f64;
    let nf = n as f64;
    let params = kf * (kf + 1.0) / 2.0;
    match p.kind {
        PenaltyKind::Cbic => p.lambda * nf * kf.ln() + params * nf.ln(),
        PenaltyKind::Bic => params * nf.ln(),
        PenaltyKind::WangBickel => p.lambda * params * nf * nf.ln(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub model: Model,
    pub method: Method,
    pub refine: bool,
    pub max_sweeps: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    pub seed: u64,
}

impl FitConfig {
    pub fn new(model: Model, method: Method, refine: bool, seed: u64) -> Self {
        let km = KMeansConfig::default();
        FitConfig {
            model,
            method,
            refine,
            max_sweeps: 100,
            kmeans_restarts: km.restarts,
            kmeans_max_iter: km.max_iter,
            seed,
        }
    }

    fn kmeans(&self, k: usize) -> KMeansConfig {
        KMeansConfig {
            restarts: self.kmeans_restarts,
            max_iter: self.kmeans_max_iter,
            seed: seeding::derive(self.seed, seeding::stream::KMEANS, k as u64),
        }
    }
}

/// Estimated labels and profile likelihood at one candidate block count,
/// independent of the penalty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub k: usize,
    pub labels: Assignment,
    pub profile_loglik: f64,
    /// Clustering labels and their profile before refinement.
    pub unrefined_labels: Assignment,
    pub unrefined_loglik: f64,
    pub refined: bool,
    pub degenerate_blocks: usize,
    pub isolated_nodes: usize,
    pub clamped_ratios: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFailure {
    pub k: usize,
    pub error: String,
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFits {
    pub n: usize,
    pub config: FitConfig,
    pub fits: Vec<CandidateFit>,
    pub failures: Vec<CandidateFailure>,
}

fn fit_one(g: &Graph, basis: &SpectralBasis, k: usize, cfg: &FitConfig) -> Result<CandidateFit> {
    let clustering = basis.cluster(k, &cfg.kmeans(k))?;
    let unrefined_loglik = cfg.model.profile(g, &clustering.assignment)?;
    let (labels, profile_loglik) = if cfg.refine && k > 1 {
        let r = refine_labels(g, &clustering.assignment, cfg.model, cfg.max_sweeps)?;
        (r.assignment.canonical(), r.profile)
    } else {
        (clustering.assignment.clone(), unrefined_loglik)
    };
    Ok(CandidateFit {
        k,
        unrefined_labels: clustering.assignment,
        degenerate_blocks: labels.empty_blocks(),
        labels,
        profile_loglik,
        unrefined_loglik,
        refined: cfg.refine,
        isolated_nodes: clustering.isolated.len(),
        clamped_ratios: clustering.clamped,
    })
}

/// Labels and profile likelihoods for every `k` in `k_min..=k_max`. One
/// eigendecomposition serves all candidates; failures at individual `k`
/// are recorded rather than aborting the scan.
pub fn fit_candidates(g: &Graph, k_min: usize, k_max: usize, cfg: &FitConfig) -> Result<CandidateFits> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 nodes, got {n}")));
    }
    if k_min == 0 || k_min > k_max || k_max > n {
        return Err(Error::InvalidInput(format!(
            "candidate range {k_min}..={k_max} must be nonempty and within 1..={n}"
        )));
    }
    // profile evaluation fails identically for every k on a malformed graph
    cfg.model.profile(g, &Assignment::constant(n))?;
    let basis = SpectralBasis::new(g, cfg.method, k_max)?;
    let outcomes: Vec<(usize, Result<CandidateFit>)> = (k_min..=k_max)
        .into_par_iter()
        .map(|k| (k, fit_one(g, &basis, k, cfg)))
        .collect();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (k, outcome) in outcomes {
        match outcome {
            Ok(fit) => fits.push(fit),
            Err(e) => failures.push(CandidateFailure {
                k,
                numerical: e.is_numerical(),
                error: e.to_string(),
            }),
        }
    }
    if fits.is_empty() {
        let first = &failures[0];
        return Err(Error::at_k(first.k, Error::Degenerate(first.error.clone())));
    }
    Ok(CandidateFits {
        n,
        config: *cfg,
        fits,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KRecord {
    pub k: usize,
    pub labels: Assignment,
    pub profile_loglik: f64,
    pub penalty_value: f64,
    pub criterion_value: f64,
    pub method: Method,
    pub refined: bool,
    pub degenerate_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub n: usize,
    pub model: Model,
    pub method: Method,
    pub penalty: Penalty,
    pub refined: bool,
    pub seed: u64,
    pub per_k: Vec<KRecord>,
    pub k_hat: usize,
    /// Other candidates attaining the maximum, if any.
    pub ties: Vec<usize>,
    pub failures: Vec<CandidateFailure>,
}

impl CandidateFits {
    /// Applies a penalty to the shared fits; the largest criterion wins and
    /// ties go to the smallest `k`.
    pub fn select(&self, penalty: &Penalty) -> SelectionReport {
        let per_k: Vec<KRecord> = self
            .fits
            .iter()
            .map(|f| {
                let pv = penalty_value(penalty, f.k, self.n);
                KRecord {
                    k: f.k,
                    labels: f.labels.clone(),
                    profile_loglik: f.profile_loglik,
                    penalty_value: pv,
                    criterion_value: f.profile_loglik - pv,
                    method: self.config.method,
                    refined: f.refined,
                    degenerate_blocks: f.degenerate_blocks,
                }
            })
            .collect();
        let best = per_k
            .iter()
            .map(|r| r.criterion_value)
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * best.abs().max(1.0);
        let winners: Vec<usize> = per_k
            .iter()
            .filter(|r| r.criterion_value >= best - tol)
            .map(|r| r.k)
            .collect();
        SelectionReport {
            n: self.n,
            model: self.config.model,
            method: self.config.method,
            penalty: *penalty,
            refined: self.config.refine,
            seed: self.config.seed,
            k_hat: winners[0],
            ties: winners[1..].to_vec(),
            per_k,
            failures: self.failures.clone(),
        }
    }

    /// The same scan read at the clustering labels, ignoring refinement.
    pub fn unrefined(&self) -> CandidateFits {
        let fits = self
            .fits
            .iter()
            .map(|f| CandidateFit {
                labels: f.unrefined_labels.clone(),
                profile_loglik: f.unrefined_loglik,
                refined: false,
                degenerate_blocks: f.unrefined_labels.empty_blocks(),
                ..f.clone()
            })
            .collect();
        CandidateFits {
            config: FitConfig {
                refine: false,
                ..self.config
            },
            fits,
            ..self.clone()
        }
    }

    /// `k_hat` under a penalty, without building the full report.
    pub fn k_hat(&self, penalty: &Penalty) -> usize {
        self.select(penalty).k_hat
    }
}

/// Record for a single candidate `k`.
pub fn criterion(g: &Graph, k: usize, penalty: &Penalty, cfg: &FitConfig) -> Result<KRecord> {
    let fits = fit_candidates(g, k, k, cfg)?;
    if let Some(f) = fits.failures.first() {
        return Err(Error::at_k(k, Error::Degenerate(f.error.clone())));
    }
    Ok(fits.select(penalty).per_k.remove(0))
}

pub fn select_k(g: &Graph, k_min: usize, k_max: usize, penalty: &Penalty, cfg: &FitConfig) -> Result<SelectionReport> {
    Ok(fit_candidates(g, k_min, k_max, cfg)?.select(penalty))
}

impl SelectionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,profile_loglik,penalty_value,criterion_value,method,refined,degenerate_blocks,selected\n");
        for r in &self.per_k {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                r.profile_loglik,
                r.penalty_value,
                r.criterion_value,
                r.method.name(),
                r.refined,
                r.degenerate_blocks,
                u8::from(r.k == self.k_hat)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeMode;
    use crate::sbm::gamma;
    use proptest::prelude::*;

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

    #[test]
    fn penalty_examples() {
        let n = 500usize;
        for lambda in [0.0, 1.0, 2.5] {
            assert!((penalty_value(&Penalty::cbic(lambda), 1, n) - (n as f64).ln()).abs() < 1e-12);
        }
        let v = penalty_value(&Penalty::cbic(1.0), 3, 500);
        assert!((v - (500.0 * 3f64.ln() + 6.0 * 500f64.ln())).abs() < 1e-9);
        assert!((v - 586.6).abs() < 0.05);
        let wb = Penalty::new(PenaltyKind::WangBickel, 0.5).unwrap();
        assert!((penalty_value(&wb, 2, 100) - 0.5 * 3.0 * 100.0 * 100f64.ln()).abs() < 1e-9);
        assert!(Penalty::new(PenaltyKind::Cbic, -1.0).is_err());
    }

    #[test]
    fn single_block_criterion() {
        let g = clique_pair(4);
        let cfg = FitConfig::new(Model::Sbm, Method::Spectral, false, 1);
        let r = criterion(&g, 1, &Penalty::cbic(1.0), &cfg).unwrap();
        let density = g.total_weight() as f64 / 28.0;
        let expected = 28.0 * gamma(density).unwrap() - 8f64.ln();
        assert!((r.criterion_value - expected).abs() < 1e-12);
    }

    #[test]
    fn two_cliques_prefer_two_blocks() {
        let g = clique_pair(6);
        let cfg = FitConfig::new(Model::Sbm, Method::Spectral, true, 2);
        let p = Penalty::cbic(1.0);
        let one = criterion(&g, 1, &p, &cfg).unwrap();
        let two = criterion(&g, 2, &p, &cfg).unwrap();
        assert_eq!(two.profile_loglik, 0.0);
        assert!(two.criterion_value > one.criterion_value);
        let report = select_k(&g, 1, 4, &p, &cfg).unwrap();
        assert_eq!(report.k_hat, 2);
        assert_eq!(report.per_k.len(), 4);
    }

    #[test]
    fn report_decomposes_and_serializes() {
        let g = clique_pair(5);
        let cfg = FitConfig::new(Model::Sbm, Method::Score, false, 3);
        let report = select_k(&g, 1, 3, &Penalty::bic(), &cfg).unwrap();
        for r in &report.per_k {
            assert_eq!(r.criterion_value, r.profile_loglik - r.penalty_value);
        }
        let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        assert_eq!(json["k_hat"], report.k_hat);
        assert_eq!(json["penalty"]["kind"], "bic");
        assert_eq!(report.to_csv().lines().count(), 4);
    }

    #[test]
    fn invalid_range() {
        let g = clique_pair(3);
        let cfg = FitConfig::new(Model::Sbm, Method::Spectral, false, 0);
        assert!(select_k(&g, 0, 2, &Penalty::bic(), &cfg).is_err());
        assert!(select_k(&g, 3, 2, &Penalty::bic(), &cfg).is_err());
        assert!(select_k(&g, 1, 7, &Penalty::bic(), &cfg).is_err());
    }

    #[test]
    fn ties_go_to_smallest_k() {
        let fits = CandidateFits {
            n: 10,
            config: FitConfig::new(Model::Sbm, Method::Spectral, false, 0),
            fits: (1..=3)
                .map(|k| CandidateFit {
                    k,
                    labels: Assignment::constant(10),
                    profile_loglik: penalty_value(&Penalty::bic(), k, 10),
                    unrefined_labels: Assignment::constant(10),
                    unrefined_loglik: 0.0,
                    refined: false,
                    degenerate_blocks: 0,
                    isolated_nodes: 0,
                    clamped_ratios: 0,
                })
                .collect(),
            failures: vec![],
        };
        let report = fits.select(&Penalty::bic());
        assert_eq!(report.k_hat, 1);
        assert_eq!(report.ties, vec![2, 3]);
    }

    proptest! {
        #[test]
        fn cbic_without_lambda_is_bic(k in 1usize..60, n in 2usize..100_000) {
            prop_assert_eq!(penalty_value(&Penalty::cbic(0.0), k, n), penalty_value(&Penalty::bic(), k, n));
        }

        #[test]
        fn cbic_increasing_in_k(k in 1usize..60, n in 2usize..100_000, lambda in 0.01f64..4.0) {
            let p = Penalty::cbic(lambda);
            prop_assert!(penalty_value(&p, k + 1, n) > penalty_value(&p, k, n));
        }

        #[test]
        fn larger_lambda_never_raises_k_hat(
            profiles in prop::collection::vec(-5000.0f64..0.0, 6),
            l1 in 0.0f64..3.0,
            dl in 0.0f64..3.0,
        ) {
            let fits = CandidateFits {
                n: 200,
                config: FitConfig::new(Model::Sbm, Method::Spectral, false, 0),
                fits: profiles.iter().enumerate().map(|(i, &p)| CandidateFit {
                    k: i + 1,
                    labels: Assignment::constant(200),
                    profile_loglik: p,
                    unrefined_labels: Assignment::constant(200),
                    unrefined_loglik: p,
                    refined: false,
                    degenerate_blocks: 0,
                    isolated_nodes: 0,
                    clamped_ratios: 0,
                }).collect(),
                failures: vec![],
            };
            prop_assert!(fits.k_hat(&Penalty::cbic(l1 + dl)) <= fits.k_hat(&Penalty::cbic(l1)));
        }
    }
}
