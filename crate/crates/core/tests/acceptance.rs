//! Acceptance checks. Runs without the libtest harness so that one
//! PASS/FAIL line per criterion always reaches the output.

use std::process::ExitCode;
use std::time::Instant;

use cbic::dcsbm::mle_omega;
use cbic::experiments::{
    run_experiment, run_lambda_sweep, run_mu_curve, run_sim1_distributions, run_success_table, Cell, Design,
    Estimator, ExperimentSpec, Moments, ReplicationSummary, ScanConfig, Theory,
};
use cbic::graph::{count_stats, degrees};
use cbic::sbm::{best_merge, gamma, SbmParams};
use cbic::selection::{penalty_value, Penalty, PenaltyKind};
use cbic::simgen::homogeneous_theta;
use cbic::spectral::{exhaustive_max_profile, normalized_laplacian, refine_labels, top_eigenpairs};
use cbic::{Assignment, EdgeMode, Graph, Model};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const REPS: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn sim1() -> cbic::experiments::Sim1Distributions {
    let theta = homogeneous_theta(3, 0.03, 5.0).unwrap();
    run_sim1_distributions(500, 3, &theta, REPS, SEED, 0.5).unwrap()
}

fn wilks_check(d: &cbic::experiments::Sim1Distributions) -> Outcome {
    let m = Moments::of(&d.wilks.values).unwrap();
    let mean_ok = within(m.mean, 6.0, 3.0 * m.se_mean);
    let var_ok = within(m.var, 12.0, 3.0 * m.se_var);
    outcome(
        mean_ok && var_ok,
        format!(
            "mean {:.4} vs 6 +- {:.4}; var {:.4} vs 12 +- {:.4}",
            m.mean,
            3.0 * m.se_mean,
            m.var,
            3.0 * m.se_var
        ),
    )
}

fn underfit_check(d: &cbic::experiments::Sim1Distributions) -> Outcome {
    let Theory::Normal {
        mean: n_mu,
        sigma,
        sigma_unordered,
    } = d.underfit.theory
    else {
        return outcome(false, "underfit reference is not normal".into());
    };
    let centered: Vec<f64> = d.underfit.values.iter().map(|v| v - n_mu).collect();
    let m = Moments::of(&centered).unwrap();
    let mean_ok = within(m.mean, 0.0, 3.0 * m.se_mean);
    let var_ok = within(m.var, sigma, 3.0 * m.se_var);
    outcome(
        mean_ok && var_ok,
        format!(
            "n*mu {:.4}; centered mean {:.5} vs 0 +- {:.5}; var {:.5} vs sigma {:.5} +- {:.5} \
             (unordered-pair sigma {:.5}, off by {:.2} SE)",
            n_mu,
            m.mean,
            3.0 * m.se_mean,
            m.var,
            sigma,
            3.0 * m.se_var,
            sigma_unordered,
            (m.var - sigma_unordered).abs() / m.se_var
        ),
    )
}

fn rates(rows: &[ReplicationSummary], name: &str) -> Vec<(usize, f64)> {
    rows.iter()
        .filter(|s| s.estimator == name)
        .map(|s| (s.k_true, s.success_prob))
        .collect()
}

fn fmt_rates(r: &[(usize, f64)]) -> String {
    r.iter().map(|(k, p)| format!("k={k}:{p:.2}")).collect::<Vec<_>>().join(" ")
}

fn table1_check() -> Outcome {
    let cells: Vec<Cell> = (2..=5).map(|k| Cell::homogeneous(k, 5.0).unwrap()).collect();
    let rows = run_success_table(&cells, &Estimator::standard(), &ScanConfig::sbm(18), REPS, SEED).unwrap();
    let cbic = rates(&rows, "cbic(lambda=1)");
    let bic = rates(&rows, "bic");
    let pass = cbic.iter().all(|&(_, p)| p >= 0.9) && bic.iter().filter(|&&(k, _)| k <= 3).all(|&(_, p)| p <= 0.6);
    outcome(
        pass,
        format!(
            "cbic [{}]; bic [{}]; unrefined cbic [{}]; unrefined bic [{}]",
            fmt_rates(&cbic),
            fmt_rates(&bic),
            fmt_rates(&rates(&rows, "cbic(lambda=1)/unrefined")),
            fmt_rates(&rates(&rows, "bic/unrefined"))
        ),
    )
}

fn sweep_check() -> Outcome {
    let lambdas = [0.0, 0.5, 1.0, 1.5, 2.5, 3.5];
    let cells = [Cell::homogeneous(3, 5.0).unwrap()];
    let rows = run_lambda_sweep(&cells, &lambdas, &ScanConfig::sbm(18), REPS, SEED).unwrap();
    let at = |l: f64| rows.iter().find(|s| s.penalty.lambda == l).unwrap().success_prob;
    let curve: Vec<String> = rows.iter().map(|s| format!("{}:{:.2}", s.penalty.lambda, s.success_prob)).collect();
    outcome(at(0.0) < at(1.0) && at(1.0) >= 0.9, format!("success by lambda [{}]", curve.join(" ")))
}

fn mu_curve_check() -> Outcome {
    let grid: Vec<f64> = (0..=8).map(|i| (18 + 4 * i) as f64 / 100.0).collect();
    let curve = run_mu_curve(0.03, 0.2, 500, 0.5, &grid).unwrap();
    let at_q = run_mu_curve(0.03, 0.2, 500, 0.5, &[0.03]).unwrap()[0].n_mu;
    let negative = curve.iter().all(|c| c.n_mu < 0.0);
    let decreasing = curve.windows(2).all(|w| w[1].n_mu < w[0].n_mu);
    outcome(
        negative && decreasing && at_q == 0.0,
        format!(
            "n*mu(0.18) {:.3}, n*mu(0.50) {:.3}, negative {negative}, decreasing {decreasing}, n*mu(q) {at_q}",
            curve[0].n_mu,
            curve[8].n_mu
        ),
    )
}

fn dcsbm_check() -> Outcome {
    let cells: Vec<Cell> = (2..=4).map(|k| Cell::degree_corrected(k, 5.0).unwrap()).collect();
    let rows = run_success_table(&cells, &Estimator::standard(), &ScanConfig::dcsbm(18), REPS, SEED).unwrap();
    let cbic = rates(&rows, "cbic(lambda=1)");
    outcome(
        cbic.iter().all(|&(_, p)| p >= 0.85),
        format!(
            "cbic [{}]; bic [{}]; unrefined cbic [{}]",
            fmt_rates(&cbic),
            fmt_rates(&rates(&rows, "bic")),
            fmt_rates(&rates(&rows, "cbic(lambda=1)/unrefined"))
        ),
    )
}

fn random_graph(n: usize, mode: EdgeMode, density: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let w = if mode == EdgeMode::Binary { 1 } else { rng.random_range(1..4) };
                edges.push((i, j, w));
            }
        }
    }
    Graph::from_edges(n, mode, edges).unwrap().0
}

/// Bernoulli profile from a direct pass over node pairs: each unordered
/// block pair contributes `N * gamma(E / N)`.
fn sbm_profile_oracle(g: &Graph, labels: &[usize], k: usize) -> f64 {
    let dense = g.to_dense();
    let mut pairs = vec![0.0; k * k];
    let mut edges = vec![0.0; k * k];
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            let (a, b) = (labels[i].min(labels[j]), labels[i].max(labels[j]));
            pairs[a * k + b] += 1.0;
            edges[a * k + b] += dense[(i, j)];
        }
    }
    pairs
        .iter()
        .zip(&edges)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, e)| p * gamma(e / p).unwrap())
        .sum()
}

fn oracle_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    let mut formula_gap: f64 = 0.0;
    let mut refine_excess = 0;
    for t in 0..50 {
        let n = rng.random_range(3..=8);
        let (model, mode) = if t % 2 == 0 { (Model::Sbm, EdgeMode::Binary) } else { (Model::Dcsbm, EdgeMode::Counts) };
        let g = random_graph(n, mode, rng.random_range(0.2..0.8), &mut rng);
        for k in 1..=2 {
            // every label vector, not just canonical ones
            let mut best = f64::NEG_INFINITY;
            for code in 0..(k as u32).pow(n as u32) {
                let labels: Vec<usize> = (0..n).map(|i| (code / (k as u32).pow(i as u32)) as usize % k).collect();
                let z = Assignment::new(labels.clone(), k).unwrap().canonical();
                let value = model.profile(&g, &z).unwrap();
                if model == Model::Sbm {
                    let oracle = sbm_profile_oracle(&g, &labels, k);
                    formula_gap = formula_gap.max((oracle - value).abs() / value.abs().max(1.0));
                }
                best = best.max(value);
            }
            let (library, _) = exhaustive_max_profile(&g, k, model).unwrap();
            if library != best {
                mismatches += 1;
            }
            let z0 = Assignment::new((0..n).map(|_| rng.random_range(0..k)).collect(), k).unwrap();
            if refine_labels(&g, &z0, model, 100).unwrap().profile > library {
                refine_excess += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && refine_excess == 0 && formula_gap < 1e-12,
        format!(
            "100 (graph, k) cases: {mismatches} max mismatches, {refine_excess} refinements above the max, \
             pair-loop formula gap {formula_gap:.1e}"
        ),
    )
}

fn identity_check() -> Outcome {
    let mut failures = Vec::new();

    let mut lambda_zero = true;
    for n in [2usize, 10, 60, 500, 1000, 100_000] {
        for k in 1..=18 {
            lambda_zero &= penalty_value(&Penalty::new(PenaltyKind::Cbic, 0.0).unwrap(), k, n)
                == penalty_value(&Penalty::bic(), k, n);
        }
    }
    if !lambda_zero {
        failures.push("cbic(0) != bic");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut omega_gap: f64 = 0.0;
    let mut pooling = true;
    let mut counts = true;
    let mut eigen_residual: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(10..40);
        let k = rng.random_range(2..5);
        let g = random_graph(n, EdgeMode::Counts, 0.3, &mut rng);
        let z = Assignment::new((0..n).map(|i| if i < k { i } else { rng.random_range(0..k) }).collect(), k).unwrap();

        let est = mle_omega(&degrees(&g), &z).unwrap();
        for (a, &size) in z.block_sizes().iter().enumerate() {
            if est.degenerate_blocks.contains(&a) {
                continue;
            }
            let s: f64 = (0..n).filter(|&i| z.label(i) == a).map(|i| est.omega[i]).sum();
            omega_gap = omega_gap.max((s - size as f64).abs() / size as f64);
        }

        let cs = count_stats(&g, &z).unwrap();
        let dense = g.to_dense();
        let mut m = DMatrix::<f64>::zeros(k, k);
        let mut np = DMatrix::<f64>::zeros(k, k);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[(z.label(i), z.label(j))] += dense[(i, j)];
                    np[(z.label(i), z.label(j))] += 1.0;
                }
            }
        }
        counts &= cs.m_pair == m && cs.n_pair == np;

        let theta = DMatrix::from_fn(k, k, |a, b| 0.1 + 0.05 * (a + b) as f64);
        let sizes = z.block_sizes();
        let params = SbmParams::with_sizes(theta, &sizes).unwrap();
        let scheme = best_merge(&params).unwrap();
        let pooled = scheme.pool_counts(&cs).unwrap();
        let direct = count_stats(&g, &scheme.merge_labels(&z).unwrap()).unwrap();
        pooling &= pooled == direct;

        let lap = normalized_laplacian(&g);
        let adj = g.to_dense();
        for mat in [&lap, &adj] {
            let pairs = top_eigenpairs(mat, k).unwrap();
            for j in 0..k {
                let v = pairs.vectors.column(j);
                eigen_residual = eigen_residual.max((mat * v - v * pairs.values[j]).norm());
            }
        }
    }
    if omega_gap > 1e-12 {
        failures.push("omega constraint");
    }
    if !pooling {
        failures.push("merge pooling");
    }
    if !counts {
        failures.push("count_stats");
    }
    if eigen_residual > 1e-8 {
        failures.push("eigen residual");
    }
    outcome(
        failures.is_empty(),
        format!(
            "cbic(0)==bic {lambda_zero}; omega relative gap {omega_gap:.1e}; pooling {pooling}; \
             count_stats {counts}; max eigen residual {eigen_residual:.1e}; failed {failures:?}"
        ),
    )
}

fn determinism_check() -> Outcome {
    let mut specs = Vec::new();
    let mut s = ExperimentSpec::new(Design::Sim1, SEED);
    s.reps = 6;
    specs.push(s);
    for design in [Design::Sim3, Design::Sim5, Design::LambdaSweep] {
        let mut s = ExperimentSpec::new(design, SEED);
        s.reps = 3;
        s.k_values = vec![2, 3];
        s.k_max = 6;
        s.lambdas = vec![0.0, 1.0];
        specs.push(s);
    }
    let mut s = ExperimentSpec::new(Design::Sim4, SEED);
    s.reps = 2;
    s.rho = vec![0.7];
    s.k_max = 6;
    specs.push(s);
    specs.push(ExperimentSpec::new(Design::MuCurve, SEED));
    let mut identical = 0;
    for spec in &specs {
        // re-run from the serialized manifest form
        let manifest = serde_json::to_string(spec).unwrap();
        let again: ExperimentSpec = serde_json::from_str(&manifest).unwrap();
        if run_experiment(spec).unwrap().files == run_experiment(&again).unwrap().files {
            identical += 1;
        }
    }
    outcome(
        identical == specs.len(),
        format!("{identical}/{} designs reproduced byte-identical files", specs.len()),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        all &= o.pass;
        println!(
            "acceptance {id} {name}: {} ({:.1}s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    };
    let d = sim1();
    report(1, "wilks", &mut || wilks_check(&d));
    report(2, "underfit", &mut || underfit_check(&d));
    report(3, "table1", &mut table1_check);
    report(4, "lambda-sweep", &mut sweep_check);
    report(5, "mu-curve", &mut mu_curve_check);
    report(6, "dcsbm-table", &mut dcsbm_check);
    report(7, "oracle", &mut oracle_check);
    report(8, "identities", &mut identity_check);
    report(9, "determinism", &mut determinism_check);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
