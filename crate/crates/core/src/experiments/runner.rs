//! Named simulation designs as serializable run descriptions. A spec fully
//! determines the CSV bytes it produces.

use serde::{Deserialize, Serialize};

use super::output::{k_hats_csv, sim1_summary_csv};
use super::{
    histogram_csv, mu_curve_csv, run_lambda_sweep, run_mu_curve, run_sim1_distributions, run_success_table, sim1_csv,
    table_csv, Cell, Estimator, ScanConfig, BASE_PROBABILITY,
};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::simgen::homogeneous_theta;
use crate::spectral::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Distributions of the three likelihood-ratio statistics.
    Sim1,
    /// Lambda sweep on the homogeneous design.
    Sim2,
    /// Success table, homogeneous Bernoulli design.
    Sim3,
    /// Success table, four-block non-homogeneous design.
    Sim4,
    /// Success table, degree-corrected Poisson design.
    Sim5,
    LambdaSweep,
    MuCurve,
}

impl Design {
    pub fn name(self) -> &'static str {
        match self {
            Design::Sim1 => "sim1",
            Design::Sim2 => "sim2",
            Design::Sim3 => "sim3",
            Design::Sim4 => "sim4",
            Design::Sim5 => "sim5",
            Design::LambdaSweep => "lambda-sweep",
            Design::MuCurve => "mu-curve",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub design: Design,
    pub seed: u64,
    pub reps: usize,
    /// Within-block boost of the homogeneous designs.
    pub r: f64,
    pub rho: Vec<f64>,
    pub k_values: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub k_min: usize,
    pub k_max: usize,
    pub refine: bool,
    pub model: Model,
    pub method: Method,
    /// Network size and block count of the distribution design.
    pub n: usize,
    pub k: usize,
    /// Free constant of the overfit bound.
    pub overfit_c: f64,
    pub histogram_bins: usize,
    pub q: f64,
    pub c3: f64,
    pub x1: f64,
    pub p_grid: Vec<f64>,
}

impl ExperimentSpec {
    /// Full-scale defaults for a design.
    pub fn new(design: Design, seed: u64) -> Self {
        let dc = design == Design::Sim5;
        ExperimentSpec {
            design,
            seed,
            reps: 200,
            r: 5.0,
            rho: vec![0.7, 0.8, 0.9, 1.0, 1.2],
            k_values: (2..=8).collect(),
            lambdas: (0..=14).map(|i| i as f64 * 0.25).collect(),
            k_min: 1,
            k_max: 18,
            refine: true,
            model: if dc { Model::Dcsbm } else { Model::Sbm },
            method: if dc { Method::Score } else { Method::Spectral },
            n: 500,
            k: 3,
            overfit_c: 0.5,
            histogram_bins: 30,
            q: BASE_PROBABILITY,
            c3: 0.2,
            x1: 0.5,
            p_grid: (0..=47).map(|i| (3 + i) as f64 / 100.0).collect(),
        }
    }

    fn scan(&self) -> ScanConfig {
        ScanConfig {
            model: self.model,
            method: self.method,
            k_min: self.k_min,
            k_max: self.k_max,
            refine: self.refine,
        }
    }

    /// Checks that fail before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        let tabular = !matches!(self.design, Design::Sim1 | Design::MuCurve);
        if self.design != Design::MuCurve && self.reps == 0 {
            return bad("reps must be positive");
        }
        if tabular && (self.k_min == 0 || self.k_min > self.k_max) {
            return bad("k range must satisfy 1 <= kmin <= kmax");
        }
        if self.design == Design::Sim1 && (self.k < 2 || self.n < 2 * self.k) {
            return bad("the distribution design needs k >= 2 and n >= 2k");
        }
        if matches!(self.design, Design::Sim2 | Design::Sim3 | Design::Sim5 | Design::LambdaSweep)
            && self.k_values.iter().any(|&k| k == 0 || k > 8)
        {
            return bad("k values must lie in 1..=8");
        }
        if self.design == Design::Sim4 && self.rho.is_empty() {
            return bad("rho list is empty");
        }
        if matches!(self.design, Design::Sim2 | Design::LambdaSweep)
            && (self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l >= 0.0)))
        {
            return bad("lambda grid must be nonempty and nonnegative");
        }
        if self.model == Model::Sbm && self.design == Design::Sim5 {
            return bad("the degree-corrected design produces multi-edges; use model dcsbm");
        }
        if self.histogram_bins == 0 {
            return bad("histogram bins must be positive");
        }
        Ok(())
    }

    fn homogeneous_cells(&self, dc: bool) -> Result<Vec<Cell>> {
        self.k_values
            .iter()
            .map(|&k| if dc { Cell::degree_corrected(k, self.r) } else { Cell::homogeneous(k, self.r) })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutputs {
    /// File name and contents, in write order.
    pub files: Vec<(String, String)>,
    /// Wall-clock seconds per table cell; not part of the reproducible output.
    pub runtime_secs: Vec<(String, f64)>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutputs> {
    spec.validate()?;
    let mut files = Vec::new();
    let mut runtime_secs = Vec::new();
    let table = match spec.design {
        Design::Sim1 => {
            let theta = homogeneous_theta(spec.k, BASE_PROBABILITY, spec.r)?;
            let d = run_sim1_distributions(spec.n, spec.k, &theta, spec.reps, spec.seed, spec.overfit_c)?;
            files.push(("sim1.csv".to_string(), sim1_csv(&d)));
            files.push(("sim1_summary.csv".to_string(), sim1_summary_csv(&d)?));
            for s in [&d.underfit, &d.wilks, &d.overfit] {
                let name = serde_json::to_value(s.kind)?;
                let name = name.as_str().unwrap_or_default();
                files.push((format!("hist_{name}.csv"), histogram_csv(s, spec.histogram_bins)?));
            }
            let theory = serde_json::json!({
                "merge_pair": d.merge_pair,
                "underfit": d.underfit.theory,
                "wilks": d.wilks.theory,
                "overfit": d.overfit.theory,
            });
            files.push(("sim1_theory.json".to_string(), serde_json::to_string_pretty(&theory)? + "\n"));
            None
        }
        Design::Sim2 | Design::LambdaSweep => Some(run_lambda_sweep(
            &spec.homogeneous_cells(false)?,
            &spec.lambdas,
            &spec.scan(),
            spec.reps,
            spec.seed,
        )?),
        Design::Sim3 => Some(run_success_table(
            &spec.homogeneous_cells(false)?,
            &estimators(spec),
            &spec.scan(),
            spec.reps,
            spec.seed,
        )?),
        Design::Sim4 => {
            let cells = spec.rho.iter().map(|&rho| Cell::nonhomogeneous(rho)).collect::<Result<Vec<_>>>()?;
            Some(run_success_table(&cells, &estimators(spec), &spec.scan(), spec.reps, spec.seed)?)
        }
        Design::Sim5 => Some(run_success_table(
            &spec.homogeneous_cells(true)?,
            &estimators(spec),
            &spec.scan(),
            spec.reps,
            spec.seed,
        )?),
        Design::MuCurve => {
            let curve = run_mu_curve(spec.q, spec.c3, spec.n, spec.x1, &spec.p_grid)?;
            files.push(("mu_curve.csv".to_string(), mu_curve_csv(&curve)));
            None
        }
    };
    if let Some(rows) = table {
        let name = if matches!(spec.design, Design::Sim2 | Design::LambdaSweep) { "sweep.csv" } else { "table.csv" };
        files.push((name.to_string(), table_csv(&rows)));
        files.push(("k_hats.csv".to_string(), k_hats_csv(&rows)));
        for s in &rows {
            if runtime_secs.last().is_none_or(|(c, _): &(String, f64)| *c != s.cell) {
                runtime_secs.push((s.cell.clone(), s.runtime_secs));
            }
        }
    }
    files.push(("schema.json".to_string(), super::SCHEMA.to_string()));
    Ok(ExperimentOutputs { files, runtime_secs })
}

fn estimators(spec: &ExperimentSpec) -> Vec<Estimator> {
    Estimator::standard()
        .into_iter()
        .filter(|e| spec.refine || !e.refined)
        .collect()
}
