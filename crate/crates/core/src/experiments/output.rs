//! CSV renderings of experiment results. Floats use Rust's shortest
//! round-trip formatting, so identical values give identical bytes.

use std::fmt::Write;

use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous, Normal};

use super::{DistributionSample, MuPoint, ReplicationSummary, Sim1Distributions, Theory};
use crate::error::{Error, Result};

/// Sample moments with standard errors of the mean and of the variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub reps: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    pub se_mean: f64,
    /// `sqrt((m4 - m2^2) / R)` with central sample moments.
    pub se_var: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Result<Moments> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("moments need at least two values".into()));
        }
        let r = values.len() as f64;
        let mean = values.iter().sum::<f64>() / r;
        let m2 = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / r;
        let m4 = values.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / r;
        let var = m2 * r / (r - 1.0);
        Ok(Moments {
            reps: values.len(),
            mean,
            var,
            se_mean: (var / r).sqrt(),
            se_var: ((m4 - m2 * m2).max(0.0) / r).sqrt(),
        })
    }
}

/// Per-replication statistics of the distribution design.
pub fn sim1_csv(d: &Sim1Distributions) -> String {
    let center = match d.underfit.theory {
        Theory::Normal { mean, .. } => mean,
        _ => 0.0,
    };
    let mut out = String::from("rep,underfit_normalized,underfit_centered,underfit_spectral,wilks,wilks_quadratic,overfit\n");
    for r in 0..d.underfit.values.len() {
        let u = d.underfit.values[r];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r,
            u,
            u - center,
            d.underfit_spectral[r],
            d.wilks.values[r],
            d.wilks_quadratic[r],
            d.overfit.values[r]
        );
    }
    out
}

/// Sample moments of each statistic beside its reference values.
pub fn sim1_summary_csv(d: &Sim1Distributions) -> Result<String> {
    let mut out = String::from("statistic,reps,mean,var,se_mean,se_var,theory_mean,theory_var,theory_var_unordered\n");
    let blank = String::new();
    for s in [&d.underfit, &d.wilks, &d.overfit] {
        let m = Moments::of(&s.values)?;
        let (tm, tv, tu) = match s.theory {
            Theory::Normal {
                mean,
                sigma,
                sigma_unordered,
            } => (mean.to_string(), sigma.to_string(), sigma_unordered.to_string()),
            Theory::ChiSquare { df } => (df.to_string(), (2.0 * df).to_string(), blank.clone()),
            Theory::OverfitBound { .. } => (blank.clone(), blank.clone(), blank.clone()),
        };
        let kind = serde_json::to_value(s.kind)?;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            kind.as_str().unwrap_or_default(),
            m.reps,
            m.mean,
            m.var,
            m.se_mean,
            m.se_var,
            tm,
            tv,
            tu
        );
    }
    Ok(out)
}

/// Equal-width histogram over the sample range with the reference density at
/// each bin midpoint. The density column is empty without a reference.
pub fn histogram_csv(sample: &DistributionSample, bins: usize) -> Result<String> {
    if bins == 0 || sample.values.is_empty() {
        return Err(Error::InvalidInput("histogram needs bins and values".into()));
    }
    let lo = sample.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in &sample.values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let density: Box<dyn Fn(f64) -> Option<f64>> = match sample.theory {
        Theory::Normal { mean, sigma, .. } if sigma > 0.0 => {
            let d = Normal::new(mean, sigma.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            Box::new(move |x| Some(d.pdf(x)))
        }
        Theory::ChiSquare { df } => {
            let d = ChiSquared::new(df).map_err(|e| Error::Domain(e.to_string()))?;
            Box::new(move |x| Some(d.pdf(x)))
        }
        _ => Box::new(|_| None),
    };
    let total = sample.values.len() as f64;
    let mut out = String::from("bin_left,bin_right,count,density,theory_density\n");
    for (b, &c) in counts.iter().enumerate() {
        let left = lo + b as f64 * width;
        let right = lo + (b + 1) as f64 * width;
        let theory = density((left + right) / 2.0).map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", left, right, c, c as f64 / (total * width), theory);
    }
    Ok(out)
}

pub fn table_csv(rows: &[ReplicationSummary]) -> String {
    let mut out = String::from(
        "cell,k_true,estimator,penalty,lambda,refined,reps,failures,success_prob,success_prob_completed,mean,var,seed\n",
    );
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.cell,
            s.k_true,
            s.estimator,
            s.penalty.kind.name(),
            s.penalty.lambda,
            s.refined,
            s.reps,
            s.failures,
            s.success_prob,
            s.success_prob_completed,
            s.mean,
            s.var,
            s.seed
        );
    }
    out
}

/// Per-replication selected `k`, one column per estimator; failures are empty.
pub fn k_hats_csv(rows: &[ReplicationSummary]) -> String {
    let mut out = String::from("cell,estimator,rep,k_hat\n");
    for s in rows {
        for (r, k) in s.k_hats.iter().enumerate() {
            let k = k.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", s.cell, s.estimator, r, k);
        }
    }
    out
}

pub fn mu_curve_csv(points: &[MuPoint]) -> String {
    let mut out = String::from("p,n_mu\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.p, p.n_mu);
    }
    out
}

/// Column documentation for every CSV the experiments write.
pub const SCHEMA: &str = r#"{
  "sim1.csv": {
    "rep": "replication index, 0-based",
    "underfit_normalized": "n^-1 L_{k,k-1}, best merge of the true labels against the true parameters",
    "underfit_centered": "underfit_normalized minus the reference mean n*mu",
    "underfit_spectral": "n^-1 L_{k,k-1} with refined spectral labels at k-1",
    "wilks": "2 L_{k,k} at the true labels",
    "wilks_quadratic": "quadratic-form approximation of wilks",
    "overfit": "L_{k,k+1} with refined spectral labels at k+1"
  },
  "sim1_summary.csv": {
    "statistic": "underfit-normalized, wilks or overfit",
    "reps": "replications",
    "mean": "sample mean",
    "var": "unbiased sample variance",
    "se_mean": "standard error of the mean",
    "se_var": "standard error of the variance, sqrt((m4 - m2^2)/R)",
    "theory_mean": "n*mu for the underfit statistic, df for wilks",
    "theory_var": "sigma for the underfit statistic, 2*df for wilks",
    "theory_var_unordered": "underfit variance with each unordered block pair counted once"
  },
  "hist_*.csv": {
    "bin_left": "left bin edge",
    "bin_right": "right bin edge",
    "count": "values in the bin; the last bin is closed",
    "density": "count / (reps * width)",
    "theory_density": "reference density at the bin midpoint, empty if none"
  },
  "table.csv": {
    "cell": "design cell label",
    "k_true": "true number of blocks",
    "estimator": "penalty with lambda, suffixed /unrefined for raw clustering labels",
    "penalty": "cbic, bic or wang-bickel",
    "lambda": "penalty weight",
    "refined": "labels refined by greedy node moves",
    "reps": "replications",
    "failures": "replications that raised an error",
    "success_prob": "k_hat == k_true over all replications, failures count as misses",
    "success_prob_completed": "k_hat == k_true over completed replications",
    "mean": "mean k_hat over completed replications",
    "var": "unbiased variance of k_hat over completed replications",
    "seed": "master seed"
  },
  "k_hats.csv": {
    "cell": "design cell label",
    "estimator": "as in table.csv",
    "rep": "replication index, 0-based",
    "k_hat": "selected k, empty for a failed replication"
  },
  "mu_curve.csv": {
    "p": "within-block probability",
    "n_mu": "n * mu for the homogeneous design"
  }
}
"#;
