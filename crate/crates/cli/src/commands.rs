use std::fmt::Write as _;
use std::path::Path;

use cbic::experiments::{run_experiment, Design, ExperimentSpec};
use cbic::graph::{largest_connected_component, symmetrize_trade, threshold_quantile};
use cbic::io::{load_graph, write_atomic, write_edgelist, write_labels, GraphFormat, Loaded};
use cbic::seeding::{self, stream};
use cbic::selection::{fit_candidates, FitConfig, Penalty};
use cbic::simgen::{
    balanced_sizes, homogeneous_theta, nonhomogeneous_theta, sample_dcsbm, sample_sbm, sequence_sizes, OmegaMixture,
    SbmDesign,
};
use cbic::{EdgeMode, Error, Graph, Model, Result};

use crate::config::{Manifest, PreprocessConfig, RunConfig, SelectConfig, SimulateConfig};

/// Files produced by a run, written only after the computation succeeds.
pub struct Outputs {
    pub files: Vec<(String, Vec<u8>)>,
    /// Printed on standard output.
    pub summary: String,
    /// Machine-specific extras written beside the manifest, never compared.
    pub extras: Vec<(String, Vec<u8>)>,
}

pub fn execute(run: &RunConfig) -> Result<Outputs> {
    match run {
        RunConfig::Select(c) => select(c),
        RunConfig::Simulate(c) => simulate(c),
        RunConfig::Experiment(spec) => experiment(spec),
        RunConfig::Preprocess(c) => preprocess(c),
    }
}

/// Writes the outputs and the manifest into `out_dir`.
pub fn write_outputs(run: &RunConfig, out: &Outputs, out_dir: &Path) -> Result<()> {
    for (name, bytes) in out.files.iter().chain(&out.extras) {
        write_atomic(&out_dir.join(name), bytes)?;
    }
    let manifest = Manifest::new(run.clone(), out.files.iter().map(|(n, _)| n.clone()).collect());
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    write_atomic(&out_dir.join("manifest.json"), text.as_bytes())
}

fn edge_mode(model: Model) -> EdgeMode {
    match model {
        Model::Sbm => EdgeMode::Binary,
        Model::Dcsbm => EdgeMode::Counts,
    }
}

fn open(path: &str, format: GraphFormat, mode: EdgeMode) -> Result<Loaded> {
    load_graph(Path::new(path), format, mode).map_err(|e| match e {
        Error::Io(io) => Error::InvalidInput(format!("{path}: {io}")),
        e => e,
    })
}

fn load(path: &str, format: GraphFormat, mode: EdgeMode) -> Result<Graph> {
    match open(path, format, mode)? {
        Loaded::Graph(g, report) => {
            if report.self_loops_dropped + report.duplicates > 0 {
                log::warn!(
                    "{path}: dropped {} self-loops, merged {} repeated pairs",
                    report.self_loops_dropped,
                    report.duplicates
                );
            }
            Ok(g)
        }
        Loaded::Weights(_) => Err(Error::InvalidInput(
            "weighted input must be binarized with `preprocess` first".into(),
        )),
    }
}

fn select(c: &SelectConfig) -> Result<Outputs> {
    let g = load(&c.input, c.format, edge_mode(c.model))?;
    let penalty = Penalty::new(c.penalty, c.lambda)?;
    let cfg = FitConfig::new(c.model, c.method, c.refine, c.seed);
    let fits = fit_candidates(&g, c.k_min, c.k_max, &cfg)?;
    let report = fits.select(&penalty);
    let mut summary = format!("k_hat = {}\n", report.k_hat);
    summary.push_str("k,criterion_value\n");
    for r in &report.per_k {
        let _ = writeln!(summary, "{},{}", r.k, r.criterion_value);
    }
    for f in &report.failures {
        let _ = writeln!(summary, "k = {} failed: {}", f.k, f.error);
    }
    Ok(Outputs {
        files: vec![
            ("report.json".into(), (report.to_json()? + "\n").into_bytes()),
            ("per_k.csv".into(), report.to_csv().into_bytes()),
            ("labels.txt".into(), {
                let mut buf = Vec::new();
                let best = report.per_k.iter().find(|r| r.k == report.k_hat).expect("k_hat is a fitted k");
                write_labels(&best.labels, &mut buf)?;
                buf
            }),
        ],
        summary,
        extras: Vec::new(),
    })
}

fn simulate(c: &SimulateConfig) -> Result<Outputs> {
    let design = match c.design {
        Design::Sim1 => SbmDesign::new(balanced_sizes(c.n, c.k)?, homogeneous_theta(c.k, 0.03, c.r)?, c.seed)?,
        Design::Sim2 | Design::Sim3 | Design::Sim5 => {
            SbmDesign::new(sequence_sizes(c.k)?, homogeneous_theta(c.k, 0.03, c.r)?, c.seed)?
        }
        Design::Sim4 => SbmDesign::new(sequence_sizes(4)?, nonhomogeneous_theta(c.rho)?, c.seed)?,
        Design::LambdaSweep | Design::MuCurve => {
            return Err(Error::InvalidInput(format!("`{}` is not a graph design", c.design.name())));
        }
    };
    let mut rng = seeding::rng(seeding::derive(c.seed, stream::GRAPH, 0));
    let mut files = Vec::new();
    let (g, truth) = if c.design == Design::Sim5 {
        let (g, z, omega) = sample_dcsbm(&design, &OmegaMixture::default(), &mut rng)?;
        let text: String = omega.iter().map(|w| format!("{w}\n")).collect();
        files.push(("omega.txt".to_string(), text.into_bytes()));
        (g, z)
    } else {
        sample_sbm(&design, &mut rng)?
    };
    let mut edges = Vec::new();
    write_edgelist(&g, &mut edges)?;
    let mut labels = Vec::new();
    write_labels(&truth, &mut labels)?;
    files.insert(0, ("labels.txt".to_string(), labels));
    files.insert(0, ("graph.edgelist".to_string(), edges));
    Ok(Outputs {
        summary: format!("{} nodes, {} edges, k = {}\n", g.n(), g.edges().count(), truth.k()),
        files,
        extras: Vec::new(),
    })
}

fn experiment(spec: &ExperimentSpec) -> Result<Outputs> {
    let out = run_experiment(spec)?;
    let timing: Vec<serde_json::Value> = out
        .runtime_secs
        .iter()
        .map(|(cell, secs)| serde_json::json!({ "cell": cell, "seconds": secs }))
        .collect();
    let names: Vec<&str> = out.files.iter().map(|(n, _)| n.as_str()).collect();
    Ok(Outputs {
        summary: format!("{}: wrote {}\n", spec.design.name(), names.join(", ")),
        files: out.files.into_iter().map(|(n, s)| (n, s.into_bytes())).collect(),
        extras: vec![("timing.json".into(), (serde_json::to_string_pretty(&timing)? + "\n").into_bytes())],
    })
}

fn preprocess(c: &PreprocessConfig) -> Result<Outputs> {
    let g = match open(&c.input, c.format, EdgeMode::Binary)? {
        Loaded::Weights(w) => {
            let w = if c.symmetrize { symmetrize_trade(&w)? } else { w };
            let alpha = c
                .threshold
                .ok_or_else(|| Error::InvalidInput("weighted input needs --threshold".into()))?;
            threshold_quantile(&w, alpha)?
        }
        Loaded::Graph(g, _) => g,
    };
    let mut files = Vec::new();
    let g = if c.largest_component {
        let comp = largest_connected_component(&g)?;
        let map: String = std::iter::once("new,old\n".to_string())
            .chain(comp.new_to_old.iter().enumerate().map(|(new, old)| format!("{},{}\n", new + 1, old + 1)))
            .collect();
        files.push(("node_map.csv".to_string(), map.into_bytes()));
        comp.graph
    } else {
        g
    };
    let mut edges = Vec::new();
    write_edgelist(&g, &mut edges)?;
    files.insert(0, ("graph.edgelist".to_string(), edges));
    Ok(Outputs {
        summary: format!("{} nodes, {} edges\n", g.n(), g.edges().count()),
        files,
        extras: Vec::new(),
    })
}
