mod commands;
mod config;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cbic::experiments::{Design, ExperimentSpec};
use cbic::io::GraphFormat;
use cbic::selection::PenaltyKind;
use cbic::spectral::Method;
use cbic::Model;

use config::{Manifest, PreprocessConfig, RunConfig, SelectConfig, SimulateConfig};

#[derive(Parser)]
#[command(name = "cbic", version, about = "Select the number of communities in a network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate k for a network file.
    Select(SelectArgs),
    /// Sample a graph and its true labels from a simulation design.
    Simulate(SimulateArgs),
    /// Run a Monte-Carlo design and write its tables.
    Experiment(ExperimentArgs),
    /// Turn a weighted matrix or graph file into a binary edge list.
    Preprocess(PreprocessArgs),
    /// Repeat the run recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Edgelist,
    Dense,
    Weighted,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Edgelist => GraphFormat::Edgelist,
            FormatArg::Dense => GraphFormat::Dense,
            FormatArg::Weighted => GraphFormat::Weighted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Sbm,
    Dcsbm,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Sbm => Model::Sbm,
            ModelArg::Dcsbm => Model::Dcsbm,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Spectral,
    Score,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Spectral => Method::Spectral,
            MethodArg::Score => Method::Score,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyArg {
    Cbic,
    Bic,
    Wb,
}

impl From<PenaltyArg> for PenaltyKind {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::Cbic => PenaltyKind::Cbic,
            PenaltyArg::Bic => PenaltyKind::Bic,
            PenaltyArg::Wb => PenaltyKind::WangBickel,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DesignArg {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
    Sim5,
    LambdaSweep,
    MuCurve,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::Sim1 => Design::Sim1,
            DesignArg::Sim2 => Design::Sim2,
            DesignArg::Sim3 => Design::Sim3,
            DesignArg::Sim4 => Design::Sim4,
            DesignArg::Sim5 => Design::Sim5,
            DesignArg::LambdaSweep => Design::LambdaSweep,
            DesignArg::MuCurve => Design::MuCurve,
        }
    }
}

#[derive(Args)]
struct RefineArgs {
    /// Refine clustering labels by greedy node moves (default).
    #[arg(long, overrides_with = "no_refine")]
    refine: bool,
    /// Use the clustering labels as they are.
    #[arg(long)]
    no_refine: bool,
}

impl RefineArgs {
    fn value(&self) -> bool {
        !self.no_refine || self.refine
    }
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "edgelist")]
    format: FormatArg,
    #[arg(long, value_enum, default_value = "sbm")]
    model: ModelArg,
    /// Defaults to spectral for sbm and score for dcsbm.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum, default_value = "cbic")]
    penalty: PenaltyArg,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 1)]
    kmin: usize,
    #[arg(long, default_value_t = 18)]
    kmax: usize,
    #[command(flatten)]
    refine: RefineArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    #[arg(long)]
    k: Option<usize>,
    /// Network size for sim1.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    design: DesignArg,
    /// Required for every design except mu-curve.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    /// True block counts of the table rows.
    #[arg(long, value_delimiter = ',')]
    k_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    kmin: Option<usize>,
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[command(flatten)]
    refine: RefineArgs,
    /// Network size for sim1 and mu-curve.
    #[arg(long)]
    n: Option<usize>,
    /// Block count for sim1.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    /// Free constant of the overfit bound.
    #[arg(long)]
    overfit_c: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    c3: Option<f64>,
    #[arg(long)]
    x1: Option<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "weighted")]
    format: FormatArg,
    /// Replace a directed weight matrix T by T + T'.
    #[arg(long)]
    symmetrize: bool,
    /// Keep pairs whose weight reaches this upper quantile level.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    largest_component: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

enum Failure {
    Usage(String),
    Run(cbic::Error),
}

impl From<cbic::Error> for Failure {
    fn from(e: cbic::Error) -> Self {
        Failure::Run(e)
    }
}

fn usage<T>(message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(message.into()))
}

fn path_string(p: &std::path::Path) -> String {
    p.to_string_lossy().into_owned()
}

fn select_config(a: &SelectArgs) -> Result<RunConfig, Failure> {
    let model = Model::from(a.model);
    let penalty = PenaltyKind::from(a.penalty);
    let lambda = match (penalty, a.lambda) {
        (PenaltyKind::Bic, Some(_)) => return usage("--lambda has no effect with --penalty bic"),
        (_, Some(l)) if !(l >= 0.0 && l.is_finite()) => return usage("--lambda must be a finite nonnegative number"),
        (_, Some(l)) => l,
        (_, None) => 1.0,
    };
    if a.kmin == 0 || a.kmin > a.kmax {
        return usage("need 1 <= --kmin <= --kmax");
    }
    if matches!(a.format, FormatArg::Weighted) {
        return usage("weighted input must be binarized with `preprocess` first");
    }
    Ok(RunConfig::Select(SelectConfig {
        input: path_string(&a.input),
        format: a.format.into(),
        model,
        method: a.method.map(Method::from).unwrap_or(match model {
            Model::Sbm => Method::Spectral,
            Model::Dcsbm => Method::Score,
        }),
        penalty,
        lambda,
        k_min: a.kmin,
        k_max: a.kmax,
        refine: a.refine.value(),
        seed: a.seed,
    }))
}

fn simulate_config(a: &SimulateArgs) -> Result<RunConfig, Failure> {
    let design = Design::from(a.design);
    match a.design {
        DesignArg::LambdaSweep | DesignArg::MuCurve => {
            return usage(format!("`{}` is not a graph design", design.name()));
        }
        DesignArg::Sim4 if a.k.is_some() || a.r.is_some() => return usage("sim4 takes --rho, not --k or --r"),
        DesignArg::Sim4 => {}
        _ if a.rho.is_some() => return usage("--rho only applies to sim4"),
        _ => {}
    }
    if a.n.is_some() && a.design != DesignArg::Sim1 {
        return usage("--n only applies to sim1");
    }
    let k = a.k.unwrap_or(3);
    if a.design != DesignArg::Sim1 && !(1..=8).contains(&k) {
        return usage("--k must lie in 1..=8");
    }
    Ok(RunConfig::Simulate(SimulateConfig {
        design,
        k: if a.design == DesignArg::Sim4 { 4 } else { k },
        n: a.n.unwrap_or(500),
        r: a.r.unwrap_or(5.0),
        rho: a.rho.unwrap_or(1.0),
        seed: a.seed,
    }))
}

fn experiment_config(a: &ExperimentArgs) -> Result<RunConfig, Failure> {
    use DesignArg::*;
    let d = a.design;
    let tables = matches!(d, Sim2 | Sim3 | Sim4 | Sim5 | LambdaSweep);
    let checks: [(bool, bool, &str); 13] = [
        (a.rho.is_some(), d == Sim4, "--rho"),
        (a.r.is_some(), matches!(d, Sim1 | Sim2 | Sim3 | Sim5 | LambdaSweep), "--r"),
        (a.k_values.is_some(), matches!(d, Sim2 | Sim3 | Sim5 | LambdaSweep), "--k-values"),
        (a.lambdas.is_some(), matches!(d, Sim2 | LambdaSweep), "--lambdas"),
        (a.kmin.is_some() || a.kmax.is_some(), tables, "--kmin/--kmax"),
        (a.model.is_some() || a.method.is_some(), tables, "--model/--method"),
        (a.refine.refine || a.refine.no_refine, tables, "--refine/--no-refine"),
        (a.reps.is_some(), d != MuCurve, "--reps"),
        (a.n.is_some(), matches!(d, Sim1 | MuCurve), "--n"),
        (a.k.is_some() || a.bins.is_some() || a.overfit_c.is_some(), d == Sim1, "--k/--bins/--overfit-c"),
        (a.p_grid.is_some() || a.q.is_some(), d == MuCurve, "--p-grid/--q"),
        (a.c3.is_some() || a.x1.is_some(), d == MuCurve, "--c3/--x1"),
        (a.seed.is_some() || d != MuCurve, true, "--seed"),
    ];
    for (given, allowed, flag) in checks {
        if given && !allowed {
            return usage(format!("{flag} does not apply to design {}", Design::from(d).name()));
        }
    }
    let seed = match (a.seed, d) {
        (Some(s), _) => s,
        (None, MuCurve) => 0,
        (None, _) => return usage("--seed is required for stochastic designs"),
    };
    let mut spec = ExperimentSpec::new(d.into(), seed);
    if let Some(v) = a.reps {
        spec.reps = v;
    }
    if let Some(v) = a.r {
        spec.r = v;
    }
    if let Some(v) = &a.rho {
        spec.rho = v.clone();
    }
    if let Some(v) = &a.k_values {
        spec.k_values = v.clone();
    }
    if let Some(v) = &a.lambdas {
        spec.lambdas = v.clone();
    }
    if let Some(v) = a.kmin {
        spec.k_min = v;
    }
    if let Some(v) = a.kmax {
        spec.k_max = v;
    }
    if let Some(v) = a.model {
        spec.model = v.into();
        if a.method.is_none() {
            spec.method = if spec.model == Model::Dcsbm { Method::Score } else { Method::Spectral };
        }
    }
    if let Some(v) = a.method {
        spec.method = v.into();
    }
    spec.refine = a.refine.value();
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.k {
        spec.k = v;
    }
    if let Some(v) = a.bins {
        spec.histogram_bins = v;
    }
    if let Some(v) = a.overfit_c {
        spec.overfit_c = v;
    }
    if let Some(v) = &a.p_grid {
        spec.p_grid = v.clone();
    }
    if let Some(v) = a.q {
        spec.q = v;
    }
    if let Some(v) = a.c3 {
        spec.c3 = v;
    }
    if let Some(v) = a.x1 {
        spec.x1 = v;
    }
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(RunConfig::Experiment(spec))
}

fn preprocess_config(a: &PreprocessArgs) -> Result<RunConfig, Failure> {
    let weighted = matches!(a.format, FormatArg::Weighted);
    if !weighted && (a.symmetrize || a.threshold.is_some()) {
        return usage("--symmetrize and --threshold need --format weighted");
    }
    match a.threshold {
        None if weighted => return usage("weighted input needs --threshold"),
        Some(t) if !(t > 0.0 && t < 1.0) => return usage("--threshold must lie in (0, 1)"),
        _ => {}
    }
    Ok(RunConfig::Preprocess(PreprocessConfig {
        input: path_string(&a.input),
        format: a.format.into(),
        symmetrize: a.symmetrize,
        threshold: a.threshold,
        largest_component: a.largest_component,
    }))
}

fn read_manifest(path: &std::path::Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if let RunConfig::Experiment(spec) = &m.run {
        spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(m.run)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (config, out_dir) = match &cli.command {
        Command::Select(a) => (select_config(a)?, &a.out_dir),
        Command::Simulate(a) => (simulate_config(a)?, &a.out_dir),
        Command::Experiment(a) => (experiment_config(a)?, &a.out_dir),
        Command::Preprocess(a) => (preprocess_config(a)?, &a.out_dir),
        Command::Rerun(a) => (read_manifest(&a.manifest)?, &a.out_dir),
    };
    let outputs = commands::execute(&config)?;
    commands::write_outputs(&config, &outputs, out_dir)?;
    print!("{}", outputs.summary);
    Ok(())
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message, "exit_code": code }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            return fail("usage", message.lines().next().unwrap_or_default(), 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => fail("usage", &m, 2),
        Err(Failure::Run(e)) if e.is_numerical() => fail("numerical", &e.to_string(), 3),
        Err(Failure::Run(e)) => fail("input", &e.to_string(), 2),
    }
}
