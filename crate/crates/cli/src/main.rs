//! `nescope`: generate or load data, embed it with exact t-SNE and export
//! leave-one-out diagnostics, reliability scores and evaluation metrics.

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{InputSource, PipelineConfig, Preset};
use crate::exit::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "nescope",
    version,
    about = "Reliability diagnostics for t-SNE embeddings"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// JSON pipeline configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "NESCOPE_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Read inputs from a CSV file instead of a generator.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// The CSV input has a header line.
    #[arg(long, global = true)]
    header: bool,
    /// The last CSV column holds integer class labels.
    #[arg(long, global = true)]
    labels: bool,
    /// Built-in synthetic data set.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Sample size for synthetic inputs.
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    perplexity: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Project inputs onto this many principal components first.
    #[arg(long, global = true)]
    pca_dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the input data set to `data.csv`.
    Gen,
    /// Embed and write `embedding.csv` and `loss_trace.csv`.
    Embed,
    /// Add-one stability of the embedding over several sample sizes.
    LooValidate(ValidateArgs),
    /// Per-point perturbation or singularity scores.
    Score(ScoreArgs),
    /// Loss landscape of one added point.
    Landscape(LandscapeArgs),
    /// Images of points on a segment between two inputs.
    Trajectory(TrajectoryArgs),
    /// Choose a perplexity at the elbow of the singularity curve.
    SelectPerplexity(SelectArgs),
    /// Label-aware and label-free quality metrics.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    second_iters: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Perturbation,
    Singularity,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ApproxArg {
    Exact,
    Approx1,
    Approx2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Tsne,
    Umap,
    Largevis,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ColumnArg {
    Exact,
    Approx2,
}

#[derive(Debug, Args)]
struct EmbeddingArg {
    /// Use this embedding (CSV with header, two columns) instead of running t-SNE.
    #[arg(long)]
    embedding: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, value_enum, default_value = "singularity")]
    kind: KindArg,
    #[command(flatten)]
    embedding: EmbeddingArg,
    #[arg(long, value_enum)]
    approximation: Option<ApproxArg>,
    /// Score only border and noise points of a density clustering.
    #[arg(long)]
    prescreen: bool,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    /// Loss whose Hessian defines the singularity score.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, default_value_t = 1.577)]
    umap_a: f64,
    #[arg(long, default_value_t = 0.895)]
    umap_b: f64,
    #[arg(long, default_value_t = 7.0)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct LandscapeArgs {
    #[command(flatten)]
    embedding: EmbeddingArg,
    /// Input coordinates of the added point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long, value_enum)]
    column: Option<ColumnArg>,
}

#[derive(Debug, Args)]
struct TrajectoryArgs {
    #[command(flatten)]
    embedding: EmbeddingArg,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    column: Option<ColumnArg>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long, value_delimiter = ',')]
    candidates: Option<Vec<f64>>,
    #[arg(long)]
    top_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[command(flatten)]
    embedding: EmbeddingArg,
    /// Score report (JSON) to correlate with the entropy difference.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
}

fn column_method(c: ColumnArg) -> nescope_core::loo::ColumnMethod {
    match c {
        ColumnArg::Exact => nescope_core::loo::ColumnMethod::Exact,
        ColumnArg::Approx2 => nescope_core::loo::ColumnMethod::Approx2,
    }
}

impl GlobalArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<(), Failure> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(path) = &self.input {
            if self.preset.is_some() {
                return Err(Failure::usage(anyhow::anyhow!(
                    "--input and --preset are mutually exclusive"
                )));
            }
            cfg.input = InputSource::Csv {
                path: path.clone(),
                header: self.header,
                labels: self.labels,
            };
        } else if let InputSource::Csv { header, labels, .. } = &mut cfg.input {
            *header |= self.header;
            *labels |= self.labels;
        }
        if let Some(p) = self.preset {
            let n = match &cfg.input {
                InputSource::Preset { n, .. } | InputSource::Gmm { n, .. } => *n,
                InputSource::SwissRoll { spec } => spec.n,
                InputSource::Csv { .. } => 500,
            };
            cfg.input = InputSource::Preset { name: p, n };
        }
        if let Some(m) = self.n {
            match &mut cfg.input {
                InputSource::Preset { n, .. } | InputSource::Gmm { n, .. } => *n = m,
                InputSource::SwissRoll { spec } => spec.n = m,
                InputSource::Csv { .. } => {
                    return Err(Failure::usage(anyhow::anyhow!(
                        "--n does not apply to CSV input"
                    )))
                }
            }
        }
        if let Some(p) = self.perplexity {
            cfg.tsne.perplexity = p;
        }
        if let Some(m) = self.max_iter {
            cfg.tsne.max_iter = m;
        }
        if self.pca_dim.is_some() {
            cfg.pca_dim = self.pca_dim;
        }
        Ok(())
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    if threads == Some(0) {
        return Err(Failure::usage(anyhow::anyhow!(
            "--threads must be positive"
        )));
    }
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t);
    }
    b.build_global()
        .map_err(|e| Failure::usage(anyhow::anyhow!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    init_threads(cli.global.threads)?;
    let mut cfg = PipelineConfig::load(cli.global.config.as_deref())?;
    cli.global.apply(&mut cfg)?;
    match &cli.command {
        Command::Score(a) => a.apply(&mut cfg),
        Command::LooValidate(a) => a.apply(&mut cfg),
        Command::Landscape(a) => a.apply(&mut cfg),
        Command::Trajectory(a) => a.apply(&mut cfg),
        Command::SelectPerplexity(a) => a.apply(&mut cfg),
        Command::Metrics(a) => a.apply(&mut cfg),
        Command::Gen | Command::Embed => {}
    }
    cfg.prepare()?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Embed => commands::embed(&cfg),
        Command::LooValidate(_) => commands::loo_validate(&cfg),
        Command::Score(a) => commands::score(
            &cfg,
            matches!(a.kind, KindArg::Perturbation),
            a.embedding.embedding.as_deref(),
        ),
        Command::Landscape(a) => commands::landscape(&cfg, a.embedding.embedding.as_deref()),
        Command::Trajectory(a) => commands::trajectory(&cfg, a.embedding.embedding.as_deref()),
        Command::SelectPerplexity(_) => commands::select_perplexity(&cfg),
        Command::Metrics(a) => {
            commands::metrics(&cfg, a.embedding.embedding.as_deref(), a.scores.as_deref())
        }
    }
}

impl ValidateArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = &self.n_list {
            cfg.validate.n_list = v.clone();
        }
        if let Some(t) = self.trials {
            cfg.validate.trials = t;
        }
        if let Some(s) = self.second_iters {
            cfg.validate.second_iters = s;
        }
    }
}

impl ScoreArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        use nescope_core::scores::{Approximation, PrescreenConfig, SingularityMethod};
        let p = &mut cfg.perturbation;
        if let Some(a) = self.approximation {
            p.approximation = match a {
                ApproxArg::Exact => Approximation::Exact,
                ApproxArg::Approx1 => Approximation::Approx1,
                ApproxArg::Approx2 => Approximation::Approx2,
            };
        }
        if self.prescreen && p.prescreen.is_none() {
            p.prescreen = Some(PrescreenConfig::default());
        }
        if self.lambda.is_some() {
            p.lambda = self.lambda;
        }
        if let Some(d) = self.directions {
            p.directions = d;
        }
        if let Some(m) = self.method {
            cfg.singularity = match m {
                MethodArg::Tsne => SingularityMethod::Tsne,
                MethodArg::Umap => SingularityMethod::Umap {
                    a: self.umap_a,
                    b: self.umap_b,
                },
                // edges are filled in from the similarity graph
                MethodArg::Largevis => SingularityMethod::LargeVis {
                    edges: Default::default(),
                    gamma: self.gamma,
                },
            };
        }
    }
}

impl LandscapeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.x.is_some() {
            cfg.landscape.x = self.x.clone();
        }
        if let Some(r) = self.resolution {
            cfg.landscape.resolution = r;
        }
        if let Some(c) = self.column {
            cfg.landscape.column = column_method(c);
        }
    }
}

impl TrajectoryArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.from.is_some() {
            cfg.trajectory.from = self.from.clone();
        }
        if self.to.is_some() {
            cfg.trajectory.to = self.to.clone();
        }
        if let Some(s) = self.steps {
            cfg.trajectory.steps = s;
        }
        if let Some(c) = self.column {
            cfg.trajectory.column = column_method(c);
        }
    }
}

impl SelectArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(c) = &self.candidates {
            cfg.select.candidates = c.clone();
        }
        if let Some(f) = self.top_fraction {
            cfg.select.top_fraction = f;
        }
    }
}

impl MetricsArgs {
    fn apply(&self, cfg: &mut PipelineConfig) {
        if self.k.is_some() {
            cfg.metrics.k = self.k;
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
