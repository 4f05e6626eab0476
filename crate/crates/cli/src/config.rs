use std::path::{Path, PathBuf};

use anyhow::Context;
use nescope_core::data::{
    load_csv, pca_project, presets, sample_gmm, sample_swiss_roll, CsvOptions, GmmSpec,
    InputMatrix, SwissRollSpec,
};
use nescope_core::loo::{ColumnMethod, PointSampler, SolveStrategy};
use nescope_core::scores::{PerturbationConfig, SingularityMethod};
use nescope_core::tsne::TsneConfig;
use serde::{Deserialize, Serialize};

use crate::exit::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    TwoGmm,
    FiveGmm,
    EightGmm,
    SwissRoll,
}

/// Where the input rows come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum InputSource {
    Preset {
        name: Preset,
        n: usize,
    },
    Gmm {
        spec: GmmSpec,
        n: usize,
    },
    SwissRoll {
        spec: SwissRollSpec,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        header: bool,
        #[serde(default)]
        labels: bool,
    },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Preset {
            name: Preset::TwoGmm,
            n: 500,
        }
    }
}

/// A generative source for fresh points, available for synthetic inputs.
pub enum Sampler {
    Gmm(GmmSpec),
    SwissRoll(SwissRollSpec),
}

impl Sampler {
    pub fn as_dyn(&self) -> &dyn PointSampler {
        match self {
            Sampler::Gmm(s) => s,
            Sampler::SwissRoll(s) => s,
        }
    }

    pub fn sample_n(&self, n: usize, seed: u64) -> nescope_core::Result<InputMatrix> {
        match self {
            Sampler::Gmm(s) => sample_gmm(s, n, seed),
            Sampler::SwissRoll(s) => sample_swiss_roll(&SwissRollSpec {
                n,
                seed,
                ..s.clone()
            }),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateSection {
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub second_iters: usize,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            n_list: vec![200, 500],
            trials: 20,
            second_iters: 250,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LandscapeSection {
    /// Input coordinates of the added point; the midpoint of the first two
    /// class means when unset.
    pub x: Option<Vec<f64>>,
    pub resolution: usize,
    pub column: ColumnMethod,
    pub strategy: SolveStrategy,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            x: None,
            resolution: 60,
            column: ColumnMethod::Exact,
            strategy: SolveStrategy::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectorySection {
    /// Endpoints in input space; the first two class means when unset.
    pub from: Option<Vec<f64>>,
    pub to: Option<Vec<f64>>,
    pub steps: usize,
    pub column: ColumnMethod,
    pub strategy: SolveStrategy,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        Self {
            from: None,
            to: None,
            steps: 100,
            column: ColumnMethod::Exact,
            strategy: SolveStrategy::fast(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectSection {
    pub candidates: Vec<f64>,
    pub top_fraction: f64,
    pub log_scale: bool,
}

impl Default for SelectSection {
    fn default() -> Self {
        Self {
            candidates: vec![5.0, 10.0, 20.0, 30.0, 50.0, 80.0],
            top_fraction: 0.05,
            log_scale: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    /// Neighbourhood size; `n / 5` when unset.
    pub k: Option<usize>,
}

/// Everything a command needs. Loaded from JSON, then patched by flags.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// PCA dimension applied to the inputs before anything else.
    pub pca_dim: Option<usize>,
    pub tsne: TsneConfig,
    pub perturbation: PerturbationConfig,
    pub singularity: SingularityMethod,
    pub validate: ValidateSection,
    pub landscape: LandscapeSection,
    pub trajectory: TrajectorySection,
    pub select: SelectSection,
    pub metrics: MetricsSection,
    pub out: PathBuf,
    /// Drives data sampling, the embedding and every derived RNG stream.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: InputSource::default(),
            pca_dim: None,
            tsne: TsneConfig::default(),
            perturbation: PerturbationConfig::default(),
            singularity: SingularityMethod::Tsne,
            validate: ValidateSection::default(),
            landscape: LandscapeSection::default(),
            trajectory: TrajectorySection::default(),
            select: SelectSection::default(),
            metrics: MetricsSection::default(),
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(Failure::io)?;
        serde_json::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))
            .map_err(Failure::usage)
    }

    /// Checks referenced files and prepares the output directory.
    pub fn prepare(&mut self) -> Result<(), Failure> {
        self.tsne.seed = self.seed;
        if let InputSource::Csv { path, .. } = &self.input {
            if !path.is_file() {
                return Err(Failure::io(anyhow::anyhow!(
                    "input file not found: {}",
                    path.display()
                )));
            }
        }
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))
            .map_err(Failure::io)
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn sampler(&self) -> Option<Sampler> {
        match &self.input {
            InputSource::Preset { name, n } => Some(match name {
                Preset::TwoGmm => Sampler::Gmm(presets::two_gmm_separated()),
                Preset::FiveGmm => Sampler::Gmm(presets::five_gmm()),
                Preset::EightGmm => Sampler::Gmm(presets::eight_gmm()),
                Preset::SwissRoll => Sampler::SwissRoll(presets::swiss_roll(*n, self.seed)),
            }),
            InputSource::Gmm { spec, .. } => Some(Sampler::Gmm(spec.clone())),
            InputSource::SwissRoll { spec } => Some(Sampler::SwissRoll(spec.clone())),
            InputSource::Csv { .. } => None,
        }
    }

    /// Input rows before the optional PCA step.
    pub fn raw_input(&self) -> anyhow::Result<InputMatrix> {
        let x = match &self.input {
            InputSource::Preset { n, .. } | InputSource::Gmm { n, .. } => self
                .sampler()
                .expect("synthetic source")
                .sample_n(*n, self.seed)?,
            InputSource::SwissRoll { spec } => sample_swiss_roll(&SwissRollSpec {
                seed: self.seed,
                ..spec.clone()
            })?,
            InputSource::Csv {
                path,
                header,
                labels,
            } => load_csv(
                path,
                CsvOptions {
                    header: *header,
                    labels: *labels,
                },
            )
            .with_context(|| format!("reading {}", path.display()))?,
        };
        Ok(x)
    }

    /// Input rows after the optional PCA step, labels carried over.
    pub fn input(&self) -> anyhow::Result<InputMatrix> {
        let x = self.raw_input()?;
        let Some(m) = self.pca_dim else {
            return Ok(x);
        };
        let mut p = pca_project(&x, m)?.projected;
        if let Some(l) = x.labels() {
            p = p.with_labels(l.to_vec())?;
        }
        Ok(p)
    }
}
