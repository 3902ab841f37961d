//! Command-line front end: argument parsing, dispatch, output files and run
//! manifests.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geomgraph::GeometryGraph;
use crate::ndcore::{encode_checkpoint, read_checkpoint, Parameters};
use crate::tomosim::io::{atomic_write, to_u8, write_array, write_pgm};
use crate::traineval::{
    evaluate, generalization_sweep, generate_dataset, generate_split, grad_check_suite, grayscale_histogram, pretrain_autoencode,
    reconstruct, scaling_report, sweep_drop, to_csv, train_pipeline, Dataset, ExperimentConfig, Operators, Pipeline, Split,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const CONFIG_HELP: &str = "\
CONFIGURATION (TOML; every key optional, unknown keys are rejected)

[network]    kind = \"glm\" | \"cnn\"        (glm)
             channels = <int>                 (16)
             kernel_size = <odd int>          (7)
             modules = <int >= 2>             (3)
[gamma]      channels = <int>                 (16)   image network width
[training]   lr = <float>                     (5e-5)
             batch_size = <int>               (8)
             epochs = <int>                   (10)
             pretrain_epochs = <int>          (1)    sinogram autoencoding
             seed = <int>                     (0)    init and shuffling
[dataset]    phantom = \"random_ellipses\" | \"shepp_logan\"
             image_size = <int >= 32>         (64)
             n_views = <int >= 3>             (90)
             detector_pixels = <int>          (96)
             beam = \"parallel\" | \"fan\"      (parallel)
             orbit_radius = <float>           (4.0)  fan beam only, > sqrt 2
             photons = <float>                (1e5)  0 disables noise
             train / val / test = <int>       (200 / 32 / 32)
             seed = <int>                     (0)
[sweep]      factors = [<int >= 1>, ...]      ([1, ..., 10])
[scaling]    kinds = [\"glm\", \"cnn\"]
             channels = [4, 8, 16, 24, 32, 64]
             batch_sizes = [2, 4, 6, 8, 10]
             timing_channels = [16]
             repeats = <int>                  (1)

--seed overrides both training.seed and dataset.seed.

EXIT CODES: 0 success, 1 runtime failure, 2 usage or configuration error.";

#[derive(Debug, Parser)]
#[command(name = "glmct", version, about = "Graph-line modules for learned CT reconstruction", after_long_help = CONFIG_HELP)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment configuration file (TOML). Defaults apply when omitted.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides training.seed and dataset.seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic dataset (images and sinograms).
    GenData(CommonArgs),
    /// Pretrain and train the reconstruction pipeline; writes a checkpoint.
    Train(CommonArgs),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
    },
    /// Evaluate a checkpoint under angular subsampling, without retraining.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
    },
    /// Parameter counts, memory estimates and batch training times.
    Scaling(CommonArgs),
    /// Write the geometry graph of the configured acquisition.
    GraphDump {
        #[command(flatten)]
        common: CommonArgs,
        /// Angular subsampling factor applied before building the graph.
        #[arg(long, default_value_t = 1)]
        factor: usize,
    },
    /// Finite-difference check of every backward pass.
    GradCheck(CommonArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Eval { .. } => "eval",
            Command::Sweep { .. } => "sweep",
            Command::Scaling(_) => "scaling",
            Command::GraphDump { .. } => "graph-dump",
            Command::GradCheck(_) => "grad-check",
        }
    }

    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::GenData(c) | Command::Train(c) | Command::Scaling(c) | Command::GradCheck(c) => c,
            Command::Eval { common, .. } | Command::Sweep { common, .. } | Command::GraphDump { common, .. } => common,
        }
    }
}

/// Parses arguments and loads the configuration, applying the seed override.
pub fn parse_and_validate<I, T>(args: I) -> std::result::Result<(Command, ExperimentConfig), clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let common = cli.command.common();
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => Ok(ExperimentConfig::default()),
    }
    .map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))?;
    if let Some(seed) = common.seed {
        cfg.training.seed = seed;
        cfg.dataset.seed = seed;
    }
    if let Command::GraphDump { factor, .. } = &cli.command {
        if *factor == 0 {
            return Err(clap::Error::raw(
                clap::error::ErrorKind::ValueValidation,
                "--factor must be >= 1\n",
            ));
        }
    }
    Ok((cli.command, cfg))
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    files: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Collects output files and writes them atomically, followed by the
/// manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        self.files.push(name.to_string());
        Ok(p)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name)?;
        atomic_write(&p, bytes)
    }

    fn finish(self, command: &'static str, cfg: &ExperimentConfig) -> Result<()> {
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.training.seed,
            files: self.files,
            config: cfg,
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::arg(format!("manifest: {e}")))?;
        atomic_write(&self.dir.join("manifest.toml"), text.as_bytes())
    }
}

fn load_pipeline(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<Pipeline> {
    let mut pipe = Pipeline::init(cfg)?;
    let records = read_checkpoint(checkpoint).map_err(|e| match e {
        Error::Io(io) => Error::arg(format!("cannot read checkpoint {}: {io}", checkpoint.display())),
        other => other,
    })?;
    pipe.load_named(&records)?;
    Ok(pipe)
}

/// Dataset with only the test split populated.
fn test_split(cfg: &ExperimentConfig) -> Result<Dataset> {
    let geometry = cfg.dataset.geometry()?;
    Ok(Dataset {
        test: generate_split(&cfg.dataset, &geometry, Split::Test)?,
        train: Vec::new(),
        val: Vec::new(),
        geometry,
    })
}

fn float_cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Runs a parsed command.
pub fn dispatch(cmd: &Command, cfg: &ExperimentConfig) -> Result<()> {
    let mut out = Outputs::new(&cmd.common().out)?;
    match cmd {
        Command::GenData(_) => {
            let data = generate_dataset(&cfg.dataset)?;
            let digest = Some(data.geometry.digest());
            for (split, samples) in [("train", &data.train), ("val", &data.val), ("test", &data.test)] {
                for (i, s) in samples.iter().enumerate() {
                    write_array(&out.path(&format!("{split}/{i:04}_image.f64"))?, &s.image, None)?;
                    write_array(&out.path(&format!("{split}/{i:04}_sino.f64"))?, &s.sinogram, digest)?;
                }
            }
            if let Some(s) = data.test.first() {
                write_pgm(&out.path("preview_image.pgm")?, &s.image)?;
                write_pgm(&out.path("preview_sino.pgm")?, &s.sinogram)?;
            }
        }
        Command::Train(_) => {
            let data = generate_dataset(&cfg.dataset)?;
            let mut pipe = Pipeline::init(cfg)?;
            let pre = pretrain_autoencode(&mut pipe.net, &data.geometry, &data.train, &cfg.training)?;
            let curve = train_pipeline(&mut pipe, &data.geometry, cfg.dataset.grid(), &data.train, &data.val, &cfg.training)?;
            out.write("checkpoint.glmckpt", &encode_checkpoint(&pipe.named_tensors()))?;
            let mut text = String::from("epoch,loss\n");
            for (i, l) in pre.iter().enumerate() {
                text.push_str(&format!("{},{}\n", i + 1, l));
            }
            out.write("pretrain_loss.csv", text.as_bytes())?;
            let mut text = String::from("epoch,train_loss,val_loss\n");
            for r in &curve {
                text.push_str(&format!("{},{},{}\n", r.epoch, float_cell(r.train_loss), r.val_loss));
            }
            out.write("loss_curve.csv", text.as_bytes())?;
            if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
                eprintln!(
                    "{}: validation loss {:.6} -> {:.6} over {} epochs",
                    cfg.network.name(),
                    first.val_loss,
                    last.val_loss,
                    last.epoch
                );
            }
        }
        Command::Eval { checkpoint, .. } => {
            let data = test_split(cfg)?;
            let pipe = load_pipeline(cfg, checkpoint)?;
            let ops = Operators::new(cfg.network.kind, &data.geometry, cfg.dataset.grid())?;
            let metrics = evaluate(&pipe, &ops, &data.test)?;
            let mut text = String::from("sample,psnr,ssim\n");
            for (i, m) in metrics.iter().enumerate() {
                text.push_str(&format!("{i},{},{}\n", m.psnr, m.ssim));
            }
            out.write("metrics.csv", text.as_bytes())?;
            if let Some(s) = data.test.first() {
                let rec = reconstruct(&pipe, &ops, &s.sinogram)?;
                let h_rec = grayscale_histogram(&to_u8(&rec)?);
                let h_gt = grayscale_histogram(&to_u8(&s.image)?);
                let mut text = String::from("bin,reconstruction,ground_truth\n");
                for b in 0..256 {
                    text.push_str(&format!("{b},{},{}\n", h_rec.bins[b], h_gt.bins[b]));
                }
                out.write("histogram.csv", text.as_bytes())?;
                write_pgm(&out.path("reconstruction.pgm")?, &rec)?;
                write_pgm(&out.path("ground_truth.pgm")?, &s.image)?;
            }
        }
        Command::Sweep { checkpoint, .. } => {
            let data = test_split(cfg)?;
            let pipe = load_pipeline(cfg, checkpoint)?;
            let rows = generalization_sweep(&pipe, &data.geometry, cfg.dataset.grid(), &data.test, &cfg.sweep.factors)?;
            out.write("sweep.csv", &to_csv(&rows)?)?;
            if let Some((dp, ds)) = sweep_drop(&rows) {
                eprintln!("{}: PSNR drop {dp:.3} dB, SSIM drop {ds:.4}", cfg.network.name());
            }
        }
        Command::Scaling(_) => {
            let report = scaling_report(&cfg.scaling, &cfg.dataset, cfg.training.seed)?;
            out.write("scaling.csv", &to_csv(&report.sizes)?)?;
            out.write("timing.csv", &to_csv(&report.timings)?)?;
        }
        Command::GraphDump { factor, .. } => {
            let geometry = cfg.dataset.geometry()?.subsample(*factor)?;
            let graph = GeometryGraph::from_geometry(&geometry)?;
            out.write("graph.txt", graph.to_dump().as_bytes())?;
        }
        Command::GradCheck(_) => {
            let reports = grad_check_suite(cfg.training.seed)?;
            let mut text = String::from("check,passed,checked,excluded,max_rel_error,tolerance\n");
            for r in &reports {
                eprintln!("{}", r.summary());
                text.push_str(&format!(
                    "{},{},{},{},{:e},{:e}\n",
                    r.label,
                    r.passed,
                    r.checked,
                    r.excluded.len(),
                    r.max_rel_error,
                    r.tolerance
                ));
            }
            out.write("grad_check.csv", text.as_bytes())?;
            let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.label.as_str()).collect();
            if !failed.is_empty() {
                out.finish(cmd.name(), cfg)?;
                return Err(Error::arg(format!("gradient check failed: {}", failed.join(", "))));
            }
        }
    }
    out.finish(cmd.name(), cfg)
}

/// Full entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (cmd, cfg) = match parse_and_validate(args) {
        Ok(v) => v,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(&cmd, &cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cmd.name());
            EXIT_RUNTIME
        }
    }
}
