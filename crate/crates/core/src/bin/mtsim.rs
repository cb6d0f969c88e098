//! Command-line driver: `gen`, `ale`, `sim`, `cluster`, `report`.
//!
//! Settings resolve as flags, then `MTSIM_*` environment variables, then a
//! `key = value` config file (`--config` or `MTSIM_CONFIG`), whose keys are
//! the long flag names.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};

use mtsim::ale::{DEFAULT_BINS, DEFAULT_GRID_KNOTS};
use mtsim::clustering::{cut_tree, symmetrize, ward_cluster};
use mtsim::importance::DEFAULT_REPEATS;
use mtsim::io::{self, BundleSettings, CurveBundle, Manifest, MatrixMeta, TaskMeta};
use mtsim::models::{default_k, fit_knn};
use mtsim::pipeline::{self, ImportanceSource, PipelineConfig, TaskInput};
use mtsim::similarity::{
    flag_unreliable, matrix_from_terms, pairwise_terms, SimilarityOptions, Tau, DEFAULT_EPSILON,
};
use mtsim::synth::{self, TaskRole, DEFAULT_SAMPLES, DEFAULT_SEED};
use mtsim::{Error, Matching, Predictor, Result, TaskDataset};

#[derive(Parser)]
#[command(name = "mtsim", version, about = "Explainable similarity between learned tasks")]
struct Cli {
    /// `key = value` file with defaults for any long flag.
    #[arg(long, global = true, env = "MTSIM_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark datasets.
    Gen {
        #[arg(long, env = "MTSIM_SEED", default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(short, long, env = "MTSIM_N", default_value_t = DEFAULT_SAMPLES)]
        n: usize,
        #[arg(long, env = "MTSIM_OUT", default_value = "data")]
        out: PathBuf,
        /// Also write task_6, Task 1's distribution meant for a degraded model.
        #[arg(long, env = "MTSIM_WITH_DEGRADED")]
        with_degraded: bool,
    },
    /// Estimate curves, importances and losses; write a curve bundle.
    Ale {
        /// Dataset CSV files or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, env = "MTSIM_MODEL", value_enum, default_value_t = ModelChoice::Knn)]
        model: ModelChoice,
        /// Generator manifest; defaults to `manifest.json` next to the first input.
        #[arg(long, env = "MTSIM_MANIFEST")]
        manifest: Option<PathBuf>,
        #[arg(long, env = "MTSIM_BINS", default_value_t = DEFAULT_BINS)]
        bins: usize,
        #[arg(long, env = "MTSIM_GRID_K", default_value_t = DEFAULT_GRID_KNOTS)]
        grid_k: usize,
        #[arg(long, env = "MTSIM_SMOOTH_LAMBDA")]
        smooth_lambda: Option<f64>,
        /// Neighbours for the kNN model; defaults to max(5, n/100).
        #[arg(long, env = "MTSIM_KNN_K")]
        knn_k: Option<usize>,
        #[arg(long, env = "MTSIM_PFI_REPEATS", default_value_t = DEFAULT_REPEATS)]
        pfi_repeats: usize,
        #[arg(long, env = "MTSIM_PFI_SEED", default_value_t = 0)]
        pfi_seed: u64,
        #[arg(long, env = "MTSIM_OUT", default_value = "curves.json")]
        out: PathBuf,
    },
    /// Compute the similarity matrix, metadata and per-feature breakdown.
    Sim {
        bundle: PathBuf,
        #[arg(long, env = "MTSIM_IMPORTANCE", value_enum, default_value_t = ImportanceChoice::Pfi)]
        importance: ImportanceChoice,
        /// CSV `task_id,feature,weight`, used with `--importance file`.
        #[arg(long, env = "MTSIM_IMPORTANCE_FILE")]
        importance_file: Option<PathBuf>,
        /// Multiply each entry by the pair's performance factor.
        #[arg(long, env = "MTSIM_GAMMA")]
        gamma: bool,
        /// Loss threshold for flagging tasks: `median` or a number.
        #[arg(long, env = "MTSIM_TAU")]
        tau: Option<String>,
        #[arg(long, env = "MTSIM_MATCHING", default_value = "by_name")]
        matching: String,
        #[arg(long, env = "MTSIM_EPSILON", default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
        #[arg(long, env = "MTSIM_OUT", default_value = "sim")]
        out: PathBuf,
    },
    /// Ward clustering of a matrix CSV, cut into `k` groups.
    Cluster {
        matrix: PathBuf,
        #[arg(short, long, env = "MTSIM_K", default_value_t = 2)]
        k: usize,
        #[arg(long, env = "MTSIM_OUT", default_value = "cluster")]
        out: PathBuf,
    },
    /// Markdown summary of a `sim` output directory.
    Report {
        sim_dir: PathBuf,
        /// Pairs listed at each end of the ranking.
        #[arg(long, env = "MTSIM_PAIRS", default_value_t = 3)]
        pairs: usize,
        /// Contributing features listed per pair.
        #[arg(long, env = "MTSIM_TOP", default_value_t = 3)]
        top: usize,
        /// Output file; stdout when omitted.
        #[arg(long, env = "MTSIM_OUT")]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelChoice {
    /// The generating function (synthetic tasks only).
    Oracle,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImportanceChoice {
    /// Permutation importances stored in the bundle.
    Pfi,
    Uniform,
    File,
}

/// Exports config-file entries as `MTSIM_*` variables unless already set.
fn load_config(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            path: path.into(),
            msg: format!("line {}: expected `key = value`", i + 1),
        })?;
        let var = format!("MTSIM_{}", key.trim().replace('-', "_").to_uppercase());
        if std::env::var_os(&var).is_none() {
            std::env::set_var(var, value.trim());
        }
    }
    Ok(())
}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    std::env::var_os("MTSIM_CONFIG").map(PathBuf::from)
}

fn collect_datasets(inputs: &[PathBuf]) -> Result<Vec<TaskDataset>> {
    let mut paths = Vec::new();
    for p in inputs {
        if p.is_dir() {
            paths.extend(io::dataset_paths(p)?);
        } else {
            paths.push(p.clone());
        }
    }
    if paths.is_empty() {
        return Err(Error::InvalidArgument("no dataset files found".into()));
    }
    paths.iter().map(|p| io::read_dataset(p)).collect()
}

fn gen(seed: u64, n: usize, out: &Path, with_degraded: bool) -> Result<()> {
    let mut specs = synth::benchmark_specs(n, seed);
    if with_degraded {
        specs.push(synth::degraded_spec(n, seed));
    }
    for spec in &specs {
        let data = synth::generate_task(spec)?;
        let path = out.join(format!("{}.csv", spec.task_id));
        io::write_dataset(&path, &data)?;
        println!("{}", path.display());
    }
    let manifest = out.join("manifest.json");
    io::write_json(&manifest, &Manifest::new(seed, n, specs))?;
    println!("{}", manifest.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ale(
    inputs: &[PathBuf],
    model: ModelChoice,
    manifest: Option<PathBuf>,
    config: PipelineConfig,
    knn_k: Option<usize>,
    out: &Path,
) -> Result<()> {
    let datasets = collect_datasets(inputs)?;
    let manifest_path = manifest.or_else(|| {
        let first = &inputs[0];
        let dir = if first.is_dir() { first.as_path() } else { first.parent()? };
        Some(dir.join("manifest.json")).filter(|p| p.exists())
    });
    let manifest = manifest_path.as_deref().map(Manifest::read).transpose()?;
    let tasks = datasets
        .into_iter()
        .map(|data| {
            let spec = manifest.as_ref().and_then(|m| m.spec(data.task_id()));
            let model: Arc<dyn Predictor> = match (spec, model) {
                (Some(s), _) if s.role == TaskRole::Degraded => {
                    Arc::new(synth::degraded_model(s, &data)?)
                }
                (Some(s), ModelChoice::Oracle) => Arc::new(synth::OracleModel::from_data(s, &data)?),
                (None, ModelChoice::Oracle) => {
                    return Err(Error::InvalidArgument(format!(
                        "oracle model for `{}` needs a generator manifest entry",
                        data.task_id()
                    )))
                }
                (_, ModelChoice::Knn) => {
                    Arc::new(fit_knn(&data, knn_k.unwrap_or_else(|| default_k(data.n_samples())))?)
                }
            };
            Ok(TaskInput::new(data, model))
        })
        .collect::<Result<Vec<_>>>()?;
    let profiles = pipeline::build_profiles(&tasks, &config)?;
    let settings = BundleSettings {
        model: match model {
            ModelChoice::Oracle => "oracle",
            ModelChoice::Knn => "knn",
        }
        .into(),
        bins: config.bins,
        grid_knots: config.grid_knots,
        smooth_lambda: config.smooth_lambda,
        importance: "permutation".into(),
    };
    CurveBundle::from_profiles(settings, &profiles).write(out)?;
    println!("{}", out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sim(
    bundle: &Path,
    importance: ImportanceChoice,
    importance_file: Option<PathBuf>,
    gamma: bool,
    tau: Option<String>,
    matching: &str,
    epsilon: f64,
    out: &Path,
) -> Result<()> {
    let matching: Matching = matching.parse()?;
    let mut profiles = CurveBundle::read(bundle)?.to_profiles()?;
    let importance_label = match importance {
        ImportanceChoice::Pfi => "permutation".to_string(),
        ImportanceChoice::Uniform => {
            profiles = profiles
                .iter()
                .map(|p| p.with_importance(&vec![1.0; p.curves().len()]))
                .collect::<Result<_>>()?;
            "uniform".to_string()
        }
        ImportanceChoice::File => {
            let path = importance_file.ok_or_else(|| {
                Error::InvalidArgument("--importance file requires --importance-file".into())
            })?;
            profiles = io::apply_importance(&profiles, &io::read_importance(&path)?)?;
            format!("file:{}", path.display())
        }
    };
    let opts = SimilarityOptions {
        matching,
        apply_gamma: gamma,
        epsilon,
        ..Default::default()
    };
    let tau = tau.as_deref().map(str::parse::<Tau>).transpose()?;
    let (flags, tau_value) = match tau {
        Some(t) => {
            let losses: Vec<f64> = profiles
                .iter()
                .map(|p| {
                    p.loss().ok_or_else(|| {
                        Error::InvalidArgument(format!("task `{}` has no loss", p.task_id()))
                    })
                })
                .collect::<Result<_>>()?;
            (flag_unreliable(&losses, t)?, Some(t.resolve(&losses)))
        }
        None => (vec![false; profiles.len()], None),
    };
    let terms = pairwise_terms(&profiles, &opts)?;
    let matrix = matrix_from_terms(&profiles, &terms, &opts)?;
    let ids = matrix.task_ids().to_vec();
    let meta = MatrixMeta {
        format: io::MATRIX_META_FORMAT.into(),
        version: io::FORMAT_VERSION,
        convention: io::ROW_CONVENTION.into(),
        matching,
        scaled: gamma,
        epsilon,
        importance: importance_label,
        tau: tau.map(|t| t.to_string()),
        tau_value,
        tasks: profiles
            .iter()
            .zip(&flags)
            .map(|(p, &flagged)| TaskMeta {
                task_id: p.task_id().to_string(),
                loss: p.loss(),
                flagged,
            })
            .collect(),
    };
    io::write_matrix(&out.join("matrix.csv"), &matrix)?;
    io::write_json(&out.join("meta.json"), &meta)?;
    io::write_breakdown(&out.join("breakdown.csv"), &io::breakdown_rows(&ids, &terms))?;
    io::write_importance(&out.join("importance.csv"), &profiles)?;
    println!("{}", out.display());
    Ok(())
}

fn cluster(matrix: &Path, k: usize, out: &Path) -> Result<()> {
    let m = io::read_matrix(matrix, false, Matching::ByName)?;
    let d = ward_cluster(&symmetrize(&m))?;
    let labels = cut_tree(&d, k)?;
    io::write_labels(&out.join("labels.csv"), m.task_ids(), &labels)?;
    io::write_dendrogram(out, &d)?;
    println!("{}", out.display());
    Ok(())
}

fn report(sim_dir: &Path, pairs: usize, top: usize, out: Option<PathBuf>) -> Result<()> {
    let meta = MatrixMeta::read(&sim_dir.join("meta.json"))?;
    let m = io::read_matrix(&sim_dir.join("matrix.csv"), meta.scaled, meta.matching)?;
    let breakdown = io::read_breakdown(&sim_dir.join("breakdown.csv"))?;
    let text = mtsim::report::render(&m, &meta, &breakdown, pairs, top);
    match out {
        Some(p) => {
            io::write_text(&p, &text)?;
            println!("{}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            seed,
            n,
            out,
            with_degraded,
        } => gen(seed, n, &out, with_degraded),
        Command::Ale {
            inputs,
            model,
            manifest,
            bins,
            grid_k,
            smooth_lambda,
            knn_k,
            pfi_repeats,
            pfi_seed,
            out,
        } => {
            let config = PipelineConfig {
                bins,
                grid_knots: grid_k,
                smooth_lambda,
                importance: ImportanceSource::Permutation {
                    repeats: pfi_repeats,
                    seed: pfi_seed,
                },
                loss: None,
            };
            ale(&inputs, model, manifest, config, knn_k, &out)
        }
        Command::Sim {
            bundle,
            importance,
            importance_file,
            gamma,
            tau,
            matching,
            epsilon,
            out,
        } => sim(&bundle, importance, importance_file, gamma, tau, &matching, epsilon, &out),
        Command::Cluster { matrix, k, out } => cluster(&matrix, k, &out),
        Command::Report {
            sim_dir,
            pairs,
            top,
            out,
        } => report(&sim_dir, pairs, top, out),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    if let Some(path) = config_path(&args) {
        if let Err(e) = load_config(&path) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    let cli = Cli::parse_from(&args);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
