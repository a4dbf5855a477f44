//! Command-line front end.
//!
//! Every JSON output is an envelope carrying the resolved [`RunConfig`] and
//! its SHA-256 `config_hash`. Errors go to stderr as one JSON line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fid_infinity::{fid_infinity, ExtrapolationConfig, ExtrapolationTrace};
use crate::formats::{self, embeddings};
use crate::metric::{self, repeated_evaluation, ContentDistanceVector, RepeatOptions};
use crate::perturb::{self, pnm, PerturbationKind, RasterImage, SweepConfig, SweepMetric};
use crate::ranking::{self, Direction, FitOptions, PValueMethod};
use crate::stats::{self, EmbeddingSet, StatsDocument};

pub const ENVELOPE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "artfid", version, about = "ArtFID evaluation toolkit")]
pub struct Cli {
    /// Worker threads for internal parallelism (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Fail unless the resolved configuration hashes to this value.
    #[arg(long, global = true, value_name = "HEX")]
    pub verify_hash: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mean and covariance of an AFE1 embedding file.
    Stats {
        embeddings: PathBuf,
    },
    /// FID (optionally FID∞) between two embedding files.
    Fid {
        style: PathBuf,
        generated: PathBuf,
        #[command(flatten)]
        extrapolation: ExtrapolationArgs,
    },
    /// ArtFID from content distances and style/generated embeddings.
    Artfid {
        #[command(flatten)]
        inputs: MetricInputs,
        #[command(flatten)]
        extrapolation: ExtrapolationArgs,
        /// CSV with predicted_artist,target_artist columns.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Bradley-Terry scores from a pairwise win-count matrix.
    Rank {
        comparisons: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
    /// Spearman correlation between two labelled score columns.
    Correlate {
        column_a_csv: PathBuf,
        column_b_csv: PathBuf,
        /// Column name in the first CSV (default: its second column).
        #[arg(long)]
        column_a: Option<String>,
        #[arg(long)]
        column_b: Option<String>,
        #[arg(long, default_value = "higher-better", value_parser = parse_direction)]
        direction_a: Direction,
        #[arg(long, default_value = "higher-better", value_parser = parse_direction)]
        direction_b: Direction,
        /// Exact permutation p-values (n <= 8).
        #[arg(long)]
        exact: bool,
    },
    /// Metric values under increasing image perturbations, as CSV.
    PerturbSweep {
        /// Directory of .pgm/.ppm images.
        #[arg(long, required_unless_present = "toy_images", conflicts_with = "toy_images")]
        images: Option<PathBuf>,
        /// Generate this many procedural images instead.
        #[arg(long)]
        toy_images: Option<usize>,
        /// Side length of generated images.
        #[arg(long, default_value_t = 32, requires = "toy_images")]
        toy_size: usize,
        /// Reference images for the style side (default: the clean images).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value = "gaussian-noise", value_parser = parse_kind)]
        kind: PerturbationKind,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        trials: usize,
        #[arg(long, default_value = "artfid", value_parser = parse_metric)]
        metric: SweepMetric,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 15)]
        k_points: usize,
        #[arg(long, default_value_t = 5000)]
        min_subsample: usize,
        /// Also write the per-level summary CSV here.
        #[arg(long)]
        summary_out: Option<PathBuf>,
    },
    /// ArtFID over repeated independent samples.
    Repeat {
        #[command(flatten)]
        inputs: MetricInputs,
        #[command(flatten)]
        extrapolation: ExtrapolationArgs,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Rows drawn per run (default: every row).
        #[arg(long)]
        sample_size: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct MetricInputs {
    /// content_id,generated_id,distance CSV.
    #[arg(long, required_unless_present = "content", conflicts_with = "content")]
    pub distances: Option<PathBuf>,
    /// Content embeddings for the bundled toy distance (paired row by row).
    #[arg(long)]
    pub content: Option<PathBuf>,
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long)]
    pub generated: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtrapolationArgs {
    /// Extrapolate to infinite sample size.
    #[arg(long)]
    pub infinity: bool,
    #[arg(long, default_value_t = 5000, requires = "infinity")]
    pub min_subsample: usize,
    #[arg(long, default_value_t = 15, requires = "infinity")]
    pub k_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subsample the style set as well.
    #[arg(long, requires = "infinity")]
    pub subsample_both: bool,
}

impl ExtrapolationArgs {
    fn config(&self) -> Option<ExtrapolationConfig> {
        self.infinity.then_some(ExtrapolationConfig {
            k_points: self.k_points,
            min_subsample: self.min_subsample,
            seed: self.seed,
            subsample_both: self.subsample_both,
        })
    }
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<PerturbationKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_metric(s: &str) -> Result<SweepMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// An input file as recorded in the configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything that determines a command's output. `--threads`, `--out` and
/// `--verify-hash` are deliberately absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
}

impl RunConfig {
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub fid: f64,
    pub fid_infinity: Option<f64>,
    pub n_style: usize,
    pub n_generated: usize,
    pub dim: usize,
    pub extrapolation: Option<ExtrapolationTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    #[serde(flatten)]
    pub scores: ranking::ScoreVector,
    /// Labels from highest to lowest score.
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelateReport {
    #[serde(flatten)]
    pub correlation: ranking::CorrelationReport,
    pub labels: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

struct Inputs(Vec<InputDigest>);

impl Inputs {
    fn read(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.0.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(bytes)
    }

    fn embeddings(&mut self, role: &str, path: &Path) -> Result<EmbeddingSet> {
        embeddings::decode(&self.read(role, path)?)
    }

    fn images(&mut self, role: &str, dir: &Path) -> Result<Vec<RasterImage>> {
        let paths = pnm::image_paths(dir)?;
        if paths.is_empty() {
            return Err(Error::EmptyInput(format!("no .pgm/.ppm images in {}", dir.display())));
        }
        let mut hasher = Sha256::new();
        let mut images = Vec::with_capacity(paths.len());
        for p in &paths {
            let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
            images.push(pnm::decode(&bytes)?);
        }
        self.0.push(InputDigest {
            role: role.to_string(),
            path: dir.display().to_string(),
            sha256: format!("{:x}", hasher.finalize()),
        });
        Ok(images)
    }
}

/// What a command produced: a JSON document or raw text.
enum Output {
    Json(String),
    Text(String),
}

type Runner = Box<dyn FnOnce(&RunConfig, &str) -> Result<Output> + Send>;

struct Prepared {
    config: RunConfig,
    run: Runner,
}

fn envelope<T: Serialize>(config: &RunConfig, hash: &str, result: T) -> Result<Output> {
    let env = Envelope {
        schema_version: ENVELOPE_SCHEMA_VERSION,
        command: config.command.clone(),
        config: config.clone(),
        config_hash: hash.to_string(),
        result,
    };
    Ok(Output::Json(formats::to_json(&env)?))
}

fn config(command: &str, inputs: Inputs, parameters: serde_json::Value) -> RunConfig {
    RunConfig {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        inputs: inputs.0,
        parameters,
    }
}

fn distances_from(inputs: &mut Inputs, m: &MetricInputs, generated: &EmbeddingSet) -> Result<ContentDistanceVector> {
    match (&m.distances, &m.content) {
        (Some(path), _) => formats::parse_distances(inputs.read("distances", path)?.as_slice()),
        (None, Some(path)) => metric::toy_content_distances(&inputs.embeddings("content", path)?, generated),
        (None, None) => Err(Error::InvalidArgument("one of --distances or --content is required".into())),
    }
}

fn prepare(command: Command) -> Result<Prepared> {
    let mut inputs = Inputs(Vec::new());
    Ok(match command {
        Command::Stats { embeddings } => {
            let set = inputs.embeddings("embeddings", &embeddings)?;
            Prepared {
                config: config("stats", inputs, serde_json::json!({})),
                run: Box::new(move |cfg, hash| {
                    let doc = StatsDocument::from(&stats::compute_stats(&set)?);
                    envelope(cfg, hash, doc)
                }),
            }
        }
        Command::Fid {
            style,
            generated,
            extrapolation,
        } => {
            let s = inputs.embeddings("style", &style)?;
            let g = inputs.embeddings("generated", &generated)?;
            let extrap = extrapolation.config();
            if let Some(c) = &extrap {
                c.validate()?;
            }
            Prepared {
                config: config("fid", inputs, serde_json::json!({ "extrapolation": extrap })),
                run: Box::new(move |cfg, hash| {
                    let fid = stats::fid(&s, &g)?;
                    let trace = extrap.map(|c| fid_infinity(&s, &g, &c)).transpose()?;
                    envelope(
                        cfg,
                        hash,
                        FidReport {
                            fid,
                            fid_infinity: trace.as_ref().map(|t| t.intercept),
                            n_style: s.n_rows(),
                            n_generated: g.n_rows(),
                            dim: s.n_cols(),
                            extrapolation: trace,
                        },
                    )
                }),
            }
        }
        Command::Artfid {
            inputs: m,
            extrapolation,
            predictions,
        } => {
            let s = inputs.embeddings("style", &m.style)?;
            let g = inputs.embeddings("generated", &m.generated)?;
            let d = distances_from(&mut inputs, &m, &g)?;
            let preds = predictions
                .map(|p| formats::parse_predictions(inputs.read("predictions", &p)?.as_slice()))
                .transpose()?;
            let extrap = extrapolation.config();
            Prepared {
                config: config(
                    "artfid",
                    inputs,
                    serde_json::json!({ "content_backend": d.backend_tag(), "extrapolation": extrap }),
                ),
                run: Box::new(move |cfg, hash| {
                    let mut report = metric::artfid(&d, &s, &g, extrap.as_ref())?;
                    if let Some(p) = preds {
                        report = report.with_deception_rate(metric::deception_rate(&p)?);
                    }
                    report.metadata.config_hash = Some(hash.to_string());
                    report.check_consistency()?;
                    envelope(cfg, hash, report)
                }),
            }
        }
        Command::Rank {
            comparisons,
            tol,
            max_iter,
        } => {
            let w = formats::parse_comparisons(inputs.read("comparisons", &comparisons)?.as_slice())?;
            let opts = FitOptions { tol, max_iter };
            Prepared {
                config: config("rank", inputs, serde_json::json!({ "tol": tol, "max_iter": max_iter })),
                run: Box::new(move |cfg, hash| {
                    let scores = ranking::bradley_terry_fit(&w, &opts)?;
                    let pairs: Vec<(String, f64)> =
                        scores.labels.iter().cloned().zip(scores.gamma.iter().copied()).collect();
                    let order = ranking::rank_methods(&pairs, Direction::HigherBetter);
                    envelope(cfg, hash, RankReport { scores, ranking: order })
                }),
            }
        }
        Command::Correlate {
            column_a_csv,
            column_b_csv,
            column_a,
            column_b,
            direction_a,
            direction_b,
            exact,
        } => {
            let a = formats::parse_score_column(inputs.read("column_a", &column_a_csv)?.as_slice(), column_a.as_deref())?;
            let b = formats::parse_score_column(inputs.read("column_b", &column_b_csv)?.as_slice(), column_b.as_deref())?;
            let method = if exact {
                PValueMethod::ExactPermutation
            } else {
                PValueMethod::TApproximation
            };
            Prepared {
                config: config(
                    "correlate",
                    inputs,
                    serde_json::json!({
                        "column_a": column_a,
                        "column_b": column_b,
                        "direction_a": direction_a,
                        "direction_b": direction_b,
                        "method": method,
                    }),
                ),
                run: Box::new(move |cfg, hash| {
                    let (labels, x, y) = formats::align_columns(&a, &b)?;
                    let x: Vec<f64> = x.into_iter().map(|v| direction_a.orient(v)).collect();
                    let y: Vec<f64> = y.into_iter().map(|v| direction_b.orient(v)).collect();
                    let correlation = ranking::spearman_rho_with(&x, &y, method)?;
                    envelope(cfg, hash, CorrelateReport { correlation, labels })
                }),
            }
        }
        Command::PerturbSweep {
            images,
            toy_images,
            toy_size,
            reference,
            kind,
            levels,
            trials,
            metric,
            seed,
            k_points,
            min_subsample,
            summary_out,
        } => {
            let imgs = match (&images, toy_images) {
                (Some(dir), _) => inputs.images("images", dir)?,
                (None, Some(n)) => perturb::toy_images(n, toy_size, toy_size, seed)?,
                (None, None) => return Err(Error::InvalidArgument("one of --images or --toy-images is required".into())),
            };
            let refs = reference.map(|r| inputs.images("reference", &r)).transpose()?;
            let sweep = SweepConfig {
                kind,
                levels,
                trials,
                seed,
                metric,
                extrapolation: ExtrapolationConfig {
                    k_points,
                    min_subsample,
                    seed: 0,
                    subsample_both: false,
                },
            };
            sweep.validate()?;
            let toy = images.is_none().then_some(serde_json::json!({ "count": toy_images, "size": toy_size }));
            Prepared {
                config: config("perturb-sweep", inputs, serde_json::json!({ "sweep": sweep, "toy_images": toy })),
                run: Box::new(move |_cfg, hash| {
                    let table = perturb::perturbation_sweep(&imgs, refs.as_deref(), &sweep)?;
                    if let Some(path) = summary_out {
                        let text = format!("# config_hash={hash}\n{}", formats::sweep_summary_csv(&table));
                        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                    }
                    Ok(Output::Text(format!("# config_hash={hash}\n{}", formats::sweep_rows_csv(&table))))
                }),
            }
        }
        Command::Repeat {
            inputs: m,
            extrapolation,
            runs,
            sample_size,
        } => {
            let s = inputs.embeddings("style", &m.style)?;
            let g = inputs.embeddings("generated", &m.generated)?;
            let d = distances_from(&mut inputs, &m, &g)?;
            let opts = RepeatOptions {
                runs,
                seed: extrapolation.seed,
                sample_size,
                extrapolation: extrapolation.config(),
            };
            Prepared {
                config: config(
                    "repeat",
                    inputs,
                    serde_json::json!({ "content_backend": d.backend_tag(), "repeat": opts }),
                ),
                run: Box::new(move |cfg, hash| {
                    let mut result = repeated_evaluation(&d, &s, &g, &opts)?;
                    for r in &mut result.reports {
                        r.metadata.config_hash = Some(hash.to_string());
                        r.check_consistency()?;
                    }
                    envelope(cfg, hash, result)
                }),
            }
        }
    })
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::InvalidArgument("--threads must be at least 1".into()));
    }
    let prepared = prepare(cli.command)?;
    let hash = prepared.config.hash();
    if let Some(expected) = &cli.verify_hash {
        if !expected.eq_ignore_ascii_case(&hash) {
            return Err(Error::InvalidArgument(format!(
                "configuration hash {hash} does not match --verify-hash {expected}"
            )));
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start thread pool: {e}")))?;
    let config = prepared.config;
    let run = prepared.run;
    let text = match pool.install(|| run(&config, &hash))? {
        Output::Json(s) | Output::Text(s) => s,
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

/// The single-line JSON written to stderr for a failure.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let detail = e.to_string();
                    let message = detail
                        .lines()
                        .map(str::trim)
                        .take_while(|l| !l.starts_with("Usage:"))
                        .filter(|l| !l.is_empty())
                        .collect::<Vec<_>>()
                        .join(" ");
                    let _ = writeln!(stderr, "{}", error_json("UsageError", message.trim_start_matches("error: ")));
                    2
                }
            };
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_json(e.kind(), &e.to_string()));
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn config_hash_ignores_threads_and_out() {
        let cfg = config("stats", Inputs(Vec::new()), serde_json::json!({}));
        assert_eq!(cfg.hash().len(), 64);
        assert_eq!(cfg.hash(), cfg.clone().hash());
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(!text.contains("threads") && !text.contains("\"out\""));
    }

    #[test]
    fn usage_errors_are_json_with_exit_2() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(["artfid", "stats", "--bogus"], &mut out, &mut err);
        assert_eq!(code, 2);
        let v: serde_json::Value = serde_json::from_slice(&err).unwrap();
        assert_eq!(v["error"], "UsageError");
    }

    #[test]
    fn mutually_exclusive_inputs_rejected() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let args = ["artfid", "artfid", "--distances", "d.csv", "--content", "c.afe", "--style", "s", "--generated", "g"];
        assert_eq!(run(args, &mut out, &mut err), 2);
    }

    #[test]
    fn help_lists_flags() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["artfid", "fid", "--help"], &mut out, &mut err), 0);
        let help = String::from_utf8(out).unwrap();
        for flag in ["--infinity", "--min-subsample", "--k-points", "--seed", "--threads", "--out"] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
    }
}
