//! The `hypergcl` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{ArgGroup, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use hypergcl_core::augment::AugmentationSpec;
use hypergcl_core::hypergraph::{homophily, split, synth_hypergraph, Hypergraph, SynthConfig};
use hypergcl_core::seed;
use hypergcl_core::train::{evaluate, random_perturb_attack, Mode, TrainConfig, ViewSpec};
use serde_json::json;

use crate::error::DataError;
use crate::io;
use crate::report::write_run;
use crate::runner::run_parallel;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", .0.render())]
    Clap(clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Clap(e) if !e.use_stderr() => 0,
            Self::Clap(_) | Self::Usage(_) => 1,
            Self::Data(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Seed list: a count `N` (seeds `0..N`), a range `a..b`, or a comma list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("invalid seed list `{s}`");
        let s = s.trim();
        let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
            (a.parse().map_err(bad)?..b.parse().map_err(bad)?).collect()
        } else if s.contains(',') {
            s.split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse().map_err(bad))
                .collect::<Result<_, _>>()?
        } else {
            (0..s.parse().map_err(bad)?).collect()
        };
        if seeds.is_empty() {
            return Err(format!("seed list `{s}` is empty"));
        }
        Ok(Self(seeds))
    }
}

impl fmt::Display for SeedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.len() as u64;
        if self.0.iter().copied().eq(0..n) {
            write!(f, "{n}")
        } else {
            let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hypergcl", version, about = "Hypergraph contrastive learning with fabricated and generative views")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train over one or more seeds and write logs, summary and table.
    Train(TrainArgs),
    /// Evaluate a model checkpoint on a seed's split.
    Eval(EvalArgs),
    /// Apply a fabricated augmentation and write the result.
    Augment(AugmentArgs),
    /// Print |V|, |E|, F, C and homophily.
    Stats(StatsArgs),
    /// Generate a planted-partition hypergraph.
    Synth(SynthArgs),
    /// Remove random incidences and evaluate a checkpoint on the result.
    Attack(AttackArgs),
}

/// Exactly one data source.
#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "hyperedges", "bundle", "synth"])))]
pub struct DataArgs {
    /// Directory with hyperedges.txt, features.txt and optional labels.txt, sensitive.txt
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Hyperedge file (one hyperedge per line)
    #[arg(long, requires = "features")]
    pub hyperedges: Option<PathBuf>,
    /// Feature file (one vertex per line)
    #[arg(long, requires = "hyperedges")]
    pub features: Option<PathBuf>,
    /// Label file (one class index per line)
    #[arg(long, requires = "hyperedges")]
    pub labels: Option<PathBuf>,
    /// Sensitive-attribute file (one 0/1 per line)
    #[arg(long, requires = "hyperedges")]
    pub sensitive: Option<PathBuf>,
    /// JSON bundle {"n", "hyperedges", "features", "labels", "sensitive"}
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Synthetic preset: default, benchmark or small
    #[arg(long)]
    pub synth: Option<String>,
    /// Seed of the synthetic preset
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainFlags {
    /// JSON TrainConfig file; flags given on the command line override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// supervised, mtl, pretrain_linear or pretrain_finetune
    #[arg(long, default_value_t = TrainConfig::default().mode)]
    pub mode: Mode,
    /// First view: A0..A5 with optional `:ratio`, or A6 (generative)
    #[arg(long, default_value_t = TrainConfig::default().view1)]
    pub view1: ViewSpec,
    /// Second view
    #[arg(long, default_value_t = TrainConfig::default().view2)]
    pub view2: ViewSpec,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Contrastive-only epochs of the pretraining modes
    #[arg(long, default_value_t = TrainConfig::default().pretrain_epochs)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().lr_model)]
    pub lr_model: f64,
    #[arg(long, default_value_t = TrainConfig::default().lr_generator)]
    pub lr_generator: f64,
    #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
    pub weight_decay: f64,
    /// Weight of the contrastive term in multi-task training
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    pub lambda: f64,
    /// Weight of the contrastive term in the generator objective
    #[arg(long, default_value_t = TrainConfig::default().beta)]
    pub beta: f64,
    /// Contrastive temperature
    #[arg(long, default_value_t = TrainConfig::default().tau_c)]
    pub tau_c: f64,
    /// Gumbel-Softmax temperature
    #[arg(long, default_value_t = TrainConfig::default().tau_gumbel)]
    pub tau_gumbel: f64,
    /// Anneal the Gumbel temperature linearly to --tau-gumbel-final
    #[arg(long)]
    pub anneal_tau_gumbel: bool,
    #[arg(long, default_value_t = TrainConfig::default().tau_gumbel_final)]
    pub tau_gumbel_final: f64,
    #[arg(long, default_value_t = TrainConfig::default().dropout)]
    pub dropout: f64,
    #[arg(long, default_value_t = TrainConfig::default().hidden)]
    pub hidden: usize,
    /// Projection-head width
    #[arg(long, default_value_t = TrainConfig::default().proj)]
    pub proj: usize,
    /// Generator latent width
    #[arg(long, default_value_t = TrainConfig::default().latent)]
    pub latent: usize,
    /// Encoder blocks
    #[arg(long, default_value_t = TrainConfig::default().num_blocks)]
    pub num_blocks: usize,
    /// Negative pairs per incidence in the reconstruction loss
    #[arg(long, default_value_t = TrainConfig::default().neg_k)]
    pub neg_k: usize,
    /// Seeds: a count N (0..N), a range a..b or a list a,b,c
    #[arg(long, default_value_t = SeedList(TrainConfig::default().seeds))]
    pub seeds: SeedList,
    #[arg(long, default_value_t = TrainConfig::default().train_frac)]
    pub train_frac: f64,
    #[arg(long, default_value_t = TrainConfig::default().val_frac)]
    pub val_frac: f64,
    /// Maximum vertices contrasted per step
    #[arg(long, default_value_t = TrainConfig::default().anchor_budget)]
    pub anchor_budget: usize,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Output directory
    #[arg(long, default_value = "hypergcl-out")]
    pub out: PathBuf,
    /// Seeds run concurrently
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
    /// Also write model (and generator) checkpoints per seed
    #[arg(long)]
    pub checkpoints: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SplitArgs {
    /// Seed whose split is used (as in training)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().train_frac)]
    pub train_frac: f64,
    #[arg(long, default_value_t = TrainConfig::default().val_frac)]
    pub val_frac: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model checkpoint (JSON)
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Augmentation, e.g. A2:0.2
    #[arg(long)]
    pub spec: AugmentationSpec,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for the augmented text files
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Print JSON instead of a table row
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// default, benchmark or small
    #[arg(long, default_value = "benchmark")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub num_vertices: Option<usize>,
    #[arg(long)]
    pub num_classes: Option<usize>,
    #[arg(long)]
    pub num_hyperedges: Option<usize>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Probability that a hyperedge is drawn from one class
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub feature_noise: Option<f64>,
    /// Output directory for the text files
    #[arg(long)]
    pub out: PathBuf,
    /// Also write bundle.json
    #[arg(long)]
    pub bundle: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Fraction of incidences removed
    #[arg(long, default_value_t = 0.1)]
    pub ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub attack_seed: u64,
    #[command(flatten)]
    pub split: SplitArgs,
}

pub fn synth_preset(name: &str) -> CliResult<SynthConfig> {
    match name {
        "default" | "benchmark" => Ok(SynthConfig::default()),
        "small" => Ok(SynthConfig {
            num_vertices: 60,
            num_classes: 3,
            num_hyperedges: 20,
            feature_dim: 6,
            ..SynthConfig::default()
        }),
        other => Err(CliError::Usage(format!("unknown synthetic preset `{other}` (default, benchmark, small)"))),
    }
}

impl DataArgs {
    pub fn load(&self) -> CliResult<Hypergraph> {
        if let Some(dir) = &self.data {
            return Ok(io::load_dir(dir)?);
        }
        if let Some(b) = &self.bundle {
            return Ok(io::load_bundle(b)?);
        }
        if let Some(preset) = &self.synth {
            let cfg = synth_preset(preset)?;
            return synth_hypergraph(&cfg, self.synth_seed).map_err(|e| CliError::Data(e.into()));
        }
        match (&self.hyperedges, &self.features) {
            (Some(h), Some(f)) => Ok(io::load_hypergraph(h, f, self.labels.as_deref(), self.sensitive.as_deref())?),
            _ => Err(CliError::Usage("a data source is required".into())),
        }
    }
}

fn explicit(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine))
}

/// Config file (or defaults) overridden by command-line flags.
pub fn resolve_train_config(flags: &TrainFlags, m: &ArgMatches) -> CliResult<TrainConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let text = io::read_text(path)?;
            serde_json::from_str(&text).map_err(|e| CliError::Data(DataError::parse(path, e.line(), e.to_string())))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! override_fields {
        ($($field:ident),*) => {
            $( if explicit(m, stringify!($field)) { cfg.$field = flags.$field.clone(); } )*
        };
    }
    override_fields!(
        mode,
        view1,
        view2,
        epochs,
        pretrain_epochs,
        lr_model,
        lr_generator,
        weight_decay,
        lambda,
        beta,
        tau_c,
        tau_gumbel,
        anneal_tau_gumbel,
        tau_gumbel_final,
        dropout,
        hidden,
        proj,
        latent,
        num_blocks,
        neg_k,
        train_frac,
        val_frac,
        anchor_budget
    );
    if explicit(m, "seeds") {
        cfg.seeds = flags.seeds.0.clone();
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

/// A parsed, validated command line.
#[derive(Debug, Clone)]
pub enum Invocation {
    Train { args: TrainArgs, config: TrainConfig },
    Eval(EvalArgs),
    Augment(AugmentArgs),
    Stats(StatsArgs),
    Synth(SynthArgs),
    Attack(AttackArgs),
}

/// Parses `argv` (including the program name). Help and version requests
/// surface as [`CliError::Clap`] with exit code 0.
pub fn parse_args<I, T>(argv: I) -> CliResult<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = Cli::command().try_get_matches_from(argv).map_err(CliError::Clap)?;
    let cli = Cli::from_arg_matches(&matches).map_err(CliError::Clap)?;
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    Ok(match cli.command {
        Command::Train(args) => {
            let config = resolve_train_config(&args.train, sub)?;
            Invocation::Train { args, config }
        }
        Command::Eval(a) => Invocation::Eval(a),
        Command::Augment(a) => Invocation::Augment(a),
        Command::Stats(a) => Invocation::Stats(a),
        Command::Synth(a) => Invocation::Synth(a),
        Command::Attack(a) => Invocation::Attack(a),
    })
}

fn core_data(e: hypergcl_core::Error) -> CliError {
    CliError::Data(e.into())
}

fn test_mask(h: &Hypergraph, s: &SplitArgs) -> CliResult<Vec<bool>> {
    let masks =
        split(h, s.train_frac, s.val_frac, seed::component_seed(s.seed, seed::tag::SPLIT)).map_err(core_data)?;
    Ok(masks.test)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(DataError::io(dir, e)))
}

/// Runs a parsed invocation, writing human-readable output to `out`.
pub fn dispatch(inv: Invocation, out: &mut dyn Write) -> CliResult<()> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| CliError::Runtime(e.to_string()));
    match inv {
        Invocation::Train { args, config } => {
            let h = args.data.load()?;
            if h.labels().is_none() {
                return Err(CliError::Data(DataError::Core(hypergcl_core::Error::InvalidArgument(
                    "training requires labels".into(),
                ))));
            }
            ensure_dir(&args.out)?;
            let run = run_parallel(&h, &config, args.parallel).map_err(|e| CliError::Runtime(e.to_string()))?;
            write_run(&args.out, &run, args.checkpoints)?;
            for r in &run.per_seed {
                w(out, format!("seed {}: test {:.2}% (epoch {})", r.seed, r.test_acc, r.selected_epoch))?;
            }
            for f in &run.failures {
                w(out, format!("seed {}: FAILED: {}", f.seed, f.error))?;
            }
            if let (Some(m), Some(s)) = (run.mean, run.std) {
                w(
                    out,
                    format!(
                        "{}: {m:.2} ± {s:.2} over {} seeds",
                        crate::report::method_label(&config),
                        run.per_seed.len()
                    ),
                )?;
            }
            if !run.failures.is_empty() {
                return Err(CliError::Runtime(format!(
                    "{} of {} seeds failed",
                    run.failures.len(),
                    config.seeds.len()
                )));
            }
            Ok(())
        }
        Invocation::Eval(a) => {
            let h = a.data.load()?;
            let params = io::load_model(&a.checkpoint)?;
            let masks =
                split(&h, a.split.train_frac, a.split.val_frac, seed::component_seed(a.split.seed, seed::tag::SPLIT))
                    .map_err(core_data)?;
            let acc = |mask: &[bool]| {
                if mask.iter().any(|&m| m) {
                    evaluate(&params, &h, mask).map(Some).map_err(core_data)
                } else {
                    Ok(None)
                }
            };
            let report = json!({ "val_acc": acc(&masks.val)?, "test_acc": acc(&masks.test)? });
            w(out, report.to_string())
        }
        Invocation::Augment(a) => {
            let h = a.data.load()?;
            let g = a.spec.apply(&h, a.seed).map_err(core_data)?;
            io::write_dir(&a.out, &g)?;
            w(
                out,
                format!(
                    "{}: |V| {} |E| {} incidences {}",
                    a.spec,
                    g.num_vertices(),
                    g.num_hyperedges(),
                    g.incidences().len()
                ),
            )
        }
        Invocation::Stats(a) => {
            let h = a.data.load()?;
            let hom = h.labels().is_some().then(|| homophily(&h).ok()).flatten();
            let classes = h.labels().map(|_| h.num_classes());
            if a.json {
                let v = json!({
                    "num_vertices": h.num_vertices(),
                    "num_hyperedges": h.num_hyperedges(),
                    "num_features": h.num_features(),
                    "num_classes": classes,
                    "h_edge": hom.as_ref().map(|x| x.edge),
                    "h_node": hom.as_ref().map(|x| x.node),
                });
                w(out, v.to_string())
            } else {
                let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
                w(out, "|V|\t|E|\tF\tC\th_edge\th_node".into())?;
                w(
                    out,
                    format!(
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        h.num_vertices(),
                        h.num_hyperedges(),
                        h.num_features(),
                        classes.map_or("-".into(), |c| c.to_string()),
                        opt(hom.as_ref().map(|x| x.edge)),
                        opt(hom.as_ref().map(|x| x.node)),
                    ),
                )
            }
        }
        Invocation::Synth(a) => {
            let mut cfg = synth_preset(&a.preset)?;
            cfg.num_vertices = a.num_vertices.unwrap_or(cfg.num_vertices);
            cfg.num_classes = a.num_classes.unwrap_or(cfg.num_classes);
            cfg.num_hyperedges = a.num_hyperedges.unwrap_or(cfg.num_hyperedges);
            cfg.hyperedge_size_range.0 = a.min_size.unwrap_or(cfg.hyperedge_size_range.0);
            cfg.hyperedge_size_range.1 = a.max_size.unwrap_or(cfg.hyperedge_size_range.1);
            cfg.intra_class_probability = a.q.unwrap_or(cfg.intra_class_probability);
            cfg.feature_dim = a.feature_dim.unwrap_or(cfg.feature_dim);
            cfg.feature_noise = a.feature_noise.unwrap_or(cfg.feature_noise);
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let h = synth_hypergraph(&cfg, a.seed).map_err(core_data)?;
            io::write_dir(&a.out, &h)?;
            if a.bundle {
                io::save_bundle(&a.out.join("bundle.json"), &h)?;
            }
            w(
                out,
                format!(
                    "|V| {} |E| {} F {} C {}",
                    h.num_vertices(),
                    h.num_hyperedges(),
                    h.num_features(),
                    h.num_classes()
                ),
            )
        }
        Invocation::Attack(a) => {
            let h = a.data.load()?;
            let params = io::load_model(&a.checkpoint)?;
            let mask = test_mask(&h, &a.split)?;
            let clean = evaluate(&params, &h, &mask).map_err(core_data)?;
            let g = random_perturb_attack(&h, a.ratio, a.attack_seed).map_err(|e| CliError::Usage(e.to_string()))?;
            let attacked = evaluate(&params, &g, &mask).map_err(|e| CliError::Runtime(e.to_string()))?;
            let report = json!({
                "ratio": a.ratio,
                "removed": h.incidences().len() - g.incidences().len(),
                "clean_test_acc": clean,
                "attacked_test_acc": attacked,
            });
            w(out, report.to_string())
        }
    }
}

/// Parses and runs `argv`; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = parse_args(argv).and_then(|inv| dispatch(inv, out));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let code = e.exit_code();
            let _ = match (&e, code) {
                (CliError::Clap(c), 0) => write!(out, "{}", c.render()),
                (CliError::Clap(c), _) => write!(err, "{}", c.render()),
                _ => writeln!(err, "{e}"),
            };
            code
        }
    }
}
