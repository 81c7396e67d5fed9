//! Command-line surface for the classifier pipeline: generate data, split,
//! balance, train, cross-validate, decode genomes, and report tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cgp_lab::adasyn::{adasyn_balance, AdasynConfig};
use cgp_lab::baselines::{train_linear_svm, train_mlp, MlpConfig, SvmConfig};
use cgp_lab::crossval::{run_cv, CvPlan, CvResult};
use cgp_lab::datagen::{generate, GeneratorSpec, Signal};
use cgp_lab::dataset::{
    load_csv, stratified_split, write_csv, Dataset, LayoutDescriptor, Region, SplitSpec,
};
use cgp_lab::engine::{
    active_nodes, genome_from_json, to_dot, to_expression, ClassifyMode, GenomeConfig,
};
use cgp_lab::evolution::{run_batch, BatchResult, EvolutionConfig, Stats};
use cgp_lab::seed::derive_seed;

// fixed sub-stream indices off the master seed
const SEED_SPLIT: u64 = 1;
const SEED_ADASYN: u64 = 2;
const SEED_EVOLUTION: u64 = 3;
const SEED_CV: u64 = 4;
const SEED_DATAGEN: u64 = 5;

#[derive(Parser)]
#[command(name = "cgp-lab", about = "CGP/RCGP classifiers with an experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV
    GenData(GenDataArgs),
    /// Stratified train/validation/test split; writes a manifest JSON
    Split(SplitArgs),
    /// ADASYN-balance a training CSV
    Balance(BalanceArgs),
    /// Split, optionally balance, and run the evolution batch
    Train(TrainArgs),
    /// Repeated stratified k-fold cross-validation
    Cv(CvArgs),
    /// Decode a genome file to an expression, DOT graph, and input usage
    Decode(DecodeArgs),
    /// Re-render the summary table from a results JSON
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Pcc,
    Mpfc,
    Ripc,
    Lipc,
    FourColumn,
    SingleVector,
    Dcm16,
}

impl LayoutArg {
    fn descriptor(self, timepoints: usize) -> LayoutDescriptor {
        match self {
            LayoutArg::Pcc => LayoutDescriptor::per_region(Region::Pcc, timepoints),
            LayoutArg::Mpfc => LayoutDescriptor::per_region(Region::Mpfc, timepoints),
            LayoutArg::Ripc => LayoutDescriptor::per_region(Region::Ripc, timepoints),
            LayoutArg::Lipc => LayoutDescriptor::per_region(Region::Lipc, timepoints),
            LayoutArg::FourColumn => LayoutDescriptor::four_column(timepoints),
            LayoutArg::SingleVector => LayoutDescriptor::single_vector(timepoints),
            LayoutArg::Dcm16 => LayoutDescriptor::dcm16(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Wide,
    Streamed,
}

impl From<ModeArg> for ClassifyMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Wide => ClassifyMode::Wide,
            ModeArg::Streamed => ClassifyMode::Streamed,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file; command-line flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Input data CSV
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    /// Timepoints per region for timeseries layouts
    #[arg(long)]
    timepoints: Option<usize>,
    /// Output directory (a timestamped run directory is created inside)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent evolution runs / CV cells (0 = available parallelism)
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvoArgs {
    #[arg(long)]
    recurrent: Option<bool>,
    #[arg(long)]
    recurrent_prob: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    lambda: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct BalanceFlags {
    /// Apply ADASYN to the training partition
    #[arg(long, overrides_with = "no_balance")]
    balance: bool,
    #[arg(long = "no-balance")]
    no_balance: bool,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    n_minority: Option<usize>,
    #[arg(long)]
    n_majority: Option<usize>,
    /// Planted signal kind
    #[arg(long, value_enum, default_value = "none")]
    signal: SignalArg,
    /// Mean shift between classes (mean-shift signal)
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Number of informative features, taken from the front (mean-shift)
    #[arg(long, default_value_t = 4)]
    informative: usize,
    /// Comma-separated weights for the linear rule; defaults to f0 - f1
    #[arg(long)]
    weights: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// Dead zone around the linear decision surface
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Output CSV path
    #[arg(long = "out-file")]
    out_file: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SignalArg {
    None,
    Linear,
    MeanShift,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    /// Manifest output path (stdout when omitted)
    #[arg(long = "out-file")]
    out_file: Option<PathBuf>,
}

#[derive(Args)]
struct BalanceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Output CSV path; a provenance sidecar JSON is written next to it
    #[arg(long = "out-file")]
    out_file: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    evo: EvoArgs,
    #[command(flatten)]
    balance: BalanceFlags,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    val_frac: Option<f64>,
    #[arg(long)]
    test_frac: Option<f64>,
    /// Also train the MLP and SVM reference baselines
    #[arg(long)]
    baselines: bool,
    /// Validate the configuration and exit without touching any files
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    evo: EvoArgs,
    #[command(flatten)]
    balance: BalanceFlags,
    #[arg(long)]
    k_folds: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    runs_per_cell: Option<usize>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Genome JSON file
    genome: PathBuf,
    /// DOT output path (defaults to the genome path with a .dot extension)
    #[arg(long = "out-file")]
    out_file: Option<PathBuf>,
    /// Render only nodes reachable from the outputs
    #[arg(long, default_value_t = true)]
    active_only: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// BatchResult or CvResult JSON
    results: PathBuf,
    /// CSV output path (stdout when omitted)
    #[arg(long = "out-file")]
    out_file: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// config file

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    jobs: Option<usize>,
    baselines: Option<bool>,
    dataset: Option<FileDataset>,
    split: Option<FileSplit>,
    evolution: Option<FileEvolution>,
    adasyn: Option<FileAdasyn>,
    cv: Option<FileCv>,
    output: Option<FileOutput>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDataset {
    path: Option<PathBuf>,
    layout: Option<String>,
    timepoints: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSplit {
    train_frac: Option<f64>,
    val_frac: Option<f64>,
    test_frac: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileEvolution {
    lambda: Option<usize>,
    mutation_rate: Option<f64>,
    iterations: Option<u64>,
    runs: Option<usize>,
    nodes: Option<usize>,
    recurrent: Option<bool>,
    recurrent_prob: Option<f64>,
    mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAdasyn {
    enabled: Option<bool>,
    k_neighbors: Option<usize>,
    beta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCv {
    k: Option<usize>,
    repeats: Option<usize>,
    runs_per_cell: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOutput {
    dir: Option<PathBuf>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn parse_layout_name(name: &str) -> Result<LayoutArg> {
    LayoutArg::from_str(name, true).map_err(|e| anyhow::anyhow!("layout `{name}`: {e}"))
}

// ---------------------------------------------------------------------------
// resolved experiment configuration (persisted next to results)

#[derive(Debug, Clone, Serialize)]
struct ResolvedExperiment {
    data: PathBuf,
    layout: LayoutDescriptor,
    seed: u64,
    split: SplitSpec,
    evolution: EvolutionConfig,
    balance: Option<AdasynConfig>,
    cv: Option<CvPlan>,
    baselines: bool,
    jobs: usize,
}

struct Resolver<'a> {
    file: &'a FileConfig,
}

impl<'a> Resolver<'a> {
    fn layout(&self, common: &CommonArgs) -> Result<LayoutDescriptor> {
        let file_ds = self.file.dataset.as_ref();
        let arg = match (common.layout, file_ds.and_then(|d| d.layout.as_deref())) {
            (Some(a), _) => a,
            (None, Some(name)) => parse_layout_name(name)?,
            (None, None) => LayoutArg::Dcm16,
        };
        let timepoints = common
            .timepoints
            .or(file_ds.and_then(|d| d.timepoints))
            .unwrap_or(145);
        Ok(arg.descriptor(timepoints))
    }

    fn data_path(&self, common: &CommonArgs) -> Result<PathBuf> {
        common
            .data
            .clone()
            .or_else(|| self.file.dataset.as_ref().and_then(|d| d.path.clone()))
            .context("no input data: pass --data or set [dataset].path")
    }

    fn seed(&self, common: &CommonArgs) -> u64 {
        common.seed.or(self.file.seed).unwrap_or(0)
    }

    fn jobs(&self, common: &CommonArgs) -> usize {
        common.jobs.or(self.file.jobs).unwrap_or(0)
    }

    fn out_dir(&self, common: &CommonArgs) -> PathBuf {
        common
            .out
            .clone()
            .or_else(|| self.file.output.as_ref().and_then(|o| o.dir.clone()))
            .unwrap_or_else(|| PathBuf::from("results"))
    }

    fn split_spec(
        &self,
        train: Option<f64>,
        val: Option<f64>,
        test: Option<f64>,
        seed: u64,
    ) -> Result<SplitSpec> {
        let fs = self.file.split.as_ref();
        Ok(SplitSpec::new(
            train.or(fs.and_then(|s| s.train_frac)).unwrap_or(0.70),
            val.or(fs.and_then(|s| s.val_frac)).unwrap_or(0.15),
            test.or(fs.and_then(|s| s.test_frac)).unwrap_or(0.15),
            derive_seed(seed, SEED_SPLIT),
        )?)
    }

    fn evolution(
        &self,
        evo: &EvoArgs,
        layout: LayoutDescriptor,
        seed: u64,
    ) -> Result<EvolutionConfig> {
        let fe = self.file.evolution.as_ref();
        let recurrent = evo.recurrent.or(fe.and_then(|e| e.recurrent)).unwrap_or(false);
        let mode: ClassifyMode = match (&evo.mode, fe.and_then(|e| e.mode.as_deref())) {
            (Some(m), _) => (*m).into(),
            (None, Some("streamed")) => ClassifyMode::Streamed,
            (None, Some("wide")) | (None, None) => ClassifyMode::Wide,
            (None, Some(other)) => bail!("unknown classify mode `{other}`"),
        };
        if mode == ClassifyMode::Streamed && !recurrent {
            bail!("streamed mode requires --recurrent true");
        }
        let n_inputs = match mode {
            ClassifyMode::Wide => layout.wide_inputs(),
            ClassifyMode::Streamed => layout.streamed_inputs(),
        };
        let mut genome = GenomeConfig::new(n_inputs, recurrent);
        if let Some(nodes) = evo.nodes.or(fe.and_then(|e| e.nodes)) {
            genome.n_nodes = nodes;
        }
        let mut config = EvolutionConfig::new(genome, derive_seed(seed, SEED_EVOLUTION));
        config.classify_mode = mode;
        if let Some(v) = evo.lambda.or(fe.and_then(|e| e.lambda)) {
            config.lambda = v;
        }
        if let Some(v) = evo.mutation_rate.or(fe.and_then(|e| e.mutation_rate)) {
            config.mutation_rate = v;
        }
        if let Some(v) = evo.iterations.or(fe.and_then(|e| e.iterations)) {
            config.max_iterations = v;
        }
        if let Some(v) = evo.runs.or(fe.and_then(|e| e.runs)) {
            config.n_runs = v;
        }
        if let Some(v) = evo.recurrent_prob.or(fe.and_then(|e| e.recurrent_prob)) {
            config.recurrent_prob = v;
        }
        config.validate()?;
        Ok(config)
    }

    fn balance(&self, flags: &BalanceFlags, seed: u64) -> Option<AdasynConfig> {
        let fa = self.file.adasyn.as_ref();
        let enabled = if flags.no_balance {
            false
        } else {
            flags.balance || fa.and_then(|a| a.enabled).unwrap_or(false)
        };
        enabled.then(|| AdasynConfig {
            k_neighbors: flags.k_neighbors.or(fa.and_then(|a| a.k_neighbors)).unwrap_or(5),
            beta: flags.beta.or(fa.and_then(|a| a.beta)).unwrap_or(1.0),
            seed: derive_seed(seed, SEED_ADASYN),
            normalize: false,
        })
    }

    fn cv_plan(&self, args: &CvArgs, seed: u64) -> CvPlan {
        let fc = self.file.cv.as_ref();
        let mut plan = CvPlan::new(
            args.k_folds.or(fc.and_then(|c| c.k)).unwrap_or(10),
            args.repeats.or(fc.and_then(|c| c.repeats)).unwrap_or(10),
            derive_seed(seed, SEED_CV),
        );
        plan.runs_per_cell = args
            .runs_per_cell
            .or(fc.and_then(|c| c.runs_per_cell))
            .unwrap_or(1);
        plan.balance = self.balance(&args.balance, seed);
        plan
    }
}

fn configure_jobs(jobs: usize) {
    if jobs > 0 {
        // ignore the error if a pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
}

// ---------------------------------------------------------------------------
// run directories and tables

fn create_run_dir(out: &Path, command: &str, seed: u64) -> Result<PathBuf> {
    let stamp = Utc::now().format("%Y%m%d-%H%M%S");
    let mut dir = out.join(format!("{command}-{stamp}-{seed}"));
    let mut suffix = 0;
    while dir.exists() {
        suffix += 1;
        dir = out.join(format!("{command}-{stamp}-{seed}-{suffix}"));
    }
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// On failure, park whatever was written under `<out>/failed/`.
fn mark_failed(out: &Path, run_dir: &Path) {
    let failed = out.join("failed");
    if fs::create_dir_all(&failed).is_ok() {
        if let Some(name) = run_dir.file_name() {
            let _ = fs::rename(run_dir, failed.join(name));
        }
    }
}

fn format_cell(stats: &Stats) -> String {
    match stats.mean {
        None => "NA".to_string(),
        Some(mean) => {
            if stats.sd_defined {
                format!("{:.2} ({:.2})", 100.0 * mean, 100.0 * stats.sd)
            } else {
                format!("{:.2}", 100.0 * mean)
            }
        }
    }
}

struct TableRow {
    method: String,
    train: Stats,
    val: Stats,
    test: Stats,
}

fn single(value: Option<f64>) -> Stats {
    Stats {
        mean: value,
        sd: 0.0,
        sd_defined: false,
        n: usize::from(value.is_some()),
    }
}

fn write_table(rows: &[TableRow], path: Option<&Path>) -> Result<()> {
    let mut text = String::from("method,train_pct_sd,validation_pct_sd,test_pct_sd\n");
    for row in rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.method,
            format_cell(&row.train),
            format_cell(&row.val),
            format_cell(&row.test)
        ));
    }
    match path {
        Some(p) => fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn majority_row(data: &Dataset, split_parts: [&Dataset; 3]) -> TableRow {
    let (zeros, ones) = data.class_counts();
    let majority_label = u8::from(ones > zeros);
    let rate = |d: &Dataset| {
        (!d.is_empty()).then(|| {
            d.samples().iter().filter(|s| s.label == majority_label).count() as f64
                / d.len() as f64
        })
    };
    TableRow {
        method: "majority".to_string(),
        train: single(rate(split_parts[0])),
        val: single(rate(split_parts[1])),
        test: single(rate(split_parts[2])),
    }
}

// ---------------------------------------------------------------------------
// commands

fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolver = Resolver { file: &file };
    let seed = resolver.seed(&args.common);
    let layout = resolver.layout(&args.common)?;
    let d = layout.n_features();
    let signal = match args.signal {
        SignalArg::None => Signal::None,
        SignalArg::Linear => {
            let weights = match &args.weights {
                Some(text) => text
                    .split(',')
                    .map(|w| w.trim().parse::<f64>().context("parsing --weights"))
                    .collect::<Result<Vec<f64>>>()?,
                None => {
                    let mut w = vec![0.0; d];
                    w[0] = 1.0;
                    if d > 1 {
                        w[1] = -1.0;
                    }
                    w
                }
            };
            Signal::Linear {
                weights,
                threshold: args.threshold,
                margin: args.margin,
            }
        }
        SignalArg::MeanShift => Signal::MeanShift {
            delta: args.delta,
            informative: (0..args.informative.min(d)).collect(),
        },
    };
    let spec = GeneratorSpec {
        n_minority: args.n_minority.unwrap_or(39),
        n_majority: args.n_majority.unwrap_or(111),
        layout,
        signal,
        noise_sd: args.noise_sd.unwrap_or(1.0),
        seed: derive_seed(seed, SEED_DATAGEN),
    };
    let data = generate(&spec)?;
    if let Some(parent) = args.out_file.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_csv(&data, &args.out_file, None)?;
    let (zeros, ones) = data.class_counts();
    println!(
        "wrote {} samples ({zeros} majority / {ones} minority, {} features) to {}",
        data.len(),
        data.n_features(),
        args.out_file.display()
    );
    Ok(())
}

fn cmd_split(args: SplitArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolver = Resolver { file: &file };
    let seed = resolver.seed(&args.common);
    let layout = resolver.layout(&args.common)?;
    let data = load_csv(&resolver.data_path(&args.common)?, "label", "id", layout)?;
    let spec = resolver.split_spec(args.train_frac, args.val_frac, args.test_frac, seed)?;
    let split = stratified_split(&data, &spec)?;
    let manifest = serde_json::to_string_pretty(&split.manifest(spec.seed))?;
    match &args.out_file {
        Some(p) => fs::write(p, manifest)?,
        None => println!("{manifest}"),
    }
    Ok(())
}

fn cmd_balance(args: BalanceArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolver = Resolver { file: &file };
    let seed = resolver.seed(&args.common);
    let layout = resolver.layout(&args.common)?;
    let data = load_csv(&resolver.data_path(&args.common)?, "label", "id", layout)?;
    let fa = file.adasyn.as_ref();
    let config = AdasynConfig {
        k_neighbors: args.k_neighbors.or(fa.and_then(|a| a.k_neighbors)).unwrap_or(5),
        beta: args.beta.or(fa.and_then(|a| a.beta)).unwrap_or(1.0),
        seed: derive_seed(seed, SEED_ADASYN),
        normalize: false,
    };
    let balanced = adasyn_balance(&data, &config)?;
    let n_original = balanced.original.len();
    let merged = balanced.merged()?;
    write_csv(&merged, &args.out_file, Some(n_original))?;
    let sidecar = args.out_file.with_extension("provenance.json");
    fs::write(&sidecar, serde_json::to_string_pretty(&balanced.provenance())?)?;
    println!(
        "wrote {} samples ({} synthetic) to {}",
        merged.len(),
        balanced.synthetic.len(),
        args.out_file.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolver = Resolver { file: &file };
    let seed = resolver.seed(&args.common);
    let layout = resolver.layout(&args.common)?;
    let data_path = resolver.data_path(&args.common)?;
    let split_spec = resolver.split_spec(args.train_frac, args.val_frac, args.test_frac, seed)?;
    let evolution = resolver.evolution(&args.evo, layout, seed)?;
    let balance = resolver.balance(&args.balance, seed);
    let baselines = args.baselines || file.baselines.unwrap_or(false);
    let jobs = resolver.jobs(&args.common);
    let resolved = ResolvedExperiment {
        data: data_path.clone(),
        layout,
        seed,
        split: split_spec,
        evolution,
        balance,
        cv: None,
        baselines,
        jobs,
    };

    let data = load_csv(&data_path, "label", "id", layout)?;
    if args.dry_run {
        stratified_split(&data, &split_spec)?;
        println!("config ok (dry run, no files written)");
        return Ok(());
    }
    configure_jobs(jobs);

    let out = resolver.out_dir(&args.common);
    let run_dir = create_run_dir(&out, "train", seed)?;
    let result = run_train_pipeline(&data, &resolved, &run_dir);
    if result.is_err() {
        mark_failed(&out, &run_dir);
    } else {
        println!("results in {}", run_dir.display());
    }
    result
}

fn run_train_pipeline(data: &Dataset, cfg: &ResolvedExperiment, run_dir: &Path) -> Result<()> {
    fs::write(
        run_dir.join("config.json"),
        serde_json::to_string_pretty(cfg)?,
    )?;
    let mut split = stratified_split(data, &cfg.split)?;
    fs::write(
        run_dir.join("split.json"),
        serde_json::to_string_pretty(&split.manifest(cfg.split.seed))?,
    )?;
    if let Some(balance) = &cfg.balance {
        let balanced = adasyn_balance(&split.train, balance)?;
        split.train = balanced.merged()?;
        fs::write(
            run_dir.join("balance.provenance.json"),
            serde_json::to_string_pretty(&balanced.provenance())?,
        )?;
    }
    let batch = run_batch(&split, &cfg.evolution)?;
    fs::write(
        run_dir.join("results.json"),
        serde_json::to_string_pretty(&batch)?,
    )?;
    for (i, run) in batch.runs.iter().enumerate() {
        fs::write(
            run_dir.join(format!("run{i}.genome.json")),
            serde_json::to_string_pretty(&run.winning_genome)?,
        )?;
        fs::write(
            run_dir.join(format!("run{i}.dot")),
            to_dot(&run.winning_genome, true),
        )?;
    }

    let method = if cfg.evolution.genome.recurrent { "RCGP" } else { "CGP" };
    let mut rows = vec![TableRow {
        method: method.to_string(),
        train: batch.summary.train,
        val: batch.summary.val,
        test: batch.summary.test,
    }];
    if cfg.baselines {
        let mlp_config = MlpConfig {
            seed: derive_seed(cfg.seed, 6),
            ..MlpConfig::default()
        };
        let (mlp, train_acc, val_acc) = train_mlp(&split.train, &split.val, mlp_config)?;
        let mlp_test = (!split.test.is_empty()).then(|| mlp.accuracy(&split.test));
        fs::write(run_dir.join("mlp.json"), serde_json::to_string_pretty(&mlp)?)?;
        rows.push(TableRow {
            method: "ANN".to_string(),
            train: single(Some(train_acc)),
            val: single(val_acc),
            test: single(mlp_test),
        });
        let svm_config = SvmConfig {
            seed: derive_seed(cfg.seed, 7),
            ..SvmConfig::default()
        };
        let (svm, svm_train) = train_linear_svm(&split.train, svm_config)?;
        let svm_test = (!split.test.is_empty()).then(|| svm.accuracy(&split.test));
        fs::write(run_dir.join("svm.json"), serde_json::to_string_pretty(&svm)?)?;
        // the SVM path skips the validation partition entirely
        rows.push(TableRow {
            method: "SVM".to_string(),
            train: single(Some(svm_train)),
            val: single(None),
            test: single(svm_test),
        });
    }
    rows.push(majority_row(data, [&split.train, &split.val, &split.test]));
    write_table(&rows, Some(&run_dir.join("summary.csv")))?;
    Ok(())
}

fn cmd_cv(args: CvArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let resolver = Resolver { file: &file };
    let seed = resolver.seed(&args.common);
    let layout = resolver.layout(&args.common)?;
    let data_path = resolver.data_path(&args.common)?;
    let mut evolution = resolver.evolution(&args.evo, layout, seed)?;
    evolution.n_runs = 1; // per-cell runs come from the plan
    let plan = resolver.cv_plan(&args, seed);
    plan.validate()?;
    let jobs = resolver.jobs(&args.common);
    configure_jobs(jobs);
    let resolved = ResolvedExperiment {
        data: data_path.clone(),
        layout,
        seed,
        split: SplitSpec {
            train_frac: 1.0 - 2.0 / plan.k as f64,
            val_frac: 1.0 / plan.k as f64,
            test_frac: 1.0 / plan.k as f64,
            seed: plan.seed,
        },
        evolution,
        balance: plan.balance,
        cv: Some(plan),
        baselines: false,
        jobs,
    };

    let data = load_csv(&data_path, "label", "id", layout)?;
    let out = resolver.out_dir(&args.common);
    let run_dir = create_run_dir(&out, "cv", seed)?;
    let result = (|| -> Result<()> {
        fs::write(
            run_dir.join("config.json"),
            serde_json::to_string_pretty(&resolved)?,
        )?;
        let cv = run_cv(&data, &plan, &evolution)?;
        fs::write(run_dir.join("cv.json"), serde_json::to_string_pretty(&cv)?)?;
        let method = if evolution.genome.recurrent { "RCGP" } else { "CGP" };
        let rows = cv_rows(method, &cv, &data);
        write_table(&rows, Some(&run_dir.join("summary.csv")))?;
        Ok(())
    })();
    if result.is_err() {
        mark_failed(&out, &run_dir);
    } else {
        println!("results in {}", run_dir.display());
    }
    result
}

fn cv_rows(method: &str, cv: &CvResult, data: &Dataset) -> Vec<TableRow> {
    vec![
        TableRow {
            method: method.to_string(),
            train: cv.summary.train,
            val: cv.summary.val,
            test: cv.summary.test,
        },
        majority_row(data, [data, data, data]),
    ]
}

fn cmd_decode(args: DecodeArgs) -> Result<()> {
    let text = fs::read_to_string(&args.genome)
        .with_context(|| format!("reading {}", args.genome.display()))?;
    let genome = genome_from_json(&text)?;
    for expr in to_expression(&genome) {
        println!("{expr}");
    }
    let (_, used) = active_nodes(&genome);
    println!("uses {} of {} inputs", used.len(), genome.config.n_inputs);
    let dot_path = args
        .out_file
        .unwrap_or_else(|| args.genome.with_extension("dot"));
    fs::write(&dot_path, to_dot(&genome, args.active_only))?;
    println!("wrote {}", dot_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.results)
        .with_context(|| format!("reading {}", args.results.display()))?;
    let rows = if let Ok(batch) = serde_json::from_str::<BatchResult>(&text) {
        vec![TableRow {
            method: "batch".to_string(),
            train: batch.summary.train,
            val: batch.summary.val,
            test: batch.summary.test,
        }]
    } else {
        let cv: CvResult = serde_json::from_str(&text)
            .context("results file is neither a BatchResult nor a CvResult")?;
        vec![TableRow {
            method: "cv".to_string(),
            train: cv.summary.train,
            val: cv.summary.val,
            test: cv.summary.test,
        }]
    };
    write_table(&rows, args.out_file.as_deref())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::Split(args) => cmd_split(args),
        Command::Balance(args) => cmd_balance(args),
        Command::Train(args) => cmd_train(args),
        Command::Cv(args) => cmd_cv(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
