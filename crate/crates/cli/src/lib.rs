//! Front end for fitting, labeling, sweeping and evaluating clusterings.

pub mod config;
pub mod report;

use clabel_core::dataset::{load_dataset, Dataset, LoadOptions, SchemaSpec, DEFAULT_MISSING_TOKEN};
use clabel_core::labelsearch::{find_characteristic_labels, RankMode, SearchConfig};
use clabel_core::mixture::{self, FitConfig, MixtureModel};
use clabel_core::modelselect::{sweep_models, PriorConfig};
use clabel_core::{Error, ErrorKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{unix_now, DatasetRef, RunConfig, RunManifest};
use report::{display_labels, label_records, label_tables, ConfusionMatrix};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "clabel", version, about = "Mixture clustering with characteristic labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a mixture by EM and assign every instance to a cluster.
    Cluster(ClusterArgs),
    /// Find and rank characteristic labels for a fitted model.
    Label(LabelArgs),
    /// Fit a range of cluster counts and score each one.
    Sweep(SweepArgs),
    /// Compare assignments with the dataset's class column.
    Evaluate(EvaluateArgs),
    /// Describe a dataset.
    Summarize(DataArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Delimited data file with a header row.
    pub data: PathBuf,
    /// Column schema sidecar.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Token marking a missing cell.
    #[arg(long)]
    pub missing_token: Option<String>,
    /// TOML run configuration; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Number of clusters (a range such as 2..9 for sweep).
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dirichlet pseudo-count for discrete conditionals.
    #[arg(long)]
    pub smoothing: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rank {
    Length,
    FScore,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Minimum p(k|x).
    #[arg(long)]
    pub r: Option<f64>,
    /// Minimum p(x); defaults to 1/N.
    #[arg(long)]
    pub s_global: Option<f64>,
    /// Minimum p(x|k); defaults to K/N.
    #[arg(long)]
    pub s_local: Option<f64>,
    /// Comma-separated interval masses for continuous attributes.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Option<Vec<f64>>,
    /// Drop candidates that do not raise p(k|x) over their prefix.
    #[arg(long)]
    pub greedy: bool,
    #[arg(long)]
    pub max_length: Option<usize>,
    /// Skip propositions on excluded (false-like) values.
    #[arg(long)]
    pub positive_only: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long, value_enum, default_value = "length")]
    pub rank: Rank,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Output directory for model.json, assignments.tsv and manifest.json.
    #[arg(long, default_value = "clabel-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    /// Model file written by `cluster`.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset to check the model's schema against.
    #[arg(long, requires = "schema")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub missing_token: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write a label report for every K.
    #[arg(long)]
    pub labels: bool,
    #[arg(long, default_value = "clabel-sweep")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Assignments file written by `cluster`.
    #[arg(long)]
    pub assignments: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => EXIT_USAGE,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Cluster(a) => cmd_cluster(a, out),
        Command::Label(a) => cmd_label(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Summarize(a) => cmd_summarize(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "clabel: {e}");
            e.exit_code()
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(CliError::Usage),
        None => Ok(RunConfig::default()),
    }
}

struct Loaded {
    ds: Dataset,
    reference: DatasetRef,
}

fn load_data(
    data: &Path,
    schema: Option<&PathBuf>,
    missing: Option<&String>,
    cfg: &RunConfig,
) -> CliResult<Loaded> {
    let schema_path = schema
        .cloned()
        .or_else(|| cfg.schema.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("--schema is required".into()))?;
    if !schema_path.is_file() {
        return Err(CliError::Usage(format!(
            "schema file {} does not exist",
            schema_path.display()
        )));
    }
    let spec = SchemaSpec::from_file(&schema_path)?;
    let opts = LoadOptions {
        missing_token: missing
            .cloned()
            .or_else(|| cfg.missing_token.clone())
            .unwrap_or_else(|| DEFAULT_MISSING_TOKEN.to_string()),
        ..LoadOptions::default()
    };
    let ds = load_dataset(data, &spec, &opts)?;
    let bytes = std::fs::read(data).map_err(|e| io_err(data, e))?;
    let sha = Sha256::digest(&bytes);
    let reference = DatasetRef {
        path: data.display().to_string(),
        schema_path: schema_path.display().to_string(),
        fingerprint: ds.schema.fingerprint(),
        sha256: sha.iter().map(|b| format!("{b:02x}")).collect(),
        n: ds.n(),
    };
    Ok(Loaded { ds, reference })
}

/// Parses `7`, `2..9`, `2..=9` or `2-9`.
pub fn parse_k_range(text: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("cannot read '{text}' as K or a K range"));
    let t = text.trim();
    let (a, b) = if let Some((a, b)) = t.split_once("..=") {
        (a, b)
    } else if let Some((a, b)) = t.split_once("..") {
        (a, b)
    } else if let Some((a, b)) = t.split_once('-') {
        (a, b)
    } else {
        (t, t)
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn fit_config(args: &FitArgs, cfg: &RunConfig, k: usize) -> FitConfig {
    let d = FitConfig::default();
    FitConfig {
        k,
        restarts: args.restarts.or(cfg.restarts).unwrap_or(d.restarts),
        seed: args.seed.or(cfg.seed).unwrap_or(d.seed),
        smoothing: args.smoothing.or(cfg.smoothing).unwrap_or(d.smoothing),
        ..d
    }
}

fn search_config(args: &SearchArgs, cfg: &RunConfig, model: &MixtureModel) -> SearchConfig {
    let d = SearchConfig::defaults_for(model);
    SearchConfig {
        r: args.r.or(cfg.r).unwrap_or(d.r),
        s_global: args.s_global.or(cfg.s_global).unwrap_or(d.s_global),
        s_local: args.s_local.or(cfg.s_local).unwrap_or(d.s_local),
        quantiles: args
            .quantiles
            .clone()
            .or_else(|| cfg.quantiles.clone())
            .unwrap_or(d.quantiles),
        greedy: args.greedy || cfg.greedy.unwrap_or(d.greedy),
        max_length: args.max_length.or(cfg.max_length).or(d.max_length),
        positive_only: args.positive_only || cfg.positive_only.unwrap_or(d.positive_only),
        rank: match args.rank {
            Rank::Length => RankMode::Length,
            Rank::FScore => RankMode::FScore,
        },
    }
}

fn single_k(args: &FitArgs, cfg: &RunConfig) -> CliResult<usize> {
    let text = args
        .k
        .clone()
        .or_else(|| cfg.k.clone())
        .ok_or_else(|| CliError::Usage("--k is required".into()))?;
    let (a, b) = parse_k_range(&text)?;
    if a != b {
        return Err(CliError::Usage("cluster takes a single K".into()));
    }
    Ok(a)
}

fn assignments_text(model: &MixtureModel, ds: &Dataset) -> CliResult<String> {
    let mut s = String::from("row\tcluster");
    for c in 1..=model.k() {
        let _ = write!(s, "\tp{c}");
    }
    s.push('\n');
    for (i, inst) in ds.instances.iter().enumerate() {
        let m = model.membership(inst)?;
        let _ = write!(s, "{}\t{}", i + 1, mixture::argmax(&m) + 1);
        for p in m {
            let _ = write!(s, "\t{p}");
        }
        s.push('\n');
    }
    Ok(s)
}

fn manifest_json(m: &RunManifest) -> String {
    serde_json::to_string_pretty(m).expect("manifest serializes") + "\n"
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn cmd_cluster(a: ClusterArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = unix_now();
    let cfg = load_config(a.data.config.as_ref())?;
    let k = single_k(&a.fit, &cfg)?;
    let loaded = load_data(&a.data.data, a.data.schema.as_ref(), a.data.missing_token.as_ref(), &cfg)?;
    let fit_cfg = fit_config(&a.fit, &cfg, k);
    let fit = mixture::fit(&loaded.ds, &fit_cfg)?;
    let assignments = assignments_text(&fit.model, &loaded.ds)?;

    create_dir(&a.out)?;
    write_file(&a.out.join("model.json"), &fit.model.to_json())?;
    write_file(&a.out.join("assignments.tsv"), &assignments)?;
    let manifest = RunManifest {
        tool: "clabel",
        version: env!("CARGO_PKG_VERSION"),
        command: "cluster".into(),
        dataset: loaded.reference,
        seed: fit_cfg.seed,
        fit: Some(fit_cfg),
        search: None,
        k_range: None,
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_file(&a.out.join("manifest.json"), &manifest_json(&manifest))?;

    let mut sizes = vec![0usize; k];
    for c in fit.model.assign(&loaded.ds)? {
        sizes[c] += 1;
    }
    let mut s = format!(
        "K={k} log-likelihood={:.6} best restart={} of {} ({} iterations)\n",
        fit.log_likelihood,
        fit.best_restart + 1,
        fit.per_restart_log_likelihoods.len(),
        fit.iterations_used
    );
    for (c, n) in sizes.iter().enumerate() {
        let _ = writeln!(s, "C{}\tprior={:.3}\tassigned={}", c + 1, fit.model.priors[c], n);
    }
    let _ = writeln!(s, "wrote {}", a.out.display());
    out.write_all(s.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
}

/// Runs the label search and renders the report in the requested format.
pub fn label_report(model: &MixtureModel, search: &SearchConfig, format: Format) -> CliResult<String> {
    let found = find_characteristic_labels(model, search)?;
    let shown: Vec<_> = found
        .per_cluster
        .iter()
        .map(|ranked| display_labels(&model.schema, ranked))
        .collect();
    Ok(match format {
        Format::Text => label_tables(model, &shown),
        Format::Records => label_records(&shown),
    })
}

fn cmd_label(a: LabelArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.config.as_ref())?;
    let model = MixtureModel::load(&a.model)?;
    if let Some(data) = &a.data {
        let loaded = load_data(data, a.schema.as_ref(), a.missing_token.as_ref(), &cfg)?;
        if loaded.ds.schema.fingerprint() != model.schema.fingerprint() {
            return Err(CliError::Core(Error::Model(
                "model was fitted on a different schema than the given dataset".into(),
            )));
        }
    }
    let search = search_config(&a.search, &cfg, &model);
    let text = label_report(&model, &search, a.search.format)?;
    match &a.output {
        Some(p) => write_file(p, &text),
        None => out.write_all(text.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e)),
    }
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let started = unix_now();
    let cfg = load_config(a.data.config.as_ref())?;
    let k_text = a
        .fit
        .k
        .clone()
        .or_else(|| cfg.k.clone())
        .ok_or_else(|| CliError::Usage("--k is required".into()))?;
    let (lo, hi) = parse_k_range(&k_text)?;
    let loaded = load_data(&a.data.data, a.data.schema.as_ref(), a.data.missing_token.as_ref(), &cfg)?;
    let fit_cfg = fit_config(&a.fit, &cfg, lo);
    let (result, fits) = sweep_models(&loaded.ds, lo..=hi, &fit_cfg, &PriorConfig::default())?;

    create_dir(&a.out)?;
    write_file(&a.out.join("cs.txt"), &result.series(|e| e.cheeseman_stutz))?;
    write_file(&a.out.join("bic.txt"), &result.series(|e| e.bic))?;
    let mut search_used = None;
    if a.labels {
        for fit in &fits {
            let search = search_config(&a.search, &cfg, &fit.model);
            let text = label_report(&fit.model, &search, a.search.format)?;
            let ext = match a.search.format {
                Format::Text => "txt",
                Format::Records => "jsonl",
            };
            write_file(&a.out.join(format!("labels_k{}.{ext}", fit.model.k())), &text)?;
            search_used = Some(search);
        }
    }
    let manifest = RunManifest {
        tool: "clabel",
        version: env!("CARGO_PKG_VERSION"),
        command: "sweep".into(),
        dataset: loaded.reference,
        seed: fit_cfg.seed,
        fit: Some(fit_cfg),
        search: search_used,
        k_range: Some((lo, hi)),
        started_unix: started,
        finished_unix: unix_now(),
    };
    write_file(&a.out.join("manifest.json"), &manifest_json(&manifest))?;

    let mut s = String::from("K\tlog_likelihood\tbic\tcheeseman_stutz\tparameters\n");
    for e in &result.entries {
        let _ = writeln!(
            s,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{}",
            e.k, e.log_likelihood, e.bic, e.cheeseman_stutz, e.parameter_count
        );
    }
    let _ = writeln!(s, "best K by Cheeseman-Stutz: {}", result.best_by_cs);
    let _ = writeln!(s, "best K by BIC: {}", result.best_by_bic);
    out.write_all(s.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
}

/// Reads the cluster column (1-based in the file) of an assignments file.
pub fn read_assignments(path: &Path) -> CliResult<(Vec<usize>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Core(Error::Structure("empty assignments file".into())))?;
    let k = header.split('\t').filter(|c| c.starts_with('p')).count();
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let cluster = line.split('\t').nth(1).and_then(|c| c.parse::<usize>().ok());
        match cluster {
            Some(c) if c >= 1 && c <= k => out.push(c - 1),
            _ => {
                return Err(CliError::Core(Error::Structure(format!(
                    "assignments row {} has no valid cluster",
                    i + 1
                ))))
            }
        }
    }
    Ok((out, k))
}

fn cmd_evaluate(a: EvaluateArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.data.config.as_ref())?;
    let loaded = load_data(&a.data.data, a.data.schema.as_ref(), a.data.missing_token.as_ref(), &cfg)?;
    let class = loaded.ds.class_column.as_ref().ok_or_else(|| {
        CliError::Core(Error::Schema("dataset has no class column to evaluate against".into()))
    })?;
    let (assign, k) = read_assignments(&a.assignments)?;
    if assign.len() != loaded.ds.n() {
        return Err(CliError::Core(Error::Structure(format!(
            "{} assignments for {} instances",
            assign.len(),
            loaded.ds.n()
        ))));
    }
    let cm = ConfusionMatrix::new(&class.labels, &assign, k);
    let mut s = cm.to_text();
    let _ = writeln!(s, "\nbest match (greedy max overlap):");
    for (r, c, n) in cm.best_match() {
        let _ = writeln!(s, "  {} -> C{} ({n})", cm.rows[r], c + 1);
    }
    let _ = writeln!(s, "agreement: {:.3}", cm.agreement());
    out.write_all(s.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
}

fn cmd_summarize(a: DataArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = load_config(a.config.as_ref())?;
    let loaded = load_data(&a.data, a.schema.as_ref(), a.missing_token.as_ref(), &cfg)?;
    let sum = loaded.ds.summarize();
    let mut s = format!(
        "instances: {}\nattributes: {}\nmissing cells: {}\nclass column: {}\n",
        sum.n,
        sum.m,
        sum.missing,
        if sum.has_class { "yes" } else { "no" }
    );
    for a in &sum.attributes {
        let card = a.cardinality.map_or("-".to_string(), |c| c.to_string());
        let _ = writeln!(s, "  {}\t{}\t{}\tmissing={}", a.name, a.kind, card, a.missing);
    }
    out.write_all(s.as_bytes()).map_err(|e| io_err(Path::new("<stdout>"), e))
}
