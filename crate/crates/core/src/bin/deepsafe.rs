//! `deepsafe` command-line driver.
//!
//! Exit codes: 0 when every planned region resolved, 1 when a counterexample
//! was found, 2 when some query hit a resource limit, 3 on usage or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use deepsafe::analysis::{build_plan, VerificationPlan, PLAN_FILE};
use deepsafe::clustering::{
    label_guided_cluster, read_regions, write_regions, Init, REGIONS_MANIFEST,
};
use deepsafe::oracle::{grid_search, GridSpec, DEFAULT_MAX_POINTS};
use deepsafe::pipeline::{
    exit_code, read_reports, render_markdown, verify_plan, write_reports, Planes,
};
use deepsafe::{
    load_dataset, load_network, Dataset, DistanceMetric, Error, LabelColumn, Network, Query,
    Result, RunConfig,
};

const USAGE_ERROR: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "deepsafe",
    version,
    about = "Safe-region discovery and verification for ReLU classifiers"
)]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster the dataset into label-pure regions.
    Cluster,
    /// Rank regions and write the verification plan.
    Analyze,
    /// Verify every planned region; runs the earlier stages if their artifacts are missing.
    Verify,
    /// Print the Markdown summary of an existing report.
    Report,
    /// Grid-search one query for a counterexample and print the result as JSON.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Ball center, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    center: Vec<f64>,
    #[arg(long)]
    radius: f64,
    #[arg(long)]
    label: usize,
    #[arg(long)]
    target: usize,
    /// Grid step; defaults to radius / 50.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_POINTS)]
    max_points: u64,
}

/// Every flag overrides the matching key of `--config`.
#[derive(Debug, Args)]
struct Overrides {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    network: Option<PathBuf>,
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long = "out", global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    metric: Option<DistanceMetric>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    #[arg(long, global = true)]
    max_depth: Option<usize>,
    /// random or plus-plus
    #[arg(long, global = true, value_parser = parse_init)]
    init: Option<Init>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    min_members: Option<usize>,
    #[arg(long, global = true)]
    min_density: Option<f64>,
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, global = true)]
    max_splits: Option<u64>,
    #[arg(long, global = true)]
    timeout_secs: Option<f64>,
    /// Worker threads for verification; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Discrete input dimensions to slice on, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    slice_dims: Option<Vec<usize>>,
    /// centroid, maximum or both
    #[arg(long, global = true)]
    planes: Option<Planes>,
    #[arg(long, global = true)]
    fail_fast: bool,
    #[arg(long, global = true)]
    exact_recheck: bool,
    /// Skip one header line in the dataset.
    #[arg(long, global = true)]
    header: bool,
    /// Label column index, or `last`.
    #[arg(long, global = true)]
    label_column: Option<LabelColumn>,
    /// Min-max scale features before clustering.
    #[arg(long, global = true)]
    scale: bool,
}

fn parse_init(s: &str) -> std::result::Result<Init, String> {
    match s {
        "random" => Ok(Init::Random),
        "plus-plus" | "kmeans++" => Ok(Init::PlusPlus),
        _ => Err(format!("unknown init {s:?} (random or plus-plus)")),
    }
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(network, dataset, out_dir, metric, seed, max_iters, max_depth, init, restarts);
        set!(
            min_members,
            min_density,
            top_k,
            max_splits,
            timeout_secs,
            jobs,
            slice_dims,
            planes,
            label_column
        );
        c.fail_fast |= self.fail_fast;
        c.exact_recheck |= self.exact_recheck;
        c.header |= self.header;
        c.scale |= self.scale;
        c.validate()?;
        Ok(c)
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("{flag} is required (flag or config key)")))
}

fn network(c: &RunConfig) -> Result<Network> {
    load_network(required(&c.network, "--network")?)
}

fn dataset(c: &RunConfig) -> Result<Dataset> {
    let ds = load_dataset(required(&c.dataset, "--dataset")?, c.label_column, c.header)?;
    Ok(if c.scale { ds.min_max_scaled() } else { ds })
}

fn cmd_cluster(c: &RunConfig) -> Result<u8> {
    let ds = dataset(c)?;
    let regions = label_guided_cluster(&ds, &c.cluster_params())?;
    write_regions(&c.out_dir, &regions)?;
    println!(
        "{} regions written to {}",
        regions.len(),
        c.out_dir.display()
    );
    Ok(0)
}

fn cmd_analyze(c: &RunConfig) -> Result<u8> {
    let net = network(c)?;
    let regions = read_regions(&c.out_dir)?;
    let plan = build_plan(&net, &regions, &c.filters())?;
    plan.write(&c.out_dir)?;
    println!("{} of {} regions planned", plan.len(), regions.len());
    Ok(0)
}

fn cmd_verify(c: &RunConfig) -> Result<u8> {
    let net = network(c)?;
    let regions = if c.out_dir.join(REGIONS_MANIFEST).exists() {
        read_regions(&c.out_dir)?
    } else {
        let regions = label_guided_cluster(&dataset(c)?, &c.cluster_params())?;
        write_regions(&c.out_dir, &regions)?;
        regions
    };
    let plan = if c.out_dir.join(PLAN_FILE).exists() {
        VerificationPlan::read(&c.out_dir)?
    } else {
        let plan = build_plan(&net, &regions, &c.filters())?;
        plan.write(&c.out_dir)?;
        plan
    };
    let (reports, verdicts) = verify_plan(&net, &regions, &plan, &c.pipeline())?;
    write_reports(&c.out_dir, &reports, &verdicts)?;
    print!("{}", render_markdown(&reports));
    Ok(exit_code(&reports) as u8)
}

fn cmd_report(c: &RunConfig) -> Result<u8> {
    let reports = read_reports(&c.out_dir)?;
    print!("{}", render_markdown(&reports));
    Ok(exit_code(&reports) as u8)
}

fn cmd_oracle(c: &RunConfig, args: &OracleArgs) -> Result<u8> {
    let net = network(c)?;
    let q = Query::new(
        &net,
        args.center.clone(),
        args.radius,
        args.label,
        args.target,
    )?;
    let grid = GridSpec {
        step: args
            .step
            .unwrap_or(args.radius / deepsafe::oracle::DEFAULT_DIVISIONS),
        max_points: args.max_points,
    };
    let result = grid_search(&net, &q, &grid)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&result).expect("grid result serializes")
    );
    Ok(if result.is_found() { 1 } else { 0 })
}

fn run(cli: &Cli) -> Result<u8> {
    let c = cli.opts.resolve()?;
    match &cli.command {
        Command::Cluster => cmd_cluster(&c),
        Command::Analyze => cmd_analyze(&c),
        Command::Verify => cmd_verify(&c),
        Command::Report => cmd_report(&c),
        Command::Oracle(args) => cmd_oracle(&c, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE_ERROR } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_ERROR)
        }
    }
}
