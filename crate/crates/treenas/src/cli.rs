//! Command-line interface: single runs, strategy comparisons, pre-train
//! sweeps, tree construction, and record export. Everything a subcommand
//! produces lands under an output directory, and run artifacts embed their
//! config so results stay traceable to their inputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::distance::{DistanceMatrix, Measure};
use crate::harness::{
    build_strategy_tree, compare, load_config, resolve_space, run, sweep_pretrain_budget,
    EvaluatorSpec, RunConfig, RunRecord, Strategy,
};
use crate::hierarchy::{agglomerative, export_tree, Linkage};
use crate::space::{enumerate, DEFAULT_ENUMERATION_CAP};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable consulted for the output directory when `--out-dir`
/// is not given.
pub const OUT_DIR_ENV: &str = "TREENAS_OUT_DIR";

const CONFIG_SCHEMA: &str = r#"config schema: {"space": "<preset-or-file>", "evaluator": {"kind": "tabular", "benchmark": "<preset-or-file>"} | {"kind": "synthetic", ...}, "strategy": "uniform|independent|boltzmann|mcts_default|mcts_default_reg|mcts_random|mcts_acc_partition|mcts_learned|mcts_learned_zero_cost", "seed": <u64>, + optional fields (total_steps, pretrain_frac, warmup_frac, measure, linkage, schedule, beta, lambda, beta_reg, sigma_acc, t_ramp, k_final, batch_size, encoding, encoding_weighted, budget_mflops, budget_lower_frac)}"#;

/// Bad input from the caller exits 1; failures while doing the work exit 2.
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    fn runtime(msg: impl std::fmt::Display) -> CliError {
        CliError::Runtime(msg.to_string())
    }
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    Measure::parse(s).ok_or_else(|| format!("unknown measure \"{s}\" (kl|l2|cross_entropy)"))
}

fn parse_linkage(s: &str) -> Result<Linkage, String> {
    Linkage::parse(s).ok_or_else(|| format!("unknown linkage \"{s}\" (single|complete|average|ward)"))
}

#[derive(Parser)]
#[command(name = "treenas", version, about = "Tree-guided architecture search runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the seed of every loaded config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for result files (default: $TREENAS_OUT_DIR, else ".").
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Suppress informational output on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one search run from a JSON config and store its record.
    Run {
        /// Run configuration file.
        config: PathBuf,
    },
    /// Run each config across consecutive seeds and tabulate accuracy/rank.
    Compare {
        /// Config files; all must share the same space and evaluator.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Seeds per config, starting from each config's own seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Build a search tree over a space and write it in Newick form.
    ///
    /// The tree source is one of: a distance-matrix JSON file (positional),
    /// a distance measure (positional or --measure) evaluated on a default
    /// synthetic backend, or --from-run to rebuild the tree of a recorded run.
    BuildTree {
        /// Space preset name or space JSON file.
        space: String,
        /// Distance matrix file, or a measure name (kl|l2|cross_entropy).
        source: Option<String>,
        /// Distance measure for output clustering.
        #[arg(long, value_parser = parse_measure)]
        measure: Option<Measure>,
        /// Rebuild the tree used by a stored run record.
        #[arg(long)]
        from_run: Option<PathBuf>,
        /// Cluster linkage (default: average, or the record's setting).
        #[arg(long, value_parser = parse_linkage)]
        linkage: Option<Linkage>,
        /// Output file (default: <out-dir>/tree.nwk).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-emit a stored run record as a per-step CSV or canonical JSON.
    Export {
        /// Run record file produced by `run`.
        record: PathBuf,
        /// Output format.
        #[arg(long, value_parser = ["csv", "json"], default_value = "json")]
        format: String,
        /// Output file (default: <out-dir>/<record-stem>.<format>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the pre-train budget of a learned-tree config.
    SweepPretrain {
        /// Run configuration file (learned-tree strategy).
        config: PathBuf,
        /// Comma-separated pre-train step counts, e.g. 0,2000,4000.
        #[arg(long, required = true, value_delimiter = ',')]
        grid: Vec<u64>,
        /// Seeds per grid point.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
}

/// Runs the CLI against an explicit argv (first element is the program name)
/// and returns the process exit status.
pub fn cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(p) => p,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(parsed) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let out_dir = resolve_out_dir(cli.out_dir.as_deref())?;
    match cli.command {
        Command::Run { config } => cmd_run(&config, cli.seed, &out_dir, cli.quiet),
        Command::Compare { configs, seeds } => {
            cmd_compare(&configs, seeds, cli.seed, &out_dir, cli.quiet)
        }
        Command::BuildTree {
            space,
            source,
            measure,
            from_run,
            linkage,
            out,
        } => cmd_build_tree(
            &space,
            source.as_deref(),
            measure,
            from_run.as_deref(),
            linkage,
            out.as_deref(),
            cli.seed,
            &out_dir,
            cli.quiet,
        ),
        Command::Export {
            record,
            format,
            out,
        } => cmd_export(&record, &format, out.as_deref(), &out_dir, cli.quiet),
        Command::SweepPretrain {
            config,
            grid,
            seeds,
        } => cmd_sweep(&config, &grid, seeds, cli.seed, &out_dir, cli.quiet),
    }
}

fn resolve_out_dir(flag: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match flag {
        Some(d) => d.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_ENV) {
            Some(d) => PathBuf::from(d),
            None => PathBuf::from("."),
        },
    };
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create out dir {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Reads a config; parse and validation problems are the caller's to fix, so
/// they surface as usage errors together with the expected schema.
fn read_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(path).map_err(|e| CliError::usage(format!("{e}\n{CONFIG_SCHEMA}")))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn cmd_run(config: &Path, seed: Option<u64>, out_dir: &Path, quiet: bool) -> Result<(), CliError> {
    let cfg = read_config(config, seed)?;
    let record = run(&cfg).map_err(CliError::runtime)?;
    let out = out_dir.join(format!("run-{}-seed{}.json", cfg.strategy.name(), cfg.seed));
    write_file(&out, &record.to_json())?;
    if !quiet {
        println!(
            "run {} seed {}: final {} acc {} rank {} ({} evals) -> {}",
            cfg.strategy.name(),
            cfg.seed,
            record.final_arch.as_deref().unwrap_or("-"),
            record
                .final_acc
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "-".into()),
            record
                .final_rank
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".into()),
            record.evals,
            out.display()
        );
    }
    if let Some(err) = &record.error {
        return Err(CliError::Runtime(format!(
            "run failed mid-way (partial record kept): {err}"
        )));
    }
    Ok(())
}

fn cmd_compare(
    configs: &[PathBuf],
    seeds: u64,
    seed: Option<u64>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    let mut cfgs = Vec::with_capacity(configs.len());
    for path in configs {
        cfgs.push(read_config(path, seed)?);
    }
    let summary = compare(&cfgs, seeds).map_err(CliError::runtime)?;
    let csv_path = out_dir.join("compare.csv");
    write_file(&csv_path, &summary.csv())?;
    let records_path = out_dir.join("compare-records.json");
    let records =
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    write_file(&records_path, &records)?;
    if !quiet {
        print!("{}", summary.table());
        println!("wrote {} and {}", csv_path.display(), records_path.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_build_tree(
    space_id: &str,
    source: Option<&str>,
    measure_flag: Option<Measure>,
    from_run: Option<&Path>,
    linkage: Option<Linkage>,
    out: Option<&Path>,
    seed: Option<u64>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    // The positional source can name a measure or a distance-matrix file.
    let (matrix_file, source_measure) = match source {
        Some(s) => match Measure::parse(s) {
            Some(m) => (None, Some(m)),
            None => (Some(PathBuf::from(s)), None),
        },
        None => (None, None),
    };
    if source_measure.is_some() && measure_flag.is_some() {
        return Err(CliError::usage("measure given both positionally and via --measure"));
    }
    let measure = source_measure.or(measure_flag);
    if matrix_file.is_some() && measure.is_some() {
        return Err(CliError::usage(
            "a distance-matrix file carries its own measure; drop --measure",
        ));
    }
    if matrix_file.is_none() && measure.is_none() && from_run.is_none() {
        return Err(CliError::usage(
            "nothing to build from: give a matrix file, a measure, or --from-run",
        ));
    }

    let space = resolve_space(space_id).map_err(|e| CliError::usage(e.to_string()))?;
    let tree = if let Some(path) = &matrix_file {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("matrix file {}: {e}", path.display())))?;
        let (matrix, _measure_tag) = DistanceMatrix::from_json(&text).map_err(CliError::runtime)?;
        let n = enumerate(&space, DEFAULT_ENUMERATION_CAP)
            .map_err(CliError::runtime)?
            .len();
        if matrix.n() != n {
            return Err(CliError::usage(format!(
                "matrix covers {} items but the space enumerates {n}",
                matrix.n()
            )));
        }
        agglomerative(&matrix, linkage.unwrap_or(Linkage::Average))
    } else {
        let mut cfg = match from_run {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::usage(format!("record {}: {e}", path.display())))?;
                let record = RunRecord::from_json(&text)
                    .map_err(|e| CliError::usage(format!("record {}: {e}", path.display())))?;
                record.config
            }
            None => RunConfig::new(space_id, EvaluatorSpec::default_synthetic(), Strategy::MctsLearned),
        };
        cfg.space = space_id.to_string();
        if let Some(m) = measure {
            cfg.measure = m;
            cfg.strategy = Strategy::MctsLearned;
        } else if cfg.strategy.is_flat() {
            cfg.strategy = Strategy::MctsLearned;
        }
        if let Some(l) = linkage {
            cfg.linkage = l;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let tree = build_strategy_tree(&cfg).map_err(CliError::runtime)?;
        // Echo the effective config next to the tree for provenance.
        let out_path = tree_out_path(out, out_dir);
        let echo = out_path.with_extension("config.json");
        write_file(
            &echo,
            &serde_json::to_string_pretty(&cfg).expect("config serialization cannot fail"),
        )?;
        tree
    };

    let out_path = tree_out_path(out, out_dir);
    write_file(&out_path, &export_tree(&tree))?;
    if !quiet {
        println!("tree with {} leaves -> {}", tree.num_archs(), out_path.display());
    }
    Ok(())
}

fn tree_out_path(out: Option<&Path>, out_dir: &Path) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => out_dir.join("tree.nwk"),
    }
}

fn cmd_export(
    record_path: &Path,
    format: &str,
    out: Option<&Path>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    let text = fs::read_to_string(record_path)
        .map_err(|e| CliError::usage(format!("record {}: {e}", record_path.display())))?;
    let record = RunRecord::from_json(&text)
        .map_err(|e| CliError::usage(format!("record {}: {e}", record_path.display())))?;
    let stem = record_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("record");
    let (default_name, contents) = match format {
        "csv" => (format!("{stem}.csv"), record.steps_csv()),
        "json" => (format!("{stem}.canonical.json"), record.canonical_json()),
        other => return Err(CliError::usage(format!("unknown format \"{other}\""))),
    };
    let out_path = match out {
        Some(p) => p.to_path_buf(),
        None => out_dir.join(default_name),
    };
    write_file(&out_path, &contents)?;
    if !quiet {
        println!("exported {} -> {}", format, out_path.display());
    }
    Ok(())
}

fn cmd_sweep(
    config: &Path,
    grid: &[u64],
    seeds: u64,
    seed: Option<u64>,
    out_dir: &Path,
    quiet: bool,
) -> Result<(), CliError> {
    let cfg = read_config(config, seed)?;
    let summary = sweep_pretrain_budget(&cfg, grid, seeds).map_err(CliError::runtime)?;
    let csv_path = out_dir.join("sweep-pretrain.csv");
    write_file(&csv_path, &summary.csv())?;
    let records_path = out_dir.join("sweep-records.json");
    let records =
        serde_json::to_string_pretty(&summary).expect("summary serialization cannot fail");
    write_file(&records_path, &records)?;
    if !quiet {
        print!("{}", summary.csv());
        println!("wrote {} and {}", csv_path.display(), records_path.display());
    }
    Ok(())
}
