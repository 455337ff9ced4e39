use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use peaknet::pipeline::{compare_to_published, AnalysisReport, Pipeline, RunConfig};
use peaknet::synth::{generate, SynthConfig};
use peaknet::{Error, Result};

/// Multiscale network analysis of expedition records.
///
/// Exit status: 0 on success, 1 for analysis errors, 2 for input or
/// configuration errors. Errors are printed as `error[input]: ...` or
/// `error[analysis]: ...` on stderr.
#[derive(Debug, Parser)]
#[command(name = "peaknet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic dataset (expeditions.csv, members.csv, ground_truth.json).
    Synth(SynthArgs),
    /// Parse and link the input CSVs into the dataset cache.
    Ingest(RunArgs),
    /// Repeat-partner outcome ratios by experience bin.
    Partners(RunArgs),
    /// Feature graphs and summit/no-summit centrality comparison.
    Centrality(RunArgs),
    /// Build the five-layer expedition multiplex.
    Multiplex(RunArgs),
    /// Regression projection and layer–success correlations.
    Correlate(RunArgs),
    /// Louvain communities of the aggregated multiplex and their profiles.
    Communities(RunArgs),
    /// Run every stage and write report.json and summary.txt.
    Report(RunArgs),
    /// Compare a report against the published reference values.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Generator seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// JSON generator configuration; the three-community benchmark when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the effective generator configuration as JSON to stdout and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// `key = value` run configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set intra_layer=distance`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    expeditions: Option<PathBuf>,
    #[arg(long)]
    members: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Louvain seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Path to report.json; defaults to the report in the configured output directory.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
    /// Print CSV instead of the aligned table.
    #[arg(long)]
    csv: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(p) = &self.expeditions {
            cfg.expeditions = p.clone();
        }
        if let Some(p) = &self.members {
            cfg.members = p.clone();
        }
        if let Some(p) = &self.out {
            cfg.output_dir = p.clone();
        }
        if let Some(s) = self.seed {
            cfg.louvain_seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn pipeline(&self) -> Result<Pipeline> {
        Pipeline::new(self.config()?)
    }
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str::<SynthConfig>(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg)?);
        return Ok(());
    }
    let out = generate(&cfg)?;
    let paths = out.write_to(&args.out)?;
    println!(
        "{} expeditions, {} climber rows (seed {})",
        out.expeditions.len(),
        out.members.len(),
        cfg.seed
    );
    for p in [paths.expeditions, paths.members, paths.ground_truth] {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> Result<()> {
    let path = match &args.report {
        Some(p) => p.clone(),
        None => args.run.config()?.output_dir.join("report.json"),
    };
    let bytes = fs::read(&path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    let report: AnalysisReport = serde_json::from_slice(&bytes)?;
    let table = compare_to_published(&report)?;
    if args.csv {
        if let Some(b) = &table.banner {
            eprintln!("{b}");
        }
        print!("{}", table.to_csv()?);
    } else {
        print!("{}", table.to_text());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a),
        Command::Ingest(a) => {
            let mut p = a.pipeline()?;
            let data = p.ingest()?;
            let ds = &data.dataset;
            println!(
                "{} expeditions, {} climber rows, {} diagnostics",
                ds.expeditions.len(),
                ds.climbers.len(),
                ds.provenance.diagnostics.len()
            );
            for d in &ds.provenance.diagnostics {
                eprintln!("warning: {d}");
            }
            Ok(())
        }
        Command::Partners(a) => {
            let table = a.pipeline()?.partners()?;
            print!("{}", table.to_csv()?);
            Ok(())
        }
        Command::Centrality(a) => {
            let result = a.pipeline()?.centrality()?;
            println!("feature,mean_success,mean_nosummit");
            for r in &result.table.rows {
                println!("{},{},{}", r.feature, r.mean_success, r.mean_nosummit);
            }
            Ok(())
        }
        Command::Multiplex(a) => {
            let mut p = a.pipeline()?;
            let e = p.multiplex()?;
            for layer in &e.layers {
                let edges = layer
                    .adjacency
                    .as_slice()
                    .iter()
                    .filter(|&&w| w > 0.0)
                    .count()
                    / 2;
                println!(
                    "{}: {} edges over {} expeditions",
                    layer.kind,
                    edges,
                    e.len()
                );
            }
            for n in &e.notes {
                eprintln!("note: {n}");
            }
            Ok(())
        }
        Command::Correlate(a) => {
            let result = a.pipeline()?.correlate()?;
            print!("{}", result.report.to_csv()?);
            for w in &result.regression.warnings {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::Communities(a) => {
            let result = a.pipeline()?.communities()?;
            println!(
                "{} communities, modularity {:.4}",
                result.partition.community_count(),
                result.partition.modularity
            );
            for p in &result.profiles {
                println!(
                    "community {}: {} expeditions, success {:.3}",
                    p.community, p.size, p.mean_success
                );
            }
            Ok(())
        }
        Command::Report(a) => {
            let mut p = a.pipeline()?;
            let report = p.run()?;
            print!("{}", report.summary());
            println!("\nwrote {}", p.output("report.json").display());
            Ok(())
        }
        Command::Compare(a) => compare(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
