use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leafwise::model::ModeWindow;
use leafwise_cli::{parse_analyses, parse_range, run, Analysis, Format, RunConfig};

#[derive(Parser)]
#[command(name = "leafwise", version, about = "Exact homology computations for foliated models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a list of analyses (or `all`).
    Run {
        /// Comma-separated analyses; positional form of --analyses.
        #[arg(value_name = "ANALYSES")]
        list: Option<String>,
        #[arg(long)]
        analyses: Option<String>,
        #[command(flatten)]
        opts: Opts,
    },
    /// Longitudinal de Rham cohomology, basic cohomology and identities.
    Derham(Opts),
    /// Star and delta identities and homogeneous Poisson homology.
    Poisson(Opts),
    /// Splitting of the product circle bundle.
    Gysin(Opts),
    /// Spectral sequence of the Poisson filtration.
    Specseq(Opts),
    /// Hochschild and periodic cyclic dimension predictions.
    Hochschild(Opts),
    /// Residue traces and the Hochschild cocycles of the symbol algebra.
    Symbols(Opts),
}

#[derive(Args)]
struct Opts {
    /// Model description (JSON).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 2)]
    mode_bound: i64,
    /// Homogeneity range `a:b`.
    #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
    xi_range: String,
    /// Expansion depth of symbol products.
    #[arg(long, default_value_t = 12)]
    depth: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    /// json, markdown or csv; JSON is always written.
    #[arg(long, default_value = "json")]
    format: String,
    #[arg(long, hide = true)]
    corrupt_composition: bool,
}

fn config(opts: Opts, analyses: Vec<Analysis>, skip_unsupported: bool) -> anyhow::Result<RunConfig> {
    let (l_min, l_max) = parse_range(&opts.xi_range)?;
    let format: Format = opts.format.parse()?;
    let mut cfg = RunConfig::new(opts.model, opts.out);
    cfg.analyses = analyses;
    cfg.skip_unsupported = skip_unsupported;
    cfg.window = ModeWindow { bound: opts.mode_bound, l_min, l_max };
    cfg.depth = opts.depth;
    cfg.trials = opts.trials;
    cfg.seed = opts.seed;
    cfg.format = format;
    cfg.corrupt_composition = opts.corrupt_composition;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match cli.command {
        Command::Run { list, analyses, opts } => {
            let text = analyses.or(list).unwrap_or_else(|| "all".into());
            parse_analyses(&text).and_then(|(a, all)| config(opts, a, all))
        }
        Command::Derham(o) => config(o, vec![Analysis::Derham], false),
        Command::Poisson(o) => config(o, vec![Analysis::Poisson], false),
        Command::Gysin(o) => config(o, vec![Analysis::Gysin], false),
        Command::Specseq(o) => config(o, vec![Analysis::Specseq], false),
        Command::Hochschild(o) => config(o, vec![Analysis::Hochschild], false),
        Command::Symbols(o) => config(o, vec![Analysis::Symbols], false),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            let s = &outcome.summary;
            println!("status: {}", s.status);
            for a in &s.analyses {
                match &a.reason {
                    Some(r) => println!("{:<11} {} ({r})", a.analysis.name(), a.outcome),
                    None => println!("{:<11} {}", a.analysis.name(), a.outcome),
                }
                for f in &a.failed_checks {
                    println!("    failed: {f}");
                }
            }
            println!("reports written to {}", cfg.out_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
