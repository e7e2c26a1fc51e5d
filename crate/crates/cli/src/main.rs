use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use collsim::algorithms::{Algorithm, OpKind};
use collsim::Placement;
use collsim_cli::{cmd_dump, cmd_run, cmd_sweep, cmd_verify, CliError, Coefficients, Format, Mode, Mutation, RunSpec};

/// Generate, verify and cost-model broadcast, scatter and alltoall schedules
/// on multi-lane clusters.
#[derive(Debug, Parser)]
#[command(name = "collsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print one table row per case.
    Run(Flags),
    /// Check every case with the token-level oracle.
    Verify(Flags),
    /// Print the schedule of a single case, one line per transferred chunk.
    Dump(Flags),
    /// Like `run`, evaluating cases in parallel.
    Sweep(Flags),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MutateArg {
    None,
    DropLastEvent,
}

#[derive(Debug, Args)]
struct Flags {
    /// Collectives: bcast, scatter, alltoall (comma-separated).
    #[arg(long, value_delimiter = ',')]
    op: Option<Vec<OpKind>>,
    /// Algorithms: kported, klane, klane-fullnode, fulllane (comma-separated).
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<Algorithm>>,
    /// Node counts.
    #[arg(short = 'N', value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    /// Processors per node.
    #[arg(short = 'n', value_delimiter = ',')]
    per_node: Option<Vec<usize>>,
    /// Ports (k-ported) or lanes (k-lane, machine).
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Rank placement: block or rr.
    #[arg(long, default_value = "block")]
    placement: Placement,
    #[arg(long)]
    root: Option<usize>,
    /// Element counts (bcast: total; scatter/alltoall: per block).
    #[arg(short = 'c', value_delimiter = ',')]
    counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = Coefficients::default().alpha_inter)]
    alpha_inter: f64,
    #[arg(long, default_value_t = Coefficients::default().beta_inter)]
    beta_inter: f64,
    #[arg(long, default_value_t = Coefficients::default().alpha_intra)]
    alpha_intra: f64,
    #[arg(long, default_value_t = Coefficients::default().beta_intra)]
    beta_intra: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Damage each schedule before verifying (test hook).
    #[arg(long, value_enum, default_value = "none")]
    mutate: MutateArg,
}

impl Flags {
    fn into_spec(self, mode: Mode) -> RunSpec {
        RunSpec {
            mode,
            ops: self.op,
            algos: self.algo,
            nodes: self.nodes,
            per_node: self.per_node,
            ks: self.k,
            placement: self.placement,
            root: self.root,
            counts: self.counts,
            coefficients: Coefficients {
                alpha_inter: self.alpha_inter,
                beta_inter: self.beta_inter,
                alpha_intra: self.alpha_intra,
                beta_intra: self.beta_intra,
            },
            format: match self.format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            },
            mutate: match self.mutate {
                MutateArg::None => Mutation::None,
                MutateArg::DropLastEvent => Mutation::DropLastEvent,
            },
        }
    }
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not an error worth reporting
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(f) => cmd_run(&f.into_spec(Mode::Run)).map(|t| (t, true)),
        Command::Sweep(f) => cmd_sweep(&f.into_spec(Mode::Sweep)).map(|t| (t, true)),
        Command::Dump(f) => cmd_dump(&f.into_spec(Mode::Dump)).map(|t| (t, true)),
        Command::Verify(f) => cmd_verify(&f.into_spec(Mode::Verify)).map(|o| (o.text, o.all_passed)),
    };
    match result {
        Ok((text, ok)) => {
            emit(&text);
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
