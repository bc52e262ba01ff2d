use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qmarkov_cli::{
    cmd_born, cmd_cmi, cmd_condition, cmd_example, cmd_markov_order, cmd_validate, cmd_witness,
    parse_log_base, ExampleParams, InputError, Outcome, EXIT_INPUT,
};
use qmarkov_core::tol;

#[derive(Parser)]
#[command(name = "qmarkov", version, about = "Multi-time quantum processes and Markov order")]
struct Cli {
    /// Print the report as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Numerical threshold for validity and factorization checks.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Logarithm base for entropies: 2 or e.
    #[arg(long, global = true, default_value = "2")]
    log_base: String,
    /// Output path (a directory for `example`, a file for `condition`).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleName {
    AppendixD,
    Markovian,
    ClassicalChain,
}

impl ExampleName {
    fn as_str(self) -> &'static str {
        match self {
            ExampleName::AppendixD => "appendix-d",
            ExampleName::Markovian => "markovian",
            ExampleName::ClassicalChain => "classical-chain",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity, causality and normalization of a process file.
    Validate { process: PathBuf },
    /// Write an example process and manifest.
    Example {
        name: ExampleName,
        #[arg(long, default_value_t = 3)]
        steps: usize,
        #[arg(long, default_value_t = 0.3)]
        p_flip: f64,
        /// identity, depolarizing or dephasing
        #[arg(long, default_value = "identity")]
        channel: String,
    },
    /// Outcome probabilities of a tester on a process.
    Born { process: PathBuf, tester: PathBuf },
    /// Conditional process for one tester outcome.
    Condition {
        process: PathBuf,
        tester: PathBuf,
        #[arg(long)]
        outcome: String,
    },
    /// Test the history-future product form after each memory outcome.
    MarkovOrder {
        process: PathBuf,
        /// Steps as `history|memory|future`, e.g. `0|1|2`.
        #[arg(long)]
        partition: String,
        /// Tester file, or tetrahedral, sharp-z or sharp.
        #[arg(long, default_value = "tetrahedral")]
        instrument: String,
    },
    /// Conditional mutual information of a process or distribution.
    Cmi {
        input: PathBuf,
        #[arg(long)]
        partition: String,
    },
    /// Show an instrument with finite Markov order and a mixture of it without.
    Witness {
        process: PathBuf,
        #[arg(long)]
        partition: String,
        #[arg(long, default_value = "tetrahedral")]
        instrument: String,
        /// Mixing matrix, rows separated by `;`, entries by `,`.
        #[arg(long)]
        coefficients: Option<String>,
    },
}

fn run(cli: &Cli) -> Result<Outcome, InputError> {
    let base = parse_log_base(&cli.log_base)?;
    match &cli.command {
        Command::Validate { process } => cmd_validate(process, cli.tolerance.unwrap_or(tol::HERM)),
        Command::Example {
            name,
            steps,
            p_flip,
            channel,
        } => {
            let params = ExampleParams {
                steps: *steps,
                p_flip: *p_flip,
                channel: channel.clone(),
            };
            let dir = cli
                .output
                .clone()
                .unwrap_or_else(|| PathBuf::from(name.as_str()));
            cmd_example(name.as_str(), &params, &dir)
        }
        Command::Born { process, tester } => cmd_born(process, tester),
        Command::Condition {
            process,
            tester,
            outcome,
        } => cmd_condition(process, tester, outcome, cli.output.as_deref()),
        Command::MarkovOrder {
            process,
            partition,
            instrument,
        } => cmd_markov_order(
            process,
            partition,
            instrument,
            cli.tolerance.unwrap_or(tol::FACTOR),
        ),
        Command::Cmi { input, partition } => cmd_cmi(input, partition, base),
        Command::Witness {
            process,
            partition,
            instrument,
            coefficients,
        } => cmd_witness(process, partition, instrument, coefficients.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(out) => {
            if cli.json {
                print!("{}", out.report.to_json());
            } else {
                print!("{}", out.text);
            }
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
