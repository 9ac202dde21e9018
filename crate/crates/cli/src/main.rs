//! `airvote` command-line tool.
//!
//! Exit status: 0 on success, 1 on invalid input or failed checks, 2 on a
//! runtime failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use airvote::analysis::suites::{run_suite, Suite};
use airvote::analysis::{
    comm_cost, convergence_bound, error_prob_bound, exponential_race_error, failure_prob_bound,
    intermediate_error_bound, tau, BoundParams, CheckRow, CostScheme,
};
use airvote::harness::{run_experiment, scheme_label, summary_path, write_plot_data, ExperimentConfig};
use airvote::Error;
use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "airvote", version, about = "Sign-vote federated learning over a simulated fading uplink")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config file.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run Monte Carlo checks of the closed-form bounds.
    McVerify {
        /// lemma31, lemmad1 (alias gauss), lemma32, sync, oracle or all.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Evaluate a closed-form bound or cost.
    Bounds(BoundsArgs),
    /// Convert metrics files to `round,scheme,accuracy` CSV.
    PlotData {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Scheme label for every input (default: from the summary file).
        #[arg(long)]
        scheme: Option<String>,
        /// Write here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
#[command(group(ArgGroup::new("mode").required(true).args(["cost", "failure", "error_prob", "convergence"])))]
struct BoundsArgs {
    /// Uplink bits per iteration for sgd, qsgd, terngrad or signsgd_mv.
    #[arg(long, value_name = "SCHEME")]
    cost: Option<String>,
    /// Single-device sign-flip bound; needs --r.
    #[arg(long)]
    failure: bool,
    /// Vote error bounds; needs --devices, --beta and --r or --q-flip.
    #[arg(long)]
    error_prob: bool,
    /// tau and the convergence-rate bound; needs --devices, --beta, --gamma, --rounds.
    #[arg(long)]
    convergence: bool,

    #[arg(long)]
    devices: Option<u64>,
    #[arg(long)]
    dim: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    q_flip: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rounds: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    l1_smooth: f64,
    #[arg(long, default_value_t = 1.0)]
    l1_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    f_gap: f64,
    #[arg(long)]
    batch_size: Option<f64>,
    /// Divide the variance term by sqrt(batch size).
    #[arg(long)]
    strict: bool,
}

enum Failure {
    Invalid(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Invalid(format!("--{flag} is required here")))
}

fn train(config: PathBuf) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&config).map_err(|e| Failure::Invalid(e.to_string()))?;
    let row = run_experiment(&cfg)?;
    println!(
        "{}: final accuracy {:.4}, mean power {:.4}, {} bits over {} rounds",
        row.scheme, row.final_accuracy, row.mean_power, row.total_bits, row.rounds
    );
    println!("metrics: {}", cfg.output.display());
    println!("summary: {}", summary_path(&cfg.output).display());
    Ok(())
}

fn print_rows(rows: &[CheckRow]) {
    let width = rows.iter().map(|r| r.case.len()).max().unwrap_or(4).max(4);
    println!("{:<8} {:<width$} {:>12} {:>12}  result", "suite", "case", "measured", "reference");
    for r in rows {
        println!(
            "{:<8} {:<width$} {:>12.6} {:>12.6}  {}  {}",
            r.suite.name(),
            r.case,
            r.measured,
            r.reference,
            if r.passed { "PASS" } else { "FAIL" },
            r.rule
        );
    }
}

fn mc_verify(suite: &str, trials: usize, seed: u64) -> Result<(), Failure> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse()?]
    };
    if trials == 0 {
        return Err(Failure::Invalid("--trials must be positive".into()));
    }
    let mut failed = 0;
    for s in suites {
        let rows = run_suite(s, trials, seed)?;
        print_rows(&rows);
        failed += rows.iter().filter(|r| !r.passed).count();
    }
    if failed > 0 {
        return Err(Failure::Invalid(format!("{failed} check(s) failed")));
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> Result<(), Failure> {
    if let Some(scheme) = a.cost {
        let scheme: CostScheme = scheme.parse()?;
        println!("{}", comm_cost(scheme, need(a.devices, "devices")?, need(a.dim, "dim")?)?);
    } else if a.failure {
        println!("{}", failure_prob_bound(need(a.r, "r")?)?);
    } else if a.error_prob {
        let k = need(a.devices, "devices")? as usize;
        let beta = need(a.beta, "beta")?;
        match (a.r, a.q_flip) {
            (Some(r), None) => println!("error_prob_bound = {}", error_prob_bound(k, beta, r)?),
            (None, Some(q)) => {
                println!("intermediate_bound = {}", intermediate_error_bound(k, beta, q)?);
                println!("exponential_race = {}", exponential_race_error(k, beta, q)?);
            }
            _ => return Err(Failure::Invalid("give exactly one of --r and --q-flip".into())),
        }
    } else {
        let k = need(a.devices, "devices")? as usize;
        let beta = need(a.beta, "beta")?;
        let gamma = need(a.gamma, "gamma")?;
        let mut p = BoundParams::new(k, beta, gamma, need(a.rounds, "rounds")?);
        p.l1_smooth = a.l1_smooth;
        p.l1_sigma = a.l1_sigma;
        p.f_gap = a.f_gap;
        p.batch_size = a.batch_size;
        p.strict_derivation = a.strict;
        let bound = convergence_bound(&p)?;
        println!("tau = {}", tau(beta, k, gamma));
        println!("convergence_bound = {bound}");
        if !p.batch_size_consistent() {
            eprintln!("note: batch size differs from rounds / gamma");
        }
    }
    Ok(())
}

fn plot_data(inputs: Vec<PathBuf>, scheme: Option<String>, output: Option<PathBuf>) -> Result<(), Failure> {
    let labelled: Vec<(PathBuf, String)> = inputs
        .into_iter()
        .map(|p| {
            let label = scheme.clone().unwrap_or_else(|| scheme_label(&p));
            (p, label)
        })
        .collect();
    for (p, _) in &labelled {
        if !p.is_file() {
            return Err(Failure::Invalid(format!("{}: no such file", p.display())));
        }
    }
    match output {
        Some(path) => {
            let f = File::create(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            write_plot_data(&labelled, io::BufWriter::new(f))?;
        }
        None => write_plot_data(&labelled, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train { config } => train(config),
        Command::McVerify { suite, trials, seed } => mc_verify(&suite, trials, seed),
        Command::Bounds(a) => bounds(a),
        Command::PlotData { inputs, scheme, output } => plot_data(inputs, scheme, output),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
