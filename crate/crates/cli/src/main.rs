//! Command-line surface over the fairness library.
//!
//! Exit codes form a small contract for automation:
//!
//! * 0 - success (for `scan`: the theorem survived)
//! * 2 - malformed input or invalid flags
//! * 3 - unknown node in a graph query
//! * 4 - a named role column is absent
//! * 5 - reserved for `scan` finding a genuine multi-satisfying witness

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use faircause::dist::SampleSet;
use faircause::fairness::{audit_samples, impossibility_scan, FairnessTriple, MetricReport};
use faircause::graph::CausalDag;
use faircause::scm::{sweep_gate, CorrectionPolicy, ScmSpec};
use faircause::Error;

#[derive(Parser)]
#[command(
    name = "faircause",
    version,
    about = "Causal analysis of machine fairness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether two nodes are d-separated in an edge-list graph.
    Dsep {
        /// Graph file, one `from -> to` edge per line.
        #[arg(long)]
        graph: PathBuf,
        x: String,
        y: String,
        /// Conditioning nodes.
        given: Vec<String>,
    },
    /// Audit a sample CSV for the three fairness metrics.
    Audit {
        /// Samples CSV: variable columns, optional trailing `weight` column.
        input: PathBuf,
        /// Sensitive attribute column.
        #[arg(long)]
        sensitive: String,
        /// True label column.
        #[arg(long)]
        truth: String,
        /// Prediction column.
        #[arg(long)]
        prediction: String,
        /// Satisfaction tolerance for metric gaps.
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Dependence threshold for the preconditions.
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        /// Additive smoothing for the empirical joint.
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Brute-force the impossibility theorem over a probability grid.
    Scan {
        /// Grid resolution: table entries are multiples of 1/resolution.
        #[arg(long, default_value_t = 20)]
        resolution: u64,
        /// Satisfaction tolerance; must stay below tau/2.
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Precondition threshold.
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        /// Write the verdict here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Draw samples from a model file and write the sample CSV.
    Simulate {
        /// Model JSON file.
        #[arg(long)]
        scm: PathBuf,
        /// Number of observations.
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Sweep the disadvantaged group's gate probability and write one CSV
    /// row of gaps per setting.
    Sweep {
        /// Base model JSON file; the prediction must depend on the truth
        /// alone.
        #[arg(long)]
        scm: PathBuf,
        /// Correction policy JSON file.
        #[arg(long)]
        policy: PathBuf,
        /// Comma-separated gate values, strictly increasing in [0, 1].
        #[arg(long, value_delimiter = ',')]
        gates: Vec<f64>,
        #[arg(long, default_value = "A")]
        sensitive: String,
        #[arg(long, default_value = "Y")]
        truth: String,
        #[arg(long, default_value = "Yhat")]
        prediction: String,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        tau: f64,
        /// Output CSV path.
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownNode(_) => 3,
        Error::MissingRole(_) => 4,
        _ => 2,
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, content: &str) -> Result<(), Error> {
    match output {
        Some(path) => {
            fs::write(path, content).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn run(command: Command) -> Result<u8, Error> {
    match command {
        Command::Dsep { graph, x, y, given } => {
            let dag = CausalDag::parse_edge_list(&read_file(&graph)?)?;
            let separated = dag.d_separated(&x, &y, &given)?;
            println!("d-separated: {separated}");
            Ok(0)
        }
        Command::Audit {
            input,
            sensitive,
            truth,
            prediction,
            epsilon,
            tau,
            smoothing,
            output,
            format,
        } => {
            let samples = SampleSet::from_csv_str(&read_file(&input)?)?;
            for role in [&sensitive, &truth, &prediction] {
                if samples.var_index(role).is_err() {
                    return Err(Error::MissingRole(role.clone()));
                }
            }
            let triple = FairnessTriple::new(sensitive, truth, prediction)?;
            let report = audit_samples(&samples, &triple, epsilon, tau, smoothing)?;
            let rendered = match format {
                OutputFormat::Json => report.to_json() + "\n",
                OutputFormat::Csv => report_csv(&report),
            };
            emit(output.as_deref(), &rendered)?;
            Ok(0)
        }
        Command::Scan {
            resolution,
            epsilon,
            tau,
            output,
        } => {
            if !(10..=40).contains(&resolution) {
                return Err(Error::InvalidQuery(
                    "scan resolution must lie in [10, 40]".to_string(),
                ));
            }
            let verdict = impossibility_scan(resolution, epsilon, tau)?;
            emit(output.as_deref(), &(verdict.to_json() + "\n"))?;
            Ok(if verdict.multi_satisfying == 0 { 0 } else { 5 })
        }
        Command::Simulate {
            scm,
            n,
            seed,
            output,
        } => {
            let model = ScmSpec::from_json(&read_file(&scm)?)?;
            let samples = model.ancestral_sample(n, seed)?;
            emit(Some(&output), &samples.to_csv_string()?)?;
            Ok(0)
        }
        Command::Sweep {
            scm,
            policy,
            gates,
            sensitive,
            truth,
            prediction,
            epsilon,
            tau,
            output,
        } => {
            let model = ScmSpec::from_json(&read_file(&scm)?)?;
            let policy = CorrectionPolicy::from_json(&read_file(&policy)?)?;
            let triple = FairnessTriple::new(sensitive, truth, prediction)?;
            let sweep = sweep_gate(&model, &policy, &gates, &triple, epsilon, tau)?;
            emit(Some(&output), &sweep.to_csv_string())?;
            Ok(0)
        }
    }
}

fn report_csv(report: &MetricReport) -> String {
    let mut out = String::from(
        "dp_gap,eo_gap,pp_gap,calibration_dep,bias_dep,dp_satisfied,eo_satisfied,pp_satisfied,preconditions_met,epsilon,tau\n",
    );
    out.push_str(&format!(
        "{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{},{},{}\n",
        report.dp_gap,
        report.eo_gap,
        report.pp_gap,
        report.calibration_dep,
        report.bias_dep,
        report.satisfied.dp,
        report.satisfied.eo,
        report.satisfied.pp,
        report.preconditions_met,
        report.epsilon,
        report.tau
    ));
    out
}
