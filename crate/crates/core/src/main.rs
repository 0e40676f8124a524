use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dkminwise::analysis::{
    default_series_constant, delta_series_constant, required_independence, required_k, sample_budget,
    DEFAULT_SERIES_TRUNCATION,
};
use dkminwise::estimators::{self, SketchParams, DEFAULT_D, DEFAULT_K, DEFAULT_SHINGLE_WIDTH, DEFAULT_TAU};
use dkminwise::format;
use dkminwise::suites::{run_suite, Suite};

#[derive(Parser)]
#[command(
    name = "dkmw",
    version,
    about = "d-k-min-wise hashing: parameters, sketches, comparison, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print independence degrees, the required k and the sketch budget.
    Params {
        #[arg(long)]
        d: u64,
        #[arg(long)]
        epsilon: f64,
        /// Series constant; defaults to the numerically evaluated value.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
    },
    /// Shingle a file and write a sketch bundle.
    Sketch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SHINGLE_WIDTH)]
        w: usize,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the Jaccard similarity of two sketch files.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run a verification suite; exits nonzero if any check fails.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        trials: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Lemma1,
    Tails,
    Moments,
    Delta,
    Independence,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Lemma1 => Suite::Lemma1,
            SuiteArg::Tails => Suite::Tails,
            SuiteArg::Moments => Suite::Moments,
            SuiteArg::Delta => Suite::Delta,
            SuiteArg::Independence => Suite::Independence,
        }
    }
}

fn run(cli: Cli) -> dkminwise::Result<bool> {
    match cli.command {
        Command::Params { d, epsilon, c, tau } => {
            let levels = required_independence(d)?;
            let series = delta_series_constant(epsilon, DEFAULT_SERIES_TRUNCATION)?;
            let c = match c {
                Some(c) => c,
                None => default_series_constant(epsilon)?,
            };
            let k = required_k(d, epsilon, c, levels.theorem_l)?;
            println!("d={d}");
            println!("epsilon={epsilon}");
            println!("lemma_l={}", levels.lemma_l);
            println!("theorem_l={}", levels.theorem_l);
            println!("series_constant={series}");
            println!("c={c}");
            println!("required_k={k}");
            println!("tau={tau}");
            println!("sample_budget={}", sample_budget(tau)?);
            Ok(true)
        }
        Command::Sketch {
            input,
            w,
            k,
            tau,
            seed,
            out,
        } => {
            let bytes = std::fs::read(&input)?;
            let elements = estimators::shingle_ingest(&bytes, w, seed)?;
            let params = SketchParams::for_d(k, DEFAULT_D)?;
            let bundle = estimators::build_bundle(&elements, params, tau, seed)?;
            format::save(&bundle, BufWriter::new(File::create(&out)?))?;
            println!("elements={}", elements.len());
            println!("r={}", bundle.r());
            println!("k={k}");
            println!("underfull={}", bundle.is_underfull());
            Ok(true)
        }
        Command::Compare { a, b } => {
            let a = format::load(BufReader::new(File::open(&a)?))?;
            let b = format::load(BufReader::new(File::open(&b)?))?;
            let est = estimators::jaccard_estimate(&a, &b)?;
            println!("jaccard={}", est.estimate);
            println!("underfull={}", est.underfull);
            let per: Vec<String> = est.per_sketch.iter().map(|v| v.to_string()).collect();
            println!("per_sketch={}", per.join(","));
            Ok(true)
        }
        Command::Verify { suite, seed, trials } => {
            let report = run_suite(suite.into(), seed, trials)?;
            print!("{report}");
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
