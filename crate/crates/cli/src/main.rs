use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use naesat_core::decimation::{run, Ordering};
use naesat_core::experiment::{
    density_sweep, init_thread_pool, write_records_csv, write_records_json, Algorithm,
    ExperimentConfig,
};
use naesat_core::influence::{max_influence_stats, write_histogram_csv};
use naesat_core::instance::{generate, parse_formula, Formula};
use naesat_core::overlap::{census, first_moment_bound, interpolate, InterpolateOptions, OverlapParams};
use naesat_core::rng::Streams;
use naesat_core::sp::SpMode;
use naesat_core::{Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "naesat", version, about = "Random NAE-K-SAT laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// A formula read from a file or generated from the master seed.
#[derive(Args)]
struct Source {
    /// Formula in the naesat text format.
    #[arg(long, conflicts_with_all = ["n", "density"])]
    input: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    density: Option<f64>,
}

impl Source {
    fn load(&self, seed: u64) -> Result<Formula> {
        if let Some(path) = &self.input {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            return parse_formula(&text);
        }
        match (self.n, self.density) {
            (Some(n), Some(d)) => generate(n, self.k, d, seed),
            _ => Err(Error::invalid("give --input, or both --n and --density")),
        }
    }
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long, default_value = "uc")]
    algorithm: String,
    /// BP reads radius 2t; SP runs t rounds.
    #[arg(long, default_value_t = 1)]
    rounds: usize,
    /// SP decides by the fraction of this many initializations instead of one.
    #[arg(long)]
    sp_samples: Option<usize>,
}

impl RuleArgs {
    fn config(&self, k: usize, n: usize, densities: Vec<f64>, trials: usize, seed: u64) -> Result<ExperimentConfig> {
        let config = ExperimentConfig {
            algorithm: self.algorithm.parse::<Algorithm>()?,
            k,
            n,
            densities,
            rounds: self.rounds,
            trials,
            seed,
            sp_mode: match self.sp_samples {
                Some(samples) => SpMode::Estimate { samples },
                None => SpMode::Sample,
            },
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct WindowArgs {
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    eta: f64,
    #[arg(long, default_value_t = 2)]
    m: usize,
}

impl WindowArgs {
    fn params(&self) -> Result<OverlapParams> {
        OverlapParams::new(self.beta, self.eta, self.m)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        density: f64,
        /// Write the naesat text format instead of csv/json.
        #[arg(long)]
        text: bool,
    },
    /// Run one decimation.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        rule: RuleArgs,
    },
    /// Estimate the success probability over a density grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        rule: RuleArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// Comma-separated densities.
        #[arg(long, value_delimiter = ',', required = true)]
        densities: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Build a tuple of assignments with distances in the overlap window.
    Overlap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        rule: RuleArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 20)]
        replicates: usize,
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Decide exhaustively whether the overlap set is empty.
    Census {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// First-moment bound on the number of tuples.
    FirstMoment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long)]
        density: f64,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Influence-range sizes under a random ordering.
    Influence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        source: Source,
        /// Variable-graph hops.
        #[arg(long, default_value_t = 1)]
        radius: usize,
    },
}

fn open(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_error(out: &Option<PathBuf>, source: io::Error) -> Error {
    Error::Io {
        path: out.clone().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    }
}

fn emit(common: &Common, body: impl FnOnce(&mut dyn Write, Format) -> io::Result<()>) -> Result<()> {
    let mut out = open(&common.out)?;
    body(&mut out, common.format)
        .and_then(|()| out.flush())
        .map_err(|e| io_error(&common.out, e))
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)
}

fn bits(assignment: &[bool]) -> String {
    assignment.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            common,
            n,
            k,
            density,
            text,
        } => {
            let f = generate(n, k, density, common.seed)?;
            emit(&common, |out, format| {
                if text {
                    return out.write_all(f.to_dimacs().as_bytes());
                }
                let clauses: Vec<Vec<i64>> = f
                    .clauses()
                    .iter()
                    .map(|c| c.literals.iter().map(|l| l.to_dimacs()).collect())
                    .collect();
                match format {
                    Format::Json => write_json(out, &json!({"n": n, "k": k, "clauses": clauses})),
                    Format::Csv => {
                        for c in clauses {
                            let row: Vec<String> = c.iter().map(i64::to_string).collect();
                            writeln!(out, "{}", row.join(","))?;
                        }
                        Ok(())
                    }
                }
            })
        }
        Command::Solve { common, source, rule } => {
            let f = source.load(common.seed)?;
            let rule = rule.config(f.k(), f.num_vars(), vec![0.0], 1, common.seed)?.rule()?;
            let streams = Streams::new(common.seed);
            let z = Ordering::draw(f.num_vars(), &mut streams.stream("z"))?;
            let u = naesat_core::decimation::Seeds::draw(f.num_vars(), &mut streams.stream("u"));
            let trace = run(&f, rule.as_ref(), &z, &u)?;
            emit(&common, |out, format| match format {
                Format::Json => write_json(
                    out,
                    &json!({
                        "rule": trace.rule,
                        "n": f.num_vars(),
                        "violations": trace.violations,
                        "assignment": bits(&trace.assignment),
                    }),
                ),
                Format::Csv => {
                    writeln!(out, "var,value")?;
                    for (i, &b) in trace.assignment.iter().enumerate() {
                        writeln!(out, "{},{}", i + 1, u8::from(b))?;
                    }
                    Ok(())
                }
            })
        }
        Command::Sweep {
            common,
            rule,
            n,
            k,
            densities,
            trials,
        } => {
            let records = density_sweep(&rule.config(k, n, densities, trials, common.seed)?)?;
            emit(&common, |out, format| match format {
                Format::Csv => write_records_csv(&records, out),
                Format::Json => {
                    write_records_json(&records, &mut *out)?;
                    writeln!(out)
                }
            })
        }
        Command::Overlap {
            common,
            source,
            rule,
            window,
            replicates,
            slack,
        } => {
            let f = source.load(common.seed)?;
            let rule = rule.config(f.k(), f.num_vars(), vec![0.0], 1, common.seed)?.rule()?;
            let z = Ordering::draw(f.num_vars(), &mut Streams::new(common.seed).stream("z"))?;
            let report = interpolate(
                &f,
                rule.as_ref(),
                &z,
                &window.params()?,
                InterpolateOptions {
                    replicates,
                    slack,
                    seed: common.seed,
                },
            )?;
            emit(&common, |out, format| match format {
                Format::Json => {
                    report.write_json(&mut *out)?;
                    writeln!(out)
                }
                Format::Csv => {
                    writeln!(out, "index,violations,assignment")?;
                    for (j, (a, v)) in report.assignments.iter().zip(&report.violations).enumerate() {
                        writeln!(out, "{j},{v},{a}")?;
                    }
                    Ok(())
                }
            })
        }
        Command::Census {
            common,
            source,
            window,
        } => {
            let f = source.load(common.seed)?;
            let c = census(&f, &window.params()?)?;
            emit(&common, |out, format| match format {
                Format::Json => write_json(out, &serde_json::to_value(&c)?),
                Format::Csv => {
                    writeln!(out, "n,solutions,empty")?;
                    writeln!(out, "{},{},{}", c.n, c.solutions, c.empty)
                }
            })
        }
        Command::FirstMoment {
            common,
            n,
            k,
            density,
            window,
        } => {
            let b = first_moment_bound(n, k, density, &window.params()?)?;
            emit(&common, |out, format| match format {
                Format::Json => write_json(out, &serde_json::to_value(b)?),
                Format::Csv => {
                    writeln!(out, "ln_bound,factor,clauses")?;
                    writeln!(out, "{},{},{}", b.ln_bound, b.factor, b.clauses)
                }
            })
        }
        Command::Influence {
            common,
            source,
            radius,
        } => {
            let f = source.load(common.seed)?;
            let z = Ordering::draw(f.num_vars(), &mut Streams::new(common.seed).stream("z"))?;
            let stats = max_influence_stats(&f, &z, radius)?;
            emit(&common, |out, format| match format {
                Format::Json => write_json(out, &serde_json::to_value(&stats)?),
                Format::Csv => write_histogram_csv(&stats, out),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_thread_pool().and_then(|()| execute(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("naesat: {e}");
            ExitCode::from(match e {
                Error::Io { .. } => 3,
                _ => 2,
            })
        }
    }
}
