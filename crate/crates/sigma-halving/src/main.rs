//! Command-line front end. Exit codes: 0 = all queried values converged,
//! 2 = undecided entries present, 1 = operational error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use num_rational::Ratio;

use sigma_halving::arithmetic::Natural;
use sigma_halving::families::{self, GoodSet};
use sigma_halving::harness::{self, SweepConfig, SweepReport};
use sigma_halving::perfection::{self, ExactRatio};
use sigma_halving::trajectory::{self, Budget, Convergence, Outcome, Steps, UndecidedReason};

#[derive(Parser)]
#[command(name = "sigma-halving", version, about = "Iterate the map n -> sigma(n) (n odd) / n/2 (n even)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the map from a single starting value
    Trajectory {
        /// Starting value (arbitrary precision)
        n: String,
        #[arg(long)]
        json: bool,
        /// Step budget override
        #[arg(long)]
        max_steps: Option<u64>,
        /// Bit-length budget override
        #[arg(long)]
        max_bits: Option<u64>,
    },
    /// Verify convergence for every value in a range
    Sweep {
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Continue from an existing checkpoint file
        #[arg(long, requires = "checkpoint")]
        resume: bool,
        #[arg(long, default_value_t = 65_536)]
        chunk: u64,
        /// Disable frontier memoization (full trajectories for every n)
        #[arg(long)]
        no_memoize: bool,
        #[arg(long)]
        json: bool,
    },
    /// Histogram of descent times over a range
    Descent {
        #[arg(long)]
        from: u64,
        #[arg(long)]
        to: u64,
        #[arg(long)]
        json: bool,
    },
    /// List family members at a level, or the closure-extended set
    Families {
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long)]
        bound: u64,
        /// Report the closure extension of all chain primes instead
        #[arg(long)]
        closure: bool,
        #[arg(long)]
        json: bool,
    },
    /// Abundancy index of n, or a bounded search for a target ratio
    Abundancy {
        /// Value to analyse (omit when searching)
        n: Option<String>,
        /// Target ratio r/s to search for
        #[arg(long)]
        search: Option<String>,
        #[arg(long)]
        bound: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Form the product of distinct family primes and iterate it to 1
    VerifyProduct {
        /// Comma-separated primes, e.g. 3,5,19
        primes: String,
    },
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Trajectory {
            n,
            json,
            max_steps,
            max_bits,
        } => {
            let n = parse_natural(&n)?;
            let mut budget = Budget::from_env();
            if let Some(v) = max_steps {
                budget.max_steps = v;
            }
            if let Some(v) = max_bits {
                budget.max_bits = v;
            }
            let record = trajectory::trajectory(&n, &budget);
            let converged = matches!(record.outcome, Outcome::ReachedOne { .. });
            if json {
                println!("{}", serde_json::to_string_pretty(&trajectory_json(&record))?);
            } else {
                print_trajectory(&record);
            }
            Ok(exit_for(converged))
        }
        Command::Sweep {
            from,
            to,
            workers,
            checkpoint,
            resume,
            chunk,
            no_memoize,
            json,
        } => {
            if from < 1 || from > to {
                return Err("sweep requires 1 <= from <= to".into());
            }
            let mut config = SweepConfig::new(from, to);
            config.budget = Budget::from_env();
            config.workers = workers;
            config.chunk_size = chunk.max(1);
            config.memoize_descent = !no_memoize;
            config.checkpoint_path = checkpoint.clone();
            let report = if resume {
                let path = checkpoint.expect("clap enforces --checkpoint with --resume");
                if path.exists() {
                    harness::resume(&path, &config)?
                } else {
                    harness::sweep(&config)?
                }
            } else {
                harness::sweep(&config)?
            };
            let all_converged = report.undecided.is_empty();
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_sweep(&report, from, to);
            }
            Ok(exit_for(all_converged))
        }
        Command::Descent { from, to, json } => {
            if from < 1 || from > to {
                return Err("descent requires 1 <= from <= to".into());
            }
            let budget = Budget::from_env();
            let stats = harness::descent_statistics(from, to, &budget);
            let all_decided = stats.undecided.is_empty();
            if json {
                println!("{}", serde_json::to_string_pretty(&stats)?);
            } else {
                println!("descent times over [{from}, {to}]:");
                println!("{:>10} {:>12}", "k", "count");
                for (k, c) in &stats.histogram {
                    println!("{k:>10} {c:>12}");
                }
                if let Some((n, k)) = stats.max {
                    println!("maximum: k = {k} at n = {n}");
                }
                if !all_decided {
                    println!("undecided: {:?}", stats.undecided);
                }
            }
            Ok(exit_for(all_decided))
        }
        Command::Families {
            level,
            bound,
            closure,
            json,
        } => {
            if closure {
                let set = families::closure_extend(&GoodSet::from_chains(bound), bound);
                if json {
                    println!("{}", serde_json::to_string_pretty(&set.to_json())?);
                } else {
                    println!(
                        "closure of chain primes <= {bound}: {} members",
                        set.len()
                    );
                    let members: Vec<String> = set.iter().map(|p| p.to_string()).collect();
                    println!("{}", members.join(" "));
                }
            } else {
                let members = families::generate_family(level, bound);
                if json {
                    let chains: Vec<_> = members
                        .iter()
                        .filter_map(|&p| families::family_level(&Natural::from(p)))
                        .map(|c| c.to_json())
                        .collect();
                    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
                        "level": level,
                        "bound": bound,
                        "members": chains,
                    }))?);
                } else {
                    println!("level {level} primes <= {bound}:");
                    println!(
                        "{}",
                        members
                            .iter()
                            .map(|p| p.to_string())
                            .collect::<Vec<_>>()
                            .join(" ")
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Abundancy {
            n,
            search,
            bound,
            json,
        } => match (n, search) {
            (Some(n), None) => {
                let n = parse_natural(&n)?;
                let index = perfection::abundancy_index(&n)?;
                let class = perfection::classify(&index);
                let perfect = perfection::is_perfect(&n)?;
                let superperfect = perfection::is_superperfect(&n)?;
                use num_integer::Integer;
                let odd_forms = if n.is_odd() {
                    Some((
                        perfection::euler_form_check(&n)?,
                        perfection::touchard_form_check(&n),
                    ))
                } else {
                    None
                };
                if json {
                    println!("{}", serde_json::to_string_pretty(&serde_json::json!({
                        "n": n.to_string(),
                        "numerator": index.numer().to_string(),
                        "denominator": index.denom().to_string(),
                        "classification": class.to_string(),
                        "perfect": perfect,
                        "superperfect": superperfect,
                        "euler_form": odd_forms.map(|f| f.0),
                        "touchard_form": odd_forms.map(|f| f.1),
                    }))?);
                } else {
                    println!("I({n}) = {}/{} ({class})", index.numer(), index.denom());
                    println!("perfect: {perfect}, superperfect: {superperfect}");
                    if let Some((euler, touchard)) = odd_forms {
                        println!("euler form: {euler}, touchard form: {touchard}");
                    }
                }
                Ok(ExitCode::SUCCESS)
            }
            (None, Some(target)) => {
                let bound = bound.ok_or("--search requires --bound")?;
                let target = parse_ratio(&target)?;
                let hits = perfection::search_abundancy(&target, bound);
                // CSV: n, numerator, denominator, classification
                println!("n,numerator,denominator,classification");
                for n in &hits {
                    let index = perfection::abundancy_index(&Natural::from(*n))?;
                    println!(
                        "{n},{},{},{}",
                        index.numer(),
                        index.denom(),
                        perfection::classify(&index)
                    );
                }
                Ok(ExitCode::SUCCESS)
            }
            _ => Err("abundancy takes either a value or --search <r/s> --bound <B>".into()),
        },
        Command::VerifyProduct { primes } => {
            let parsed: Vec<Natural> = primes
                .split(',')
                .map(|s| parse_natural(s.trim()))
                .collect::<Result<_, _>>()?;
            let bound = parsed
                .iter()
                .map(|p| p.to_string().parse::<u64>().unwrap_or(u64::MAX))
                .max()
                .ok_or("empty prime list")?;
            if bound == u64::MAX {
                return Err("verify-product members must fit 64 bits".into());
            }
            let set = families::closure_extend(&GoodSet::from_chains(bound), bound);
            let budget = Budget::from_env();
            let outcome = families::verify_product(&parsed, &set, &budget)?;
            let n: Natural = parsed.iter().product();
            match outcome {
                Convergence::Converged { steps } => {
                    println!("{n} reaches 1 in {steps} steps");
                    Ok(ExitCode::SUCCESS)
                }
                Convergence::Undecided { reason } => {
                    println!("{n} undecided: {}", undecided_label(&reason));
                    Ok(ExitCode::from(2))
                }
            }
        }
    }
}

fn exit_for(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn parse_natural(s: &str) -> Result<Natural, String> {
    let n = Natural::from_str(s).map_err(|e| format!("invalid natural '{s}': {e}"))?;
    Ok(n)
}

fn parse_ratio(s: &str) -> Result<ExactRatio, String> {
    let (r, d) = s
        .split_once('/')
        .map(|(a, b)| (a.trim(), b.trim()))
        .unwrap_or((s.trim(), "1"));
    let numer = parse_natural(r)?;
    let denom = parse_natural(d)?;
    if denom == Natural::from(0u32) {
        return Err("ratio denominator must be nonzero".into());
    }
    Ok(Ratio::new(numer, denom))
}

fn undecided_label(reason: &UndecidedReason) -> String {
    match reason {
        UndecidedReason::Steps => "step budget exhausted".into(),
        UndecidedReason::Bits => "bit-length budget exhausted".into(),
        UndecidedReason::Factorization => "factorization budget exhausted".into(),
        UndecidedReason::Cycle { entry, period } => {
            format!("cycle of period {period} entered at {entry}")
        }
    }
}

fn trajectory_json(record: &sigma_halving::TrajectoryRecord) -> serde_json::Value {
    let steps = match &record.steps {
        Steps::Full(v) => serde_json::json!({
            "kind": "full",
            "values": v.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
        }),
        Steps::Elided { first, last, total } => serde_json::json!({
            "kind": "elided",
            "first": first.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "last": last.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
            "total": total,
        }),
    };
    let outcome = match &record.outcome {
        Outcome::ReachedOne { steps } => serde_json::json!({
            "kind": "reached_one", "steps": steps,
        }),
        Outcome::CycleDetected { entry, period } => serde_json::json!({
            "kind": "cycle", "entry": entry.to_string(), "period": period,
        }),
        Outcome::BudgetExceeded { reason } => serde_json::json!({
            "kind": "budget_exceeded", "reason": format!("{reason:?}"),
        }),
    };
    serde_json::json!({
        "start": record.start.to_string(),
        "steps": steps,
        "outcome": outcome,
        "peak_bits": record.peak_bits,
        "odd_steps": record.odd_steps,
        "even_steps": record.even_steps,
    })
}

fn print_trajectory(record: &sigma_halving::TrajectoryRecord) {
    match &record.steps {
        Steps::Full(v) => {
            let line: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            println!("{}", line.join(" -> "));
        }
        Steps::Elided { first, last, total } => {
            let head: Vec<String> = first.iter().map(|x| x.to_string()).collect();
            let tail: Vec<String> = last.iter().map(|x| x.to_string()).collect();
            println!("{} -> ... -> {} ({total} values)", head.join(" -> "), tail.join(" -> "));
        }
    }
    match &record.outcome {
        Outcome::ReachedOne { steps } => println!("reached 1 in {steps} steps"),
        Outcome::CycleDetected { entry, period } => {
            println!("cycle of period {period} entered at {entry}")
        }
        Outcome::BudgetExceeded { reason } => println!("undecided: {reason:?} budget exceeded"),
    }
    println!(
        "peak bits: {}, odd steps: {}, even steps: {}",
        record.peak_bits, record.odd_steps, record.even_steps
    );
}

fn print_sweep(report: &SweepReport, from: u64, to: u64) {
    println!("sweep [{from}, {to}]");
    println!("verified frontier: {}", report.verified_frontier);
    if let Some((n, k)) = report.max_steps_to_one {
        println!("max steps to one: {k} at n = {n}");
    }
    if let Some((n, k)) = report.max_descent_time {
        println!("max descent time: {k} at n = {n}");
    }
    if let Some((n, b)) = report.max_peak_bits {
        println!("max peak bits:    {b} at n = {n}");
    }
    println!("throughput: {:.0} values/s", report.throughput);
    if !report.undecided.is_empty() {
        println!("undecided ({}): {:?}", report.undecided.len(), report.undecided);
    }
}
