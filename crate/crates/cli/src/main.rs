use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use roenum::access::EpsilonMode;
use roenum::exact::raccess;
use roenum::harness::{run_session, Algorithm, RunConfig};
use roenum::model::{brute_force_solutions, SelfReducible};
use roenum::oracle::ExactCounter;
use roenum::parallel::sim::{run_virtual, EmissionTiming, HarnessConfig, Pacing};
use roenum::parallel::transport::{run_live, LiveConfig, TransportKind};
use roenum::problems::{
    generate_knapsack, AllBits, AllBitsCounter, AllBitsInstance, Knapsack, KnapsackCounter, KnapsackGenConfig,
    FailureMode, KnapsackInstance, LoadedInstance, NoiseMode, SimulatedOracle, SimulatedOracleConfig,
};
use roenum::record::EmissionRecord;
use roenum::report::{write_emissions, write_profile, write_trace, RunReport};
use roenum::stats::{first_emission_test, position_test, DEFAULT_SIGNIFICANCE};
use roenum::swor::pswor_virtual;
use roenum::{BitString, Error, ExactRational, Interval};

#[derive(Parser)]
#[command(name = "roenum", version, about = "Uniform random-order enumeration harness")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Print a generated instance file.
    Gen {
        #[arg(long, value_parser = ["knapsack", "allbits"])]
        problem: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 40)]
        max_size: u64,
    },
    /// Enumerate all solutions of an instance.
    Enumerate {
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Run the master/slave pipeline.
    Parallel(ParallelArgs),
    /// Chi-square uniformity test over repeated runs.
    Uniformity {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 5000)]
        runs: u64,
        #[arg(long, value_enum, default_value_t = UniformityTest::First)]
        test: UniformityTest,
        /// Use the parallel pipeline with this many slaves instead of `--algo`.
        #[arg(long)]
        slaves: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SIGNIFICANCE)]
        significance: f64,
    },
    /// Per-window mean attempts and ticks of one run.
    Profile {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value_t = 1000)]
        window: usize,
    },
    /// Check every enumerator against brute force.
    Verify {
        /// Instance to check; a built-in suite when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum UniformityTest {
    First,
    Position,
}

#[derive(Args, Clone)]
struct SessionArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "aia")]
    algo: Algorithm,
    #[arg(long, default_value = "1/10")]
    delta: ExactRational,
    #[arg(long, default_value = "proof")]
    epsilon_mode: EpsilonMode,
    #[arg(long, default_value = "hash")]
    noise: NoiseMode,
    /// Counter failures for axa: none, budget, or a fixed rate.
    #[arg(long, default_value = "none")]
    inject_failures: FailureMode,
    /// Virtual ticks per attempt.
    #[arg(long, default_value_t = 1)]
    attempt_cost: u64,
}

impl SessionArgs {
    fn config(&self, seed: u64) -> RunConfig {
        RunConfig {
            algorithm: self.algo,
            seed,
            epsilon_mode: self.epsilon_mode,
            delta: self.delta.clone(),
            noise: self.noise,
            failure: self.inject_failures.clone(),
            attempt_cost: self.attempt_cost,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ParallelAlgo {
    Ro,
    Pswor,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Virtual,
    Channels,
    Tcp,
}

#[derive(Clone, Copy, ValueEnum)]
enum PacingArg {
    Paced,
    Greedy,
}

#[derive(Args)]
struct ParallelArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = ParallelAlgo::Ro)]
    algo: ParallelAlgo,
    #[arg(long, default_value_t = 4)]
    slaves: usize,
    #[arg(long, default_value = "1/2")]
    alpha: ExactRational,
    #[arg(long, default_value = "1/10")]
    delta: ExactRational,
    #[arg(long, default_value = "1/10")]
    delta_star: ExactRational,
    #[arg(long, value_enum, default_value_t = TransportArg::Virtual)]
    transport: TransportArg,
    #[arg(long, default_value_t = 100)]
    s_ticks: u64,
    #[arg(long, default_value_t = 100)]
    t_ticks: u64,
    #[arg(long, value_enum, default_value_t = PacingArg::Paced)]
    pacing: PacingArg,
    /// Master ticks per output in greedy mode.
    #[arg(long, default_value_t = 1)]
    master_cost: u64,
    /// Override the computed prefill target.
    #[arg(long)]
    prefill: Option<u64>,
    #[arg(long, default_value = "proof")]
    epsilon_mode: EpsilonMode,
    #[arg(long, default_value = "hash")]
    noise: NoiseMode,
    /// Live transports: seconds the master waits on an empty queue.
    #[arg(long, default_value_t = 30)]
    watchdog: u64,
}

/// Failure of a check, as opposed to a usage or runtime error.
struct CheckFailed(String);

enum Failure {
    Check(CheckFailed),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Run(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Run(e.into())
    }
}

type CliResult = Result<(), Failure>;

/// Binds `$p`, `$c`, `$x` to the problem, exact counter and instance.
macro_rules! with_instance {
    ($inst:expr, |$p:ident, $c:ident, $x:ident| $body:expr) => {
        match $inst {
            LoadedInstance::AllBits(inst) => {
                let ($p, $c, $x) = (&AllBits, AllBitsCounter, &inst);
                $body
            }
            LoadedInstance::Knapsack(inst) => {
                let ($p, $c, $x) = (&Knapsack, KnapsackCounter::default(), &inst);
                $body
            }
        }
    };
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(CheckFailed(msg))) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Parse(_) | Error::Invalid(_) | Error::InsufficientRuns { .. } | Error::Io(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn output(cli: &Cli) -> io::Result<Box<dyn Write>> {
    Ok(match &cli.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(path: &PathBuf) -> Result<LoadedInstance, Error> {
    std::fs::read_to_string(path)?.parse()
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Gen { problem, n, max_size } => {
            let inst = match problem.as_str() {
                "allbits" => LoadedInstance::AllBits(AllBitsInstance::new(*n)),
                _ => LoadedInstance::Knapsack(generate_knapsack(
                    *n,
                    cli.seed,
                    &KnapsackGenConfig {
                        max_size: (*max_size).max(1),
                        ..KnapsackGenConfig::default()
                    },
                )),
            };
            let mut out = output(cli)?;
            write!(out, "{inst}")?;
            out.flush()?;
            Ok(())
        }
        Command::Enumerate { session } => {
            let inst = load(&session.instance)?;
            let cfg = session.config(cli.seed);
            let recs = with_instance!(&inst, |p, c, x| run_session(p, c, x, &cfg))?;
            let report = RunReport::new(cfg.algorithm.name(), instance_id(&inst), cli.seed, recs);
            emit_records(cli, &report)
        }
        Command::Profile { session, window } => {
            let inst = load(&session.instance)?;
            let cfg = session.config(cli.seed);
            let recs = with_instance!(&inst, |p, c, x| run_session(p, c, x, &cfg))?;
            let report = RunReport::new(cfg.algorithm.name(), instance_id(&inst), cli.seed, recs);
            let rows = report.delay_profile(*window);
            let mut out = output(cli)?;
            match cli.format {
                Format::Csv => write_profile(&rows, &mut out)?,
                Format::Json => {
                    let json: Vec<_> = rows
                        .iter()
                        .map(|r| {
                            serde_json::json!({
                                "window": r.window, "first": r.first, "last": r.last, "count": r.count,
                                "mean_attempts": r.mean_attempts, "mean_ticks": r.mean_ticks,
                            })
                        })
                        .collect();
                    serde_json::to_writer_pretty(&mut out, &json).map_err(|e| Error::Invalid(e.to_string()))?;
                    writeln!(out)?;
                }
            }
            out.flush()?;
            Ok(())
        }
        Command::Parallel(args) => parallel(cli, args),
        Command::Uniformity {
            session,
            runs,
            test,
            slaves,
            significance,
        } => {
            let inst = load(&session.instance)?;
            let (universe, sequences) = with_instance!(&inst, |p, c, x| {
                uniformity_runs(p, c, x, session, *runs, *slaves, cli.seed)
            })?;
            let seqs = sequences.iter().map(Vec::as_slice);
            let report = match test {
                UniformityTest::First => first_emission_test(seqs, &universe, *significance)?,
                UniformityTest::Position => position_test(seqs, &universe, *significance)?,
            };
            let mut out = output(cli)?;
            match cli.format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut out, &report).map_err(|e| Error::Invalid(e.to_string()))?;
                    writeln!(out)?;
                }
                Format::Csv => {
                    writeln!(out, "position,statistic,p_value,threshold,passed")?;
                    for p in &report.positions {
                        writeln!(
                            out,
                            "{},{},{},{},{}",
                            p.position,
                            p.statistic,
                            p.p_value,
                            report.threshold,
                            p.p_value >= report.threshold
                        )?;
                    }
                }
            }
            out.flush()?;
            eprintln!(
                "{} runs, M = {}, min p = {:.3e}: {}",
                report.runs,
                report.solutions,
                report.min_p_value(),
                if report.passed { "PASS" } else { "FAIL" }
            );
            if report.passed {
                Ok(())
            } else {
                Err(Failure::Check(CheckFailed("uniformity rejected".into())))
            }
        }
        Command::Verify { instance } => {
            let suite = match instance {
                Some(path) => vec![load(path)?],
                None => builtin_suite(),
            };
            let mut failures = 0;
            for inst in &suite {
                let id = instance_id(inst);
                for (name, outcome) in with_instance!(inst, |p, c, x| verify_instance(p, c, x, cli.seed)) {
                    match outcome {
                        Ok(()) => println!("PASS {id} {name}"),
                        Err(msg) => {
                            failures += 1;
                            println!("FAIL {id} {name}: {msg}");
                        }
                    }
                }
            }
            if failures == 0 {
                Ok(())
            } else {
                Err(Failure::Check(CheckFailed(format!("{failures} check(s) failed"))))
            }
        }
    }
}

fn instance_id(inst: &LoadedInstance) -> String {
    inst.to_string().trim_end().replace('\n', " / ")
}

fn emit_records(cli: &Cli, report: &RunReport) -> CliResult {
    let mut out = output(cli)?;
    match cli.format {
        Format::Csv => write_emissions(report, &mut out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &report.emissions).map_err(|e| Error::Invalid(e.to_string()))?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn parallel(cli: &Cli, args: &ParallelArgs) -> CliResult {
    let inst = load(&args.instance)?;
    let oracle_cfg = SimulatedOracleConfig::default().with_noise(args.noise).with_seed(cli.seed);
    match (args.algo, args.transport) {
        (ParallelAlgo::Pswor, TransportArg::Virtual) => {
            let run = with_instance!(&inst, |p, c, x| pswor_virtual(
                p,
                &c,
                x,
                args.slaves,
                args.s_ticks,
                args.t_ticks,
                cli.seed
            ))?;
            eprintln!("samplers = {}, draws = {}, makespan = {}", args.slaves, run.draws, run.makespan);
            let recs = run.outputs.into_iter().map(|(_, r)| r).collect();
            emit_records(cli, &RunReport::new("pswor", instance_id(&inst), cli.seed, recs))
        }
        (ParallelAlgo::Pswor, _) => Err(Error::Invalid("pswor runs on the virtual transport only".into()).into()),
        (ParallelAlgo::Ro, TransportArg::Virtual) => {
            let cfg = HarnessConfig {
                slaves: args.slaves,
                delta: args.delta.clone(),
                alpha: args.alpha.clone(),
                delta_star: args.delta_star.clone(),
                timing: EmissionTiming::Fixed { s: args.s_ticks },
                t: args.t_ticks,
                pacing: match args.pacing {
                    PacingArg::Paced => Pacing::Paced,
                    PacingArg::Greedy => Pacing::Greedy {
                        master_cost: args.master_cost,
                    },
                },
                prefill: args.prefill,
                seed: cli.seed,
                epsilon_mode: args.epsilon_mode,
            };
            let run = with_instance!(&inst, |p, c, x| run_virtual(
                p,
                x,
                |i| SimulatedOracle::with_nonce(c, oracle_cfg.clone(), i as u64),
                &cfg
            ))?;
            let t = &run.trace;
            eprintln!(
                "Q = {}, pace = {}, prefill done at {}, stalls = {}, max gap = {}, makespan = {}",
                t.prefill,
                t.pace,
                t.start,
                t.stalls,
                t.max_gap().map_or_else(|| "-".into(), ToString::to_string),
                t.makespan
            );
            let mut out = output(cli)?;
            match cli.format {
                Format::Csv => write_trace(t, &mut out)?,
                Format::Json => {
                    let recs: Vec<_> = t.outputs.iter().map(|o| &o.record).collect();
                    serde_json::to_writer_pretty(&mut out, &recs).map_err(|e| Error::Invalid(e.to_string()))?;
                    writeln!(out)?;
                }
            }
            out.flush()?;
            Ok(())
        }
        (ParallelAlgo::Ro, live) => {
            let cfg = LiveConfig {
                slaves: args.slaves,
                delta: args.delta.clone(),
                alpha: args.alpha.clone(),
                delta_star: args.delta_star.clone(),
                prefill: args.prefill,
                seed: cli.seed,
                epsilon_mode: args.epsilon_mode,
                transport: match live {
                    TransportArg::Tcp => TransportKind::Tcp,
                    _ => TransportKind::Channels,
                },
                watchdog: Duration::from_secs(args.watchdog),
            };
            let run = with_instance!(&inst, |p, c, x| run_live(
                p,
                x,
                |i| SimulatedOracle::with_nonce(c, oracle_cfg.clone(), i as u64),
                &cfg
            ))?;
            eprintln!("Q = {}, outputs = {}", run.prefill, run.outputs.len());
            let recs = run
                .outputs
                .into_iter()
                .enumerate()
                .map(|(k, (_, r))| EmissionRecord {
                    index: k as u64 + 1,
                    ..r
                })
                .collect();
            emit_records(cli, &RunReport::new("parallel", instance_id(&inst), cli.seed, recs))
        }
    }
}

fn uniformity_runs<P, C>(
    problem: &P,
    exact: C,
    x: &P::Instance,
    session: &SessionArgs,
    runs: u64,
    slaves: Option<usize>,
    seed: u64,
) -> Result<(Vec<BitString>, Vec<Vec<BitString>>), Error>
where
    P: SelfReducible,
    C: ExactCounter<P::Instance> + Copy,
{
    let universe: Vec<BitString> = brute_force_solutions(problem, x, 1 << 16)?.into_iter().collect();
    let mut sequences = Vec::with_capacity(runs as usize);
    for r in 0..runs {
        let run_seed = seed.wrapping_add(r);
        let seq = match slaves {
            Some(m) => {
                let cfg = HarnessConfig {
                    seed: run_seed,
                    delta: session.delta.clone(),
                    epsilon_mode: session.epsilon_mode,
                    ..HarnessConfig::new(m)
                };
                let oracle_cfg = SimulatedOracleConfig::default().with_noise(session.noise).with_seed(run_seed);
                let run = run_virtual(problem, x, |i| SimulatedOracle::with_nonce(exact, oracle_cfg.clone(), i as u64), &cfg)?;
                run.solutions().cloned().collect()
            }
            None => run_session(problem, exact, x, &session.config(run_seed))?
                .into_iter()
                .map(|r| r.solution)
                .collect(),
        };
        sequences.push(seq);
    }
    Ok((universe, sequences))
}

fn builtin_suite() -> Vec<LoadedInstance> {
    let mut suite: Vec<_> = (0..=8).map(|n| LoadedInstance::AllBits(AllBitsInstance::new(n))).collect();
    suite.push(LoadedInstance::Knapsack(KnapsackInstance::new(3, vec![1, 2, 3])));
    suite.push(LoadedInstance::Knapsack(KnapsackInstance::new(0, vec![1, 1])));
    suite.push(LoadedInstance::Knapsack(KnapsackInstance::new(6, vec![1, 2, 3])));
    for seed in 0..4 {
        suite.push(LoadedInstance::Knapsack(generate_knapsack(
            10,
            seed,
            &KnapsackGenConfig::default(),
        )));
    }
    suite
}

type Checks = Vec<(String, Result<(), String>)>;

fn verify_instance<P, C>(problem: &P, exact: C, x: &P::Instance, seed: u64) -> Checks
where
    P: SelfReducible,
    C: ExactCounter<P::Instance> + Copy,
{
    let mut checks = Checks::new();
    let truth = match brute_force_solutions(problem, x, 1 << 20) {
        Ok(t) => t,
        Err(e) => return vec![("brute-force".into(), Err(e.to_string()))],
    };
    let lex: Result<(), String> = (|| {
        let got: Vec<BitString> = (1..=truth.len() as u128)
            .map(|i| raccess(problem, &exact, x, i).map_err(|e| e.to_string())?.ok_or("missing index".to_string()))
            .collect::<Result<_, _>>()?;
        if got.iter().eq(truth.iter()) {
            Ok(())
        } else {
            Err("random access order differs from brute force".into())
        }
    })();
    checks.push(("raccess".into(), lex));
    for algo in Algorithm::ALL {
        let outcome = run_session(problem, exact, x, &RunConfig::new(algo, seed))
            .map_err(|e| e.to_string())
            .and_then(|recs| {
                check_complete(&truth, recs.iter().map(|r| &r.solution))?;
                if matches!(algo, Algorithm::Aia | Algorithm::Axa | Algorithm::Ara) {
                    check_tiling(recs.iter().map(|r| &r.interval))?;
                }
                Ok(())
            });
        checks.push((algo.to_string(), outcome));
    }
    for m in [2usize, 4] {
        let cfg = HarnessConfig {
            seed,
            ..HarnessConfig::new(m)
        };
        let outcome = match run_virtual(
            problem,
            x,
            |i| SimulatedOracle::with_nonce(exact, SimulatedOracleConfig::default().with_seed(seed), i as u64),
            &cfg,
        ) {
            Ok(run) => check_complete(&truth, run.solutions()),
            // fewer solutions than slaves can leave a range empty
            Err(Error::DegeneratePartition { .. }) if truth.len() < 2 * m => Ok(()),
            Err(e) => Err(e.to_string()),
        };
        checks.push((format!("parallel m={m}"), outcome));
    }
    checks
}

fn check_complete<'a>(truth: &BTreeSet<BitString>, got: impl Iterator<Item = &'a BitString>) -> Result<(), String> {
    let got: Vec<&BitString> = got.collect();
    let set: BTreeSet<&BitString> = got.iter().copied().collect();
    if set.len() != got.len() {
        return Err(format!("{} duplicate emission(s)", got.len() - set.len()));
    }
    if !set.iter().copied().eq(truth.iter()) {
        return Err(format!("emitted {} solutions, expected {}", set.len(), truth.len()));
    }
    Ok(())
}

fn check_tiling<'a>(intervals: impl Iterator<Item = &'a Interval>) -> Result<(), String> {
    let mut ivs: Vec<&Interval> = intervals.collect();
    if ivs.is_empty() {
        return Ok(());
    }
    ivs.sort_by(|a, b| a.lo.cmp(&b.lo));
    let total = ivs.iter().fold(ExactRational::zero(), |acc, i| &acc + &i.width());
    if total != ExactRational::one() {
        return Err(format!("widths sum to {total}"));
    }
    if ivs.windows(2).any(|w| w[0].hi != w[1].lo) {
        return Err("intervals overlap or leave gaps".into());
    }
    Ok(())
}
