use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use interference_packing::bounds::{theorem1_report, BoundReport, Packing, ReportOptions};
use interference_packing::experiments::{
    emit_csv, emit_plotdata, run_sweep, DensityRule, EpsilonRule, SweepConfig, SweepKind, TrialsRule,
};
use interference_packing::network::{generate_uniform, node_count, read_instance, write_instance, InstanceFile};
use interference_packing::{lift, round, solve_exact, solve_sdr, Error, RoundingOptions, SolverConfig};

#[derive(Parser)]
#[command(name = "pack", version, about = "Transmitter packing under an interference budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over node count, budget or density; writes CSV.
    Sweep(SweepArgs),
    /// Solves one instance file and prints the relaxation, rounding and bound report.
    Solve(SolveArgs),
    /// Draws a uniform layout and writes it as an instance file.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Interior-point stopping tolerance.
    #[arg(long, default_value_t = SolverConfig::default().tol)]
    tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_kind)]
    kind: SweepKind,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    /// Budget rules, comma separated: numbers or N/2.
    #[arg(long, value_delimiter = ',', value_parser = parse_epsilon)]
    epsilon: Vec<EpsilonRule>,
    /// Density rules, comma separated: const:F or pow:P.
    #[arg(long, value_delimiter = ',', value_parser = parse_density, required = true)]
    density: Vec<DensityRule>,
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Budgets along the x axis of an epsilon sweep.
    #[arg(long, value_delimiter = ',', value_parser = parse_epsilon)]
    eps_list: Vec<EpsilonRule>,
    #[arg(long, default_value_t = 1000)]
    realizations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write gnuplot-style series for each curve.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    exact_limit: usize,
    /// Treat a rounded vector exactly on the budget boundary as infeasible.
    #[arg(long)]
    strict_rounding: bool,
    /// Rounding samples per realization; defaults to max(1000, 10N).
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 20)]
    exact_limit: usize,
    #[arg(long)]
    strict_rounding: bool,
    /// Samples for the violation-frequency estimate.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    density: f64,
    /// Node count; the region side becomes sqrt(N / density).
    #[arg(long, conflicts_with = "side", required_unless_present = "side")]
    n: Option<usize>,
    #[arg(long)]
    side: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> Result<SweepKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_epsilon(s: &str) -> Result<EpsilonRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_density(s: &str) -> Result<DensityRule, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let epsilons = match (args.epsilon.is_empty(), args.eps_list.is_empty()) {
        (false, true) => args.epsilon,
        (true, false) => args.eps_list,
        (true, true) => {
            return Err(Error::InvalidArgument(
                "one of --epsilon or --eps-list is required".into(),
            ))
        }
        (false, false) => return Err(Error::InvalidArgument("give --epsilon or --eps-list, not both".into())),
    };
    let mut cfg = SweepConfig::new(args.kind, args.n_list, epsilons, args.density);
    cfg.beta = args.beta;
    cfg.realizations = args.realizations;
    cfg.master_seed = args.seed;
    cfg.solver = args.solver.config();
    cfg.exact_limit = args.exact_limit;
    cfg.strict_rounding = args.strict_rounding;
    if let Some(k) = args.trials {
        cfg.trials = TrialsRule::Fixed(k);
    }
    let rows = run_sweep(&cfg)?;
    emit_csv(&rows, &args.out)?;
    if let Some(path) = &args.plot_data {
        emit_plotdata(&rows, cfg.kind, path)?;
    }
    log::info!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), Error> {
    let file = read_instance(&args.instance)?;
    let inst = file.instance()?;
    let n = inst.len();
    let sp = lift(&inst)?;
    let sol = solve_sdr(&sp, &args.solver.config())?;
    let opts = RoundingOptions {
        trials: args.trials.unwrap_or_else(|| RoundingOptions::default_trials(n)),
        seed: args.seed,
        strict: args.strict_rounding,
    };
    let rounded = round(&sp, &sol, &opts)?;
    println!("n {n}");
    println!("status {}", sol.status.as_str());
    println!("iterations {}", sol.iterations);
    println!("rho {}", sol.rho);
    println!("dual_bound {}", sol.dual_bound);
    println!("sigma_hat {}", rounded.sigma_hat);
    let packing = if n <= args.exact_limit {
        let sigma = solve_exact(&inst, args.exact_limit)?.sigma;
        println!("sigma {sigma}");
        Packing::Exact(sigma)
    } else {
        Packing::Rounded(rounded.sigma_hat)
    };
    let report = theorem1_report(
        &inst,
        &sol,
        packing,
        &ReportOptions {
            samples: args.samples,
            seed: args.seed,
        },
    )?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(BoundReport::CSV_HEADER)?;
    w.write_record(report.csv_record())?;
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<(), Error> {
    let side = match (args.n, args.side) {
        (Some(n), _) => (n as f64 / args.density).sqrt(),
        (None, Some(side)) => side,
        (None, None) => unreachable!("clap requires --n or --side"),
    };
    node_count(args.density, side)?;
    let net = generate_uniform(args.density, side, args.seed)?;
    let file = InstanceFile {
        positions: net.positions().to_vec(),
        beta: args.beta,
        epsilon: args.epsilon,
    };
    file.instance()?;
    write_instance(&file, &args.out)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors; 2 is reserved for the exclusion budget.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Solve(a) => solve(a),
        Command::Generate(a) => generate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::ExclusionBudget { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
