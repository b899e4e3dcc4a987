//! Command-line surface over the bilevel solver library: generate seeded
//! instances, solve with a chosen cut strategy, verify result files, train
//! follower-policy rules, and run sensitivity benchmark grids.
//!
//! Exit codes: 0 success, 2 usage/validation, 3 verification failure,
//! 4 infeasible instance.

use anyhow::{bail, Context, Result};
use bilevel_core::driver::{
    brute_force_solve, solve_bilevel, verify_solution, BilevelSolution, CoeffMode, CutFamily,
    Extras, SolveConfig, SolveStatus, Strategy,
};
use bilevel_core::instances::{
    facility_budget, gen_facility, gen_general, FacilityGenConfig, GeneralGenConfig,
};
use bilevel_core::model::{instance_to_json, load_instance, BilevelInstance, PhiCache};
use bilevel_core::modularity::{check_modularity, ModKind, PhiOracle, VarphiOracle};
use bilevel_core::rules::{
    default_widths, load_rule, sample_training_data, save_rule, train_rule, TrainConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

#[derive(Parser)]
#[command(name = "bilevel", version, about = "Branch-and-cut solver for bilevel MILPs with binary tenders")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Generate a seeded random instance and write it as JSON
    Generate(GenerateArgs),
    /// Solve an instance with a chosen cut strategy
    Solve(SolveArgs),
    /// Replay a result file against its instance
    Verify(VerifyArgs),
    /// Sample lower-level solves and train a follower-policy rule
    Train(TrainArgs),
    /// Run a seeded sensitivity sweep and emit one CSV
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    General,
    Facility,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Tender dimension (general) or facility count (facility)
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    ny_ratio: f64,
    #[arg(long, default_value_t = 0.5)]
    bin_ratio: f64,
    #[arg(long, default_value_t = 0.0)]
    sparsity: f64,
    /// Facility only: drop the repair block, making the lower level an LP
    #[arg(long)]
    no_repair: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Penalty,
    Lagrangian,
    Augmented,
    Submodular,
    Supermodular,
    QuasiLagrangian,
    QuasiSubmodular,
    QuasiSupermodular,
    LearnedReplace,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoeffArg {
    Exact,
    Quick,
    ClosedSub,
    ClosedSuper,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    #[arg(long, value_enum, default_value = "quick")]
    coeff: CoeffArg,
    /// Comma-separated extras: ldr, learned
    #[arg(long, value_delimiter = ',')]
    extras: Vec<String>,
    /// Trained rule JSON (required by learned extras and learned-replace)
    #[arg(long)]
    rule: Option<PathBuf>,
    /// Wall-clock limit in seconds
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    /// Accept an asserted structure instead of checking it
    #[arg(long)]
    assert_structure: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append a row to this CSV (header written on creation)
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    result: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 0.001)]
    decay: f64,
    #[arg(long)]
    seed: u64,
    /// Hidden widths, comma separated; defaults to max(8, 2 n_x) twice
    #[arg(long, value_delimiter = ',')]
    widths: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    loss_csv: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    BinaryRatio,
    Scale,
    Sparsity,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    kind: Sweep,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Seeds per grid cell
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Commands::Generate(args) => cmd_generate(args),
        Commands::Solve(args) => cmd_solve(args),
        Commands::Verify(args) => cmd_verify(args),
        Commands::Train(args) => cmd_train(args),
        Commands::Bench(args) => cmd_bench(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn digest_of(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex_string(&Sha256::digest(&bytes)))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn usage(msg: &str) -> Result<ExitCode> {
    eprintln!("error: {msg}");
    Ok(ExitCode::from(2))
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    if !(0.0..=1.0).contains(&args.bin_ratio) || !(0.0..=1.0).contains(&args.sparsity) {
        return usage("--bin-ratio and --sparsity must lie in [0, 1]");
    }
    let inst = match args.kind {
        Kind::General => {
            if args.no_repair {
                return usage("--no-repair applies to facility instances only");
            }
            gen_general(&GeneralGenConfig {
                n_x: args.n,
                ny_ratio: args.ny_ratio,
                constraint_ratio: 0.4,
                bin_ratio: args.bin_ratio,
                sparsity: args.sparsity,
                seed: args.seed,
            })
        }
        Kind::Facility => {
            let cfg = FacilityGenConfig {
                n: args.n,
                seed: args.seed,
                repair: !args.no_repair,
            };
            let inst = gen_facility(&cfg)?;
            println!("budget B = {}", facility_budget(args.n));
            inst
        }
    };
    fs::write(&args.out, instance_to_json(&inst))
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} (n_x = {}, n_y = {}, sha256 = {})",
        args.out.display(),
        inst.n_x,
        inst.n_y(),
        digest_of(&args.out)?
    );
    Ok(ExitCode::SUCCESS)
}

/// Structure kind a strategy or coefficient mode relies on, if any.
fn required_structure(strategy: StrategyArg, coeff: CoeffArg) -> Option<(ModKind, bool)> {
    match strategy {
        StrategyArg::Submodular => Some((ModKind::Sub, false)),
        StrategyArg::Supermodular => Some((ModKind::Super, false)),
        StrategyArg::QuasiLagrangian | StrategyArg::QuasiSubmodular => Some((ModKind::Sub, true)),
        StrategyArg::QuasiSupermodular => Some((ModKind::Super, true)),
        StrategyArg::Penalty | StrategyArg::Lagrangian | StrategyArg::Augmented => match coeff {
            CoeffArg::ClosedSub => Some((ModKind::Sub, false)),
            CoeffArg::ClosedSuper => Some((ModKind::Super, false)),
            _ => None,
        },
        StrategyArg::LearnedReplace => None,
    }
}

fn structure_check(inst: &BilevelInstance, kind: ModKind, quasi: bool) -> Result<bool> {
    let mut cache = PhiCache::new();
    if quasi {
        let n_b = inst.binary_idx().len();
        if inst.n_x > 8 || n_b > 10 {
            bail!(
                "instance too large to check quasi-structure exhaustively; \
                 pass --assert-structure if the property is known"
            );
        }
        let samples: u64 = 1 << n_b.min(4);
        for y1m in 0..samples {
            let y1: Vec<u8> = (0..n_b).map(|i| ((y1m >> i) & 1) as u8).collect();
            let mut oracle = VarphiOracle {
                inst,
                cache: &mut cache,
                y1,
            };
            match check_modularity(&mut oracle) {
                Ok(v) if v.holds(kind) => {}
                Ok(_) => return Ok(false),
                Err(_) => return Ok(false),
            }
        }
        Ok(true)
    } else {
        if inst.n_x > 12 {
            bail!(
                "instance too large to check structure exhaustively; \
                 pass --assert-structure if the property is known"
            );
        }
        let mut oracle = PhiOracle {
            inst,
            cache: &mut cache,
        };
        Ok(check_modularity(&mut oracle)
            .map(|v| v.holds(kind))
            .unwrap_or(false))
    }
}

fn build_strategy(args: &SolveArgs) -> Result<Strategy> {
    let coeff = match args.coeff {
        CoeffArg::Exact => CoeffMode::Exact,
        CoeffArg::Quick => CoeffMode::Quick,
        CoeffArg::ClosedSub => CoeffMode::ClosedFormSub,
        CoeffArg::ClosedSuper => CoeffMode::ClosedFormSuper,
    };
    let mut extras = Extras::default();
    for extra in &args.extras {
        match extra.as_str() {
            "ldr" => extras.ldr = true,
            "learned" => extras.learned = true,
            other => bail!("unknown extra {other:?}; expected ldr or learned"),
        }
    }
    let family = match args.strategy {
        StrategyArg::Penalty => CutFamily::Penalty,
        StrategyArg::Lagrangian => CutFamily::Lagrangian,
        StrategyArg::Augmented => CutFamily::Augmented,
        StrategyArg::Submodular => CutFamily::Submodular,
        StrategyArg::Supermodular => CutFamily::Supermodular,
        StrategyArg::QuasiLagrangian => CutFamily::QuasiLagrangian,
        StrategyArg::QuasiSubmodular => CutFamily::QuasiSubmodular,
        StrategyArg::QuasiSupermodular => CutFamily::QuasiSupermodular,
        StrategyArg::LearnedReplace => return Ok(Strategy::LearnedReplace),
    };
    Ok(Strategy::BranchAndCut {
        family,
        coeff,
        extras,
    })
}

fn append_csv_row(path: &Path, schema: &str, header: &str, row: &str) -> Result<()> {
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "# schema: {schema}")?;
        writeln!(f, "{header}")?;
    }
    writeln!(f, "{row}")?;
    Ok(())
}

const SOLVE_CSV_HEADER: &str =
    "instance,strategy,objective,bound,gap,phi_solves,coeff_time_ms,solve_time_ms";

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let inst = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    let strategy = match build_strategy(&args) {
        Ok(s) => s,
        Err(e) => return usage(&e.to_string()),
    };

    if let Some((kind, quasi)) = required_structure(args.strategy, args.coeff) {
        if !args.assert_structure {
            match structure_check(&inst, kind, quasi) {
                Ok(true) => {}
                Ok(false) => {
                    return usage(&format!(
                        "the requested strategy needs a {}{} value function, but the check \
                         failed; pass --assert-structure to override",
                        if quasi { "quasi-" } else { "" },
                        match kind {
                            ModKind::Sub => "submodular",
                            ModKind::Super => "supermodular",
                        }
                    ))
                }
                Err(e) => return usage(&e.to_string()),
            }
        }
    }

    let needs_rule = matches!(args.strategy, StrategyArg::LearnedReplace)
        || args.extras.iter().any(|e| e == "learned");
    let rule = match (&args.rule, needs_rule) {
        (Some(path), _) => Some(load_rule(path).map_err(|e| anyhow::anyhow!("{e}"))?),
        (None, true) => return usage("this strategy needs --rule <trained-rule.json>"),
        (None, false) => None,
    };

    let config = SolveConfig {
        node_limit: args.node_limit,
        time_limit: args.time_limit.map(Duration::from_secs_f64),
        coeff_node_limit: Some(50_000),
        rule,
        m_pi: None,
        ldr_free_y1: false,
    };
    let sol = solve_bilevel(&inst, &strategy, &config)?;

    match sol.status {
        SolveStatus::Infeasible => {
            println!("instance is bilevel-infeasible");
            if let Some(out) = &args.out {
                fs::write(out, sol.to_json())?;
            }
            return Ok(ExitCode::from(4));
        }
        SolveStatus::Optimal => println!(
            "objective {:.6}  bound {:.6}  gap {:.2}%  cuts {}  phi-solves {}",
            sol.objective,
            sol.bound,
            100.0 * sol.gap,
            sol.cuts.len(),
            sol.phi_solves
        ),
        SolveStatus::LimitReached => println!(
            "limit reached: objective {:.6}  bound {:.6}  gap {:.2}%",
            sol.objective,
            sol.bound,
            100.0 * sol.gap
        ),
    }
    if let Some(lb) = sol.replace_lower_bound {
        println!(
            "replace-mode lower bound {lb:.6}, fixed-tender upper bound {:.6}",
            sol.objective
        );
    }

    if let Some(out) = &args.out {
        fs::write(out, sol.to_json()).with_context(|| format!("writing {}", out.display()))?;
        println!("result written to {}", out.display());
    }
    if let Some(csv) = &args.csv {
        let row = format!(
            "{},{},{},{},{},{},{},{}",
            args.instance.display(),
            strategy.name(),
            sol.objective,
            sol.bound,
            sol.gap,
            sol.phi_solves,
            sol.coeff_ms,
            sol.wall_ms
        );
        append_csv_row(csv, "solve/v1", SOLVE_CSV_HEADER, &row)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(args: VerifyArgs) -> Result<ExitCode> {
    let inst = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    let text = fs::read_to_string(&args.result)
        .with_context(|| format!("loading {}", args.result.display()))?;
    let sol: BilevelSolution = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.result.display()))?;
    let report = verify_solution(&inst, &sol)?;
    if report.passed {
        println!("verification passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("verification failed:");
        for failure in &report.failures {
            eprintln!("  - {failure}");
        }
        Ok(ExitCode::from(3))
    }
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let inst = load_instance(&args.instance)
        .with_context(|| format!("loading {}", args.instance.display()))?;
    let n_b = inst.binary_idx().len();
    if n_b == 0 {
        return usage("training needs a binary follower block; this instance has none");
    }
    let mut cache = PhiCache::new();
    let samples = sample_training_data(&inst, args.samples, args.seed, &mut cache)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let widths = if args.widths.is_empty() {
        default_widths(inst.n_x)
    } else {
        args.widths.clone()
    };
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        decay: args.decay,
        seed: args.seed,
    };
    let trained = train_rule(&samples, inst.n_x, &widths, n_b, &cfg)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    save_rule(&trained.rule, &args.out).map_err(|e| anyhow::anyhow!("{e}"))?;
    println!(
        "trained on {} samples, widths {:?}, final loss {:.6}; rule written to {}",
        samples.len(),
        widths,
        trained.final_loss,
        args.out.display()
    );
    if let Some(path) = &args.loss_csv {
        let mut f = fs::File::create(path)?;
        writeln!(f, "# schema: loss/v1")?;
        writeln!(f, "epoch,loss")?;
        for (epoch, loss) in trained.loss_curve.iter().enumerate() {
            writeln!(f, "{epoch},{loss}")?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

const BENCH_CSV_HEADER: &str =
    "sweep,param,seed,n_x,objective,bound,gap,phi_solves,solve_time_ms,oracle_objective,matched";

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    let (name, grid): (&str, Vec<f64>) = match args.kind {
        Sweep::BinaryRatio => (
            "binary-ratio",
            vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        ),
        Sweep::Scale => ("scale", vec![0.5, 0.75, 1.0, 1.25, 1.5]),
        Sweep::Sparsity => ("sparsity", vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]),
    };
    if args.out.exists() {
        fs::remove_file(&args.out)?;
    }
    let strategy = Strategy::branch_and_cut(CutFamily::Penalty, CoeffMode::Quick);
    for (cell, &param) in grid.iter().enumerate() {
        for rep in 0..args.seeds {
            let seed = args.seed + (cell * args.seeds + rep) as u64;
            let mut cfg = GeneralGenConfig::new(args.n, seed);
            match args.kind {
                Sweep::BinaryRatio => cfg.bin_ratio = param,
                Sweep::Scale => cfg.ny_ratio = param,
                Sweep::Sparsity => cfg.sparsity = param,
            }
            let inst = gen_general(&cfg);
            let sol = solve_bilevel(&inst, &strategy, &SolveConfig::default())?;
            let (oracle_obj, matched) = if inst.n_x <= 12 {
                let oracle = brute_force_solve(&inst)?;
                match (sol.status, oracle.status) {
                    (SolveStatus::Infeasible, SolveStatus::Infeasible) => {
                        ("infeasible".to_string(), "yes".to_string())
                    }
                    (_, SolveStatus::Optimal) => (
                        format!("{}", oracle.objective),
                        if (sol.objective - oracle.objective).abs() < 1e-6 {
                            "yes".to_string()
                        } else {
                            "no".to_string()
                        },
                    ),
                    _ => ("unknown".to_string(), "no".to_string()),
                }
            } else {
                ("skipped".to_string(), "n/a".to_string())
            };
            let row = format!(
                "{name},{param},{seed},{},{},{},{},{},{},{oracle_obj},{matched}",
                inst.n_x, sol.objective, sol.bound, sol.gap, sol.phi_solves, sol.wall_ms
            );
            append_csv_row(&args.out, "bench/v1", BENCH_CSV_HEADER, &row)?;
        }
    }
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}
