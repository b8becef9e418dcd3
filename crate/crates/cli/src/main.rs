//! `collab-pac`: plan sample allocations, compute exact optima, inspect
//! equilibria and audit payment rules from the command line.
//!
//! Every command prints one JSON document, except `suite` (one line per
//! criterion) and `instance` (a bare instance file). Exit status is 0
//! on success, 1 for usage and validation errors and 2 when an exact
//! computation exceeds its size limit.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use collab_pac::exact::{self, exact_min_cost_with};
use collab_pac::game::{self, Game, DEFAULT_ENUM_CAP, DEFAULT_MAX_SWEEPS};
use collab_pac::instance::load_instance;
use collab_pac::mechanism::{self, PaymentRule, PaymentTable, WitnessConfig};
use collab_pac::oracle::{monte_carlo_pac_failure, McConfig, DEFAULT_EXACT_CAP};
use collab_pac::planner::{self, PipelineParams};
use collab_pac::reduction::{self, SetCoverInstance};
use collab_pac::{ContributionVector, Error, Exec, Instance, Objective, Oracle, OracleLimits};
use collab_pac_verify::criteria::{self, Settings};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "collab-pac", version, about = "Collaborative PAC sample allocation")]
struct Cli {
    /// Seed for every randomised computation.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Worker threads; 1 forces the sequential path.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LP-rounded allocation, optionally through the γ-cover pipeline.
    Plan(PlanArgs),
    /// Cheapest feasible contribution vector by exhaustive search.
    Exact(ExactArgs),
    /// Planner cost against the exact optimum.
    Ratio(ObjectiveArgs),
    /// Failure probability of a contribution vector.
    Oracle(OracleArgs),
    #[command(subcommand)]
    Game(GameCommand),
    #[command(subcommand)]
    Mech(MechCommand),
    /// Set Cover reduction and both optima.
    Reduce {
        #[arg(long)]
        setcover: PathBuf,
    },
    /// Print a named instance as JSON.
    Instance(NamedArgs),
    /// Run the acceptance criteria.
    Suite {
        #[arg(long)]
        quick: bool,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

#[derive(Args)]
struct ObjectiveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "pac")]
    objective: Objective,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    base: ObjectiveArgs,
    /// Cover the class first and scale the LP solution.
    #[arg(long)]
    pipeline: bool,
    #[arg(long, requires = "pipeline")]
    gamma: Option<f64>,
    #[arg(long, requires = "pipeline")]
    delta_prime: Option<f64>,
    #[arg(long, requires = "pipeline")]
    delta_double_prime: Option<f64>,
    #[arg(long, requires = "pipeline")]
    scale_d: Option<f64>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    base: ObjectiveArgs,
    /// Largest entry searched; defaults to the largest solo requirement.
    #[arg(long)]
    cap: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Contribution vector, e.g. `3,5`.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<u64>,
    /// Target hypothesis; all targets when omitted.
    #[arg(long)]
    target: Option<usize>,
    /// Evaluated agent; all agents when omitted.
    #[arg(long)]
    agent: Option<usize>,
    /// Monte Carlo trials for the worst pair; 0 skips simulation.
    #[arg(long, default_value_t = 0)]
    trials: usize,
}

#[derive(Subcommand)]
enum GameCommand {
    /// Pure equilibria of an instance.
    Ne {
        #[arg(long)]
        instance: PathBuf,
        /// Also compute the price of stability.
        #[arg(long)]
        pos: bool,
        /// Run best-response dynamics from the zero vector instead.
        #[arg(long)]
        dynamics: bool,
    },
    /// Price of stability on the two-agent lower-bound instance.
    Pos {
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Equilibria of the three-agent instance without one.
    Nonexistence,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleKind {
    Pwyc,
    Reimburse,
    Vcg,
    Table,
}

#[derive(Subcommand)]
enum MechCommand {
    /// Search a misreport grid for profitable deviations.
    Audit {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        agent: usize,
        /// Grid step for moved probability mass.
        #[arg(long, default_value_t = 0.05)]
        grid: f64,
        #[arg(long, value_enum, default_value = "pwyc")]
        rule: RuleKind,
        /// Cost multiplier for the reimbursement rule.
        #[arg(long, default_value_t = 1.5)]
        factor: f64,
        /// Payment table for `--rule table`.
        #[arg(long, required_if_eq("rule", "table"))]
        table: Option<PathBuf>,
    },
    /// Check a payment table for the pay-what-you-contribute form.
    Uniqueness {
        #[arg(long)]
        table: PathBuf,
    },
    /// Build and verify the two-profile obliviousness witness.
    Witness {
        #[arg(long = "hypotheses", short = 'H')]
        hypotheses: usize,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<u64>,
        #[arg(long = "mprime", value_delimiter = ',', required = true)]
        m_prime: Vec<u64>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
}

#[derive(Args)]
struct NamedArgs {
    #[arg(value_enum)]
    name: Named,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Defaults to 1-(1-2ε)^2 for alice-bob and 0.5 for pos.
    #[arg(long)]
    delta: Option<f64>,
    /// Uniform sampling cost for alice-bob.
    #[arg(long, default_value_t = 0.1)]
    cost: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Named {
    AliceBob,
    Nonexistence,
    Pos,
}

struct Ctx {
    seed: u64,
    exec: Exec,
    limits: OracleLimits,
    enum_cap: u64,
}

fn env_number<T: std::str::FromStr>(name: &str) -> Result<Option<T>> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::InvalidInput(format!("{name}={v} is not a valid number")).into()),
        Err(_) => Ok(None),
    }
}

fn context(cli: &Cli) -> Result<Ctx> {
    let exec = match cli.jobs {
        Some(0) => bail!(Error::InvalidInput("--jobs must be at least 1".into())),
        Some(1) => Exec::Sequential,
        Some(_n) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_n)
                .build_global()
                .context("configuring the thread pool")?;
            Exec::default()
        }
        None => Exec::default(),
    };
    Ok(Ctx {
        seed: cli.seed,
        exec,
        limits: OracleLimits {
            exact_cap: env_number("ORACLE_CAP")?.unwrap_or(DEFAULT_EXACT_CAP),
        },
        enum_cap: env_number("ENUM_CAP")?.unwrap_or(DEFAULT_ENUM_CAP),
    })
}

fn load(path: &Path) -> Result<Instance> {
    load_instance(path).with_context(|| format!("reading instance {}", path.display()))
}

fn vector(inst: &Instance, m: Vec<u64>) -> Result<ContributionVector> {
    let v = ContributionVector(m);
    inst.check_vector(&v)?;
    Ok(v)
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn run(cli: Cli) -> Result<Option<Value>> {
    let ctx = context(&cli)?;
    let out = match cli.command {
        Command::Plan(a) => {
            let inst = load(&a.base.instance)?;
            if a.pipeline {
                if a.base.objective != Objective::Pac {
                    bail!(Error::InvalidInput(
                        "the cover pipeline plans the PAC objective only".into()
                    ));
                }
                let params = PipelineParams {
                    gamma: a.gamma,
                    delta_prime: a.delta_prime,
                    delta_double_prime: a.delta_double_prime,
                    scale_d: a.scale_d,
                };
                let res = planner::infinite_class_pipeline(&inst, params)?;
                json!({ "objective": "pac", "pipeline": to_value(&res), "cost": res.m.cost(&inst.costs()) })
            } else {
                let alloc = match a.base.objective {
                    Objective::Pac => planner::plan_pac(&inst)?,
                    Objective::Expected => planner::plan_expected(&inst)?,
                };
                let feasible = Oracle::with_limits(&inst, ctx.limits).feasible(a.base.objective, &alloc.m)?;
                json!({
                    "objective": a.base.objective,
                    "allocation": to_value(&alloc),
                    "cost": alloc.m.cost(&inst.costs()),
                    "feasible": feasible,
                })
            }
        }
        Command::Exact(a) => {
            let inst = load(&a.base.instance)?;
            let oracle = Oracle::with_limits(&inst, ctx.limits);
            let sol = exact_min_cost_with(&oracle, a.base.objective, a.cap)?;
            json!({ "objective": a.base.objective, "solution": to_value(&sol) })
        }
        Command::Ratio(a) => {
            let inst = load(&a.instance)?;
            let report = exact::approximation_ratio(&inst, a.objective)?;
            let bound = planner::pac_ratio_bound(inst.num_hypotheses(), inst.delta());
            json!({ "report": to_value(&report), "pac_ratio_bound": bound })
        }
        Command::Oracle(a) => oracle_cmd(&ctx, a)?,
        Command::Game(g) => game_cmd(&ctx, g)?,
        Command::Mech(m) => mech_cmd(&ctx, m)?,
        Command::Reduce { setcover } => {
            let text = std::fs::read_to_string(&setcover)
                .with_context(|| format!("reading set cover {}", setcover.display()))?;
            let sc = SetCoverInstance::from_json_str(&text)?;
            let red = reduction::set_cover_to_pac(&sc)?;
            json!({
                "instance": red.instance.to_json(),
                "subset_points": red.subset_points,
                "target": red.target,
                "min_eliminating_samples": reduction::min_eliminating_sample_count(&red)?,
                "min_set_cover": reduction::brute_force_set_cover(&sc)?,
            })
        }
        Command::Instance(a) => {
            // bare instance document, loadable by --instance
            emit(&named(&a)?.to_json_string());
            return Ok(None);
        }
        Command::Suite { quick, only } => {
            let settings = Settings {
                seed: ctx.seed,
                quick,
                exec: ctx.exec,
            };
            let ids: Vec<u8> = if only.is_empty() {
                (1..=criteria::NAMES.len() as u8).collect()
            } else {
                only
            };
            let mut failed = 0;
            for id in ids {
                if !(1..=criteria::NAMES.len() as u8).contains(&id) {
                    bail!(Error::InvalidInput(format!("no criterion {id}")));
                }
                let o = criteria::run(id, settings);
                emit(&o.to_string());
                failed += usize::from(!o.passed);
            }
            if failed > 0 {
                bail!(Error::Validation(format!("{failed} criteria failed")));
            }
            return Ok(None);
        }
    };
    Ok(Some(out))
}

fn named(a: &NamedArgs) -> Result<Instance> {
    Ok(match a.name {
        Named::AliceBob => game::alice_bob_instance(
            a.epsilon,
            a.delta.unwrap_or_else(|| game::alice_bob_delta(a.epsilon)),
            a.cost,
        )?,
        Named::Nonexistence => game::nonexistence_instance(),
        Named::Pos => game::pos_instance(a.epsilon, a.delta.unwrap_or(0.5))?,
    })
}

fn oracle_cmd(ctx: &Ctx, a: OracleArgs) -> Result<Value> {
    let inst = load(&a.instance)?;
    let m = vector(&inst, a.m)?;
    let oracle = Oracle::with_limits(&inst, ctx.limits);
    let targets: Vec<usize> = a
        .target
        .map_or_else(|| (0..inst.num_hypotheses()).collect(), |t| vec![t]);
    let agents: Vec<usize> = a.agent.map_or_else(|| (0..inst.num_agents()).collect(), |i| vec![i]);
    let mut worst: Option<collab_pac::FailureProbability> = None;
    for &t in &targets {
        for &i in &agents {
            let f = oracle.pac_failure_probability(&m, t, i)?;
            if worst.is_none_or(|w| f.value > w.value) {
                worst = Some(f);
            }
        }
    }
    let worst = worst.expect("at least one target and agent");
    let mc = if a.trials > 0 {
        let cfg = McConfig::new(a.trials, ctx.seed).with_exec(ctx.exec);
        Some(monte_carlo_pac_failure(&inst, &m, worst.target, worst.agent, cfg)?)
    } else {
        None
    };
    Ok(json!({
        "m": m,
        "delta": inst.delta(),
        "worst": to_value(&worst),
        "within_delta": worst.value <= inst.delta(),
        "pac_feasible": oracle.pac_feasible(&m)?,
        "expected_error": oracle.expected_erm_error(&m, worst.target, worst.agent)?,
        "monte_carlo": mc,
    }))
}

fn game_cmd(ctx: &Ctx, g: GameCommand) -> Result<Value> {
    Ok(match g {
        GameCommand::Ne {
            instance,
            pos,
            dynamics,
        } => {
            let inst = load(&instance)?;
            let oracle = Oracle::with_limits(&inst, ctx.limits);
            if dynamics {
                let game = Game::with_oracle(oracle)?;
                let d = game.dynamics(&ContributionVector::zeros(inst.num_agents()), DEFAULT_MAX_SWEEPS)?;
                json!({ "individual": game.individual(), "dynamics": to_value(&d) })
            } else if pos {
                to_value(&game::price_of_stability_with(oracle, ctx.enum_cap, ctx.exec)?)
            } else {
                to_value(&game::enumerate_pure_ne_with(oracle, ctx.enum_cap, ctx.exec)?)
            }
        }
        GameCommand::Pos { epsilon, delta } => {
            let inst = game::pos_instance(epsilon, delta)?;
            let out = game::price_of_stability_with(Oracle::with_limits(&inst, ctx.limits), ctx.enum_cap, ctx.exec)?;
            json!({
                "epsilon": epsilon,
                "delta": delta,
                "points": game::pos_points(epsilon)?,
                "formula": game::pos_formula(epsilon, delta),
                "outcome": to_value(&out),
            })
        }
        GameCommand::Nonexistence => {
            let inst = game::nonexistence_instance();
            let out = game::enumerate_pure_ne_with(Oracle::with_limits(&inst, ctx.limits), ctx.enum_cap, ctx.exec)?;
            let d = Game::with_oracle(Oracle::with_limits(&inst, ctx.limits))?
                .dynamics(&ContributionVector::zeros(3), DEFAULT_MAX_SWEEPS)?;
            json!({ "outcome": to_value(&out), "dynamics": to_value(&d) })
        }
    })
}

fn mech_cmd(ctx: &Ctx, m: MechCommand) -> Result<Value> {
    Ok(match m {
        MechCommand::Audit {
            instance,
            agent,
            grid,
            rule,
            factor,
            table,
        } => {
            let inst = load(&instance)?;
            let k = inst.num_agents();
            let rule = match rule {
                RuleKind::Pwyc => PaymentRule::pwyc(k),
                RuleKind::Reimburse => PaymentRule::Reimburse {
                    factor,
                    constants: vec![0.0; k],
                },
                RuleKind::Vcg => PaymentRule::Vcg { pivots: vec![0.0; k] },
                RuleKind::Table => {
                    let path = table.expect("clap requires --table");
                    PaymentRule::Table(
                        PaymentTable::load(&path).with_context(|| format!("reading table {}", path.display()))?,
                    )
                }
            };
            to_value(&mechanism::strategyproofness_audit(
                &inst, grid, agent, &rule, ctx.exec,
            )?)
        }
        MechCommand::Uniqueness { table } => {
            let t = PaymentTable::load(&table).with_context(|| format!("reading table {}", table.display()))?;
            json!({
                "connected": mechanism::is_connected(&t),
                "report": to_value(&mechanism::check_pwyc_uniqueness(&t)?),
            })
        }
        MechCommand::Witness {
            hypotheses,
            delta,
            m,
            m_prime,
            trials,
        } => {
            let cfg = (trials > 0).then_some(WitnessConfig {
                trials,
                seed: ctx.seed,
                exec: ctx.exec,
            });
            let report = mechanism::obliviousness_witness(
                &ContributionVector(m),
                &ContributionVector(m_prime),
                hypotheses,
                delta,
                cfg,
            )?;
            to_value(&report)
        }
    })
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_capacity() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let seed = cli.seed;
    match run(cli) {
        Ok(Some(result)) => {
            let doc = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "seed": seed,
                "result": result,
            });
            emit(&serde_json::to_string_pretty(&doc).expect("output serializes"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
