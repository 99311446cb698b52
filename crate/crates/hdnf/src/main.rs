use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdnf::checkpoint;
use hdnf::config::{RunConfig, load_scenario, scenario_to_json, write_json};
use hdnf::error::{Error, Result};
use hdnf::experiment::{MatrixResults, SchemeName, run_experiment_matrix};
use hdnf::export::{
    Manifest, TrainingLog, read_deployment, read_route_plan, read_training_log, sha256_hex, trajectory_summary,
    write_deployment, write_manifest, write_route_plan, write_trajectories,
};
use hdnf::plot::{PlotInputs, PlotKind, emit_plot_data};
use hdnf::table::Table;
use hdnf_core::deployment::{self, Deployment, PolicyBundle, extract_deployment, grid_baseline, prune_deployment};
use hdnf_core::pipeline::{DeploymentSource, PipelineOptions, PipelineOutcome, run_with_plan};
use hdnf_core::scenario::Scenario;
use hdnf_core::tasking::assign_tasks;

#[derive(Parser)]
#[command(name = "hdnf", version, about = "UAV delivery network planning and evaluation")]
struct Cli {
    /// Seed for scenario generation and training.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file of overrides on the default run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (bench defaults to the experiment's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArg {
    /// Scenario file; generated from the config and seed when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated scenario.
    Generate,
    /// Assign and sequence tasks (stage one).
    Assign(ScenarioArg),
    /// Train a placement policy.
    Train(ScenarioArg),
    /// Extract a deployment from a policy or lay out the grid baseline.
    Deploy {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
        policy: Option<PathBuf>,
        #[arg(long)]
        grid: bool,
    },
    /// Plan trajectories for a route plan over a fixed deployment.
    Plan {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        route_plan: PathBuf,
        #[arg(long)]
        deployment: PathBuf,
    },
    /// Full pipeline for one scheme.
    Run {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "hdnf", value_parser = parse_scheme)]
        scheme: SchemeName,
        /// Use this policy instead of training one.
        #[arg(long)]
        policy: Option<PathBuf>,
    },
    /// Run the configured experiment matrix.
    Bench,
    /// Emit plot tables from a previous run's outputs.
    PlotData {
        #[arg(value_parser = parse_kind)]
        kind: PlotKind,
        /// Directory holding the earlier outputs.
        #[arg(long)]
        from: PathBuf,
    },
}

fn parse_scheme(s: &str) -> std::result::Result<SchemeName, String> {
    SchemeName::parse(s).ok_or_else(|| {
        let names: Vec<_> = SchemeName::ALL.iter().map(|k| k.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_kind(s: &str) -> std::result::Result<PlotKind, String> {
    PlotKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = PlotKind::ALL.iter().map(|k| k.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Assign(_) => "assign",
            Command::Train(_) => "train",
            Command::Deploy { .. } => "deploy",
            Command::Plan { .. } => "plan",
            Command::Run { .. } => "run",
            Command::Bench => "bench",
            Command::PlotData { .. } => "plot-data",
        }
    }
}

struct Ctx {
    seed: u64,
    config_hash: String,
    cfg: RunConfig,
    out: PathBuf,
    outputs: Vec<PathBuf>,
    checkpoint_hash: Option<String>,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn wrote(&mut self, p: PathBuf) {
        self.outputs.push(p);
    }

    fn scenario(&mut self, arg: &ScenarioArg) -> Result<Scenario> {
        let s = match &arg.scenario {
            Some(p) => load_scenario(p)?,
            None => self.cfg.scenario(self.seed)?,
        };
        let p = self.path("scenario.json");
        fs::write(&p, scenario_to_json(&s)).map_err(|e| Error::io(&p, e))?;
        self.wrote(p);
        Ok(s)
    }

    fn load_policy(&mut self, path: &Path) -> Result<PolicyBundle> {
        let bytes = fs::read(path).map_err(|e| Error::input(path, e))?;
        self.checkpoint_hash = Some(sha256_hex(&bytes));
        checkpoint::decode(&bytes).map_err(|e| e.in_file(path))
    }

    fn train(&mut self, scenario: &Scenario, scheme: SchemeName) -> Result<PolicyBundle> {
        let mut tc = scheme
            .training(&self.cfg.training)
            .ok_or_else(|| Error::Config("the grid scheme has no policy".into()))?;
        tc.seed = self.seed;
        let log_path = self.path("training_log.csv");
        let mut log = TrainingLog::open(&log_path)?;
        let mut write_err = None;
        let trained = deployment::train_with(scenario, &tc, |row| {
            if write_err.is_none() {
                write_err = log.append(row).err();
            }
        })?;
        if let Some(e) = write_err {
            return Err(e);
        }
        self.wrote(log_path);
        let p = self.path("policy.ckpt");
        checkpoint::save(&p, &trained.bundle)?;
        self.wrote(p);
        Ok(trained.bundle)
    }

    fn write_outcome(&mut self, o: &PipelineOutcome) -> Result<()> {
        let p = self.path("route_plan.json");
        write_route_plan(&p, &o.plan)?;
        self.wrote(p);
        let p = self.path("deployment.json");
        write_deployment(&p, &o.deployment)?;
        self.wrote(p);
        for p in write_trajectories(&self.out, &o.trajectories)? {
            self.wrote(p);
        }
        let p = self.path("trajectory_summary.csv");
        trajectory_summary(&o.trajectories, &o.metrics.uavs).write(&p)?;
        self.wrote(p);
        let p = self.path("metrics.json");
        write_json(&p, &o.metrics)?;
        self.wrote(p);
        Ok(())
    }
}

fn execute(cmd: &Command, ctx: &mut Ctx) -> Result<()> {
    match cmd {
        Command::Generate => {
            ctx.scenario(&ScenarioArg { scenario: None })?;
        }
        Command::Assign(arg) => {
            let s = ctx.scenario(arg)?;
            let plan = assign_tasks(&s)?;
            let p = ctx.path("route_plan.json");
            write_route_plan(&p, &plan)?;
            ctx.wrote(p);
        }
        Command::Train(arg) => {
            let s = ctx.scenario(arg)?;
            ctx.train(&s, SchemeName::Hdnf)?;
        }
        Command::Deploy { scenario, policy, grid } => {
            let s = ctx.scenario(scenario)?;
            let raw = if *grid {
                grid_baseline(&s, s.max_bs, ctx.cfg.grid_altitude_m)
            } else {
                let path = policy.as_ref().expect("clap requires --policy without --grid");
                let bundle = ctx.load_policy(path)?;
                if bundle.config.env.num_agents > s.max_bs {
                    return Err(Error::Config(format!(
                        "policy has {} agents, scenario allows {} stations",
                        bundle.config.env.num_agents, s.max_bs
                    )));
                }
                match extract_deployment(&bundle, &s, ctx.cfg.gate_threshold) {
                    Err(deployment::DeploymentError::NoGatedAgents) => Deployment::default(),
                    r => r?,
                }
            };
            let p = ctx.path("deployment_unpruned.json");
            write_deployment(&p, &raw)?;
            ctx.wrote(p);
            let opts = ctx.cfg.pipeline;
            let d = if opts.prune { prune_deployment(&raw, &s, opts.prune_eps) } else { raw };
            let p = ctx.path("deployment.json");
            write_deployment(&p, &d)?;
            ctx.wrote(p);
        }
        Command::Plan {
            scenario,
            route_plan,
            deployment,
        } => {
            let s = ctx.scenario(scenario)?;
            let plan = read_route_plan(route_plan, &s)?;
            let d = read_deployment(deployment)?;
            if !d.is_valid_for(&s) {
                return Err(Error::Config("deployment lies outside the scenario's bounds".into()));
            }
            let opts = PipelineOptions {
                prune: false,
                ..ctx.cfg.pipeline
            };
            let o = run_with_plan(&s, plan, DeploymentSource::Fixed(d), &opts)?;
            ctx.write_outcome(&o)?;
        }
        Command::Run { scenario, scheme, policy } => {
            let s = ctx.scenario(scenario)?;
            let plan = assign_tasks(&s)?;
            let opts = ctx.cfg.pipeline;
            let o = if *scheme == SchemeName::Grid {
                let src = DeploymentSource::Grid {
                    n_bs: s.max_bs,
                    altitude: ctx.cfg.grid_altitude_m,
                };
                run_with_plan(&s, plan, src, &opts)?
            } else {
                let bundle = match policy {
                    Some(p) => ctx.load_policy(p)?,
                    None => ctx.train(&s, *scheme)?,
                };
                let src = DeploymentSource::Policy {
                    bundle: &bundle,
                    threshold: ctx.cfg.gate_threshold,
                };
                run_with_plan(&s, plan, src, &opts)?
            };
            ctx.write_outcome(&o)?;
        }
        Command::Bench => {
            let results = run_experiment_matrix(&ctx.cfg.experiment, &ctx.cfg)?;
            for p in results.write(&ctx.out)? {
                ctx.wrote(p);
            }
        }
        Command::PlotData { kind, from } => {
            let log = optional(from, "training_log.csv", read_training_log)?;
            let matrix = optional(from, "cells.csv", |p| MatrixResults::from_cells_table(&Table::read(p)?))?;
            let scenario = optional(from, "scenario.json", load_scenario)?;
            let dep = optional(from, "deployment.json", read_deployment)?;
            let trajectories = match (*kind, &scenario, &dep) {
                (PlotKind::Trajectories, Some(s), Some(d)) => {
                    let plan = read_route_plan(&from.join("route_plan.json"), s)?;
                    let opts = PipelineOptions {
                        prune: false,
                        ..ctx.cfg.pipeline
                    };
                    Some(run_with_plan(s, plan, DeploymentSource::Fixed(d.clone()), &opts)?.trajectories)
                }
                _ => None,
            };
            let inputs = PlotInputs {
                training_log: log.as_deref(),
                matrix: matrix.as_ref(),
                scenario: scenario.as_ref(),
                deployment: dep.as_ref(),
                trajectories: trajectories.as_deref(),
                heatmap_altitude_m: ctx.cfg.heatmap_altitude_m,
            };
            for p in emit_plot_data(&inputs, *kind, &ctx.out)? {
                ctx.wrote(p);
            }
        }
    }
    Ok(())
}

fn optional<T>(dir: &Path, name: &str, read: impl Fn(&Path) -> Result<T>) -> Result<Option<T>> {
    let p = dir.join(name);
    if p.exists() { read(&p).map(Some) } else { Ok(None) }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = match (&cli.out, &cli.command) {
        (Some(o), _) => o.clone(),
        (None, Command::Bench) => cfg.experiment.output_dir.clone(),
        (None, _) => PathBuf::from("out"),
    };
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("error: {}: {e}", out.display());
        return ExitCode::from(3);
    }
    let mut ctx = Ctx {
        seed: cli.seed,
        config_hash: cfg.hash(),
        cfg,
        out,
        outputs: Vec::new(),
        checkpoint_hash: None,
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| execute(&cli.command, &mut ctx)))
        .unwrap_or_else(|_| Err(Error::Runtime("internal panic".into())));
    let manifest = Manifest {
        command: cli.command.name().to_string(),
        status: result.as_ref().map_or_else(|e| e.status().to_string(), |_| "ok".to_string()),
        seed: ctx.seed,
        config_hash: ctx.config_hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        core_version: hdnf_core::VERSION.to_string(),
        checkpoint_hash: ctx.checkpoint_hash.clone(),
        outputs: ctx
            .outputs
            .iter()
            .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
            .collect(),
    };
    let written = write_manifest(&ctx.out, &manifest);
    match (result, written) {
        (Err(e), _) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        (Ok(()), Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        (Ok(()), Ok(_)) => ExitCode::SUCCESS,
    }
}
