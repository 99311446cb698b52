//! Acceptance checks, one PASS/FAIL line per criterion. Exits nonzero if
//! any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hdnf::experiment::final_mean_reward;
use hdnf_core::c2;
use hdnf_core::channel::{ChannelParams, Position3D, fspl_db, los_probability};
use hdnf_core::deployment::{
    Deployment, EpisodeLog, TrainConfig, connectivity, prune_deployment, random_baseline, synchronized_capacity, train,
};
use hdnf_core::pipeline::{DeploymentSource, PipelineOptions, run_pipeline};
use hdnf_core::planner::{CommField, CostWeights, SearchLattice, find_path, path_cost};
use hdnf_core::scenario::{Scenario, ScenarioConfig, generate_scenario};
use hdnf_core::tasking::assign_tasks;
use hdnf_core::topology::{BackhaulGraph, algebraic_connectivity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok { Ok(()) } else { Err(msg()) }
}

fn channel_math() -> Result<String, String> {
    let p = ChannelParams::default();
    let fspl = fspl_db(1000.0, &p).map_err(|e| e.to_string())?;
    // 20 log10(4 pi d f / c) evaluated directly
    let oracle = 20.0 * (4.0 * std::f64::consts::PI * 1000.0 * 2.4e9 / 3e8).log10();
    ensure((fspl - 100.05).abs() <= 0.01, || format!("fspl {fspl}"))?;
    ensure((fspl - oracle).abs() <= 1e-9, || format!("fspl {fspl} vs {oracle}"))?;
    let los = los_probability(p.alpha, &p);
    ensure((los - 1.0 / (1.0 + 9.61)).abs() <= 1e-9, || format!("los {los}"))?;
    Ok(format!("fspl(1 km) = {fspl:.4} dB, P_los(alpha) = {los:.9}"))
}

fn spectral() -> Result<String, String> {
    let split = BackhaulGraph::from_edges(4, &[(0, 1), (2, 3)]);
    ensure(algebraic_connectivity(&split) == 0.0, || "disconnected graph has lambda2 > 0".into())?;
    let path = algebraic_connectivity(&BackhaulGraph::from_edges(3, &[(0, 1), (1, 2)]));
    ensure((path - 1.0).abs() <= 1e-6, || format!("P3 lambda2 {path}"))?;
    for n in 2..=6 {
        let edges: Vec<_> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        let l = algebraic_connectivity(&BackhaulGraph::from_edges(n, &edges));
        ensure((l - n as f64).abs() <= 1e-6, || format!("K{n} lambda2 {l}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..200 {
        let n = rng.random_range(2..=12);
        let p = rng.random_range(0.1..0.6);
        let edges = common::random_edges(&mut rng, n, p);
        let mut g = BackhaulGraph::from_edges(n, &edges);
        let before = algebraic_connectivity(&g);
        let oracle = common::lambda2_oracle(n, &edges);
        ensure((before - oracle).abs() <= 1e-6, || format!("graph {i}: {before} vs reference {oracle}"))?;
        let (a, b) = loop {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if a != b {
                break (a, b);
            }
        };
        g.add_edge(a, b);
        let after = algebraic_connectivity(&g);
        ensure(after >= before - 1e-9, || format!("graph {i}: {before} -> {after} after adding ({a},{b})"))?;
    }
    Ok("reference graphs exact, 200 random graphs monotone".into())
}

fn assignment() -> Result<String, String> {
    let (mut feasible, mut checked, mut gave_up) = (0, 0, 0);
    for seed in 0..100 {
        let s = common::instance(seed);
        let opt = common::brute_force(&s);
        let plan = assign_tasks(&s);
        if opt.is_some() {
            feasible += 1;
        }
        match (opt, plan) {
            (Some(opt), Ok(plan)) => {
                let v = common::plan_oracle(&s, &plan.sequences)
                    .ok_or_else(|| format!("seed {seed}: heuristic plan breaks a constraint"))?;
                ensure(plan.is_feasible(&s), || format!("seed {seed}: plan reported infeasible"))?;
                ensure(v >= opt - 1e-6 * opt.abs().max(1.0), || format!("seed {seed}: {v} < optimum {opt}"))?;
                checked += 1;
            }
            (Some(_), Err(_)) => gave_up += 1,
            (None, Ok(_)) => return Err(format!("seed {seed}: plan returned for an infeasible instance")),
            (None, Err(_)) => {}
        }
    }
    Ok(format!(
        "{checked} plans checked; heuristic infeasible on {gave_up}/{feasible} oracle-feasible instances ({:.1}%)",
        100.0 * gave_up as f64 / feasible.max(1) as f64
    ))
}

fn planner_optimality() -> Result<String, String> {
    let l = SearchLattice::new(20, 1000.0, 10.0, 40.0);
    let w = CostWeights {
        omega_e: 1.0,
        lambda_out: 1000.0,
    };
    let (mut solved, mut waypoints) = (0, 0);
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let f = common::random_field(&l, &mut rng, 0.25);
        for _ in 0..3 {
            let (s, g) = (common::random_node(&l, &mut rng), common::random_node(&l, &mut rng));
            match (common::dijkstra(&l, &f, &w, s, g), find_path(&l, &f, s, g, &w)) {
                (Some(c), Ok(p)) => {
                    ensure((c - p.cost).abs() <= 1e-9, || format!("lattice {seed}: {} vs {c}", p.cost))?;
                    let below = p.nodes.iter().filter(|&&n| f.sinr[n] < f.gamma_ctrl).count();
                    ensure(below == 0, || format!("lattice {seed}: {below} waypoints below threshold"))?;
                    waypoints += p.nodes.len();
                    solved += 1;
                }
                (None, Err(_)) => {}
                (o, r) => return Err(format!("lattice {seed}: reference {o:?}, search ok = {}", r.is_ok())),
            }
        }
    }
    ensure(solved >= 20, || format!("only {solved} solvable pairs"))?;
    Ok(format!("{solved} pairs equal to reference, {waypoints} waypoints all at or above threshold"))
}

fn penalty_routing() -> Result<String, String> {
    let l = SearchLattice::new(12, 1200.0, 10.0, 0.0);
    let gamma = common::GAMMA;
    let mut vals = vec![gamma * 1.05; l.node_count()];
    for c in 0..12 {
        for r in 0..4 {
            vals[l.node_id(r, c, 0)] = 1000.0;
        }
    }
    let f = CommField::from_values(vals, gamma);
    let w = CostWeights {
        omega_e: 1.0,
        lambda_out: 1000.0,
    };
    let straight: Vec<usize> = (0..12).map(|c| l.node_id(4, c, 0)).collect();
    let weak = path_cost(&l, &f, &straight, &w).ok_or("straight path infeasible")?;
    let p = find_path(&l, &f, straight[0], straight[11], &w).map_err(|e| e.to_string())?;
    ensure(p.cost < weak, || format!("planned {} not below straight {weak}", p.cost))?;
    Ok(format!("planned {:.3} < straight {weak:.3}", p.cost))
}

fn toy_scenario(seed: u64) -> Scenario {
    let mut cfg = ScenarioConfig::default();
    cfg.max_bs = 4;
    generate_scenario(seed, 1000.0, 5, &cfg).expect("toy scenario")
}

fn toy_training(seed: u64) -> TrainConfig {
    let mut t = TrainConfig::default();
    t.env.num_agents = 4;
    t.env.t_step = 10;
    t.episodes = 200;
    t.seed = seed;
    t
}

fn auc(log: &[EpisodeLog]) -> f64 {
    log.iter().map(|l| l.reward).sum()
}

fn training_sanity() -> Result<String, String> {
    let seeds = 0..5u64;
    let (mut full_final, mut rand_final, mut full_auc, mut no_per_auc) = (0.0, 0.0, 0.0, 0.0);
    for seed in seeds.clone() {
        let s = toy_scenario(seed);
        let cfg = toy_training(seed);
        let full = train(&s, &cfg).map_err(|e| e.to_string())?;
        let mut ablated = cfg.clone();
        ablated.ablation.no_per = true;
        let no_per = train(&s, &ablated).map_err(|e| e.to_string())?;
        let random = random_baseline(&s, &cfg, seed).map_err(|e| e.to_string())?;
        full_final += final_mean_reward(&full.log, 20).unwrap();
        rand_final += final_mean_reward(&random, 20).unwrap();
        full_auc += auc(&full.log);
        no_per_auc += auc(&no_per.log);
    }
    let n = seeds.count() as f64;
    let (full_final, rand_final, full_auc, no_per_auc) = (full_final / n, rand_final / n, full_auc / n, no_per_auc / n);
    let detail = format!(
        "final-20 reward full {full_final:.2} vs random {rand_final:.2}; AUC full {full_auc:.1} vs no_per {no_per_auc:.1}"
    );
    ensure(full_final > rand_final, || format!("{detail}: full does not beat random"))?;
    ensure(no_per_auc <= full_auc + 0.05 * full_auc.abs(), || format!("{detail}: no_per AUC exceeds full by more than 5%"))?;
    Ok(detail)
}

fn pruning() -> Result<String, String> {
    let eps = 0.01;
    let mut tested = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..30u64 {
        let mut s = generate_scenario(seed, 1200.0, 3, &ScenarioConfig::default()).map_err(|e| e.to_string())?;
        s.depot = Position3D::new(600.0, 600.0, 0.0);
        let n = rng.random_range(1..6);
        let d = Deployment::new(
            (0..n)
                .map(|_| Position3D::new(rng.random_range(300.0..900.0), rng.random_range(300.0..900.0), rng.random_range(30.0..200.0)))
                .collect(),
        );
        if connectivity(&d.positions, &s) < 1.0 {
            continue;
        }
        let layers = c2::build_sample_layers(&s);
        let p = prune_deployment(&d, &s, eps);
        let (before, after) = (synchronized_capacity(&d.positions, &s, &layers), synchronized_capacity(&p.positions, &s, &layers));
        ensure(connectivity(&p.positions, &s) >= 1.0, || format!("toy {seed}: pruning broke connectivity"))?;
        ensure(after >= before - eps, || format!("toy {seed}: capacity {before} -> {after}"))?;
        ensure(p.len() <= d.len(), || format!("toy {seed}: pruning added stations"))?;
        tested += 1;
    }
    let mut s = generate_scenario(5, 3000.0, 4, &ScenarioConfig::default()).map_err(|e| e.to_string())?;
    s.depot = Position3D::new(500.0, 500.0, 0.0);
    let d = Deployment::new(vec![
        Position3D::new(500.0, 500.0, 100.0),
        Position3D::new(900.0, 500.0, 100.0),
        Position3D::new(1300.0, 500.0, 100.0),
        Position3D::new(500.0, 505.0, 100.0),
    ]);
    ensure(connectivity(&d.positions, &s) >= 1.0, || "redundant fixture is not connected".into())?;
    let p = prune_deployment(&d, &s, eps);
    ensure(p.len() < d.len(), || "redundant deployment kept every station".into())?;
    ensure(connectivity(&p.positions, &s) >= 1.0, || "redundant fixture lost connectivity".into())?;
    Ok(format!("{tested} connected toy deployments preserved; redundant set {} -> {}", d.len(), p.len()))
}

fn end_to_end() -> Result<String, String> {
    let s = common::two_task_toy();
    let opts = PipelineOptions::default();
    let run = |p: Vec<Position3D>| run_pipeline(&s, DeploymentSource::Fixed(Deployment::new(p)), &opts);
    let full = run(common::full_cover()).map_err(|e| e.to_string())?;
    let m = &full.metrics;
    ensure(m.task_success_rate == 1.0 && m.outage_slots == 0, || {
        format!("full cover: success {} outage {}", m.task_success_rate, m.outage_slots)
    })?;
    let near = run(common::near_cover()).map_err(|e| e.to_string())?;
    let u = &near.metrics.uavs[0];
    ensure(u.failed_leg == Some(1), || format!("failed leg {:?}", u.failed_leg))?;
    ensure(u.delivery_times_s.iter().all(Option::is_none), || "a task after the uncovered one succeeded".into())?;
    ensure(near.metrics.tasks_succeeded == 0, || "uncovered run delivered".into())?;
    Ok(format!(
        "full cover: success 1, outage 0; uncovered first task: {}/{} delivered, {} outage slots",
        near.metrics.tasks_succeeded, near.metrics.tasks_total, near.metrics.outage_slots
    ))
}

fn determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("bench.json");
    fs::write(
        &cfg,
        r#"{
            "area_side_m": 800, "num_tasks": 3,
            "scenario": {"max_bs": 3},
            "training": {"episodes": 5, "batch_size": 8, "env": {"t_step": 5, "num_agents": 3}},
            "experiment": {"schemes": ["hdnf", "grid", "no_per"], "areas_m": [600, 800], "seeds": [0, 1], "bs_budgets": [3]}
        }"#,
    )
    .map_err(|e| e.to_string())?;
    let bench = |out: &str| -> Result<(), String> {
        let st = Command::new(env!("CARGO_BIN_EXE_hdnf"))
            .args(["bench", "--seed", "3", "--out", out, "--config"])
            .arg(&cfg)
            .current_dir(dir.path())
            .status()
            .map_err(|e| e.to_string())?;
        ensure(st.success(), || format!("bench exited with {st}"))
    };
    bench("a")?;
    bench("b")?;
    let mut bytes = 0;
    for f in ["cells.csv", "aggregates.csv", "manifest.json"] {
        let a = fs::read(dir.path().join("a").join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(dir.path().join("b").join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{f} differs"))?;
        bytes += a.len();
    }
    Ok(format!("12-cell matrix, {bytes} bytes identical"))
}

fn main() -> ExitCode {
    let checks: [(u32, &str, Duration, Check); 9] = [
        (1, "channel math", Duration::from_secs(1), channel_math),
        (2, "spectral oracle", Duration::from_secs(10), spectral),
        (3, "assignment oracle", Duration::from_secs(60), assignment),
        (4, "planner optimality", Duration::from_secs(60), planner_optimality),
        (5, "penalty routing", Duration::from_secs(5), penalty_routing),
        (6, "training sanity", Duration::from_secs(30 * 60), training_sanity),
        (7, "pruning guarantee", Duration::from_secs(60), pruning),
        (8, "end to end", Duration::from_secs(30), end_to_end),
        (9, "determinism", Duration::from_secs(120), determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, budget, check) in checks {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let dt = t0.elapsed();
        let result = result.and_then(|d| {
            if dt <= budget {
                Ok(d)
            } else {
                Err(format!("{d}; took {dt:.1?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(d) => println!("criterion {id} ({name}): PASS in {:.2}s: {d}", dt.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL in {:.2}s: {e}", dt.as_secs_f64());
            }
        }
    }
    if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
