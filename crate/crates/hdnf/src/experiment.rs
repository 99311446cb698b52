//! Scheme x area x budget x seed matrices with per-cell metrics and
//! per-group quartiles.

use std::path::{Path, PathBuf};

use hdnf_core::deployment::{self, EpisodeLog, Scheme, TrainConfig};
use hdnf_core::pipeline::{DeploymentSource, PipelineOutcome, run_with_plan};
use hdnf_core::tasking::assign_tasks;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::table::{Table, fmt_num, fmt_opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Hdnf,
    Grid,
    Flat2d,
    NoPer,
    NoShared,
}

impl SchemeName {
    pub const ALL: [SchemeName; 5] = [
        SchemeName::Hdnf,
        SchemeName::Grid,
        SchemeName::Flat2d,
        SchemeName::NoPer,
        SchemeName::NoShared,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemeName::Hdnf => "hdnf",
            SchemeName::Grid => "grid",
            SchemeName::Flat2d => "flat2d",
            SchemeName::NoPer => "no_per",
            SchemeName::NoShared => "no_shared",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Training configuration for learned schemes; `None` for the grid.
    pub fn training(self, base: &TrainConfig) -> Option<TrainConfig> {
        let mut t = base.clone();
        match self {
            SchemeName::Grid => return None,
            SchemeName::Hdnf => {}
            SchemeName::Flat2d => t.env.scheme = Scheme::Flat2d,
            SchemeName::NoPer => t.ablation.no_per = true,
            SchemeName::NoShared => t.ablation.no_shared_backbone = true,
        }
        Some(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub schemes: Vec<SchemeName>,
    pub areas_m: Vec<f64>,
    pub seeds: Vec<u64>,
    pub bs_budgets: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            schemes: vec![SchemeName::Hdnf, SchemeName::Grid],
            areas_m: vec![1000.0],
            seeds: vec![0, 1, 2],
            bs_budgets: vec![4],
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.schemes.is_empty() {
            bad.push("experiment.schemes is empty");
        }
        if self.areas_m.is_empty() {
            bad.push("experiment.areas_m is empty");
        }
        if self.seeds.is_empty() {
            bad.push("experiment.seeds is empty");
        }
        if self.bs_budgets.is_empty() {
            bad.push("experiment.bs_budgets is empty");
        }
        if self.areas_m.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            bad.push("experiment.areas_m must be positive");
        }
        if self.bs_budgets.contains(&0) {
            bad.push("experiment.bs_budgets must be positive");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad.join("; ")))
        }
    }

    pub fn cell_count(&self) -> usize {
        self.schemes.len() * self.areas_m.len() * self.bs_budgets.len() * self.seeds.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellMetrics {
    pub deployed_bs: usize,
    pub unpruned_bs: usize,
    pub tasks_total: usize,
    pub tasks_succeeded: usize,
    pub task_success_rate: f64,
    pub outage_slots: usize,
    pub mean_delivery_time_s: f64,
    pub total_energy_j: f64,
    pub c_conn: f64,
    pub c_term: f64,
    pub c_vert: f64,
    pub c_corr: f64,
    pub cbar_syn: f64,
    pub objective_value: f64,
    /// Mean reward over the last 20 training episodes.
    pub final_reward: Option<f64>,
}

type Getter = fn(&CellMetrics) -> Option<f64>;

/// Numeric columns in table order.
pub const METRICS: [(&str, Getter); 15] = [
    ("deployed_bs", |m| Some(m.deployed_bs as f64)),
    ("unpruned_bs", |m| Some(m.unpruned_bs as f64)),
    ("tasks_total", |m| Some(m.tasks_total as f64)),
    ("tasks_succeeded", |m| Some(m.tasks_succeeded as f64)),
    ("task_success_rate", |m| Some(m.task_success_rate)),
    ("outage_slots", |m| Some(m.outage_slots as f64)),
    ("mean_delivery_time_s", |m| Some(m.mean_delivery_time_s)),
    ("total_energy_j", |m| Some(m.total_energy_j)),
    ("c_conn", |m| Some(m.c_conn)),
    ("c_term", |m| Some(m.c_term)),
    ("c_vert", |m| Some(m.c_vert)),
    ("c_corr", |m| Some(m.c_corr)),
    ("cbar_syn", |m| Some(m.cbar_syn)),
    ("objective_value", |m| Some(m.objective_value)),
    ("final_reward", |m| m.final_reward),
];

impl CellMetrics {
    pub fn from_outcome(o: &PipelineOutcome, log: Option<&[EpisodeLog]>) -> Self {
        let m = &o.metrics;
        Self {
            deployed_bs: m.deployed_bs,
            unpruned_bs: o.unpruned_bs,
            tasks_total: m.tasks_total,
            tasks_succeeded: m.tasks_succeeded,
            task_success_rate: m.task_success_rate,
            outage_slots: m.outage_slots,
            mean_delivery_time_s: m.mean_delivery_time_s,
            total_energy_j: m.total_energy_j,
            c_conn: m.c_conn,
            c_term: m.coverage.c_term,
            c_vert: m.coverage.c_vert,
            c_corr: m.coverage.c_corr,
            cbar_syn: m.coverage.cbar_syn,
            objective_value: m.objective_value,
            final_reward: log.and_then(|l| final_mean_reward(l, 20)),
        }
    }
}

/// Mean episode reward over the last `n` entries.
pub fn final_mean_reward(log: &[EpisodeLog], n: usize) -> Option<f64> {
    let tail = &log[log.len().saturating_sub(n)..];
    if tail.is_empty() {
        None
    } else {
        Some(tail.iter().map(|l| l.reward).sum::<f64>() / tail.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub cell_id: usize,
    pub scheme: SchemeName,
    pub area_m: f64,
    pub bs_budget: usize,
    pub seed: u64,
    /// `ok` or the failure class.
    pub status: String,
    pub message: String,
    pub metrics: Option<CellMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixResults {
    pub cells: Vec<CellRow>,
}

/// Configuration of one cell: area, budget and seed applied to `base`.
pub fn cell_config(base: &RunConfig, area_m: f64, bs_budget: usize, seed: u64) -> RunConfig {
    let mut cfg = base.clone();
    cfg.area_side_m = area_m;
    cfg.scenario.max_bs = bs_budget;
    cfg.training.env.num_agents = bs_budget;
    cfg.training.seed = seed;
    cfg
}

/// Stage One, then training or the grid layout, then the rest of the
/// pipeline. Returns the outcome and the training log if one was run.
pub fn run_scheme(cfg: &RunConfig, scheme: SchemeName, seed: u64) -> Result<(PipelineOutcome, Option<Vec<EpisodeLog>>)> {
    let scenario = cfg.scenario(seed)?;
    let plan = assign_tasks(&scenario)?;
    match scheme.training(&cfg.training) {
        None => {
            let src = DeploymentSource::Grid {
                n_bs: cfg.scenario.max_bs,
                altitude: cfg.grid_altitude_m,
            };
            Ok((run_with_plan(&scenario, plan, src, &cfg.pipeline)?, None))
        }
        Some(tc) => {
            let trained = deployment::train(&scenario, &tc)?;
            let src = DeploymentSource::Policy {
                bundle: &trained.bundle,
                threshold: cfg.gate_threshold,
            };
            let out = run_with_plan(&scenario, plan, src, &cfg.pipeline)?;
            Ok((out, Some(trained.log)))
        }
    }
}

/// Runs every cell in order. A failing cell is recorded with its status
/// and message and the matrix continues.
pub fn run_experiment_matrix(spec: &ExperimentSpec, base: &RunConfig) -> Result<MatrixResults> {
    spec.validate()?;
    let mut cells = Vec::with_capacity(spec.cell_count());
    for &scheme in &spec.schemes {
        for &area_m in &spec.areas_m {
            for &bs_budget in &spec.bs_budgets {
                for &seed in &spec.seeds {
                    let cfg = cell_config(base, area_m, bs_budget, seed);
                    let result = run_scheme(&cfg, scheme, seed);
                    let (status, message, metrics) = match result {
                        Ok((o, log)) => ("ok".to_string(), String::new(), Some(CellMetrics::from_outcome(&o, log.as_deref()))),
                        Err(e) => (e.status().to_string(), e.to_string(), None),
                    };
                    cells.push(CellRow {
                        cell_id: cells.len(),
                        scheme,
                        area_m,
                        bs_budget,
                        seed,
                        status,
                        message,
                        metrics,
                    });
                }
            }
        }
    }
    Ok(MatrixResults { cells })
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Summary {
        n: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// One group per (scheme, area, budget) in first-seen order.
pub struct Group<'a> {
    pub scheme: SchemeName,
    pub area_m: f64,
    pub bs_budget: usize,
    pub cells: Vec<&'a CellRow>,
}

impl<'a> Group<'a> {
    pub fn values(&self, getter: Getter) -> Vec<f64> {
        self.cells.iter().filter_map(|c| c.metrics.as_ref().and_then(getter)).collect()
    }
}

impl MatrixResults {
    pub fn groups(&self) -> Vec<Group<'_>> {
        let mut out: Vec<Group<'_>> = Vec::new();
        for c in &self.cells {
            match out
                .iter_mut()
                .find(|g| g.scheme == c.scheme && g.area_m == c.area_m && g.bs_budget == c.bs_budget)
            {
                Some(g) => g.cells.push(c),
                None => out.push(Group {
                    scheme: c.scheme,
                    area_m: c.area_m,
                    bs_budget: c.bs_budget,
                    cells: vec![c],
                }),
            }
        }
        out
    }

    pub fn cells_table(&self) -> Table {
        let mut header: Vec<String> = ["cell_id", "scheme", "area_m", "bs_budget", "seed", "status"]
            .map(String::from)
            .to_vec();
        header.extend(METRICS.iter().map(|(n, _)| n.to_string()));
        header.push("message".into());
        let mut t = Table::new(&header);
        for c in &self.cells {
            let mut row = vec![
                c.cell_id.to_string(),
                c.scheme.name().to_string(),
                fmt_num(c.area_m),
                c.bs_budget.to_string(),
                c.seed.to_string(),
                c.status.clone(),
            ];
            row.extend(METRICS.iter().map(|(_, g)| fmt_opt(c.metrics.as_ref().and_then(g))));
            row.push(c.message.clone());
            t.push(row);
        }
        t
    }

    pub fn aggregates_table(&self) -> Table {
        let mut header: Vec<String> = ["scheme", "area_m", "bs_budget", "cells", "ok"].map(String::from).to_vec();
        for (n, _) in METRICS {
            for s in ["mean", "q1", "median", "q3"] {
                header.push(format!("{n}_{s}"));
            }
        }
        let mut t = Table::new(&header);
        for g in self.groups() {
            let ok = g.cells.iter().filter(|c| c.metrics.is_some()).count();
            let mut row = vec![
                g.scheme.name().to_string(),
                fmt_num(g.area_m),
                g.bs_budget.to_string(),
                g.cells.len().to_string(),
                ok.to_string(),
            ];
            for (_, getter) in METRICS {
                match summarize(&g.values(getter)) {
                    Some(s) => row.extend([s.mean, s.q1, s.median, s.q3].map(fmt_num)),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            t.push(row);
        }
        t
    }

    /// Inverse of [`MatrixResults::cells_table`].
    pub fn from_cells_table(t: &Table) -> Result<Self> {
        let cells = t
            .rows
            .iter()
            .map(|r| {
                let scheme_s = t.get(r, "scheme")?;
                let scheme = SchemeName::parse(scheme_s)
                    .ok_or_else(|| Error::Config(format!("unknown scheme `{scheme_s}`")))?;
                let status = t.get(r, "status")?.to_string();
                let metrics = if status == "ok" {
                    let f = |n: &str| t.get_f64(r, n);
                    let u = |n: &str| t.get_usize(r, n);
                    Some(CellMetrics {
                        deployed_bs: u("deployed_bs")?,
                        unpruned_bs: u("unpruned_bs")?,
                        tasks_total: u("tasks_total")?,
                        tasks_succeeded: u("tasks_succeeded")?,
                        task_success_rate: f("task_success_rate")?,
                        outage_slots: u("outage_slots")?,
                        mean_delivery_time_s: f("mean_delivery_time_s")?,
                        total_energy_j: f("total_energy_j")?,
                        c_conn: f("c_conn")?,
                        c_term: f("c_term")?,
                        c_vert: f("c_vert")?,
                        c_corr: f("c_corr")?,
                        cbar_syn: f("cbar_syn")?,
                        objective_value: f("objective_value")?,
                        final_reward: t.get_opt_f64(r, "final_reward")?,
                    })
                } else {
                    None
                };
                Ok(CellRow {
                    cell_id: t.get_usize(r, "cell_id")?,
                    scheme,
                    area_m: t.get_f64(r, "area_m")?,
                    bs_budget: t.get_usize(r, "bs_budget")?,
                    seed: t
                        .get(r, "seed")?
                        .parse()
                        .map_err(|_| Error::Config("seed column is not an integer".into()))?,
                    status,
                    message: t.get(r, "message")?.to_string(),
                    metrics,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { cells })
    }

    /// `cells.csv` and `aggregates.csv` in `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let cells = dir.join("cells.csv");
        let aggs = dir.join("aggregates.csv");
        self.cells_table().write(&cells)?;
        self.aggregates_table().write(&aggs)?;
        Ok(vec![cells, aggs])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let s = summarize(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.min, s.max), (1.0, 4.0));
        assert!((s.q1 - 1.75).abs() < 1e-12);
        assert!((s.median - 2.5).abs() < 1e-12);
        assert!((s.q3 - 3.25).abs() < 1e-12);
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in SchemeName::ALL {
            assert_eq!(SchemeName::parse(s.name()), Some(s));
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!(SchemeName::Grid.training(&TrainConfig::default()).is_none());
        assert!(SchemeName::NoPer.training(&TrainConfig::default()).unwrap().ablation.no_per);
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let spec = ExperimentSpec {
            seeds: vec![],
            ..ExperimentSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
