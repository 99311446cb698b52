//! Plain tables behind the figures: one file per kind, except
//! trajectories which get one file per UAV.

use std::path::{Path, PathBuf};

use hdnf_core::c2::{self, SampleEvaluation};
use hdnf_core::channel::{Position3D, linear_to_db};
use hdnf_core::deployment::{Deployment, EpisodeLog};
use hdnf_core::planner::Trajectory;
use hdnf_core::scenario::Scenario;

use crate::error::{Error, Result};
use crate::experiment::{METRICS, MatrixResults, summarize};
use crate::export::write_trajectories;
use crate::table::{Table, fmt_num, fmt_opt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Convergence,
    MetricsVsArea,
    Boxplot,
    WeightSweep,
    CoverageHeatmap,
    Trajectories,
}

impl PlotKind {
    pub const ALL: [PlotKind; 6] = [
        PlotKind::Convergence,
        PlotKind::MetricsVsArea,
        PlotKind::Boxplot,
        PlotKind::WeightSweep,
        PlotKind::CoverageHeatmap,
        PlotKind::Trajectories,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Convergence => "convergence",
            PlotKind::MetricsVsArea => "metrics_vs_area",
            PlotKind::Boxplot => "boxplot",
            PlotKind::WeightSweep => "weight_sweep",
            PlotKind::CoverageHeatmap => "coverage_heatmap",
            PlotKind::Trajectories => "trajectories",
        }
    }

    /// Accepts `-` in place of `_`.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.replace('-', "_");
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Whatever a kind may draw from; each kind names what it needs.
#[derive(Default)]
pub struct PlotInputs<'a> {
    pub training_log: Option<&'a [EpisodeLog]>,
    pub matrix: Option<&'a MatrixResults>,
    pub scenario: Option<&'a Scenario>,
    pub deployment: Option<&'a Deployment>,
    pub trajectories: Option<&'a [Trajectory]>,
    pub heatmap_altitude_m: f64,
}

fn need<T>(v: Option<T>, kind: PlotKind, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("plot kind `{}` needs {what}", kind.name())))
}

pub fn convergence_table(log: &[EpisodeLog]) -> Table {
    let mut t = Table::new(&["episode", "reward", "r_vol", "r_net", "r_topo"]);
    for l in log {
        t.push(vec![
            l.episode.to_string(),
            fmt_num(l.reward),
            fmt_num(l.r_vol),
            fmt_num(l.r_net),
            fmt_num(l.r_topo),
        ]);
    }
    t
}

pub fn metrics_vs_area_table(m: &MatrixResults) -> Table {
    let mut header: Vec<String> = ["scheme", "area_m", "bs_budget", "cells", "ok"].map(String::from).to_vec();
    header.extend(METRICS.iter().map(|(n, _)| format!("{n}_mean")));
    let mut t = Table::new(&header);
    for g in m.groups() {
        let mut row = vec![
            g.scheme.name().to_string(),
            fmt_num(g.area_m),
            g.bs_budget.to_string(),
            g.cells.len().to_string(),
            g.cells.iter().filter(|c| c.metrics.is_some()).count().to_string(),
        ];
        row.extend(METRICS.iter().map(|(_, get)| fmt_opt(summarize(&g.values(*get)).map(|s| s.mean))));
        t.push(row);
    }
    t
}

pub fn boxplot_table(m: &MatrixResults) -> Table {
    let mut t = Table::new(&[
        "scheme", "area_m", "bs_budget", "metric", "n", "min", "q1", "median", "q3", "max", "mean",
    ]);
    for g in m.groups() {
        for (name, get) in METRICS {
            if let Some(s) = summarize(&g.values(get)) {
                let mut row = vec![
                    g.scheme.name().to_string(),
                    fmt_num(g.area_m),
                    g.bs_budget.to_string(),
                    name.to_string(),
                    s.n.to_string(),
                ];
                row.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean].map(fmt_num));
                t.push(row);
            }
        }
    }
    t
}

/// Synchronized capacity of a fixed deployment over the layer-weight
/// simplex in steps of `1 / steps`.
pub fn weight_sweep_table(scenario: &Scenario, d: &Deployment, steps: usize) -> Result<Table> {
    let layers = c2::build_sample_layers(scenario);
    let eval = SampleEvaluation::evaluate(&layers, &d.positions, &scenario.channel);
    let mut t = Table::new(&["omega_t", "omega_v", "omega_c", "cbar_syn", "cbar_t", "cbar_v", "cbar_c"]);
    for i in 0..=steps {
        for j in 0..=steps - i {
            let mut w = scenario.weights.clone();
            w.omega_t = i as f64 / steps as f64;
            w.omega_v = j as f64 / steps as f64;
            w.omega_c = (steps - i - j) as f64 / steps as f64;
            let m = eval
                .metrics(&scenario.thresholds, &w)
                .map_err(|e| Error::Runtime(e.to_string()))?;
            t.push([w.omega_t, w.omega_v, w.omega_c, m.cbar_syn, m.cbar_t, m.cbar_v, m.cbar_c].map(fmt_num).to_vec());
        }
    }
    Ok(t)
}

/// Best-server SINR at every cell centre of the K x K grid at `altitude`.
pub fn heatmap_table(scenario: &Scenario, d: &Deployment, altitude: f64) -> Table {
    let k = scenario.sampling.k;
    let cell = scenario.area_side / k as f64;
    let gamma_db = scenario.thresholds.gamma_ctrl_db;
    let mut t = Table::new(&["row", "col", "x_m", "y_m", "z_m", "sinr_db", "covered"]);
    for r in 0..k {
        for c in 0..k {
            let p = Position3D::new((c as f64 + 0.5) * cell, (r as f64 + 0.5) * cell, altitude);
            let s = linear_to_db(c2::best_sinr_or_zero(&p, &d.positions, &scenario.channel));
            t.push(vec![
                r.to_string(),
                c.to_string(),
                fmt_num(p.x),
                fmt_num(p.y),
                fmt_num(p.z),
                fmt_num(s),
                u8::from(s >= gamma_db).to_string(),
            ]);
        }
    }
    t
}

pub fn emit_plot_data(inputs: &PlotInputs<'_>, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    let one = |t: Table| -> Result<Vec<PathBuf>> {
        let p = dir.join(format!("{}.csv", kind.name()));
        t.write(&p)?;
        Ok(vec![p])
    };
    match kind {
        PlotKind::Convergence => {
            let log = need(inputs.training_log, kind, "a training log")?;
            if log.is_empty() {
                return Err(Error::Config("training log is empty".into()));
            }
            one(convergence_table(log))
        }
        PlotKind::MetricsVsArea | PlotKind::Boxplot => {
            let m = need(inputs.matrix, kind, "experiment results")?;
            if m.cells.is_empty() {
                return Err(Error::Config("experiment results are empty".into()));
            }
            one(if kind == PlotKind::Boxplot {
                boxplot_table(m)
            } else {
                metrics_vs_area_table(m)
            })
        }
        PlotKind::WeightSweep => {
            let s = need(inputs.scenario, kind, "a scenario")?;
            let d = need(inputs.deployment, kind, "a deployment")?;
            one(weight_sweep_table(s, d, 10)?)
        }
        PlotKind::CoverageHeatmap => {
            let s = need(inputs.scenario, kind, "a scenario")?;
            let d = need(inputs.deployment, kind, "a deployment")?;
            one(heatmap_table(s, d, inputs.heatmap_altitude_m))
        }
        PlotKind::Trajectories => {
            let t = need(inputs.trajectories, kind, "trajectories")?;
            if t.is_empty() {
                return Err(Error::Config("no trajectories".into()));
            }
            write_trajectories(dir, t)
        }
    }
}
