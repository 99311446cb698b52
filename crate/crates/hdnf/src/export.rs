//! Documents and tables written by runs, and their readers.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use hdnf_core::c2::{GridMap, Layer};
use hdnf_core::channel::Position3D;
use hdnf_core::deployment::{Deployment, EpisodeLog};
use hdnf_core::pipeline::UavReport;
use hdnf_core::planner::Trajectory;
use hdnf_core::scenario::Scenario;
use hdnf_core::tasking::RoutePlan;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, write_json};
use crate::error::{Error, Result};
use crate::table::{Table, fmt_num};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavRoute {
    pub uav: usize,
    pub tasks: Vec<usize>,
    pub estimated_energy_j: f64,
    pub waits_s: Vec<f64>,
}

/// Route plan as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutePlanDoc {
    pub uavs: Vec<UavRoute>,
    pub total_estimated_energy_j: f64,
}

impl RoutePlanDoc {
    pub fn from_plan(plan: &RoutePlan) -> Self {
        Self {
            uavs: (0..plan.num_uavs())
                .map(|u| UavRoute {
                    uav: u,
                    tasks: plan.sequences[u].clone(),
                    estimated_energy_j: plan.estimated_energy[u],
                    waits_s: plan.waits[u].clone(),
                })
                .collect(),
            total_estimated_energy_j: plan.total_estimated_energy,
        }
    }

    /// Rebuilds the plan against its scenario. Task ids must cover the
    /// scenario exactly once and the UAV count must match the fleet.
    pub fn to_plan(&self, scenario: &Scenario) -> Result<RoutePlan> {
        if self.uavs.len() != scenario.fleet.num_delivery_uavs {
            return Err(Error::Config(format!(
                "route plan has {} UAVs, scenario has {}",
                self.uavs.len(),
                scenario.fleet.num_delivery_uavs
            )));
        }
        let mut seen = vec![false; scenario.tasks.len()];
        for r in &self.uavs {
            for &t in &r.tasks {
                if t >= seen.len() || seen[t] {
                    return Err(Error::Config(format!("route plan: task {t} unknown or repeated")));
                }
                seen[t] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("route plan does not cover every task".into()));
        }
        let mut uavs: Vec<&UavRoute> = self.uavs.iter().collect();
        uavs.sort_by_key(|r| r.uav);
        Ok(RoutePlan::from_sequences(scenario, uavs.iter().map(|r| r.tasks.clone()).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentDoc {
    pub stations_m: Vec<Position3D>,
    /// Empty for deployments that did not come from a policy.
    pub gate_scores: Vec<f64>,
}

impl DeploymentDoc {
    pub fn from_deployment(d: &Deployment) -> Self {
        Self {
            stations_m: d.positions.clone(),
            gate_scores: d.gate_scores.clone(),
        }
    }

    pub fn to_deployment(&self) -> Deployment {
        Deployment {
            positions: self.stations_m.clone(),
            gate_scores: self.gate_scores.clone(),
        }
    }
}

pub fn write_route_plan(path: &Path, plan: &RoutePlan) -> Result<()> {
    write_json(path, &RoutePlanDoc::from_plan(plan))
}

pub fn read_route_plan(path: &Path, scenario: &Scenario) -> Result<RoutePlan> {
    read_json::<RoutePlanDoc>(path)?.to_plan(scenario)
}

pub fn write_deployment(path: &Path, d: &Deployment) -> Result<()> {
    write_json(path, &DeploymentDoc::from_deployment(d))
}

pub fn read_deployment(path: &Path) -> Result<Deployment> {
    Ok(read_json::<DeploymentDoc>(path)?.to_deployment())
}

pub const TRAJECTORY_HEADER: [&str; 4] = ["x_m", "y_m", "z_m", "sinr_db"];

pub fn trajectory_table(t: &Trajectory) -> Table {
    let mut tab = Table::new(&TRAJECTORY_HEADER);
    for (p, s) in t.waypoints.iter().zip(&t.per_waypoint_sinr_db) {
        tab.push(vec![fmt_num(p.x), fmt_num(p.y), fmt_num(p.z), fmt_num(*s)]);
    }
    tab
}

/// `trajectory_uav{u}.csv` per UAV in `dir`; returns the paths.
pub fn write_trajectories(dir: &Path, trajectories: &[Trajectory]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (u, t) in trajectories.iter().enumerate() {
        let p = dir.join(format!("trajectory_uav{u}.csv"));
        trajectory_table(t).write(&p)?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<(Position3D, f64)>> {
    let t = Table::read(path)?;
    if t.header != TRAJECTORY_HEADER {
        return Err(Error::input(path, "not a trajectory table"));
    }
    t.rows
        .iter()
        .map(|r| {
            Ok((
                Position3D::new(t.get_f64(r, "x_m")?, t.get_f64(r, "y_m")?, t.get_f64(r, "z_m")?),
                t.get_f64(r, "sinr_db")?,
            ))
        })
        .collect()
}

/// Per-UAV length, energy, outage count and task outcome.
pub fn trajectory_summary(trajectories: &[Trajectory], reports: &[UavReport]) -> Table {
    let mut tab = Table::new(&[
        "uav",
        "waypoints",
        "length_m",
        "energy_j",
        "outage_slots",
        "tasks",
        "delivered",
        "failed_leg",
    ]);
    for (u, (t, r)) in trajectories.iter().zip(reports).enumerate() {
        tab.push(vec![
            u.to_string(),
            t.waypoints.len().to_string(),
            fmt_num(r.length_m),
            fmt_num(r.energy_j),
            r.outage_slots.to_string(),
            r.tasks.len().to_string(),
            r.delivered.to_string(),
            r.failed_leg.map(|l| l.to_string()).unwrap_or_default(),
        ]);
    }
    tab
}

/// Flat `(channel, row, col, value)` rows.
pub fn grid_table(g: &GridMap) -> Table {
    let mut tab = Table::new(&["channel", "layer", "row", "col", "value"]);
    let mut layers = Layer::ALL;
    layers.sort_by_key(|l| l.channel());
    for layer in layers {
        let ch = layer.channel();
        for r in 0..g.k {
            for c in 0..g.k {
                tab.push(vec![
                    ch.to_string(),
                    layer.name().to_string(),
                    r.to_string(),
                    c.to_string(),
                    fmt_num(g.get(ch, r, c)),
                ]);
            }
        }
    }
    tab
}

pub const LOG_HEADER: [&str; 9] = [
    "episode",
    "reward",
    "r_vol",
    "r_net",
    "r_topo",
    "final_c_conn",
    "final_cbar_syn",
    "final_active",
    "critic_loss",
];

fn log_row(l: &EpisodeLog) -> Vec<String> {
    vec![
        l.episode.to_string(),
        fmt_num(l.reward),
        fmt_num(l.r_vol),
        fmt_num(l.r_net),
        fmt_num(l.r_topo),
        fmt_num(l.final_c_conn),
        fmt_num(l.final_cbar_syn),
        l.final_active.to_string(),
        fmt_num(l.critic_loss),
    ]
}

/// Training log that only ever appends; the header is written when the
/// file is new or empty.
pub struct TrainingLog {
    path: PathBuf,
    file: fs::File,
}

impl TrainingLog {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut log = Self {
            path: path.to_path_buf(),
            file,
        };
        let empty = log.file.metadata().map_err(|e| Error::io(path, e))?.len() == 0;
        if empty {
            log.write_line(&LOG_HEADER.map(String::from))?;
        }
        Ok(log)
    }

    fn write_line(&mut self, fields: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(fields).expect("in-memory write");
        let bytes = w.into_inner().expect("flush");
        self.file.write_all(&bytes).map_err(|e| Error::io(&self.path, e))
    }

    pub fn append(&mut self, row: &EpisodeLog) -> Result<()> {
        self.write_line(&log_row(row))
    }
}

pub fn log_table(log: &[EpisodeLog]) -> Table {
    let mut tab = Table::new(&LOG_HEADER);
    for l in log {
        tab.push(log_row(l));
    }
    tab
}

pub fn read_training_log(path: &Path) -> Result<Vec<EpisodeLog>> {
    let t = Table::read(path)?;
    if t.header != LOG_HEADER {
        return Err(Error::input(path, "not a training log"));
    }
    t.rows
        .iter()
        .map(|r| {
            Ok(EpisodeLog {
                episode: t.get_usize(r, "episode")?,
                reward: t.get_f64(r, "reward")?,
                r_vol: t.get_f64(r, "r_vol")?,
                r_net: t.get_f64(r, "r_net")?,
                r_topo: t.get_f64(r, "r_topo")?,
                final_c_conn: t.get_f64(r, "final_c_conn")?,
                final_cbar_syn: t.get_f64(r, "final_cbar_syn")?,
                final_active: t.get_usize(r, "final_active")?,
                critic_loss: t.get_f64(r, "critic_loss")?,
            })
        })
        .collect()
}

/// Reproducibility record written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    /// `ok` or the failure class.
    pub status: String,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    pub core_version: String,
    /// Hash of the policy checkpoint the run read, if any.
    pub checkpoint_hash: Option<String>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<PathBuf> {
    let p = dir.join("manifest.json");
    write_json(&p, m)?;
    Ok(p)
}
