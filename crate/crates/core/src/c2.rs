//! Multi-layer C2 service model: sampling sets, per-point feasibility and
//! capacity, per-layer metrics and the three-channel grid demand map.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelParams, Position3D};
use crate::math;
use crate::scenario::{Scenario, Thresholds, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum C2Error {
    #[error("sample layer `{0}` is empty")]
    EmptyLayer(&'static str),
    #[error("grid resolution must be at least 2, got {0}")]
    InvalidResolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Terminal,
    Corridor,
    Vertical,
}

impl Layer {
    /// Grid channel order: terminal, corridor, vertical.
    pub const ALL: [Layer; 3] = [Layer::Terminal, Layer::Corridor, Layer::Vertical];

    pub fn channel(self) -> usize {
        match self {
            Layer::Terminal => 0,
            Layer::Corridor => 1,
            Layer::Vertical => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Terminal => "terminal",
            Layer::Corridor => "corridor",
            Layer::Vertical => "vertical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleLayers {
    pub terminal: Vec<Position3D>,
    pub vertical: Vec<Position3D>,
    pub corridor: Vec<Position3D>,
}

impl SampleLayers {
    pub fn layer(&self, layer: Layer) -> &[Position3D] {
        match layer {
            Layer::Terminal => &self.terminal,
            Layer::Corridor => &self.corridor,
            Layer::Vertical => &self.vertical,
        }
    }

    pub fn total(&self) -> usize {
        self.terminal.len() + self.vertical.len() + self.corridor.len()
    }
}

pub fn build_sample_layers(scenario: &Scenario) -> SampleLayers {
    let s = &scenario.sampling;
    let h_cruise = scenario.fleet.cruise_altitude;
    let depot = scenario.depot;
    let n = scenario.tasks.len();
    let mut layers = SampleLayers {
        terminal: Vec::with_capacity(n),
        vertical: Vec::with_capacity(n * (s.m_v + 1)),
        corridor: Vec::with_capacity(n * (s.i_t + 1)),
    };
    for task in &scenario.tasks {
        let loc = task.location;
        layers.terminal.push(loc.with_z(0.0));
        for m in 0..=s.m_v {
            layers.vertical.push(loc.with_z(m as f64 * s.delta_h_m));
        }
        for i in 0..=s.i_t {
            let f = if s.i_t == 0 { 0.0 } else { i as f64 / s.i_t as f64 };
            let p = if i == s.i_t {
                loc
            } else {
                Position3D::new(depot.x + f * (loc.x - depot.x), depot.y + f * (loc.y - depot.y), 0.0)
            };
            layers.corridor.push(p.with_z(h_cruise));
        }
    }
    layers
}

/// Best-server SINR, or 0 when nothing is deployed.
pub fn best_sinr_or_zero(point: &Position3D, deployment: &[Position3D], params: &ChannelParams) -> f64 {
    if deployment.is_empty() {
        0.0
    } else {
        channel::best_server_sinr_nonempty(point, deployment, params).0
    }
}

pub fn point_feasible(point: &Position3D, deployment: &[Position3D], params: &ChannelParams, gamma_ctrl_db: f64) -> bool {
    !deployment.is_empty() && best_sinr_or_zero(point, deployment, params) >= channel::db_to_linear(gamma_ctrl_db)
}

pub fn capacity_from_sinr(sinr: f64, c_max: f64) -> f64 {
    let c = math::log2(1.0 + sinr) / c_max;
    if c > 1.0 { 1.0 } else { c }
}

pub fn normalized_capacity(point: &Position3D, deployment: &[Position3D], params: &ChannelParams, c_max: f64) -> f64 {
    capacity_from_sinr(best_sinr_or_zero(point, deployment, params), c_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub c_term: f64,
    pub c_vert: f64,
    pub c_corr: f64,
    pub cbar_t: f64,
    pub cbar_v: f64,
    pub cbar_c: f64,
    pub cbar_syn: f64,
}

impl LayerMetrics {
    pub fn coverage(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Terminal => self.c_term,
            Layer::Corridor => self.c_corr,
            Layer::Vertical => self.c_vert,
        }
    }

    pub fn capacity(&self, layer: Layer) -> f64 {
        match layer {
            Layer::Terminal => self.cbar_t,
            Layer::Corridor => self.cbar_c,
            Layer::Vertical => self.cbar_v,
        }
    }
}

/// Best-server SINR of every sample against one deployment. Metrics and
/// the grid map are both derived from this single pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleEvaluation {
    pub terminal: Vec<f64>,
    pub vertical: Vec<f64>,
    pub corridor: Vec<f64>,
}

impl SampleEvaluation {
    pub fn evaluate(layers: &SampleLayers, deployment: &[Position3D], params: &ChannelParams) -> Self {
        let eval = |pts: &[Position3D]| -> Vec<f64> {
            pts.iter().map(|p| best_sinr_or_zero(p, deployment, params)).collect()
        };
        Self {
            terminal: eval(&layers.terminal),
            vertical: eval(&layers.vertical),
            corridor: eval(&layers.corridor),
        }
    }

    pub fn layer(&self, layer: Layer) -> &[f64] {
        match layer {
            Layer::Terminal => &self.terminal,
            Layer::Corridor => &self.corridor,
            Layer::Vertical => &self.vertical,
        }
    }

    pub fn metrics(&self, thresholds: &Thresholds, weights: &Weights) -> Result<LayerMetrics, C2Error> {
        let gamma = channel::db_to_linear(thresholds.gamma_ctrl_db);
        let c_max = thresholds.c_max_bps_per_hz;
        let avg = |layer: Layer| -> Result<(f64, f64), C2Error> {
            let v = self.layer(layer);
            if v.is_empty() {
                return Err(C2Error::EmptyLayer(layer.name()));
            }
            let n = v.len() as f64;
            let cov = v.iter().filter(|&&s| s >= gamma && s > 0.0).count() as f64 / n;
            let cap = v.iter().map(|&s| capacity_from_sinr(s, c_max)).sum::<f64>() / n;
            Ok((cov, cap))
        };
        let (c_term, cbar_t) = avg(Layer::Terminal)?;
        let (c_vert, cbar_v) = avg(Layer::Vertical)?;
        let (c_corr, cbar_c) = avg(Layer::Corridor)?;
        Ok(LayerMetrics {
            c_term,
            c_vert,
            c_corr,
            cbar_t,
            cbar_v,
            cbar_c,
            cbar_syn: weights.omega_t * cbar_t + weights.omega_v * cbar_v + weights.omega_c * cbar_c,
        })
    }

    pub fn grid_map(
        &self,
        layers: &SampleLayers,
        gamma_ctrl_db: f64,
        k: usize,
        area_side: f64,
    ) -> Result<GridMap, C2Error> {
        if k < 2 {
            return Err(C2Error::InvalidResolution(k));
        }
        let gamma = channel::db_to_linear(gamma_ctrl_db);
        let mut grid = GridMap::zeros(k, area_side);
        let mut total = alloc::vec![0u32; k * k];
        let mut feasible = alloc::vec![0u32; k * k];
        for layer in Layer::ALL {
            total.iter_mut().for_each(|v| *v = 0);
            feasible.iter_mut().for_each(|v| *v = 0);
            for (p, &s) in layers.layer(layer).iter().zip(self.layer(layer)) {
                let (r, c) = grid.cell_of(p);
                total[r * k + c] += 1;
                if s > 0.0 && s >= gamma {
                    feasible[r * k + c] += 1;
                }
            }
            let ch = layer.channel();
            for i in 0..k * k {
                if total[i] > 0 {
                    grid.data[ch * k * k + i] = 1.0 - feasible[i] as f64 / total[i] as f64;
                }
            }
        }
        Ok(grid)
    }
}

pub fn layer_metrics(
    layers: &SampleLayers,
    deployment: &[Position3D],
    params: &ChannelParams,
    thresholds: &Thresholds,
    weights: &Weights,
) -> Result<LayerMetrics, C2Error> {
    SampleEvaluation::evaluate(layers, deployment, params).metrics(thresholds, weights)
}

/// Per-layer outage density on a K x K grid, row-major `[channel][row][col]`
/// with rows along y and columns along x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    pub k: usize,
    pub area_side: f64,
    pub data: Vec<f64>,
}

impl GridMap {
    pub fn zeros(k: usize, area_side: f64) -> Self {
        Self {
            k,
            area_side,
            data: alloc::vec![0.0; 3 * k * k],
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.area_side / self.k as f64
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.k + row) * self.k + col]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.data[channel * kk..(channel + 1) * kk]
    }

    /// Half-open binning; the last row and column are closed and points
    /// outside the square clamp to the border cells.
    pub fn cell_of(&self, p: &Position3D) -> (usize, usize) {
        let idx = |v: f64| -> usize {
            let i = math::floor(v / self.cell_size());
            if i.is_nan() || i < 0.0 {
                0
            } else if i >= self.k as f64 {
                self.k - 1
            } else {
                i as usize
            }
        };
        (idx(p.y), idx(p.x))
    }

    pub fn cell_center(&self, row: usize, col: usize, z: f64) -> Position3D {
        let cs = self.cell_size();
        Position3D::new((col as f64 + 0.5) * cs, (row as f64 + 0.5) * cs, z)
    }

    /// Sum over channels of each cell.
    pub fn total_density(&self) -> Vec<f64> {
        let kk = self.k * self.k;
        (0..kk).map(|i| self.data[i] + self.data[kk + i] + self.data[2 * kk + i]).collect()
    }
}

pub fn build_grid_map(
    layers: &SampleLayers,
    deployment: &[Position3D],
    params: &ChannelParams,
    gamma_ctrl_db: f64,
    k: usize,
    area_side: f64,
) -> Result<GridMap, C2Error> {
    SampleEvaluation::evaluate(layers, deployment, params).grid_map(layers, gamma_ctrl_db, k, area_side)
}

/// Unit vector from the agent toward the outage-weighted centroid of the
/// grid (cells placed at `h_ref`). Zero when the map holds no outage.
pub fn guidance_vector(agent: &Position3D, grid: &GridMap, h_ref: f64) -> Position3D {
    let density = grid.total_density();
    let mut wsum = 0.0;
    let mut centroid = Position3D::new(0.0, 0.0, 0.0);
    for r in 0..grid.k {
        for c in 0..grid.k {
            let w = density[r * grid.k + c];
            if w > 0.0 {
                wsum += w;
                centroid = centroid + grid.cell_center(r, c, h_ref) * w;
            }
        }
    }
    if wsum <= 0.0 {
        return Position3D::new(0.0, 0.0, 0.0);
    }
    let dir = centroid * (1.0 / wsum) - *agent;
    let n = dir.norm();
    if n <= 0.0 {
        Position3D::new(0.0, 0.0, 0.0)
    } else {
        dir * (1.0 / n)
    }
}
