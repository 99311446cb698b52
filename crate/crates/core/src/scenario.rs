//! World model: area, depot, tasks, fleet limits, radio constants and all
//! objective/reward weights, plus seeded scenario generation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, Position3D};
use crate::math;

/// Invalid configuration; lists every offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub problems: Vec<(String, String)>,
}

impl ConfigError {
    pub fn single(field: &str, message: &str) -> Self {
        Self {
            problems: alloc::vec![(String::from(field), String::from(message))],
        }
    }

    pub fn fields(&self) -> Vec<&str> {
        self.problems.iter().map(|(f, _)| f.as_str()).collect()
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for (field, msg) in &self.problems {
            write!(f, " [{field}: {msg}]")?;
        }
        Ok(())
    }
}

impl core::error::Error for ConfigError {}

#[derive(Default)]
struct Problems(Vec<(String, String)>);

impl Problems {
    fn check(&mut self, ok: bool, field: &str, msg: &str) {
        if !ok {
            self.0.push((String::from(field), String::from(msg)));
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { problems: self.0 })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: usize,
    #[serde(rename = "location_m")]
    pub location: Position3D,
    #[serde(rename = "payload_kg")]
    pub payload: f64,
    #[serde(rename = "window_open_s")]
    pub window_open: f64,
    #[serde(rename = "window_close_s")]
    pub window_close: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetParams {
    pub num_delivery_uavs: usize,
    #[serde(rename = "max_speed_m_per_s")]
    pub max_speed: f64,
    #[serde(rename = "cruise_altitude_m")]
    pub cruise_altitude: f64,
    #[serde(rename = "max_payload_kg")]
    pub max_payload: f64,
    #[serde(rename = "battery_j")]
    pub battery: f64,
    #[serde(rename = "energy_coeff_j_per_m_kg")]
    pub energy_coeff: f64,
}

impl Default for FleetParams {
    fn default() -> Self {
        Self {
            num_delivery_uavs: 7,
            max_speed: 20.0,
            cruise_altitude: 100.0,
            max_payload: 15.0,
            battery: 10_000e3,
            energy_coeff: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub gamma_ctrl_db: f64,
    pub gamma_bh_db: f64,
    pub lambda_req: f64,
    pub c_max_bps_per_hz: f64,
    /// Required synchronized-capacity baseline subtracted in the reward.
    pub cbar_req: f64,
    /// Connectivity floor of the joint objective's constraint.
    pub conn_constraint: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            gamma_ctrl_db: 14.0,
            gamma_bh_db: 12.0,
            lambda_req: 0.5,
            c_max_bps_per_hz: 8.0,
            cbar_req: 0.0,
            conn_constraint: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub omega_d: f64,
    pub omega_e: f64,
    pub omega_wait: f64,
    pub omega_t: f64,
    pub omega_v: f64,
    pub omega_c: f64,
    pub gamma_t: f64,
    pub gamma_v: f64,
    pub gamma_c: f64,
    pub lambda_conn: f64,
    pub lambda_cap: f64,
    pub w_h: f64,
    pub eta_coll: f64,
    pub delta_safe_m: f64,
    pub lambda_out: f64,
    pub m_inf: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            omega_d: 0.5,
            omega_e: 1.0,
            omega_wait: 0.5,
            omega_t: 0.3,
            omega_v: 0.3,
            omega_c: 0.4,
            gamma_t: 2.0,
            gamma_v: 2.0,
            gamma_c: 4.0,
            lambda_conn: 5.0,
            lambda_cap: 1.0,
            w_h: 0.5,
            eta_coll: 50.0,
            delta_safe_m: 250.0,
            lambda_out: 1000.0,
            m_inf: 1e10,
        }
    }
}

impl Weights {
    pub fn coverage_weight_sum(&self) -> f64 {
        self.gamma_t + self.gamma_v + self.gamma_c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub delta_h_m: f64,
    /// Vertical sampling intervals per task (M_v + 1 samples).
    pub m_v: usize,
    /// Corridor sampling density (I_t + 1 samples per task).
    pub i_t: usize,
    /// Horizontal grid resolution K (K x K cells).
    pub k: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            delta_h_m: 10.0,
            m_v: 15,
            i_t: 20,
            k: 100,
        }
    }
}

/// Everything except the area, the tasks and the seed. Generation draws the
/// tasks from `payload_range_kg` and `window_horizon_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "depot_m")]
    pub depot: Position3D,
    pub fleet: FleetParams,
    pub channel: ChannelParams,
    #[serde(rename = "bs_altitude_range_m")]
    pub bs_altitude_range: [f64; 2],
    pub max_bs: usize,
    pub thresholds: Thresholds,
    pub weights: Weights,
    pub sampling: Sampling,
    pub payload_range_kg: [f64; 2],
    pub window_horizon_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            depot: Position3D::new(200.0, 100.0, 0.0),
            fleet: FleetParams::default(),
            channel: ChannelParams::default(),
            bs_altitude_range: [30.0, 200.0],
            max_bs: 15,
            thresholds: Thresholds::default(),
            weights: Weights::default(),
            sampling: Sampling::default(),
            payload_range_kg: [0.5, 1.5],
            window_horizon_s: 3600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "area_side_m")]
    pub area_side: f64,
    #[serde(rename = "depot_m")]
    pub depot: Position3D,
    pub tasks: Vec<Task>,
    pub fleet: FleetParams,
    pub channel: ChannelParams,
    #[serde(rename = "bs_altitude_range_m")]
    pub bs_altitude_range: [f64; 2],
    pub max_bs: usize,
    pub thresholds: Thresholds,
    pub weights: Weights,
    pub sampling: Sampling,
    pub rng_seed: u64,
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig, area_side: f64, tasks: Vec<Task>, rng_seed: u64) -> Self {
        Self {
            area_side,
            depot: config.depot,
            tasks,
            fleet: config.fleet.clone(),
            channel: config.channel.clone(),
            bs_altitude_range: config.bs_altitude_range,
            max_bs: config.max_bs,
            thresholds: config.thresholds.clone(),
            weights: config.weights.clone(),
            sampling: config.sampling.clone(),
            rng_seed,
        }
    }

    pub fn h_min(&self) -> f64 {
        self.bs_altitude_range[0]
    }

    pub fn h_max(&self) -> f64 {
        self.bs_altitude_range[1]
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn gamma_ctrl_linear(&self) -> f64 {
        crate::channel::db_to_linear(self.thresholds.gamma_ctrl_db)
    }

    pub fn task_locations(&self, sequence: &[usize]) -> Vec<Position3D> {
        sequence.iter().map(|&t| self.tasks[t].location).collect()
    }

    pub fn route_length(&self, sequence: &[usize]) -> f64 {
        route_length(&self.task_locations(sequence), &self.depot)
    }

    pub fn route_payload(&self, sequence: &[usize]) -> f64 {
        sequence.iter().map(|&t| self.tasks[t].payload).sum()
    }

    pub fn route_energy(&self, sequence: &[usize]) -> f64 {
        route_energy(self.route_length(sequence), self.route_payload(sequence), &self.fleet)
    }

    pub fn arrival_times(&self, sequence: &[usize]) -> Vec<Arrival> {
        let stops: Vec<(Position3D, f64)> = sequence
            .iter()
            .map(|&t| (self.tasks[t].location, self.tasks[t].window_open))
            .collect();
        arrival_times(&stops, &self.depot, &self.fleet)
    }

    pub fn contains_xy(&self, p: &Position3D) -> bool {
        p.x >= 0.0 && p.x <= self.area_side && p.y >= 0.0 && p.y <= self.area_side
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut pr = Problems::default();
        pr.check(self.area_side > 0.0 && self.area_side.is_finite(), "area_side_m", "must be positive");
        pr.check(self.depot.is_finite() && self.contains_xy(&self.depot), "depot_m", "must lie inside the area");
        pr.check(self.depot.z == 0.0, "depot_m", "depot altitude must be 0");
        for (i, t) in self.tasks.iter().enumerate() {
            let f = |name: &str| format!("tasks[{i}].{name}");
            pr.check(t.id == i, &f("id"), "must equal the task's index");
            pr.check(t.payload > 0.0, &f("payload_kg"), "must be positive");
            pr.check(t.window_open <= t.window_close, &f("window_open_s"), "must not exceed window_close_s");
            pr.check(
                t.location.is_finite() && self.contains_xy(&t.location) && t.location.z == 0.0,
                &f("location_m"),
                "must be a ground point inside the area",
            );
        }
        validate_shared(
            &mut pr,
            &self.fleet,
            &self.channel,
            self.bs_altitude_range,
            self.max_bs,
            &self.thresholds,
            &self.weights,
            &self.sampling,
        );
        pr.finish()
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut pr = Problems::default();
        pr.check(self.depot.is_finite() && self.depot.z == 0.0, "depot_m", "must be a finite ground point");
        pr.check(
            self.payload_range_kg[0] > 0.0 && self.payload_range_kg[0] <= self.payload_range_kg[1],
            "payload_range_kg",
            "must be a positive, ordered range",
        );
        pr.check(self.window_horizon_s > 0.0, "window_horizon_s", "must be positive");
        validate_shared(
            &mut pr,
            &self.fleet,
            &self.channel,
            self.bs_altitude_range,
            self.max_bs,
            &self.thresholds,
            &self.weights,
            &self.sampling,
        );
        pr.finish()
    }
}

#[allow(clippy::too_many_arguments)]
fn validate_shared(
    pr: &mut Problems,
    fleet: &FleetParams,
    channel: &ChannelParams,
    alt: [f64; 2],
    max_bs: usize,
    th: &Thresholds,
    w: &Weights,
    s: &Sampling,
) {
    pr.check(fleet.num_delivery_uavs > 0, "fleet.num_delivery_uavs", "must be positive");
    pr.check(fleet.max_speed > 0.0, "fleet.max_speed_m_per_s", "must be positive");
    pr.check(fleet.max_payload > 0.0, "fleet.max_payload_kg", "must be positive");
    pr.check(fleet.battery > 0.0, "fleet.battery_j", "must be positive");
    pr.check(fleet.energy_coeff > 0.0, "fleet.energy_coeff_j_per_m_kg", "must be positive");
    pr.check(
        fleet.cruise_altitude > 0.0 && fleet.cruise_altitude <= alt[1],
        "fleet.cruise_altitude_m",
        "must lie in (0, h_max]",
    );
    if let Err(e) = channel.validate() {
        pr.check(false, "channel", &format!("{e}"));
    }
    pr.check(alt[0] >= 0.0 && alt[0] < alt[1], "bs_altitude_range_m", "require 0 <= h_min < h_max");
    pr.check(max_bs >= 1, "max_bs", "must be at least 1");
    pr.check(th.lambda_req > 0.0, "thresholds.lambda_req", "must be positive");
    pr.check(th.c_max_bps_per_hz > 0.0, "thresholds.c_max_bps_per_hz", "must be positive");
    pr.check(th.gamma_ctrl_db.is_finite(), "thresholds.gamma_ctrl_db", "must be finite");
    pr.check(th.gamma_bh_db.is_finite(), "thresholds.gamma_bh_db", "must be finite");
    let named = [
        ("weights.omega_d", w.omega_d),
        ("weights.omega_e", w.omega_e),
        ("weights.omega_wait", w.omega_wait),
        ("weights.omega_t", w.omega_t),
        ("weights.omega_v", w.omega_v),
        ("weights.omega_c", w.omega_c),
        ("weights.gamma_t", w.gamma_t),
        ("weights.gamma_v", w.gamma_v),
        ("weights.gamma_c", w.gamma_c),
        ("weights.lambda_conn", w.lambda_conn),
        ("weights.lambda_cap", w.lambda_cap),
        ("weights.w_h", w.w_h),
        ("weights.eta_coll", w.eta_coll),
        ("weights.lambda_out", w.lambda_out),
    ];
    for (name, v) in named {
        pr.check(v >= 0.0 && v.is_finite(), name, "must be nonnegative");
    }
    pr.check(w.delta_safe_m > 0.0, "weights.delta_safe_m", "must be positive");
    pr.check(w.m_inf > 0.0, "weights.m_inf", "must be positive");
    pr.check(
        math::abs(w.omega_t + w.omega_v + w.omega_c - 1.0) <= 1e-9,
        "weights.omega_t+omega_v+omega_c",
        "must sum to 1",
    );
    pr.check(s.delta_h_m > 0.0, "sampling.delta_h_m", "must be positive");
    pr.check(s.k >= 2, "sampling.k", "must be at least 2");
}

/// Seeded scenario: task locations uniform over the square, payloads
/// uniform in `payload_range_kg`, windows `[0, U(H/2, H)]`.
pub fn generate_scenario(
    seed: u64,
    area_side: f64,
    num_tasks: usize,
    config: &ScenarioConfig,
) -> Result<Scenario, ConfigError> {
    let mut pr = Problems::default();
    pr.check(area_side > 0.0 && area_side.is_finite(), "area_side_m", "must be positive");
    pr.check(num_tasks >= 1, "num_tasks", "must be at least 1");
    pr.finish()?;
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [w_lo, w_hi] = config.payload_range_kg;
    let h = config.window_horizon_s;
    let tasks = (0..num_tasks)
        .map(|id| {
            let x = rng.random::<f64>() * area_side;
            let y = rng.random::<f64>() * area_side;
            let payload = w_lo + rng.random::<f64>() * (w_hi - w_lo);
            let close = 0.5 * h + rng.random::<f64>() * 0.5 * h;
            Task {
                id,
                location: Position3D::new(x, y, 0.0),
                payload,
                window_open: 0.0,
                window_close: close,
            }
        })
        .collect();
    let scenario = Scenario::from_config(config, area_side, tasks, seed);
    scenario.validate()?;
    Ok(scenario)
}

/// Ground-plane tour length depot -> stops -> depot. Empty tour is 0.
pub fn route_length(stops: &[Position3D], depot: &Position3D) -> f64 {
    let Some(first) = stops.first() else {
        return 0.0;
    };
    let mut total = depot.distance_xy(first);
    for w in stops.windows(2) {
        total += w[0].distance_xy(&w[1]);
    }
    total + stops[stops.len() - 1].distance_xy(depot)
}

/// Payload-aware energy `eta * L * sum(w)`; payload is carried for the
/// whole tour.
pub fn route_energy(length: f64, payload_sum: f64, fleet: &FleetParams) -> f64 {
    fleet.energy_coeff * length * payload_sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Travel-time arrival before any waiting.
    pub raw: f64,
    /// Service start: `max(raw, window_open)`.
    pub effective: f64,
    pub wait: f64,
}

/// Arrival times at each `(location, window_open)` stop at max speed, with
/// zero service time and hover-waiting for early arrivals.
pub fn arrival_times(stops: &[(Position3D, f64)], depot: &Position3D, fleet: &FleetParams) -> Vec<Arrival> {
    let mut out = Vec::with_capacity(stops.len());
    let mut clock = 0.0;
    let mut here = *depot;
    for &(loc, open) in stops {
        let raw = clock + here.distance_xy(&loc) / fleet.max_speed;
        let effective = if raw < open { open } else { raw };
        out.push(Arrival {
            raw,
            effective,
            wait: effective - raw,
        });
        clock = effective;
        here = loc;
    }
    out
}
