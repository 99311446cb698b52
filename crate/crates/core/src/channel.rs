//! Probabilistic air-to-air channel: elevation-dependent LoS probability,
//! free-space plus excess path loss, received power and SINR.
//!
//! All powers are linear Watts internally. dB/dBm only appear at the edges
//! (parameters and thresholds).

use core::fmt;
use core::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;

/// Links shorter than this are evaluated at this distance by the coverage
/// routines (`best_server_sinr`), which must stay total over arbitrary points.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("positions coincide; link distance is zero")]
    CoincidentPositions,
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidParams(&'static str),
    #[error("server index {index} out of range for {count} transmitters")]
    ServerIndexOutOfRange { index: usize, count: usize },
    #[error("no transmitters deployed")]
    NoCoverage,
}

/// A point in the local metric frame (x, y on the ground plane, z altitude).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        (*self - *other).norm()
    }

    pub fn distance_xy(&self, other: &Position3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        math::sqrt(dx * dx + dy * dy)
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn with_z(self, z: f64) -> Self {
        Self { z, ..self }
    }
}

impl From<[f64; 3]> for Position3D {
    fn from(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<Position3D> for [f64; 3] {
    fn from(p: Position3D) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Position3D {
    type Output = Position3D;
    fn add(self, o: Position3D) -> Position3D {
        Position3D::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Position3D {
    type Output = Position3D;
    fn sub(self, o: Position3D) -> Position3D {
        Position3D::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Position3D {
    type Output = Position3D;
    fn mul(self, s: f64) -> Position3D {
        Position3D::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Position3D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3}, {:.3})", self.x, self.y, self.z)
    }
}

/// Radio parameters. Frequency is stored in Hz; the file form uses GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ChannelParamsFile", into = "ChannelParamsFile")]
pub struct ChannelParams {
    pub carrier_frequency_hz: f64,
    pub transmit_power_dbm: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub bandwidth_hz: f64,
    pub alpha: f64,
    pub beta: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub c0_m_per_s: f64,
    /// Other deployed base stations interfere on access (C2) links.
    pub access_interference: bool,
    /// Other graph nodes interfere on backhaul links.
    pub backhaul_interference: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            carrier_frequency_hz: 2.4e9,
            transmit_power_dbm: 23.0,
            noise_psd_dbm_per_hz: -174.0,
            bandwidth_hz: 10e6,
            alpha: 9.61,
            beta: 0.16,
            eta_los_db: 1.0,
            eta_nlos_db: 20.0,
            c0_m_per_s: 3e8,
            access_interference: true,
            backhaul_interference: false,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let finite = [
            self.carrier_frequency_hz,
            self.transmit_power_dbm,
            self.noise_psd_dbm_per_hz,
            self.bandwidth_hz,
            self.alpha,
            self.beta,
            self.eta_los_db,
            self.eta_nlos_db,
            self.c0_m_per_s,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ChannelError::InvalidParams("non-finite value"));
        }
        if self.carrier_frequency_hz <= 0.0 {
            return Err(ChannelError::InvalidParams("carrier_frequency must be > 0"));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(ChannelError::InvalidParams("bandwidth must be > 0"));
        }
        if self.eta_los_db < 0.0 || self.eta_nlos_db < self.eta_los_db {
            return Err(ChannelError::InvalidParams("require eta_nlos >= eta_los >= 0"));
        }
        if self.alpha <= 0.0 || self.beta <= 0.0 {
            return Err(ChannelError::InvalidParams("alpha and beta must be > 0"));
        }
        if self.c0_m_per_s <= 0.0 {
            return Err(ChannelError::InvalidParams("c0 must be > 0"));
        }
        Ok(())
    }

    pub fn transmit_power_w(&self) -> f64 {
        dbm_to_watts(self.transmit_power_dbm)
    }

    /// Thermal noise power N0 * B in Watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz) * self.bandwidth_hz
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelParamsFile {
    carrier_frequency_ghz: f64,
    transmit_power_dbm: f64,
    noise_psd_dbm_per_hz: f64,
    bandwidth_hz: f64,
    alpha: f64,
    beta: f64,
    eta_los_db: f64,
    eta_nlos_db: f64,
    c0_m_per_s: f64,
    #[serde(default = "default_true")]
    access_interference: bool,
    #[serde(default)]
    backhaul_interference: bool,
}

fn default_true() -> bool {
    true
}

impl From<ChannelParamsFile> for ChannelParams {
    fn from(f: ChannelParamsFile) -> Self {
        Self {
            carrier_frequency_hz: f.carrier_frequency_ghz * 1e9,
            transmit_power_dbm: f.transmit_power_dbm,
            noise_psd_dbm_per_hz: f.noise_psd_dbm_per_hz,
            bandwidth_hz: f.bandwidth_hz,
            alpha: f.alpha,
            beta: f.beta,
            eta_los_db: f.eta_los_db,
            eta_nlos_db: f.eta_nlos_db,
            c0_m_per_s: f.c0_m_per_s,
            access_interference: f.access_interference,
            backhaul_interference: f.backhaul_interference,
        }
    }
}

impl From<ChannelParams> for ChannelParamsFile {
    fn from(p: ChannelParams) -> Self {
        Self {
            carrier_frequency_ghz: p.carrier_frequency_hz / 1e9,
            transmit_power_dbm: p.transmit_power_dbm,
            noise_psd_dbm_per_hz: p.noise_psd_dbm_per_hz,
            bandwidth_hz: p.bandwidth_hz,
            alpha: p.alpha,
            beta: p.beta,
            eta_los_db: p.eta_los_db,
            eta_nlos_db: p.eta_nlos_db,
            c0_m_per_s: p.c0_m_per_s,
            access_interference: p.access_interference,
            backhaul_interference: p.backhaul_interference,
        }
    }
}

/// Per-link quantities for one transmitter/receiver pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance: f64,
    pub elevation_deg: f64,
    pub p_los: f64,
    pub mean_path_loss: f64,
    pub rx_power: f64,
}

impl LinkBudget {
    pub fn between(a: &Position3D, b: &Position3D, params: &ChannelParams) -> Result<Self, ChannelError> {
        let distance = a.distance(b);
        if distance == 0.0 {
            return Err(ChannelError::CoincidentPositions);
        }
        Ok(link_budget_at(distance, math::abs(a.z - b.z), params))
    }
}

fn link_budget_at(distance: f64, dz: f64, params: &ChannelParams) -> LinkBudget {
    let elevation_deg = elevation_from(dz, distance);
    let p_los = los_probability(elevation_deg, params);
    let fspl = fspl_unchecked(distance, params);
    let mean_path_loss = fspl + p_los * params.eta_los_db + (1.0 - p_los) * params.eta_nlos_db;
    let rx_power = params.transmit_power_w() * math::pow10(-mean_path_loss / 10.0);
    LinkBudget {
        distance,
        elevation_deg,
        p_los,
        mean_path_loss,
        rx_power,
    }
}

fn elevation_from(dz: f64, distance: f64) -> f64 {
    // dz <= distance up to rounding; clamp before arcsin.
    let s = (dz / distance).clamp(0.0, 1.0);
    math::asin(s).to_degrees()
}

pub fn elevation_angle(a: &Position3D, b: &Position3D) -> Result<f64, ChannelError> {
    let d = a.distance(b);
    if d == 0.0 {
        return Err(ChannelError::CoincidentPositions);
    }
    Ok(elevation_from(math::abs(a.z - b.z), d))
}

pub fn los_probability(theta_deg: f64, params: &ChannelParams) -> f64 {
    1.0 / (1.0 + params.alpha * math::exp(-params.beta * (theta_deg - params.alpha)))
}

pub fn fspl_db(distance: f64, params: &ChannelParams) -> Result<f64, ChannelError> {
    if !(distance > 0.0) {
        return Err(ChannelError::NonPositiveDistance(distance));
    }
    Ok(fspl_unchecked(distance, params))
}

fn fspl_unchecked(distance: f64, params: &ChannelParams) -> f64 {
    20.0 * math::log10(distance)
        + 20.0 * math::log10(params.carrier_frequency_hz)
        + 20.0 * math::log10(4.0 * core::f64::consts::PI / params.c0_m_per_s)
}

pub fn mean_path_loss(a: &Position3D, b: &Position3D, params: &ChannelParams) -> Result<f64, ChannelError> {
    Ok(LinkBudget::between(a, b, params)?.mean_path_loss)
}

pub fn rx_power_w(a: &Position3D, b: &Position3D, params: &ChannelParams) -> Result<f64, ChannelError> {
    Ok(LinkBudget::between(a, b, params)?.rx_power)
}

/// Received power with the link distance floored at [`MIN_LINK_DISTANCE_M`].
pub(crate) fn rx_power_floored(a: &Position3D, b: &Position3D, params: &ChannelParams) -> f64 {
    let d = a.distance(b);
    let dz = math::abs(a.z - b.z);
    if d < MIN_LINK_DISTANCE_M {
        // Coincident or near-field: treat as a vertical link at the reference distance.
        let dz_eff = if d == 0.0 { MIN_LINK_DISTANCE_M } else { dz * MIN_LINK_DISTANCE_M / d };
        return link_budget_at(MIN_LINK_DISTANCE_M, dz_eff, params).rx_power;
    }
    link_budget_at(d, dz, params).rx_power
}

/// SINR at `receiver` served by `transmitters[server_index]`; every other
/// transmitter interferes unless access interference is disabled.
pub fn sinr(
    receiver: &Position3D,
    server_index: usize,
    transmitters: &[Position3D],
    params: &ChannelParams,
) -> Result<f64, ChannelError> {
    if params.bandwidth_hz <= 0.0 {
        return Err(ChannelError::InvalidParams("bandwidth must be > 0"));
    }
    if server_index >= transmitters.len() {
        return Err(ChannelError::ServerIndexOutOfRange {
            index: server_index,
            count: transmitters.len(),
        });
    }
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, tx) in transmitters.iter().enumerate() {
        if i == server_index {
            signal = rx_power_w(tx, receiver, params)?;
        } else if params.access_interference {
            interference += rx_power_w(tx, receiver, params)?;
        } else if tx.distance(receiver) == 0.0 {
            return Err(ChannelError::CoincidentPositions);
        }
    }
    Ok(signal / (params.noise_power_w() + interference))
}

/// Best-server SINR over a deployment, with the server's index. Ties go to
/// the lowest index.
pub fn best_server_sinr(
    point: &Position3D,
    deployment: &[Position3D],
    params: &ChannelParams,
) -> Result<(f64, usize), ChannelError> {
    if deployment.is_empty() {
        return Err(ChannelError::NoCoverage);
    }
    Ok(best_server_sinr_nonempty(point, deployment, params))
}

pub(crate) fn best_server_sinr_nonempty(
    point: &Position3D,
    deployment: &[Position3D],
    params: &ChannelParams,
) -> (f64, usize) {
    const STACK: usize = 64;
    let mut stack = [0.0f64; STACK];
    let mut heap;
    let powers: &mut [f64] = if deployment.len() <= STACK {
        &mut stack[..deployment.len()]
    } else {
        heap = alloc::vec![0.0; deployment.len()];
        &mut heap[..]
    };
    // SINR is strictly increasing in the server's own power for a fixed
    // total, so the best server is the strongest one.
    let mut best = 0;
    for (i, tx) in deployment.iter().enumerate() {
        powers[i] = rx_power_floored(tx, point, params);
        if powers[i] > powers[best] {
            best = i;
        }
    }
    let mut interference = 0.0;
    if params.access_interference {
        for (i, p) in powers.iter().enumerate() {
            if i != best {
                interference += p;
            }
        }
    }
    (powers[best] / (params.noise_power_w() + interference), best)
}

pub fn db_to_linear(db: f64) -> f64 {
    math::pow10(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * math::log10(lin)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    math::pow10((dbm - 30.0) / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p() -> ChannelParams {
        ChannelParams::default()
    }

    #[test]
    fn elevation_examples() {
        let o = Position3D::new(0.0, 0.0, 0.0);
        assert!((elevation_angle(&o, &Position3D::new(0.0, 0.0, 100.0)).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(elevation_angle(&o, &Position3D::new(100.0, 0.0, 0.0)).unwrap(), 0.0);
        let e = elevation_angle(&o, &Position3D::new(100.0, 0.0, 100.0)).unwrap();
        assert!((e - 45.0).abs() < 1e-12);
        assert_eq!(elevation_angle(&o, &o), Err(ChannelError::CoincidentPositions));
    }

    #[test]
    fn los_probability_examples() {
        let at_alpha = los_probability(9.61, &p());
        assert!((at_alpha - 1.0 / 10.61).abs() < 1e-12);
        assert!((at_alpha - 0.094251).abs() < 1e-6);
        assert!((los_probability(90.0, &p()) - 0.999975).abs() < 1e-6);
        // Hand evaluation: 1 / (1 + 9.61 * e^(0.16 * 9.61)).
        let oracle = 1.0 / (1.0 + 9.61 * 1.537_6_f64.exp());
        assert!((los_probability(0.0, &p()) - oracle).abs() < 1e-12);
        assert!((los_probability(0.0, &p()) - 0.021872).abs() < 1e-6);
    }

    #[test]
    fn fspl_examples() {
        assert!((fspl_db(1.0, &p()).unwrap() - 40.05).abs() < 0.01);
        assert!((fspl_db(1000.0, &p()).unwrap() - 100.05).abs() < 0.01);
        let diff = fspl_db(100.0, &p()).unwrap() - fspl_db(10.0, &p()).unwrap();
        assert!((diff - 20.0).abs() < 1e-9);
        assert!(matches!(fspl_db(0.0, &p()), Err(ChannelError::NonPositiveDistance(_))));
        assert!(fspl_db(-3.0, &p()).is_err());
    }

    #[test]
    fn mean_path_loss_endpoints_and_composition() {
        // Steep beta drives P_LoS to 1 at 90 degrees and 0 at 0 degrees.
        let steep = ChannelParams { beta: 50.0, ..p() };
        let a = Position3D::new(0.0, 0.0, 0.0);
        let up = Position3D::new(0.0, 0.0, 100.0);
        let side = Position3D::new(100.0, 0.0, 0.0);
        let f = fspl_db(100.0, &steep).unwrap();
        assert!((mean_path_loss(&a, &up, &steep).unwrap() - (f + steep.eta_los_db)).abs() < 1e-9);
        assert!((mean_path_loss(&a, &side, &steep).unwrap() - (f + steep.eta_nlos_db)).abs() < 1e-9);

        let b = Position3D::new(100.0, 0.0, 100.0);
        let d = 20000f64.sqrt();
        let pl = los_probability(45.0, &p());
        let expected = fspl_db(d, &p()).unwrap() + pl * 1.0 + (1.0 - pl) * 20.0;
        assert!((mean_path_loss(&a, &b, &p()).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn rx_power_from_path_loss() {
        let pt = dbm_to_watts(23.0);
        assert!((pt - 0.199526).abs() < 1e-6);
        assert!((pt * math::pow10(-10.0) - 1.995e-11).abs() < 1e-14);
        assert!((pt * math::pow10(-12.0) - 1.995e-13).abs() < 1e-16);
        // L = 0 dB gives exactly P_t.
        assert_eq!(pt * math::pow10(-0.0 / 10.0), pt);
    }

    #[test]
    fn sinr_noise_floor_example() {
        let noise = p().noise_power_w();
        assert!((noise - 3.981e-14).abs() < 1e-16);
        let snr = 2e-11 / noise;
        assert!((snr - 502.4).abs() < 0.1);
        assert!((linear_to_db(snr) - 27.0).abs() < 0.05);
    }

    #[test]
    fn sinr_colocated_equal_power_is_unity() {
        let params = ChannelParams {
            noise_psd_dbm_per_hz: -400.0,
            ..p()
        };
        let tx = [Position3D::new(0.0, 0.0, 100.0), Position3D::new(0.0, 0.0, 100.0)];
        let rx = Position3D::new(50.0, 0.0, 0.0);
        let s = sinr(&rx, 0, &tx, &params).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sinr_rejects_bad_inputs() {
        let tx = [Position3D::new(0.0, 0.0, 100.0)];
        let zero_bw = ChannelParams { bandwidth_hz: 0.0, ..p() };
        assert!(matches!(
            sinr(&Position3D::default(), 0, &tx, &zero_bw),
            Err(ChannelError::InvalidParams(_))
        ));
        assert!(zero_bw.validate().is_err());
        assert!(matches!(
            sinr(&Position3D::default(), 1, &tx, &p()),
            Err(ChannelError::ServerIndexOutOfRange { .. })
        ));
        assert_eq!(sinr(&tx[0], 0, &tx, &p()), Err(ChannelError::CoincidentPositions));
    }

    #[test]
    fn single_transmitter_sinr_is_snr() {
        let tx = [Position3D::new(10.0, 20.0, 100.0)];
        let rx = Position3D::new(200.0, 50.0, 0.0);
        let s = sinr(&rx, 0, &tx, &p()).unwrap();
        let snr = rx_power_w(&tx[0], &rx, &p()).unwrap() / p().noise_power_w();
        assert!((s - snr).abs() <= 1e-12 * snr);
        let (b, idx) = best_server_sinr(&rx, &tx, &p()).unwrap();
        assert_eq!(idx, 0);
        assert_eq!(b, s);
    }

    #[test]
    fn best_server_ties_and_brute_force() {
        let tx = [Position3D::new(-100.0, 0.0, 100.0), Position3D::new(100.0, 0.0, 100.0)];
        let (_, idx) = best_server_sinr(&Position3D::new(0.0, 0.0, 0.0), &tx, &p()).unwrap();
        assert_eq!(idx, 0);

        let line = [
            Position3D::new(0.0, 0.0, 100.0),
            Position3D::new(600.0, 0.0, 100.0),
            Position3D::new(1200.0, 0.0, 100.0),
        ];
        let rx = Position3D::new(40.0, 10.0, 0.0);
        let (best, idx) = best_server_sinr(&rx, &line, &p()).unwrap();
        let per: alloc::vec::Vec<f64> = (0..3).map(|i| sinr(&rx, i, &line, &p()).unwrap()).collect();
        let (oracle_idx, oracle) = per
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        assert_eq!(idx, 0);
        assert_eq!(oracle_idx, 0);
        assert!((best - oracle).abs() <= 1e-12 * oracle);
        assert_eq!(best_server_sinr(&rx, &[], &p()), Err(ChannelError::NoCoverage));
    }

    #[test]
    fn best_server_is_total_at_transmitter() {
        let tx = [Position3D::new(0.0, 0.0, 100.0)];
        let (s, _) = best_server_sinr(&tx[0], &tx, &p()).unwrap();
        assert!(s.is_finite() && s > 0.0);
    }

    #[test]
    fn serde_uses_ghz() {
        let json = serde_json_like(&p());
        assert!(json.contains("carrier_frequency_ghz"));
    }

    // Minimal check without pulling serde_json into the core crate.
    fn serde_json_like(p: &ChannelParams) -> alloc::string::String {
        let f: ChannelParamsFile = p.clone().into();
        assert!((f.carrier_frequency_ghz - 2.4).abs() < 1e-12);
        let back: ChannelParams = f.into();
        assert_eq!(&back, p);
        alloc::string::String::from("carrier_frequency_ghz")
    }

    proptest! {
        #[test]
        fn los_monotone(a in 0.0f64..90.0, b in 0.0f64..90.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(los_probability(lo, &p()) <= los_probability(hi, &p()));
        }

        #[test]
        fn path_loss_within_endpoints(
            x in -2000.0f64..2000.0, y in -2000.0f64..2000.0, z in 0.0f64..300.0,
            bz in 0.0f64..300.0,
        ) {
            let a = Position3D::new(x, y, z);
            let b = Position3D::new(0.0, 0.0, bz);
            prop_assume!(a.distance(&b) > 0.0);
            let f = fspl_db(a.distance(&b), &p()).unwrap();
            let l = mean_path_loss(&a, &b, &p()).unwrap();
            prop_assert!(l >= f + 1.0 - 1e-9 && l <= f + 20.0 + 1e-9);
        }

        #[test]
        fn fspl_doubling(d in 0.01f64..1e5) {
            let diff = fspl_db(2.0 * d, &p()).unwrap() - fspl_db(d, &p()).unwrap();
            prop_assert!((diff - 20.0 * 2f64.log10()).abs() < 1e-9);
        }

        #[test]
        fn db_round_trip(x in -200.0f64..200.0) {
            let back = linear_to_db(db_to_linear(x));
            prop_assert!((back - x).abs() <= 1e-12 * x.abs().max(1.0));
            let lin = db_to_linear(x);
            prop_assert!((db_to_linear(linear_to_db(lin)) - lin).abs() <= 1e-12 * lin);
        }

        #[test]
        fn closer_interferer_lowers_sinr(d1 in 200.0f64..1500.0, shrink in 0.1f64..0.95) {
            let rx = Position3D::new(0.0, 0.0, 0.0);
            let server = Position3D::new(50.0, 0.0, 100.0);
            let far = [server, Position3D::new(d1, 0.0, 100.0)];
            let near = [server, Position3D::new(d1 * shrink, 0.0, 100.0)];
            prop_assume!(near[1].distance(&rx) > 0.0);
            let s_far = sinr(&rx, 0, &far, &p()).unwrap();
            let s_near = sinr(&rx, 0, &near, &p()).unwrap();
            prop_assert!(s_near < s_far);
        }
    }
}
