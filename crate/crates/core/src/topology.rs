//! Backhaul graph over the depot and deployed base stations, its Laplacian,
//! and the algebraic-connectivity utility.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::channel::{self, ChannelError, ChannelParams, Position3D};
use crate::math;

/// Eigenvalues within this distance of zero are reported as exactly zero.
pub const LAMBDA_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("graph nodes {0} and {1} share a position")]
    DuplicatePosition(usize, usize),
    #[error("graph needs at least one node")]
    Empty,
    #[error("lambda_req must be positive, got {0}")]
    InvalidLambdaReq(f64),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Undirected backhaul graph; node 0 is the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct BackhaulGraph {
    pub node_positions: Vec<Position3D>,
    n: usize,
    adjacency: Vec<u8>,
    pub degrees: Vec<u32>,
}

impl BackhaulGraph {
    /// Builds a graph from an explicit edge list (no channel evaluation).
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adjacency = vec![0u8; n * n];
        for &(a, b) in edges {
            if a != b && a < n && b < n {
                adjacency[a * n + b] = 1;
                adjacency[b * n + a] = 1;
            }
        }
        Self::from_adjacency(Vec::new(), n, adjacency)
    }

    fn from_adjacency(node_positions: Vec<Position3D>, n: usize, adjacency: Vec<u8>) -> Self {
        let degrees = (0..n)
            .map(|j| adjacency[j * n..(j + 1) * n].iter().map(|&a| a as u32).sum())
            .collect();
        Self {
            node_positions,
            n,
            adjacency,
            degrees,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.adjacency[j * self.n + k] == 1
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(|&a| a as usize).sum::<usize>() / 2
    }

    pub fn add_edge(&mut self, j: usize, k: usize) {
        if j == k || self.has_edge(j, k) {
            return;
        }
        self.adjacency[j * self.n + k] = 1;
        self.adjacency[k * self.n + j] = 1;
        self.degrees[j] += 1;
        self.degrees[k] += 1;
    }

    /// Row-major `n x n` Laplacian `D - A`.
    pub fn laplacian(&self) -> Vec<i64> {
        let n = self.n;
        let mut l = vec![0i64; n * n];
        for j in 0..n {
            for k in 0..n {
                l[j * n + k] = if j == k {
                    self.degrees[j] as i64
                } else {
                    -(self.adjacency[j * n + k] as i64)
                };
            }
        }
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectivityReport {
    pub lambda2: f64,
    pub utility: f64,
    pub is_connected: bool,
}

/// Edge (j, k) exists iff the SINR in both directions reaches `gamma_bh_db`.
/// With `params.backhaul_interference` every other node transmits on the
/// same channel; otherwise links are noise-limited.
pub fn build_backhaul_graph(
    nodes: &[Position3D],
    params: &ChannelParams,
    gamma_bh_db: f64,
) -> Result<BackhaulGraph, TopologyError> {
    let n = nodes.len();
    if n == 0 {
        return Err(TopologyError::Empty);
    }
    for j in 0..n {
        for k in (j + 1)..n {
            if nodes[j] == nodes[k] {
                return Err(TopologyError::DuplicatePosition(j, k));
            }
        }
    }
    let threshold = channel::db_to_linear(gamma_bh_db);
    let noise = params.noise_power_w();
    // power[j * n + k]: received at k from j (symmetric channel).
    let mut power = vec![0.0f64; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let p = channel::rx_power_w(&nodes[j], &nodes[k], params)?;
            power[j * n + k] = p;
            power[k * n + j] = p;
        }
    }
    let directional = |from: usize, to: usize| -> f64 {
        let mut interference = 0.0;
        if params.backhaul_interference {
            for m in 0..n {
                if m != from && m != to {
                    interference += power[m * n + to];
                }
            }
        }
        power[from * n + to] / (noise + interference)
    };
    let mut adjacency = vec![0u8; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let q = directional(j, k).min(directional(k, j));
            if q >= threshold {
                adjacency[j * n + k] = 1;
                adjacency[k * n + j] = 1;
            }
        }
    }
    Ok(BackhaulGraph::from_adjacency(nodes.to_vec(), n, adjacency))
}

/// Second-smallest Laplacian eigenvalue, clamped to 0 within tolerance.
pub fn algebraic_connectivity(graph: &BackhaulGraph) -> f64 {
    let n = graph.node_count();
    if n < 2 {
        return 0.0;
    }
    let l: Vec<f64> = graph.laplacian().into_iter().map(|v| v as f64).collect();
    let mut eig = symmetric_eigenvalues(&l, n);
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let lambda2 = eig[1];
    if lambda2.abs() <= LAMBDA_ZERO_TOL {
        0.0
    } else {
        lambda2.max(0.0)
    }
}

pub fn connectivity_utility(lambda2: f64, lambda_req: f64) -> Result<f64, TopologyError> {
    if !(lambda_req > 0.0) {
        return Err(TopologyError::InvalidLambdaReq(lambda_req));
    }
    Ok((lambda2 / lambda_req).min(1.0))
}

pub fn connectivity_report(graph: &BackhaulGraph, lambda_req: f64) -> Result<ConnectivityReport, TopologyError> {
    let lambda2 = algebraic_connectivity(graph);
    Ok(ConnectivityReport {
        lambda2,
        utility: connectivity_utility(lambda2, lambda_req)?,
        is_connected: lambda2 > LAMBDA_ZERO_TOL,
    })
}

/// C_conn for a set of base stations plus the depot. Co-located stations
/// make the backhaul graph undefined and score zero.
pub fn deployment_connectivity(
    depot: &Position3D,
    stations: &[Position3D],
    params: &ChannelParams,
    gamma_bh_db: f64,
    lambda_req: f64,
) -> Result<ConnectivityReport, TopologyError> {
    let mut nodes = Vec::with_capacity(stations.len() + 1);
    nodes.push(*depot);
    nodes.extend_from_slice(stations);
    match build_backhaul_graph(&nodes, params, gamma_bh_db) {
        Ok(g) => connectivity_report(&g, lambda_req),
        Err(TopologyError::DuplicatePosition(..)) => Ok(ConnectivityReport {
            lambda2: 0.0,
            utility: connectivity_utility(0.0, lambda_req)?,
            is_connected: false,
        }),
        Err(e) => Err(e),
    }
}

/// Cyclic Jacobi eigenvalue iteration for a dense symmetric matrix.
pub fn symmetric_eigenvalues(matrix: &[f64], n: usize) -> Vec<f64> {
    let mut a = matrix.to_vec();
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
