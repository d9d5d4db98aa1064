//! DAG encoding of optical setups for the surrogate.
//!
//! Nodes are devices (sources included) plus a start and an end marker.
//! Node features are binary: a one-hot block identifying the device type —
//! wave plates with different grid angles count as different types — and a
//! positional block with one bit per path the device touches. An edge
//! `i -> j` exists when device `j` is the next device acting on some path
//! that device `i` also acts on; start feeds every source and the last
//! device on each path feeds end. Node order follows the sequence, so the
//! adjacency matrix is strictly upper triangular and acyclic by
//! construction.

use std::io::Write;

use crate::error::Result;
use crate::dataset::ToolboxConfig;
use crate::optics::device::Device;
use crate::optics::OpticalSetup;

/// Binary node-feature matrix and adjacency for one setup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetupGraph {
    pub n_nodes: usize,
    /// One-hot block width (device types incl. start/end markers).
    pub d1: usize,
    /// Positional block width (one bit per path).
    pub d2: usize,
    /// Flattened `n_nodes x (d1 + d2)` feature matrix.
    pub features: Vec<u8>,
    /// Flattened `n_nodes x n_nodes` adjacency; `adj[i * n + j] = 1` means
    /// an edge from node `i` to node `j`.
    pub adjacency: Vec<u8>,
}

impl SetupGraph {
    pub fn feature_dim(&self) -> usize {
        self.d1 + self.d2
    }

    pub fn feature(&self, node: usize, column: usize) -> u8 {
        self.features[node * self.feature_dim() + column]
    }

    pub fn edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.n_nodes + to] == 1
    }

    /// Successor lists (`j` with an edge `i -> j`) for each node.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        (0..self.n_nodes)
            .map(|i| (0..self.n_nodes).filter(|&j| self.edge(i, j)).collect())
            .collect()
    }

    pub fn write_features_csv(&self, mut out: impl Write) -> Result<()> {
        let d = self.feature_dim();
        for node in 0..self.n_nodes {
            let row: Vec<String> =
                (0..d).map(|c| self.features[node * d + c].to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_adjacency_csv(&self, mut out: impl Write) -> Result<()> {
        for i in 0..self.n_nodes {
            let row: Vec<String> =
                (0..self.n_nodes).map(|j| self.adjacency[i * self.n_nodes + j].to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// One-hot width for a toolbox: start + end + 3 DC kinds + BS + PBS +
/// q HWP types + q QWP types + R. For `q = 4` this is 16.
pub fn one_hot_width(grid_q: u32) -> usize {
    8 + 2 * grid_q as usize
}

/// Column of the one-hot block identifying a device type under grid `q`.
/// Layout: start, end, DC00, DC11, DCBell, BS, PBS, HWP angles, QWP
/// angles, R.
fn type_column(device: &Device, grid_q: u32) -> usize {
    use crate::optics::device::DcKind;
    match device {
        Device::Dc { kind, .. } => match kind {
            DcKind::Pair00 => 2,
            DcKind::Pair11 => 3,
            DcKind::Bell => 4,
        },
        Device::BeamSplitter { .. } => 5,
        Device::PolarizingBeamSplitter { .. } => 6,
        Device::HalfWavePlate { angle, .. } => {
            7 + angle.grid_index(grid_q).expect("angle on grid") as usize
        }
        Device::QuarterWavePlate { angle, .. } => {
            7 + grid_q as usize + angle.grid_index(grid_q).expect("angle on grid") as usize
        }
        Device::Mirror { .. } => 7 + 2 * grid_q as usize,
    }
}

/// Encode a setup as `(X, A)` under the toolbox's quantization grid.
pub fn encode_setup(setup: &OpticalSetup, config: &ToolboxConfig) -> Result<SetupGraph> {
    config.check(setup)?;
    let n_paths = setup.n_photons;
    let d1 = one_hot_width(config.grid_q);
    let d2 = n_paths;
    let d = d1 + d2;
    let device_count = setup.device_count();
    let n_nodes = device_count + 2;
    let start = 0usize;
    let end = n_nodes - 1;

    let mut features = vec![0u8; n_nodes * d];
    features[start * d] = 1;
    features[end * d + 1] = 1;
    for (offset, device) in setup.devices().enumerate() {
        let node = 1 + offset;
        features[node * d + type_column(device, config.grid_q)] = 1;
        for path in device.paths() {
            features[node * d + d1 + path] = 1;
        }
    }

    let mut adjacency = vec![0u8; n_nodes * n_nodes];
    // last node seen on each path; sources initialize their pair
    let mut last_on_path: Vec<Option<usize>> = vec![None; n_paths];
    for (offset, device) in setup.devices().enumerate() {
        let node = 1 + offset;
        if device.is_source() {
            adjacency[start * n_nodes + node] = 1;
        }
        for path in device.paths() {
            if let Some(prev) = last_on_path[path] {
                adjacency[prev * n_nodes + node] = 1;
            }
            last_on_path[path] = Some(node);
        }
    }
    for last in last_on_path.into_iter().flatten() {
        adjacency[last * n_nodes + end] = 1;
    }

    Ok(SetupGraph { n_nodes, d1, d2, features, adjacency })
}
