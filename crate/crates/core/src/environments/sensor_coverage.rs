//! Sensor coverage on a square grid: each agent moves between cells and is
//! rewarded for detection, discounted when neighbors cover the same cell.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{GameModel, LocalDynamics};
use crate::network::{AgentGraph, AgentId};

/// Probability of moving in the chosen direction.
pub const INTENDED_MOVE: f64 = 0.85;
/// Probability of each of the three other directions.
pub const LATERAL_MOVE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Right = 0,
    Left = 1,
    Up = 2,
    Down = 3,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Right, Move::Left, Move::Up, Move::Down];
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensorCoverageSpec {
    pub graph: AgentGraph,
    /// Cells are numbered row·grid_side + col.
    pub grid_side: usize,
    /// Detection probability of each agent.
    pub detect_prob: Vec<f64>,
    pub gamma: f64,
}

impl SensorCoverageSpec {
    /// Ring of `n` agents on a `grid_side`² grid, detection 0.7, γ = 0.9.
    pub fn ring(n: usize, grid_side: usize) -> Result<Self> {
        Ok(Self {
            graph: AgentGraph::ring(n)?,
            grid_side,
            detect_prob: vec![0.7; n],
            gamma: 0.9,
        })
    }

    pub fn cells(&self) -> usize {
        self.grid_side * self.grid_side
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_side == 0 {
            return Err(Error::InvalidModel("grid side must be positive".into()));
        }
        if self.detect_prob.len() != self.graph.num_agents() {
            return Err(Error::InvalidModel(format!(
                "{} detection probabilities for {} agents",
                self.detect_prob.len(),
                self.graph.num_agents()
            )));
        }
        if let Some(p) = self.detect_prob.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidModel(format!("detection probability {p} not in (0, 1]")));
        }
        Ok(())
    }
}

impl Default for SensorCoverageSpec {
    /// 20 agents on a ring over a 5×5 grid.
    fn default() -> Self {
        Self::ring(20, 5).expect("ring of 20")
    }
}

/// Target cell of a move, or `None` when it would leave the grid.
pub fn move_target(cell: usize, side: usize, m: Move) -> Option<usize> {
    let (row, col) = (cell / side, cell % side);
    match m {
        Move::Right => (col + 1 < side).then(|| cell + 1),
        Move::Left => (col > 0).then(|| cell - 1),
        Move::Up => (row > 0).then(|| cell - side),
        Move::Down => (row + 1 < side).then(|| cell + side),
    }
}

/// Distribution over next cells for one agent; off-grid outcomes stay put.
pub fn cell_transition(cell: usize, side: usize, action: usize, out: &mut [f64]) {
    out.fill(0.0);
    for m in Move::ALL {
        let p = if m as usize == action { INTENDED_MOVE } else { LATERAL_MOVE };
        out[move_target(cell, side, m).unwrap_or(cell)] += p;
    }
}

#[derive(Debug)]
pub struct SensorCoverage {
    side: usize,
    neighbors: Vec<Vec<AgentId>>,
    detect_prob: Vec<f64>,
}

impl SensorCoverage {
    pub fn new(spec: &SensorCoverageSpec) -> Self {
        let g = &spec.graph;
        Self {
            side: spec.grid_side,
            neighbors: (0..g.num_agents()).map(|i| g.neighbors(i).to_vec()).collect(),
            detect_prob: spec.detect_prob.clone(),
        }
    }
}

impl LocalDynamics for SensorCoverage {
    fn transition_row(&self, agent: AgentId, state: &[usize], action: &[usize], out: &mut [f64]) {
        cell_transition(state[agent], self.side, action[agent], out);
    }

    /// p_i·|N_i|·Π_{j∈N_i∖i} (1 − p_j·[s_j = s_i]).
    fn reward(&self, agent: AgentId, state: &[usize], _action: &[usize]) -> f64 {
        let nbrs = &self.neighbors[agent];
        let overlap: f64 = nbrs
            .iter()
            .filter(|&&j| state[j] == state[agent])
            .map(|&j| 1.0 - self.detect_prob[j])
            .product();
        self.detect_prob[agent] * (nbrs.len() + 1) as f64 * overlap
    }
}

/// Largest reward over all configurations. With two or more cells an agent
/// can always sit alone, so the overlap factor is 1; a single cell forces
/// every neighbor onto it.
fn coverage_reward_ceiling(spec: &SensorCoverageSpec) -> f64 {
    let g = &spec.graph;
    (0..g.num_agents())
        .map(|i| {
            let forced: f64 = if spec.cells() >= 2 {
                1.0
            } else {
                g.neighbors(i).iter().map(|&j| 1.0 - spec.detect_prob[j]).product()
            };
            spec.detect_prob[i] * (g.degree(i) + 1) as f64 * forced
        })
        .fold(0.0, f64::max)
}

pub fn sensor_coverage_model(spec: &SensorCoverageSpec) -> Result<GameModel> {
    spec.validate()?;
    let n = spec.graph.num_agents();
    let mut r_max = coverage_reward_ceiling(spec);
    if r_max == 0.0 {
        // every reward is identically zero (detect_prob 1 on a single cell)
        r_max = 1.0;
    }
    GameModel::new(
        spec.graph.clone(),
        vec![spec.cells(); n],
        vec![Move::ALL.len(); n],
        Arc::new(SensorCoverage::new(spec)),
        spec.gamma,
        r_max,
    )
}
