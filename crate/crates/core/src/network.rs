//! Agent coupling graph and κ-hop neighborhoods.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub type AgentId = usize;

const UNREACHABLE: u32 = u32::MAX;

/// Undirected coupling graph over `n` agents.
///
/// All-pairs hop distances are computed once by breadth-first search at
/// construction, so neighborhood queries never repeat a traversal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentGraph {
    n: usize,
    adjacency: Vec<Vec<AgentId>>,
    distances: Vec<u32>,
}

/// The agents within `kappa` hops of `center`, ascending by id. Always
/// contains `center` itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: AgentId,
    pub kappa: usize,
    pub members: Vec<AgentId>,
}

impl Neighborhood {
    pub fn contains(&self, agent: AgentId) -> bool {
        self.members.binary_search(&agent).is_ok()
    }

    /// Position of `agent` inside `members`.
    pub fn position(&self, agent: AgentId) -> Option<usize> {
        self.members.binary_search(&agent).ok()
    }

    /// Agents outside the neighborhood, ascending.
    pub fn complement(&self, n: usize) -> Vec<AgentId> {
        (0..n).filter(|j| !self.contains(*j)).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Validates and builds a graph. Duplicate edges (in either orientation) are
/// collapsed.
pub fn build_graph(n: usize, edges: &[(AgentId, AgentId)]) -> Result<AgentGraph> {
    if n == 0 {
        return Err(Error::InvalidGraph("a graph needs at least one agent".into()));
    }
    let mut unique = BTreeSet::new();
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({i}, {j}) has an endpoint outside 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::InvalidGraph(format!("self-loop on agent {i}")));
        }
        unique.insert((i.min(j), i.max(j)));
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(i, j) in &unique {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    for row in &mut adjacency {
        row.sort_unstable();
    }
    let mut distances = vec![UNREACHABLE; n * n];
    let mut queue = VecDeque::new();
    for source in 0..n {
        let row = &mut distances[source * n..(source + 1) * n];
        row[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if row[v] == UNREACHABLE {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(AgentGraph {
        n,
        adjacency,
        distances,
    })
}

impl AgentGraph {
    pub fn ring(n: usize) -> Result<Self> {
        let edges: Vec<_> = match n {
            0 | 1 => Vec::new(),
            _ => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        };
        build_graph(n, &edges)
    }

    pub fn line(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        build_graph(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        build_graph(n, &edges)
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    /// Adjacent agents of `i`, excluding `i`.
    pub fn neighbors(&self, i: AgentId) -> &[AgentId] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: AgentId) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has_edge(&self, i: AgentId, j: AgentId) -> bool {
        i < self.n && self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distance, `None` when the agents lie in different components.
    pub fn distance(&self, i: AgentId, j: AgentId) -> Option<usize> {
        match self.distances[i * self.n + j] {
            UNREACHABLE => None,
            d => Some(d as usize),
        }
    }

    /// The closed one-hop neighborhood N_i (includes `i`).
    pub fn closed_neighborhood(&self, i: AgentId) -> Vec<AgentId> {
        self.kappa_neighborhood(i, 1)
            .map(|nb| nb.members)
            .unwrap_or_default()
    }

    pub fn kappa_neighborhood(&self, i: AgentId, kappa: usize) -> Result<Neighborhood> {
        if i >= self.n {
            return Err(Error::AgentOutOfRange { agent: i, n: self.n });
        }
        let row = &self.distances[i * self.n..(i + 1) * self.n];
        let members = (0..self.n)
            .filter(|&j| row[j] != UNREACHABLE && row[j] as usize <= kappa)
            .collect();
        Ok(Neighborhood {
            center: i,
            kappa,
            members,
        })
    }

    pub fn is_connected(&self) -> bool {
        self.distances[..self.n].iter().all(|&d| d != UNREACHABLE)
    }

    /// Longest shortest path. Fails on a disconnected graph, naming the first
    /// unreachable pair.
    pub fn diameter(&self) -> Result<usize> {
        let mut best = 0;
        for i in 0..self.n {
            for j in 0..self.n {
                match self.distance(i, j) {
                    Some(d) => best = best.max(d),
                    None => return Err(Error::Disconnected(i, j)),
                }
            }
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn line_graph_degrees() {
        let g = build_graph(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn ring_of_twenty() {
        let g = AgentGraph::ring(20).unwrap();
        assert_eq!(g.num_edges(), 20);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert_eq!(g.diameter().unwrap(), 10);
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            build_graph(2, &[(0, 0)]),
            Err(Error::InvalidGraph(_))
        ));
    }

    #[test]
    fn out_of_range_endpoint_rejected() {
        assert!(build_graph(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = build_graph(3, &[(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.num_edges(), 1);
        assert!(g.has_edge(1, 0));
    }

    #[test]
    fn ring_neighborhoods() {
        let g = AgentGraph::ring(5).unwrap();
        assert_eq!(g.kappa_neighborhood(0, 1).unwrap().members, vec![0, 1, 4]);
        assert_eq!(g.kappa_neighborhood(0, 2).unwrap().members, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_hop_is_center() {
        let g = AgentGraph::line(3).unwrap();
        let nb = g.kappa_neighborhood(0, 0).unwrap();
        assert_eq!(nb.members, vec![0]);
        assert_eq!(nb.complement(3), vec![1, 2]);
    }

    #[test]
    fn neighborhood_out_of_range() {
        let g = AgentGraph::line(3).unwrap();
        assert!(matches!(
            g.kappa_neighborhood(3, 1),
            Err(Error::AgentOutOfRange { agent: 3, n: 3 })
        ));
    }

    #[test]
    fn diameters() {
        assert_eq!(AgentGraph::line(3).unwrap().diameter().unwrap(), 2);
        assert_eq!(AgentGraph::complete(4).unwrap().diameter().unwrap(), 1);
        assert_eq!(AgentGraph::ring(6).unwrap().diameter().unwrap(), 3);
        assert_eq!(AgentGraph::ring(1).unwrap().diameter().unwrap(), 0);
    }

    #[test]
    fn disconnected_diameter_names_pair() {
        let g = build_graph(4, &[(0, 1), (2, 3)]).unwrap();
        match g.diameter() {
            Err(Error::Disconnected(i, j)) => assert!(g.distance(i, j).is_none()),
            other => panic!("expected disconnection error, got {other:?}"),
        }
        // per-component queries still work
        assert_eq!(g.kappa_neighborhood(2, 5).unwrap().members, vec![2, 3]);
    }

    fn arb_graph() -> impl Strategy<Value = AgentGraph> {
        (1usize..9).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..20).prop_map(move |pairs| {
                let edges: Vec<_> = pairs.into_iter().filter(|(i, j)| i != j).collect();
                build_graph(n, &edges).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn neighborhoods_are_monotone_and_symmetric(g in arb_graph(), kappa in 0usize..6) {
            let n = g.num_agents();
            for i in 0..n {
                let small = g.kappa_neighborhood(i, kappa).unwrap();
                let big = g.kappa_neighborhood(i, kappa + 1).unwrap();
                prop_assert!(small.contains(i));
                prop_assert!(small.members.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(small.members.iter().all(|j| big.contains(*j)));
                for j in 0..n {
                    let other = g.kappa_neighborhood(j, kappa).unwrap();
                    prop_assert_eq!(small.contains(j), other.contains(i));
                }
            }
        }

        #[test]
        fn diameter_saturates(g in arb_graph()) {
            if let Ok(d) = g.diameter() {
                for i in 0..g.num_agents() {
                    prop_assert_eq!(g.kappa_neighborhood(i, d).unwrap().len(), g.num_agents());
                }
            }
        }
    }
}
