use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Joint topology shared by every sequence of a dataset.
///
/// Edges are undirected and stored with the smaller index first. A graph
/// built through [`SkeletonGraph::new`] has valid endpoints, no self-loops
/// and no duplicate edges. Connectivity is checked separately because
/// datasets and the adjacency builder need it but a bare topology does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct SkeletonGraph {
    joint_count: usize,
    edges: Vec<(usize, usize)>,
    root_joint: usize,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    joint_count: usize,
    edges: Vec<(usize, usize)>,
    root_joint: usize,
}

impl TryFrom<RawGraph> for SkeletonGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        SkeletonGraph::new(raw.joint_count, raw.edges, raw.root_joint)
    }
}

impl From<SkeletonGraph> for RawGraph {
    fn from(g: SkeletonGraph) -> Self {
        RawGraph {
            joint_count: g.joint_count,
            edges: g.edges,
            root_joint: g.root_joint,
        }
    }
}

impl SkeletonGraph {
    pub fn new(joint_count: usize, edges: Vec<(usize, usize)>, root_joint: usize) -> Result<Self> {
        if joint_count == 0 {
            return Err(Error::Graph("joint_count must be positive".into()));
        }
        if root_joint >= joint_count {
            return Err(Error::Graph(format!(
                "root joint {root_joint} out of range for {joint_count} joints"
            )));
        }
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= joint_count || b >= joint_count {
                return Err(Error::Graph(format!(
                    "edge ({a}, {b}) has an endpoint outside [0, {joint_count})"
                )));
            }
            if a == b {
                return Err(Error::Graph(format!("self-loop on joint {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
            }
            normalized.push(e);
        }
        Ok(SkeletonGraph {
            joint_count,
            edges: normalized,
            root_joint,
        })
    }

    /// 25-joint Kinect v2 / Kinect One topology, rooted at the spine base.
    pub fn kinect_v2() -> Self {
        // 1-based pairs as published for the Kinect v2 SDK joint order.
        const PAIRS: [(usize, usize); 24] = [
            (1, 2),
            (2, 21),
            (3, 21),
            (4, 3),
            (5, 21),
            (6, 5),
            (7, 6),
            (8, 7),
            (9, 21),
            (10, 9),
            (11, 10),
            (12, 11),
            (13, 1),
            (14, 13),
            (15, 14),
            (16, 15),
            (17, 1),
            (18, 17),
            (19, 18),
            (20, 19),
            (22, 23),
            (23, 8),
            (24, 25),
            (25, 12),
        ];
        let edges = PAIRS.iter().map(|&(a, b)| (a - 1, b - 1)).collect();
        SkeletonGraph::new(25, edges, 0).expect("static kinect graph is valid")
    }

    /// 22-joint topology of the UI-PRMD Kinect recordings, rooted at the waist.
    ///
    /// Joint order: waist, spine, chest, neck, head, head tip, then left and
    /// right collar / upper arm / forearm / hand, then left and right upper
    /// leg / lower leg / foot / toes.
    pub fn uiprmd_kinect() -> Self {
        let edges = vec![
            (0, 1),
            (1, 2),
            (2, 3),
            (3, 4),
            (4, 5),
            (2, 6),
            (6, 7),
            (7, 8),
            (8, 9),
            (2, 10),
            (10, 11),
            (11, 12),
            (12, 13),
            (0, 14),
            (14, 15),
            (15, 16),
            (16, 17),
            (0, 18),
            (18, 19),
            (19, 20),
            (20, 21),
        ];
        SkeletonGraph::new(22, edges, 0).expect("static ui-prmd graph is valid")
    }

    /// Simple path 0-1-...-(n-1) rooted at joint 0.
    pub fn chain(joint_count: usize) -> Result<Self> {
        let edges = (1..joint_count).map(|j| (j - 1, j)).collect();
        SkeletonGraph::new(joint_count, edges, 0)
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root_joint(&self) -> usize {
        self.root_joint
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.joint_count];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Hop distance of every joint from the root; `None` when unreachable.
    pub fn root_distances(&self) -> Vec<Option<usize>> {
        let adj = self.neighbors();
        let mut dist = vec![None; self.joint_count];
        dist[self.root_joint] = Some(0);
        let mut queue = VecDeque::from([self.root_joint]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap_or(0);
            for &w in &adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.root_distances().iter().all(Option::is_some)
    }

    pub fn ensure_connected(&self) -> Result<()> {
        let unreachable: Vec<usize> = self
            .root_distances()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_none())
            .map(|(j, _)| j)
            .collect();
        if unreachable.is_empty() {
            Ok(())
        } else {
            Err(Error::Graph(format!(
                "graph is disconnected: joints {unreachable:?} are unreachable from root {}",
                self.root_joint
            )))
        }
    }
}
