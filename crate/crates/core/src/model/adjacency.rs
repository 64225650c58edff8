use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonGraph;

/// Neighbourhood partitioning rule for graph convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionStrategy {
    /// Self / centripetal / centrifugal split by hop distance to the root.
    #[default]
    Spatial,
}

impl PartitionStrategy {
    pub fn partition_count(self) -> usize {
        match self {
            PartitionStrategy::Spatial => 3,
        }
    }
}

pub const SELF_PARTITION: usize = 0;
pub const CENTRIPETAL_PARTITION: usize = 1;
pub const CENTRIFUGAL_PARTITION: usize = 2;

/// `A + I` of the graph.
pub fn adjacency_with_loops(graph: &SkeletonGraph) -> Array2<f64> {
    let j = graph.joint_count();
    let mut a = Array2::eye(j);
    for &(u, v) in graph.edges() {
        a[[u, v]] = 1.0;
        a[[v, u]] = 1.0;
    }
    a
}

/// Partitioned, symmetrically normalized adjacency stack of shape `K x J x J`.
///
/// `D^-1/2 (A + I) D^-1/2` is split by comparing hop distances to the root:
/// entry `[k, v, w]` carries the weight with which joint `v` feeds joint `w`.
/// Partition 0 holds pairs at equal distance (including the diagonal),
/// partition 1 neighbours `v` closer to the root than `w` (centripetal) and
/// partition 2 neighbours farther from it (centrifugal).
pub fn normalized_adjacency(graph: &SkeletonGraph, strategy: PartitionStrategy) -> Result<Array3<f64>> {
    graph.ensure_connected()?;
    let dist: Vec<usize> = graph
        .root_distances()
        .into_iter()
        .map(|d| d.ok_or_else(|| Error::Graph("unreachable joint".into())))
        .collect::<Result<_>>()?;
    let a = adjacency_with_loops(graph);
    let j = graph.joint_count();
    let degree: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();

    let mut out = Array3::zeros((strategy.partition_count(), j, j));
    for v in 0..j {
        for w in 0..j {
            if a[[v, w]] == 0.0 {
                continue;
            }
            let value = a[[v, w]] / (degree[v] * degree[w]).sqrt();
            let k = match dist[v].cmp(&dist[w]) {
                std::cmp::Ordering::Equal => SELF_PARTITION,
                std::cmp::Ordering::Less => CENTRIPETAL_PARTITION,
                std::cmp::Ordering::Greater => CENTRIFUGAL_PARTITION,
            };
            out[[k, v, w]] = value;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_joint_chain_by_hand() {
        let g = SkeletonGraph::chain(2).unwrap();
        let a = normalized_adjacency(&g, PartitionStrategy::Spatial).unwrap();
        // Both joints have degree 2 in A + I, so every normalized entry is 1/2.
        assert_eq!(a.index_axis(ndarray::Axis(0), SELF_PARTITION), ndarray::arr2(&[[0.5, 0.0], [0.0, 0.5]]));
        assert_eq!(a[[CENTRIPETAL_PARTITION, 0, 1]], 0.5);
        assert_eq!(a[[CENTRIFUGAL_PARTITION, 1, 0]], 0.5);
        assert_eq!(a[[CENTRIPETAL_PARTITION, 1, 0]], 0.0);
        assert_eq!(a[[CENTRIFUGAL_PARTITION, 0, 1]], 0.0);
    }

    #[test]
    fn partitions_cover_a_plus_i() {
        for g in [SkeletonGraph::kinect_v2(), SkeletonGraph::uiprmd_kinect(), SkeletonGraph::chain(7).unwrap()] {
            let a = normalized_adjacency(&g, PartitionStrategy::Spatial).unwrap();
            let full = adjacency_with_loops(&g);
            let j = g.joint_count();
            for v in 0..j {
                for w in 0..j {
                    let hits = (0..3).filter(|&k| a[[k, v, w]] != 0.0).count();
                    assert_eq!(hits, full[[v, w]] as usize);
                    assert!((0..3).all(|k| a[[k, v, w]] >= 0.0));
                }
            }
        }
    }

    #[test]
    fn kinect_support_counts() {
        let g = SkeletonGraph::kinect_v2();
        let a = normalized_adjacency(&g, PartitionStrategy::Spatial).unwrap();
        assert_eq!(a.dim(), (3, 25, 25));
        let support = |k: usize| a.index_axis(ndarray::Axis(0), k).iter().filter(|v| **v != 0.0).count();
        // A tree has no equal-distance edges: the self partition is the diagonal
        // and each of the 24 edges appears once in each directed partition.
        assert_eq!(support(SELF_PARTITION), 25);
        assert_eq!(support(CENTRIPETAL_PARTITION), 24);
        assert_eq!(support(CENTRIFUGAL_PARTITION), 24);
    }

    #[test]
    fn disconnected_graph_errors() {
        let g = SkeletonGraph::new(3, vec![(0, 1)], 0).unwrap();
        assert!(matches!(
            normalized_adjacency(&g, PartitionStrategy::Spatial),
            Err(Error::Graph(_))
        ));
    }
}
