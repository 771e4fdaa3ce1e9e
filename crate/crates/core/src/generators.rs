//! Synthetic graph generators for fixtures, demos, and desk-scale
//! verification runs.

use crate::graph::{DualGraph, NodeRecord};

/// Node id for grid position (row, col).
pub fn grid_id(row: usize, col: usize) -> String {
    format!("r{row}c{col}")
}

/// Rectangular grid with unit populations and 4-neighbor adjacency. Node
/// order is row-major; a rows×cols grid has rows·(cols−1) + cols·(rows−1)
/// edges.
pub fn grid(rows: usize, cols: usize) -> DualGraph {
    grid_with(rows, cols, |r, c| NodeRecord::new(grid_id(r, c), 1))
}

/// Rectangular grid where each node record is produced by the caller; the
/// record's id is replaced with the canonical grid id.
pub fn grid_with(
    rows: usize,
    cols: usize,
    mut node: impl FnMut(usize, usize) -> NodeRecord,
) -> DualGraph {
    let mut nodes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut rec = node(r, c);
            rec.id = grid_id(r, c);
            nodes.push(rec);
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((grid_id(r, c), grid_id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((grid_id(r, c), grid_id(r + 1, c)));
            }
        }
    }
    DualGraph::new(nodes, edges).expect("grid construction is always valid")
}

/// Triangle graph: three mutually adjacent unit-population nodes.
pub fn triangle() -> DualGraph {
    let nodes = vec![
        NodeRecord::new("a", 1),
        NodeRecord::new("b", 1),
        NodeRecord::new("c", 1),
    ];
    let edges = vec![
        ("a".to_string(), "b".to_string()),
        ("b".to_string(), "c".to_string()),
        ("a".to_string(), "c".to_string()),
    ];
    DualGraph::new(nodes, edges).expect("triangle construction is always valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_edge_count_formula() {
        for rows in 1..=5 {
            for cols in 1..=5 {
                let g = grid(rows, cols);
                assert_eq!(g.node_count(), rows * cols);
                assert_eq!(g.edges().len(), rows * (cols - 1) + cols * (rows - 1));
            }
        }
    }

    #[test]
    fn grid_order_is_row_major() {
        let g = grid(2, 3);
        assert_eq!(g.node(0).id, "r0c0");
        assert_eq!(g.node(4).id, "r1c1");
    }
}
