//! Dataflow-graph IR and its rewrites.

pub mod fuse;
pub mod graph;
pub mod merge;
pub mod pattern;
pub mod subgraph;
pub mod text;

pub use fuse::{apply_fusion, find_match, fused_ops};
pub use graph::{Graph, GraphBuilder, GraphError, Node, NodeId, Op, ValueRef};
pub use merge::merge_redundant;
pub use pattern::{extract, FusedOp, Instance, PatArg, PatNode, PatOp, Pattern};
pub use subgraph::{enumerate_subgraphs, is_convex, reachability, NodeSet};
