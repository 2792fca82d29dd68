pub mod constituency;
pub mod dependency;
pub mod formats;
pub mod graph;
pub mod propbank;
pub mod script;
pub mod tree;

pub use graph::{Anchor, AnchorId, AnnotationGraph, Arc, ArcId, ArcType, Fields, GraphError};
pub use tree::TreeNode;
