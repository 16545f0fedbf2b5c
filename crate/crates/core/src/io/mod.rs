//! File formats: point clouds, edge lists and path records.

pub mod edges;
pub mod paths;
pub mod ply;

pub use edges::{load_edges, parse_edges, write_edges};
pub use paths::{read_paths, write_paths, InteractionRecord, PathHeader, PathRecord};
pub use ply::{load_point_cloud, parse_point_cloud, write_point_cloud, PlyFormat};
