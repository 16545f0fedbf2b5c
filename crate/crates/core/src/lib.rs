//! Deterministic point-cloud ray launching.
//!
//! The pipeline finds specular reflection and wedge diffraction paths between
//! transmitters and receivers directly in a labeled point cloud:
//!
//! 1. [`voxelgrid`] bins the cloud into a coarse voxel grid with a march
//!    distance field and subvoxel-bounded intersectable entities (IEs).
//! 2. [`tracer`] casts a ray at every IE from each transmitter, then
//!    propagates reflected and diffracted conical rays through the grid,
//!    collecting coarse path candidates.
//! 3. [`refine`] turns candidates into exact paths by minimising path length
//!    with surface reprojection, then removes duplicates.
//!
//! [`oracle`] provides an independent image-method reference for planar
//! scenes; [`pipeline`] and [`io`] wire everything to files.

pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod refine;
pub mod scene;
pub mod surface;
pub mod tracer;
pub mod voxelgrid;

pub use error::{Error, Result};
pub use glam::DVec3;
pub use scene::{DiffractionEdge, Label, LabeledPoint, Radio, RadioKind, Scene};
pub use voxelgrid::{VoxelGrid, VoxelizationParams};
