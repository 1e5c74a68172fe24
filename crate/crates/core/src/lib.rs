//! Headless part-based 3D construction for language agents.
//!
//! The crate is layered bottom-up:
//! - [`geometry`]: primitives, meshes, exact bounding boxes, OBJ export
//! - [`blenv`]: the construction environment with spatial feedback
//! - [`dsl`]: the coordinate language and per-axis majority voting
//! - [`gateway`]: chat-completion backends (HTTP, replay, scripted)
//! - [`agent`]: the part-by-part agent and its baselines
//! - [`render`] and [`eval`]: turntable rendering and judge-based evaluation

pub mod agent;
pub mod blenv;
pub mod dsl;
pub mod eval;
pub mod gateway;
pub mod geometry;
pub mod render;
pub mod scripted;

pub use geometry::{Aabb, Mesh, PrimitiveKind, PrimitiveSpec, Shape, Tessellation, Vec3};
