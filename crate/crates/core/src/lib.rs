//! Depth completion refinement building blocks.
//!
//! * [`fusion`] blends two dense predictions with per-pixel confidence logits.
//! * [`geometry`] back-projects depth into camera-frame position maps and
//!   builds min-pooled depth pyramids.
//! * [`affinity`] holds, normalizes and synthesizes propagation weights.
//! * [`propagation`] runs dilated spatial propagation, either pixel by pixel
//!   or plane by plane, optionally anchored to sparse measurements.
//! * [`metrics`] scores predictions against ground truth.
//! * [`io`] reads and writes depth PNGs, plane containers and calibration.
//! * [`bench`] times the two propagation kernels against each other.

pub mod affinity;
pub mod bench;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod propagation;

pub use affinity::{guided_affinity, neighbor_offsets, normalize, AffinityField, NeighborOffset};
pub use error::{Error, Result};
pub use fusion::{fuse, fusion_weights};
pub use geometry::{back_project, min_pool, scale_intrinsics, CameraIntrinsics, PositionMap};
pub use grid::{make_grid, valid_mask, DepthGrid, Mask, ScalarPlane};
pub use metrics::{evaluate, masked_l2, MetricReport};
pub use propagation::{
    propagate_accelerated, propagate_naive, schedule_c, translate, DilationSchedule, Implementation, Phase,
    PropagationConfig, ScheduleVariant,
};
