//! Dilated convolutional spatial propagation.
//!
//! Each iteration updates every pixel `i` as
//!
//! ```text
//! D[t+1](i) = W_ii * D[0](i) + sum_x A_x(i) * D[t](i + rate * x)
//! ```
//!
//! where the self weight `W_ii` is one minus the in-bounds neighbor weights
//! of pixel `i`. Neighbors falling outside the grid contribute nothing and
//! their weight moves to the self term, so a normalized field always yields a
//! convex combination.
//!
//! Two implementations compute the same recurrence:
//!
//! * [`propagate_naive`] visits pixels one by one and gathers their
//!   neighbors with per-neighbor bounds checks.
//! * [`propagate_accelerated`] works a plane at a time. For each neighbor
//!   offset the previous state is translated by `rate * x` (zero fill, see
//!   [`translate`]) and multiplied into the matching affinity plane. Affinity
//!   planes are stored aligned to the receiving pixel, so the affinity side
//!   of the translation is the identity and only its border mask remains,
//!   which is folded into a per-phase self-weight plane.
//!
//! Both accumulate in `f64` in the same order, so their outputs agree to the
//! bit on every input.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affinity::{AffinityField, NeighborOffset};
use crate::error::{Error, Result};
use crate::grid::{ensure_same_shape, DepthGrid, ScalarPlane};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub rate: usize,
    pub iterations: usize,
}

/// Ordered `(dilation rate, iteration count)` phases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DilationSchedule {
    phases: Vec<Phase>,
}

impl DilationSchedule {
    pub fn new(phases: Vec<Phase>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Schedule("at least one phase is required".into()));
        }
        for p in &phases {
            if p.rate == 0 || p.iterations == 0 {
                return Err(Error::Schedule(format!(
                    "rate and iterations must be positive, got ({}, {})",
                    p.rate, p.iterations
                )));
            }
        }
        if phases.windows(2).any(|w| w[1].rate > w[0].rate) {
            log::warn!("dilation rates increase within schedule {phases:?}");
        }
        Ok(Self { phases })
    }

    pub fn single(rate: usize, iterations: usize) -> Result<Self> {
        Self::new(vec![Phase { rate, iterations }])
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn total_iterations(&self) -> usize {
        self.phases.iter().map(|p| p.iterations).sum()
    }
}

impl fmt::Display for DilationSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .phases
            .iter()
            .map(|p| format!("{}x{}", p.rate, p.iterations))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// The dilation variants: constant rate 1, then 2→1, then 4→2→1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScheduleVariant {
    C1,
    C2,
    C4,
}

impl ScheduleVariant {
    pub fn rates(self) -> &'static [usize] {
        match self {
            ScheduleVariant::C1 => &[1],
            ScheduleVariant::C2 => &[2, 1],
            ScheduleVariant::C4 => &[4, 2, 1],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleVariant::C1 => "c1",
            ScheduleVariant::C2 => "c2",
            ScheduleVariant::C4 => "c4",
        }
    }
}

impl fmt::Display for ScheduleVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScheduleVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c1" => Ok(ScheduleVariant::C1),
            "c2" => Ok(ScheduleVariant::C2),
            "c4" => Ok(ScheduleVariant::C4),
            other => Err(Error::Schedule(format!(
                "unknown schedule '{other}', expected c1, c2 or c4"
            ))),
        }
    }
}

/// Splits `total_iterations` evenly over the variant's rates; any remainder
/// goes to the earliest phases.
pub fn schedule_c(variant: ScheduleVariant, total_iterations: usize) -> Result<DilationSchedule> {
    let rates = variant.rates();
    if total_iterations < rates.len() {
        return Err(Error::Schedule(format!(
            "{variant} needs at least {} iterations, got {total_iterations}",
            rates.len()
        )));
    }
    let base = total_iterations / rates.len();
    let extra = total_iterations % rates.len();
    DilationSchedule::new(
        rates
            .iter()
            .enumerate()
            .map(|(i, &rate)| Phase {
                rate,
                iterations: base + usize::from(i < extra),
            })
            .collect(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropagationConfig {
    pub schedule: DilationSchedule,
    /// When set, every pixel valid in this grid is reset to its value after
    /// each iteration.
    pub anchor: Option<DepthGrid>,
}

impl PropagationConfig {
    pub fn new(schedule: DilationSchedule) -> Self {
        Self {
            schedule,
            anchor: None,
        }
    }

    pub fn with_anchor(mut self, sparse: DepthGrid) -> Self {
        self.anchor = Some(sparse);
        self
    }

    pub fn anchors(&self) -> bool {
        self.anchor.is_some()
    }
}

/// Which propagation kernel to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Implementation {
    Naive,
    Accelerated,
}

impl Implementation {
    pub fn name(self) -> &'static str {
        match self {
            Implementation::Naive => "naive",
            Implementation::Accelerated => "accelerated",
        }
    }

    pub fn run(
        self,
        d0: &DepthGrid,
        field: &AffinityField,
        cfg: &PropagationConfig,
    ) -> Result<DepthGrid> {
        match self {
            Implementation::Naive => propagate_naive(d0, field, cfg),
            Implementation::Accelerated => propagate_accelerated(d0, field, cfg),
        }
    }
}

impl fmt::Display for Implementation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Implementation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Implementation::Naive),
            "accelerated" | "accel" => Ok(Implementation::Accelerated),
            other => Err(format!("unknown implementation '{other}'")),
        }
    }
}

/// Column/row bookkeeping for reading `src(p + shift)` into `dst(p)`.
#[derive(Clone, Copy, Debug)]
struct Shift {
    dy: isize,
    dx: isize,
}

impl Shift {
    fn new(offset: NeighborOffset, rate: usize) -> Self {
        Self {
            dy: offset.dy as isize * rate as isize,
            dx: offset.dx as isize * rate as isize,
        }
    }

    /// Source row feeding destination `row`, if inside the grid.
    #[inline]
    fn source_row(&self, row: usize, height: usize) -> Option<usize> {
        let r = row as isize + self.dy;
        (r >= 0 && r < height as isize).then_some(r as usize)
    }

    /// Destination columns `[lo, hi)` whose source column is inside the grid.
    #[inline]
    fn column_span(&self, width: usize) -> (usize, usize) {
        let w = width as isize;
        let lo = (-self.dx).clamp(0, w);
        let hi = (w - self.dx).clamp(0, w);
        (lo as usize, hi.max(lo) as usize)
    }
}

/// `out(p) = plane(p + rate * offset)`, zero where the source falls outside.
pub fn translate(plane: &ScalarPlane, offset: NeighborOffset, rate: usize) -> ScalarPlane {
    let (h, w) = plane.shape();
    let shift = Shift::new(offset, rate);
    let (lo, hi) = shift.column_span(w);
    let mut out = vec![0.0f32; h * w];
    for (row, dst) in out.chunks_mut(w).enumerate() {
        if let Some(src_row) = shift.source_row(row, h) {
            if lo < hi {
                let src = plane.row(src_row);
                let s_lo = (lo as isize + shift.dx) as usize;
                dst[lo..hi].copy_from_slice(&src[s_lo..s_lo + (hi - lo)]);
            }
        }
    }
    ScalarPlane::from_vec_unchecked(h, w, out)
}

fn validate(d0: &DepthGrid, state: &DepthGrid, field: &AffinityField, cfg: &PropagationConfig) -> Result<()> {
    ensure_same_shape("propagation depth vs affinity", d0.shape(), field.shape())?;
    ensure_same_shape("propagation state vs initial depth", d0.shape(), state.shape())?;
    if let Some(anchor) = &cfg.anchor {
        ensure_same_shape("propagation anchor", d0.shape(), anchor.shape())?;
    }
    field.check_normalized()
}

/// `(index, value)` of every valid anchor pixel.
fn anchor_points(cfg: &PropagationConfig) -> Vec<(usize, f32)> {
    cfg.anchor
        .as_ref()
        .map(|a| {
            a.values()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(i, &v)| (i, v))
                .collect()
        })
        .unwrap_or_default()
}

/// Reference per-pixel propagation.
pub fn propagate_naive(d0: &DepthGrid, field: &AffinityField, cfg: &PropagationConfig) -> Result<DepthGrid> {
    propagate_naive_from(d0, d0, field, cfg)
}

/// Runs the schedule starting from `state` as the current iterate while the
/// self term keeps referencing `d0`.
pub fn propagate_naive_from(
    d0: &DepthGrid,
    state: &DepthGrid,
    field: &AffinityField,
    cfg: &PropagationConfig,
) -> Result<DepthGrid> {
    validate(d0, state, field, cfg)?;
    let (h, w) = d0.shape();
    let anchors = anchor_points(cfg);
    let mut current = state.values().to_vec();
    let mut next = vec![0.0f32; h * w];

    for phase in cfg.schedule.phases() {
        let rate = phase.rate as i64;
        for _ in 0..phase.iterations {
            for row in 0..h {
                for col in 0..w {
                    let mut acc = 0.0f64;
                    let mut weight_sum = 0.0f64;
                    for (offset, plane) in field.iter() {
                        let r = row as i64 + rate * offset.dy as i64;
                        let c = col as i64 + rate * offset.dx as i64;
                        if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
                            continue;
                        }
                        let weight = plane.get(row, col) as f64;
                        acc += weight * current[r as usize * w + c as usize] as f64;
                        weight_sum += weight;
                    }
                    let self_weight = (1.0 - weight_sum).max(0.0);
                    acc += self_weight * d0.get(row, col) as f64;
                    next[row * w + col] = acc as f32;
                }
            }
            for &(i, v) in &anchors {
                next[i] = v;
            }
            std::mem::swap(&mut current, &mut next);
        }
    }
    Ok(DepthGrid::from_vec_unchecked(h, w, current))
}

/// Plane-level propagation; same result as [`propagate_naive`].
pub fn propagate_accelerated(
    d0: &DepthGrid,
    field: &AffinityField,
    cfg: &PropagationConfig,
) -> Result<DepthGrid> {
    propagate_accelerated_from(d0, d0, field, cfg)
}

/// Per-phase precomputation: shifts for each neighbor and the self weight
/// after folding in the weights of out-of-bounds neighbors.
struct PhasePlan {
    shifts: Vec<Shift>,
    self_weight: Vec<f64>,
}

impl PhasePlan {
    fn new(field: &AffinityField, rate: usize) -> Self {
        let (h, w) = field.shape();
        let shifts: Vec<Shift> = field.offsets().iter().map(|&o| Shift::new(o, rate)).collect();
        let mut self_weight = vec![0.0f64; h * w];
        self_weight
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(row, dst)| {
                for (shift, plane) in shifts.iter().zip(field.planes()) {
                    if shift.source_row(row, h).is_none() {
                        continue;
                    }
                    let (lo, hi) = shift.column_span(w);
                    for (s, &a) in dst[lo..hi].iter_mut().zip(&plane.row(row)[lo..hi]) {
                        *s += a as f64;
                    }
                }
                for s in dst.iter_mut() {
                    *s = (1.0 - *s).max(0.0);
                }
            });
        Self {
            shifts,
            self_weight,
        }
    }
}

pub fn propagate_accelerated_from(
    d0: &DepthGrid,
    state: &DepthGrid,
    field: &AffinityField,
    cfg: &PropagationConfig,
) -> Result<DepthGrid> {
    validate(d0, state, field, cfg)?;
    let (h, w) = d0.shape();
    let mut current = state.values().to_vec();
    let mut next = vec![0.0f32; h * w];
    let anchor = cfg.anchor.as_ref().map(|a| a.values());
    let planes = field.planes();

    for phase in cfg.schedule.phases() {
        let plan = PhasePlan::new(field, phase.rate);
        for _ in 0..phase.iterations {
            let prev = &current;
            next.par_chunks_mut(w).enumerate().for_each_init(
                || vec![0.0f64; w],
                |acc, (row, out)| {
                    acc.fill(0.0);
                    for (shift, plane) in plan.shifts.iter().zip(planes) {
                        let Some(src_row) = shift.source_row(row, h) else {
                            continue;
                        };
                        let (lo, hi) = shift.column_span(w);
                        if lo >= hi {
                            continue;
                        }
                        let s_lo = (lo as isize + shift.dx) as usize;
                        let src = &prev[src_row * w + s_lo..src_row * w + s_lo + (hi - lo)];
                        let weights = &plane.row(row)[lo..hi];
                        for ((a, &wt), &d) in acc[lo..hi].iter_mut().zip(weights).zip(src) {
                            *a += wt as f64 * d as f64;
                        }
                    }
                    let base = row * w;
                    let self_w = &plan.self_weight[base..base + w];
                    let d0_row = d0.row(row);
                    for (((o, &a), &sw), &d) in out.iter_mut().zip(acc.iter()).zip(self_w).zip(d0_row) {
                        *o = (a + sw * d as f64) as f32;
                    }
                    if let Some(anchor) = anchor {
                        for (o, &v) in out.iter_mut().zip(&anchor[base..base + w]) {
                            if v > 0.0 {
                                *o = v;
                            }
                        }
                    }
                },
            );
            std::mem::swap(&mut current, &mut next);
        }
    }
    Ok(DepthGrid::from_vec_unchecked(h, w, current))
}
