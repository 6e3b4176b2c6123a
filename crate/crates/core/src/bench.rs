//! Timing harness comparing the naive and accelerated propagation kernels.
//!
//! Inputs are generated from a fixed seed, so repeated runs see identical
//! data. Only the propagation call is timed.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affinity::{normalize, neighbor_offsets, AffinityField};
use crate::error::{Error, Result};
use crate::grid::{DepthGrid, ScalarPlane};
use crate::propagation::{DilationSchedule, Implementation, PropagationConfig};

pub const MIN_RUNS: usize = 5;
pub const MIN_WARMUP: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOptions {
    pub runs: usize,
    pub warmup: usize,
    pub seed: u64,
    pub kernel_size: usize,
    /// Fraction of pixels carrying a sparse measurement used for anchoring.
    pub valid_fraction: f64,
    pub anchor: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            runs: MIN_RUNS,
            warmup: MIN_WARMUP,
            seed: 0x5eed_0d15,
            kernel_size: 3,
            valid_fraction: 0.05,
            anchor: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub label: String,
    /// `(height, width)`.
    pub grid_shape: (usize, usize),
    pub schedule: String,
    pub iterations: usize,
    pub median_seconds: f64,
    pub runs: usize,
}

/// One timed configuration together with the output it produced.
#[derive(Clone, Debug)]
pub struct BenchRun {
    pub result: BenchResult,
    pub output: DepthGrid,
}

/// Deterministic propagation inputs for a benchmark.
#[derive(Clone, Debug)]
pub struct BenchCase {
    pub coarse: DepthGrid,
    pub field: AffinityField,
    pub config: PropagationConfig,
}

impl BenchCase {
    pub fn generate(shape: (usize, usize), schedule: &DilationSchedule, opts: &BenchOptions) -> Result<Self> {
        let (h, w) = shape;
        if h < 8 || w < 8 {
            return Err(Error::Bench(format!("grid must be at least 8x8, got {h}x{w}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let coarse = DepthGrid::new(h, w, (0..h * w).map(|_| rng.random_range(1.0f32..80.0)).collect())?;
        let planes = neighbor_offsets(opts.kernel_size)?
            .iter()
            .map(|_| ScalarPlane::new(h, w, (0..h * w).map(|_| rng.random::<f32>()).collect()))
            .collect::<Result<Vec<_>>>()?;
        let field = normalize(&AffinityField::new(opts.kernel_size, planes)?);
        let mut config = PropagationConfig::new(schedule.clone());
        if opts.anchor {
            let sparse = (0..h * w)
                .map(|_| {
                    if rng.random_bool(opts.valid_fraction) {
                        rng.random_range(1.0f32..80.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            config = config.with_anchor(DepthGrid::new(h, w, sparse)?);
        }
        Ok(Self {
            coarse,
            field,
            config,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coarse.shape()
    }

    pub fn run(&self, imp: Implementation) -> Result<DepthGrid> {
        imp.run(&self.coarse, &self.field, &self.config)
    }

    /// Runs `opts.warmup` untimed and `opts.runs` timed propagations.
    pub fn time(&self, imp: Implementation, opts: &BenchOptions) -> Result<BenchRun> {
        if opts.runs < MIN_RUNS || opts.warmup < MIN_WARMUP {
            return Err(Error::Bench(format!(
                "need at least {MIN_RUNS} runs after {MIN_WARMUP} warmups, got {} after {}",
                opts.runs, opts.warmup
            )));
        }
        for _ in 0..opts.warmup {
            self.run(imp)?;
        }
        let mut samples = Vec::with_capacity(opts.runs);
        let mut output = None;
        for _ in 0..opts.runs {
            let start = Instant::now();
            let out = self.run(imp)?;
            samples.push(start.elapsed().as_secs_f64());
            output = Some(out);
        }
        Ok(BenchRun {
            result: BenchResult {
                label: imp.name().to_string(),
                grid_shape: self.shape(),
                schedule: self.config.schedule.to_string(),
                iterations: self.config.schedule.total_iterations(),
                median_seconds: median(&mut samples),
                runs: opts.runs,
            },
            output: output.expect("at least one timed run"),
        })
    }
}

pub fn run_bench(
    shape: (usize, usize),
    schedule: &DilationSchedule,
    imp: Implementation,
    opts: &BenchOptions,
) -> Result<BenchRun> {
    BenchCase::generate(shape, schedule, opts)?.time(imp, opts)
}

/// How many times faster `fast` ran than `slow`.
pub fn speedup(slow: &BenchResult, fast: &BenchResult) -> f64 {
    slow.median_seconds / fast.median_seconds
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}
