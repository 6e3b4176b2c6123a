//! Fixed-shape row-major planes shared by every stage of the pipeline.
//!
//! Planes are indexed `(row, col)` = `(v, u)`, with `u` running horizontally.
//! Values are stored as `f32`; reductions elsewhere use `f64` accumulators.
//! A depth of exactly `0.0` marks a pixel without a measurement.

use crate::error::{Error, Result, Shape};

fn check_shape(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyShape { height, width });
    }
    Ok(())
}

fn check_len(height: usize, width: usize, len: usize) -> Result<()> {
    check_shape(height, width)?;
    let expected = height * width;
    if len != expected {
        return Err(Error::LengthMismatch {
            height,
            width,
            expected,
            found: len,
        });
    }
    Ok(())
}

fn check_finite(width: usize, values: &[f32]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: i / width,
            col: i % width,
            value: values[i],
        });
    }
    Ok(())
}

/// A finite-valued real plane (confidences, affinities, coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarPlane {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ScalarPlane {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        check_len(height, width, values.len())?;
        check_finite(width, &values)?;
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, fill: f32) -> Result<Self> {
        check_shape(height, width)?;
        Self::new(height, width, vec![fill; height * width])
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::filled(height, width, 0.0)
    }

    /// Builds a plane by evaluating `f(row, col)` at every pixel.
    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        check_shape(height, width)?;
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self::new(height, width, values)
    }

    /// Wraps values that are finite by construction.
    pub(crate) fn from_vec_unchecked(height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.width..(row + 1) * self.width]
    }
}

/// Dense depth in meters. Every value is finite and non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthGrid {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl DepthGrid {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        check_len(height, width, values.len())?;
        check_finite(width, &values)?;
        if let Some(i) = values.iter().position(|&v| v < 0.0) {
            return Err(Error::NegativeDepth {
                row: i / width,
                col: i % width,
                value: values[i],
            });
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    /// A `height x width` grid with every pixel set to `fill`.
    pub fn filled(height: usize, width: usize, fill: f32) -> Result<Self> {
        check_shape(height, width)?;
        Self::new(height, width, vec![fill; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f32,
    ) -> Result<Self> {
        check_shape(height, width)?;
        let mut values = Vec::with_capacity(height * width);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self::new(height, width, values)
    }

    pub(crate) fn from_vec_unchecked(height: usize, width: usize, values: Vec<f32>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            height,
            width,
            values,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> Shape {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub fn valid_mask(&self) -> Mask {
        Mask {
            height: self.height,
            width: self.width,
            bits: self.values.iter().map(|&v| v > 0.0).collect(),
        }
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.values
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn as_plane(&self) -> ScalarPlane {
        ScalarPlane::from_vec_unchecked(self.height, self.width, self.values.clone())
    }

    /// Densifies a sparse grid by growing valid pixels outward ring by ring.
    ///
    /// At each ring, an invalid pixel takes the value of its first valid
    /// 8-neighbor in `(dy, dx)` ascending order. A grid with no valid pixel
    /// comes back unchanged.
    pub fn fill_nearest_valid(&self) -> DepthGrid {
        const OFFSETS: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        let (h, w) = self.shape();
        let mut current = self.values.clone();
        let mut frontier: Vec<usize> = (0..current.len()).filter(|&i| current[i] == 0.0).collect();
        if frontier.len() == current.len() {
            return self.clone();
        }
        while !frontier.is_empty() {
            let mut updates = Vec::new();
            let mut remaining = Vec::new();
            for &i in &frontier {
                let (row, col) = ((i / w) as isize, (i % w) as isize);
                let found = OFFSETS.iter().find_map(|&(dy, dx)| {
                    let (r, c) = (row + dy, col + dx);
                    if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                        return None;
                    }
                    let v = current[r as usize * w + c as usize];
                    (v > 0.0).then_some(v)
                });
                match found {
                    Some(v) => updates.push((i, v)),
                    None => remaining.push(i),
                }
            }
            for (i, v) in updates {
                current[i] = v;
            }
            frontier = remaining;
        }
        DepthGrid::from_vec_unchecked(h, w, current)
    }
}

impl TryFrom<ScalarPlane> for DepthGrid {
    type Error = Error;

    fn try_from(plane: ScalarPlane) -> Result<Self> {
        let (h, w) = plane.shape();
        DepthGrid::new(h, w, plane.into_values())
    }
}

/// Convenience constructor mirroring [`DepthGrid::filled`].
pub fn make_grid(height: usize, width: usize, fill: f32) -> Result<DepthGrid> {
    DepthGrid::filled(height, width, fill)
}

/// Validity bits, set exactly where the source depth is positive.
pub fn valid_mask(depth: &DepthGrid) -> Mask {
    depth.valid_mask()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        check_len(height, width, bits.len())?;
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn shape(&self) -> Shape {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

pub(crate) fn ensure_same_shape(context: &'static str, left: Shape, right: Shape) -> Result<()> {
    if left != right {
        return Err(Error::ShapeMismatch {
            context,
            left,
            right,
        });
    }
    Ok(())
}
