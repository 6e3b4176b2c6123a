//! File formats: 16-bit depth PNGs, the binary plane container, and KITTI
//! calibration text.
//!
//! Depth PNGs are single-channel 16-bit images storing `round(depth_m * 256)`
//! with 0 meaning "no measurement".
//!
//! The plane container is little-endian throughout:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PRFPLN\0\x01"
//! 8       4     height (u32)
//! 12      4     width (u32)
//! 16      4     plane count (u32)
//! 20      ...   planes, each height*width f32 values, row-major
//! ```
//!
//! Affinity fields are stored as containers whose planes follow the
//! neighbor order of [`neighbor_offsets`](crate::affinity::neighbor_offsets),
//! center omitted.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use crate::affinity::AffinityField;
use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::grid::{ensure_same_shape, DepthGrid, ScalarPlane};

pub const DEPTH_SCALE: f32 = 256.0;
/// Largest depth a 16-bit PNG can hold, `65535 / 256` meters.
pub const MAX_ENCODABLE_DEPTH: f32 = u16::MAX as f32 / DEPTH_SCALE;

pub const PLANE_MAGIC: [u8; 8] = *b"PRFPLN\x00\x01";
pub const PLANE_HEADER_LEN: usize = 20;

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Decodes a depth PNG held in memory; `origin` labels errors.
pub fn decode_depth_png(bytes: &[u8], origin: &Path) -> Result<DepthGrid> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| format_err(origin, format!("png decode: {e}")))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(format_err(
            origin,
            format!(
                "expected single-channel 16-bit depth png, found {:?} at {} bits",
                info.color_type, info.bit_depth as u8
            ),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| format_err(origin, "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| format_err(origin, format!("png decode: {e}")))?;
    let data = &buf[..frame.buffer_size()];
    let values = data
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]) as f32 / DEPTH_SCALE)
        .collect();
    DepthGrid::new(height, width, values)
}

pub fn read_depth_png(path: impl AsRef<Path>) -> Result<DepthGrid> {
    let path = path.as_ref();
    decode_depth_png(&read_bytes(path)?, path)
}

/// Quantizes a grid to raw 16-bit depth values.
pub fn quantize_depth(depth: &DepthGrid) -> Result<Vec<u16>> {
    let w = depth.width();
    depth
        .values()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let raw = (d * DEPTH_SCALE).round();
            if raw > u16::MAX as f32 {
                return Err(Error::DepthOutOfRange {
                    row: i / w,
                    col: i % w,
                    value: d,
                    max: MAX_ENCODABLE_DEPTH,
                });
            }
            Ok(raw as u16)
        })
        .collect()
}

pub fn encode_depth_png(depth: &DepthGrid) -> Result<Vec<u8>> {
    let raw = quantize_depth(depth)?;
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, depth.width() as u32, depth.height() as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Sixteen);
        let bytes: Vec<u8> = raw.iter().flat_map(|v| v.to_be_bytes()).collect();
        let encode_err = |e: png::EncodingError| format_err(Path::new("<png>"), format!("png encode: {e}"));
        let mut writer = encoder.write_header().map_err(encode_err)?;
        writer.write_image_data(&bytes).map_err(encode_err)?;
        writer.finish().map_err(encode_err)?;
    }
    Ok(out)
}

pub fn write_depth_png(depth: &DepthGrid, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_depth_png(depth)?)
}

/// Equal-shape planes stored together in one binary file.
#[derive(Clone, Debug, PartialEq)]
pub struct PlaneContainer {
    height: usize,
    width: usize,
    planes: Vec<ScalarPlane>,
}

impl PlaneContainer {
    pub fn new(planes: Vec<ScalarPlane>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Container("at least one plane is required".into()))?;
        for p in &planes[1..] {
            ensure_same_shape("plane container", first.shape(), p.shape())?;
        }
        let (height, width) = first.shape();
        if height > u32::MAX as usize || width > u32::MAX as usize || planes.len() > u32::MAX as usize {
            return Err(Error::Container("dimensions exceed u32".into()));
        }
        Ok(Self {
            height,
            width,
            planes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn planes(&self) -> &[ScalarPlane] {
        &self.planes
    }

    pub fn into_planes(self) -> Vec<ScalarPlane> {
        self.planes
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.height * self.width;
        let mut out = Vec::with_capacity(PLANE_HEADER_LEN + 4 * n * self.planes.len());
        out.extend_from_slice(&PLANE_MAGIC);
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.planes.len() as u32).to_le_bytes());
        for p in &self.planes {
            for v in p.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a container; `origin` labels errors.
    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let truncated = |expected: u64| Error::Truncated {
            path: origin.to_path_buf(),
            expected,
            found: bytes.len() as u64,
        };
        if bytes.len() < PLANE_HEADER_LEN {
            if !PLANE_MAGIC.starts_with(&bytes[..bytes.len().min(8)]) {
                return Err(format_err(origin, "bad magic, not a plane container"));
            }
            return Err(truncated(PLANE_HEADER_LEN as u64));
        }
        if bytes[..8] != PLANE_MAGIC {
            return Err(format_err(origin, "bad magic, not a plane container"));
        }
        let field = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as u64;
        let (height, width, count) = (field(8), field(12), field(16));
        if height == 0 || width == 0 || count == 0 {
            return Err(format_err(
                origin,
                format!("empty container header: {height}x{width}, {count} planes"),
            ));
        }
        let expected = (height as u128 * width as u128 * count as u128 * 4) + PLANE_HEADER_LEN as u128;
        let found = bytes.len() as u128;
        if found < expected {
            return Err(truncated(expected.min(u64::MAX as u128) as u64));
        }
        if found > expected {
            return Err(format_err(
                origin,
                format!("{} trailing bytes after declared planes", found - expected),
            ));
        }
        let (h, w) = (height as usize, width as usize);
        let planes = bytes[PLANE_HEADER_LEN..]
            .chunks_exact(4 * h * w)
            .enumerate()
            .map(|(k, chunk)| {
                let values = chunk
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                    .collect();
                ScalarPlane::new(h, w, values).map_err(|e| format_err(origin, format!("plane {k}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(planes)
    }
}

pub fn read_planes(path: impl AsRef<Path>) -> Result<PlaneContainer> {
    let path = path.as_ref();
    PlaneContainer::from_bytes(&read_bytes(path)?, path)
}

pub fn write_planes(container: &PlaneContainer, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &container.to_bytes())
}

/// Interprets a container as an affinity field; the kernel size follows from
/// the plane count (`k * k - 1`).
pub fn affinity_from_container(container: PlaneContainer) -> Result<AffinityField> {
    let count = container.plane_count();
    let k = ((count + 1) as f64).sqrt().round() as usize;
    if k * k != count + 1 {
        return Err(Error::Affinity(format!(
            "{count} planes do not form a square neighborhood without its center"
        )));
    }
    AffinityField::new(k, container.into_planes())
}

pub fn read_affinity(path: impl AsRef<Path>) -> Result<AffinityField> {
    affinity_from_container(read_planes(path)?)
}

pub fn write_affinity(field: &AffinityField, path: impl AsRef<Path>) -> Result<()> {
    write_planes(&PlaneContainer::new(field.planes().to_vec())?, path)
}

/// Reads a single-plane container.
pub fn read_scalar_plane(path: impl AsRef<Path>) -> Result<ScalarPlane> {
    let path = path.as_ref();
    let c = read_planes(path)?;
    if c.plane_count() != 1 {
        return Err(format_err(
            path,
            format!("expected exactly one plane, found {}", c.plane_count()),
        ));
    }
    Ok(c.into_planes().remove(0))
}

/// Extracts intrinsics from the `P2:` projection row of KITTI calibration text.
pub fn parse_kitti_calib(text: &str, origin: &Path) -> Result<CameraIntrinsics> {
    let calib_err = |message: String| Error::Calibration {
        path: PathBuf::from(origin),
        message,
    };
    let line = text
        .lines()
        .find(|l| l.split_whitespace().next() == Some("P2:"))
        .ok_or_else(|| calib_err("no P2 projection row".into()))?;
    let values = line
        .split_whitespace()
        .skip(1)
        .map(|t| t.parse::<f64>().map_err(|e| calib_err(format!("bad value '{t}': {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != 12 {
        return Err(calib_err(format!("P2 row has {} values, expected 12", values.len())));
    }
    CameraIntrinsics::new(values[0], values[5], values[2], values[6]).map_err(|e| calib_err(e.to_string()))
}

pub fn read_kitti_calib(path: impl AsRef<Path>) -> Result<CameraIntrinsics> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kitti_calib(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::normalize;

    fn origin() -> &'static Path {
        Path::new("test")
    }

    #[test]
    fn raw_depth_conversion() {
        let g = DepthGrid::new(1, 4, vec![0.0, 1.0, MAX_ENCODABLE_DEPTH, 2.5]).unwrap();
        assert_eq!(quantize_depth(&g).unwrap(), vec![0, 256, 65535, 640]);
        let back = decode_depth_png(&encode_depth_png(&g).unwrap(), origin()).unwrap();
        assert_eq!(back.values(), &[0.0, 1.0, 65535.0 / 256.0, 2.5]);
        assert!((back.get(0, 2) - 255.996).abs() < 1e-3);
    }

    #[test]
    fn out_of_range_depth_is_rejected() {
        let g = DepthGrid::new(1, 2, vec![1.0, 300.0]).unwrap();
        match encode_depth_png(&g) {
            Err(Error::DepthOutOfRange { col, max, .. }) => {
                assert_eq!(col, 1);
                assert_eq!(max, MAX_ENCODABLE_DEPTH);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_non_depth_pngs() {
        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 2);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0u8; 12]).unwrap();
        }
        let err = decode_depth_png(&bytes, origin()).unwrap_err();
        assert!(err.to_string().contains("16-bit"), "{err}");

        let mut bytes = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut bytes, 2, 2);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0u8; 4]).unwrap();
        }
        assert!(matches!(decode_depth_png(&bytes, origin()), Err(Error::Format { .. })));
        assert!(decode_depth_png(b"not a png", origin()).is_err());
    }

    fn container() -> PlaneContainer {
        PlaneContainer::new(vec![
            ScalarPlane::from_fn(2, 3, |r, c| r as f32 - c as f32 * 0.5).unwrap(),
            ScalarPlane::filled(2, 3, -1.25).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn container_layout_is_little_endian() {
        let bytes = container().to_bytes();
        assert_eq!(&bytes[..8], b"PRFPLN\0\x01");
        assert_eq!(&bytes[8..20], &[2, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 20 + 2 * 6 * 4);
        assert_eq!(&bytes[20 + 4..28], &(-0.5f32).to_le_bytes());
        assert_eq!(PlaneContainer::from_bytes(&bytes, origin()).unwrap(), container());
    }

    #[test]
    fn container_errors() {
        let bytes = container().to_bytes();
        assert!(matches!(
            PlaneContainer::from_bytes(&bytes[..bytes.len() - 1], origin()),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(PlaneContainer::from_bytes(&bytes[..10], origin()), Err(Error::Truncated { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(PlaneContainer::from_bytes(&bad, origin()), Err(Error::Format { .. })));
        let mut nan = bytes.clone();
        nan[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(PlaneContainer::from_bytes(&nan, origin()), Err(Error::Format { .. })));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(PlaneContainer::from_bytes(&long, origin()), Err(Error::Format { .. })));
        assert!(PlaneContainer::new(vec![]).is_err());
    }

    #[test]
    fn affinity_round_trip_infers_kernel() {
        let raw = AffinityField::new(
            5,
            (0..24)
                .map(|k| ScalarPlane::filled(3, 4, k as f32 * 0.01).unwrap())
                .collect(),
        )
        .unwrap();
        let field = normalize(&raw);
        let c = PlaneContainer::new(field.planes().to_vec()).unwrap();
        let back = affinity_from_container(PlaneContainer::from_bytes(&c.to_bytes(), origin()).unwrap()).unwrap();
        assert_eq!(back.kernel_size(), 5);
        assert_eq!(back, field);
        let odd = PlaneContainer::new(vec![ScalarPlane::zeros(1, 1).unwrap(); 7]).unwrap();
        assert!(affinity_from_container(odd).is_err());
    }

    #[test]
    fn kitti_projection_row() {
        let text = "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nP2: 721.5 0 609.6 44.9 0 721.5 172.9 0.2 0 0 1 0.003\n";
        let k = parse_kitti_calib(text, origin()).unwrap();
        assert_eq!((k.fx, k.u0, k.fy, k.v0), (721.5, 609.6, 721.5, 172.9));
    }

    #[test]
    fn kitti_calib_errors() {
        let missing = parse_kitti_calib("P0: 1 0 0 0 0 1 0 0 0 0 1 0\n", origin());
        assert!(matches!(missing, Err(Error::Calibration { .. })));
        let short = parse_kitti_calib("P2: 721.5 0 609.6\n", origin());
        assert!(matches!(short, Err(Error::Calibration { .. })));
        let zero = parse_kitti_calib("P2: 0 0 609.6 44.9 0 721.5 172.9 0.2 0 0 1 0.003", origin());
        assert!(matches!(zero, Err(Error::Calibration { .. })));
        let junk = parse_kitti_calib("P2: a 0 609.6 44.9 0 721.5 172.9 0.2 0 0 1 0.003", origin());
        assert!(matches!(junk, Err(Error::Calibration { .. })));
    }
}
