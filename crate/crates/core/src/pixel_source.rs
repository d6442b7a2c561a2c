//! Source images, segment maps and bit-plane decomposition.
//!
//! Pixel values are stored as `u16` so that any bit depth up to 16 fits, but
//! the image loaders only accept 8-bit rasters. Bit planes are indexed from
//! `1` (least significant) to `B` (most significant), so that a pixel equals
//! `sum_b plane_b * 2^(b-1)`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// An `H x W x C` raster of unsigned pixel values with `B` bits per channel.
///
/// Samples are stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMatrix {
    height: usize,
    width: usize,
    channels: usize,
    bit_depth: u8,
    data: Vec<u16>,
}

impl PixelMatrix {
    pub fn new(height: usize, width: usize, channels: usize, bit_depth: u8, data: Vec<u16>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::UnsupportedImage("zero channels".into()));
        }
        if bit_depth == 0 || bit_depth > 16 {
            return Err(Error::UnsupportedImage(format!("bit depth {bit_depth} outside 1..=16")));
        }
        if data.len() != height * width * channels {
            return Err(Error::UnsupportedImage(format!(
                "{} samples for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        let max = max_value(bit_depth);
        if let Some(v) = data.iter().find(|&&v| u32::from(v) > max) {
            return Err(Error::UnsupportedImage(format!(
                "sample {v} exceeds {bit_depth}-bit range"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            bit_depth,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize, bit_depth: u8) -> Self {
        Self::new(height, width, channels, bit_depth, vec![0; height * width * channels])
            .expect("zero image is always valid")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    /// Number of pixels `I = H * W`.
    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u16 {
        self.data[(row * self.width + col) * self.channels + channel]
    }

    /// Sample at linear pixel index `pixel = row * W + col`.
    #[inline]
    pub fn get_linear(&self, pixel: usize, channel: usize) -> u16 {
        self.data[pixel * self.channels + channel]
    }

    #[inline]
    pub fn set_linear(&mut self, pixel: usize, channel: usize, value: u16) {
        debug_assert!(u32::from(value) <= max_value(self.bit_depth));
        self.data[pixel * self.channels + channel] = value;
    }

    /// Copies one channel out as a single-channel matrix.
    pub fn channel(&self, channel: usize) -> PixelMatrix {
        let data = (0..self.pixel_count()).map(|p| self.get_linear(p, channel)).collect();
        PixelMatrix {
            height: self.height,
            width: self.width,
            channels: 1,
            bit_depth: self.bit_depth,
            data,
        }
    }

    /// Interleaves single-channel matrices of equal shape.
    pub fn from_channels(planes: &[PixelMatrix]) -> Result<PixelMatrix> {
        let first = planes
            .first()
            .ok_or_else(|| Error::UnsupportedImage("no channels".into()))?;
        let mut data = Vec::with_capacity(first.pixel_count() * planes.len());
        for p in planes {
            if p.dims() != first.dims() {
                return Err(Error::DimensionMismatch {
                    expected: first.dims(),
                    found: p.dims(),
                });
            }
            if p.channels != 1 || p.bit_depth != first.bit_depth {
                return Err(Error::UnsupportedImage(
                    "channels must be single-channel with equal bit depth".into(),
                ));
            }
        }
        for pixel in 0..first.pixel_count() {
            data.extend(planes.iter().map(|p| p.data[pixel]));
        }
        PixelMatrix::new(first.height, first.width, planes.len(), first.bit_depth, data)
    }

    /// `||I_c||^2 / I` for one channel.
    pub fn mean_square(&self, channel: usize) -> f64 {
        let sum: f64 = (0..self.pixel_count())
            .map(|p| {
                let v = f64::from(self.get_linear(p, channel));
                v * v
            })
            .sum();
        sum / self.pixel_count() as f64
    }
}

#[inline]
pub(crate) fn max_value(bit_depth: u8) -> u32 {
    (1u32 << bit_depth) - 1
}

/// Loads an 8-bit grayscale or RGB raster.
pub fn load_image(path: impl AsRef<Path>) -> Result<PixelMatrix> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::ImageRead {
        path: path.to_path_buf(),
        source,
    })?;
    from_dynamic(img)
}

fn from_dynamic(img: DynamicImage) -> Result<PixelMatrix> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(buf) => {
            PixelMatrix::new(h, w, 1, 8, buf.into_raw().into_iter().map(u16::from).collect())
        }
        DynamicImage::ImageRgb8(buf) => {
            PixelMatrix::new(h, w, 3, 8, buf.into_raw().into_iter().map(u16::from).collect())
        }
        other => Err(Error::UnsupportedImage(format!(
            "expected 8-bit grayscale or RGB, found {:?}",
            other.color()
        ))),
    }
}

/// Writes an 8-bit grayscale or RGB matrix as PNG.
pub fn save_image(pixels: &PixelMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if pixels.bit_depth != 8 {
        return Err(Error::UnsupportedImage(format!(
            "can only write 8-bit images, found {} bits",
            pixels.bit_depth
        )));
    }
    let (w, h) = (pixels.width as u32, pixels.height as u32);
    let raw: Vec<u8> = pixels.data.iter().map(|&v| v as u8).collect();
    let result = match pixels.channels {
        1 => ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save(path),
        3 => ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw)
            .expect("buffer length matches dimensions")
            .save(path),
        c => return Err(Error::UnsupportedImage(format!("cannot write {c}-channel image"))),
    };
    result.map_err(|source| Error::ImageWrite {
        path: path.to_path_buf(),
        source,
    })
}

/// Resamples an 8-bit image with a triangle filter.
pub fn resize_image(pixels: &PixelMatrix, width: usize, height: usize) -> Result<PixelMatrix> {
    if (pixels.width, pixels.height) == (width, height) {
        return Ok(pixels.clone());
    }
    if pixels.bit_depth != 8 {
        return Err(Error::UnsupportedImage("can only resample 8-bit images".into()));
    }
    let raw: Vec<u8> = pixels.data.iter().map(|&v| v as u8).collect();
    let (w, h) = (pixels.width as u32, pixels.height as u32);
    let filter = image::imageops::FilterType::Triangle;
    let out: Vec<u8> = match pixels.channels {
        1 => image::imageops::resize(
            &ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer length matches dimensions"),
            width as u32,
            height as u32,
            filter,
        )
        .into_raw(),
        3 => image::imageops::resize(
            &ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, raw).expect("buffer length matches dimensions"),
            width as u32,
            height as u32,
            filter,
        )
        .into_raw(),
        c => return Err(Error::UnsupportedImage(format!("cannot resample {c}-channel image"))),
    };
    PixelMatrix::new(
        height,
        width,
        pixels.channels,
        8,
        out.into_iter().map(u16::from).collect(),
    )
}

/// Semantic segmentation of an image into `S` labelled regions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    pixel_counts: Vec<usize>,
    original_labels: Vec<u32>,
}

impl SegmentMap {
    /// Builds a map from arbitrary integer labels, relabelling them to
    /// `0..S` in ascending order of the original label.
    pub fn from_raw_labels(height: usize, width: usize, raw: &[u32]) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::SegmentMap(format!(
                "{} labels for a {height}x{width} map",
                raw.len()
            )));
        }
        if raw.is_empty() {
            return Err(Error::SegmentMap("empty segment map".into()));
        }
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &l in raw {
            *counts.entry(l).or_default() += 1;
        }
        let original_labels: Vec<u32> = counts.keys().copied().collect();
        let pixel_counts: Vec<usize> = counts.values().copied().collect();
        let index: BTreeMap<u32, u32> = original_labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i as u32))
            .collect();
        let labels = raw.iter().map(|l| index[l]).collect();
        Ok(Self {
            height,
            width,
            labels,
            pixel_counts,
            original_labels,
        })
    }

    /// A single segment covering the whole image.
    pub fn uniform(height: usize, width: usize) -> Self {
        Self::from_raw_labels(height, width, &vec![0; height * width]).expect("nonempty uniform map")
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Nearest-neighbour resampling. Fails if a segment disappears.
    pub fn resized(&self, width: usize, height: usize) -> Result<Self> {
        if (self.width, self.height) == (width, height) {
            return Ok(self.clone());
        }
        let raw: Vec<u32> = (0..height)
            .flat_map(|y| {
                let sy = (y * self.height + self.height / 2) / height;
                (0..width).map(move |x| (sy, (x * self.width + self.width / 2) / width))
            })
            .map(|(sy, sx)| {
                self.original_labels
                    [self.labels[sy.min(self.height - 1) * self.width + sx.min(self.width - 1)] as usize]
            })
            .collect();
        let out = Self::from_raw_labels(height, width, &raw)?;
        if out.segment_count() != self.segment_count() {
            return Err(Error::SegmentMap(format!(
                "resampling to {width}x{height} removed {} segment(s)",
                self.segment_count() - out.segment_count()
            )));
        }
        Ok(out)
    }

    pub fn segment_count(&self) -> usize {
        self.pixel_counts.len()
    }

    /// `I_s` for every segment.
    pub fn pixel_counts(&self) -> &[usize] {
        &self.pixel_counts
    }

    /// Contiguous labels `0..S`, row-major.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, pixel: usize) -> usize {
        self.labels[pixel] as usize
    }

    /// Label values as they appeared in the source file.
    pub fn original_labels(&self) -> &[u32] {
        &self.original_labels
    }

    /// Row-major linear pixel indices of every segment.
    pub fn segment_pixels(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self.pixel_counts.iter().map(|&n| Vec::with_capacity(n)).collect();
        for (p, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(p as u32);
        }
        out
    }

    pub fn check_dims(&self, dims: (usize, usize)) -> Result<()> {
        if self.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

/// Loads a segment map from a CSV of integer labels (`.csv`/`.txt`) or an
/// 8-bit grayscale or indexed PNG, and checks it against `dims = (H, W)`.
pub fn load_segment_map(path: impl AsRef<Path>, dims: (usize, usize)) -> Result<SegmentMap> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let (h, w, raw) = match ext.as_deref() {
        Some("csv") | Some("txt") => read_label_csv(BufReader::new(File::open(path)?))?,
        _ => read_label_png(path)?,
    };
    if (h, w) != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            found: (h, w),
        });
    }
    SegmentMap::from_raw_labels(h, w, &raw)
}

fn read_label_csv(reader: impl BufRead) -> Result<(usize, usize, Vec<u32>)> {
    let mut labels = Vec::new();
    let mut width = None;
    let mut height = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<u32> = line
            .split(',')
            .map(|f| {
                f.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::SegmentMap(format!("line {}: bad label {f:?}: {e}", n + 1)))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::SegmentMap(format!(
                    "line {}: {} labels, expected {w}",
                    n + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        labels.extend(row);
        height += 1;
    }
    Ok((height, width.unwrap_or(0), labels))
}

fn read_label_png(path: &Path) -> Result<(usize, usize, Vec<u32>)> {
    let bad = |msg: String| Error::SegmentMap(format!("{}: {msg}", path.display()));
    let mut decoder = png::Decoder::new(BufReader::new(File::open(path)?));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let mut buf = vec![
        0;
        reader
            .output_buffer_size()
            .ok_or_else(|| bad("image too large".into()))?
    ];
    let info = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(bad(format!("expected 8-bit labels, found {:?}", info.bit_depth)));
    }
    match info.color_type {
        png::ColorType::Grayscale | png::ColorType::Indexed => {}
        other => return Err(bad(format!("expected grayscale or indexed PNG, found {other:?}"))),
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut labels = Vec::with_capacity(w * h);
    for row in buf.chunks(info.line_size).take(h) {
        labels.extend(row[..w].iter().map(|&v| u32::from(v)));
    }
    Ok((h, w, labels))
}

/// Writes contiguous labels as an 8-bit grayscale PNG (at most 256 segments).
pub fn save_segment_map(map: &SegmentMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if map.segment_count() > 256 {
        return Err(Error::SegmentMap("more than 256 segments".into()));
    }
    let raw: Vec<u8> = map.labels.iter().map(|&l| l as u8).collect();
    ImageBuffer::<Luma<u8>, _>::from_raw(map.width as u32, map.height as u32, raw)
        .expect("buffer length matches dimensions")
        .save(path)
        .map_err(|source| Error::ImageWrite {
            path: path.to_path_buf(),
            source,
        })
}

/// One binary plane `B_b` of a single channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    pub plane_index: u8,
    pub height: usize,
    pub width: usize,
    pub bits: Vec<u8>,
}

/// Extracts plane `b` (1 = least significant) of `channel`.
pub fn bit_plane(pixels: &PixelMatrix, channel: usize, b: usize) -> Result<BitPlane> {
    if b == 0 || b > usize::from(pixels.bit_depth) {
        return Err(Error::PlaneOutOfRange {
            plane: b,
            bit_depth: pixels.bit_depth,
        });
    }
    let shift = b - 1;
    let bits = (0..pixels.pixel_count())
        .map(|p| ((pixels.get_linear(p, channel) >> shift) & 1) as u8)
        .collect();
    Ok(BitPlane {
        plane_index: b as u8,
        height: pixels.height,
        width: pixels.width,
        bits,
    })
}

/// Rebuilds a single-channel matrix from its `B` planes, `I = sum_b B_b 2^(b-1)`.
pub fn assemble_pixels(planes: &[BitPlane]) -> Result<PixelMatrix> {
    let first = planes
        .first()
        .ok_or_else(|| Error::BitPlanes("no planes given".into()))?;
    let depth = planes.len();
    if depth > 16 {
        return Err(Error::BitPlanes(format!("{depth} planes exceed 16 bits")));
    }
    let mut seen = vec![false; depth];
    for p in planes {
        if (p.height, p.width) != (first.height, first.width) {
            return Err(Error::DimensionMismatch {
                expected: (first.height, first.width),
                found: (p.height, p.width),
            });
        }
        let idx = usize::from(p.plane_index);
        if idx == 0 || idx > depth {
            return Err(Error::BitPlanes(format!("plane index {idx} outside 1..={depth}")));
        }
        if std::mem::replace(&mut seen[idx - 1], true) {
            return Err(Error::BitPlanes(format!("duplicate plane index {idx}")));
        }
        if p.bits.len() != p.height * p.width || p.bits.iter().any(|&b| b > 1) {
            return Err(Error::BitPlanes(format!("plane {idx} is not binary H x W")));
        }
    }
    let mut data = vec![0u16; first.height * first.width];
    for p in planes {
        let shift = p.plane_index - 1;
        for (v, &bit) in data.iter_mut().zip(&p.bits) {
            *v |= u16::from(bit) << shift;
        }
    }
    PixelMatrix::new(first.height, first.width, 1, depth as u8, data)
}
