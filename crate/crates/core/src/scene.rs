//! Deterministic synthetic test scene: a stag statue on a stone base in
//! front of a sky and lawn, with its three-region segment map.

use crate::pixel_source::{PixelMatrix, SegmentMap};

/// Segment names in label order.
pub const SEGMENT_NAMES: [&str; 3] = ["stag", "base", "background"];

/// Segment weights used for the stag, base and background regions.
pub const SCENE_SEGMENT_WEIGHTS: [f64; 3] = [0.4975, 0.4975, 0.005];

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub pixels: PixelMatrix,
    pub segmap: SegmentMap,
}

fn hash_noise(x: usize, y: usize) -> f64 {
    let mut z = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z ^= z >> 29;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 32;
    (z & 0xFFFF) as f64 / 65535.0 - 0.5
}

fn segment_distance(px: f64, py: f64, (ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt()
}

/// Segment from `a` to `b` with a half width.
type Limb = ((f64, f64), (f64, f64), f64);

fn is_stag(u: f64, v: f64) -> bool {
    let body = ((u - 0.5) / 0.22).powi(2) + ((v - 0.45) / 0.11).powi(2) <= 1.0;
    let head = ((u - 0.72) / 0.055).powi(2) + ((v - 0.24) / 0.05).powi(2) <= 1.0;
    let limbs: [Limb; 11] = [
        // neck
        ((0.64, 0.40), (0.72, 0.25), 0.045),
        // legs
        ((0.35, 0.50), (0.34, 0.63), 0.022),
        ((0.42, 0.52), (0.43, 0.63), 0.022),
        ((0.58, 0.52), (0.57, 0.63), 0.022),
        ((0.65, 0.50), (0.66, 0.63), 0.022),
        // antlers
        ((0.70, 0.20), (0.62, 0.06), 0.012),
        ((0.74, 0.20), (0.84, 0.06), 0.012),
        ((0.65, 0.12), (0.58, 0.10), 0.010),
        ((0.80, 0.11), (0.88, 0.12), 0.010),
        ((0.63, 0.08), (0.66, 0.02), 0.009),
        ((0.83, 0.08), (0.80, 0.02), 0.009),
    ];
    body || head || limbs.iter().any(|&(a, b, r)| segment_distance(u, v, a, b) <= r)
}

fn is_base(u: f64, v: f64) -> bool {
    (0.2..=0.8).contains(&u) && (0.63..=0.95).contains(&v)
}

fn clamp8(x: f64) -> u16 {
    x.round().clamp(0.0, 255.0) as u16
}

/// Renders the scene at `width` x `height` as 8-bit RGB.
pub fn synthetic_scene(width: usize, height: usize) -> Scene {
    let mut data = Vec::with_capacity(width * height * 3);
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let u = (x as f64 + 0.5) / width as f64;
            let v = (y as f64 + 0.5) / height as f64;
            let n = hash_noise(x, y);
            let (label, rgb) = if is_stag(u, v) {
                let shade = 0.75 + 0.35 * (1.0 - ((u - 0.45).powi(2) + (v - 0.35).powi(2)).sqrt() * 2.0);
                (
                    0,
                    [
                        150.0 * shade + 12.0 * n,
                        105.0 * shade + 10.0 * n,
                        60.0 * shade + 8.0 * n,
                    ],
                )
            } else if is_base(u, v) {
                // Engraved lettering band across the front of the base.
                let band = (0.76..=0.84).contains(&v) && ((u * 40.0).floor() as i64 % 3 != 0);
                let g = if band { 95.0 } else { 175.0 - 30.0 * (v - 0.63) } + 14.0 * n;
                (1, [g, g * 0.97, g * 0.92])
            } else if v < 0.6 {
                let t = v / 0.6;
                (
                    2,
                    [
                        90.0 + 90.0 * t + 6.0 * n,
                        140.0 + 70.0 * t + 6.0 * n,
                        230.0 - 20.0 * t + 6.0 * n,
                    ],
                )
            } else {
                let stripe = if ((u * 12.0).floor() as i64) % 2 == 0 {
                    12.0
                } else {
                    -12.0
                };
                (
                    2,
                    [60.0 + stripe + 30.0 * n, 150.0 + stripe + 40.0 * n, 50.0 + 20.0 * n],
                )
            };
            labels.push(label);
            data.extend(rgb.iter().map(|&c| clamp8(c)));
        }
    }
    Scene {
        pixels: PixelMatrix::new(height, width, 3, 8, data).expect("scene values fit 8 bits"),
        segmap: SegmentMap::from_raw_labels(height, width, &labels).expect("scene has three regions"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_nonempty_regions_with_large_background() {
        for (w, h) in [(160, 128), (640, 512), (40, 32)] {
            let s = synthetic_scene(w, h);
            assert_eq!(s.pixels.dims(), (h, w));
            assert_eq!(s.segmap.segment_count(), 3);
            let counts = s.segmap.pixel_counts();
            let frac = counts[2] as f64 / (w * h) as f64;
            assert!((0.55..0.75).contains(&frac), "background fraction {frac}");
            assert!(counts[0] > 0 && counts[1] > 0);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(synthetic_scene(64, 48), synthetic_scene(64, 48));
    }
}
