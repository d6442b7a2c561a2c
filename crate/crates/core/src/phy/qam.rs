//! Gray-coded rectangular QAM with unit average symbol energy.
//!
//! `M = 2^m` with `m` bits split as `ceil(m/2)` in-phase and `floor(m/2)`
//! quadrature bits, so even `m` gives square constellations and `M = 2`
//! gives BPSK on the real axis. Within each axis the bit group is
//! Gray-coded over the PAM levels `-(n-1), .., -1, 1, .., n-1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constellation {
    order: u32,
    bits_i: u32,
    bits_q: u32,
    scale: f64,
}

impl Constellation {
    pub fn new(order: u32) -> Result<Self> {
        if !order.is_power_of_two() || !(2..=256).contains(&order) {
            return Err(Error::Modulation(order));
        }
        let m = order.trailing_zeros();
        let bits_i = m.div_ceil(2);
        let bits_q = m / 2;
        let levels = |b: u32| f64::from(1u32 << b);
        let energy = (levels(bits_i).powi(2) - 1.0) / 3.0 + (levels(bits_q).powi(2) - 1.0) / 3.0;
        Ok(Self {
            order,
            bits_i,
            bits_q,
            scale: energy.sqrt().recip(),
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        (self.bits_i + self.bits_q) as usize
    }

    /// All `M` points, indexed by their bit label (first bit most significant).
    pub fn points(&self) -> Vec<Complex64> {
        let m = self.bits_per_symbol();
        (0..self.order)
            .map(|label| {
                let bits: Vec<u8> = (0..m).map(|j| ((label >> (m - 1 - j)) & 1) as u8).collect();
                self.map_one(&bits)
            })
            .collect()
    }

    fn map_one(&self, bits: &[u8]) -> Complex64 {
        let (bi, bq) = bits.split_at(self.bits_i as usize);
        Complex64::new(pam_level(bi), pam_level(bq)) * self.scale
    }

    fn demap_one(&self, z: Complex64, out: &mut Vec<u8>) {
        pam_decide(z.re / self.scale, self.bits_i, out);
        pam_decide(z.im / self.scale, self.bits_q, out);
    }
}

fn pam_level(bits: &[u8]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let gray = bits.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
    let mut pos = gray;
    let mut shift = gray >> 1;
    while shift != 0 {
        pos ^= shift;
        shift >>= 1;
    }
    let n = 1u32 << bits.len();
    2.0 * f64::from(pos) - f64::from(n - 1)
}

fn pam_decide(x: f64, bits: u32, out: &mut Vec<u8>) {
    if bits == 0 {
        return;
    }
    let n = 1u32 << bits;
    let pos = ((x + f64::from(n - 1)) / 2.0).round().clamp(0.0, f64::from(n - 1)) as u32;
    let gray = pos ^ (pos >> 1);
    for j in (0..bits).rev() {
        out.push(((gray >> j) & 1) as u8);
    }
}

pub fn qam_map(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let m = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(m) {
        return Err(Error::SymbolAlignment {
            bits: bits.len(),
            bits_per_symbol: m,
        });
    }
    Ok(bits.chunks_exact(m).map(|c| constellation.map_one(c)).collect())
}

/// Minimum-distance hard decisions.
pub fn qam_demap(symbols: &[Complex64], constellation: &Constellation) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * constellation.bits_per_symbol());
    for &z in symbols {
        constellation.demap_one(z, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_energy() {
        for m in [2, 4, 8, 16, 64, 256] {
            let c = Constellation::new(m).unwrap();
            let pts = c.points();
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / f64::from(m);
            assert!((e - 1.0).abs() < 1e-12, "M={m}: {e}");
        }
    }

    #[test]
    fn sixteen_qam_layout() {
        let c = Constellation::new(16).unwrap();
        assert_eq!(c.bits_per_symbol(), 4);
        let pts = c.points();
        let s = 10f64.sqrt();
        // Label 0000 sits at the corner (-3, -3).
        assert!((pts[0] - Complex64::new(-3.0 / s, -3.0 / s)).norm() < 1e-12);
        let mut uniq = pts.clone();
        uniq.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        uniq.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
        assert_eq!(uniq.len(), 16);
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        for m in [4, 8, 16, 64] {
            let c = Constellation::new(m).unwrap();
            let pts = c.points();
            let dmin = 2.0 * c.scale;
            let mut pairs = 0;
            for a in 0..pts.len() {
                for b in a + 1..pts.len() {
                    if ((pts[a] - pts[b]).norm() - dmin).abs() < 1e-9 {
                        pairs += 1;
                        assert_eq!((a ^ b).count_ones(), 1, "M={m}: labels {a:b} and {b:b}");
                    }
                }
            }
            assert!(pairs > 0);
        }
    }

    #[test]
    fn bpsk_is_real() {
        let c = Constellation::new(2).unwrap();
        assert_eq!(
            qam_map(&[0, 1], &c).unwrap(),
            vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)]
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(Constellation::new(12).is_err());
        assert!(Constellation::new(1).is_err());
        let c = Constellation::new(16).unwrap();
        assert!(matches!(qam_map(&[0; 6], &c), Err(Error::SymbolAlignment { .. })));
    }

    proptest! {
        #[test]
        fn round_trip(order_exp in 1u32..=8, words in proptest::collection::vec(any::<u8>(), 0..50)) {
            let c = Constellation::new(1 << order_exp).unwrap();
            let m = c.bits_per_symbol();
            let bits: Vec<u8> = words.iter().flat_map(|w| (0..m).map(move |j| (w >> (j % 8)) & 1)).collect();
            let syms = qam_map(&bits, &c).unwrap();
            prop_assert_eq!(qam_demap(&syms, &c), bits);
        }

        #[test]
        fn small_perturbation_does_not_change_decision(label in 0u32..16, dx in -0.3f64..0.3, dy in -0.3f64..0.3) {
            let c = Constellation::new(16).unwrap();
            let p = c.points()[label as usize];
            let z = p + Complex64::new(dx, dy) * c.scale;
            let bits = qam_demap(&[z], &c);
            let got = bits.iter().fold(0u32, |a, &b| (a << 1) | u32::from(b));
            prop_assert_eq!(got, label);
        }
    }
}
