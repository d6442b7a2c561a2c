//! Feed-forward convolutional codes with zero-tail termination and a
//! hard-decision Viterbi decoder.
//!
//! Generators follow the usual octal convention: written as a `K`-bit
//! binary number, the most significant bit taps the current input and the
//! least significant bit taps the oldest register.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported constraint length (decisions fit in one `u64`).
pub const MAX_CONSTRAINT_LENGTH: u8 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeSpec {
    constraint_length: u8,
    generators: Vec<u32>,
    /// `puncture[j][t % period]` keeps output `j` at step `t`.
    puncture: Option<Vec<Vec<bool>>>,
}

impl CodeSpec {
    pub fn new(constraint_length: u8, generators: Vec<u32>, puncture: Option<Vec<Vec<bool>>>) -> Result<Self> {
        if !(2..=MAX_CONSTRAINT_LENGTH).contains(&constraint_length) {
            return Err(Error::CodeSpec(format!(
                "constraint length {constraint_length} outside 2..={MAX_CONSTRAINT_LENGTH}"
            )));
        }
        if generators.len() < 2 {
            return Err(Error::CodeSpec("need at least two generators".into()));
        }
        let limit = 1u32 << constraint_length;
        for &g in &generators {
            if g == 0 || g >= limit {
                return Err(Error::CodeSpec(format!(
                    "generator {g:o} does not fit constraint length {constraint_length}"
                )));
            }
        }
        if !generators.iter().any(|g| g >> (constraint_length - 1) & 1 == 1) {
            return Err(Error::CodeSpec("no generator taps the current input".into()));
        }
        if let Some(p) = &puncture {
            let period = p.first().map_or(0, Vec::len);
            if p.len() != generators.len() || period == 0 || p.iter().any(|r| r.len() != period) {
                return Err(Error::CodeSpec(format!(
                    "puncturing pattern must be {} rows of equal nonzero length",
                    generators.len()
                )));
            }
            if (0..period).any(|t| p.iter().all(|r| !r[t])) {
                return Err(Error::CodeSpec(
                    "puncturing pattern drops every output of a step".into(),
                ));
            }
        }
        Ok(Self {
            constraint_length,
            generators,
            puncture,
        })
    }

    /// Parses octal generator strings such as `["6", "7"]` and puncturing
    /// rows such as `["11", "10"]`.
    pub fn from_octal(
        constraint_length: u8,
        generators: &[impl AsRef<str>],
        puncture: Option<&[String]>,
    ) -> Result<Self> {
        let gens = generators
            .iter()
            .map(|g| {
                u32::from_str_radix(g.as_ref(), 8)
                    .map_err(|e| Error::CodeSpec(format!("bad octal generator {:?}: {e}", g.as_ref())))
            })
            .collect::<Result<_>>()?;
        let punct = puncture
            .map(|rows| {
                rows.iter()
                    .map(|r| {
                        r.chars()
                            .map(|c| match c {
                                '1' => Ok(true),
                                '0' => Ok(false),
                                _ => Err(Error::CodeSpec(format!("bad puncturing row {r:?}"))),
                            })
                            .collect::<Result<Vec<bool>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        Self::new(constraint_length, gens, punct)
    }

    /// Rate-1/2, `K = 3`, generators `[6 7]`.
    pub fn rate_half() -> Self {
        Self::new(3, vec![0o6, 0o7], None).expect("valid code")
    }

    /// Rate 2/3 obtained by puncturing the rate-1/2 `[6 7]` code with
    /// pattern `[11; 10]`.
    pub fn rate_two_thirds_punctured() -> Self {
        Self::new(3, vec![0o6, 0o7], Some(vec![vec![true, true], vec![true, false]])).expect("valid code")
    }

    /// The unpunctured three-generator `[5 6 7]` code, natively rate 1/3.
    pub fn rate_third() -> Self {
        Self::new(3, vec![0o5, 0o6, 0o7], None).expect("valid code")
    }

    pub fn constraint_length(&self) -> u8 {
        self.constraint_length
    }

    pub fn generators(&self) -> &[u32] {
        &self.generators
    }

    pub fn outputs(&self) -> usize {
        self.generators.len()
    }

    fn memory(&self) -> usize {
        usize::from(self.constraint_length) - 1
    }

    /// Code rate as a reduced fraction `(num, den)`.
    pub fn rate(&self) -> (u32, u32) {
        let (num, den) = match &self.puncture {
            None => (1, self.outputs() as u32),
            Some(p) => {
                let kept: usize = p.iter().map(|r| r.iter().filter(|&&k| k).count()).sum();
                (p[0].len() as u32, kept as u32)
            }
        };
        let g = gcd(num, den);
        (num / g, den / g)
    }

    fn kept(&self, output: usize, step: usize) -> bool {
        match &self.puncture {
            None => true,
            Some(p) => p[output][step % p[0].len()],
        }
    }

    /// Number of coded bits for a message of `msg_len` bits, tail included.
    pub fn encoded_len(&self, msg_len: usize) -> usize {
        let steps = msg_len + self.memory();
        match &self.puncture {
            None => steps * self.outputs(),
            Some(p) => {
                let period = p[0].len();
                let per_period: usize = p.iter().map(|r| r.iter().filter(|&&k| k).count()).sum();
                let rem: usize = (0..steps % period).map(|t| p.iter().filter(|r| r[t]).count()).sum();
                (steps / period) * per_period + rem
            }
        }
    }

    /// Output bits for each `(state, input)` packed LSB-first by generator.
    fn output_table(&self) -> Vec<u32> {
        let m = self.memory();
        let states = 1usize << m;
        let mut table = vec![0u32; states * 2];
        for s in 0..states {
            for u in 0..2 {
                let reg = ((u << m) | s) as u32;
                let mut out = 0u32;
                for (j, &g) in self.generators.iter().enumerate() {
                    out |= ((reg & g).count_ones() & 1) << j;
                }
                table[s * 2 + u] = out;
            }
        }
        table
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Encodes `bits` and appends `K - 1` zero tail bits, then punctures.
pub fn conv_encode(bits: &[u8], spec: &CodeSpec) -> Vec<u8> {
    let m = spec.memory();
    let table = spec.output_table();
    let mut out = Vec::with_capacity(spec.encoded_len(bits.len()));
    let mut state = 0usize;
    for (t, u) in bits
        .iter()
        .map(|&b| usize::from(b & 1))
        .chain(std::iter::repeat_n(0, m))
        .enumerate()
    {
        let word = table[state * 2 + u];
        for j in 0..spec.outputs() {
            if spec.kept(j, t) {
                out.push(((word >> j) & 1) as u8);
            }
        }
        state = ((u << m) | state) >> 1;
    }
    out
}

/// Hard-decision Viterbi decoding of a zero-tail terminated block carrying
/// `msg_len` message bits. Punctured positions count as erasures.
pub fn viterbi_decode(received: &[u8], spec: &CodeSpec, msg_len: usize) -> Result<Vec<u8>> {
    let expected = spec.encoded_len(msg_len);
    if received.len() != expected {
        return Err(Error::LengthMismatch {
            stream: 0,
            expected,
            found: received.len(),
        });
    }
    let m = spec.memory();
    let n = spec.outputs();
    let states = 1usize << m;
    let steps = msg_len + m;
    let table = spec.output_table();

    const UNREACHABLE: u32 = u32::MAX / 2;
    let mut metric = vec![UNREACHABLE; states];
    metric[0] = 0;
    let mut next = vec![0u32; states];
    let mut decisions = vec![0u64; steps];

    // Per step: received bits and the mask of non-erased outputs.
    let mut rx_iter = received.iter();
    for (t, decision) in decisions.iter_mut().enumerate() {
        let mut rx_word = 0u32;
        let mut mask = 0u32;
        for j in 0..n {
            if spec.kept(j, t) {
                let b = u32::from(*rx_iter.next().expect("length checked") & 1);
                rx_word |= b << j;
                mask |= 1 << j;
            }
        }
        let mut dec = 0u64;
        for (ns, slot) in next.iter_mut().enumerate() {
            let u = ns >> (m - 1);
            let base = (ns << 1) & (states - 1);
            let (s0, s1) = (base, base | 1);
            let d0 = ((table[s0 * 2 + u] ^ rx_word) & mask).count_ones();
            let d1 = ((table[s1 * 2 + u] ^ rx_word) & mask).count_ones();
            let m0 = metric[s0].saturating_add(d0);
            let m1 = metric[s1].saturating_add(d1);
            if m1 < m0 {
                *slot = m1;
                dec |= 1 << ns;
            } else {
                *slot = m0;
            }
        }
        *decision = dec;
        std::mem::swap(&mut metric, &mut next);
    }

    // Zero-tail termination: trace back from state 0.
    let mut out = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        out[t] = (state >> (m - 1)) as u8;
        let bit = ((decisions[t] >> state) & 1) as usize;
        state = ((state << 1) & (states - 1)) | bit;
    }
    out.truncate(msg_len);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn impulse_response_of_6_7() {
        let spec = CodeSpec::rate_half();
        // Registers 100, 010, 001 against taps 110 and 111.
        assert_eq!(conv_encode(&[1], &spec), vec![1, 1, 1, 1, 0, 1]);
        assert_eq!(conv_encode(&[1, 0, 0], &spec), vec![1, 1, 1, 1, 0, 1, 0, 0, 0, 0]);
    }

    #[test]
    fn zero_in_zero_out() {
        let spec = CodeSpec::rate_half();
        assert!(conv_encode(&[0; 20], &spec).iter().all(|&b| b == 0));
        assert_eq!(viterbi_decode(&[0; 44], &spec, 20).unwrap(), vec![0; 20]);
    }

    #[test]
    fn lengths_and_rates() {
        let half = CodeSpec::rate_half();
        assert_eq!(half.encoded_len(10), 24);
        assert_eq!(conv_encode(&[1; 10], &half).len(), 24);
        assert_eq!(half.rate(), (1, 2));
        let third = CodeSpec::rate_third();
        assert_eq!(third.rate(), (1, 3));
        assert_eq!(conv_encode(&[1; 10], &third).len(), 36);
        let punct = CodeSpec::rate_two_thirds_punctured();
        assert_eq!(punct.rate(), (2, 3));
        for len in 0..12 {
            assert_eq!(conv_encode(&vec![1; len], &punct).len(), punct.encoded_len(len));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(CodeSpec::new(3, vec![0o6], None).is_err());
        assert!(CodeSpec::new(3, vec![0o6, 0o17], None).is_err());
        assert!(CodeSpec::new(9, vec![0o6, 0o7], None).is_err());
        assert!(CodeSpec::new(3, vec![0o1, 0o3], None).is_err());
        assert!(CodeSpec::from_octal(3, &["6", "8"], None).is_err());
        assert!(CodeSpec::new(3, vec![0o6, 0o7], Some(vec![vec![true, false], vec![true, false]])).is_err());
    }

    #[test]
    fn decode_length_mismatch() {
        let spec = CodeSpec::rate_half();
        assert!(matches!(
            viterbi_decode(&[0; 10], &spec, 10),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn corrects_every_single_error_on_short_blocks() {
        for spec in [CodeSpec::rate_half(), CodeSpec::rate_third()] {
            for len in 1..=8usize {
                for msg_word in 0..(1u32 << len) {
                    let msg: Vec<u8> = (0..len).map(|i| ((msg_word >> i) & 1) as u8).collect();
                    let coded = conv_encode(&msg, &spec);
                    for e in 0..coded.len() {
                        let mut rx = coded.clone();
                        rx[e] ^= 1;
                        assert_eq!(viterbi_decode(&rx, &spec, len).unwrap(), msg);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn noiseless_round_trip(msg in proptest::collection::vec(0u8..2, 0..300)) {
            for spec in [CodeSpec::rate_half(), CodeSpec::rate_third(), CodeSpec::rate_two_thirds_punctured()] {
                let coded = conv_encode(&msg, &spec);
                prop_assert_eq!(viterbi_decode(&coded, &spec, msg.len()).unwrap(), msg.clone());
            }
        }

        #[test]
        fn encoder_is_linear(a in proptest::collection::vec(0u8..2, 1..64), seed in any::<u64>()) {
            let b: Vec<u8> = a.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as u8).collect();
            let spec = CodeSpec::rate_half();
            let sum: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let ca = conv_encode(&a, &spec);
            let cb = conv_encode(&b, &spec);
            let cs: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
            prop_assert_eq!(conv_encode(&sum, &spec), cs);
        }
    }
}
