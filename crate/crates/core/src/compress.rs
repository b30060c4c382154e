//! Gradient/weight codec: per-tensor Top-K sparsification followed by
//! fixed-bit symmetric quantization with stochastic rounding, plus the exact
//! wire-format bit accounting the latency model charges for.
//!
//! Wire format per tensor (bit-exact; [`CompressedUpdate::to_bytes`] emits
//! it, [`CompressedUpdate::from_bytes`] parses it):
//!
//! ```text
//! header: name length (u16 LE) | name bytes | rank (u8) | dims (u32 LE each)
//!         | p_q (u8) | scale (f32 LE) | entry count (u32 LE)
//! body:   indices (u32 LE each) | codes packed LSB-first little-endian,
//!         padded to a byte boundary per tensor
//! ```
//!
//! `p_q ∈ {0, 32}` means "no quantization": codes are the raw f32 values
//! (32 bits each) and `scale` is the sentinel 1.0.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::params::ParamVector;
use crate::rng;

#[cfg(not(feature = "std"))]
use crate::fmath::F64Ext;

/// Quantization bit widths accepted by the codec; 0 and 32 mean "none".
pub const ALLOWED_PQ: [u8; 7] = [0, 2, 4, 6, 8, 16, 32];

/// Sparsification percentage and quantization bit width.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressionParams {
    /// Percentage of elements kept per tensor, in `(0, 100]`.
    pub p_s: f64,
    /// Bits per retained value; one of [`ALLOWED_PQ`].
    pub p_q: u8,
}

impl CompressionParams {
    pub const LOSSLESS: CompressionParams = CompressionParams { p_s: 100.0, p_q: 0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.p_s > 0.0 && self.p_s <= 100.0) {
            return Err(Error::Config(alloc::format!(
                "p_s must be in (0, 100], got {}",
                self.p_s
            )));
        }
        if !ALLOWED_PQ.contains(&self.p_q) {
            return Err(Error::Config(alloc::format!(
                "p_q must be one of {ALLOWED_PQ:?}, got {}",
                self.p_q
            )));
        }
        Ok(())
    }

    /// True when these parameters change nothing (all kept, no quantization).
    pub fn is_lossless(&self) -> bool {
        self.p_s >= 100.0 && quant_is_identity(self.p_q)
    }
}

/// True for the bit widths that leave values untouched.
fn quant_is_identity(p_q: u8) -> bool {
    p_q == 0 || p_q == 32
}

/// Retained values: raw f32 passthrough or integer codes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Codes {
    Raw(Vec<f32>),
    Quantized(Vec<i32>),
}

impl Codes {
    pub fn len(&self) -> usize {
        match self {
            Codes::Raw(v) => v.len(),
            Codes::Quantized(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One compressed tensor: sparse indices plus (possibly quantized) values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressedTensor {
    pub name: String,
    pub original_shape: Vec<usize>,
    /// Flat element positions, strictly ascending.
    pub indices: Vec<u32>,
    pub qvalues: Codes,
    /// Quantization scale (max |kept value|); sentinel 1.0 on the raw path.
    pub scale: f32,
    pub p_q_used: u8,
}

/// A whole compressed parameter set in transit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompressedUpdate {
    pub tensors: Vec<CompressedTensor>,
    /// Global round the sender trained from.
    pub timestamp: u64,
    pub sender: usize,
    /// Total wire-format bits, summed over tensors.
    pub bit_size: u64,
}

/// Wire-format size of one tensor with the given entry count.
pub fn tensor_wire_bits(name_len: usize, rank: usize, entries: usize, p_q: u8) -> u64 {
    let header = 16 + 8 * name_len as u64 + 8 + 32 * rank as u64 + 8 + 32 + 32;
    let code_bits = if quant_is_identity(p_q) {
        32 * entries as u64
    } else {
        // packed codes are padded to a byte boundary per tensor
        ((entries as u64 * p_q as u64) + 7) / 8 * 8
    };
    header + 32 * entries as u64 + code_bits
}

/// Selects the `k = max(1, ceil(p_s% × n))` largest-magnitude elements.
///
/// Returns `(flat indices ascending, values in index order)`. Magnitude ties
/// break toward the lowest flat index.
pub fn topk_sparsify(values: &[f32], p_s: f64) -> Result<(Vec<u32>, Vec<f32>)> {
    if values.is_empty() {
        return Err(Error::Contract(String::from("cannot sparsify an empty tensor")));
    }
    if !(p_s > 0.0 && p_s <= 100.0) {
        return Err(Error::Config(alloc::format!("p_s out of range: {p_s}")));
    }
    let n = values.len();
    let k = (((p_s / 100.0) * n as f64).ceil() as usize).clamp(1, n);

    let mut order: Vec<u32> = (0..n as u32).collect();
    // order by |value| descending, then index ascending (the tie rule)
    let magnitude_then_index = |&a: &u32, &b: &u32| {
        let ma = f64::from(values[a as usize]).abs();
        let mb = f64::from(values[b as usize]).abs();
        mb.partial_cmp(&ma).expect("finite values").then(a.cmp(&b))
    };
    if k < n {
        order.select_nth_unstable_by(k - 1, magnitude_then_index);
        order.truncate(k);
    }
    order.sort_unstable();
    let kept = order.iter().map(|&i| values[i as usize]).collect();
    Ok((order, kept))
}

/// Symmetric max-abs uniform quantization with stochastic rounding.
///
/// `scale = max |v|` (0 if all values are zero), `L = 2^(p_q−1) − 1`;
/// `code = floor(v/scale·L) + Bernoulli(frac)`, clamped to `[−L, L]`. The
/// rounding is unbiased: `E[code·scale/L] = v`.
pub fn quantize(values: &[f32], p_q: u8, rng: &mut ChaCha8Rng) -> Result<(Vec<i32>, f32)> {
    if !ALLOWED_PQ.contains(&p_q) || quant_is_identity(p_q) {
        return Err(Error::Config(alloc::format!(
            "quantize requires a lossy bit width, got {p_q}"
        )));
    }
    let levels = (1i64 << (p_q - 1)) - 1;
    let scale = values.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok((vec![0; values.len()], 0.0));
    }
    let codes = values
        .iter()
        .map(|&v| {
            let x = f64::from(v) / f64::from(scale) * levels as f64;
            let floor = x.floor();
            let frac = x - floor;
            let up = rng.gen::<f64>() < frac;
            let code = floor as i64 + i64::from(up);
            code.clamp(-levels, levels) as i32
        })
        .collect();
    Ok((codes, scale))
}

/// Reconstructs f32 values from codes: `v = code/L · scale`.
pub fn dequantize(codes: &[i32], scale: f32, p_q: u8) -> Result<Vec<f32>> {
    if !ALLOWED_PQ.contains(&p_q) || quant_is_identity(p_q) {
        return Err(Error::Config(alloc::format!(
            "dequantize requires a lossy bit width, got {p_q}"
        )));
    }
    let levels = (1i64 << (p_q - 1)) - 1;
    let mut out = Vec::with_capacity(codes.len());
    for &c in codes {
        if i64::from(c).abs() > levels {
            return Err(Error::CorruptPayload(alloc::format!(
                "code {c} outside ±{levels} for p_q = {p_q}"
            )));
        }
        out.push((f64::from(c) / levels as f64 * f64::from(scale)) as f32);
    }
    Ok(out)
}

/// Compresses a parameter set: Top-K per tensor, then quantization; entries
/// whose code quantizes to exactly 0 are dropped (they decode to 0 anyway).
///
/// The raw path (`p_q ∈ {0, 32}`) keeps every selected entry — including
/// exact zeros — so lossless settings round-trip bit-exactly. Stochastic
/// rounding draws from the stream of `seed`, making the result deterministic.
pub fn compress(w: &ParamVector, params: &CompressionParams, seed: u64) -> Result<CompressedUpdate> {
    params.validate()?;
    let mut rng = rng::stream(seed, "compress", 0);
    let mut tensors = Vec::with_capacity(w.tensors.len());
    let mut bit_size = 0u64;

    for t in &w.tensors {
        let (indices, kept) = topk_sparsify(&t.values, params.p_s)?;
        let (indices, qvalues, scale) = if quant_is_identity(params.p_q) {
            (indices, Codes::Raw(kept), 1.0f32)
        } else {
            let (codes, scale) = quantize(&kept, params.p_q, &mut rng)?;
            let mut idx = Vec::with_capacity(codes.len());
            let mut nonzero = Vec::with_capacity(codes.len());
            for (i, c) in indices.into_iter().zip(codes) {
                if c != 0 {
                    idx.push(i);
                    nonzero.push(c);
                }
            }
            (idx, Codes::Quantized(nonzero), scale)
        };
        bit_size += tensor_wire_bits(t.name.len(), t.shape.len(), indices.len(), params.p_q);
        tensors.push(CompressedTensor {
            name: t.name.clone(),
            original_shape: t.shape.clone(),
            indices,
            qvalues,
            scale,
            p_q_used: params.p_q,
        });
    }

    Ok(CompressedUpdate {
        tensors,
        timestamp: 0,
        sender: 0,
        bit_size,
    })
}

/// Reconstructs a full parameter set: zeros everywhere except the decoded
/// values at the recorded indices. The update must match `spec`'s tensor
/// layout.
pub fn decompress(u: &CompressedUpdate, spec: &ModelSpec) -> Result<ParamVector> {
    let layout = spec.layout();
    if u.tensors.len() != layout.len() {
        return Err(Error::CorruptPayload(alloc::format!(
            "expected {} tensors, got {}",
            layout.len(),
            u.tensors.len()
        )));
    }
    let mut out = ParamVector::zeros(&layout);
    for (ct, target) in u.tensors.iter().zip(&mut out.tensors) {
        if ct.name != target.name || ct.original_shape != target.shape {
            return Err(Error::CorruptPayload(alloc::format!(
                "tensor {}/{:?} does not match expected {}/{:?}",
                ct.name,
                ct.original_shape,
                target.name,
                target.shape
            )));
        }
        let n = target.values.len();
        if ct.indices.len() != ct.qvalues.len() {
            return Err(Error::CorruptPayload(String::from(
                "index and value counts differ",
            )));
        }
        let decoded: Vec<f32> = match &ct.qvalues {
            Codes::Raw(v) => v.clone(),
            Codes::Quantized(codes) => dequantize(codes, ct.scale, ct.p_q_used)?,
        };
        let mut prev: Option<u32> = None;
        for (&i, &v) in ct.indices.iter().zip(&decoded) {
            if i as usize >= n {
                return Err(Error::CorruptPayload(alloc::format!(
                    "index {i} out of range for {n}-element tensor {}",
                    ct.name
                )));
            }
            if prev.is_some_and(|p| p >= i) {
                return Err(Error::CorruptPayload(alloc::format!(
                    "indices not strictly ascending in tensor {}",
                    ct.name
                )));
            }
            prev = Some(i);
            target.values[i as usize] = v;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Wire encoding

struct BitWriter {
    buf: Vec<u8>,
    bit: u32, // bits already used in the last byte
}

impl BitWriter {
    fn new() -> Self {
        BitWriter { buf: Vec::new(), bit: 0 }
    }

    /// Appends the low `nbits` of `value`, LSB-first.
    fn push_bits(&mut self, mut value: u32, mut nbits: u32) {
        while nbits > 0 {
            if self.bit == 0 {
                self.buf.push(0);
            }
            let free = 8 - self.bit;
            let take = free.min(nbits);
            let mask = if take == 32 { u32::MAX } else { (1 << take) - 1 };
            let last = self.buf.last_mut().expect("pushed above");
            *last |= ((value & mask) as u8) << self.bit;
            self.bit = (self.bit + take) % 8;
            value >>= take;
            nbits -= take;
        }
    }

    fn pad_to_byte(&mut self) {
        self.bit = 0;
    }

    fn push_u8(&mut self, v: u8) {
        debug_assert_eq!(self.bit, 0);
        self.buf.push(v);
    }

    fn push_u16(&mut self, v: u16) {
        debug_assert_eq!(self.bit, 0);
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn push_u32(&mut self, v: u32) {
        debug_assert_eq!(self.bit, 0);
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct BitReader<'a> {
    buf: &'a [u8],
    byte: usize,
    bit: u32,
}

impl<'a> BitReader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        BitReader { buf, byte: 0, bit: 0 }
    }

    fn truncated<T>(&self) -> Result<T> {
        Err(Error::CorruptPayload(alloc::format!(
            "payload truncated at byte {}",
            self.byte
        )))
    }

    fn read_bits(&mut self, mut nbits: u32) -> Result<u32> {
        let mut out = 0u32;
        let mut got = 0u32;
        while nbits > 0 {
            if self.byte >= self.buf.len() {
                return self.truncated();
            }
            let avail = 8 - self.bit;
            let take = avail.min(nbits);
            let mask = (1u32 << take) - 1;
            let bits = (u32::from(self.buf[self.byte]) >> self.bit) & mask;
            out |= bits << got;
            got += take;
            self.bit += take;
            if self.bit == 8 {
                self.bit = 0;
                self.byte += 1;
            }
            nbits -= take;
        }
        Ok(out)
    }

    fn pad_to_byte(&mut self) {
        if self.bit != 0 {
            self.bit = 0;
            self.byte += 1;
        }
    }

    fn read_u8(&mut self) -> Result<u8> {
        debug_assert_eq!(self.bit, 0);
        if self.byte >= self.buf.len() {
            return self.truncated();
        }
        let v = self.buf[self.byte];
        self.byte += 1;
        Ok(v)
    }

    fn read_u16(&mut self) -> Result<u16> {
        Ok(u16::from(self.read_u8()?) | (u16::from(self.read_u8()?) << 8))
    }

    fn read_u32(&mut self) -> Result<u32> {
        let mut v = 0u32;
        for shift in [0, 8, 16, 24] {
            v |= u32::from(self.read_u8()?) << shift;
        }
        Ok(v)
    }

    fn read_exact(&mut self, n: usize) -> Result<&'a [u8]> {
        debug_assert_eq!(self.bit, 0);
        if self.byte + n > self.buf.len() {
            return self.truncated();
        }
        let s = &self.buf[self.byte..self.byte + n];
        self.byte += n;
        Ok(s)
    }

    fn at_end(&self) -> bool {
        self.byte >= self.buf.len()
    }
}

impl CompressedUpdate {
    /// Serializes all tensors in the wire format; the byte length equals
    /// `bit_size / 8` (the format is byte-aligned per tensor).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BitWriter::new();
        for t in &self.tensors {
            w.push_u16(t.name.len() as u16);
            w.buf.extend_from_slice(t.name.as_bytes());
            w.push_u8(t.original_shape.len() as u8);
            for &d in &t.original_shape {
                w.push_u32(d as u32);
            }
            w.push_u8(t.p_q_used);
            w.push_u32(t.scale.to_bits());
            w.push_u32(t.indices.len() as u32);
            for &i in &t.indices {
                w.push_u32(i);
            }
            match &t.qvalues {
                Codes::Raw(values) => {
                    for v in values {
                        w.push_u32(v.to_bits());
                    }
                }
                Codes::Quantized(codes) => {
                    let bits = u32::from(t.p_q_used);
                    let mask = (1u32 << bits) - 1;
                    for &c in codes {
                        w.push_bits((c as u32) & mask, bits);
                    }
                    w.pad_to_byte();
                }
            }
        }
        w.buf
    }

    /// Parses a byte buffer produced by [`Self::to_bytes`]. `timestamp` and
    /// `sender` are transport metadata and default to zero.
    pub fn from_bytes(bytes: &[u8]) -> Result<CompressedUpdate> {
        let mut r = BitReader::new(bytes);
        let mut tensors = Vec::new();
        let mut bit_size = 0u64;
        while !r.at_end() {
            let name_len = r.read_u16()? as usize;
            let name = String::from_utf8(r.read_exact(name_len)?.to_vec())
                .map_err(|_| Error::CorruptPayload(String::from("tensor name is not UTF-8")))?;
            let rank = r.read_u8()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.read_u32()? as usize);
            }
            let p_q = r.read_u8()?;
            if !ALLOWED_PQ.contains(&p_q) {
                return Err(Error::CorruptPayload(alloc::format!(
                    "unknown quantization width {p_q}"
                )));
            }
            let scale = f32::from_bits(r.read_u32()?);
            let entries = r.read_u32()? as usize;
            let mut indices = Vec::with_capacity(entries);
            for _ in 0..entries {
                indices.push(r.read_u32()?);
            }
            let qvalues = if quant_is_identity(p_q) {
                let mut v = Vec::with_capacity(entries);
                for _ in 0..entries {
                    v.push(f32::from_bits(r.read_u32()?));
                }
                Codes::Raw(v)
            } else {
                let bits = u32::from(p_q);
                let mut v = Vec::with_capacity(entries);
                for _ in 0..entries {
                    let raw = r.read_bits(bits)?;
                    // sign-extend the two's-complement code
                    let code = ((raw << (32 - bits)) as i32) >> (32 - bits);
                    v.push(code);
                }
                r.pad_to_byte();
                Codes::Quantized(v)
            };
            bit_size += tensor_wire_bits(name.len(), rank, entries, p_q);
            tensors.push(CompressedTensor {
                name,
                original_shape: shape,
                indices,
                qvalues,
                scale,
                p_q_used: p_q,
            });
        }
        Ok(CompressedUpdate {
            tensors,
            timestamp: 0,
            sender: 0,
            bit_size,
        })
    }
}
