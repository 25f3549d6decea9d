//! Fixed-point storage of unit vectors.
//!
//! A component `c` is stored as the integer `round(c · 10^p)` (half away from
//! zero) in the narrowest signed power-of-two width that can hold `±10^p`.
//! Reads always produce `f32`, whatever the stored width.

use crate::error::{Error, Result};
use crate::vector::EmbeddingVector;

pub const DEFAULT_PRECISION: u32 = 7;
pub const MAX_PRECISION: u32 = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuantizationSpec {
    precision: u32,
    byte_width: usize,
}

/// Smallest width in {1, 2, 4, 8} bytes whose signed range contains `±10^p`.
pub fn byte_width_for(precision: u32) -> usize {
    match precision {
        0..=2 => 1,
        3..=4 => 2,
        5..=9 => 4,
        _ => 8,
    }
}

impl QuantizationSpec {
    pub fn new(precision: u32) -> Result<Self> {
        if precision > MAX_PRECISION {
            return Err(Error::InvalidPrecision(precision));
        }
        Ok(Self {
            precision,
            byte_width: byte_width_for(precision),
        })
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn byte_width(&self) -> usize {
        self.byte_width
    }

    /// `10^p`
    pub fn scale(&self) -> f64 {
        10f64.powi(self.precision as i32)
    }

    /// Largest magnitude representable at this width (the signed minimum is
    /// one further, but codes are kept symmetric).
    pub fn max_code(&self) -> i64 {
        match self.byte_width {
            1 => i8::MAX as i64,
            2 => i16::MAX as i64,
            4 => i32::MAX as i64,
            _ => i64::MAX,
        }
    }

    pub fn quantize_component(&self, c: f64) -> Result<i64> {
        let scaled = (c * self.scale()).round();
        let limit = self.max_code() as f64;
        if !scaled.is_finite() || scaled.abs() > limit {
            return Err(Error::Overflow {
                value: c,
                precision: self.precision,
                byte_width: self.byte_width,
            });
        }
        Ok(scaled as i64)
    }

    pub fn quantize(&self, v: &EmbeddingVector) -> Result<Vec<i64>> {
        v.iter()
            .map(|&c| self.quantize_component(c as f64))
            .collect()
    }

    pub fn quantize_f64(&self, v: &[f64]) -> Result<Vec<i64>> {
        v.iter().map(|&c| self.quantize_component(c)).collect()
    }

    /// `code / 10^p`, correctly rounded to `f32`.
    #[inline]
    pub fn dequantize_component(&self, code: i64) -> f32 {
        (code as f64 / self.scale()) as f32
    }

    pub fn dequantize(&self, codes: &[i64]) -> Result<EmbeddingVector> {
        if codes.is_empty() {
            return Err(Error::EmptyVector);
        }
        let limit = self.max_code();
        if let Some(&bad) = codes.iter().find(|c| c.abs() > limit) {
            return Err(Error::Overflow {
                value: bad as f64,
                precision: self.precision,
                byte_width: self.byte_width,
            });
        }
        Ok(EmbeddingVector::from_raw(
            codes.iter().map(|&c| self.dequantize_component(c)).collect(),
        ))
    }

    /// Appends codes as little-endian integers of `byte_width` bytes.
    pub fn encode_codes(&self, codes: &[i64], out: &mut Vec<u8>) {
        for &c in codes {
            match self.byte_width {
                1 => out.push(c as i8 as u8),
                2 => out.extend_from_slice(&(c as i16).to_le_bytes()),
                4 => out.extend_from_slice(&(c as i32).to_le_bytes()),
                _ => out.extend_from_slice(&c.to_le_bytes()),
            }
        }
    }

    /// Decodes one stored row at full precision: `out[i] = code / 10^p` in
    /// `f64`, for callers that need more than `f32` can hold.
    pub fn decode_row_f64(&self, row: &[u8], out: &mut [f64]) {
        debug_assert_eq!(row.len(), out.len() * self.byte_width);
        let scale = self.scale();
        for (o, b) in out.iter_mut().zip(row.chunks_exact(self.byte_width)) {
            let code = match self.byte_width {
                1 => b[0] as i8 as i64,
                2 => i16::from_le_bytes([b[0], b[1]]) as i64,
                4 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64,
                _ => i64::from_le_bytes(b.try_into().expect("8-byte code")),
            };
            *o = code as f64 / scale;
        }
    }

    /// Decodes one stored row into `out`. `row.len()` must equal
    /// `out.len() * byte_width`.
    #[inline]
    pub fn decode_row(&self, row: &[u8], out: &mut [f32]) {
        debug_assert_eq!(row.len(), out.len() * self.byte_width);
        let scale = self.scale();
        match self.byte_width {
            1 => {
                for (o, &b) in out.iter_mut().zip(row) {
                    *o = (b as i8 as f64 / scale) as f32;
                }
            }
            2 => {
                for (o, b) in out.iter_mut().zip(row.chunks_exact(2)) {
                    *o = (i16::from_le_bytes([b[0], b[1]]) as f64 / scale) as f32;
                }
            }
            4 => {
                for (o, b) in out.iter_mut().zip(row.chunks_exact(4)) {
                    *o = (i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / scale) as f32;
                }
            }
            _ => {
                for (o, b) in out.iter_mut().zip(row.chunks_exact(8)) {
                    let code = i64::from_le_bytes(b.try_into().expect("8-byte chunk"));
                    *o = (code as f64 / scale) as f32;
                }
            }
        }
    }
}

impl Default for QuantizationSpec {
    fn default() -> Self {
        Self::new(DEFAULT_PRECISION).expect("default precision is valid")
    }
}
