//! Signed two's-complement fixed-point numbers stored in register labels.
//!
//! A format with `int_bits` integer bits and `frac_bits` fractional bits
//! occupies `1 + int_bits + frac_bits` qubits and covers
//! `[-2^int_bits, 2^int_bits)` at resolution `2^-frac_bits`. Every result is
//! rounded to the nearest grid point (ties to even) and saturates at the range
//! ends, reporting the saturation to the caller.

use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedFormat {
    int_bits: u32,
    frac_bits: u32,
}

/// A raw fixed-point value paired with a saturation flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rounded {
    pub raw: i64,
    pub saturated: bool,
}

impl Default for FixedFormat {
    fn default() -> Self {
        Self { int_bits: 2, frac_bits: 12 }
    }
}

impl FixedFormat {
    /// `int_bits + frac_bits` must stay below 62 so products fit an `i128`
    /// comfortably and labels fit a `u64`.
    pub fn new(int_bits: u32, frac_bits: u32) -> Option<Self> {
        (int_bits + frac_bits <= 60).then_some(Self { int_bits, frac_bits })
    }

    #[inline]
    pub fn int_bits(&self) -> u32 {
        self.int_bits
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Register width in qubits.
    #[inline]
    pub fn width(&self) -> u32 {
        1 + self.int_bits + self.frac_bits
    }

    /// Grid spacing `2^-frac_bits`.
    pub fn resolution(&self) -> f64 {
        math::exp2(-(self.frac_bits as f64))
    }

    #[inline]
    fn max_raw(&self) -> i64 {
        (1i64 << (self.int_bits + self.frac_bits)) - 1
    }

    #[inline]
    fn min_raw(&self) -> i64 {
        -(1i64 << (self.int_bits + self.frac_bits))
    }

    pub fn max_value(&self) -> f64 {
        self.decode_raw(self.max_raw())
    }

    pub fn min_value(&self) -> f64 {
        self.decode_raw(self.min_raw())
    }

    fn saturate(&self, raw: i128) -> Rounded {
        if raw > self.max_raw() as i128 {
            Rounded { raw: self.max_raw(), saturated: true }
        } else if raw < self.min_raw() as i128 {
            Rounded { raw: self.min_raw(), saturated: true }
        } else {
            Rounded { raw: raw as i64, saturated: false }
        }
    }

    /// Nearest representable value to `x`.
    pub fn quantize(&self, x: f64) -> Rounded {
        if x.is_nan() {
            return Rounded { raw: 0, saturated: true };
        }
        let scaled = math::round_even(x * math::exp2(self.frac_bits as f64));
        if scaled >= self.max_raw() as f64 {
            return Rounded { raw: self.max_raw(), saturated: scaled > self.max_raw() as f64 };
        }
        if scaled <= self.min_raw() as f64 {
            return Rounded { raw: self.min_raw(), saturated: scaled < self.min_raw() as f64 };
        }
        Rounded { raw: scaled as i64, saturated: false }
    }

    /// Whether `x` lies on the grid inside the range.
    pub fn is_exact(&self, x: f64) -> bool {
        let r = self.quantize(x);
        !r.saturated && self.decode_raw(r.raw) == x
    }

    #[inline]
    pub fn decode_raw(&self, raw: i64) -> f64 {
        raw as f64 * self.resolution()
    }

    /// Two's-complement register label of a raw value.
    #[inline]
    pub fn to_label(&self, raw: i64) -> u64 {
        (raw as u64) & ((1u64 << self.width()) - 1)
    }

    /// Raw value of a register label.
    #[inline]
    pub fn from_label(&self, label: u64) -> i64 {
        let w = self.width();
        let sign = 1u64 << (w - 1);
        let l = label & ((1u64 << w) - 1);
        if l & sign != 0 {
            l as i64 - (1i64 << w)
        } else {
            l as i64
        }
    }

    pub fn decode_label(&self, label: u64) -> f64 {
        self.decode_raw(self.from_label(label))
    }

    pub fn add(&self, a: i64, b: i64) -> Rounded {
        self.saturate(a as i128 + b as i128)
    }

    pub fn mul(&self, a: i64, b: i64) -> Rounded {
        let prod = a as i128 * b as i128;
        self.saturate(shift_round_even(prod, self.frac_bits))
    }

    pub fn square(&self, a: i64) -> Rounded {
        self.mul(a, a)
    }

    /// `a * x + b` with `a` and `b` first quantized to this format, the way a
    /// constant register would hold them.
    pub fn affine(&self, x: i64, a: f64, b: f64) -> Rounded {
        let qa = self.quantize(a);
        let qb = self.quantize(b);
        let ax = self.mul(qa.raw, x);
        let mut r = self.add(ax.raw, qb.raw);
        r.saturated |= qa.saturated || qb.saturated || ax.saturated;
        r
    }

    pub fn cosine(&self, angle: f64) -> Rounded {
        self.quantize(math::cos(angle))
    }
}

/// `v / 2^shift` rounded to nearest, ties to even.
fn shift_round_even(v: i128, shift: u32) -> i128 {
    if shift == 0 {
        return v;
    }
    let floor = v >> shift;
    let rem = v - (floor << shift);
    let half = 1i128 << (shift - 1);
    if rem > half || (rem == half && floor & 1 == 1) {
        floor + 1
    } else {
        floor
    }
}
