//! Scaled two's-complement integers shared by every datapath model.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Word layout of a fixed-point value: `raw / 2^fraction_bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct QFormat {
    total_bits: u8,
    fraction_bits: u8,
    signed: bool,
}

impl QFormat {
    /// Unsigned Q0.8, the input and hidden-activation format.
    pub const INPUT: QFormat = QFormat {
        total_bits: 8,
        fraction_bits: 8,
        signed: false,
    };
    /// Signed Q1.6 weights.
    pub const WEIGHT_8: QFormat = QFormat {
        total_bits: 8,
        fraction_bits: 6,
        signed: true,
    };
    /// Signed Q1.10 weights.
    pub const WEIGHT_12: QFormat = QFormat {
        total_bits: 12,
        fraction_bits: 10,
        signed: true,
    };

    pub fn new(total_bits: u32, fraction_bits: u32, signed: bool) -> Result<Self> {
        if !(1..=16).contains(&total_bits) {
            return Err(Error::InvalidFormat(format!(
                "total_bits {total_bits} outside 1..=16"
            )));
        }
        let usable = total_bits - u32::from(signed);
        if fraction_bits > usable {
            return Err(Error::InvalidFormat(format!(
                "fraction_bits {fraction_bits} exceeds {usable} for a {}{total_bits}-bit word",
                if signed { "signed " } else { "" }
            )));
        }
        Ok(QFormat {
            total_bits: total_bits as u8,
            fraction_bits: fraction_bits as u8,
            signed,
        })
    }

    /// Default signed weight format for a word size: `fraction_bits = total_bits - 2`.
    pub fn weight(total_bits: u32) -> Result<Self> {
        if total_bits < 2 {
            return Err(Error::InvalidFormat(format!(
                "weight words need at least 2 bits, got {total_bits}"
            )));
        }
        QFormat::new(total_bits, total_bits - 2, true)
    }

    pub fn total_bits(self) -> u32 {
        u32::from(self.total_bits)
    }

    pub fn fraction_bits(self) -> u32 {
        u32::from(self.fraction_bits)
    }

    pub fn is_signed(self) -> bool {
        self.signed
    }

    /// Smallest raw value. Signed formats exclude `-2^(N-1)` so that every
    /// value has a representable magnitude.
    pub fn min_raw(self) -> i32 {
        if self.signed {
            -self.max_raw()
        } else {
            0
        }
    }

    pub fn max_raw(self) -> i32 {
        if self.signed {
            (1i32 << (self.total_bits - 1)) - 1
        } else {
            (1i32 << self.total_bits) - 1
        }
    }

    pub fn contains(self, raw: i32) -> bool {
        (self.min_raw()..=self.max_raw()).contains(&raw)
    }

    pub fn saturate(self, raw: i64) -> i32 {
        raw.clamp(i64::from(self.min_raw()), i64::from(self.max_raw())) as i32
    }

    /// Weight of one LSB as a real number.
    pub fn lsb<S: Scalar>(self) -> S {
        S::lit(1.0 / f64::from(1u32 << self.fraction_bits))
    }
}

impl fmt::Display for QFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int_bits = self.total_bits - self.fraction_bits;
        if self.signed {
            write!(f, "Q{}.{}", int_bits - 1, self.fraction_bits)
        } else {
            write!(f, "UQ{}.{}", int_bits, self.fraction_bits)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointValue {
    raw: i32,
    format: QFormat,
}

impl FixedPointValue {
    pub fn new(raw: i32, format: QFormat) -> Result<Self> {
        if !format.contains(raw) {
            return Err(Error::InvalidFormat(format!(
                "raw {raw} outside {}..={} for {format}",
                format.min_raw(),
                format.max_raw()
            )));
        }
        Ok(FixedPointValue { raw, format })
    }

    pub fn zero(format: QFormat) -> Self {
        FixedPointValue { raw: 0, format }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn format(self) -> QFormat {
        self.format
    }

    pub fn to_real<S: Scalar>(self) -> S {
        dequantize(self)
    }
}

/// Rounds `x * 2^fraction_bits` half-to-even and saturates into `fmt`.
/// NaN quantizes to zero.
pub fn quantize<S: Scalar>(x: S, fmt: QFormat) -> FixedPointValue {
    FixedPointValue {
        raw: quantize_raw(x, fmt),
        format: fmt,
    }
}

pub(crate) fn quantize_raw<S: Scalar>(x: S, fmt: QFormat) -> i32 {
    let x = x.to_f64_lossy();
    if x.is_nan() {
        return 0;
    }
    let scaled = (x * f64::from(1u32 << fmt.fraction_bits)).round_ties_even();
    scaled.clamp(f64::from(fmt.min_raw()), f64::from(fmt.max_raw())) as i32
}

pub fn dequantize<S: Scalar>(v: FixedPointValue) -> S {
    S::lit(f64::from(v.raw)) * v.format.lsb::<S>()
}

/// Full-precision integer product of two raw words. Reference for every
/// shift-add datapath.
pub fn exact_multiply(t: FixedPointValue, w: FixedPointValue) -> i64 {
    i64::from(t.raw) * i64::from(w.raw)
}

/// 32-bit saturating dot-product accumulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Accumulator {
    raw: i32,
    fraction_bits: u32,
}

impl Accumulator {
    /// Accumulator for products of `input` and `weight` words.
    pub fn for_product(input: QFormat, weight: QFormat) -> Self {
        Accumulator {
            raw: 0,
            fraction_bits: input.fraction_bits() + weight.fraction_bits(),
        }
    }

    pub fn raw(self) -> i32 {
        self.raw
    }

    pub fn fraction_bits(self) -> u32 {
        self.fraction_bits
    }

    #[inline]
    pub fn add(&mut self, value: i64) {
        self.raw =
            (i64::from(self.raw) + value).clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(total: u32, frac: u32, signed: bool) -> QFormat {
        QFormat::new(total, frac, signed).unwrap()
    }

    #[test]
    fn format_validation() {
        assert!(QFormat::new(0, 0, false).is_err());
        assert!(QFormat::new(17, 0, false).is_err());
        assert!(QFormat::new(8, 8, true).is_err());
        assert!(QFormat::new(8, 7, true).is_ok());
        assert!(QFormat::new(8, 8, false).is_ok());
        assert_eq!(QFormat::weight(8).unwrap(), QFormat::WEIGHT_8);
        assert_eq!(QFormat::weight(12).unwrap(), QFormat::WEIGHT_12);
        assert_eq!(QFormat::WEIGHT_8.to_string(), "Q1.6");
        assert_eq!(QFormat::INPUT.to_string(), "UQ0.8");
    }

    #[test]
    fn signed_minimum_is_excluded() {
        let f = QFormat::WEIGHT_8;
        assert_eq!(f.min_raw(), -127);
        assert_eq!(f.max_raw(), 127);
        assert!(FixedPointValue::new(-128, f).is_err());
        assert_eq!(quantize(-100.0f64, f).raw(), -127);
        assert_eq!(QFormat::INPUT.max_raw(), 255);
        assert!(FixedPointValue::new(-1, QFormat::INPUT).is_err());
    }

    #[test]
    fn quantize_examples() {
        let f = q(8, 6, true);
        assert_eq!(quantize(0.0f64, f).raw(), 0);
        assert_eq!(quantize(0.0f64, QFormat::INPUT).raw(), 0);
        assert_eq!(quantize(1.0f64, f).raw(), 64);
        assert_eq!(quantize(10.0f64, f).raw(), 127);
        assert_eq!(quantize(f64::NAN, f).raw(), 0);
    }

    #[test]
    fn quantize_rounds_half_to_even() {
        let f = q(8, 0, true);
        assert_eq!(quantize(2.5f64, f).raw(), 2);
        assert_eq!(quantize(3.5f64, f).raw(), 4);
        assert_eq!(quantize(-2.5f64, f).raw(), -2);
        assert_eq!(quantize(2.5f32, f).raw(), 2);
    }

    #[test]
    fn dequantize_examples() {
        let f = q(8, 6, true);
        let v = |raw| FixedPointValue::new(raw, f).unwrap();
        assert_eq!(dequantize::<f64>(v(64)), 1.0);
        assert_eq!(dequantize::<f64>(v(-32)), -0.5);
        assert_eq!(dequantize::<f64>(v(0)), 0.0);
        assert_eq!(dequantize::<f32>(v(-32)), -0.5);
    }

    #[test]
    fn exact_multiply_examples() {
        let t = |raw| FixedPointValue::new(raw, QFormat::INPUT).unwrap();
        let w = |raw| FixedPointValue::new(raw, QFormat::WEIGHT_8).unwrap();
        assert_eq!(exact_multiply(t(5), w(74)), 370);
        assert_eq!(exact_multiply(t(3), w(105)), 315);
        assert_eq!(exact_multiply(t(3), w(105)), (1 << 5) * 3 * 3 + 9 * 3);
        assert_eq!(exact_multiply(t(200), w(0)), 0);
    }

    #[test]
    fn exact_multiply_exhaustive_8x8() {
        let a = q(8, 0, true);
        for x in a.min_raw()..=a.max_raw() {
            for y in a.min_raw()..=a.max_raw() {
                let fx = FixedPointValue::new(x, a).unwrap();
                let fy = FixedPointValue::new(y, a).unwrap();
                let wide = i128::from(x) * i128::from(y);
                assert_eq!(i128::from(exact_multiply(fx, fy)), wide);
                assert_eq!(exact_multiply(fx, fy), exact_multiply(fy, fx));
            }
        }
    }

    #[test]
    fn accumulator_saturates_without_wrapping() {
        let max_product =
            i64::from(QFormat::INPUT.max_raw()) * i64::from(QFormat::WEIGHT_12.max_raw());
        let mut acc = Accumulator::for_product(QFormat::INPUT, QFormat::WEIGHT_12);
        let mut peak = 0i32;
        for _ in 0..(1u32 << 20) {
            acc.add(max_product);
            assert!(acc.raw() >= peak);
            peak = acc.raw();
        }
        assert_eq!(acc.raw(), i32::MAX);
        assert_eq!(acc.fraction_bits(), 18);

        let mut neg = Accumulator::for_product(QFormat::INPUT, QFormat::WEIGHT_8);
        for _ in 0..(1u32 << 20) {
            neg.add(-max_product);
        }
        assert_eq!(neg.raw(), i32::MIN);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_format() -> impl Strategy<Value = QFormat> {
            (1u32..=16, any::<bool>()).prop_flat_map(|(bits, signed)| {
                let usable = bits - u32::from(signed);
                (0..=usable).prop_map(move |frac| QFormat::new(bits, frac, signed).unwrap())
            })
        }

        proptest! {
            #[test]
            fn round_trip_within_half_lsb(fmt in any_format(), unit in 0.0f64..1.0) {
                let lo = f64::from(fmt.min_raw()) / f64::from(1u32 << fmt.fraction_bits());
                let hi = f64::from(fmt.max_raw()) / f64::from(1u32 << fmt.fraction_bits());
                let x = lo + unit * (hi - lo);
                let back: f64 = dequantize(quantize(x, fmt));
                let half_lsb = 0.5 / f64::from(1u32 << fmt.fraction_bits());
                prop_assert!((back - x).abs() <= half_lsb + 1e-12);
            }

            #[test]
            fn quantize_is_monotone(fmt in any_format(), a in -1.0e4f64..1.0e4, b in -1.0e4f64..1.0e4) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(quantize(lo, fmt).raw() <= quantize(hi, fmt).raw());
            }

            #[test]
            fn quantize_stays_in_range(fmt in any_format(), x in proptest::num::f64::ANY) {
                prop_assert!(fmt.contains(quantize(x, fmt).raw()));
            }
        }
    }
}
