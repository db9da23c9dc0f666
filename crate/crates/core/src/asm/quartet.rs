use crate::asm::alphabet::AlphabetSet;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointValue;

/// One bit group of a weight magnitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupSlot {
    pub bits: u32,
    /// Bit offset of the group's LSB inside the magnitude.
    pub position: u32,
}

/// Group layout of a signed weight word: the sign bit is dropped, the
/// remaining `N-1` bits split MSB-first into a 3-bit group followed by
/// 4-bit quartets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct WeightLayout {
    total_bits: u32,
}

impl WeightLayout {
    pub fn new(total_bits: u32) -> Result<Self> {
        if !(4..=16).contains(&total_bits) || !total_bits.is_multiple_of(4) {
            return Err(Error::InvalidFormat(format!(
                "weight width {total_bits} cannot be split into a 3-bit group plus quartets"
            )));
        }
        Ok(WeightLayout { total_bits })
    }

    pub fn total_bits(self) -> u32 {
        self.total_bits
    }

    pub fn group_count(self) -> usize {
        (self.total_bits / 4) as usize
    }

    pub fn max_magnitude(self) -> u32 {
        (1 << (self.total_bits - 1)) - 1
    }

    /// Group slots, MSB group first.
    pub fn slots(self) -> impl DoubleEndedIterator<Item = GroupSlot> + ExactSizeIterator {
        let n = self.group_count() as u32;
        (0..n).map(move |i| GroupSlot {
            bits: if i == 0 { 3 } else { 4 },
            position: 4 * (n - 1 - i),
        })
    }

    pub fn split(self, magnitude: u32) -> Vec<u32> {
        self.slots()
            .map(|s| (magnitude >> s.position) & ((1 << s.bits) - 1))
            .collect()
    }

    /// True when every group of `magnitude` is producible by `alphabets`.
    pub fn is_supported(self, magnitude: u32, alphabets: &AlphabetSet) -> bool {
        magnitude <= self.max_magnitude()
            && self.slots().all(|s| {
                let g = (magnitude >> s.position) & ((1 << s.bits) - 1);
                alphabets.supports(g, s.bits)
            })
    }
}

/// Sign plus bit groups of a weight magnitude, MSB group first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuartetDecomposition {
    pub negative: bool,
    pub groups: Vec<u32>,
    pub layout: WeightLayout,
}

impl QuartetDecomposition {
    pub fn sign(&self) -> i32 {
        if self.negative {
            -1
        } else {
            1
        }
    }

    pub fn magnitude(&self) -> u32 {
        self.layout
            .slots()
            .zip(&self.groups)
            .map(|(s, &g)| g << s.position)
            .sum()
    }

    pub fn reassemble(&self) -> i32 {
        self.sign() * self.magnitude() as i32
    }
}

pub fn decompose(w: FixedPointValue) -> Result<QuartetDecomposition> {
    if !w.format().is_signed() {
        return Err(Error::InvalidFormat(format!(
            "weights must be signed, got {}",
            w.format()
        )));
    }
    decompose_raw(w.raw(), WeightLayout::new(w.format().total_bits())?)
}

pub fn decompose_raw(raw: i32, layout: WeightLayout) -> Result<QuartetDecomposition> {
    let magnitude = raw.unsigned_abs();
    if magnitude > layout.max_magnitude() {
        return Err(Error::InvalidFormat(format!(
            "|{raw}| exceeds the {}-bit magnitude range",
            layout.total_bits() - 1
        )));
    }
    Ok(QuartetDecomposition {
        negative: raw < 0,
        groups: layout.split(magnitude),
        layout,
    })
}

/// How the select and shift stages produce one group value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GroupEncoding {
    Zero,
    Term { alphabet: u32, shift: u32 },
}

impl GroupEncoding {
    pub fn value(self) -> u32 {
        match self {
            GroupEncoding::Zero => 0,
            GroupEncoding::Term { alphabet, shift } => alphabet << shift,
        }
    }
}

/// Splits `value` into `alphabet << shift`.
///
/// Alphabets are odd, so the odd part of `value` is the only candidate and
/// the largest-alphabet tie-break is automatic.
pub fn encode_group(value: u32, alphabets: &AlphabetSet, group_bits: u32) -> Result<GroupEncoding> {
    if value == 0 {
        return Ok(GroupEncoding::Zero);
    }
    let shift = value.trailing_zeros();
    let alphabet = value >> shift;
    if value >= 1 << group_bits || !alphabets.contains(alphabet) {
        return Err(Error::UnsupportedGroupValue {
            value,
            group_bits,
            alphabets: alphabets.to_string(),
        });
    }
    Ok(GroupEncoding::Term { alphabet, shift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::QFormat;

    fn w8(raw: i32) -> FixedPointValue {
        FixedPointValue::new(raw, QFormat::WEIGHT_8).unwrap()
    }

    #[test]
    fn layout_shapes() {
        let l8 = WeightLayout::new(8).unwrap();
        let slots: Vec<_> = l8.slots().collect();
        assert_eq!(
            slots,
            vec![
                GroupSlot {
                    bits: 3,
                    position: 4
                },
                GroupSlot {
                    bits: 4,
                    position: 0
                }
            ]
        );
        let l12 = WeightLayout::new(12).unwrap();
        let pos: Vec<_> = l12.slots().map(|s| (s.bits, s.position)).collect();
        assert_eq!(pos, vec![(3, 8), (4, 4), (4, 0)]);
        assert!(WeightLayout::new(10).is_err());
        assert!(WeightLayout::new(20).is_err());
    }

    #[test]
    fn decompose_examples() {
        let d = decompose(w8(105)).unwrap();
        assert_eq!((d.negative, d.groups.clone()), (false, vec![6, 9]));
        // 2^5 * 3 + 2^0 * 9: the upper group 6 is 3 shifted once more.
        assert_eq!((3 << 5) + 9, 105);

        let d = decompose(w8(74)).unwrap();
        assert_eq!((d.negative, d.groups.clone()), (false, vec![4, 10]));

        let d = decompose(w8(-1)).unwrap();
        assert_eq!((d.negative, d.groups.clone()), (true, vec![0, 1]));

        let d = decompose(w8(66)).unwrap();
        assert_eq!(d.groups, vec![4, 2]);
    }

    #[test]
    fn decompose_rejects_unsigned() {
        let t = FixedPointValue::new(5, QFormat::INPUT).unwrap();
        assert!(decompose(t).is_err());
    }

    #[test]
    fn decompose_reassemble_exhaustive_8bit() {
        for raw in -127..=127 {
            let d = decompose(w8(raw)).unwrap();
            assert_eq!(d.reassemble(), raw);
            assert!(d.groups[0] < 8 && d.groups[1] < 16);
        }
    }

    #[test]
    fn encode_group_examples() {
        let a = AlphabetSet::four();
        assert_eq!(
            encode_group(10, &a, 4).unwrap(),
            GroupEncoding::Term {
                alphabet: 5,
                shift: 1
            }
        );
        assert_eq!(
            encode_group(4, &a, 4).unwrap(),
            GroupEncoding::Term {
                alphabet: 1,
                shift: 2
            }
        );
        assert_eq!(encode_group(0, &a, 4).unwrap(), GroupEncoding::Zero);
        assert!(matches!(
            encode_group(9, &a, 4),
            Err(Error::UnsupportedGroupValue { value: 9, .. })
        ));
        assert_eq!(
            encode_group(12, &AlphabetSet::two(), 4).unwrap(),
            GroupEncoding::Term {
                alphabet: 3,
                shift: 2
            }
        );
        // 9 fits a 4-bit group but not the 3-bit sign-adjacent one.
        assert!(encode_group(9, &AlphabetSet::full(), 3).is_err());
    }

    #[test]
    fn encode_group_matches_supported_values() {
        for a in AlphabetSet::ladder() {
            for bits in [3, 4] {
                for v in 0..(1 << bits) {
                    match encode_group(v, &a, bits) {
                        Ok(e) => {
                            assert!(a.supports(v, bits));
                            assert_eq!(e.value(), v);
                        }
                        Err(_) => assert!(!a.supports(v, bits)),
                    }
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn reassemble_is_identity_12bit(raw in -2047i32..=2047) {
                let w = FixedPointValue::new(raw, QFormat::WEIGHT_12).unwrap();
                let d = decompose(w).unwrap();
                prop_assert_eq!(d.groups.len(), 3);
                prop_assert_eq!(d.reassemble(), raw);
            }
        }
    }
}
