//! Select / shift / add datapaths.
//!
//! Nothing in this file multiplies two operands: the pre-computer bank forms
//! odd multiples from shifted copies of the input, and products are sums of
//! shifted bank entries. [`crate::fixedpoint::exact_multiply`] is the oracle.

use crate::asm::alphabet::AlphabetSet;
use crate::asm::quartet::{decompose, encode_group, GroupEncoding, WeightLayout};
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointValue;

/// Odd multiples of one input word, shared by every multiply that consumes
/// the same input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecomputeBank {
    alphabets: AlphabetSet,
    /// Indexed by alphabet; entries for alphabets outside the set stay 0.
    entries: [i64; 16],
}

impl PrecomputeBank {
    pub fn new(input: i64, alphabets: &AlphabetSet) -> Self {
        let mut entries = [0i64; 16];
        for &a in alphabets.alphabets() {
            entries[usize::from(a)] = shift_add(input, u32::from(a));
        }
        PrecomputeBank {
            alphabets: alphabets.clone(),
            entries,
        }
    }

    /// The select stage.
    #[inline]
    pub fn select(&self, alphabet: u32) -> Option<i64> {
        self.alphabets
            .contains(alphabet)
            .then(|| self.entries[alphabet as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, i64)> + '_ {
        self.alphabets
            .alphabets()
            .iter()
            .map(|&a| (u32::from(a), self.entries[usize::from(a)]))
    }

    /// Adder operations the bank spends per input: every alphabet but `1`
    /// needs one add (or subtract) of shifted copies.
    pub fn adder_ops(&self) -> usize {
        self.alphabets.len() - 1
    }
}

/// `k * x` as a sum of shifted copies of `x`.
fn shift_add(x: i64, k: u32) -> i64 {
    (0..u32::BITS)
        .filter(|b| k >> b & 1 == 1)
        .map(|b| x << b)
        .sum()
}

pub fn precompute_bank(t: FixedPointValue, alphabets: &AlphabetSet) -> PrecomputeBank {
    PrecomputeBank::new(i64::from(t.raw()), alphabets)
}

/// One select-and-shift path: `bank[alphabet] << shift`, where `shift`
/// already includes the group's bit position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub alphabet: u8,
    pub shift: u8,
}

/// A weight compiled into control words for the select and shift units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EncodedWeight {
    negative: bool,
    len: u8,
    terms: [Term; 4],
}

impl EncodedWeight {
    pub fn encode(raw: i32, layout: WeightLayout, alphabets: &AlphabetSet) -> Result<Self> {
        let magnitude = raw.unsigned_abs();
        if magnitude > layout.max_magnitude() {
            return Err(Error::InvalidFormat(format!(
                "weight {raw} outside the {}-bit range",
                layout.total_bits()
            )));
        }
        let mut out = EncodedWeight {
            negative: raw < 0,
            len: 0,
            terms: [Term {
                alphabet: 0,
                shift: 0,
            }; 4],
        };
        for slot in layout.slots() {
            let g = (magnitude >> slot.position) & ((1 << slot.bits) - 1);
            if let GroupEncoding::Term { alphabet, shift } = encode_group(g, alphabets, slot.bits)?
            {
                out.terms[usize::from(out.len)] = Term {
                    alphabet: alphabet as u8,
                    shift: (shift + slot.position) as u8,
                };
                out.len += 1;
            }
        }
        Ok(out)
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    /// Non-zero groups, MSB first.
    pub fn terms(&self) -> &[Term] {
        &self.terms[..usize::from(self.len)]
    }

    pub fn ops(&self) -> DatapathOps {
        let n = self.terms().len();
        DatapathOps {
            selects: n,
            shifts: n,
            adds: n.saturating_sub(1),
        }
    }

    /// ASM evaluation: select from the bank, shift, add, apply sign.
    #[inline]
    pub fn apply(&self, bank: &PrecomputeBank) -> i64 {
        let mut sum = 0i64;
        for t in self.terms() {
            let selected = bank.entries[usize::from(t.alphabet)];
            sum += selected << t.shift;
        }
        if self.negative {
            -sum
        } else {
            sum
        }
    }

    /// MAN evaluation: the input itself is shifted, no bank and no select.
    /// Only valid for weights encoded under `{1}`.
    #[inline]
    pub fn apply_shift_only(&self, input: i64) -> i64 {
        let mut sum = 0i64;
        for t in self.terms() {
            debug_assert_eq!(t.alphabet, 1);
            sum += input << t.shift;
        }
        if self.negative {
            -sum
        } else {
            sum
        }
    }
}

/// Per-multiply datapath activity: one select and one shift per non-zero
/// group, plus the adds that merge the shifted partial products.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DatapathOps {
    pub selects: usize,
    pub shifts: usize,
    pub adds: usize,
}

fn weight_layout(w: FixedPointValue) -> Result<WeightLayout> {
    // Reuses decompose's format checks.
    Ok(decompose(w)?.layout)
}

/// Alphabet-set multiply of input `t` by weight `w`. Bit-exact with
/// [`crate::fixedpoint::exact_multiply`] whenever every group is supported.
pub fn asm_multiply(
    t: FixedPointValue,
    w: FixedPointValue,
    alphabets: &AlphabetSet,
) -> Result<i64> {
    let encoded = EncodedWeight::encode(w.raw(), weight_layout(w)?, alphabets)?;
    let bank = precompute_bank(t, alphabets);
    Ok(encoded.apply(&bank))
}

/// Multiplier-less product: shift-and-add of the input with no bank.
pub fn man_multiply(t: FixedPointValue, w: FixedPointValue) -> Result<i64> {
    let encoded = EncodedWeight::encode(w.raw(), weight_layout(w)?, &AlphabetSet::one())?;
    Ok(encoded.apply_shift_only(i64::from(t.raw())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixedpoint::{exact_multiply, QFormat};

    fn t8(raw: i32) -> FixedPointValue {
        FixedPointValue::new(raw, QFormat::INPUT).unwrap()
    }

    fn w8(raw: i32) -> FixedPointValue {
        FixedPointValue::new(raw, QFormat::WEIGHT_8).unwrap()
    }

    #[test]
    fn bank_examples() {
        let bank = precompute_bank(t8(3), &AlphabetSet::four());
        let entries: Vec<_> = bank.iter().collect();
        assert_eq!(entries, vec![(1, 3), (3, 9), (5, 15), (7, 21)]);
        assert_eq!(bank.adder_ops(), 3);

        let zero = precompute_bank(t8(0), &AlphabetSet::full());
        assert!(zero.iter().all(|(_, v)| v == 0));

        let id = precompute_bank(t8(255), &AlphabetSet::one());
        assert_eq!(id.iter().collect::<Vec<_>>(), vec![(1, 255)]);
        assert_eq!(id.select(3), None);
    }

    #[test]
    fn asm_multiply_worked_example() {
        for m in [0, 1, 5, 77, 255] {
            let p = asm_multiply(t8(m), w8(74), &AlphabetSet::four()).unwrap();
            assert_eq!(p, (((m as i64) * 4) << 4) + ((5 * (m as i64)) << 1));
            assert_eq!(p, 74 * m as i64);
        }
        assert_eq!(
            asm_multiply(t8(5), w8(74), &AlphabetSet::four()).unwrap(),
            370
        );
        assert!(matches!(
            asm_multiply(t8(7), w8(105), &AlphabetSet::four()),
            Err(Error::UnsupportedGroupValue { value: 9, .. })
        ));
    }

    #[test]
    fn asm_multiply_handles_sign() {
        assert_eq!(
            asm_multiply(t8(9), w8(-74), &AlphabetSet::four()).unwrap(),
            -666
        );
    }

    #[test]
    fn man_multiply_examples() {
        // 66 = 0100 0010: (t << 2) << 4 plus t << 1.
        assert_eq!(man_multiply(t8(9), w8(66)).unwrap(), 594);
        assert_eq!(
            man_multiply(t8(9), w8(66)).unwrap(),
            ((9 << 2) << 4) + (9 << 1)
        );
        assert_eq!(man_multiply(t8(123), w8(0)).unwrap(), 0);
        assert_eq!(man_multiply(t8(11), w8(-16)).unwrap(), -176);
        assert!(man_multiply(t8(1), w8(3)).is_err());
    }

    #[test]
    fn datapath_ops() {
        let layout = WeightLayout::new(8).unwrap();
        let e = EncodedWeight::encode(74, layout, &AlphabetSet::four()).unwrap();
        assert_eq!(
            e.ops(),
            DatapathOps {
                selects: 2,
                shifts: 2,
                adds: 1
            }
        );
        let e = EncodedWeight::encode(16, layout, &AlphabetSet::four()).unwrap();
        assert_eq!(
            e.ops(),
            DatapathOps {
                selects: 1,
                shifts: 1,
                adds: 0
            }
        );
        let e = EncodedWeight::encode(0, layout, &AlphabetSet::one()).unwrap();
        assert_eq!(e.ops(), DatapathOps::default());
    }

    #[test]
    fn full_set_is_total_8bit() {
        let full = AlphabetSet::full();
        for w in -127..=127 {
            for t in 0..=255 {
                assert_eq!(
                    asm_multiply(t8(t), w8(w), &full).unwrap(),
                    exact_multiply(t8(t), w8(w))
                );
            }
        }
    }

    #[test]
    fn man_matches_asm_one() {
        let one = AlphabetSet::one();
        let layout = WeightLayout::new(8).unwrap();
        for w in (-127..=127).filter(|w: &i32| layout.is_supported(w.unsigned_abs(), &one)) {
            for t in 0..=255 {
                assert_eq!(
                    man_multiply(t8(t), w8(w)).unwrap(),
                    asm_multiply(t8(t), w8(w), &one).unwrap()
                );
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn asm_exact_12bit(t in 0i32..=255, w in -2047i32..=2047) {
                let full = AlphabetSet::full();
                let wf = FixedPointValue::new(w, QFormat::WEIGHT_12).unwrap();
                prop_assert_eq!(asm_multiply(t8(t), wf, &full).unwrap(), exact_multiply(t8(t), wf));
            }
        }
    }
}
