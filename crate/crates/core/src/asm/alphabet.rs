use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Widest group any weight layout uses.
pub const MAX_GROUP_BITS: u32 = 4;

/// Odd multiples of the input produced by the pre-computer bank.
///
/// Stored sorted and deduplicated. `1` is mandatory so that powers of two
/// (and hence the MAN datapath) are always reachable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AlphabetSet {
    alphabets: Vec<u8>,
}

impl AlphabetSet {
    pub fn new(alphabets: impl IntoIterator<Item = u32>) -> Result<Self> {
        let mut v = Vec::new();
        for a in alphabets {
            if a % 2 == 0 {
                return Err(Error::InvalidAlphabetSet(format!(
                    "alphabet {a} is not odd"
                )));
            }
            if a >= 1 << MAX_GROUP_BITS {
                return Err(Error::InvalidAlphabetSet(format!(
                    "alphabet {a} exceeds the {MAX_GROUP_BITS}-bit group range"
                )));
            }
            v.push(a as u8);
        }
        v.sort_unstable();
        v.dedup();
        if v.first() != Some(&1) {
            return Err(Error::InvalidAlphabetSet("alphabet 1 is required".into()));
        }
        Ok(AlphabetSet { alphabets: v })
    }

    /// `{1}`: the multiplier-less configuration.
    pub fn one() -> Self {
        AlphabetSet { alphabets: vec![1] }
    }

    pub fn two() -> Self {
        AlphabetSet {
            alphabets: vec![1, 3],
        }
    }

    pub fn four() -> Self {
        AlphabetSet {
            alphabets: vec![1, 3, 5, 7],
        }
    }

    /// All eight odd values below 16; supports every 4-bit group.
    pub fn full() -> Self {
        AlphabetSet {
            alphabets: vec![1, 3, 5, 7, 9, 11, 13, 15],
        }
    }

    /// The nested escalation ladder `{1} ⊂ {1,3} ⊂ {1,3,5,7} ⊂ full`.
    pub fn ladder() -> Vec<AlphabetSet> {
        vec![Self::one(), Self::two(), Self::four(), Self::full()]
    }

    pub fn alphabets(&self) -> &[u8] {
        &self.alphabets
    }

    pub fn len(&self) -> usize {
        self.alphabets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabets.is_empty()
    }

    pub fn contains(&self, alphabet: u32) -> bool {
        alphabet < 256 && self.alphabets.binary_search(&(alphabet as u8)).is_ok()
    }

    pub fn is_subset(&self, other: &AlphabetSet) -> bool {
        self.alphabets.iter().all(|&a| other.contains(u32::from(a)))
    }

    /// Bit `v` is set iff group value `v` is `alphabet << shift` for some
    /// alphabet in the set, or zero.
    pub fn supported_mask(&self, group_bits: u32) -> u16 {
        assert!(
            (1..=MAX_GROUP_BITS).contains(&group_bits),
            "group_bits {group_bits} outside 1..={MAX_GROUP_BITS}"
        );
        let limit = 1u32 << group_bits;
        let mut mask = 1u16;
        for &a in &self.alphabets {
            let mut v = u32::from(a);
            while v < limit {
                mask |= 1 << v;
                v <<= 1;
            }
        }
        mask
    }

    pub fn supports(&self, value: u32, group_bits: u32) -> bool {
        value < (1 << group_bits) && self.supported_mask(group_bits) & (1 << value) != 0
    }

    /// Sorted group values reachable by one select and one shift, plus zero.
    pub fn supported_values(&self, group_bits: u32) -> Vec<u32> {
        let mask = self.supported_mask(group_bits);
        (0..1u32 << group_bits)
            .filter(|v| mask & (1 << v) != 0)
            .collect()
    }

    pub fn unsupported_values(&self, group_bits: u32) -> Vec<u32> {
        let mask = self.supported_mask(group_bits);
        (0..1u32 << group_bits)
            .filter(|v| mask & (1 << v) == 0)
            .collect()
    }

    /// Compact label such as `1-3-5-7`, safe in file names and CSV cells.
    pub fn label(&self) -> String {
        self.join("-")
    }

    fn join(&self, sep: &str) -> String {
        self.alphabets
            .iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(sep)
    }
}

impl fmt::Display for AlphabetSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.join(","))
    }
}

/// Accepts `1,3,5,7`, `{1,3,5,7}`, `1-3-5-7` or the names `one`, `two`,
/// `four`, `full`.
impl FromStr for AlphabetSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "one" | "man" => return Ok(Self::one()),
            "two" => return Ok(Self::two()),
            "four" => return Ok(Self::four()),
            "full" => return Ok(Self::full()),
            _ => {}
        }
        let body = s.trim_start_matches('{').trim_end_matches('}');
        let values = body
            .split([',', '-', ';', ' '])
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| Error::InvalidAlphabetSet(format!("cannot parse {t:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        AlphabetSet::new(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(alphabets: &[u32], group_bits: u32) -> Vec<u32> {
        let mut out = vec![0];
        for v in 1..(1u32 << group_bits) {
            let reachable = alphabets
                .iter()
                .any(|&a| (0..group_bits).any(|s| a << s == v));
            if reachable {
                out.push(v);
            }
        }
        out
    }

    #[test]
    fn rejects_invalid_sets() {
        assert!(AlphabetSet::new([1, 2]).is_err());
        assert!(AlphabetSet::new([3, 5]).is_err());
        assert!(AlphabetSet::new([1, 17]).is_err());
        assert!(AlphabetSet::new([]).is_err());
        assert_eq!(
            AlphabetSet::new([7, 1, 3, 5, 3]).unwrap(),
            AlphabetSet::four()
        );
    }

    #[test]
    fn four_alphabets_support_twelve_values() {
        let a = AlphabetSet::four();
        assert_eq!(
            a.supported_values(4),
            vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14]
        );
        assert_eq!(a.unsupported_values(4), vec![9, 11, 13, 15]);
    }

    #[test]
    fn two_alphabets_support_eight_values() {
        let a = AlphabetSet::two();
        assert_eq!(a.supported_values(4), vec![0, 1, 2, 3, 4, 6, 8, 12]);
        assert_eq!(a.unsupported_values(4), vec![5, 7, 9, 10, 11, 13, 14, 15]);
        assert_eq!(a.supported_values(3), vec![0, 1, 2, 3, 4, 6]);
        assert_eq!(a.unsupported_values(3), vec![5, 7]);
    }

    #[test]
    fn one_alphabet_supports_powers_of_two() {
        assert_eq!(AlphabetSet::one().supported_values(4), brute_force(&[1], 4));
        assert_eq!(AlphabetSet::one().supported_values(4), vec![0, 1, 2, 4, 8]);
    }

    #[test]
    fn cardinalities_match_brute_force() {
        let expected = [5, 8, 12, 16];
        for (set, n) in AlphabetSet::ladder().iter().zip(expected) {
            let alphabets: Vec<u32> = set.alphabets().iter().map(|&a| u32::from(a)).collect();
            assert_eq!(set.supported_values(4), brute_force(&alphabets, 4));
            assert_eq!(set.supported_values(3), brute_force(&alphabets, 3));
            assert_eq!(set.supported_values(4).len(), n, "{set}");
        }
        assert_eq!(AlphabetSet::full().supported_values(3).len(), 8);
    }

    #[test]
    fn ladder_is_nested() {
        let ladder = AlphabetSet::ladder();
        for pair in ladder.windows(2) {
            assert!(pair[0].is_subset(&pair[1]));
            assert!(!pair[1].is_subset(&pair[0]));
            let m0 = pair[0].supported_mask(4);
            let m1 = pair[1].supported_mask(4);
            assert_eq!(m0 & m1, m0);
        }
    }

    #[test]
    fn parse_and_display() {
        for text in ["1,3,5,7", "{1,3,5,7}", "1-3-5-7", "four", " 7 5 3 1 "] {
            assert_eq!(
                text.parse::<AlphabetSet>().unwrap(),
                AlphabetSet::four(),
                "{text}"
            );
        }
        assert_eq!(AlphabetSet::two().to_string(), "{1,3}");
        assert_eq!(AlphabetSet::full().label(), "1-3-5-7-9-11-13-15");
        assert!("1,x".parse::<AlphabetSet>().is_err());
    }
}
