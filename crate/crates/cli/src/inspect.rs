use std::fmt::Write as _;

use asmnn::asm::{decompose_raw, encode_group, GroupEncoding, WeightLayout};
use asmnn::constraint::constrain_weight;
use asmnn::{AlphabetSet, ConstraintConfig, FixedPointValue, QFormat};

/// Human-readable decomposition of one raw weight: groups, select/shift
/// encodings, and the constrained replacement.
pub fn trace(raw: i32, bits: u32, alphabets: &AlphabetSet) -> asmnn::Result<String> {
    let format = QFormat::weight(bits)?;
    let value = FixedPointValue::new(raw, format)?;
    let layout = WeightLayout::new(bits)?;
    let d = decompose_raw(raw, layout)?;
    let mut out = String::new();
    let w = &mut out;

    writeln!(
        w,
        "weight {raw} ({format} = {:.6}), {bits}-bit, alphabets {alphabets}",
        value.to_real::<f64>()
    )
    .unwrap();
    let binary: Vec<String> = layout
        .slots()
        .zip(&d.groups)
        .map(|(s, g)| format!("{g:0width$b}", width = s.bits as usize))
        .collect();
    writeln!(
        w,
        "sign {}, magnitude {} = {}",
        if d.negative { '-' } else { '+' },
        d.magnitude(),
        binary.join(" ")
    )
    .unwrap();
    writeln!(w, "groups {:?}", d.groups).unwrap();

    let terms: Vec<String> = layout
        .slots()
        .zip(&d.groups)
        .map(|(s, g)| format!("({g}M)·2^{}", s.position))
        .collect();
    let sum = terms.join(" + ");
    if d.negative {
        writeln!(w, "product -[{sum}]").unwrap();
    } else {
        writeln!(w, "product {sum}").unwrap();
    }

    let mut unsupported = Vec::new();
    for (s, &g) in layout.slots().zip(&d.groups) {
        let how = match encode_group(g, alphabets, s.bits) {
            Ok(GroupEncoding::Zero) => "zero, skipped".to_string(),
            Ok(GroupEncoding::Term { alphabet, shift }) => {
                format!("select {alphabet}M, shift {shift}")
            }
            Err(_) => {
                unsupported.push(g);
                "UNSUPPORTED".to_string()
            }
        };
        writeln!(w, "  group {g} ({}-bit, <<{}): {how}", s.bits, s.position).unwrap();
    }

    let cfg = ConstraintConfig::new(bits, alphabets.clone())?;
    let c = constrain_weight(raw, &cfg);
    if unsupported.is_empty() {
        writeln!(w, "supported: yes").unwrap();
        writeln!(w, "constrained {c} (unchanged)").unwrap();
    } else {
        let list: Vec<String> = unsupported.iter().map(u32::to_string).collect();
        writeln!(w, "supported: no, unsupported groups {}", list.join(", ")).unwrap();
        let cd = decompose_raw(c, layout)?;
        writeln!(
            w,
            "constrained {c} = groups {:?} (error {})",
            cd.groups,
            (i64::from(c) - i64::from(raw)).abs()
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_74() {
        let t = trace(74, 8, &AlphabetSet::four()).unwrap();
        assert!(t.contains("product (4M)·2^4 + (10M)·2^0"), "{t}");
        assert!(t.contains("group 4 (3-bit, <<4): select 1M, shift 2"));
        assert!(t.contains("group 10 (4-bit, <<0): select 5M, shift 1"));
        assert!(t.contains("constrained 74 (unchanged)"));
        assert!(t.contains("magnitude 74 = 100 1010"));
    }

    #[test]
    fn unsupported_group_is_flagged_and_rounded() {
        let t = trace(105, 8, &AlphabetSet::four()).unwrap();
        assert!(t.contains("groups [6, 9]"), "{t}");
        assert!(t.contains("group 9 (4-bit, <<0): UNSUPPORTED"));
        assert!(t.contains("unsupported groups 9"));
        assert!(t.contains("constrained 106 = groups [6, 10] (error 1)"));
    }

    #[test]
    fn negative_and_out_of_range() {
        let t = trace(-16, 12, &AlphabetSet::one()).unwrap();
        assert!(
            t.contains("product -[(0M)·2^8 + (1M)·2^4 + (0M)·2^0]"),
            "{t}"
        );
        assert!(t.contains("zero, skipped"));
        assert!(trace(128, 8, &AlphabetSet::one()).is_err());
        assert!(trace(5, 10, &AlphabetSet::one()).is_err());
    }
}
