use std::fs;

use asmnn::data::{encode_idx, load_idx};
use asmnn::Error;
use proptest::prelude::*;

fn sample() -> (Vec<u8>, Vec<u8>) {
    let pixels: Vec<u8> = (0..3 * 4 * 5).map(|i| (i * 7 % 256) as u8).collect();
    encode_idx(4, 5, &pixels, &[0, 3, 9])
}

fn load_bytes(img: &[u8], lbl: &[u8]) -> asmnn::Result<asmnn::Dataset> {
    let dir = tempfile::tempdir().unwrap();
    let ip = dir.path().join("images");
    let lp = dir.path().join("labels");
    fs::write(&ip, img).unwrap();
    fs::write(&lp, lbl).unwrap();
    load_idx(&ip, &lp, 0)
}

fn is_data_rejection(e: &Error) -> bool {
    matches!(
        e,
        Error::BadMagic { .. } | Error::Truncated { .. } | Error::CountMismatch { .. }
    )
}

#[test]
fn clean_pair_loads() {
    let (img, lbl) = sample();
    let d = load_bytes(&img, &lbl).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.dim(), 20);
    assert_eq!(d.label(1), 3);
    assert_eq!(d.input(2)[0], (40 * 7 % 256) as u16);
}

#[test]
fn every_header_truncation_is_rejected() {
    let (img, lbl) = sample();
    for cut in 0..img.len() {
        let e = load_bytes(&img[..cut], &lbl).unwrap_err();
        assert!(is_data_rejection(&e), "cut {cut}: {e}");
    }
    for cut in 0..lbl.len() {
        let e = load_bytes(&img, &lbl[..cut]).unwrap_err();
        assert!(is_data_rejection(&e), "cut {cut}: {e}");
    }
}

#[test]
fn swapped_files_fail_on_magic() {
    let (img, lbl) = sample();
    assert!(matches!(
        load_bytes(&lbl, &img),
        Err(Error::BadMagic { .. })
    ));
}

#[test]
fn count_mismatch() {
    let (img, _) = sample();
    let (_, lbl) = encode_idx(4, 5, &[0; 40], &[1, 2]);
    assert!(matches!(
        load_bytes(&img, &lbl),
        Err(Error::CountMismatch {
            images: 3,
            labels: 2
        })
    ));
}

proptest! {
    #[test]
    fn header_mutations_never_panic(
        pos in 0usize..16,
        byte in any::<u8>(),
        on_labels in any::<bool>(),
    ) {
        let (mut img, mut lbl) = sample();
        let target = if on_labels { &mut lbl } else { &mut img };
        let pos = pos.min(target.len() - 1);
        let original = target[pos];
        target[pos] = byte;
        let result = load_bytes(&img, &lbl);
        if original == byte {
            prop_assert!(result.is_ok());
        } else {
            // Magic and counts must be caught. Shrinking image dims still
            // fits the payload; label bytes past 8 are payload.
            match result {
                Ok(d) => prop_assert!(pos >= 8 && (on_labels || d.dim() < 20)),
                Err(e) => prop_assert!(is_data_rejection(&e), "{}", e),
            }
        }
    }

    #[test]
    fn random_bytes_never_panic(img in proptest::collection::vec(any::<u8>(), 0..64),
                                lbl in proptest::collection::vec(any::<u8>(), 0..24)) {
        let _ = load_bytes(&img, &lbl);
    }
}
