mod common;

use common::*;
use proptest::prelude::*;
use sigdex::encoder::{self, assemble, encode_text, encode_text_linear, tower_height};
use sigdex::lce_engine::uniq_of_string;
use sigdex::*;

fn text() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        prop::collection::vec(b'a'..b'c', 1..1500),
        prop::collection::vec(b'a'..b'e', 1..1500),
        prop::collection::vec(b'a'..=b'z', 1..1500),
        (1usize..3000).prop_map(unary),
        (1usize..3000).prop_map(periodic),
        (1usize..3000).prop_map(fibonacci),
        (1usize..3000).prop_map(thue_morse),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn both_builders_decode(t in text()) {
        let mut d = SignatureDag::new(1 << 16);
        let p = ParseParams::new(d.m());
        let r = encode_text(&mut d, &p, &t).unwrap();
        prop_assert_eq!(d.expand_all(r), t.clone());
        d.audit_encoding().unwrap();
        // in the same store the level-by-level build finds the same root
        let before = d.len();
        let r2 = encode_text_linear(&mut d, &p, &t).unwrap();
        prop_assert_eq!(r2, r);
        prop_assert_eq!(d.len(), before);
        let h = tower_height(&d, r) as f64;
        prop_assert!(h <= 4.0 * log2(t.len() as u64) + 8.0);
    }

    #[test]
    fn common_sequence_assembles_to_root(t in text()) {
        let mut d = SignatureDag::new(1 << 16);
        let p = ParseParams::new(d.m());
        let r = encode_text_linear(&mut d, &p, &t).unwrap();
        d.replace_root(Some(r)).unwrap();
        let u = uniq_of_string(&mut d, &p, &t).unwrap();
        prop_assert_eq!(assemble(&mut d, &p, &u.pieces()).unwrap(), Some(r));
    }
}

#[test]
fn example_texts() {
    let mut d = SignatureDag::new(1 << 10);
    let p = ParseParams::new(d.m());
    let r = encode_text(&mut d, &p, b"CABCABBCABCABCAB").unwrap();
    assert_eq!(d.length(r), 16);
    assert_eq!(d.text(), b"CABCABBCABCABCAB".to_vec());
    let r = encode_text(&mut d, &p, b"A").unwrap();
    assert_eq!(d.assign(r), Assignment::Run(d.lookup(&Assignment::Char(b'A')).unwrap(), 1));
    assert!(d.level(r).is_pow());
    assert_eq!(d.len(), 2);
}

#[test]
fn unary_collapses() {
    for k in [1usize, 2, 7, 100, 4096, 65536] {
        let mut d = SignatureDag::new(1 << 20);
        let p = ParseParams::new(d.m());
        let r = encode_text_linear(&mut d, &p, &unary(k)).unwrap();
        d.replace_root(Some(r)).unwrap();
        assert_eq!(d.len(), 2, "a^{k} is one run over one character");
    }
}

#[test]
fn levels_never_reuse_lower_ids() {
    let mut d = SignatureDag::new(1 << 16);
    let p = ParseParams::new(d.m());
    let t = fibonacci(5000);
    let r = encode_text_linear(&mut d, &p, &t).unwrap();
    d.replace_root(Some(r)).unwrap();
    d.audit_encoding().unwrap();
    let mut s: Vec<Sig> = t.iter().map(|&c| d.lookup(&Assignment::Char(c)).unwrap()).collect();
    let mut seen = std::collections::BTreeSet::new();
    loop {
        let pow = encoder::pow_level(&mut d, &s).unwrap();
        let here: std::collections::BTreeSet<Sig> = pow.iter().copied().collect();
        assert!(here.is_disjoint(&seen));
        seen.extend(s.iter().copied());
        if pow.len() == 1 {
            assert_eq!(pow[0], r);
            break;
        }
        seen.extend(here);
        s = encoder::shrink_level(&mut d, &p, &pow).unwrap();
    }
}

#[test]
fn chunk_length_has_a_floor() {
    assert_eq!(encoder::chunk_len(10, 1 << 20), 64);
    assert!(encoder::chunk_len(1 << 40, 1 << 30) > 64);
}

#[test]
fn capacity_is_enforced() {
    let mut d = SignatureDag::new(64);
    let p = ParseParams::new(d.m());
    assert!(matches!(encode_text(&mut d, &p, &[b'a'; 17]), Err(SigdexError::CapacityExhausted(_))));
    assert!(encode_text(&mut d, &p, b"").is_err());
}
