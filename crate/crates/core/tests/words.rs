use std::collections::BTreeSet;

use bratteli::words::{
    brute_force_counts, complexity_profile, generate, measure_bounds, return_words, special_factors, BoundsOptions, ComplexityProfile,
    Generator, SubstitutionRule, Word,
};
use proptest::prelude::*;

fn fixed_point(rule: &str, len: usize) -> Word {
    generate(&Generator::substitution(SubstitutionRule::parse(rule).unwrap()).unwrap(), len).unwrap()
}

fn factors(text: &[char], n: usize) -> BTreeSet<String> {
    text.windows(n).map(|w| w.iter().collect()).collect()
}

/// Left, right and bispecial factors of length n, plus the irregular bispecial ones, by enumeration.
fn special_oracle(text: &[char], n: usize) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
    let alphabet: BTreeSet<char> = text.iter().copied().collect();
    let f1 = factors(text, n + 1);
    let f2 = factors(text, n + 2);
    let lefts = |u: &str, f: &BTreeSet<String>| alphabet.iter().filter(|a| f.contains(&format!("{a}{u}"))).count();
    let rights = |u: &str, f: &BTreeSet<String>| alphabet.iter().filter(|b| f.contains(&format!("{u}{b}"))).count();
    let (mut l, mut r, mut b, mut irr) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for u in factors(text, n) {
        let ls = lefts(&u, &f1) >= 2;
        let rs = rights(&u, &f1) >= 2;
        if ls {
            l.insert(u.clone());
        }
        if rs {
            r.insert(u.clone());
        }
        if ls && rs {
            b.insert(u.clone());
            let left_ext: Vec<String> = alphabet.iter().map(|a| format!("{a}{u}")).filter(|x| f1.contains(x)).collect();
            let right_ext: Vec<String> = alphabet.iter().map(|c| format!("{u}{c}")).filter(|x| f1.contains(x)).collect();
            let rs_left = left_ext.iter().filter(|x| rights(x, &f2) >= 2).count();
            let ls_right = right_ext.iter().filter(|x| lefts(x, &f2) >= 2).count();
            if rs_left != 1 || ls_right != 1 {
                irr.insert(u);
            }
        }
    }
    (l, r, b, irr)
}

fn check_special(w: &Word, n_max: usize) {
    let text: Vec<char> = w.text().chars().collect();
    let sf = special_factors(w, n_max).unwrap();
    for lvl in &sf.levels {
        let (l, r, b, irr) = special_oracle(&text, lvl.n);
        let set = |v: &Vec<String>| v.iter().cloned().collect::<BTreeSet<_>>();
        assert_eq!(set(&lvl.left), l, "left, n = {}", lvl.n);
        assert_eq!(set(&lvl.right), r, "right, n = {}", lvl.n);
        assert_eq!(set(&lvl.bispecial), b, "bispecial, n = {}", lvl.n);
        assert_eq!(set(&lvl.irregular), irr, "irregular, n = {}", lvl.n);
    }
}

#[test]
fn thue_morse_special_factors_match_enumeration() {
    let w = fixed_point("a:ab,b:ba", 4096);
    check_special(&w, 16);
    // Thue-Morse has irregular bispecial factors (p(n+1) - p(n) jumps between 2 and 4)
    let sf = special_factors(&w, 16).unwrap();
    assert!(sf.levels.iter().any(|l| !l.irregular.is_empty()));
}

#[test]
fn fibonacci_special_factors_match_enumeration() {
    let w = fixed_point("a:ab,b:a", 4000);
    check_special(&w, 20);
    assert!(special_factors(&w, 20).unwrap().regular_bispecial);
}

#[test]
fn fibonacci_is_sturmian_to_200() {
    let w = fixed_point("a:ab,b:a", 20_000);
    let p = complexity_profile(&w, 200).unwrap();
    for n in 1..=200 {
        assert_eq!(p.p[n], n as u64 + 1);
    }
    assert_eq!(p.periodic_at, None);
    assert!(p.sturmian);
    assert_eq!(brute_force_counts(&w, 12)[..], p.p[1..=12]);
}

#[test]
fn periodic_words_trigger_the_flag() {
    for block in ["ab", "aab", "abcab", "abbab"] {
        let w = generate(&Generator::Periodic(block.into()), 500).unwrap();
        let p = complexity_profile(&w, 30).unwrap();
        assert!(p.periodic_at.is_some(), "{block}");
        assert!(p.p.iter().all(|&x| x <= block.len() as u64));
    }
}

#[test]
fn return_words_to_a_in_fibonacci() {
    let w = fixed_point("a:ab,b:a", 1000);
    let r = return_words(&w, "a").unwrap();
    assert_eq!(r.words, vec!["a".to_string(), "ab".to_string()]);
}

#[test]
fn substitution_language_is_closed() {
    for rule in ["a:ab,b:a", "a:ab,b:ba", "a:aab,b:ab", "a:abc,b:ac,c:b"] {
        let parsed = SubstitutionRule::parse(rule).unwrap();
        let w = generate(&Generator::substitution(parsed.clone()).unwrap(), 30_000).unwrap();
        let text: Vec<char> = w.text().chars().collect();
        let image = parsed.apply(&text[..500]);
        for n in 1..=10 {
            let lang = factors(&text, n);
            for f in factors(&image, n) {
                assert!(lang.contains(&f), "{rule}: {f} missing");
            }
        }
    }
}

#[test]
fn explicit_words_from_text() {
    let w = Word::explicit("abaababaabaab").unwrap();
    let p = complexity_profile(&w, 4).unwrap();
    assert_eq!(p.p[1..], brute_force_counts(&w, 4)[..]);
    assert!(complexity_profile(&w, 13).is_err());
}

#[test]
fn synthetic_bounds() {
    // eventually constant growth K = 4: bound K - 2
    let counts: Vec<u64> = (1..=60).map(|n| 4 * n as u64 + 1).collect();
    let r = measure_bounds(&ComplexityProfile::from_counts(&counts).unwrap(), &BoundsOptions::default());
    let e = r.entries.iter().find(|e| e.rule == "constant_growth").unwrap();
    assert_eq!(e.bound, Some(2));
    // regular bispecial with K = 3: bound K - 1
    let counts: Vec<u64> = (1..=60).map(|n| 3 * n as u64 + 1).collect();
    let prof = ComplexityProfile::from_counts(&counts).unwrap().with_regular_bispecial(true);
    let r = measure_bounds(&prof, &BoundsOptions::default());
    let e = r.entries.iter().find(|e| e.rule == "regular_bispecial").unwrap();
    assert_eq!(e.bound, Some(2));
}

fn words() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::collection::vec(prop::sample::select(vec!['a', 'b']), 20..200),
        prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c']), 20..200),
    ]
    .prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn automaton_counts_match_brute_force(text in words()) {
        let w = Word::explicit(&text).unwrap();
        let n = 12.min(w.len() - 1);
        let p = complexity_profile(&w, n).unwrap();
        prop_assert_eq!(&p.p[1..], &brute_force_counts(&w, n)[..]);
    }

    #[test]
    fn special_factors_match_enumeration(text in words()) {
        let w = Word::explicit(&text).unwrap();
        check_special(&w, 6.min(w.len() - 1));
    }

    #[test]
    fn profiles_are_subadditive(text in words(), rule in prop::sample::select(vec!["a:ab,b:a", "a:ab,b:ba", "a:abc,b:ac,c:b", "a:aab,b:ab"])) {
        let w = Word::explicit(&text).unwrap();
        let p = complexity_profile(&w, 10.min(w.len() - 1)).unwrap();
        prop_assert!(p.is_subadditive());
        let s = fixed_point(rule, 3000);
        let ps = complexity_profile(&s, 40).unwrap();
        prop_assert!(ps.is_subadditive());
        prop_assert!(ps.is_monotone());
    }
}
