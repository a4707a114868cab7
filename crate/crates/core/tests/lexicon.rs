use std::collections::BTreeSet;

use hatelab_core::lexicon::{build_matcher, load_lexicon, merge_lexicons, HateTerm, Lexicon, LexiconError};
use proptest::prelude::*;

fn lex(terms: &[String], source: &str) -> Lexicon {
    Lexicon::from_terms(terms.iter().map(|t| HateTerm { term: t.clone(), source: source.into(), note: String::new() }))
}

fn small_alphabet() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'က', 'ခ']), 1..4).prop_map(|v| v.into_iter().collect())
}

fn brute_force(terms: &[String], text: &str) -> BTreeSet<(String, usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = BTreeSet::new();
    for t in terms {
        let tc: Vec<char> = t.chars().collect();
        for s in 0..chars.len() {
            if chars[s..].starts_with(&tc) {
                out.insert((t.clone(), s, s + tc.len()));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matcher_equals_brute_force(
        terms in prop::collection::vec(small_alphabet(), 1..6),
        text in prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'က', 'ခ', ' ']), 0..20),
    ) {
        let text: String = text.into_iter().collect();
        let l = lex(&terms, "t");
        let m = build_matcher(&l);
        let hits = m.match_terms(&text, "p");
        let got: BTreeSet<_> = hits.iter().map(|h| (h.term.term.clone(), h.start, h.end)).collect();
        let uniq: Vec<String> = l.terms.iter().map(|t| t.term.clone()).collect();
        prop_assert_eq!(got.len(), hits.len());
        prop_assert_eq!(got, brute_force(&uniq, &text));
        let chars: Vec<char> = text.chars().collect();
        for w in hits.windows(2) {
            prop_assert!(w[0].start < w[1].start || (w[0].start == w[1].start && w[0].end > w[1].end));
        }
        for h in &hits {
            let slice: String = chars[h.start..h.end].iter().collect();
            prop_assert_eq!(slice, h.term.term.clone());
        }
    }

    #[test]
    fn merge_commutes_and_settles(
        a in prop::collection::vec(small_alphabet(), 0..8),
        b in prop::collection::vec(small_alphabet(), 0..8),
    ) {
        let (la, lb) = (lex(&a, "a"), lex(&b, "b"));
        let (ab, rab) = merge_lexicons(&la, &lb);
        let (ba, rba) = merge_lexicons(&lb, &la);
        let set = |l: &Lexicon| l.terms.iter().map(|t| t.term.clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(set(&ab), set(&ba));
        prop_assert_eq!(rab.exact_duplicates.count, rba.exact_duplicates.count);
        prop_assert_eq!(rab.total_terms, la.len() + lb.len() - rab.exact_duplicates.count);
        prop_assert_eq!(&rab.containments, &rba.containments);
        let (again, r2) = merge_lexicons(&ab, &ab);
        prop_assert_eq!(&again.terms, &ab.terms);
        prop_assert_eq!(r2.exact_duplicates.count, ab.len());
        let (with_b, _) = merge_lexicons(&ab, &lb);
        prop_assert_eq!(&with_b.terms, &ab.terms);
    }
}

#[test]
fn seventy_two_plus_eighty_eight() {
    let a: Vec<String> = (0..72).map(|i| format!("a{i:03}")).collect();
    let mut b: Vec<String> = (0..86).map(|i| format!("b{i:03}")).collect();
    b.push("a005".into());
    b.push("a017".into());
    let (m, r) = merge_lexicons(&lex(&a, "hatebase"), &lex(&b, "phandeeyar"));
    assert_eq!(m.len(), 158);
    assert_eq!(r.total_terms, 158);
    assert_eq!(r.exact_duplicates.terms, vec!["a005", "a017"]);
}

#[test]
fn load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.tsv");
    std::fs::write(&p, "# nothing\n\n").unwrap();
    assert!(matches!(load_lexicon(&p, "x"), Err(LexiconError::EmptyLexicon(_))));
    assert!(matches!(load_lexicon(dir.path().join("missing"), "x"), Err(LexiconError::FileUnreadable { .. })));
    std::fs::write(&p, "t1\tcustom\tslur\nt2\n").unwrap();
    let l = load_lexicon(&p, "x").unwrap();
    assert_eq!(l.len(), 2);
    let (m, _) = merge_lexicons(&l, &l);
    let back = Lexicon::parse(&m.to_tsv(), "y");
    assert_eq!(back.terms, l.terms);
}
