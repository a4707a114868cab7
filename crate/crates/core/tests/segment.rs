use hatelab_core::encoding::normalize;
use hatelab_core::segment::{
    burmese_ratio, myanmar_syllable_count, segment_syllables, segment_words, split_syllables, strip_emoji,
    Dictionary, SyllableKind,
};
use proptest::prelude::*;

fn text() -> impl Strategy<Value = String> {
    let c = prop_oneof![
        8 => (0x1000u32..=0x104F).prop_map(|c| char::from_u32(c).unwrap()),
        1 => prop::sample::select(vec![' ', 'a', 'b', '7', '😀', '\u{200D}', '\u{FE0F}']),
    ];
    prop::collection::vec(c, 0..30).prop_map(|v| v.into_iter().collect())
}

/// Independent restatement of the boundary rule, one codepoint at a time.
fn oracle_count(text: &str) -> usize {
    let cs: Vec<char> = text.chars().collect();
    let mm = |c: char| ('\u{1000}'..='\u{109F}').contains(&c);
    let mut n = 0;
    for i in 0..cs.len() {
        if !mm(cs[i]) {
            continue;
        }
        let run_start = i == 0 || !mm(cs[i - 1]);
        let c = cs[i] as u32;
        let starts = if (0x1000..=0x102A).contains(&c) {
            let after_virama = i > 0 && cs[i - 1] == '\u{1039}';
            let next = cs.get(i + 1).copied();
            let asat = next == Some('\u{103A}') || (next == Some('\u{1037}') && cs.get(i + 2) == Some(&'\u{103A}'));
            run_start || (!after_virama && !asat)
        } else if (0x102B..=0x103E).contains(&c) {
            run_start
        } else if (0x1040..=0x1049).contains(&c) {
            run_start || !(0x1040..=0x1049).contains(&(cs[i - 1] as u32))
        } else {
            true
        };
        n += starts as usize;
    }
    n
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn syllables_reconstruct_source(s in text()) {
        let syl = split_syllables(&s);
        let joined: String = syl.iter().map(|x| x.text.as_str()).collect();
        prop_assert_eq!(&joined, &s);
        let mut pos = 0;
        for x in &syl {
            prop_assert_eq!(x.start, pos);
            prop_assert_eq!(x.end, pos + x.text.chars().count());
            pos = x.end;
            if x.kind == SyllableKind::Myanmar {
                let all_mm = x.text.chars().all(|c| ('\u{1000}'..='\u{109F}').contains(&c));
                prop_assert!(all_mm);
            }
        }
    }

    #[test]
    fn count_matches_oracle(s in text()) {
        prop_assert_eq!(myanmar_syllable_count(&split_syllables(&s)), oracle_count(&s));
    }

    #[test]
    fn appended_consonant_adds_one(s in text(), c in 0x1000u32..=0x1021) {
        prop_assume!(!s.ends_with('\u{1039}'));
        let before = myanmar_syllable_count(&split_syllables(&s));
        let t = format!("{s}{}", char::from_u32(c).unwrap());
        prop_assert_eq!(myanmar_syllable_count(&split_syllables(&t)), before + 1);
    }

    #[test]
    fn normalized_text_segments(s in text()) {
        let (n, _) = normalize(&s, 0.5).unwrap();
        prop_assert!(segment_syllables(&n).is_ok());
    }

    #[test]
    fn words_cover_myanmar_portion(s in text()) {
        let syl = split_syllables(&s);
        let toks = segment_words(&syl, Dictionary::builtin());
        let mm: String = toks.iter().filter(|t| t.kind == SyllableKind::Myanmar).map(|t| t.text.as_str()).collect();
        let want: String = syl.iter().filter(|x| x.kind == SyllableKind::Myanmar).map(|x| x.text.as_str()).collect();
        prop_assert_eq!(mm, want);
        let mut next = 0;
        for t in &toks {
            prop_assert_eq!(t.syllable_span.0, next);
            if !t.in_dictionary {
                prop_assert_eq!(t.syllable_span.0, t.syllable_span.1);
            }
            next = t.syllable_span.1 + 1;
        }
        prop_assert_eq!(next, syl.len());
    }

    #[test]
    fn ratio_in_unit_interval(s in text()) {
        let r = burmese_ratio(&s);
        prop_assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn emoji_strip_keeps_other_chars(s in text()) {
        let kept: String = s.chars().filter(|c| !matches!(*c, '😀' | '\u{200D}' | '\u{FE0F}')).collect();
        prop_assert_eq!(strip_emoji(&s), kept);
    }
}

#[test]
fn builtin_dictionary_words_segment_to_themselves() {
    let d = Dictionary::builtin();
    for w in hatelab_core::segment::DEFAULT_DICTIONARY.lines().filter(|l| !l.starts_with('#')) {
        assert!(d.contains(w), "{w} not normalized");
        let toks = segment_words(&segment_syllables(w).unwrap(), d);
        assert_eq!(toks.len(), 1, "{w}");
    }
}
