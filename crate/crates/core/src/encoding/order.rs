//! Canonical sign ordering inside each orthographic cluster.

use crate::script::{is_base, is_consonant, sign_weight, ASAT, VIRAMA};

const KINZI_TAIL: i8 = -1;
const STACKED: i8 = 0;
const MEDIAL_YA: char = '\u{103B}';

/// Reads one dependent unit at `i`: the kinzi tail `asat virama C`, a stacked
/// consonant `virama C`, `asat ya-medial` (as in the spelling of "man"), or a
/// single sign.
fn unit_at(chars: &[char], i: usize) -> Option<(i8, usize)> {
    let c = *chars.get(i)?;
    let next = chars.get(i + 1).copied();
    let after = chars.get(i + 2).copied();
    if c == ASAT && next == Some(VIRAMA) && after.is_some_and(is_consonant) {
        return Some((KINZI_TAIL, 3));
    }
    if c == VIRAMA && next.is_some_and(is_consonant) {
        return Some((STACKED, 2));
    }
    if c == ASAT && next == Some(MEDIAL_YA) {
        return Some((sign_weight(MEDIAL_YA).unwrap(), 2));
    }
    sign_weight(c).map(|w| (w, 1))
}

/// Stable-sorts the dependent signs following each base (or orphaned at the
/// start of a run) into canonical storage order. Characters that are neither
/// bases nor known signs are copied through and end the current cluster.
/// Idempotent: a sorted run re-sorts to itself.
pub fn canonical_order(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut units: Vec<(i8, usize, usize)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let opens_run = is_base(c) || unit_at(&chars, i).is_some();
        if !opens_run {
            out.push(c);
            i += 1;
            continue;
        }
        if is_base(c) {
            out.push(c);
            i += 1;
        }
        units.clear();
        while let Some((w, len)) = unit_at(&chars, i) {
            units.push((w, i, len));
            i += len;
        }
        units.sort_by_key(|u| u.0);
        for &(_, start, len) in &units {
            out.extend(&chars[start..start + len]);
        }
    }
    out
}
