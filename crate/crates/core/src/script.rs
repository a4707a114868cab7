//! Myanmar-block character classes shared by normalization and segmentation.

pub const VIRAMA: char = '\u{1039}';
pub const ASAT: char = '\u{103A}';
pub const VOWEL_E: char = '\u{1031}';

/// Any codepoint in the Myanmar block U+1000..U+109F.
pub fn is_myanmar(c: char) -> bool {
    ('\u{1000}'..='\u{109F}').contains(&c)
}

/// Base consonants that can carry medials and stack under a virama.
pub fn is_consonant(c: char) -> bool {
    ('\u{1000}'..='\u{1021}').contains(&c)
}

/// Characters that open a new orthographic cluster: consonants, independent
/// vowels, great sa, digits and the standalone symbols that take signs.
pub fn is_base(c: char) -> bool {
    matches!(c,
        '\u{1000}'..='\u{102A}'
        | '\u{103F}'
        | '\u{1040}'..='\u{1049}'
        | '\u{104C}'..='\u{104F}')
}

/// Position of a dependent sign in canonical storage order: medials, then
/// the e-vowel, upper vowels, lower vowels, aa, anusvara, dot below, asat,
/// visarga. Stacked consonants and the kinzi tail sort ahead of all of these
/// and are handled by the cluster scanner, not here.
pub fn sign_weight(c: char) -> Option<i8> {
    Some(match c {
        '\u{103B}' => 1,
        '\u{103C}' => 2,
        '\u{103D}' => 3,
        '\u{103E}' => 4,
        '\u{1031}' => 5,
        '\u{102D}' | '\u{102E}' | '\u{1032}' => 6,
        '\u{102F}' | '\u{1030}' => 7,
        '\u{102B}' | '\u{102C}' => 8,
        '\u{1036}' => 9,
        '\u{1037}' => 10,
        '\u{103A}' => 11,
        '\u{1038}' => 12,
        _ => return None,
    })
}

/// Dependent signs that attach to the current syllable during segmentation.
pub fn is_dependent(c: char) -> bool {
    matches!(c, '\u{102B}'..='\u{103E}')
}
