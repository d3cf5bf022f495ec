use super::CorpusError;

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

fn count_part(part: &str) -> usize {
    let chars: Vec<char> = part.chars().filter(|c| c.is_alphabetic()).flat_map(char::to_lowercase).collect();
    let mut groups = 0;
    let mut in_group = false;
    for &c in &chars {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let n = chars.len();
    if n >= 2 && chars[n - 1] == 'e' && chars[n - 2] != 'l' && groups > 0 {
        groups -= 1;
    }
    groups.max(1)
}

/// Heuristic syllable count: maximal vowel groups (`aeiouy`), minus one for a
/// terminal silent `e` not preceded by `l`, clamped to at least one.
/// Hyphenated compounds are counted part by part.
pub fn count_syllables(word: &str) -> Result<usize, CorpusError> {
    let valid = !word.is_empty()
        && word.chars().next().is_some_and(char::is_alphabetic)
        && word.chars().last().is_some_and(char::is_alphabetic)
        && word
            .chars()
            .all(|c| c.is_alphabetic() || matches!(c, '-' | '\'' | '\u{2019}' | '\u{2010}' | '\u{2011}'));
    if !valid {
        return Err(CorpusError::InvalidWord(word.to_string()));
    }
    Ok(word
        .split(['-', '\u{2010}', '\u{2011}'])
        .filter(|p| !p.is_empty())
        .map(count_part)
        .sum())
}
