/// Edit distance between two strings counted in Unicode scalar values.
///
/// Insertions, deletions and substitutions all cost one. The table is filled
/// row by row so only two rows are kept alive.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return a.len().max(b.len());
    }
    // Keep the shorter string along the row.
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };

    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut cur = vec![0usize; short.len() + 1];
    for (i, lc) in long.iter().enumerate() {
        cur[0] = i + 1;
        for (j, sc) in short.iter().enumerate() {
            let substitution = prev[j] + usize::from(lc != sc);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Similarity in `[0, 1]`: `1 - distance / max(len)`, 1.0 when both are empty.
pub fn similarity(distance: usize, a_len: usize, b_len: usize) -> f64 {
    let longest = a_len.max(b_len);
    if longest == 0 {
        1.0
    } else {
        1.0 - distance as f64 / longest as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_cases() {
        assert_eq!(levenshtein("", ""), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("kitten", "kitten"), 0);
    }

    #[test]
    fn classic_pairs() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("flaw", "lawn"), 2);
        assert_eq!(levenshtein("Maurizio", "Fabrizio"), 2);
        assert_eq!(levenshtein("raise", "race"), 2);
    }

    #[test]
    fn counts_scalars_not_bytes() {
        assert_eq!(levenshtein("č", "c"), 1);
        assert_eq!(levenshtein("Nonamečič", "Nonamecic"), 2);
    }

    #[test]
    fn similarity_bounds() {
        assert_eq!(similarity(0, 0, 0), 1.0);
        assert_eq!(similarity(4, 5, 9), 1.0 - 4.0 / 9.0);
        assert_eq!(similarity(3, 0, 3), 0.0);
    }
}
