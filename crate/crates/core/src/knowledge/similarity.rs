//! Error-message similarity: longest contiguous run of shared words.

use std::fmt;

/// Lowercase alphanumeric words of an error message, punctuation dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    /// Builds a sequence from already-tokenized words. Callers are trusted to
    /// pass lowercase alphanumeric tokens.
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

pub fn tokenize(message: &str) -> TokenSequence {
    // Lowercase first: case mapping can emit non-alphanumeric marks.
    TokenSequence(
        message
            .to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect(),
    )
}

/// Result of [`match_length`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceMatch {
    pub length: usize,
    /// Start of the matched run in the first sequence.
    pub start_in_a: usize,
    pub matched: Vec<String>,
}

/// Longest common contiguous token run between `a` and `b`.
///
/// Dynamic programming over `|a| x |b|` with two rolling rows sized by the
/// shorter sequence. Among runs of maximal length the one starting earliest in
/// `a` is returned.
pub fn match_length(a: &TokenSequence, b: &TokenSequence) -> SequenceMatch {
    let (a, b) = (a.tokens(), b.tokens());
    // `outer` drives the rows, `inner` sizes them; `a_is_outer` maps cells back.
    let a_is_outer = a.len() >= b.len();
    let (outer, inner) = if a_is_outer { (a, b) } else { (b, a) };

    let mut prev = vec![0usize; inner.len() + 1];
    let mut curr = vec![0usize; inner.len() + 1];
    let mut best_len = 0;
    let mut best_end_a = 0; // exclusive end index in `a`
    for i in 1..=outer.len() {
        for j in 1..=inner.len() {
            curr[j] = if outer[i - 1] == inner[j - 1] {
                prev[j - 1] + 1
            } else {
                0
            };
            let len = curr[j];
            if len == 0 {
                continue;
            }
            let end_a = if a_is_outer { i } else { j };
            if len > best_len || (len == best_len && end_a < best_end_a) {
                best_len = len;
                best_end_a = end_a;
            }
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let start = best_end_a - best_len;
    SequenceMatch {
        length: best_len,
        start_in_a: start,
        matched: a[start..best_end_a].to_vec(),
    }
}
