//! Text front-end: punctuation-driven segmentation, tokenization,
//! vocabulary and bag-of-words features.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// Characters after which a message is split and emotion may be injected.
pub const SPLIT_PUNCTUATION: [char; 5] = [',', '.', ':', '?', '!'];

pub const UNK: u32 = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// A trimmed piece of a message between two split points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub text: String,
    /// Byte offsets `[start, end)` of `text` in the source message.
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub token_ids: Vec<u32>,
    pub span: (usize, usize),
}

/// Byte offsets immediately after every split punctuation mark.
pub fn insertion_positions(text: &str) -> Vec<usize> {
    text.char_indices()
        .filter(|(_, c)| SPLIT_PUNCTUATION.contains(c))
        .map(|(i, c)| i + c.len_utf8())
        .collect()
}

/// Splits after every punctuation mark in [`SPLIT_PUNCTUATION`]; the mark
/// stays with the preceding segment. Whitespace-only pieces are dropped.
pub fn segment(text: &str) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut start = 0;
    let bounds = insertion_positions(text).into_iter().chain(std::iter::once(text.len()));
    for end in bounds {
        if end <= start {
            continue;
        }
        let piece = &text[start..end];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            let s = start + lead;
            out.push(Segment {
                text: trimmed.to_string(),
                span: (s, s + trimmed.len()),
            });
        }
        start = end;
    }
    out
}

/// Lowercased whitespace tokens with surrounding punctuation trimmed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Keeps the `max_size - 1` most frequent tokens (plus UNK); ties go to
    /// the lexicographically smaller token.
    pub fn build<'a>(corpus: impl IntoIterator<Item = &'a str>, max_size: usize) -> Result<Self> {
        if max_size == 0 {
            return Err(Error::Config("vocabulary size must be at least 1".into()));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for doc in corpus {
            for tok in tokenize(doc) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().filter(|(t, _)| t != UNK_TOKEN).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(max_size - 1);
        Self::from_tokens(ranked.into_iter().map(|(t, _)| t))
    }

    fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut v = Vocabulary {
            ids: HashMap::new(),
            tokens: vec![UNK_TOKEN.to_string()],
        };
        for t in tokens {
            if v.ids.contains_key(&t) || t == UNK_TOKEN {
                return Err(Error::Config(format!("duplicate vocabulary token {t:?}")));
            }
            v.ids.insert(t.clone(), v.tokens.len() as u32);
            v.tokens.push(t);
        }
        Ok(v)
    }

    /// Number of ids including UNK; this is the feature dimension.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }

    pub fn sentence(&self, seg: &Segment) -> Sentence {
        Sentence {
            text: seg.text.clone(),
            token_ids: self.encode(&seg.text),
            span: seg.span,
        }
    }

    /// Segments and encodes a whole message.
    pub fn sentences(&self, text: &str) -> Vec<Sentence> {
        segment(text).iter().map(|s| self.sentence(s)).collect()
    }

    /// `token<TAB>id` lines ordered by id.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (id, tok) in self.tokens.iter().enumerate() {
            let _ = writeln!(s, "{tok}\t{id}");
        }
        s
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows: Vec<(u32, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::Config(format!("vocabulary line {}: missing tab", n + 1)))?;
            let id = id
                .parse()
                .map_err(|_| Error::Config(format!("vocabulary line {}: bad id", n + 1)))?;
            rows.push((id, tok.to_string()));
        }
        rows.sort();
        if rows.first().map(|r| (r.0, r.1.as_str())) != Some((UNK, UNK_TOKEN)) {
            return Err(Error::Config("vocabulary must start with <unk> at id 0".into()));
        }
        if rows.iter().enumerate().any(|(i, r)| r.0 as usize != i) {
            return Err(Error::Config("vocabulary ids must be contiguous".into()));
        }
        Self::from_tokens(rows.into_iter().skip(1).map(|r| r.1))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// L1-normalized bag-of-words counts over a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f32>);

impl FeatureVector {
    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

impl From<Vec<f32>> for FeatureVector {
    fn from(v: Vec<f32>) -> Self {
        FeatureVector(v)
    }
}

/// Counts in-vocabulary tokens across `sentences` and normalizes to sum 1.
/// UNK tokens are not counted; no known tokens gives the zero vector.
pub fn featurize<'a>(sentences: impl IntoIterator<Item = &'a Sentence>, vocab: &Vocabulary) -> FeatureVector {
    let mut counts = vec![0u32; vocab.len()];
    for s in sentences {
        for &id in &s.token_ids {
            if id != UNK && (id as usize) < counts.len() {
                counts[id as usize] += 1;
            }
        }
    }
    let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
    if total == 0 {
        return FeatureVector::zeros(vocab.len());
    }
    let total = total as f64;
    FeatureVector(counts.iter().map(|&c| (f64::from(c) / total) as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<String> {
        segment(s).into_iter().map(|x| x.text).collect()
    }

    #[test]
    fn segment_examples() {
        assert!(segment("").is_empty());
        assert!(segment("   ").is_empty());
        assert_eq!(
            texts("Hello, can we meet? Thanks."),
            ["Hello,", "can we meet?", "Thanks."]
        );
        assert_eq!(texts("No punctuation here"), ["No punctuation here"]);
        assert_eq!(texts("a: b! c"), ["a:", "b!", "c"]);
    }

    #[test]
    fn spans_index_the_source() {
        let src = "  Hi there,  what's up?\nok. ";
        for seg in segment(src) {
            assert_eq!(&src[seg.span.0..seg.span.1], seg.text);
        }
    }

    #[test]
    fn insertion_position_examples() {
        assert_eq!(insertion_positions("a, b."), vec![2, 5]);
        assert!(insertion_positions("none here").is_empty());
        // Multi-byte characters before the mark.
        assert_eq!(insertion_positions("é!"), vec![3]);
    }

    #[test]
    fn tokenizer_lowercases_and_trims() {
        assert_eq!(tokenize("Can we MEET? (today)"), ["can", "we", "meet", "today"]);
        assert!(tokenize(" ,, ").is_empty());
    }

    #[test]
    fn vocab_examples() {
        let v = Vocabulary::build(["a a b"], 3).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!((v.id("a"), v.id("b"), v.id("zzz")), (1, 2, UNK));

        let v = Vocabulary::build(["z z x y"], 3).unwrap();
        assert_eq!(v.id("x"), 2);
        assert_eq!(v.id("y"), UNK);

        let empty = Vocabulary::build(std::iter::empty(), 10).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty.token(0), Some(UNK_TOKEN));

        let corpus = ["the cat sat", "the dog sat down"];
        assert_eq!(
            Vocabulary::build(corpus, 5).unwrap(),
            Vocabulary::build(corpus, 5).unwrap()
        );
    }

    #[test]
    fn vocab_tsv_round_trip_and_validation() {
        let v = Vocabulary::build(["b a c a"], 10).unwrap();
        assert_eq!(v.to_tsv(), "<unk>\t0\na\t1\nb\t2\nc\t3\n");
        assert_eq!(Vocabulary::from_tsv(&v.to_tsv()).unwrap(), v);
        assert!(Vocabulary::from_tsv("a\t1\n").is_err());
        assert!(Vocabulary::from_tsv("<unk>\t0\na\t2\n").is_err());
    }

    #[test]
    fn featurize_examples() {
        let v = Vocabulary::build(["a b"], 3).unwrap();
        assert!(featurize(&[], &v).is_zero());
        let s = v.sentences("a a b");
        let f = featurize(&s, &v);
        assert_eq!(f.dim(), 3);
        assert!((f.as_slice()[v.id("a") as usize] - 2.0 / 3.0).abs() < 1e-7);
        assert!((f.as_slice()[v.id("b") as usize] - 1.0 / 3.0).abs() < 1e-7);
        let unknown = v.sentences("q r s");
        assert!(featurize(&unknown, &v).is_zero());
    }

    #[test]
    fn featurize_ignores_sentence_order() {
        let v = Vocabulary::build(["one two three four"], 10).unwrap();
        let mut s = v.sentences("one two, three. four four!");
        let a = featurize(&s, &v);
        s.reverse();
        assert_eq!(a, featurize(&s, &v));
    }

    proptest! {
        #[test]
        fn segmentation_reconstructs_input(text in "[a-zé ,.:?!;\n]{0,60}") {
            let segs = segment(&text);
            let mut last_end = 0;
            for s in &segs {
                prop_assert!(s.span.0 >= last_end && s.span.1 > s.span.0);
                prop_assert_eq!(&text[s.span.0..s.span.1], s.text.as_str());
                prop_assert!(!s.text.trim().is_empty());
                last_end = s.span.1;
            }
            let strip = |x: &str| x.chars().filter(|c| !c.is_whitespace()).collect::<String>();
            let joined: String = segs.iter().map(|s| s.text.as_str()).collect::<Vec<_>>().join(" ");
            prop_assert_eq!(strip(&joined), strip(&text));
            // Every insertion point closes some segment.
            let ends: Vec<usize> = segs.iter().map(|s| s.span.1).collect();
            for p in insertion_positions(&text) {
                prop_assert!(ends.contains(&p));
            }
        }

        #[test]
        fn injecting_at_a_position_keeps_tokens_intact(
            text in "[a-z ]{1,12}([,.:?!] [a-z ]{1,12}){1,4}",
            pick in 0usize..8,
        ) {
            let positions = insertion_positions(&text);
            let pos = positions[pick % positions.len()];
            let injected = format!("{} zzinjected!{}", &text[..pos], &text[pos..]);
            let before: Vec<String> = tokenize(&text);
            let mut after = tokenize(&injected);
            let idx = after.iter().position(|t| t == "zzinjected").unwrap();
            after.remove(idx);
            prop_assert_eq!(before, after);
            prop_assert!(segment(&injected).iter().any(|s| s.text == "zzinjected!"));
        }
    }
}
