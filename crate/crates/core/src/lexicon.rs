//! Domain vocabulary extraction and the greedy multi-word tokenizer.
//!
//! The vocabulary is harvested from the rule table itself: every multi-word
//! phrase becomes a mergeable domain phrase, and every single word of the
//! phrases and templates becomes a base token. Tokenization splits on
//! whitespace, peels trailing punctuation into separate tokens, maps numerals
//! (amounts, dates, counts) onto the shared `[NUM]` token, and merges domain
//! phrases greedily, longest match first. Multi-word tokens carry an
//! underscore-joined surface form so that decoding restores the text up to
//! single-space normalization and `[NUM]` placeholders.

use crate::story::RuleTable;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

pub const EMPTY_ID: u32 = 0;
pub const NUM_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
pub const SPECIAL_COUNT: u32 = 3;

pub const EMPTY_SURFACE: &str = "[EMPTY]";
pub const NUM_SURFACE: &str = "[NUM]";
pub const UNK_SURFACE: &str = "[UNK]";

const TRAILING_PUNCT: [char; 4] = [':', ',', ';', '.'];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("token {index} is not valid for the vocabulary")]
    UnknownToken { index: usize },
}

/// Immutable token inventory: three implicit specials, then file-ordered
/// entries (single words, punctuation marks and underscored domain phrases).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    ids: HashMap<String, u32>,
    /// Multi-word phrases as word lists, ordered by descending word count,
    /// then lexicographically. Drives greedy longest-match merging.
    phrases: Vec<Vec<String>>,
}

impl Vocabulary {
    pub fn from_entries(entries: Vec<String>) -> Self {
        let ids = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), SPECIAL_COUNT + i as u32))
            .collect();
        let mut phrases: Vec<Vec<String>> = entries
            .iter()
            .filter(|e| e.contains('_'))
            .map(|e| e.split('_').map(str::to_string).collect())
            .collect();
        phrases.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Vocabulary {
            entries,
            ids,
            phrases,
        }
    }

    /// Total token count including the three specials.
    pub fn size(&self) -> usize {
        self.entries.len() + SPECIAL_COUNT as usize
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Domain phrases in match order (descending word count, then lexicographic).
    pub fn domain_phrases(&self) -> impl Iterator<Item = String> + '_ {
        self.phrases.iter().map(|p| p.join(" "))
    }

    pub fn id_of(&self, surface: &str) -> u32 {
        match surface {
            EMPTY_SURFACE => EMPTY_ID,
            NUM_SURFACE => NUM_ID,
            UNK_SURFACE => UNK_ID,
            _ => self.ids.get(surface).copied().unwrap_or(UNK_ID),
        }
    }

    /// One entry per line, specials implicit; ids follow file order.
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(e);
            out.push('\n');
        }
        out
    }

    pub fn from_file_string(text: &str) -> Self {
        let entries = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        Self::from_entries(entries)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub token_strings: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Item {
    Word(String),
    Punct(char),
}

fn split_items(text: &str) -> Vec<Item> {
    let mut items = Vec::new();
    for raw in text.split_ascii_whitespace() {
        let mut word = raw;
        let mut tail = Vec::new();
        while let Some(c) = word.chars().last() {
            if TRAILING_PUNCT.contains(&c) {
                tail.push(c);
                word = &word[..word.len() - 1];
            } else {
                break;
            }
        }
        if !word.is_empty() {
            items.push(Item::Word(word.to_string()));
        }
        for &c in tail.iter().rev() {
            items.push(Item::Punct(c));
        }
    }
    items
}

fn is_numeral(word: &str) -> bool {
    word.bytes().any(|b| b.is_ascii_digit())
        && word
            .bytes()
            .all(|b| b.is_ascii_digit() || b == b'.' || b == b'-' || b == b'/')
}

/// Extract the token inventory from a rule table: multi-word phrase values
/// become mergeable domain phrases; their words plus the templates' literal
/// words and punctuation become base tokens.
pub fn extract_vocabulary(rules: &RuleTable) -> Vocabulary {
    let mut words: BTreeSet<String> = BTreeSet::new();
    let mut phrases: BTreeSet<String> = BTreeSet::new();

    for phrase in rules.phrases() {
        let parts: Vec<&str> = phrase.split_ascii_whitespace().collect();
        if parts.len() >= 2 {
            phrases.insert(parts.join("_"));
        }
        for part in parts {
            words.insert(part.to_string());
        }
    }

    let mut literal_text = String::new();
    for template in rules.templates() {
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            literal_text.push_str(&rest[..open]);
            literal_text.push(' ');
            match rest[open..].find('}') {
                Some(close) => rest = &rest[open + close + 1..],
                None => {
                    rest = "";
                    break;
                }
            }
        }
        literal_text.push_str(rest);
        literal_text.push(' ');
    }
    for name in rules.segment_names() {
        literal_text.push_str(name);
        literal_text.push(' ');
    }
    for item in split_items(&literal_text) {
        match item {
            Item::Word(w) => {
                if !is_numeral(&w) {
                    words.insert(w);
                }
            }
            Item::Punct(c) => {
                words.insert(c.to_string());
            }
        }
    }

    let entries: BTreeSet<String> = words.into_iter().chain(phrases).collect();
    Vocabulary::from_entries(entries.into_iter().collect())
}

fn encode_impl(text: &str, vocab: &Vocabulary, merge_phrases: bool) -> TokenSequence {
    let items = split_items(text);
    if items.is_empty() {
        return TokenSequence {
            tokens: vec![EMPTY_ID],
            token_strings: vec![EMPTY_SURFACE.to_string()],
        };
    }

    let mut tokens = Vec::new();
    let mut strings = Vec::new();
    let mut push_word = |tokens: &mut Vec<u32>, strings: &mut Vec<String>, w: &str| {
        if is_numeral(w) {
            tokens.push(NUM_ID);
            strings.push(NUM_SURFACE.to_string());
        } else {
            tokens.push(vocab.id_of(w));
            strings.push(w.to_string());
        }
    };
    let mut i = 0;
    'outer: while i < items.len() {
        if merge_phrases {
            if let Item::Word(_) = items[i] {
                for phrase in &vocab.phrases {
                    if phrase.len() <= items.len() - i {
                        let matches = phrase.iter().zip(&items[i..i + phrase.len()]).all(
                            |(pw, item)| matches!(item, Item::Word(w) if w == pw),
                        );
                        if matches {
                            let surface = phrase.join("_");
                            tokens.push(vocab.id_of(&surface));
                            strings.push(surface);
                            i += phrase.len();
                            continue 'outer;
                        }
                    }
                }
            }
        }
        match &items[i] {
            Item::Word(w) if merge_phrases || is_numeral(w) => {
                push_word(&mut tokens, &mut strings, w);
            }
            Item::Word(w) => {
                // base splitting fragments at every internal punctuation mark,
                // so unrecognized domain compounds fall apart into pieces
                for piece in w.split(|c: char| !c.is_ascii_alphanumeric()) {
                    if !piece.is_empty() {
                        push_word(&mut tokens, &mut strings, piece);
                    }
                }
            }
            Item::Punct(c) => {
                let s = c.to_string();
                tokens.push(vocab.id_of(&s));
                strings.push(s);
            }
        }
        i += 1;
    }
    TokenSequence {
        tokens,
        token_strings: strings,
    }
}

/// Tokenize with greedy longest-match merging of domain phrases.
pub fn encode(text: &str, vocab: &Vocabulary) -> TokenSequence {
    encode_impl(text, vocab, true)
}

/// Tokenize with word/punctuation splitting only: no phrase merging, and
/// punctuation inside words splits them apart. The baseline tokenizer of the
/// version ladder; domain compounds it cannot recognize fragment into pieces
/// that collide across phrases or fall out of vocabulary.
pub fn encode_base(text: &str, vocab: &Vocabulary) -> TokenSequence {
    encode_impl(text, vocab, false)
}

fn is_punct_surface(s: &str) -> bool {
    s.len() == 1 && TRAILING_PUNCT.contains(&s.chars().next().unwrap())
}

/// Reconstruct text from a token sequence: underscores expand to spaces,
/// punctuation reattaches to the preceding token, `[NUM]` stays as a literal
/// placeholder and `[EMPTY]` contributes nothing.
pub fn decode(ts: &TokenSequence) -> Result<String, LexiconError> {
    if ts.tokens.len() != ts.token_strings.len() {
        return Err(LexiconError::UnknownToken {
            index: ts.tokens.len().min(ts.token_strings.len()),
        });
    }
    let mut out = String::new();
    for (index, surface) in ts.token_strings.iter().enumerate() {
        if surface.is_empty() {
            return Err(LexiconError::UnknownToken { index });
        }
        if surface == EMPTY_SURFACE {
            continue;
        }
        if is_punct_surface(surface) {
            out.push_str(surface);
            continue;
        }
        if !out.is_empty() {
            out.push(' ');
        }
        if surface == NUM_SURFACE {
            out.push_str(NUM_SURFACE);
        } else {
            out.push_str(&surface.replace('_', " "));
        }
    }
    Ok(out)
}

/// Replace numeral words with `[NUM]` the way the tokenizer would, without
/// going through token sequences. Independent reference for round-trip tests.
pub fn mask_numerals(text: &str) -> String {
    text.split_ascii_whitespace()
        .map(|raw| {
            let trailing = raw
                .chars()
                .rev()
                .take_while(|c| TRAILING_PUNCT.contains(c))
                .count();
            let (word, tail) = raw.split_at(raw.len() - trailing);
            if !word.is_empty() && is_numeral(word) {
                format!("{NUM_SURFACE}{tail}")
            } else {
                raw.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        extract_vocabulary(&RuleTable::standard())
    }

    #[test]
    fn multiword_phrases_extracted() {
        let v = vocab();
        let phrases: Vec<String> = v.domain_phrases().collect();
        assert!(phrases.contains(&"credit card".to_string()));
        assert!(phrases.contains(&"auto loan".to_string()));
        assert!(phrases.contains(&"one hundred twenty plus days past due".to_string()));
        // single-word phrase values are base tokens, not domain phrases
        assert!(!phrases.contains(&"current".to_string()));
        assert!(v.entries().contains(&"current".to_string()));
    }

    #[test]
    fn phrase_order_is_longest_first_then_lexicographic() {
        let names: Vec<String> = vocab().domain_phrases().collect();
        assert!(!names.is_empty());
        for pair in names.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let (na, nb) = (a.split(' ').count(), b.split(' ').count());
            assert!(na > nb || (na == nb && a < b), "{a} before {b}");
        }
    }

    #[test]
    fn greedy_longest_match() {
        let v = vocab();
        let ts = encode("credit card account opened", &v);
        assert_eq!(
            ts.token_strings,
            vec!["credit_card", "account", "opened"]
        );
        assert!(ts.tokens.iter().all(|&t| t != UNK_ID));
    }

    #[test]
    fn numerals_become_num_token() {
        let v = vocab();
        let ts = encode("balance 1234.56 of limit 5000.00", &v);
        assert_eq!(
            ts.token_strings,
            vec!["balance", "[NUM]", "of", "limit", "[NUM]"]
        );
        assert_eq!(ts.tokens[1], NUM_ID);
    }

    #[test]
    fn empty_text_is_empty_token() {
        let v = vocab();
        let ts = encode("", &v);
        assert_eq!(ts.tokens, vec![EMPTY_ID]);
        assert_eq!(decode(&ts).unwrap(), "");
    }

    #[test]
    fn decode_expands_underscores() {
        let v = vocab();
        let ts = encode("credit card account", &v);
        assert_eq!(decode(&ts).unwrap(), "credit card account");
    }

    #[test]
    fn single_token_guarantee() {
        let v = vocab();
        for phrase in RuleTable::standard().phrases() {
            let ts = encode(phrase, &v);
            assert_eq!(ts.len(), 1, "phrase {phrase:?} -> {:?}", ts.token_strings);
            assert_ne!(ts.tokens[0], UNK_ID, "phrase {phrase:?} unknown");
        }
    }

    #[test]
    fn domain_never_longer_than_base() {
        let v = vocab();
        let samples = [
            "trade: credit card account opened on 2017-02-01, status thirty days past due, \
             balance 1234.56 of limit 5000.00, payment history 23 on-time and 1 thirty-day late",
            "inquiries: no records",
            "collection: open collection of 1500.00 assigned on 2017-08-01 by 123456",
        ];
        for s in samples {
            assert!(encode(s, &v).len() <= encode_base(s, &v).len());
        }
    }

    #[test]
    fn base_tokenizer_fragments_compounds() {
        let v = vocab();
        let text = "payment history 23 on-time and 1 thirty-day late";
        let base = encode_base(text, &v);
        assert!(base.token_strings.iter().any(|s| s == "on"));
        assert!(base.token_strings.iter().any(|s| s == "time"));
        assert!(!base.token_strings.iter().any(|s| s == "on-time"));
        // the domain path keeps compounds whole and in vocabulary
        let domain = encode(text, &v);
        assert!(domain.token_strings.iter().any(|s| s == "on-time"));
        assert!(domain.token_strings.iter().any(|s| s == "thirty-day_late"));
        assert!(domain.len() < base.len());
    }

    #[test]
    fn encode_is_deterministic() {
        let v = vocab();
        let s = "trade: student loan account opened on 2016-05-01, status current";
        assert_eq!(encode(s, &v), encode(s, &v));
    }

    #[test]
    fn round_trip_with_punctuation() {
        let v = vocab();
        let s = "trade: credit card account opened on 2017-02-01, status current; \
                 trade: auto loan account opened on 2016-01-01, status closed";
        let decoded = decode(&encode(s, &v)).unwrap();
        assert_eq!(decoded, mask_numerals(s));
    }

    #[test]
    fn unknown_words_keep_surface_with_unk_id() {
        let v = vocab();
        let ts = encode("inquiry on 2018-01-15 by zq7xk1", &v);
        let pos = ts.token_strings.iter().position(|s| s == "zq7xk1").unwrap();
        assert_eq!(ts.tokens[pos], UNK_ID);
        assert_eq!(decode(&ts).unwrap(), "inquiry on [NUM] by zq7xk1");
    }

    #[test]
    fn file_round_trip_preserves_ids() {
        let v = vocab();
        let text = v.to_file_string();
        let reloaded = Vocabulary::from_file_string(&text);
        assert_eq!(v, reloaded);
        let sorted: Vec<&String> = {
            let mut e: Vec<&String> = v.entries().iter().collect();
            e.sort();
            e
        };
        assert_eq!(sorted, v.entries().iter().collect::<Vec<_>>());
        assert_eq!(v.id_of(v.entries().first().unwrap()), SPECIAL_COUNT);
    }

    #[test]
    fn empty_rule_table_yields_no_phrases() {
        let v = Vocabulary::from_entries(Vec::new());
        assert_eq!(v.size(), 3);
        assert_eq!(v.domain_phrases().count(), 0);
        let ts = encode("anything 42", &v);
        assert_eq!(ts.tokens, vec![UNK_ID, NUM_ID]);
    }

    #[test]
    fn duplicate_phrases_appear_once() {
        // "credit card" is both a trade type and an inquiry purpose phrase.
        let v = vocab();
        let n = v
            .domain_phrases()
            .filter(|p| p == "credit card")
            .count();
        assert_eq!(n, 1);
    }
}
