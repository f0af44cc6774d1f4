//! Caption text, vocabularies, feature files and synthetic corpora.

mod features;
mod records;
mod split;
mod synthetic;

pub use features::{load_features, read_features, save_features, write_features};
pub use records::{
    read_captions, read_predictions, write_captions, write_predictions, CaptionRecord,
    Prediction, Split,
};
pub use split::{split_msvd, MsvdSplit};
pub use synthetic::{caption_for, concept_words, generate_synthetic, SyntheticCorpus, SyntheticSpec};

use std::collections::{BTreeMap, HashMap};

use crate::model::{EncodedCaption, BOS, EOS, NUM_SPECIAL, PAD, UNK};
use crate::{Error, Result};

/// Token strings for the reserved ids.
pub const RESERVED: [&str; NUM_SPECIAL] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Lowercases, splits on whitespace and strips trailing punctuation from
/// each token. Tokens that are pure punctuation disappear.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.to_lowercase().trim_end_matches(|c: char| c.is_ascii_punctuation()).to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    min_count: usize,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its id-ordered token list, as stored in
    /// checkpoints.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < NUM_SPECIAL || tokens[..NUM_SPECIAL] != RESERVED {
            return Err(Error::Format("vocabulary must start with the reserved tokens".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            index,
            min_count: 1,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Id of `token`, or `UNK`.
    pub fn id(&self, token: &str) -> usize {
        match self.index.get(token) {
            Some(&i) if i >= NUM_SPECIAL => i,
            _ => UNK,
        }
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    /// `BOS ids EOS`, truncated so the result has at most `max_len` ids.
    pub fn encode(&self, text: &str, max_len: usize) -> Result<EncodedCaption> {
        let words = tokenize(text);
        if words.is_empty() {
            return Err(Error::Data(format!("caption {text:?} is empty after tokenization")));
        }
        if max_len < 3 {
            return Err(Error::Config(format!("max_len {max_len} leaves no room for words")));
        }
        let ids: Vec<usize> = words.iter().take(max_len - 2).map(|w| self.id(w)).collect();
        EncodedCaption::from_words(&ids)
    }

    /// Space-joined tokens, skipping reserved ids and stopping at `EOS`.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out: Vec<&str> = Vec::new();
        for &id in ids {
            match id {
                EOS => break,
                PAD | BOS => {}
                _ => out.push(self.token(id).unwrap_or(RESERVED[UNK])),
            }
        }
        out.join(" ")
    }
}

/// Tokens occurring at least `min_count` times get ids from 4 upward in
/// descending frequency, ties broken alphabetically.
pub fn build_vocab<'a>(
    captions: impl IntoIterator<Item = &'a str>,
    min_count: usize,
) -> Result<Vocabulary> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut any = false;
    for c in captions {
        any = true;
        for t in tokenize(c) {
            *counts.entry(t).or_default() += 1;
        }
    }
    if !any {
        return Err(Error::Usage("cannot build a vocabulary from no captions".into()));
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, n)| *n >= min_count.max(1) && !RESERVED.contains(&t.as_str()))
        .collect();
    // BTreeMap order is alphabetical, and the sort is stable.
    kept.sort_by_key(|k| std::cmp::Reverse(k.1));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    let mut v = Vocabulary::from_tokens(tokens)?;
    v.min_count = min_count;
    Ok(v)
}
