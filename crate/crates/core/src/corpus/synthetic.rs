//! Desk-scale stand-in for a video captioning corpus.
//!
//! Each clip shows a short sequence of "concepts". A concept owns a unit-norm
//! prototype vector and a two-word phrase. The clip's frames are cut into
//! fixed-width slots, one per possible concept; slot `s` shows the `s`-th
//! concept of the clip, or a background prototype once the sequence has
//! ended. A frame is its prototype plus Gaussian noise (std 0.1) plus a small
//! sinusoidal code of the frame index, so that attention can address frames
//! by time as well as by content. The caption is the concatenated phrases.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::records::{CaptionRecord, Split};
use super::NUM_SPECIAL;
use crate::autodiff::Tensor;
use crate::model::FeatureClip;
use crate::{Error, Result};

const LEXICON: [(&str, &str); 13] = [
    ("man", "walks"),
    ("woman", "sings"),
    ("dog", "runs"),
    ("cat", "sleeps"),
    ("boy", "jumps"),
    ("girl", "dances"),
    ("bird", "flies"),
    ("horse", "gallops"),
    ("child", "plays"),
    ("chef", "cooks"),
    ("car", "drives"),
    ("fish", "swims"),
    ("baby", "laughs"),
];

const NOISE_STD: f64 = 0.1;
const TIME_CODE_SCALE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_clips: usize,
    pub frames: usize,
    pub feature_dim: usize,
    /// Reserved ids included; `(vocab_size - 4) / 2` concepts.
    pub vocab_size: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_clips: 100,
            frames: 16,
            feature_dim: 32,
            vocab_size: 30,
            min_words: 4,
            max_words: 8,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn concepts(&self) -> usize {
        self.vocab_size.saturating_sub(NUM_SPECIAL) / 2
    }

    fn concept_range(&self) -> (usize, usize) {
        (self.min_words.div_ceil(2), self.max_words / 2)
    }

    /// Validates these settings, including that captions fit in `max_len` ids.
    pub fn validate(&self, max_len: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Usage(m));
        if self.n_clips == 0 || self.frames == 0 || self.feature_dim == 0 {
            return bad("n_clips, frames and feature_dim must be positive".into());
        }
        let (lo, hi) = self.concept_range();
        if lo == 0 || lo > hi {
            return bad(format!(
                "caption length range {}..={} holds no even word count ≥ 2",
                self.min_words, self.max_words
            ));
        }
        if self.concepts() < 2 {
            return bad(format!("vocab_size {} gives fewer than 2 concepts", self.vocab_size));
        }
        if self.frames < hi {
            return bad(format!("{} frames cannot hold {hi} concept segments", self.frames));
        }
        if self.max_words + 2 > max_len {
            return bad(format!(
                "captions of {} words exceed max_len {max_len}",
                self.max_words
            ));
        }
        Ok(())
    }
}

/// The two words of concept `c`.
pub fn concept_words(c: usize) -> (String, String) {
    match LEXICON.get(c) {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (format!("thing{c}"), format!("acts{c}")),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub clips: Vec<FeatureClip>,
    pub captions: Vec<CaptionRecord>,
    /// Generating concept sequence per clip.
    pub concepts: Vec<Vec<usize>>,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Ranks ids by hash and assigns the first 60% to train, the next 20% to
/// validation and the rest to test.
fn hash_splits(ids: &[String]) -> Vec<Split> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_key(|&i| (fnv1a(ids[i].as_bytes()), i));
    let n = ids.len();
    let n_train = (n as f64 * 0.6).round() as usize;
    let n_val = ((n as f64 * 0.2).round() as usize).min(n - n_train);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        splits[i] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    splits
}

pub fn caption_for(concepts: &[usize]) -> String {
    concepts
        .iter()
        .flat_map(|&c| {
            let (a, b) = concept_words(c);
            [a, b]
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Transformer-style sinusoidal code of frame `f`.
fn time_code(f: usize, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let rate = 1.0 / 100f64.powf((d / 2 * 2) as f64 / dim as f64);
            let a = f as f64 * rate;
            TIME_CODE_SCALE * if d % 2 == 0 { a.sin() } else { a.cos() }
        })
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate(usize::MAX)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_concepts = spec.concepts();
    // The last prototype is the background.
    let prototypes: Vec<Vec<f64>> = (0..=n_concepts)
        .map(|_| {
            let v: Vec<f64> = (0..spec.feature_dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let noise = Normal::new(0.0, NOISE_STD).expect("valid std");
    let (lo, hi) = spec.concept_range();
    let slot = spec.frames / hi;
    let codes: Vec<Vec<f64>> = (0..spec.frames).map(|f| time_code(f, spec.feature_dim)).collect();
    let all: Vec<usize> = (0..n_concepts).collect();

    let mut clips = Vec::with_capacity(spec.n_clips);
    let mut concepts = Vec::with_capacity(spec.n_clips);
    let width = spec.n_clips.to_string().len().max(4);
    let ids: Vec<String> = (0..spec.n_clips).map(|i| format!("syn{i:0width$}")).collect();
    for id in &ids {
        let k = rng.gen_range(lo..=hi);
        let mut seq: Vec<usize> = Vec::with_capacity(k);
        while seq.len() < k {
            let c = *all.choose(&mut rng).expect("concepts");
            if seq.last() != Some(&c) {
                seq.push(c);
            }
        }
        let mut data = Vec::with_capacity(spec.frames * spec.feature_dim);
        for f in 0..spec.frames {
            let proto = &prototypes[seq.get(f / slot).copied().unwrap_or(n_concepts)];
            for (&p, &t) in proto.iter().zip(&codes[f]) {
                let x: f64 = p + t + noise.sample(&mut rng);
                data.push(x as f32 as f64);
            }
        }
        clips.push(FeatureClip::new(
            id.clone(),
            Tensor::new(vec![spec.frames, spec.feature_dim], data)?,
        )?);
        concepts.push(seq);
    }
    let captions = ids
        .iter()
        .zip(hash_splits(&ids))
        .zip(&concepts)
        .map(|((id, split), seq)| CaptionRecord {
            id: id.clone(),
            caption: caption_for(seq),
            split,
        })
        .collect();
    Ok(SyntheticCorpus {
        clips,
        captions,
        concepts,
    })
}
