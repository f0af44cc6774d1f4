//! Corpus-level caption metrics: BLEU-4, ROUGE-L and CIDEr.
//!
//! Scores are independent of pair order and of reference order within a
//! pair, bit for bit: per-pair values are summed in sorted order and n-gram
//! vectors are kept in ordered maps.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;
use crate::{Error, Result};

/// ROUGE-L recall weight.
pub const ROUGE_BETA: f64 = 1.2;
const MAX_N: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPair {
    pub id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalPair {
    /// Tokenizes the candidate and references.
    pub fn from_text<S: AsRef<str>>(id: impl Into<String>, candidate: &str, references: &[S]) -> Result<Self> {
        let id = id.into();
        if references.is_empty() {
            return Err(Error::Usage(format!("clip {id:?} has no references")));
        }
        Ok(EvalPair {
            candidate: tokenize(candidate),
            references: references.iter().map(|r| tokenize(r.as_ref())).collect(),
            id,
        })
    }
}

fn check(pairs: &[EvalPair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Usage("no caption pairs to evaluate".into()));
    }
    if let Some(p) = pairs.iter().find(|p| p.references.is_empty()) {
        return Err(Error::Usage(format!("clip {:?} has no references", p.id)));
    }
    Ok(())
}

/// Order-independent sum.
fn stable_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

type Counts<'a> = BTreeMap<&'a [String], usize>;

fn ngrams(tokens: &[String], n: usize) -> Counts<'_> {
    let mut out = Counts::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *out.entry(g).or_default() += 1;
        }
    }
    out
}

/// Corpus BLEU-4 in [0, 1]: pooled clipped n-gram precisions, uniform
/// weights, brevity penalty against the closest reference length (shorter
/// on ties), no smoothing.
pub fn bleu4(pairs: &[EvalPair]) -> Result<f64> {
    check(pairs)?;
    let mut matched = [0usize; MAX_N];
    let mut total = [0usize; MAX_N];
    let (mut c, mut r) = (0usize, 0usize);
    for p in pairs {
        c += p.candidate.len();
        r += p
            .references
            .iter()
            .map(|x| x.len())
            .min_by_key(|&l| (l.abs_diff(p.candidate.len()), l))
            .expect("references checked");
        for n in 1..=MAX_N {
            let cand = ngrams(&p.candidate, n);
            let mut max_ref: Counts = Counts::new();
            for rf in &p.references {
                for (g, k) in ngrams(rf, n) {
                    let e = max_ref.entry(g).or_default();
                    *e = (*e).max(k);
                }
            }
            for (g, k) in cand {
                total[n - 1] += k;
                matched[n - 1] += k.min(max_ref.get(g).copied().unwrap_or(0));
            }
        }
    }
    if c == 0 || matched.contains(&0) {
        return Ok(0.0);
    }
    let log_p: f64 = (0..MAX_N)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / MAX_N as f64;
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    Ok(bp * log_p.exp())
}

fn lcs(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn rouge_pair(cand: &[String], reference: &[String]) -> f64 {
    let l = lcs(cand, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / cand.len() as f64;
    let r = l as f64 / reference.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean over pairs of the best LCS F-measure against any reference.
pub fn rouge_l(pairs: &[EvalPair]) -> Result<f64> {
    check(pairs)?;
    let scores = pairs
        .iter()
        .map(|p| {
            p.references
                .iter()
                .map(|r| rouge_pair(&p.candidate, r))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(stable_sum(scores) / pairs.len() as f64)
}

fn tfidf<'a>(tokens: &'a [String], n: usize, idf: &dyn Fn(&[String]) -> f64) -> BTreeMap<&'a [String], f64> {
    let counts = ngrams(tokens, n);
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(g, k)| (g, k as f64 / total as f64 * idf(g)))
        .collect()
}

/// Cosine similarity; zero when either vector is zero.
fn cosine(a: &BTreeMap<&[String], f64>, b: &BTreeMap<&[String], f64>) -> f64 {
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb).sqrt()
}

/// CIDEr (without the length penalty of CIDEr-D), scaled by 10. Document
/// frequency counts clips whose references contain an n-gram;
/// IDF = ln(N / df) with df clamped to at least 1.
pub fn cider(pairs: &[EvalPair]) -> Result<f64> {
    check(pairs)?;
    if pairs.len() < 2 {
        log::warn!("CIDEr over fewer than 2 clips: every IDF weight is zero");
    }
    let n_clips = pairs.len() as f64;
    let mut df: [BTreeMap<&[String], usize>; MAX_N] = Default::default();
    for p in pairs {
        for n in 1..=MAX_N {
            let grams: BTreeSet<&[String]> = p.references.iter().flat_map(|r| ngrams(r, n).into_keys()).collect();
            for g in grams {
                *df[n - 1].entry(g).or_default() += 1;
            }
        }
    }
    let scores = pairs
        .iter()
        .map(|p| {
            let per_n: Vec<f64> = (1..=MAX_N)
                .map(|n| {
                    let idf = |g: &[String]| {
                        let d = df[n - 1].get(g).copied().unwrap_or(0).max(1);
                        (n_clips / d as f64).ln()
                    };
                    let cand = tfidf(&p.candidate, n, &idf);
                    let sims = p
                        .references
                        .iter()
                        .map(|r| cosine(&cand, &tfidf(r, n, &idf)))
                        .collect();
                    stable_sum(sims) / p.references.len() as f64
                })
                .collect();
            10.0 * stable_sum(per_n) / MAX_N as f64
        })
        .collect();
    Ok(stable_sum(scores) / n_clips)
}

/// Raw scores: BLEU-4 and ROUGE-L in [0, 1], CIDEr in [0, 10].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
    pub n_pairs: usize,
}

/// Scores on the percent scale used in published tables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

impl MetricReport {
    /// BLEU and ROUGE × 100; CIDEr normalized by 10, then × 100.
    pub fn percent(&self) -> PercentScores {
        PercentScores {
            bleu4: self.bleu4 * 100.0,
            rouge_l: self.rouge_l * 100.0,
            cider: self.cider / 10.0 * 100.0,
        }
    }
}

pub fn evaluate_corpus(pairs: &[EvalPair]) -> Result<MetricReport> {
    Ok(MetricReport {
        bleu4: bleu4(pairs)?,
        rouge_l: rouge_l(pairs)?,
        cider: cider(pairs)?,
        n_pairs: pairs.len(),
    })
}
