use std::collections::HashSet;

use crate::{Error, Result};

/// Clip counts of the standard MSVD partition.
const MSVD: (usize, usize, usize) = (1200, 100, 670);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MsvdSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Partitions clip ids by position: the first 1200 train, the next 100
/// validation, the remaining 670 test. Other corpus sizes get the same
/// proportions, rounded, with test taking the remainder.
pub fn split_msvd(ids: &[String]) -> Result<MsvdSplit> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Data(format!("duplicate clip id {id:?}")));
        }
    }
    let n = ids.len();
    let total = MSVD.0 + MSVD.1 + MSVD.2;
    if n != total {
        log::warn!("{n} clips instead of {total}; using proportional split");
    }
    let prop = |k: usize| ((n * k) as f64 / total as f64).round() as usize;
    let n_train = prop(MSVD.0).min(n);
    let n_val = prop(MSVD.1).min(n - n_train);
    Ok(MsvdSplit {
        train: ids[..n_train].to_vec(),
        val: ids[n_train..n_train + n_val].to_vec(),
        test: ids[n_train + n_val..].to_vec(),
    })
}
