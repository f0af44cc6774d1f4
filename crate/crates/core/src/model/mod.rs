//! The captioning model: feature projection and normalization, an additive
//! attention LSTM decoder, and (in `GMNET` mode) the guidance branch that is
//! only ever used to compute a training loss.

mod checkpoint;
mod config;
mod decode;
pub mod gradcheck;
mod network;
mod train;

pub use checkpoint::{load_checkpoint, load_checkpoint_for_mode, save_checkpoint, Checkpoint};
pub use config::{layer_spec, Mode, ModelConfig, PastSource};
pub use decode::{argmax, greedy_decode};
pub use network::{
    decode_step, encode_features, encode_tokens, forward_train, forward_train_with_past,
    fuse_hidden, guidance_feature, guidance_fuse, init_model, is_guidance_param,
    project_guidance_inputs, sample_gradients, DecodeStep, Losses, SampleTrace,
};
pub use train::{evaluate_loss, train, train_from, EpochLog, Sample, StepLog, TrainOptions, TrainOutcome};

use crate::autodiff::Tensor;
use crate::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIAL: usize = 4;

/// `m` frame feature vectors of width `D` for one clip.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureClip {
    pub id: String,
    pub features: Tensor,
}

impl FeatureClip {
    pub fn new(id: impl Into<String>, features: Tensor) -> Result<Self> {
        let id = id.into();
        if features.rank() != 2 {
            return Err(Error::Data(format!(
                "clip {id:?}: features must be m×D, got {:?}",
                features.shape()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data(format!("clip {id:?}: non-finite feature value")));
        }
        Ok(FeatureClip { id, features })
    }

    pub fn frames(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }
}

/// Token ids framed by `BOS ... EOS`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncodedCaption {
    ids: Vec<usize>,
}

impl EncodedCaption {
    pub fn new(ids: Vec<usize>) -> Result<Self> {
        let ok = ids.len() >= 2
            && ids[0] == BOS
            && ids[ids.len() - 1] == EOS
            && ids[1..ids.len() - 1]
                .iter()
                .all(|&t| t != BOS && t != EOS && t != PAD);
        if !ok {
            return Err(Error::Data(format!(
                "caption ids must be BOS, words..., EOS without PAD: {ids:?}"
            )));
        }
        Ok(EncodedCaption { ids })
    }

    /// Wraps word ids with BOS/EOS.
    pub fn from_words(words: &[usize]) -> Result<Self> {
        let mut ids = Vec::with_capacity(words.len() + 2);
        ids.push(BOS);
        ids.extend_from_slice(words);
        ids.push(EOS);
        EncodedCaption::new(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Words between the sentinels.
    pub fn words(&self) -> &[usize] {
        &self.ids[1..self.ids.len() - 1]
    }

    /// Number of predicted positions (words plus EOS).
    pub fn num_targets(&self) -> usize {
        self.ids.len() - 1
    }
}
