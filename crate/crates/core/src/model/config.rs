use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::layers::{AdamConfig, LayerSpec};
use crate::{Error, Result};

/// Ablation mode. Each mode's parameter set contains the previous one's.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Soft-attention LSTM baseline.
    #[serde(rename = "SA")]
    Sa,
    /// Baseline with layer norm on projected features and attention output.
    #[serde(rename = "SA_LN")]
    SaLn,
    /// `SA_LN` plus the train-time guidance branch.
    #[serde(rename = "GMNET")]
    Gmnet,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Sa, Mode::SaLn, Mode::Gmnet];

    pub fn layer_norm(self) -> bool {
        !matches!(self, Mode::Sa)
    }

    pub fn guidance(self) -> bool {
        matches!(self, Mode::Gmnet)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sa => "SA",
            Mode::SaLn => "SA_LN",
            Mode::Gmnet => "GMNET",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SA" => Ok(Mode::Sa),
            "SA_LN" => Ok(Mode::SaLn),
            "GMNET" => Ok(Mode::Gmnet),
            _ => Err(Error::Usage(format!("unknown mode {s:?} (SA, SA_LN, GMNET)"))),
        }
    }
}

/// Where the guidance branch takes its "past words" from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PastSource {
    /// The main decoder's argmax predictions so far, detached.
    #[serde(rename = "argmax")]
    Argmax,
    /// The groundtruth prefix.
    #[serde(rename = "teacher")]
    TeacherForced,
}

impl FromStr for PastSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "argmax" => Ok(PastSource::Argmax),
            "teacher" => Ok(PastSource::TeacherForced),
            _ => Err(Error::Usage(format!("unknown past source {s:?} (argmax, teacher)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    /// Frames per clip (m).
    pub frames: usize,
    /// Input feature width (D).
    pub feature_dim: usize,
    /// Projected feature width (D').
    pub proj_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub vocab_size: usize,
    /// Longest caption in ids, sentinels included.
    pub max_len: usize,
    pub eps_ln: f64,
    pub seed: u64,
    pub past_source: PastSource,
    pub adam: AdamConfig,
    pub clip_norm: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::Gmnet,
            frames: 16,
            feature_dim: 32,
            proj_dim: 256,
            embed_dim: 256,
            hidden: 256,
            vocab_size: 30,
            max_len: 20,
            eps_ln: 1e-5,
            seed: 7,
            past_source: PastSource::Argmax,
            adam: AdamConfig::default(),
            clip_norm: 5.0,
        }
    }
}

impl ModelConfig {
    /// Width of real InceptionV4 frame features.
    pub const INCEPTION_V4_DIM: usize = 1536;

    /// The small configuration used for finite-difference checks.
    pub fn tiny(mode: Mode) -> Self {
        ModelConfig {
            mode,
            frames: 3,
            feature_dim: 4,
            proj_dim: 6,
            embed_dim: 5,
            hidden: 5,
            vocab_size: 7,
            max_len: 6,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("frames", self.frames),
            ("feature_dim", self.feature_dim),
            ("proj_dim", self.proj_dim),
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.mode.layer_norm() && (self.proj_dim < 2 || self.hidden < 2) {
            return Err(Error::Config("layer norm needs widths of at least 2".into()));
        }
        if self.vocab_size <= super::NUM_SPECIAL {
            return Err(Error::Config(format!(
                "vocab_size {} leaves no room for words",
                self.vocab_size
            )));
        }
        if self.max_len < 3 {
            return Err(Error::Config("max_len must allow at least one word".into()));
        }
        if !(self.eps_ln > 0.0) {
            return Err(Error::Config(format!("eps_ln must be > 0, got {}", self.eps_ln)));
        }
        if !(self.adam.lr > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("lr and clip_norm must be > 0".into()));
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Usage(format!("bad value {v:?} for {key}")))
        }
        match key {
            "mode" => self.mode = value.parse()?,
            "m" | "frames" => self.frames = num(key, value)?,
            "d" | "feature_dim" => self.feature_dim = num(key, value)?,
            "d_proj" | "proj_dim" => self.proj_dim = num(key, value)?,
            "e" | "embed_dim" => self.embed_dim = num(key, value)?,
            "h" | "hidden" => self.hidden = num(key, value)?,
            "v" | "vocab_size" => self.vocab_size = num(key, value)?,
            "l_max" | "max_len" => self.max_len = num(key, value)?,
            "eps_ln" => self.eps_ln = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "past_source" => self.past_source = value.parse()?,
            "lr" => self.adam.lr = num(key, value)?,
            "beta1" => self.adam.beta1 = num(key, value)?,
            "beta2" => self.adam.beta2 = num(key, value)?,
            "eps_opt" => self.adam.eps = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

/// Parameter layout for `cfg.mode`. Entries that draw random numbers are
/// listed in the same order in every mode, so a shared seed gives the shared
/// parameters identical initial values across modes.
pub fn layer_spec(cfg: &ModelConfig) -> LayerSpec {
    let (d, dp, e, h, v) = (
        cfg.feature_dim,
        cfg.proj_dim,
        cfg.embed_dim,
        cfg.hidden,
        cfg.vocab_size,
    );
    let mut s = LayerSpec::new();
    s.linear("enc.proj", d, dp, true)
        .attention("att", dp, h, h)
        .embedding("dec.embed", v, e)
        .lstm("dec.lstm", e + dp, h)
        .linear("dec.out", h, v, true);
    if cfg.mode.layer_norm() {
        s.layer_norm("ln.enc", dp).layer_norm("ln.att", dp);
    }
    if cfg.mode.guidance() {
        s.embedding("gd.embed", v, e)
            .lstm("gd.past", e, h)
            .lstm("gd.future", e, h)
            .linear("gd.wp", h, h, false)
            .linear("gd.wf", h, h, false)
            .linear("gd.proj_e", h, h, true)
            .linear("gd.proj_att", dp, h, true)
            .layer_norm("gd.ln_e", h)
            .layer_norm("gd.ln_att", h)
            .layer_norm("gd.ln_f", h)
            .lstm("gd.lstm", e + h, h)
            .linear("gd.out", h, v, true);
    }
    s
}
