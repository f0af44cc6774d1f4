//! Parameterized layers on top of [`crate::autodiff`], their initialization,
//! and the Adam optimizer.

mod adam;
mod check;
mod nn;
mod params;

pub use adam::{adam_step, AdamConfig};
pub use check::grad_check_params;
pub use nn::{
    attention_memory, attention_step, embed, linear, linear_rows, lstm_step, AttentionMemory,
    LstmState,
};
pub use params::{init_params, Ctx, Init, LayerSpec, ParamGrads, ParamSpec, ParamStore};
