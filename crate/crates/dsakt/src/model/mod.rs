//! The DSAKT network: embeddings with sinusoidal positions, a causally
//! masked multi-head encoder, a decoder that applies one shared attention
//! weight set twice (self, then cross onto the encoder output), and a
//! sigmoid prediction head.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod net;
pub mod params;
pub mod position;

pub use attention::causal_mask;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use net::{BlockAttention, ForwardTrace, Model, LAYER_NORM_EPS};
pub use params::{param_count, ParamSet};
pub use position::positional_table;
