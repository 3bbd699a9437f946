//! The goal-conditioned tool-interaction policy: graph state encoder, metric
//! fusion, action history, goal-conditioned attention and the factored
//! action decoder.

mod config;
mod features;
mod model;

pub use config::{Ablations, PolicyConfig};
pub use features::{action_width, encode_action, ActionTarget, GoalFeatures, SceneFeatures, METRIC_WIDTH};
pub use model::{
    argmax, argmax_by_id, decode, imitation_loss, EncodedState, HeadOutputs, Inference, Layers, ObjectHead,
    TangoAgent, TangoModel, TrainSequence, TrainStep,
};
