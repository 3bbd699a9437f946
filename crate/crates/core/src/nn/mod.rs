//! Small reverse-mode differentiation kernel over dense `f64` matrices, with
//! the layers, loss and optimizer the policy network needs.

mod check;
mod layers;
mod optim;
mod param;
mod tape;
mod tensor;

pub use check::{grad_check, grad_check_sampled, relative_error, GradCheck};
pub use layers::{Gru, Linear, Lstm, Mlp, Slope};
pub use optim::AdamState;
pub use param::{Gradients, Param, ParamId, ParamStore};
pub use tape::{bce, prelu, prelu_grad, softmax, Tape, Var, BCE_CLAMP};
pub use tensor::Tensor;
