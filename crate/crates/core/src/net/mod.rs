//! Model family: fully connected nets, their loss, and all derivative
//! products the distillation backward pass needs.
//!
//! Everything here is a pure function of its inputs: no globals, no interior
//! mutability, callers own the RNG seeds. Identical inputs give bit-identical
//! outputs.

mod arch;
mod batch;
mod ops;
mod params;
mod second_order;

pub use arch::{Activation, ArchSpec, DEFAULT_HIDDEN_WIDTH, NUM_CLASSES};
pub use batch::LabeledBatch;
pub use ops::{
    accuracy, backprop, forward, forward_cached, grad, loss, loss_and_grad, loss_from_logits,
    predict_row, softmax, Backprop, ForwardCache,
};
pub use params::{xavier_init, LayerBlock, ParamLayout, ParamVector};
pub use second_order::{grad_and_products, hvp, mixed_vjp, SecondOrder};
