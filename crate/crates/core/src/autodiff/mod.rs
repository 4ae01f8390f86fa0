//! Minimal reverse-mode automatic differentiation over dense f64 tensors:
//! exactly the operations the pose networks need, plus RMSprop and a
//! bit-exact checkpoint format. 64-bit throughout; single-threaded
//! training contexts are bitwise reproducible.

mod checkpoint;
mod params;
mod tape;
mod tensor;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, CheckpointError, CheckpointHeader, CHECKPOINT_VERSION,
};
pub use params::{init_linear, init_linear_with_gain, Gradients, ParamError, Params};
pub use tape::{AutodiffError, Tape, Value};
pub use tensor::{ShapeError, Tensor};
