//! Dense actor-critic network with hand-derived gradients.
//!
//! The network is generic over the float type: training runs in `f32`, gradient checks run
//! in `f64`.

mod adam;
mod checkpoint;
mod dist;
mod net;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use checkpoint::{from_bytes, read_checkpoint, to_bytes, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use dist::{MultiDiscreteDist, NUM_HEADS};
pub use net::{CriticTrunk, ForwardCache, Gradients, Linear, OutputGrads, PolicyNet, DEFAULT_HIDDEN};

pub trait Real:
    Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite float")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
