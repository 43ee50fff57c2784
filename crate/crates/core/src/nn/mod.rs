//! Minimal dense-network substrate: layers, activations, losses,
//! diagonal-Gaussian helpers, Adam and finite-difference gradient checks.
//!
//! Everything is generic over [`Real`] so the same code path trains in
//! `f32` and is verified against central differences in `f64`.

mod adam;
mod dense;
mod gaussian;
mod gradcheck;
mod loss;
mod tensor;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::LinalgScalar;
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use adam::{AdamConfig, AdamState};
pub use dense::{Activation, Backward, DenseLayer, DenseNet, ForwardCache, Gradients};
pub use gaussian::{gaussian_kl, kl_grad, reparameterize, GaussianLatent, LOGVAR_MAX, LOGVAR_MIN};
pub use gradcheck::{grad_check, grad_check_against, relative_error, LossSpec, GRADCHECK_H};
pub use loss::{mse, mse_grad, softmax, softmax_cross_entropy, softmax_cross_entropy_grad};
pub use tensor::Tensor2;

/// Floating-point element type of all tensors.
pub trait Real:
    Float + FromPrimitive + LinalgScalar + Default + Debug + Display + Send + Sync + Sum + 'static
{
    fn of(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("representable")
    }

    fn f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
