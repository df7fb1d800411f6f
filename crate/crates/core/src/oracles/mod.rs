//! Independent ground truth for the analytical kernels: the matrix
//! exponential, block-augmented exponentials for exact derivatives, and
//! finite differences.

mod augmented;
mod expm;
mod fd;

pub use augmented::{
    augmented_gradient_rot, augmented_gradient_su2, augmented_quaternion_derivative,
    rotation_by_expm, so3_generator, su2_by_expm,
};
pub use expm::expm;
pub use fd::{central_difference, default_step, finite_difference, gradient_ridders, ridders, Ridders};
