//! Exact integer linear algebra and polynomial arithmetic.

mod cyclotomic;
mod factor;
mod kernel;
mod matrix;
mod poly;
pub mod roots;

pub use cyclotomic::{cyclotomic, euler_phi, has_root_of_unity_factor, orders_with_phi_at_most};
pub use factor::{factor_over_q, factor_over_q_capped, MAX_BITS, START_BITS};
pub use kernel::integer_kernel;
pub use matrix::{big_matrix_serde, big_pow, char_poly, char_poly_big, poly_of_matrix, IntMatrix};
pub use poly::IntPolynomial;
