//! Numerical integration: adaptive Gauss–Kronrod on the half line, Gauss–
//! Jacobi rules, product rules on spheres and balls, and the radial moments
//! and constants built from them.

pub mod constants;
pub mod gauss;
pub mod kronrod;
pub mod moments;
pub mod sphere;

pub use constants::{constants_table, constants_table_with_tol, ConstantsTable};
pub use gauss::{gauss_jacobi, gauss_legendre};
pub use kronrod::{integrate, integrate_half_line, integrate_half_line_abs, QuadResult};
pub use moments::{abs_mass, axis_moment, beta_oracle, radial_integral, radial_moment, MomentKind, MomentWeight, RadialMoment};
pub use sphere::{axis_power_mean, sphere_area, weighted_sum, BallRule, SphereRule};
