//! Exact arithmetic of epsilon-Campana points on orbifold models
//! `(P^n_Z, D = sum D_i, eps, S)` over `Q`.
//!
//! A point is handled through its primitive integer coordinates, the
//! intersection multiplicity with `D_i = {F_i = 0}` at a prime `p` is
//! `v_p(F_i(x))`, and every counting function and height is carried as an
//! exact formal sum of logarithms of primes.

pub mod arith;
pub mod campana;
pub mod census;
pub mod enumerate;
pub mod error;
pub mod geometry;
pub mod heights;
pub mod local;
pub mod model_file;
pub mod oracle;

pub use campana::{is_campana, support_primes, PointClass};
pub use error::{Error, Result};
pub use geometry::{normalize, validate_model, DivisorComponent, Form, OrbifoldModel, ProjectivePoint};
pub use heights::LogSum;
pub use model_file::{load_model, parse_model};
