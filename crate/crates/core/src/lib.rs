//! Curvature and symmetry analysis of Lorentzian metrics written in a
//! Brinkmann chart `g = −2du(dv + H du + W_i dx^i) + g_ij dx^i dx^j`.
//!
//! Derivatives are carried exactly (to rounding) by truncated Taylor jets, so
//! curvature, `∇R` and `∇∇R` come out at machine precision without finite
//! differences.

pub mod jet;
pub mod expr;
pub mod field;
pub mod chart;
pub mod curvature;
pub mod oracle;
pub mod symbolic;
pub mod sampling;
pub mod spaces;
pub mod classify;
pub mod ode;
pub mod canonical;
pub mod transport;

pub use chart::{ChartPoint, MetricSpec};
pub use expr::Expr;
pub use jet::Jet;
