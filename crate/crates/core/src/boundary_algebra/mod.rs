//! Exact arithmetic and calculus on finite power/log series with polynomial
//! tangential coefficients.

mod bipoly;
mod poly;
mod series;

pub use bipoly::BiPoly;
pub use poly::{approximate, chebyshev_nodes, fit_certified, Poly};
pub use series::{neumaier_sum, Series, SeriesJson, Term, TermExponent, PRUNE_TOL};
