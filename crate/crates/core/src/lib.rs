//! Expected number of real solutions of `Q_n(x) = Kx` for random
//! polynomials whose coefficients form a Gaussian random walk.

pub mod asymptotics;
pub mod cli;
pub mod density;
mod extreal;
pub mod model;
pub mod montecarlo;
mod numeric;
pub mod quadrature;
