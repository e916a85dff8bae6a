//! Solver kit for multistage distributionally robust mixed-integer programs
//! with decision-dependent moment ambiguity sets.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: small dense symmetric linear algebra (Jacobi eigenpairs,
//!   Cholesky, diagonal dominance).
//! * [`lp`]: a dense bounded-variable simplex and best-bound
//!   branch-and-bound.
//! * [`model`]: the multistage facility-location instance and its per-stage
//!   feasible sets.
//! * [`ambiguity`]: decision-dependent moment maps and worst-case oracles.
//! * [`reformulate`]: compilation of stage Bellman problems into MILPs via
//!   the moment-dual reformulations, McCormick envelopes and cut rows.
//! * [`sddip`]: forward/backward passes with Lagrangian cuts.
//! * [`misdp`]: outer (eigen-cut) and inner (diagonally dominant) bounds for
//!   the semidefinite ambiguity set.
//! * [`bench`]: the two-stage enumeration oracle, pattern instances,
//!   experiment grids and the command-line front end.

pub mod linalg;
pub mod lp;
pub mod model;
pub mod ambiguity;
pub mod reformulate;
pub mod sddip;
pub mod misdp;
pub mod bench;
