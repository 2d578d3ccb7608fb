//! Fixed-point continuation solvers for nonlinear boundary value problems.
//!
//! The central object is a parameterized compact operator `T(c, w)` whose
//! fixed points trace a connected branch as the scalar parameter `c` sweeps
//! an interval. Branch tracing plus a sign change of a scalar functional on
//! the branch yields solutions of the original nonlinear problem. Three
//! application front ends are built on this machinery:
//!
//! * [`nonlocal`] — u'' = f(t, u) on (-L, L) with the nonlocal boundary
//!   condition u(±L) = g(u(0)), scalar and planar variants;
//! * [`resonance`] — periodic solvability of u'' + a u' + g(u) = p0 + s and
//!   the solvability range of the forcing mean s;
//! * [`chemostat`] — periodic orbits of a delayed chemostat via its Poincaré
//!   map.
//!
//! Shared infrastructure lives in [`grid`] (meshes, interpolation), [`bvp`]
//! (linear solvers), [`fixed_point`] (Picard and Newton solvers) and
//! [`continuation`] (branch tracing, root refinement, winding numbers).

pub mod bvp;
pub mod chemostat;
pub mod continuation;
pub mod fixed_point;
pub mod grid;
pub mod nonlocal;
pub mod resonance;

pub use grid::{GridFn, PeriodicSignal, UniformGrid};
