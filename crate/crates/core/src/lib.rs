//! Simulation and verification toolkit for branching random walks whose
//! displacement tails are log-slowly varying: `P[X > t] = a exp(-L(t))`
//! with `L` growing either faster than every multiple of `log t`
//! (suplogarithmic, e.g. lognormal-type tails) or slower than every one
//! (sublogarithmic, stretched-log tails).
//!
//! Modules, bottom-up:
//!
//! * [`streams`] — deterministic per-task random streams;
//! * [`stepfn`] — right-continuous step functions used as test functions
//!   for point-process functionals;
//! * [`tail`] — displacement laws, their calculus, and regime checks;
//! * [`norm`] — centering/scaling sequences derived from the tail;
//! * [`galton`] — offspring laws, survival/cluster quantities, and the
//!   limit multiplicity law;
//! * [`quad`] — adaptive quadrature for truncated exponential moments;
//! * [`engine`] — the depth-first branching random walk simulator with
//!   stopping-line decompositions;
//! * [`limits`] — the predicted limit objects (mixed Gumbel law, decorated
//!   Cox process) and exact samplers for them;
//! * [`stats`] — Kolmogorov–Smirnov / total-variation / binomial-tail
//!   machinery used by the verification layer;
//! * [`verify`] — end-to-end statistical experiments comparing simulations
//!   against the predicted limits and bounds.

// Parameter validation uses `!(x > 0.0)`-style comparisons throughout so
// that NaN fails closed; rewriting them via `partial_cmp` would lose that
// one-look property.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod galton;
pub mod limits;
pub mod norm;
pub mod quad;
pub mod stats;
pub mod stepfn;
pub mod streams;
pub mod tail;
pub mod verify;
