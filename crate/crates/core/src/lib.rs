//! Provable lower and upper bounding value functions for finite-horizon
//! Markov decision processes whose Bellman functions are convex in a
//! one-dimensional continuous state.
//!
//! The engine replaces the exact Bellman recursion by a modified recursion
//! built from two ingredients:
//!
//! * a projection of each convex function onto a grid, either as the
//!   maximum of tangents taken at the grid points ([`pwl::tangent_project`])
//!   or as a chord interpolation with fixed tail extensions
//!   ([`pwl::interp_project`]);
//! * a finite weighted disturbance sampling ([`sampling`]), built from
//!   conditional averages, extreme points of a partition, or antithetic
//!   Monte Carlo draws.
//!
//! Tangents combined with conditional averages give lower bounds, chord
//! interpolation combined with extreme points gives upper bounds. The
//! [`bermudan`] module instantiates the machinery for a Bermudan put.

pub mod bermudan;
pub mod error;
pub mod mdp;
pub mod normal;
pub mod pwl;
pub mod sampling;

pub use bermudan::{BracketRow, PutModel, PutSpec};
pub use error::{Error, Result};
pub use mdp::{
    backward_induction, bellman_step, extract_policy, modified_kernel, BoundKind, Interp, MdpModel,
    PolicyTable, SamplingPlan, Scheme, Tangent, ValueTable,
};
pub use pwl::{interp_project, tangent_project, Affine, ConvexFn, Grid, InterpConvex, MaxAffine};
pub use sampling::{DisturbanceSampling, LognormalSpec, SamplingKind, TruncatedSupport};
