//! Monte Carlo laboratory and exact small-`n` oracle for activated random
//! walk on the complete graph with a sink.
//!
//! * [`model`]: parameters, normalization constants, closed forms.
//! * [`oracle`]: exact laws for small `n` by linear solves.
//! * [`arw`]: direct particle simulation and abelian replay.
//! * [`bup`]: the binomial update process in discrete and continuous time.
//! * [`stats`]: KS distances, fixed-threshold reports, Wilson intervals.
//! * [`expcli`]: scenario runner behind the `arwlab` binary.
//! * [`replicate`]: seeding and the parallel replicate loop.

pub mod arw;
pub mod bup;
pub mod error;
pub mod expcli;
pub mod model;
pub mod oracle;
pub mod replicate;
pub mod stats;

pub use error::{Error, Result};
pub use model::{constants, DerivedConstants, Params};
