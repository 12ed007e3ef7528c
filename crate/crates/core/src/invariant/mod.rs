//! Invariant polynomials of several symmetric matrix arguments.

pub mod calibrate;
pub mod haar;
pub mod pairing;
pub mod table;
pub mod trace;

pub use calibrate::{calibrate_invariants, Component, InvariantEntry};
pub use pairing::{shared_weingarten, weingarten_orth, WeingartenTable};
pub use trace::{TraceMonomial, TraceMonomialBasis, WordCache};
pub use table::{entry_key, parts_key, shared_invariant_table, InvariantTable, TableEvaluator};
