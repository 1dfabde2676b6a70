//! Chip-firing divisor theory on connected multigraphs.
//!
//! The crate models effective divisors and monotone set firing, computes
//! divisorial gonality and its stable variant over capped subdivision grids,
//! and implements a compact certificate format for firing sequences: a
//! labelled divisor on the once-subdivided graph together with, per target
//! vertex, the firing sets that touch original vertices and the chip moves
//! they cause. A certificate is checked by fourteen structural requirements
//! plus feasibility of a small integer program over edge lengths and firing
//! gaps; from a certificate and a feasible assignment the concrete
//! subdivision and full firing schedule are reconstructed and replayed.

pub mod certificate;
pub mod chip_firing;
pub mod expansion;
pub mod gonality;
pub mod ilp;
pub mod multigraph;
pub mod witness;

pub use chip_firing::{Divisor, FiringScript, LabeledDivisor};
pub use multigraph::{Multigraph, SubdivisionMap, Vertex};
