//! DC optimal transmission switching (DCOTS).
//!
//! * [`network`]: MATPOWER case parsing and the grid data model.
//! * [`dcots`]: the switching MIP, fixed-topology DCOPF evaluation and the
//!   brute-force reference solver.
//! * [`heuristics`]: the k-nearest-neighbour heuristic and greedy line removal.
//! * [`instances`]: perturbed instance generation and offline training.
//! * [`analysis`]: census, cross-evaluation, LOOCV, bus classes and
//!   stability studies over a training set.

pub mod analysis;
pub mod cases;
pub mod dcots;
pub mod heuristics;
pub mod instances;
pub mod network;
