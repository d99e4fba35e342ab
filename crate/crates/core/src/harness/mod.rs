//! Epsilon-sweep convergence studies: run the relaxation system at a
//! decreasing sequence of `eps`, compare the `u` components with the limit
//! solution, fit the observed order and persist the result.

mod fit;
mod persist;
mod sweep;

pub use fit::{fit_order, Fit};
pub use persist::{persist_result, read_manifest, read_sweep_csv, Manifest, SweepRow, MANIFEST_JSON, SWEEP_CSV};
pub use sweep::{
    grid_halving_check, run_sweep, GridCheck, LimitSource, Norm, SweepConfig, SweepPoint, SweepResult, DEFAULT_EPS,
    GRID_CHANGE_LIMIT, REFERENCE_FACTOR, SLOPE_WINDOW,
};
