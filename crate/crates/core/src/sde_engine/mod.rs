//! Time stepping of the multiscale system, the frozen fast equation, and the
//! variational flows of the frozen equation.

pub mod builtin;
mod path;
mod simulate;
mod system;
mod variational;

pub use path::{trapezoid, PathMeta, Record, SamplePath};
pub use simulate::{
    fast_sup_moment, frozen_sup_moment, par_paths, simulate_frozen, simulate_multiscale,
    step_count, step_multiscale, FrozenStepper, MultiscaleStepper, ESCAPE_MAGNITUDE,
};
pub use system::{
    Coefficients, Hypothesis, HypothesisWarning, MultiscaleSystem, NoiseSwitch, SecondDerivatives,
    FAST_STEP_FRACTION,
};
pub use variational::{finite_difference_x, simulate_variational, FlowOrder, VariationalFlow};

