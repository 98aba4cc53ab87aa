//! Explainability and uncertainty analysis over a trained surrogate.

mod pdp;
mod sobol;
mod tipping;
mod uncertainty;

pub use pdp::{ice_curves, ice_instances, linspace, pdp_ice, CurveSet, PdpOptions};
pub use sobol::{sobol_indices, sobol_on_box, BootstrapCi, Interval, PairIndex, SecondOrder, SobolIndices, SobolOptions};
pub use tipping::{detect_tipping_points, inflection, peaks, steepest_drop, TippingKind, TippingPoint};
pub use uncertainty::{
    calibration_ids, config_targets, fit_uncertainty, total_sigma, uncertainty_field, uncertainty_profile, Sigmas,
    UncertaintyField, UncertaintyModel, UncertaintyProfile, UqOptions, MIN_CALIBRATION,
};
