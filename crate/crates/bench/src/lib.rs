//! Fixtures shared by the benchmarks.

use sdkl_core::{DensityAt, ParamDensity, QuadSpec, UpdateRule};

/// Unit-variance Gaussian location model.
pub fn gaussian_model() -> ParamDensity {
    ParamDensity::gaussian_location(1.0).expect("unit variance is valid")
}

pub fn gaussian_truth(lambda: f64) -> DensityAt {
    DensityAt::new(gaussian_model(), lambda).expect("location parameters are unrestricted")
}

pub fn sd_rule(alpha: f64) -> UpdateRule {
    UpdateRule::score_driven(gaussian_model(), alpha).expect("positive learning rate")
}

pub fn default_quad() -> QuadSpec {
    QuadSpec::default()
}
