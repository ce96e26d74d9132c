//! Wasserstein-2 distances between point clouds and the series analysis built
//! on them.

mod assignment;
mod cloud;
mod decay;
mod wasserstein;

pub use assignment::solve_assignment;
pub use cloud::PointCloud;
pub use decay::{
    decay_fit, divergence_detect, divergence_detect_with_window, mixing_time,
    mixing_time_with_window, moving_average, DecayFit, Divergence, MetricSeries,
    DEFAULT_WINDOW, DIVERGENCE_RATIO,
};
pub use wasserstein::{
    w2_auto, w2_exact, w2_sliced, w2_squared_1d, w2_with, Estimator, DEFAULT_PROJECTIONS,
    EXACT_MAX_POINTS,
};
