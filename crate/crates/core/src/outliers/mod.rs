//! Additive-outlier detection by projection onto the complement of the
//! factor space, series adjustment, and outlier-size estimation.

mod adjust;
mod detect;
mod pipeline;
mod size;

pub use adjust::{adjust, AdjustOptions, AdjustStrategy};
pub use detect::{detect, projection_directions, Detection, DetectionMode, DirectionSource, Directions, ProjectionSet};
pub use pipeline::{run_pipeline, OutlierReport, OutlierSize, PipelineConfig};
pub use size::{fit_alpha, size_alpha, size_zeta, size_zeta_at, total_size, AlphaFit, ArOrder};

/// Tchebychev threshold at level 0.05: √(1/0.05).
pub const DEFAULT_K_ALPHA: f64 = 4.47213595499958;
