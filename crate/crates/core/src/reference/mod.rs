//! Grid references for `π_β ∝ e^{−βu}` in one or two dimensions and the
//! distance estimators measured against them.

mod grid;
mod metrics;

pub use grid::{fmt_float, grid_reference, GridDensity, GridSpec, TAIL_RATIO_LIMIT};
pub(crate) use grid::log_sum_exp;
pub use metrics::{
    excess_risk, excess_risk_quadrature, kl_divergence, sliced_w2, tv_distance, w2_1d, Binned,
    Histogram, MetricReport, W2Target,
};
