use crate::atlas::ChartId;

pub type Result<T> = std::result::Result<T, GeomError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("point is not in the overlap of charts {from} and {to}")]
    NotInOverlap { from: ChartId, to: ChartId },
    #[error("point lies outside the domain of chart {0}")]
    OutsideChart(ChartId),
    #[error("finite-difference stencil leaves the domain of chart {0}")]
    StencilLeavesDomain(ChartId),
    #[error("no data registered for chart {0}")]
    ChartMissing(ChartId),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("trajectory left the atlas at t = {t}")]
    LeftAtlas { t: f64 },
    #[error("exceeded {limit} chart hops at t = {t}")]
    HopLimit { limit: usize, t: f64 },
    #[error("state diverged at t = {t}")]
    Diverged { t: f64 },
    #[error("the two points share no chart")]
    NoCommonChart,
    #[error("group element is singular")]
    SingularGroupElement,
    #[error("frame is singular")]
    SingularFrame,
    #[error("Newton shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("seed lives in chart {seed} but the path starts in chart {path}")]
    SeedChartMismatch { seed: ChartId, path: ChartId },
    #[error("seeds do not share a base point")]
    BasePointMismatch,
    #[error("field is not an infinitesimal affine automorphism (residual {residual:e})")]
    NotKilling { residual: f64 },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
    #[error("map has no inverse representation")]
    NoInverse,
}
