use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({u0}, {u1}) lies outside the validity set of chart `{chart}`")]
    Domain { chart: String, u0: f64, u1: f64 },

    #[error("chart `{chart}` is degenerate at ({u0}, {u1}): metric determinant {det:e}")]
    DegenerateChart {
        chart: String,
        u0: f64,
        u1: f64,
        det: f64,
    },

    #[error("boundary of chart `{chart}` is irregular at ({u0}, {u1}): vanishing gradient")]
    IrregularBoundary { chart: String, u0: f64, u1: f64 },

    #[error("point is not on the boundary (b = {b:e})")]
    NotOnBoundary { b: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("step size underflow at t = {t} (h = {h:e}, chart {chart}, u = ({u0}, {u1}))")]
    Stiffness {
        t: f64,
        h: f64,
        chart: usize,
        u0: f64,
        u1: f64,
    },

    #[error("no chart of the atlas covers the point ({x}, {y}, {z})")]
    Atlas { x: f64, y: f64, z: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("hypothesis 2 fails: declared gamma_min = {0} is not positive")]
    NonPositiveFriction(f64),

    #[error("force bound is not finite")]
    UnboundedForce,

    #[error("no periodic orbit found ({seeds} seeds tried, hypotheses {verdict}): {detail}")]
    NoOrbit {
        seeds: usize,
        verdict: &'static str,
        detail: String,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("scenario validation failed:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("unknown built-in scenario `{0}`")]
    UnknownScenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
