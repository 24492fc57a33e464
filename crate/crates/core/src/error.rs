use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two vortices came closer than the kernel floor allows.
    #[error("near-collision between vortices {i} and {j}: kernel value {kernel:e} below floor{}", at_time(*.time))]
    Collision {
        i: usize,
        j: usize,
        kernel: f64,
        time: Option<f64>,
    },

    #[error("step-size controller failed at t = {time}: step {step:e} below minimum")]
    StepFailure { time: f64, step: f64 },

    #[error("root finding failed: {0}")]
    NoRoot(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The relative separation lies outside the energetically allowed window.
    #[error("separation dv = {dv} is inadmissible: cos(du) would be {cos_du}")]
    Inadmissible { dv: f64, cos_du: f64 },

    #[error("perturbation {eta0:e} exceeds the linear-regime bound {bound:e}")]
    PerturbationTooLarge { eta0: f64, bound: f64 },

    #[error("no samples fall inside the growth fit window")]
    WindowEmpty,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn at_time(time: Option<f64>) -> String {
    match time {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    /// Short machine-readable tag used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Collision { .. } => "collision",
            Error::StepFailure { .. } => "step_failure",
            Error::NoRoot(_) => "no_root",
            Error::Unsupported(_) => "unsupported",
            Error::Inadmissible { .. } => "inadmissible",
            Error::PerturbationTooLarge { .. } => "perturbation_too_large",
            Error::WindowEmpty => "window_empty",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn with_time(self, t: f64) -> Self {
        match self {
            Error::Collision { i, j, kernel, .. } => Error::Collision {
                i,
                j,
                kernel,
                time: Some(t),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
