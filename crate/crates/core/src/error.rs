use thiserror::Error;

/// Errors raised by the scattering, inversion and evolution stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("propagation diverged at y = {y}")]
    DivergedPropagation { y: f64 },

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("window overflow: {0}")]
    WindowOverflow(String),

    #[error("inversion breakdown at (x, y) = ({x}, {y}): condition estimate {condition:e}")]
    InversionBreakdown { x: f64, y: f64, condition: f64 },

    #[error("kernel tables do not decay at the window edge: max |{kernel}| = {value:e} on the outer band")]
    EdgeDecay { kernel: &'static str, value: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerics (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::DivergedPropagation { .. }
                | Error::BlowUp { .. }
                | Error::WindowOverflow(_)
                | Error::InversionBreakdown { .. }
                | Error::EdgeDecay { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
