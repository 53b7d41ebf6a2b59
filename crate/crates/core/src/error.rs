use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("frame is {got_w}x{got_h}, expected {want}x{want}")]
    FrameSize {
        got_w: usize,
        got_h: usize,
        want: usize,
    },

    #[error("calibration needs {needed} frames but the stream has {available}")]
    CalibrationUnderrun { needed: usize, available: usize },

    #[error("degenerate regression: {0}")]
    DegenerateFit(String),

    #[error(
        "direction is indeterminate (row correlation {rows:.3}, column correlation {cols:.3})"
    )]
    IndeterminateDirection { rows: f64, cols: f64 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
