use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags or configuration. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// Missing, corrupt or unusable input data. Exit code 3.
    #[error("{0}")]
    Data(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Data(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Usage(_) => "usage",
            HarnessError::Data(_) => "data",
        }
    }

    /// One-line JSON for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl From<whisker_core::Error> for HarnessError {
    fn from(e: whisker_core::Error) -> Self {
        match e {
            whisker_core::Error::Config(_) => HarnessError::Usage(e.to_string()),
            _ => HarnessError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Data(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Data(e.to_string())
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
