use conformal::ConformalError;
use serde::Serialize;

use crate::config::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Io,
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Io => 1,
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numeric => 4,
        }
    }
}

/// Machine-readable failure written to stderr as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            code: kind.exit_code(),
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(Kind::Data, message)
    }

    pub fn invalid(diagnostics: Vec<Diagnostic>) -> Self {
        let mut e = Self::config(format!("{} invalid config field(s)", diagnostics.len()));
        e.diagnostics = diagnostics;
        e
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} error: {}", self.kind, self.message)
    }
}

impl From<ConformalError> for CliError {
    fn from(e: ConformalError) -> Self {
        use ConformalError::*;
        let kind = match &e {
            InvalidLevel { .. } | InvalidParameter(_) => Kind::Config,
            EmptyCalibration
            | EmptyPartition { .. }
            | DimensionMismatch { .. }
            | RaggedSeries(_)
            | NoUnsafeRecords
            | PredictionMismatch { .. } => Kind::Data,
            NonFinite(_) | DegenerateScale(_) | CrossedQuantiles { .. } | Numeric(_) => {
                Kind::Numeric
            }
        };
        Self::new(kind, e.to_string())
    }
}
