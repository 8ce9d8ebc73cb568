use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("ingestion: {message}")]
    Ingestion { message: String, lines: Vec<(usize, String)> },

    #[error("io: {0}")]
    Io(String),

    #[error(transparent)]
    Domain(#[from] betadiff::Error),
}

impl CliError {
    /// 0 success, 1 domain error, 2 usage/ingestion, 3 assumption violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Ingestion { .. } | CliError::Io(_) => 2,
            CliError::Domain(betadiff::Error::InvalidParameter(_)) => 2,
            CliError::Domain(betadiff::Error::AssumptionViolation { .. }) => 3,
            CliError::Domain(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Ingestion { .. } => "ingestion",
            CliError::Io(_) => "io",
            CliError::Domain(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Ingestion { lines, .. } if !lines.is_empty() => {
                body["lines"] = lines.iter().map(|(n, why)| json!({"line": n, "reason": why})).collect();
            }
            CliError::Domain(betadiff::Error::AssumptionViolation { condition, .. }) => {
                body["condition"] = json!(condition);
            }
            _ => {}
        }
        json!({ "error": body })
    }
}
