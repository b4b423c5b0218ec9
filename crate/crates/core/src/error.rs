use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Normalizing a state whose norm is numerically zero, usually a
    /// postselection on an impossible outcome.
    #[error("cannot normalize a null state (norm {norm:e})")]
    NullState { norm: f64 },

    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("Fisher extrapolation did not converge{}: residual {residual:e} exceeds tolerance {tolerance:e} (estimate {estimate})", site_suffix(.site))]
    Unconverged {
        site: Option<String>,
        estimate: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("circuit has {sites} environment sites, brute-force oracle is capped at {limit}")]
    TooLarge { sites: usize, limit: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn site_suffix(site: &Option<String>) -> String {
    match site {
        Some(s) => format!(" at site {s}"),
        None => String::new(),
    }
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Attach a site id to an unconverged error.
    pub(crate) fn at_site(self, id: &str) -> Self {
        match self {
            Error::Unconverged {
                estimate,
                residual,
                tolerance,
                ..
            } => Error::Unconverged {
                site: Some(id.to_string()),
                estimate,
                residual,
                tolerance,
            },
            other => other,
        }
    }
}
