use nfsusy_core::gauged::GaugedError;
use nfsusy_core::mass::MassError;
use nfsusy_core::models::ModelError;
use nfsusy_core::spectral::SpectralError;

/// A failure reported as `error[CODE]: message` on one line, exit status 2.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    /// The single-line form written to stderr.
    pub fn line(&self) -> String {
        let msg: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.code, msg.join(" "))
    }
}

fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::UnknownModel(_) => "E_UNKNOWN_MODEL",
        ModelError::UnknownParam { .. } => "E_UNKNOWN_PARAM",
        ModelError::Constraint(_) => "E_CONSTRAINT",
        ModelError::Geometry(_) => "E_GEOMETRY",
        ModelError::Range { .. } => "E_RANGE",
        ModelError::Mass(m) => mass_code(m),
    }
}

fn mass_code(e: &MassError) -> &'static str {
    match e {
        MassError::UnknownId(_) => "E_UNKNOWN_MASS",
        MassError::UnknownParam { .. } => "E_UNKNOWN_PARAM",
        _ => "E_MASS",
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::new(model_code(&e), e.to_string())
    }
}

impl From<MassError> for CliError {
    fn from(e: MassError) -> Self {
        Self::new(mass_code(&e), e.to_string())
    }
}

impl From<GaugedError> for CliError {
    fn from(e: GaugedError) -> Self {
        Self::new("E_GAUGED", e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        let code = match &e {
            SpectralError::Model(m) => model_code(m),
            other => other.code(),
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new("E_IO", e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new("E_JSON", e.to_string())
    }
}
