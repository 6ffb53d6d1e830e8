use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Core(#[from] tcfilm_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use tcfilm_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::InsufficientData(_) => 5,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::Config(_) | E::Validation(_) | E::Positivity { .. } | E::Domain(_) => 2,
                E::Blowup { .. } => 4,
                E::InsufficientData(_) | E::SamplingTooCoarse(_) | E::DegenerateFit(_) => 5,
                E::UnsupportedRegime(_) => 6,
                E::Geometry(_) => 1,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
