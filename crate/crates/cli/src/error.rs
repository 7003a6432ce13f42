use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: floquet_core::Error,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn core(module: &'static str) -> impl FnOnce(floquet_core::Error) -> CliError {
        move |source| CliError::Core { module, source }
    }

    /// 2 for invalid input, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        use floquet_core::Error as E;
        match self {
            CliError::Config { .. } => 2,
            CliError::Core { source, .. } => match source {
                E::DimensionMismatch { .. }
                | E::SizeGuard { .. }
                | E::InvalidConfig { .. }
                | E::InvalidArgument(_)
                | E::MissingOffset { .. } => 2,
                _ => 3,
            },
            CliError::Io(_) | CliError::Output(_) => 1,
        }
    }
}
