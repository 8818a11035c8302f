use std::fmt;

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, files or records: exit 2.
    Input(anyhow::Error),
    /// Network, port or storage trouble: exit 3.
    Environment(anyhow::Error),
}

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_ENVIRONMENT: u8 = 3;

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Environment(_) => EXIT_ENVIRONMENT,
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) | Failure::Environment(e) => write!(f, "{e:#}"),
        }
    }
}

pub trait ResultExt<T> {
    fn input(self, context: &str) -> Result<T, Failure>;
    fn environment(self, context: &str) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ResultExt<T> for Result<T, E> {
    fn input(self, context: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into().context(context.to_string())))
    }

    fn environment(self, context: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Environment(e.into().context(context.to_string())))
    }
}

/// Client errors: rejected requests are input errors, the rest environmental.
pub fn from_client(e: gm_service::ClientError, context: &str) -> Failure {
    let env = e.is_environmental();
    let err = anyhow::Error::new(e).context(context.to_string());
    if env {
        Failure::Environment(err)
    } else {
        Failure::Input(err)
    }
}
