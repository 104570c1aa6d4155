use std::fmt;
use std::path::{Path, PathBuf};

/// Error carrying a stable code plus the file and line or record it concerns.
#[derive(Debug, Clone, PartialEq)]
pub struct Error {
    pub code: String,
    pub file: Option<PathBuf>,
    pub location: Option<Location>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Record(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        Self { code: code.into(), file: None, location: None, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("UsageError", message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("ConfigError", message)
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Self::new("ParseError", message).line(line)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("IoError", err.to_string()).file(path)
    }

    /// Wraps a module error, using its variant name as the code.
    pub fn from_module<E: fmt::Debug + fmt::Display>(err: E) -> Self {
        Self::new(variant_name(&err), err.to_string())
    }

    pub fn file(mut self, path: impl AsRef<Path>) -> Self {
        self.file.get_or_insert_with(|| path.as_ref().to_path_buf());
        self
    }

    pub fn line(mut self, line: usize) -> Self {
        self.location.get_or_insert(Location::Line(line));
        self
    }

    pub fn record(mut self, id: impl Into<String>) -> Self {
        self.location.get_or_insert_with(|| Location::Record(id.into()));
        self
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        if self.code == "UsageError" {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]", self.code)?;
        if let Some(file) = &self.file {
            write!(f, " {}", file.display())?;
        }
        match &self.location {
            Some(Location::Line(n)) => write!(f, ":{n}")?,
            Some(Location::Record(id)) => write!(f, " record {id}")?,
            None => {}
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for Error {}

fn variant_name(err: &dyn fmt::Debug) -> String {
    let debug = format!("{err:?}");
    let name: String = debug.chars().take_while(|c| c.is_ascii_alphanumeric() || *c == '_').collect();
    if name.is_empty() {
        "Error".into()
    } else {
        name
    }
}

macro_rules! module_error {
    ($($t:ty),* $(,)?) => {
        $(impl From<$t> for Error {
            fn from(e: $t) -> Self {
                Error::from_module(e)
            }
        })*
    };
}

module_error!(
    traitsteer_core::dataset::DatasetError,
    traitsteer_core::steering::SteeringError,
    traitsteer_core::psychometrics::PsychometricError,
    traitsteer_core::analysis::AnalysisError,
    traitsteer_core::scorer::ScorerError,
    traitsteer_core::personality::TraitModelError,
    traitsteer_core::ngram::NgramError,
    traitsteer_core::text::TokenizeError,
    traitsteer_core::logits::LogitError,
);

impl From<traitsteer_core::steering::SourceError> for Error {
    fn from(e: traitsteer_core::steering::SourceError) -> Self {
        Error::new(format!("{:?}Error", e.kind), e.message)
    }
}
