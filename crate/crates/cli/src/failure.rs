use std::fmt;

use esn_lrofr::benchmarks::BenchmarkError;
use esn_lrofr::esn::EsnError;
use esn_lrofr::persistence::PersistenceError;
use esn_lrofr::rbf::RbfError;
use esn_lrofr::selection::SelectionError;

/// Diagnostic category; doubles as the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Io = 3,
    Data = 4,
    Archive = 5,
    Config = 6,
    Numerical = 7,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Io => "io",
            Category::Data => "data",
            Category::Archive => "archive",
            Category::Config => "config",
            Category::Numerical => "numerical",
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub category: Category,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(category: Category, error: impl Into<anyhow::Error>) -> Self {
        Self {
            category,
            error: error.into(),
        }
    }

    pub fn msg(category: Category, msg: impl fmt::Display) -> Self {
        Self::new(category, anyhow::anyhow!("{msg}"))
    }

    pub fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> Self {
        Self {
            category: self.category,
            error: self.error.context(msg),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error ({}): {:#}", self.category, self.error)
    }
}

pub type Outcome<T> = Result<T, Failure>;

/// Adds a context line while keeping the category chosen by `From`.
pub trait Context<T> {
    fn ctx(self, msg: impl fmt::Display + Send + Sync + 'static) -> Outcome<T>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn ctx(self, msg: impl fmt::Display + Send + Sync + 'static) -> Outcome<T> {
        self.map_err(|e| e.into().context(msg))
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(Category::Io, e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        let category = if e.is_io_error() { Category::Io } else { Category::Data };
        Failure::new(category, e)
    }
}

impl From<toml::de::Error> for Failure {
    fn from(e: toml::de::Error) -> Self {
        Failure::new(Category::Config, e)
    }
}

impl From<toml::ser::Error> for Failure {
    fn from(e: toml::ser::Error) -> Self {
        Failure::new(Category::Config, e)
    }
}

impl From<PersistenceError> for Failure {
    fn from(e: PersistenceError) -> Self {
        let category = match e {
            PersistenceError::Io(_) => Category::Io,
            PersistenceError::Config(_) => Category::Config,
            _ => Category::Archive,
        };
        Failure::new(category, e)
    }
}

impl From<EsnError> for Failure {
    fn from(e: EsnError) -> Self {
        let category = match e {
            EsnError::NonFiniteState { .. } => Category::Numerical,
            EsnError::DimensionMismatch { .. } => Category::Data,
            _ => Category::Config,
        };
        Failure::new(category, e)
    }
}

impl From<SelectionError> for Failure {
    fn from(e: SelectionError) -> Self {
        let category = match e {
            SelectionError::InvalidTolerance(_) | SelectionError::InvalidLambda(_) | SelectionError::InvalidBeta(_) => {
                Category::Config
            }
            _ => Category::Numerical,
        };
        Failure::new(category, e)
    }
}

impl From<RbfError> for Failure {
    fn from(e: RbfError) -> Self {
        match e {
            RbfError::Selection(inner) => inner.into(),
            RbfError::InvalidSpec(_) => Failure::new(Category::Config, e),
            RbfError::LengthMismatch { .. } => Failure::new(Category::Data, e),
            RbfError::EmptyModel => Failure::new(Category::Numerical, e),
        }
    }
}

impl From<BenchmarkError> for Failure {
    fn from(e: BenchmarkError) -> Self {
        match e {
            BenchmarkError::Esn(inner) => inner.into(),
            BenchmarkError::InvalidParams(_) => Failure::new(Category::Config, e),
            _ => Failure::new(Category::Numerical, e),
        }
    }
}
