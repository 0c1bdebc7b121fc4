use std::fmt;

use thiserror::Error;

use crate::sim::Trace;

/// Plant/generator preconditions that are checked rather than assumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assumption {
    /// Full row rank of `C`, full column rank of `B`.
    FullRank,
    /// `A` Hurwitz, `(A, B)` controllable, `(C, A)` observable.
    StableControllableObservable,
    /// Exogenous generator is observable with spectrum on the imaginary axis.
    NeutralGenerator,
    /// Harmonic count bounded by the declared maximum.
    KnownHarmonicBound,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Assumption::FullRank => "full-rank input/output maps",
            Assumption::StableControllableObservable => "stable, controllable and observable plant",
            Assumption::NeutralGenerator => "observable neutrally stable disturbance generator",
            Assumption::KnownHarmonicBound => "known maximum harmonic count",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("assumption violated ({assumption}): {detail}")]
    Assumption {
        assumption: Assumption,
        detail: String,
    },

    #[error("singular system in {what} (least-squares residual {residual:.3e})")]
    Singular { what: &'static str, residual: f64 },

    #[error("{what} is not Hurwitz (max Re = {max_re:.6e})")]
    NotHurwitz { what: &'static str, max_re: f64 },

    #[error("pair ({what}) is not controllable")]
    Uncontrollable { what: &'static str },

    #[error("pair ({what}) is not observable; use observable_decomposition")]
    Unobservable { what: &'static str },

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("pole placement failed after {attempts} attempts (best mismatch {mismatch:.3e})")]
    PolePlacement { attempts: usize, mismatch: f64 },

    #[error("invalid pole request: {0}")]
    PoleRequest(String),

    #[error("observer does not exist: {0}")]
    ObserverDoesNotExist(String),

    #[error("degenerate disturbance generator: channel has no harmonics and zero bias")]
    DegenerateGenerator,

    #[error("invalid disturbance channel: {0}")]
    Channel(String),

    #[error("structural violation: {0}")]
    Structure(String),

    #[error("non-finite value in {location} at t = {t}")]
    NonFinite { location: &'static str, t: f64 },

    #[error("simulation diverged at t = {t} (state norm exceeded {limit:e})")]
    Diverged {
        t: f64,
        limit: f64,
        partial: Box<Trace>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot parse scenario: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Field {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Field { source, .. } => source.exit_code(),
            Error::ObserverDoesNotExist(_) => 3,
            Error::Diverged { .. } | Error::NonFinite { .. } => 4,
            Error::Io { .. } => 1,
            _ => 2,
        }
    }

    /// Wraps `self` with the location of the offending field.
    pub fn at(self, path: impl Into<String>) -> Error {
        Error::Field { path: path.into(), source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_err(context: &'static str, expected: impl fmt::Display, got: impl fmt::Display) -> Error {
    Error::Dimension {
        context,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
