use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("index set is empty ({0})")]
    EmptySet(&'static str),

    #[error("invalid rating scale {v_min}..={v_max}")]
    InvalidScale { v_min: u8, v_max: u8 },

    #[error("cell ({user}, {item}) outside a {n_users}x{n_items} matrix")]
    IndexOutOfRange {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },

    #[error("rating {rating} at ({user}, {item}) outside scale {v_min}..={v_max}")]
    RatingOutOfScale {
        user: usize,
        item: usize,
        rating: i64,
        v_min: u8,
        v_max: u8,
    },

    #[error("duplicate rating for cell ({user}, {item})")]
    DuplicateEntry { user: usize, item: usize },

    #[error("cell ({user}, {item}) has no {what}")]
    MissingCell {
        user: usize,
        item: usize,
        what: &'static str,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged: objective {objective} exceeds 10x the initial {initial}")]
    Diverged { initial: f64, objective: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn check_shape(
    context: &'static str,
    expected: (usize, usize),
    actual: (usize, usize),
) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
