use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An exhaustive search visited more nodes than the configured budget.
    /// Always a hard error, never a silent truncation.
    #[error("search budget exceeded: {visited} nodes visited, limit {limit} ({context})")]
    BudgetExceeded {
        visited: usize,
        limit: usize,
        context: String,
    },
    #[error("dimension mismatch: expected {expected} state coordinates, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("value too large for explicit computation: {0}")]
    TooLarge(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Node budget for explicit searches. Exceeding it aborts the search with
/// [`Error::BudgetExceeded`].
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub max_nodes: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_nodes: 5_000_000,
        }
    }
}

impl Budget {
    pub fn new(max_nodes: usize) -> Self {
        Budget { max_nodes }
    }

    pub fn check(&self, visited: usize, context: &str) -> Result<()> {
        if visited > self.max_nodes {
            Err(Error::BudgetExceeded {
                visited,
                limit: self.max_nodes,
                context: context.to_string(),
            })
        } else {
            Ok(())
        }
    }
}
