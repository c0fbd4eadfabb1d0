use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("task index {task} out of range for {tasks} tasks")]
    Task { task: usize, tasks: usize },

    #[error("unknown task name {0:?}")]
    TaskName(String),

    #[error("routing tie in patch {patch}: top-k margin {margin:.3e} is below {required:.3e}")]
    RoutingTie { patch: usize, margin: f64, required: f64 },

    #[error("gradient check only supports unnormalized gate weights")]
    Renormalized,

    #[error("failed to read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what}: expected length {want}, got {got}")))
    }
}
