use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("piece {piece} ({length}x{width}) does not fit a {board_length}x{board_width} board")]
    InfeasiblePiece {
        piece: usize,
        length: usize,
        width: usize,
        board_length: usize,
        board_width: usize,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by how the caller invoked an operation rather than by the
    /// environment or the filesystem.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}
