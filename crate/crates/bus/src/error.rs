use crate::Document;

#[derive(Debug, thiserror::Error)]
pub enum BusError {
    #[error("invalid topic name {0:?}")]
    InvalidTopic(String),
    #[error("no service registered under {0}")]
    NoSuchService(String),
    #[error("service {0} already registered")]
    DuplicateService(String),
    #[error("call to {0} timed out")]
    Timeout(String),
    /// The handler's error document, unchanged.
    #[error("handler error: {0}")]
    HandlerError(Document),
    #[error("frame codec: {0}")]
    Codec(String),
    #[error("connection closed")]
    Disconnected,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
