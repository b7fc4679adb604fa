use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed packet: {0}")]
    MalformedPacket(#[from] PacketError),
    #[error("insufficient observation: no initialized anchors")]
    InsufficientObservation,
    #[error("not found: {0}")]
    NotFound(String),
    #[error("malformed recording: {0}")]
    MalformedRecording(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Stable kebab-case tag used in protocol error bodies and logs.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::MalformedPacket(_) => "malformed-packet",
            Error::InsufficientObservation => "insufficient-observation",
            Error::NotFound(_) => "not-found",
            Error::MalformedRecording(_) => "malformed-recording",
            Error::Io(_) => "io",
        }
    }
}

/// Reasons a sphere-cloud or SH packet failed to decode.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported flags {0:#04x}")]
    UnsupportedFlags(u8),
    #[error("truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("trailing bytes: expected {expected} bytes, got {actual}")]
    TrailingBytes { expected: usize, actual: usize },
    #[error("entry count {entries} exceeds anchor count {anchors}")]
    TooManyEntries { entries: u16, anchors: u16 },
    #[error("anchor index {index} out of range for {anchors} anchors")]
    IndexOutOfRange { index: u16, anchors: u16 },
    #[error("anchor index {index} not strictly ascending (previous {previous})")]
    UnsortedIndex { index: u16, previous: u16 },
    #[error("duplicate anchor index {0}")]
    DuplicateIndex(u16),
    #[error("invalid distance at anchor {0}")]
    InvalidDistance(u16),
    #[error("anchor count {packet} does not match session anchor count {expected}")]
    AnchorCountMismatch { packet: u16, expected: u16 },
    #[error("SH payload must be 108 bytes, got {0}")]
    ShLength(usize),
}
