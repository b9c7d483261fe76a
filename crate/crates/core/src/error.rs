use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite coordinate ({0}, {1}, {2})")]
    NonFinite(f32, f32, f32),
    #[error("inverted box on axis {axis}: min {min} > max {max}")]
    InvertedBox { axis: usize, min: f32, max: f32 },
    #[error("empty scene")]
    EmptyScene,
    #[error("too many objects: {0} (at most 2^32 - 1 supported)")]
    TooManyObjects(usize),
    #[error("value {0} does not fit in 10 bits")]
    GridOutOfRange(u32),
    #[error("traversal stack exhausted")]
    StackExhausted,
    #[error("invalid radius {0}")]
    InvalidRadius(f32),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("buffer size must be at least 1")]
    ZeroBufferSize,
}
