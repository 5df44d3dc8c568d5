use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An enumeration would exceed its fixed size cap.
    #[error("size error: {what} is {got}, limit is {limit}")]
    Size {
        what: &'static str,
        got: u64,
        limit: u64,
    },

    /// A memory or big-integer budget would be exceeded.
    #[error("resource error: {what} needs {needed}, limit {limit_name} is {limit}")]
    Resource {
        what: String,
        needed: u64,
        limit_name: &'static str,
        limit: u64,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
