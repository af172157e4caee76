//! Library backing the `hsbnn` binary: run configuration, experiment
//! orchestration, and artifact emission. The binary in `main.rs` is a thin
//! argument-parsing shell over these modules so integration tests can drive
//! the same code paths directly.

pub mod bench;
pub mod check;
pub mod config;
pub mod fetch;
pub mod recover;
pub mod relevance_cmd;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors split by exit code: usage/config problems exit 2, runtime
/// failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl From<hsbnn_core::Error> for CliError {
    fn from(e: hsbnn_core::Error) -> Self {
        use hsbnn_core::Error as E;
        match e {
            E::Domain(_) | E::Schema(_) | E::UnsupportedModel(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Derives a per-component RNG seed from the run seed and a label, so folds
/// and models get independent, reproducible streams.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, mixed with the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15)
}
