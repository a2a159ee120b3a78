//! Live session server for echogrid clients.

pub mod persist;
pub mod protocol;
pub mod session;
pub mod transport;

pub use persist::{persist_log, PersistError};
pub use protocol::{ErrorCode, WireMessage, PROTOCOL};
pub use session::{Phase, Session, SessionConfig, Step};
pub use transport::{router, serve, serve_on, ServerConfig};
