//! Live classification over websockets.
//!
//! Clients open `/session`, send a `start` frame naming the tasks, then
//! stream 0.1 s chunks of 16-bit PCM. Each chunk is answered with per-task
//! posteriors, both instant and averaged over the last ten voiced chunks.
//! `GET /models` lists the loaded models.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{ClientFrame, ErrorCode, ModelInfo, ServerFrame};
pub use server::{router, serve, serve_on, AppState};
pub use session::{ChunkOutcome, ModelRegistry, Session, SessionError, TaskResult, DEFAULT_SILENCE_DBFS, RING_CAPACITY};
