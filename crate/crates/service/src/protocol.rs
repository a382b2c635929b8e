//! Wire frames. Text frames are JSON objects tagged by `type`; audio goes in
//! binary frames of little-endian 16-bit PCM. See `docs/protocol.md`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// What a model offers to clients, served by `/models` and `model_info`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub task: String,
    pub labels: Vec<String>,
    pub d: usize,
    pub frequencies_hz: Vec<f64>,
    /// Chunk length in seconds.
    pub delta: f64,
    /// Lowest sample rate whose Nyquist frequency covers the spectrum.
    pub min_sample_rate: f64,
    pub spectral: String,
    pub training: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientFrame {
    Start { tasks: Vec<String>, sample_rate: u32 },
    /// Optional announcement of the next chunk's index; it must match the
    /// server's counter.
    ChunkMeta { chunk_index: u64 },
    ModelInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Start {
        session_id: String,
        tasks: Vec<String>,
        sample_rate: u32,
        chunk_samples: usize,
    },
    ChunkMeta {
        session_id: String,
        chunk_index: u64,
        samples: usize,
        rms_dbfs: f64,
    },
    Posterior {
        session_id: String,
        chunk_index: u64,
        task: String,
        instant: BTreeMap<String, f64>,
        averaged: BTreeMap<String, f64>,
        map_label: String,
        ring_len: usize,
    },
    Silence {
        session_id: String,
        chunk_index: u64,
        rms_dbfs: f64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
    ModelInfo {
        models: Vec<ModelInfo>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    /// Text frame that is not a valid client frame.
    BadFrame,
    UnknownTask,
    BadSampleRate,
    NotStarted,
    AlreadyStarted,
    ChunkSize,
    ChunkIndex,
    /// The pipeline failed on an accepted chunk.
    Analysis,
}

impl ServerFrame {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        ServerFrame::Error { code, message: message.into() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames always serialize")
    }
}
