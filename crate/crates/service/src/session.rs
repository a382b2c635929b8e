use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::Arc;

use voxclass::gda::{self, Posterior, Task};
use voxclass::model_io::ModelFile;
use voxclass::spectra::{self, SpectrumAnalyzer};
use voxclass::Error;

use crate::protocol::{ErrorCode, ModelInfo, ServerFrame};

/// Posteriors averaged per task.
pub const RING_CAPACITY: usize = 10;

/// Default gate: chunks quieter than this RMS level count as silence.
pub const DEFAULT_SILENCE_DBFS: f64 = -60.0;

#[derive(Debug)]
pub struct LoadedModel {
    pub task: Task,
    pub file: ModelFile<f64>,
    pub info: ModelInfo,
}

impl LoadedModel {
    pub fn new(file: ModelFile<f64>) -> Self {
        let m = &file.model;
        let info = ModelInfo {
            task: m.task().to_string(),
            labels: m.task().labels().iter().map(|s| s.to_string()).collect(),
            d: m.dim(),
            frequencies_hz: m.frequencies.frequencies_hz().to_vec(),
            delta: m.spectral.delta,
            min_sample_rate: 2.0 * m.spectral.f_max,
            spectral: m.spectral.to_string(),
            training: file.training.clone(),
        };
        Self { task: m.task(), file, info }
    }
}

/// Models loaded at start-up, at most one per task. Immutable afterwards.
#[derive(Debug, Default)]
pub struct ModelRegistry {
    models: Vec<Arc<LoadedModel>>,
}

impl ModelRegistry {
    pub fn new(files: Vec<ModelFile<f64>>) -> voxclass::Result<Self> {
        let mut models: Vec<Arc<LoadedModel>> = Vec::new();
        for f in files {
            let m = LoadedModel::new(f);
            if models.iter().any(|o| o.task == m.task) {
                return Err(Error::Config(format!("two models for task {}", m.task)));
            }
            models.push(Arc::new(m));
        }
        Ok(Self { models })
    }

    pub fn load(paths: &[impl AsRef<Path>]) -> voxclass::Result<Self> {
        let files = paths
            .iter()
            .map(|p| ModelFile::read(p.as_ref()))
            .collect::<voxclass::Result<Vec<_>>>()?;
        Self::new(files)
    }

    pub fn get(&self, task: &str) -> Option<&Arc<LoadedModel>> {
        self.models.iter().find(|m| m.info.task == task)
    }

    pub fn info(&self) -> Vec<ModelInfo> {
        self.models.iter().map(|m| m.info.clone()).collect()
    }
}

/// A protocol error to report in an `error` frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionError {
    pub code: ErrorCode,
    pub message: String,
}

impl SessionError {
    fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn frame(&self) -> ServerFrame {
        ServerFrame::error(self.code, self.message.clone())
    }
}

struct TaskState {
    model: Arc<LoadedModel>,
    analyzer: Option<SpectrumAnalyzer<f64>>,
    ring: VecDeque<Posterior<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub task: Task,
    pub instant: Posterior<f64>,
    pub averaged: Posterior<f64>,
    pub map_label: &'static str,
    pub ring_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChunkOutcome {
    Posteriors { chunk_index: u64, rms_dbfs: f64, results: Vec<TaskResult> },
    Silence { chunk_index: u64, rms_dbfs: f64 },
}

/// One client's stream. Not shared: all chunks of a session go through one
/// `&mut` in arrival order.
pub struct Session {
    id: String,
    sample_rate: u32,
    chunk_samples: usize,
    silence_dbfs: f64,
    tasks: Vec<TaskState>,
    next_chunk: u64,
}

fn probs(p: &Posterior<f64>) -> BTreeMap<String, f64> {
    p.label_probs().map(|(l, v)| (l.to_string(), v)).collect()
}

impl Session {
    pub fn start(registry: &ModelRegistry, tasks: &[String], sample_rate: u32, silence_dbfs: f64) -> Result<Self, SessionError> {
        if tasks.is_empty() {
            return Err(SessionError::new(ErrorCode::UnknownTask, "no tasks requested"));
        }
        let mut states: Vec<TaskState> = Vec::new();
        for t in tasks {
            let model = registry
                .get(t)
                .ok_or_else(|| SessionError::new(ErrorCode::UnknownTask, format!("no model loaded for task `{t}`")))?;
            if states.iter().any(|s| s.model.task == model.task) {
                return Err(SessionError::new(ErrorCode::UnknownTask, format!("task `{t}` requested twice")));
            }
            states.push(TaskState { model: model.clone(), analyzer: None, ring: VecDeque::with_capacity(RING_CAPACITY) });
        }
        let delta = states[0].model.info.delta;
        if states.iter().any(|s| s.model.info.delta != delta) {
            return Err(SessionError::new(ErrorCode::UnknownTask, "requested models use different chunk lengths"));
        }
        let need = states.iter().map(|s| s.model.info.min_sample_rate).fold(0.0, f64::max);
        if (sample_rate as f64) < need {
            return Err(SessionError::new(
                ErrorCode::BadSampleRate,
                format!("sample rate {sample_rate} Hz is below the {need} Hz the models need"),
            ));
        }
        Ok(Self {
            id: uuid::Uuid::new_v4().simple().to_string(),
            sample_rate,
            chunk_samples: (delta * sample_rate as f64).round() as usize,
            silence_dbfs,
            tasks: states,
            next_chunk: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn chunk_samples(&self) -> usize {
        self.chunk_samples
    }

    pub fn next_chunk(&self) -> u64 {
        self.next_chunk
    }

    pub fn ring_len(&self, task: Task) -> Option<usize> {
        self.tasks.iter().find(|s| s.model.task == task).map(|s| s.ring.len())
    }

    pub fn start_frame(&self) -> ServerFrame {
        ServerFrame::Start {
            session_id: self.id.clone(),
            tasks: self.tasks.iter().map(|s| s.model.info.task.clone()).collect(),
            sample_rate: self.sample_rate,
            chunk_samples: self.chunk_samples,
        }
    }

    /// Checks an announced chunk index against the counter.
    pub fn expect_chunk(&self, index: u64) -> Result<(), SessionError> {
        if index != self.next_chunk {
            return Err(SessionError::new(
                ErrorCode::ChunkIndex,
                format!("announced chunk {index}, expected {}", self.next_chunk),
            ));
        }
        Ok(())
    }

    /// Decodes a binary frame of little-endian i16 samples.
    pub fn ingest_bytes(&mut self, bytes: &[u8]) -> Result<ChunkOutcome, SessionError> {
        if bytes.len() % 2 != 0 {
            return Err(SessionError::new(ErrorCode::ChunkSize, format!("odd byte count {}", bytes.len())));
        }
        let pcm: Vec<i16> = bytes.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]])).collect();
        self.ingest_chunk(&pcm)
    }

    pub fn ingest_chunk(&mut self, pcm: &[i16]) -> Result<ChunkOutcome, SessionError> {
        if pcm.len().abs_diff(self.chunk_samples) > 1 {
            return Err(SessionError::new(
                ErrorCode::ChunkSize,
                format!("chunk of {} samples, expected {} +- 1", pcm.len(), self.chunk_samples),
            ));
        }
        let chunk_index = self.next_chunk;
        self.next_chunk += 1;
        let samples: Vec<f64> = pcm.iter().map(|&s| s as f64 / 32768.0).collect();
        let rms = spectra::rms(&samples);
        let rms_dbfs = if rms > 0.0 { 20.0 * rms.log10() } else { f64::NEG_INFINITY };
        if rms_dbfs < self.silence_dbfs {
            return Ok(ChunkOutcome::Silence { chunk_index, rms_dbfs });
        }

        // Every task is analysed before any ring changes, so a failing chunk
        // leaves the session as it was.
        let rate = self.sample_rate as f64;
        let mut instants = Vec::with_capacity(self.tasks.len());
        for state in &mut self.tasks {
            let cfg = &state.model.file.model.spectral;
            if state.analyzer.as_ref().is_none_or(|a| a.len() != samples.len()) {
                state.analyzer = Some(SpectrumAnalyzer::new(samples.len(), cfg.window, cfg.kind));
            }
            let analyzer = state.analyzer.as_ref().expect("set above");
            let post = spectra::analyze_samples(analyzer, &samples, rate, cfg)
                .and_then(|spec| state.model.file.model.posterior_of(&spec));
            match post {
                Ok(p) => instants.push(p),
                Err(Error::Silence) => return Ok(ChunkOutcome::Silence { chunk_index, rms_dbfs }),
                Err(e) => return Err(SessionError::new(ErrorCode::Analysis, e.to_string())),
            }
        }

        let mut results = Vec::with_capacity(self.tasks.len());
        for (state, instant) in self.tasks.iter_mut().zip(instants) {
            if state.ring.len() == RING_CAPACITY {
                state.ring.pop_front();
            }
            state.ring.push_back(instant.clone());
            let ring: Vec<Posterior<f64>> = state.ring.iter().cloned().collect();
            let averaged = gda::average_posteriors(&ring).expect("ring is non-empty and single-task");
            results.push(TaskResult {
                task: state.model.task,
                map_label: gda::map_class(&averaged).name(),
                instant,
                averaged,
                ring_len: state.ring.len(),
            });
        }
        Ok(ChunkOutcome::Posteriors { chunk_index, rms_dbfs, results })
    }

    /// The frames sent back for one chunk outcome.
    pub fn frames(&self, outcome: &ChunkOutcome) -> Vec<ServerFrame> {
        match outcome {
            ChunkOutcome::Silence { chunk_index, rms_dbfs } => vec![ServerFrame::Silence {
                session_id: self.id.clone(),
                chunk_index: *chunk_index,
                rms_dbfs: finite_db(*rms_dbfs),
            }],
            ChunkOutcome::Posteriors { chunk_index, rms_dbfs, results } => {
                let mut out = vec![ServerFrame::ChunkMeta {
                    session_id: self.id.clone(),
                    chunk_index: *chunk_index,
                    samples: self.chunk_samples,
                    rms_dbfs: finite_db(*rms_dbfs),
                }];
                out.extend(results.iter().map(|r| ServerFrame::Posterior {
                    session_id: self.id.clone(),
                    chunk_index: *chunk_index,
                    task: r.task.to_string(),
                    instant: probs(&r.instant),
                    averaged: probs(&r.averaged),
                    map_label: r.map_label.to_string(),
                    ring_len: r.ring_len,
                }));
                out
            }
        }
    }
}

/// JSON has no infinity; digital silence reports the 16-bit floor.
fn finite_db(db: f64) -> f64 {
    if db.is_finite() {
        db
    } else {
        -20.0 * 32768f64.log10()
    }
}
