//! Plain-text model files.
//!
//! ```text
//! # voxclass-model 1
//! # any number of comment lines (the training config)
//! task=gender
//! labels=M,F
//! d=2
//! epsilon=1e-6
//! indices=412,801
//! frequencies_hz=184.3...,365.1...
//! spectral=delta=0.1 top_n=10 ...
//! training=3f9c0a1b2c3d4e5f
//! prior.0=0.5
//! mean.0=-2.9...,-3.4...
//! cov.0=...        (row-major, ridge included)
//! ...
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a model
//! read back is bit-identical to the one written.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::gda::{ClassGaussian, ClassModel, GaussianClasses, Task};
use crate::riskopt::FrequencySet;
use crate::spectra::SpectralConfig;
use crate::Scalar;

pub const MODEL_VERSION: u32 = 1;
const MAGIC: &str = "# voxclass-model";

/// A model plus what is needed to trace where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile<T> {
    pub model: ClassModel<T>,
    /// Digest of the training data and settings.
    pub training: String,
    /// Free-form `#` lines, typically the effective config.
    pub comments: Vec<String>,
}

fn join<T: Scalar>(xs: &[T]) -> String {
    xs.iter().map(|v| format!("{:?}", v.as_f64())).collect::<Vec<_>>().join(",")
}

impl<T: Scalar> ModelFile<T> {
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let g = &m.gaussians;
        let mut out = format!("{MAGIC} {MODEL_VERSION}\n");
        for c in &self.comments {
            let _ = writeln!(out, "# {c}");
        }
        let _ = writeln!(out, "task={}", g.task);
        let _ = writeln!(out, "labels={}", g.task.labels().join(","));
        let _ = writeln!(out, "d={}", g.dim());
        let _ = writeln!(out, "epsilon={:?}", g.epsilon);
        let idx: Vec<String> = m.frequencies.indices().iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "indices={}", idx.join(","));
        let hz: Vec<String> = m.frequencies.frequencies_hz().iter().map(|f| format!("{f:?}")).collect();
        let _ = writeln!(out, "frequencies_hz={}", hz.join(","));
        let _ = writeln!(out, "spectral={}", m.spectral);
        let _ = writeln!(out, "training={}", self.training);
        for (i, c) in g.classes.iter().enumerate() {
            let _ = writeln!(out, "prior.{i}={:?}", c.prior.as_f64());
            let _ = writeln!(out, "mean.{i}={}", join(&c.mean));
            let _ = writeln!(out, "cov.{i}={}", join(&c.cov));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::ModelCorrupt(msg);
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| bad(format!("not a model file (first line `{first}`)")))?;
        if version != MODEL_VERSION {
            return Err(bad(format!("model version {version} is not supported")));
        }
        let mut comments = Vec::new();
        let mut fields = std::collections::BTreeMap::new();
        for line in lines {
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("line `{line}` is not key=value")))?;
            if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(bad(format!("key `{k}` given twice")));
            }
        }
        let get = |k: &str| fields.get(k).map(String::as_str).ok_or_else(|| bad(format!("missing `{k}`")));
        let floats = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("`{k}` holds `{s}`"))))
                .collect()
        };

        let task: Task = get("task")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        if get("labels")? != task.labels().join(",") {
            return Err(bad(format!("labels do not match task {task}")));
        }
        let d: usize = get("d")?.parse().map_err(|_| bad("bad `d`".into()))?;
        let epsilon = get("epsilon")?.parse::<f64>().map_err(|_| bad("bad `epsilon`".into()))?;
        let indices = get("indices")?
            .split(',')
            .map(|s| s.trim().parse::<usize>().map_err(|_| bad(format!("bad index `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let hz = floats("frequencies_hz")?;
        let frequencies = FrequencySet::from_parts(indices, hz)?;
        let spectral: SpectralConfig = get("spectral")?.parse().map_err(|e: Error| bad(e.to_string()))?;
        spectral.validate().map_err(|e| bad(e.to_string()))?;
        if frequencies.len() != d || frequencies.indices().iter().any(|&i| i >= spectral.grid.n_points) {
            return Err(bad("frequency list does not fit D or the grid".into()));
        }
        for (&i, &f) in frequencies.indices().iter().zip(frequencies.frequencies_hz()) {
            if spectral.grid.index_of(f) != Some(i) {
                return Err(bad(format!("{f} Hz is not grid point {i}")));
            }
        }
        let mut classes = Vec::with_capacity(task.cardinality());
        for i in 0..task.cardinality() {
            let prior = floats(&format!("prior.{i}"))?;
            let mean = floats(&format!("mean.{i}"))?;
            let cov = floats(&format!("cov.{i}"))?;
            if prior.len() != 1 || mean.len() != d || cov.len() != d * d {
                return Err(bad(format!("class {i} has the wrong shape for D={d}")));
            }
            if cov.iter().chain(&mean).any(|v| !v.is_finite()) {
                return Err(bad(format!("class {i} has non-finite parameters")));
            }
            let cast = |xs: Vec<f64>| xs.into_iter().map(T::of).collect::<Vec<T>>();
            classes.push(ClassGaussian::new(cast(mean), cast(cov), T::of(prior[0]))?);
        }
        let gaussians = GaussianClasses::new(task, epsilon, classes)?;
        Ok(Self {
            model: ClassModel::new(gaussians, frequencies, spectral)?,
            training: get("training")?.to_string(),
            comments,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Reads a model; I/O failures stay I/O errors, everything else is
    /// [`Error::ModelCorrupt`].
    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}
