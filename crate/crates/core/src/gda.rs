//! Gaussian discriminant analysis over a few spectral probe values.
//!
//! Every class gets a full-covariance Gaussian; posteriors follow from Bayes'
//! rule with equal priors and are computed entirely in the log domain, since
//! densities of spectral features leave the floating point range quickly.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg;
use crate::riskopt::FrequencySet;
use crate::spectra::{FeatureScale, LogSpectrum, SpectralConfig};
use crate::Scalar;

/// Relative covariance ridge used when none is given.
pub const DEFAULT_EPSILON: f64 = 1e-6;

const SCALE_LABELS: [&str; 8] = ["do", "re", "mi", "fa", "so", "la", "ti", "do'"];
const GENDER_LABELS: [&str; 2] = ["M", "F"];
const CHORAL_LABELS: [&str; 2] = ["S", "N"];
const JOINT_LABELS: [&str; 4] = ["M-S", "M-N", "F-S", "F-N"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Scale,
    Gender,
    Choral,
    /// Gender and choral status as one four-way label.
    Joint,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Scale, Task::Gender, Task::Choral, Task::Joint];

    pub fn labels(self) -> &'static [&'static str] {
        match self {
            Task::Scale => &SCALE_LABELS,
            Task::Gender => &GENDER_LABELS,
            Task::Choral => &CHORAL_LABELS,
            Task::Joint => &JOINT_LABELS,
        }
    }

    pub fn cardinality(self) -> usize {
        self.labels().len()
    }

    pub fn label(self, value: usize) -> Result<ClassLabel> {
        ClassLabel::new(self, value)
    }

    pub fn label_named(self, name: &str) -> Result<ClassLabel> {
        let value = self
            .labels()
            .iter()
            .position(|&l| l == name)
            .ok_or_else(|| Error::Parse(format!("`{name}` is not a {self} label")))?;
        Ok(ClassLabel { task: self, value })
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Scale => "scale",
            Task::Gender => "gender",
            Task::Choral => "choral",
            Task::Joint => "joint",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scale" => Ok(Task::Scale),
            "gender" => Ok(Task::Gender),
            "choral" => Ok(Task::Choral),
            "joint" => Ok(Task::Joint),
            other => Err(Error::Parse(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassLabel {
    pub task: Task,
    pub value: usize,
}

impl ClassLabel {
    pub fn new(task: Task, value: usize) -> Result<Self> {
        if value >= task.cardinality() {
            return Err(Error::Range(format!("label {value} for {task}")));
        }
        Ok(Self { task, value })
    }

    pub fn name(&self) -> &'static str {
        self.task.labels()[self.value]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T>(pub Vec<T>);

impl<T> FeatureVector<T> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Reads the log intensities at the probe frequencies. Probes are grid
/// points by construction, so this is a lookup.
pub fn extract_features<T: Scalar>(
    spec: &LogSpectrum<T>,
    freqs: &FrequencySet,
    scale: FeatureScale,
) -> Result<FeatureVector<T>> {
    let mut values = Vec::with_capacity(freqs.len());
    for (&idx, &hz) in freqs.indices().iter().zip(freqs.frequencies_hz()) {
        if idx >= spec.n_points() || spec.grid.index_of(hz) != Some(idx) {
            return Err(Error::Grid(format!("{hz} Hz (index {idx}) is not a point of the spectrum grid")));
        }
        let v = spec.log_intensities[idx];
        values.push(match scale {
            FeatureScale::Log => v,
            FeatureScale::Raw => T::of(10.0).powf(v),
        });
    }
    Ok(FeatureVector(values))
}

/// Mean, covariance and prior of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGaussian<T> {
    pub mean: Vec<T>,
    /// Row-major, ridge included.
    pub cov: Vec<T>,
    pub prior: T,
    chol: Vec<T>,
    half_log_det: T,
}

impl<T: Scalar> ClassGaussian<T> {
    pub fn new(mean: Vec<T>, cov: Vec<T>, prior: T) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::ModelCorrupt(format!("covariance has {} entries for D={d}", cov.len())));
        }
        let chol = linalg::cholesky(&cov, d)
            .ok_or_else(|| Error::ModelCorrupt("covariance is not positive definite".into()))?;
        let half_log_det = linalg::half_log_det(&chol, d);
        Ok(Self { mean, cov, prior, chol, half_log_det })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky(&self) -> &[T] {
        &self.chol
    }

    pub fn log_density(&self, x: &[T]) -> T {
        let d = self.dim();
        let mut scratch = vec![T::zero(); d];
        self.log_density_with(x, &mut scratch)
    }

    #[inline]
    pub(crate) fn log_density_with(&self, x: &[T], scratch: &mut [T]) -> T {
        let d = self.dim();
        let q = linalg::mahalanobis_sq(&self.chol, d, x, &self.mean, scratch);
        T::of(-0.5) * q - self.half_log_det - T::of(0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln())
    }
}

/// Ridge added to a class covariance: `epsilon` times its mean diagonal, or
/// `epsilon` itself when the diagonal vanishes.
pub fn ridge<T: Scalar>(cov: &[T], d: usize, epsilon: f64) -> T {
    let mean_diag = (0..d).map(|i| cov[i * d + i]).sum::<T>() / T::of(d as f64);
    if mean_diag > T::zero() {
        mean_diag * T::of(epsilon)
    } else {
        T::of(epsilon)
    }
}

/// The fitted class-conditional Gaussians of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClasses<T> {
    pub task: Task,
    pub epsilon: f64,
    pub classes: Vec<ClassGaussian<T>>,
}

impl<T: Scalar> GaussianClasses<T> {
    pub fn new(task: Task, epsilon: f64, classes: Vec<ClassGaussian<T>>) -> Result<Self> {
        if classes.len() != task.cardinality() {
            return Err(Error::ModelCorrupt(format!(
                "{} classes for task {task} with {} labels",
                classes.len(),
                task.cardinality()
            )));
        }
        let d = classes[0].dim();
        if classes.iter().any(|c| c.dim() != d) {
            return Err(Error::ModelCorrupt("classes disagree on dimension".into()));
        }
        let total: f64 = classes.iter().map(|c| c.prior.as_f64()).sum();
        if (total - 1.0).abs() > 1e-9 || classes.iter().any(|c| !(c.prior.as_f64() > 0.0)) {
            return Err(Error::ModelCorrupt(format!("priors sum to {total}")));
        }
        Ok(Self { task, epsilon, classes })
    }

    pub fn dim(&self) -> usize {
        self.classes[0].dim()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn check_dim(&self, x: &FeatureVector<T>) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::Range(format!("feature dimension {} for a D={} model", x.dim(), self.dim())));
        }
        Ok(())
    }

    pub fn log_density(&self, x: &FeatureVector<T>, c: ClassLabel) -> Result<T> {
        self.check_dim(x)?;
        if c.task != self.task || c.value >= self.n_classes() {
            return Err(Error::Range(format!("label {c:?} for a {} model", self.task)));
        }
        Ok(self.classes[c.value].log_density(&x.0))
    }

    /// `P(x | c)`.
    pub fn class_conditional_density(&self, x: &FeatureVector<T>, c: ClassLabel) -> Result<T> {
        Ok(self.log_density(x, c)?.exp())
    }

    /// `P(c | x)` by Bayes' rule with log-sum-exp normalization.
    pub fn posterior(&self, x: &FeatureVector<T>) -> Result<Posterior<T>> {
        self.check_dim(x)?;
        let mut scratch = vec![T::zero(); self.dim()];
        let mut logs: Vec<T> = self
            .classes
            .iter()
            .map(|c| c.prior.ln() + c.log_density_with(&x.0, &mut scratch))
            .collect();
        normalize_logs(&mut logs);
        Ok(Posterior { task: self.task, probs: logs })
    }
}

/// Turns unnormalized log weights into probabilities in place.
pub(crate) fn normalize_logs<T: Scalar>(logs: &mut [T]) {
    let max = logs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in logs.iter_mut() {
        *v = (*v - max).exp();
        total = total + *v;
    }
    for v in logs.iter_mut() {
        *v = *v / total;
    }
}

/// Fits one Gaussian per class: sample mean, maximum-likelihood covariance
/// plus ridge, equal priors. Every label of the task needs two samples.
pub fn fit<T: Scalar>(samples: &[(FeatureVector<T>, ClassLabel)], epsilon: f64) -> Result<GaussianClasses<T>> {
    let (first, _) = samples
        .first()
        .ok_or_else(|| Error::InsufficientData("no training samples".into()))?;
    let task = samples[0].1.task;
    let d = first.dim();
    if d == 0 {
        return Err(Error::InsufficientData("zero-dimensional features".into()));
    }
    let c_count = task.cardinality();
    let mut sums = vec![vec![T::zero(); d]; c_count];
    let mut counts = vec![0usize; c_count];
    for (x, label) in samples {
        if label.task != task {
            return Err(Error::InsufficientData("samples mix tasks".into()));
        }
        if x.dim() != d {
            return Err(Error::InsufficientData("samples mix dimensions".into()));
        }
        counts[label.value] += 1;
        for (s, &v) in sums[label.value].iter_mut().zip(&x.0) {
            *s = *s + v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::InsufficientData(format!(
            "class {} has {} samples, need at least 2",
            task.labels()[c],
            counts[c]
        )));
    }
    let means: Vec<Vec<T>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &n)| s.iter().map(|&v| v / T::of(n as f64)).collect())
        .collect();
    let mut covs = vec![vec![T::zero(); d * d]; c_count];
    for (x, label) in samples {
        let mu = &means[label.value];
        let cov = &mut covs[label.value];
        for i in 0..d {
            let di = x.0[i] - mu[i];
            for j in 0..=i {
                cov[i * d + j] = cov[i * d + j] + di * (x.0[j] - mu[j]);
            }
        }
    }
    let prior = T::one() / T::of(c_count as f64);
    let classes = covs
        .into_iter()
        .zip(means)
        .zip(&counts)
        .map(|((mut cov, mean), &n)| {
            let n = T::of(n as f64);
            for i in 0..d {
                for j in 0..=i {
                    let v = cov[i * d + j] / n;
                    cov[i * d + j] = v;
                    cov[j * d + i] = v;
                }
            }
            let r = ridge(&cov, d, epsilon);
            for i in 0..d {
                cov[i * d + i] = cov[i * d + i] + r;
            }
            ClassGaussian::new(mean, cov, prior)
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianClasses::new(task, epsilon, classes)
}

/// A fitted classifier together with the probes and the spectral pipeline
/// its features come from.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel<T> {
    pub gaussians: GaussianClasses<T>,
    pub frequencies: FrequencySet,
    pub spectral: SpectralConfig,
}

impl<T: Scalar> ClassModel<T> {
    pub fn new(gaussians: GaussianClasses<T>, frequencies: FrequencySet, spectral: SpectralConfig) -> Result<Self> {
        if gaussians.dim() != frequencies.len() {
            return Err(Error::ModelCorrupt(format!(
                "D={} model with {} frequencies",
                gaussians.dim(),
                frequencies.len()
            )));
        }
        Ok(Self { gaussians, frequencies, spectral })
    }

    /// Extracts features from labelled spectra and fits.
    pub fn fit_spectra(
        train: &[(&LogSpectrum<T>, ClassLabel)],
        frequencies: FrequencySet,
        spectral: SpectralConfig,
        epsilon: f64,
    ) -> Result<Self> {
        let samples = train
            .iter()
            .map(|(s, l)| Ok((extract_features(s, &frequencies, spectral.features)?, *l)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(fit(&samples, epsilon)?, frequencies, spectral)
    }

    pub fn task(&self) -> Task {
        self.gaussians.task
    }

    pub fn dim(&self) -> usize {
        self.gaussians.dim()
    }

    pub fn posterior(&self, x: &FeatureVector<T>) -> Result<Posterior<T>> {
        self.gaussians.posterior(x)
    }

    pub fn posterior_of(&self, spec: &LogSpectrum<T>) -> Result<Posterior<T>> {
        let x = extract_features(spec, &self.frequencies, self.spectral.features)?;
        self.gaussians.posterior(&x)
    }

    /// Averaged posterior over a take's pieces.
    pub fn classify(&self, specs: &[LogSpectrum<T>]) -> Result<Posterior<T>> {
        let posts = specs.iter().map(|s| self.posterior_of(s)).collect::<Result<Vec<_>>>()?;
        average_posteriors(&posts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    pub task: Task,
    pub probs: Vec<T>,
}

impl<T: Scalar> Posterior<T> {
    pub fn label_probs(&self) -> impl Iterator<Item = (&'static str, T)> + '_ {
        self.task.labels().iter().copied().zip(self.probs.iter().copied())
    }
}

/// Element-wise arithmetic mean.
pub fn average_posteriors<T: Scalar>(posteriors: &[Posterior<T>]) -> Result<Posterior<T>> {
    let first = posteriors
        .first()
        .ok_or_else(|| Error::InsufficientData("no posteriors to average".into()))?;
    let c = first.probs.len();
    if posteriors.iter().any(|p| p.task != first.task || p.probs.len() != c) {
        return Err(Error::InsufficientData("posteriors disagree on task".into()));
    }
    let n = T::of(posteriors.len() as f64);
    let probs = (0..c)
        .map(|k| posteriors.iter().map(|p| p.probs[k]).sum::<T>() / n)
        .collect();
    Ok(Posterior { task: first.task, probs })
}

/// Arg-max of the posterior; ties go to the lowest class index.
pub fn map_class<T: Scalar>(post: &Posterior<T>) -> ClassLabel {
    let mut best = 0;
    for (i, &p) in post.probs.iter().enumerate() {
        if p > post.probs[best] {
            best = i;
        }
    }
    ClassLabel { task: post.task, value: best }
}
