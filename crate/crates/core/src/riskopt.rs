//! Probe-frequency selection by Bayes-risk minimisation.
//!
//! The theoretical performance `1 - R` of the MAP rule under a fitted model
//! is estimated by Monte Carlo: draw points from every class-conditional
//! Gaussian, classify them with the same model, and count how often the
//! generating class wins. The selector then moves one probe at a time over
//! the log-frequency grid, keeping the position with the smallest risk, and
//! repeats full passes until the risk stops improving.
//!
//! Candidate models are not refit from scratch. Per-class means, variances
//! and centred columns for every grid point are computed once; a candidate
//! swap only needs its cross products with the `D - 1` fixed probes.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gda::{self, ClassGaussian, ClassLabel, GaussianClasses, Task};
use crate::spectra::{FeatureScale, LogGrid, LogSpectrum};
use crate::{seed, Scalar};

/// Distinct probe positions on a log grid, kept sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySet {
    indices: Vec<usize>,
    frequencies_hz: Vec<f64>,
}

impl FrequencySet {
    pub fn from_indices(indices: &[usize], grid: &LogGrid) -> Result<Self> {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Range(format!("duplicate probe in {indices:?}")));
        }
        if let Some(&i) = sorted.iter().find(|&&i| i >= grid.n_points) {
            return Err(Error::Range(format!("probe {i} outside a {}-point grid", grid.n_points)));
        }
        let frequencies_hz = sorted.iter().map(|&i| grid.frequency_hz(i)).collect();
        Ok(Self { indices: sorted, frequencies_hz })
    }

    /// Rebuilds a set from stored indices and frequencies, e.g. a model file.
    pub fn from_parts(indices: Vec<usize>, frequencies_hz: Vec<f64>) -> Result<Self> {
        if indices.len() != frequencies_hz.len() || indices.is_empty() {
            return Err(Error::ModelCorrupt("frequency list and index list differ".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::ModelCorrupt("probe indices must be strictly increasing".into()));
        }
        Ok(Self { indices, frequencies_hz })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn frequencies_hz(&self) -> &[f64] {
        &self.frequencies_hz
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Risk of the MAP rule under a model, `risk = 1 - performance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub risk: f64,
    pub performance: f64,
    /// `1 - E[max_c P(c|x)]` over the same draws; a smooth tie-breaker.
    pub soft_risk: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

impl RiskEstimate {
    fn from_score(score: Score, mc_samples: usize, seed: u64) -> Self {
        Self {
            risk: score.risk,
            performance: 1.0 - score.risk,
            soft_risk: score.soft_risk,
            mc_samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    risk: f64,
    soft_risk: f64,
}

impl Score {
    const WORST: Score = Score { risk: f64::INFINITY, soft_risk: f64::INFINITY };

    fn cmp(&self, other: &Score) -> Ordering {
        self.risk
            .total_cmp(&other.risk)
            .then(self.soft_risk.total_cmp(&other.soft_risk))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskMode {
    /// Sample from the fitted class-conditionals.
    MonteCarlo,
    /// Classify the training features themselves.
    Empirical,
}

impl fmt::Display for RiskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RiskMode::MonteCarlo => "monte-carlo",
            RiskMode::Empirical => "empirical",
        })
    }
}

impl FromStr for RiskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monte-carlo" | "mc" => Ok(RiskMode::MonteCarlo),
            "empirical" => Ok(RiskMode::Empirical),
            other => Err(Error::Parse(format!("unknown risk mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectConfig {
    pub d: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Stop once a full pass improves the risk by less than this.
    pub tol: f64,
    pub max_passes: usize,
    /// Starting points tried; the first is equally spaced, the rest random.
    pub restarts: usize,
    /// Coarse scan stride; 1 scans every grid point.
    pub stride: usize,
    pub mode: RiskMode,
    pub epsilon: f64,
    pub features: FeatureScale,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            d: 4,
            mc_samples: 4000,
            seed: 0,
            tol: 1e-4,
            max_passes: 10,
            restarts: 3,
            stride: 1,
            mode: RiskMode::MonteCarlo,
            epsilon: gda::DEFAULT_EPSILON,
            features: FeatureScale::Log,
        }
    }
}

impl fmt::Display for SelectConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "d={} mc_samples={} seed={} tol={:?} max_passes={} restarts={} stride={} risk={} epsilon={:?} features={}",
            self.d,
            self.mc_samples,
            self.seed,
            self.tol,
            self.max_passes,
            self.restarts,
            self.stride,
            self.mode,
            self.epsilon,
            self.features
        )
    }
}

/// Result of [`select_frequencies`].
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub frequencies: FrequencySet,
    pub risk: RiskEstimate,
    /// Risk of the equally spaced starting set under the same draws.
    pub initial_risk: RiskEstimate,
    /// Risk after each completed pass of the winning restart.
    pub pass_risks: Vec<f64>,
    /// For each probe, in the order of `frequencies`, the risk right after
    /// it was last moved.
    pub probe_risks: Vec<f64>,
}

impl Selection {
    /// Writes `rank,frequency_hz,risk_after`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rank,frequency_hz,risk_after")?;
        for (i, (hz, r)) in self.frequencies.frequencies_hz().iter().zip(&self.probe_risks).enumerate() {
            writeln!(w, "{},{hz:?},{r:?}", i + 1)?;
        }
        Ok(())
    }
}

/// Standard normal draws laid out `[class][sample][dim]`.
fn normal_draws<T: Scalar>(seed: u64, classes: usize, per_class: usize, d: usize) -> Vec<T> {
    let mut rng = seed::rng(seed);
    (0..classes * per_class * d)
        .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

/// Monte Carlo score of `classes` over pre-drawn standard normals.
fn mc_score<T: Scalar>(classes: &[ClassGaussian<T>], draws: &[T], per_class: usize) -> Score {
    let c_n = classes.len();
    let d = classes[0].dim();
    let log_priors: Vec<T> = classes.iter().map(|c| c.prior.ln()).collect();
    let half_log_dets: Vec<T> = classes
        .iter()
        .map(|c| (0..d).map(|i| c.cholesky()[i * d + i].ln()).sum())
        .collect();
    let mut x = vec![T::zero(); d];
    let mut scratch = vec![T::zero(); d];
    let mut logw = vec![T::zero(); c_n];
    let (mut perf, mut soft) = (0.0, 0.0);
    for (c, class) in classes.iter().enumerate() {
        let l = class.cholesky();
        let (mut correct, mut max_post_sum) = (0usize, 0.0);
        for s in 0..per_class {
            let z = &draws[(c * per_class + s) * d..][..d];
            let mut zz = T::zero();
            for i in 0..d {
                let mut v = class.mean[i];
                for j in 0..=i {
                    v = v + l[i * d + j] * z[j];
                }
                x[i] = v;
                zz = zz + z[i] * z[i];
            }
            for (k, other) in classes.iter().enumerate() {
                let q = if k == c {
                    zz
                } else {
                    crate::linalg::mahalanobis_sq(other.cholesky(), d, &x, &other.mean, &mut scratch)
                };
                logw[k] = log_priors[k] - T::of(0.5) * q - half_log_dets[k];
            }
            let (winner, max_post) = argmax_and_max_posterior(&logw);
            if winner == c {
                correct += 1;
            }
            max_post_sum += max_post;
        }
        let prior = class.prior.as_f64();
        perf += prior * correct as f64 / per_class as f64;
        soft += prior * max_post_sum / per_class as f64;
    }
    Score { risk: 1.0 - perf, soft_risk: 1.0 - soft }
}

/// Index of the largest log weight (lowest index on ties) and its
/// normalized probability.
#[inline]
fn argmax_and_max_posterior<T: Scalar>(logw: &[T]) -> (usize, f64) {
    let mut best = 0;
    for k in 1..logw.len() {
        if logw[k] > logw[best] {
            best = k;
        }
    }
    let top = logw[best];
    let total: T = logw.iter().map(|&v| (v - top).exp()).sum();
    (best, (T::one() / total).as_f64())
}

/// Monte Carlo estimate of the model's Bayes risk: `mc_samples / C` draws
/// from every class, each classified by the MAP rule; the performance is the
/// prior-weighted fraction assigned to its generating class.
pub fn estimate_bayes_risk<T: Scalar>(model: &GaussianClasses<T>, mc_samples: usize, seed: u64) -> RiskEstimate {
    let c = model.n_classes();
    let per_class = (mc_samples / c).max(1);
    let draws = normal_draws::<T>(seed, c, per_class, model.dim());
    let score = mc_score(&model.classes, &draws, per_class);
    RiskEstimate::from_score(score, per_class * c, seed)
}

/// Risk of the MAP rule on labelled feature vectors (training data).
pub fn empirical_risk<T: Scalar>(model: &GaussianClasses<T>, samples: &[(gda::FeatureVector<T>, ClassLabel)]) -> Result<RiskEstimate> {
    let c_n = model.n_classes();
    let mut correct = vec![0usize; c_n];
    let mut counts = vec![0usize; c_n];
    let mut soft = vec![0.0; c_n];
    for (x, label) in samples {
        let post = model.posterior(x)?;
        let winner = gda::map_class(&post);
        counts[label.value] += 1;
        if winner.value == label.value {
            correct[label.value] += 1;
        }
        soft[label.value] += post.probs[winner.value].as_f64();
    }
    let (mut perf, mut soft_perf) = (0.0, 0.0);
    for c in 0..c_n {
        if counts[c] > 0 {
            let prior = model.classes[c].prior.as_f64();
            perf += prior * correct[c] as f64 / counts[c] as f64;
            soft_perf += prior * soft[c] / counts[c] as f64;
        }
    }
    Ok(RiskEstimate::from_score(Score { risk: 1.0 - perf, soft_risk: 1.0 - soft_perf }, samples.len(), 0))
}

/// `d` distinct grid points drawn uniformly without replacement.
pub fn random_frequencies(d: usize, seed: u64, grid: &LogGrid) -> Result<FrequencySet> {
    if d == 0 || d > grid.n_points {
        return Err(Error::Range(format!("cannot draw {d} of {} grid points", grid.n_points)));
    }
    let mut rng = seed::rng(seed);
    let picked = index::sample(&mut rng, grid.n_points, d).into_vec();
    FrequencySet::from_indices(&picked, grid)
}

/// `d` grid points at the centres of `d` equal slices of the grid.
pub fn equally_spaced(d: usize, grid: &LogGrid) -> Result<FrequencySet> {
    if d == 0 || d > grid.n_points {
        return Err(Error::Range(format!("cannot place {d} probes on {} grid points", grid.n_points)));
    }
    let g = grid.n_points;
    let picked: Vec<usize> = (0..d).map(|k| ((2 * k + 1) * g) / (2 * d)).collect();
    FrequencySet::from_indices(&picked, grid)
}

/// Training spectra of one class, one column per grid point.
struct ClassColumns<T> {
    n: usize,
    mean: Vec<T>,
    /// `centered[g * n + s]` is sample `s` at grid point `g` minus the mean.
    centered: Vec<T>,
}

impl<T: Scalar> ClassColumns<T> {
    fn column(&self, g: usize) -> &[T] {
        &self.centered[g * self.n..(g + 1) * self.n]
    }

    fn cov(&self, a: usize, b: usize) -> T {
        let (ca, cb) = (self.column(a), self.column(b));
        let mut sum = T::zero();
        for (&x, &y) in ca.iter().zip(cb) {
            sum = sum + x * y;
        }
        sum / T::of(self.n as f64)
    }
}

/// The selection problem: training columns plus the fixed random draws.
struct Problem<T> {
    task: Task,
    grid: LogGrid,
    classes: Vec<ClassColumns<T>>,
    prior: T,
    epsilon: f64,
    mode: RiskMode,
    per_class: usize,
    draws: Vec<T>,
    seed: u64,
}

impl<T: Scalar> Problem<T> {
    fn new(train: &[(&LogSpectrum<T>, ClassLabel)], cfg: &SelectConfig) -> Result<Self> {
        let (first, label) = train
            .first()
            .ok_or_else(|| Error::InsufficientData("no training spectra".into()))?;
        let task = label.task;
        let grid = first.grid;
        let g = grid.n_points;
        let c_n = task.cardinality();
        let mut counts = vec![0usize; c_n];
        for (spec, l) in train {
            if l.task != task {
                return Err(Error::InsufficientData("training labels mix tasks".into()));
            }
            if spec.grid != grid || spec.n_points() != g {
                return Err(Error::Grid("training spectra use different grids".into()));
            }
            counts[l.value] += 1;
        }
        let present = counts.iter().filter(|&&n| n > 0).count();
        if present < 2 {
            return Err(Error::InsufficientData(format!("{present} class present, need at least 2")));
        }
        if let Some(c) = counts.iter().position(|&n| n < 2) {
            return Err(Error::InsufficientData(format!(
                "class {} has {} training spectra",
                task.labels()[c],
                counts[c]
            )));
        }
        let min_count = *counts.iter().min().unwrap();
        if cfg.d == 0 || cfg.d >= min_count || cfg.d > g {
            return Err(Error::InsufficientData(format!(
                "D={} needs 1 <= D < {min_count} (smallest class) and D <= {g}",
                cfg.d
            )));
        }
        if cfg.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be at least 1".into()));
        }

        let mut classes: Vec<ClassColumns<T>> = counts
            .iter()
            .map(|&n| ClassColumns { n, mean: vec![T::zero(); g], centered: vec![T::zero(); g * n] })
            .collect();
        let mut filled = vec![0usize; c_n];
        for (spec, l) in train {
            let cls = &mut classes[l.value];
            let s = filled[l.value];
            for (gi, &v) in spec.log_intensities.iter().enumerate() {
                let v = match cfg.features {
                    FeatureScale::Log => v,
                    FeatureScale::Raw => T::of(10.0).powf(v),
                };
                cls.centered[gi * cls.n + s] = v;
            }
            filled[l.value] += 1;
        }
        for cls in &mut classes {
            let n = T::of(cls.n as f64);
            for gi in 0..g {
                let col = &mut cls.centered[gi * cls.n..(gi + 1) * cls.n];
                let mean = col.iter().copied().sum::<T>() / n;
                for v in col.iter_mut() {
                    *v = *v - mean;
                }
                cls.mean[gi] = mean;
            }
        }
        let per_class = (cfg.mc_samples / c_n).max(1);
        let draws = match cfg.mode {
            RiskMode::MonteCarlo => normal_draws(cfg.seed, c_n, per_class, cfg.d),
            RiskMode::Empirical => Vec::new(),
        };
        Ok(Self {
            task,
            grid,
            classes,
            prior: T::one() / T::of(c_n as f64),
            epsilon: cfg.epsilon,
            mode: cfg.mode,
            per_class,
            draws,
            seed: cfg.seed,
        })
    }

    fn estimate(&self, score: Score) -> RiskEstimate {
        let n = match self.mode {
            RiskMode::MonteCarlo => self.per_class * self.classes.len(),
            RiskMode::Empirical => self.classes.iter().map(|c| c.n).sum(),
        };
        RiskEstimate::from_score(score, n, self.seed)
    }

    /// Scores the probe set `set` given each class's covariance among those
    /// probes (no ridge yet). A failed factorization scores worst.
    fn score(&self, set: &[usize], covs: Vec<Vec<T>>) -> Score {
        let d = set.len();
        let mut gaussians = Vec::with_capacity(self.classes.len());
        for (cls, mut cov) in self.classes.iter().zip(covs) {
            let r = gda::ridge(&cov, d, self.epsilon);
            for i in 0..d {
                cov[i * d + i] = cov[i * d + i] + r;
            }
            let mean = set.iter().map(|&g| cls.mean[g]).collect();
            match ClassGaussian::new(mean, cov, self.prior) {
                Ok(g) => gaussians.push(g),
                Err(_) => return Score::WORST,
            }
        }
        match self.mode {
            RiskMode::MonteCarlo => mc_score(&gaussians, &self.draws, self.per_class),
            RiskMode::Empirical => self.empirical_score(set, &gaussians),
        }
    }

    fn empirical_score(&self, set: &[usize], gaussians: &[ClassGaussian<T>]) -> Score {
        let d = set.len();
        let mut x = vec![T::zero(); d];
        let mut scratch = vec![T::zero(); d];
        let mut logw = vec![T::zero(); gaussians.len()];
        let log_prior = self.prior.ln();
        let (mut perf, mut soft) = (0.0, 0.0);
        for (c, cls) in self.classes.iter().enumerate() {
            let (mut correct, mut max_post_sum) = (0usize, 0.0);
            for s in 0..cls.n {
                for (k, &g) in set.iter().enumerate() {
                    x[k] = cls.centered[g * cls.n + s] + cls.mean[g];
                }
                for (k, gk) in gaussians.iter().enumerate() {
                    logw[k] = log_prior + gk.log_density_with(&x, &mut scratch);
                }
                let (winner, max_post) = argmax_and_max_posterior(&logw);
                if winner == c {
                    correct += 1;
                }
                max_post_sum += max_post;
            }
            let prior = self.prior.as_f64();
            perf += prior * correct as f64 / cls.n as f64;
            soft += prior * max_post_sum / cls.n as f64;
        }
        Score { risk: 1.0 - perf, soft_risk: 1.0 - soft }
    }

    fn full_covs(&self, set: &[usize]) -> Vec<Vec<T>> {
        let d = set.len();
        self.classes
            .iter()
            .map(|cls| {
                let mut cov = vec![T::zero(); d * d];
                for i in 0..d {
                    for j in 0..=i {
                        let v = cls.cov(set[i], set[j]);
                        cov[i * d + j] = v;
                        cov[j * d + i] = v;
                    }
                }
                cov
            })
            .collect()
    }

    fn score_set(&self, set: &[usize]) -> Score {
        self.score(set, self.full_covs(set))
    }

    /// Best position for probe `slot` among `candidates`, the others fixed.
    fn best_for_slot(&self, set: &[usize], slot: usize, candidates: &[usize]) -> (usize, Score) {
        let d = set.len();
        let base = self.full_covs(set);
        let results: Vec<(usize, Score)> = candidates
            .par_iter()
            .map(|&g| {
                let mut trial = set.to_vec();
                trial[slot] = g;
                let covs = self
                    .classes
                    .iter()
                    .zip(&base)
                    .map(|(cls, b)| {
                        let mut cov = b.clone();
                        for (k, &other) in trial.iter().enumerate() {
                            let v = if k == slot { cls.cov(g, g) } else { cls.cov(g, other) };
                            cov[slot * d + k] = v;
                            cov[k * d + slot] = v;
                        }
                        cov
                    })
                    .collect();
                (g, self.score(&trial, covs))
            })
            .collect();
        results
            .into_iter()
            .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least the current position is a candidate")
    }

    fn candidates(&self, set: &[usize], slot: usize, stride: usize, around: Option<usize>) -> Vec<usize> {
        let g = self.grid.n_points;
        let occupied = |i: usize| set.iter().enumerate().any(|(k, &s)| k != slot && s == i);
        let range: Box<dyn Iterator<Item = usize>> = match around {
            None => Box::new((0..g).step_by(stride.max(1)).chain(std::iter::once(set[slot]))),
            Some(c) => Box::new(c.saturating_sub(stride - 1)..(c + stride).min(g)),
        };
        let mut out: Vec<usize> = range.filter(|&i| !occupied(i)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn move_slot(&self, set: &mut [usize], slot: usize, stride: usize) -> Score {
        let coarse = self.candidates(set, slot, stride, None);
        let (mut best, mut score) = self.best_for_slot(set, slot, &coarse);
        if stride > 1 {
            let fine = self.candidates(set, slot, stride, Some(best));
            let (b, s) = self.best_for_slot(set, slot, &fine);
            if s.cmp(&score).then(b.cmp(&best)) == Ordering::Less {
                best = b;
                score = s;
            }
        }
        set[slot] = best;
        score
    }

    /// Coordinate descent from `start`.
    fn descend(&self, start: &[usize], cfg: &SelectConfig) -> Run {
        let mut set = start.to_vec();
        let mut current = self.score_set(&set);
        let mut probe_risks = vec![current.risk; set.len()];
        let mut pass_risks = Vec::new();
        for _ in 0..cfg.max_passes {
            let before = current;
            for slot in 0..set.len() {
                current = self.move_slot(&mut set, slot, cfg.stride);
                probe_risks[slot] = current.risk;
            }
            pass_risks.push(current.risk);
            if before.risk - current.risk < cfg.tol {
                break;
            }
        }
        Run { set, score: current, pass_risks, probe_risks }
    }
}

struct Run {
    set: Vec<usize>,
    score: Score,
    pass_risks: Vec<f64>,
    probe_risks: Vec<f64>,
}

/// Greedy coordinate descent over the log grid: each probe in turn is moved
/// to the free grid point that minimises the estimated Bayes risk with the
/// others held fixed. All candidates share one set of random draws, so the
/// risk never increases.
pub fn select_frequencies<T: Scalar>(train: &[(&LogSpectrum<T>, ClassLabel)], cfg: &SelectConfig) -> Result<Selection> {
    let problem = Problem::new(train, cfg)?;
    let init = equally_spaced(cfg.d, &problem.grid)?;
    let initial = problem.score_set(init.indices());
    if cfg.max_passes == 0 {
        let est = problem.estimate(initial);
        return Ok(Selection {
            frequencies: init,
            risk: est,
            initial_risk: est,
            pass_risks: Vec::new(),
            probe_risks: vec![initial.risk; cfg.d],
        });
    }
    let mut best: Option<Run> = None;
    for r in 0..cfg.restarts.max(1) {
        let start = if r == 0 {
            init.indices().to_vec()
        } else {
            random_frequencies(cfg.d, seed::derive(cfg.seed, "restart", r as u64), &problem.grid)?
                .indices()
                .to_vec()
        };
        let run = problem.descend(&start, cfg);
        if best.as_ref().is_none_or(|b| run.score.cmp(&b.score) == Ordering::Less) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let mut order: Vec<usize> = (0..run.set.len()).collect();
    order.sort_by_key(|&k| run.set[k]);
    let frequencies = FrequencySet::from_indices(&run.set, &problem.grid)?;
    Ok(Selection {
        frequencies,
        risk: problem.estimate(run.score),
        initial_risk: problem.estimate(initial),
        pass_risks: run.pass_risks,
        probe_risks: order.iter().map(|&k| run.probe_risks[k]).collect(),
    })
}

/// Risk of a given probe set on training spectra, with the same estimator
/// and draws the selector would use.
pub fn evaluate_frequencies<T: Scalar>(
    train: &[(&LogSpectrum<T>, ClassLabel)],
    set: &FrequencySet,
    cfg: &SelectConfig,
) -> Result<RiskEstimate> {
    let cfg = SelectConfig { d: set.len(), ..*cfg };
    let problem = Problem::new(train, &cfg)?;
    if problem.task != train[0].1.task {
        unreachable!()
    }
    Ok(problem.estimate(problem.score_set(set.indices())))
}
