//! Subject-level cross-validation and the experiments built on it.
//!
//! A corpus is analysed once into per-take log spectra ([`AnalyzedCorpus`]).
//! Every fold then splits subjects, never takes, chooses probe frequencies
//! from the training subjects only, fits, and classifies each held-out take
//! from the average posterior of its pieces. Fold accuracy is the fraction of
//! held-out takes labelled correctly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gda::{self, ClassLabel, ClassModel, Task};
use crate::manifest::Manifest;
use crate::riskopt::{self, FrequencySet, SelectConfig};
use crate::spectra::{self, AudioSignal, LogSpectrum, SpectralConfig};
use crate::synth::{Choral, Corpus, Gender};
use crate::{seed, wav, Scalar};

/// One take, analysed.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T> {
    pub subject_id: String,
    pub gender: Gender,
    pub choral: Choral,
    pub scale: usize,
    pub spectra: Vec<LogSpectrum<T>>,
}

impl<T> Recording<T> {
    pub fn label(&self, task: Task) -> ClassLabel {
        let value = match task {
            Task::Scale => self.scale,
            Task::Gender => self.gender as usize,
            Task::Choral => self.choral as usize,
            Task::Joint => 2 * self.gender as usize + self.choral as usize,
        };
        ClassLabel { task, value }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SubjectInfo {
    pub id: String,
    pub gender: Gender,
    pub choral: Choral,
}

/// Log spectra of every take of a corpus, computed once.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedCorpus<T> {
    pub spectral: SpectralConfig,
    pub recordings: Vec<Recording<T>>,
    /// Identifies the corpus and analysis settings in report fingerprints.
    pub source: String,
}

fn convert<T: Scalar>(signal: &AudioSignal<f64>) -> Result<AudioSignal<T>> {
    AudioSignal::new(signal.samples().iter().map(|&v| T::of(v)).collect(), signal.sample_rate())
}

impl<T: Scalar> AnalyzedCorpus<T> {
    /// Renders and analyses a synthetic corpus.
    pub fn from_corpus(corpus: &Corpus, spectral: &SpectralConfig) -> Result<Self> {
        spectral.validate()?;
        let jobs: Vec<_> = corpus
            .subjects
            .iter()
            .flat_map(|s| s.takes.iter().map(move |t| (s, t)))
            .collect();
        let recordings = jobs
            .par_iter()
            .map(|(s, t)| {
                let signal = convert::<T>(&corpus.render(t)?)?;
                Ok(Recording {
                    subject_id: s.id.clone(),
                    gender: s.gender,
                    choral: s.choral,
                    scale: t.scale,
                    spectra: spectra::analyze_take(&signal, spectral)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spectral: *spectral,
            recordings,
            source: format!("synth seed={} {}", corpus.seed, corpus.spec),
        })
    }

    /// Reads and analyses every WAV named by a manifest.
    pub fn from_manifest(manifest: &Manifest, spectral: &SpectralConfig) -> Result<Self> {
        spectral.validate()?;
        let recordings = manifest
            .records
            .par_iter()
            .map(|r| {
                let signal = wav::read_wav::<T>(&manifest.resolve(r))?;
                Ok(Recording {
                    subject_id: r.subject_id.clone(),
                    gender: r.gender,
                    choral: r.choral,
                    scale: r.scale,
                    spectra: spectra::analyze_take(&signal, spectral)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spectral: *spectral,
            recordings,
            source: format!("manifest {}", seed::fingerprint(&manifest.to_text()?)),
        })
    }

    /// Distinct subjects sorted by id.
    pub fn subjects(&self) -> Vec<SubjectInfo> {
        let set: BTreeSet<SubjectInfo> = self
            .recordings
            .iter()
            .map(|r| SubjectInfo { id: r.subject_id.clone(), gender: r.gender, choral: r.choral })
            .collect();
        set.into_iter().collect()
    }

    pub fn without_subjects(&self, ids: &[String]) -> Self {
        let drop: HashSet<&str> = ids.iter().map(String::as_str).collect();
        Self {
            spectral: self.spectral,
            recordings: self
                .recordings
                .iter()
                .filter(|r| !drop.contains(r.subject_id.as_str()))
                .cloned()
                .collect(),
            source: format!("{} without {}", self.source, ids.join(",")),
        }
    }

    /// A copy whose labels for `task` are permuted independently of the audio:
    /// subject attributes are shuffled across subjects, scale labels across
    /// the takes of each subject.
    pub fn with_shuffled_labels(&self, task: Task, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut out = self.clone();
        out.source = format!("{} shuffled {task} seed={seed}", self.source);
        match task {
            Task::Scale => {
                let mut by_subject: BTreeMap<String, Vec<usize>> = BTreeMap::new();
                for (i, r) in out.recordings.iter().enumerate() {
                    by_subject.entry(r.subject_id.clone()).or_default().push(i);
                }
                for idx in by_subject.values() {
                    let mut scales: Vec<usize> = idx.iter().map(|&i| out.recordings[i].scale).collect();
                    scales.shuffle(&mut rng);
                    for (&i, s) in idx.iter().zip(scales) {
                        out.recordings[i].scale = s;
                    }
                }
            }
            _ => {
                let subjects = self.subjects();
                let mut attrs: Vec<(Gender, Choral)> = subjects.iter().map(|s| (s.gender, s.choral)).collect();
                attrs.shuffle(&mut rng);
                let map: BTreeMap<&str, (Gender, Choral)> =
                    subjects.iter().map(|s| s.id.as_str()).zip(attrs).collect();
                for r in &mut out.recordings {
                    let (g, c) = map[r.subject_id.as_str()];
                    match task {
                        Task::Gender => r.gender = g,
                        Task::Choral => r.choral = c,
                        _ => (r.gender, r.choral) = (g, c),
                    }
                }
            }
        }
        out
    }
}

/// Which subjects take part in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    All,
    Singers,
    Males,
    Females,
}

impl Population {
    pub fn admits(self, s: &SubjectInfo) -> bool {
        match self {
            Population::All => true,
            Population::Singers => s.choral == Choral::Singer,
            Population::Males => s.gender == Gender::Male,
            Population::Females => s.gender == Gender::Female,
        }
    }
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::All => "all",
            Population::Singers => "singers",
            Population::Males => "males",
            Population::Females => "females",
        })
    }
}

impl FromStr for Population {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Population::All),
            "singers" => Ok(Population::Singers),
            "males" => Ok(Population::Males),
            "females" => Ok(Population::Females),
            other => Err(Error::Parse(format!("unknown population `{other}`"))),
        }
    }
}

/// Groups a test draw is balanced over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strata {
    None,
    Gender,
    Choral,
    Joint,
}

impl Strata {
    fn key(self, s: &SubjectInfo) -> usize {
        match self {
            Strata::None => 0,
            Strata::Gender => s.gender as usize,
            Strata::Choral => s.choral as usize,
            Strata::Joint => 2 * s.gender as usize + s.choral as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldSpec {
    pub task: Task,
    pub population: Population,
    pub strata: Strata,
    /// Test subjects drawn from every stratum.
    pub n_test: usize,
    pub n_repeats: usize,
    pub seed: u64,
}

impl FoldSpec {
    /// The usual split for a task: five singers for the scale, five per
    /// class for gender and choral status, three per class within one
    /// gender, three per group for the joint label.
    pub fn standard(task: Task, population: Population, seed: u64) -> Self {
        let (strata, n_test) = match (task, population) {
            (Task::Scale, _) => (Strata::None, 5),
            (Task::Gender, _) => (Strata::Gender, 5),
            (Task::Choral, Population::Males | Population::Females) => (Strata::Choral, 3),
            (Task::Choral, _) => (Strata::Choral, 5),
            (Task::Joint, _) => (Strata::Joint, 3),
        };
        let population = match (task, population) {
            (Task::Scale, Population::All) => Population::Singers,
            _ => population,
        };
        Self { task, population, strata, n_test, n_repeats: 20, seed }
    }

    /// Train/test subject ids for every repeat.
    pub fn splits(&self, subjects: &[SubjectInfo]) -> Result<Vec<Split>> {
        let mut strata: BTreeMap<usize, Vec<&SubjectInfo>> = BTreeMap::new();
        for s in subjects.iter().filter(|s| self.population.admits(s)) {
            strata.entry(self.strata.key(s)).or_default().push(s);
        }
        if strata.is_empty() {
            return Err(Error::Config(format!("no subjects in population {}", self.population)));
        }
        let expected = match self.strata {
            Strata::None => 1,
            Strata::Gender | Strata::Choral => 2,
            Strata::Joint => 4,
        };
        if strata.len() < expected {
            return Err(Error::Config(format!("population {} lacks a stratum", self.population)));
        }
        for members in strata.values() {
            if self.n_test == 0 || self.n_test >= members.len() {
                return Err(Error::Config(format!(
                    "{} test subjects per stratum leaves no training subject among {}",
                    self.n_test,
                    members.len()
                )));
            }
        }
        Ok((0..self.n_repeats)
            .map(|r| {
                let mut rng = seed::rng(seed::derive(self.seed, "fold", r as u64));
                let mut test = Vec::new();
                let mut train = Vec::new();
                for members in strata.values() {
                    let picked: HashSet<usize> = index::sample(&mut rng, members.len(), self.n_test).into_iter().collect();
                    for (i, s) in members.iter().enumerate() {
                        if picked.contains(&i) {
                            test.push(s.id.clone());
                        } else {
                            train.push(s.id.clone());
                        }
                    }
                }
                test.sort();
                train.sort();
                Split { index: r, train, test }
            })
            .collect())
    }
}

impl fmt::Display for FoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "task={} population={} strata={:?} n_test={} repeats={} fold_seed={}",
            self.task, self.population, self.strata, self.n_test, self.n_repeats, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub index: usize,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// How probe frequencies are chosen inside a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrequencyMode {
    Optimized,
    Random,
}

impl fmt::Display for FrequencyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FrequencyMode::Optimized => "optimized",
            FrequencyMode::Random => "random",
        })
    }
}

impl FromStr for FrequencyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimized" => Ok(FrequencyMode::Optimized),
            "random" => Ok(FrequencyMode::Random),
            other => Err(Error::Parse(format!("unknown mode `{other}`"))),
        }
    }
}

/// How a take's piece posteriors become one decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    /// MAP of the mean posterior.
    MeanPosterior,
    /// Majority of per-piece MAP labels, ties to the lowest class.
    Vote,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    /// Selector settings; `d` is replaced by the dimension under test.
    pub select: SelectConfig,
    pub aggregation: Aggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { select: SelectConfig::default(), aggregation: Aggregation::MeanPosterior }
    }
}

/// Factorizations of the joint gender and choral label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ordering {
    /// Two separate two-class decisions.
    Independent,
    /// Choral status first, then gender given it.
    SnThenMf,
    /// Gender first, then choral status given it.
    MfThenSn,
    /// One four-class model.
    Simultaneous,
}

impl Ordering {
    pub const ALL: [Ordering; 4] = [Ordering::Independent, Ordering::SnThenMf, Ordering::MfThenSn, Ordering::Simultaneous];
}

impl fmt::Display for Ordering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ordering::Independent => "independent",
            Ordering::SnThenMf => "sn-mf",
            Ordering::MfThenSn => "mf-sn",
            Ordering::Simultaneous => "joint",
        })
    }
}

impl FromStr for Ordering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Ordering::Independent),
            "sn-mf" | "sn_then_mf" => Ok(Ordering::SnThenMf),
            "mf-sn" | "mf_then_sn" => Ok(Ordering::MfThenSn),
            "joint" | "simultaneous" => Ok(Ordering::Simultaneous),
            other => Err(Error::Parse(format!("unknown ordering `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport {
    pub task: Task,
    pub population: Population,
    pub d: usize,
    /// `optimized`, `random`, or a joint ordering.
    pub mode: String,
    /// Analysis length in seconds when pieces were dropped.
    pub duration: Option<f64>,
    pub mean_accuracy: f64,
    /// Sample standard deviation across folds.
    pub std_accuracy: f64,
    pub fold_accuracies: Vec<f64>,
    /// Probe frequencies (Hz) of every fold, per model used.
    pub frequency_sets: Vec<Vec<Vec<f64>>>,
    /// Folds dropped because a training subset lost a class.
    pub skipped_folds: usize,
    pub fingerprint: String,
}

impl PerformanceReport {
    fn new(
        task: Task,
        fold: &FoldSpec,
        d: usize,
        mode: String,
        duration: Option<f64>,
        folds: Vec<(f64, Vec<Vec<f64>>)>,
        skipped_folds: usize,
        fingerprint: String,
    ) -> Self {
        let (fold_accuracies, frequency_sets): (Vec<f64>, Vec<_>) = folds.into_iter().unzip();
        let (mean_accuracy, std_accuracy) = mean_std(&fold_accuracies);
        Self {
            task,
            population: fold.population,
            d,
            mode,
            duration,
            mean_accuracy,
            std_accuracy,
            fold_accuracies,
            frequency_sets,
            skipped_folds,
            fingerprint,
        }
    }

    pub fn n_folds(&self) -> usize {
        self.fold_accuracies.len()
    }

    pub const CSV_HEADER: &'static str = "task,D,mode,mean,std,n_folds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{}",
            self.task,
            self.d,
            self.mode,
            self.mean_accuracy,
            self.std_accuracy,
            self.n_folds()
        )
    }
}

/// Mean and sample standard deviation; NaN for an empty list.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn fingerprint<T>(corpus: &AnalyzedCorpus<T>, fold: &FoldSpec, cfg: &EvalConfig, d: usize, what: &str) -> String {
    seed::fingerprint(&format!(
        "{} | {} | {} | {} | {:?} | d={d} {what}",
        corpus.source, corpus.spectral, fold, cfg.select, cfg.aggregation
    ))
}

fn labelled<'a, T>(
    recordings: &[&'a Recording<T>],
    task: Task,
) -> Vec<(&'a LogSpectrum<T>, ClassLabel)> {
    recordings
        .iter()
        .flat_map(|r| r.spectra.iter().map(move |s| (s, r.label(task))))
        .collect()
}

/// Probe frequencies for one model of one fold, from training data only.
fn choose_frequencies<T: Scalar>(
    train: &[(&LogSpectrum<T>, ClassLabel)],
    grid: &spectra::LogGrid,
    d: usize,
    mode: FrequencyMode,
    cfg: &EvalConfig,
    stream: &str,
    fold_seed: u64,
) -> Result<FrequencySet> {
    match mode {
        FrequencyMode::Optimized => {
            let select = SelectConfig { d, seed: seed::derive(fold_seed, stream, 0), ..cfg.select };
            Ok(riskopt::select_frequencies(train, &select)?.frequencies)
        }
        FrequencyMode::Random => riskopt::random_frequencies(d, seed::derive(fold_seed, stream, 1), grid),
    }
}

fn train_model<T: Scalar>(
    recordings: &[&Recording<T>],
    task: Task,
    spectral: &SpectralConfig,
    d: usize,
    mode: FrequencyMode,
    cfg: &EvalConfig,
    stream: &str,
    fold_seed: u64,
) -> Result<ClassModel<T>> {
    let train = labelled(recordings, task);
    let freqs = choose_frequencies(&train, &spectral.grid, d, mode, cfg, stream, fold_seed)?;
    ClassModel::fit_spectra(&train, freqs, *spectral, cfg.select.epsilon)
}

/// Decision for a take from its first `k` pieces.
fn predict<T: Scalar>(model: &ClassModel<T>, rec: &Recording<T>, k: usize, agg: Aggregation) -> Result<ClassLabel> {
    let pieces = &rec.spectra[..k.min(rec.spectra.len())];
    match agg {
        Aggregation::MeanPosterior => Ok(gda::map_class(&model.classify(pieces)?)),
        Aggregation::Vote => {
            let mut votes = vec![0usize; model.task().cardinality()];
            for s in pieces {
                votes[gda::map_class(&model.posterior_of(s)?).value] += 1;
            }
            let best = (0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b });
            Ok(ClassLabel { task: model.task(), value: best })
        }
    }
}

fn partition<'a, T>(corpus: &'a AnalyzedCorpus<T>, split: &Split, population: Population) -> (Vec<&'a Recording<T>>, Vec<&'a Recording<T>>) {
    let train: HashSet<&str> = split.train.iter().map(String::as_str).collect();
    let test: HashSet<&str> = split.test.iter().map(String::as_str).collect();
    let admitted = |r: &&Recording<T>| {
        population.admits(&SubjectInfo { id: String::new(), gender: r.gender, choral: r.choral })
    };
    (
        corpus.recordings.iter().filter(|r| train.contains(r.subject_id.as_str())).filter(admitted).collect(),
        corpus.recordings.iter().filter(|r| test.contains(r.subject_id.as_str())).filter(admitted).collect(),
    )
}

fn fold_seed(fold: &FoldSpec, split: &Split) -> u64 {
    seed::derive(fold.seed, "fold-model", split.index as u64)
}

/// The frequency set one fold of [`cross_validate`] uses. Depends only on
/// the training subjects of `split`.
pub fn fold_frequencies<T: Scalar>(
    corpus: &AnalyzedCorpus<T>,
    fold: &FoldSpec,
    split: &Split,
    d: usize,
    mode: FrequencyMode,
    cfg: &EvalConfig,
) -> Result<FrequencySet> {
    let (train, _) = partition(corpus, split, fold.population);
    let train = labelled(&train, fold.task);
    choose_frequencies(&train, &corpus.spectral.grid, d, mode, cfg, "select", fold_seed(fold, split))
}

/// Cross-validated accuracy for one task, dimension and selection mode.
pub fn cross_validate<T: Scalar>(
    corpus: &AnalyzedCorpus<T>,
    fold: &FoldSpec,
    d: usize,
    mode: FrequencyMode,
    cfg: &EvalConfig,
) -> Result<PerformanceReport> {
    let full = corpus.spectral.top_n as f64 * corpus.spectral.delta;
    let mut reports = duration_sweep(corpus, fold, d, mode, cfg, &[full])?;
    let mut report = reports.remove(0);
    report.duration = None;
    Ok(report)
}

/// Accuracy when only the first `ceil(T / delta)` top pieces of each test
/// take are averaged. Training is unchanged.
pub fn duration_sweep<T: Scalar>(
    corpus: &AnalyzedCorpus<T>,
    fold: &FoldSpec,
    d: usize,
    mode: FrequencyMode,
    cfg: &EvalConfig,
    durations: &[f64],
) -> Result<Vec<PerformanceReport>> {
    let delta = corpus.spectral.delta;
    if d == 0 {
        return Err(Error::Config("D must be at least 1".into()));
    }
    let counts = durations
        .iter()
        .map(|&t| {
            if !(t >= delta - 1e-9) {
                return Err(Error::Config(format!("duration {t} s is shorter than one {delta} s piece")));
            }
            Ok((t / delta - 1e-9).ceil() as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    let splits = fold.splits(&corpus.subjects())?;
    let mut per_duration: Vec<Vec<(f64, Vec<Vec<f64>>)>> = vec![Vec::new(); durations.len()];
    for split in &splits {
        let (train, test) = partition(corpus, split, fold.population);
        let model = train_model(&train, fold.task, &corpus.spectral, d, mode, cfg, "select", fold_seed(fold, split))?;
        let freqs = vec![model.frequencies.frequencies_hz().to_vec()];
        for (slot, &k) in counts.iter().enumerate() {
            let mut correct = 0;
            for rec in &test {
                if predict(&model, rec, k, cfg.aggregation)? == rec.label(fold.task) {
                    correct += 1;
                }
            }
            per_duration[slot].push((correct as f64 / test.len() as f64, freqs.clone()));
        }
    }
    Ok(durations
        .iter()
        .zip(per_duration)
        .map(|(&t, folds)| {
            let fp = fingerprint(corpus, fold, cfg, d, &format!("mode={mode} duration={t:?}"));
            PerformanceReport::new(fold.task, fold, d, mode.to_string(), Some(t), folds, 0, fp)
        })
        .collect())
}

/// Accuracy on the four-way gender and choral label under one ordering.
pub fn infer_joint<T: Scalar>(
    corpus: &AnalyzedCorpus<T>,
    fold: &FoldSpec,
    d: usize,
    ordering: Ordering,
    mode: FrequencyMode,
    cfg: &EvalConfig,
) -> Result<PerformanceReport> {
    if d == 0 {
        return Err(Error::Config("D must be at least 1".into()));
    }
    let splits = fold.splits(&corpus.subjects())?;
    let spectral = &corpus.spectral;
    let k = spectral.top_n;
    let mut folds = Vec::new();
    let mut skipped = 0;
    for split in &splits {
        let (train, test) = partition(corpus, split, fold.population);
        let fs = fold_seed(fold, split);
        let outcome = (|| -> Result<(f64, Vec<Vec<f64>>)> {
            let mut used = Vec::new();
            let mut fit = |recs: &[&Recording<T>], task: Task, stream: &str| -> Result<ClassModel<T>> {
                let m = train_model(recs, task, spectral, d, mode, cfg, stream, fs)?;
                used.push(m.frequencies.frequencies_hz().to_vec());
                Ok(m)
            };
            let subset = |task: Task, value: usize| -> Vec<&Recording<T>> {
                train.iter().copied().filter(|r| r.label(task).value == value).collect()
            };
            let predictions: Vec<usize> = match ordering {
                Ordering::Simultaneous => {
                    let m = fit(&train, Task::Joint, "joint")?;
                    test.iter().map(|r| Ok(predict(&m, r, k, cfg.aggregation)?.value)).collect::<Result<_>>()?
                }
                Ordering::Independent => {
                    let g = fit(&train, Task::Gender, "gender")?;
                    let c = fit(&train, Task::Choral, "choral")?;
                    test.iter()
                        .map(|r| Ok(2 * predict(&g, r, k, cfg.aggregation)?.value + predict(&c, r, k, cfg.aggregation)?.value))
                        .collect::<Result<_>>()?
                }
                Ordering::SnThenMf => {
                    let c = fit(&train, Task::Choral, "choral")?;
                    let given = [
                        fit(&subset(Task::Choral, 0), Task::Gender, "gender|S")?,
                        fit(&subset(Task::Choral, 1), Task::Gender, "gender|N")?,
                    ];
                    test.iter()
                        .map(|r| {
                            let cv = predict(&c, r, k, cfg.aggregation)?.value;
                            Ok(2 * predict(&given[cv], r, k, cfg.aggregation)?.value + cv)
                        })
                        .collect::<Result<_>>()?
                }
                Ordering::MfThenSn => {
                    let g = fit(&train, Task::Gender, "gender")?;
                    let given = [
                        fit(&subset(Task::Gender, 0), Task::Choral, "choral|M")?,
                        fit(&subset(Task::Gender, 1), Task::Choral, "choral|F")?,
                    ];
                    test.iter()
                        .map(|r| {
                            let gv = predict(&g, r, k, cfg.aggregation)?.value;
                            Ok(2 * gv + predict(&given[gv], r, k, cfg.aggregation)?.value)
                        })
                        .collect::<Result<_>>()?
                }
            };
            let correct = test
                .iter()
                .zip(&predictions)
                .filter(|(r, &p)| r.label(Task::Joint).value == p)
                .count();
            Ok((correct as f64 / test.len() as f64, used))
        })();
        match outcome {
            Ok(f) => folds.push(f),
            Err(Error::InsufficientData(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if folds.is_empty() {
        return Err(Error::InsufficientData(format!("every fold of ordering {ordering} was skipped")));
    }
    let fp = fingerprint(corpus, fold, cfg, d, &format!("mode={mode} ordering={ordering}"));
    Ok(PerformanceReport::new(Task::Joint, fold, d, ordering.to_string(), None, folds, skipped, fp))
}

/// Per-subject mean posterior of class `value` over all of a subject's takes.
pub fn subject_posteriors<T: Scalar>(corpus: &AnalyzedCorpus<T>, model: &ClassModel<T>, value: usize) -> Result<Vec<(String, f64)>> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for r in &corpus.recordings {
        let p = model.classify(&r.spectra)?.probs[value].as_f64();
        let e = acc.entry(r.subject_id.as_str()).or_insert((0.0, 0));
        e.0 += p;
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(id, (s, n))| (id.to_string(), s / n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub pearson: f64,
    pub spearman: f64,
    pub n: usize,
}

/// Pearson and Spearman correlation between per-subject posteriors and
/// external scores, joined on subject id.
pub fn correlate_scores(posteriors: &[(String, f64)], scores: &[(String, f64)]) -> Result<Correlation> {
    let to_map = |xs: &[(String, f64)], what: &str| -> Result<BTreeMap<String, f64>> {
        let mut m = BTreeMap::new();
        for (id, v) in xs {
            if m.insert(id.clone(), *v).is_some() {
                return Err(Error::Join(format!("subject {id} appears twice in the {what}")));
            }
        }
        Ok(m)
    };
    let p = to_map(posteriors, "posteriors")?;
    let s = to_map(scores, "scores")?;
    if p.keys().ne(s.keys()) {
        let only: Vec<&String> = p.keys().filter(|k| !s.contains_key(*k)).chain(s.keys().filter(|k| !p.contains_key(*k))).collect();
        return Err(Error::Join(format!("subjects present on one side only: {only:?}")));
    }
    if p.len() < 3 {
        return Err(Error::InsufficientData(format!("{} subjects, need at least 3", p.len())));
    }
    let x: Vec<f64> = p.values().copied().collect();
    let y: Vec<f64> = s.values().copied().collect();
    Ok(Correlation { pearson: pearson(&x, &y)?, spearman: pearson(&ranks(&x), &ranks(&y))?, n: x.len() })
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, _) = mean_std(x);
    let (my, _) = mean_std(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("correlation of a constant series".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks, ties sharing their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Parses `subject_id,score` lines; `#` comments and a header are allowed.
pub fn parse_scores(text: &str) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, score) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("score line {}: expected `subject_id,score`", n + 1)))?;
        let (id, score) = (id.trim(), score.trim());
        if out.is_empty() && id == "subject_id" {
            continue;
        }
        let v: f64 = score
            .parse()
            .map_err(|_| Error::Parse(format!("score line {}: `{score}` is not a number", n + 1)))?;
        out.push((id.to_string(), v));
    }
    Ok(out)
}

/// Writes reports as CSV with the given leading comment lines.
pub fn write_reports<W: Write>(mut w: W, comments: &[String], reports: &[PerformanceReport]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", PerformanceReport::CSV_HEADER)?;
    for r in reports {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn subjects(groups: [usize; 4]) -> Vec<SubjectInfo> {
        let mut out = Vec::new();
        for (g, (gender, choral)) in [
            (Gender::Male, Choral::Singer),
            (Gender::Female, Choral::Singer),
            (Gender::Male, Choral::NonSinger),
            (Gender::Female, Choral::NonSinger),
        ]
        .into_iter()
        .enumerate()
        {
            for i in 0..groups[g] {
                out.push(SubjectInfo { id: format!("{gender}{choral}{i:02}"), gender, choral });
            }
        }
        out.sort();
        out
    }

    #[test]
    fn splits_are_disjoint_and_stratified() {
        let subs = subjects([11, 12, 14, 13]);
        let fold = FoldSpec::standard(Task::Gender, Population::All, 3);
        let splits = fold.splits(&subs).unwrap();
        assert_eq!(splits.len(), 20);
        for s in &splits {
            assert_eq!(s.test.len(), 10);
            assert_eq!(s.train.len(), 40);
            assert!(s.test.iter().all(|t| !s.train.contains(t)));
            assert_eq!(s.test.iter().filter(|t| t.starts_with('M')).count(), 5);
        }
        assert_eq!(splits, fold.splits(&subs).unwrap());
        assert_ne!(splits[0], splits[1]);
    }

    #[test]
    fn standard_folds_follow_the_populations() {
        let subs = subjects([11, 12, 14, 13]);
        let scale = FoldSpec::standard(Task::Scale, Population::All, 0).splits(&subs).unwrap();
        assert!(scale.iter().all(|s| s.test.len() == 5 && s.train.len() == 18));
        let males = FoldSpec::standard(Task::Choral, Population::Males, 0).splits(&subs).unwrap();
        assert!(males.iter().all(|s| s.test.len() == 6 && s.train.len() == 19));
        let joint = FoldSpec::standard(Task::Joint, Population::All, 0).splits(&subs).unwrap();
        assert!(joint.iter().all(|s| s.test.len() == 12));
    }

    #[test]
    fn oversized_folds_are_config_errors() {
        let subs = subjects([2, 2, 2, 2]);
        let fold = FoldSpec::standard(Task::Choral, Population::All, 0);
        assert!(matches!(fold.splits(&subs), Err(Error::Config(_))));
    }

    #[test]
    fn correlation_edge_cases() {
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let p: Vec<(String, f64)> = ids.iter().cloned().zip([0.1, 0.5, 0.3, 0.9, 0.7]).collect();
        let affine: Vec<(String, f64)> = p.iter().map(|(i, v)| (i.clone(), 3.0 * v + 1.0)).collect();
        let c = correlate_scores(&p, &affine).unwrap();
        assert_relative_eq!(c.pearson, 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.spearman, 1.0, epsilon = 1e-12);
        let anti: Vec<(String, f64)> = p.iter().map(|(i, v)| (i.clone(), -v)).collect();
        assert_relative_eq!(correlate_scores(&p, &anti).unwrap().pearson, -1.0, epsilon = 1e-12);
        assert!(matches!(correlate_scores(&p, &affine[1..]), Err(Error::Join(_))));
        assert!(matches!(correlate_scores(&p[..2], &affine[..2]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn spearman_uses_average_ranks() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn independent_scores_are_uncorrelated() {
        use rand::Rng;
        let mut rng = seed::rng(17);
        let p: Vec<(String, f64)> = (0..50).map(|i| (format!("s{i}"), rng.random::<f64>())).collect();
        let mut shuffled: Vec<f64> = p.iter().map(|x| x.1).collect();
        shuffled.shuffle(&mut rng);
        let s: Vec<(String, f64)> = p.iter().map(|x| x.0.clone()).zip(shuffled).collect();
        // |r| < 3 / sqrt(n) under independence
        assert!(correlate_scores(&p, &s).unwrap().pearson.abs() < 3.0 / 50f64.sqrt());
    }

    #[test]
    fn score_file_format() {
        let s = parse_scores("# trainer\nsubject_id,score\nMS01, 7.5\nFN02,3\n").unwrap();
        assert_eq!(s, vec![("MS01".to_string(), 7.5), ("FN02".to_string(), 3.0)]);
        assert!(parse_scores("MS01;7\n").is_err());
        assert!(parse_scores("MS01,high\n").is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(m, 2.5);
        assert_relative_eq!(s, (5.0f64 / 3.0).sqrt());
    }
}
