//! Synthetic sung takes with controllable spectral structure.
//!
//! A take is a sum of harmonics of a slightly jittered fundamental, shaped by
//! a power-law rolloff and Gaussian formant bumps, plus aspiration noise that
//! follows the same envelope and a flat noise floor. Male singers carry a
//! bump near 3 kHz, female singers one near 10 kHz; every male voice also has
//! a low chest resonance.
//!
//! A [`Corpus`] only stores profiles and seeds. Audio is rendered on demand,
//! already quantized to 16 bits, so a take read back from its WAV file is
//! identical to a fresh rendering.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::gda::{ClassLabel, Task};
use crate::manifest::{Manifest, ManifestRecord};
use crate::spectra::AudioSignal;
use crate::{seed, wav};

pub const GENERATOR_VERSION: &str = "voxclass-synth/1";

/// Semitones from A4 of the C-major scale C4..C5.
const SCALE_SEMITONES: [i32; 8] = [-9, -7, -5, -4, -2, 0, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choral {
    Singer,
    NonSinger,
}

impl Gender {
    pub fn code(self) -> &'static str {
        match self {
            Gender::Male => "M",
            Gender::Female => "F",
        }
    }

    pub fn label(self) -> ClassLabel {
        ClassLabel { task: Task::Gender, value: self as usize }
    }
}

impl Choral {
    pub fn code(self) -> &'static str {
        match self {
            Choral::Singer => "S",
            Choral::NonSinger => "N",
        }
    }

    pub fn label(self) -> ClassLabel {
        ClassLabel { task: Task::Choral, value: self as usize }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "M" => Ok(Gender::Male),
            "F" => Ok(Gender::Female),
            other => Err(Error::Parse(format!("gender must be M or F, got `{other}`"))),
        }
    }
}

impl FromStr for Choral {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S" => Ok(Choral::Singer),
            "N" => Ok(Choral::NonSinger),
            other => Err(Error::Parse(format!("choral status must be S or N, got `{other}`"))),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl fmt::Display for Choral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Equal-tempered C major, C4..C5 for women and an octave lower for men.
pub fn scale_fundamentals(gender: Gender) -> [f64; 8] {
    let octave = match gender {
        Gender::Female => 1.0,
        Gender::Male => 0.5,
    };
    SCALE_SEMITONES.map(|n| octave * 440.0 * 2f64.powf(n as f64 / 12.0))
}

/// Gaussian bump of the log power envelope: the power at `center_hz` is
/// multiplied by `gain`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormantBump {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub gain: f64,
}

impl FormantBump {
    fn log_gain_at(&self, hz: f64) -> f64 {
        let z = (hz - self.center_hz) / self.bandwidth_hz;
        self.gain.max(1e-300).ln() * (-0.5 * z * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoiceProfile {
    pub fundamental_hz: f64,
    pub n_harmonics: usize,
    /// Harmonic `k` has power `k^-harmonic_decay` before the bumps.
    pub harmonic_decay: f64,
    pub formant_bumps: Vec<FormantBump>,
    /// Relative std of the slow fundamental wander.
    pub jitter: f64,
    /// Flat noise power relative to the total harmonic power.
    pub noise_floor: f64,
    /// Aspiration noise following the harmonic envelope; at this value a
    /// 10 Hz band carries this fraction of a harmonic's power there.
    pub breathiness: f64,
    pub gender: Gender,
    pub choral: Choral,
}

impl VoiceProfile {
    /// A bare harmonic voice with no bumps, noise or jitter.
    pub fn plain(fundamental_hz: f64, n_harmonics: usize, gender: Gender, choral: Choral) -> Self {
        Self {
            fundamental_hz,
            n_harmonics,
            harmonic_decay: 2.0,
            formant_bumps: Vec::new(),
            jitter: 0.0,
            noise_floor: 0.0,
            breathiness: 0.0,
            gender,
            choral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.fundamental_hz > 0.0) || self.n_harmonics == 0 {
            return Err(Error::Config("fundamental and harmonic count must be positive".into()));
        }
        if !unit(self.jitter) || !unit(self.noise_floor) || !unit(self.breathiness) {
            return Err(Error::Config("jitter, noise_floor and breathiness must lie in [0, 1)".into()));
        }
        if self.formant_bumps.iter().any(|b| !(b.gain >= 0.0) || !(b.bandwidth_hz > 0.0)) {
            return Err(Error::Config("formant gains must be >= 0 and bandwidths > 0".into()));
        }
        Ok(())
    }

    /// Multiplicative power envelope of all bumps.
    pub fn envelope(&self, hz: f64) -> f64 {
        self.formant_bumps.iter().map(|b| b.log_gain_at(hz)).sum::<f64>().exp()
    }

    /// Power of harmonic `k` (1-based) relative to an unshaped fundamental.
    pub fn harmonic_power(&self, k: usize) -> f64 {
        (k as f64).powf(-self.harmonic_decay) * self.envelope(k as f64 * self.fundamental_hz)
    }

    /// Continuous version of [`harmonic_power`](Self::harmonic_power),
    /// falling off steeply below the fundamental.
    fn envelope_power(&self, hz: f64) -> f64 {
        let r = hz / self.fundamental_hz;
        let tilt = if r >= 1.0 { r.powf(-self.harmonic_decay) } else { r.powi(6) };
        tilt * self.envelope(hz)
    }
}

/// Renders one take, peak-normalized to 0.9 and quantized to 16 bits.
pub fn generate_take(profile: &VoiceProfile, duration: f64, sample_rate: f64, seed: u64) -> Result<AudioSignal<f64>> {
    profile.validate()?;
    if !(duration >= 0.1 - 1e-12) {
        return Err(Error::Config(format!("take duration {duration} s is shorter than one piece")));
    }
    if !(profile.fundamental_hz < sample_rate / 2.0) {
        return Err(Error::Range("fundamental above Nyquist".into()));
    }
    let n = (duration * sample_rate).round() as usize;
    let mut rng = seed::rng(seed);
    let f0 = profile.fundamental_hz;

    // Slow unit-variance AR(1) wander with a 30 ms time constant.
    let rho = (-1.0 / (0.03 * sample_rate)).exp();
    let kick = (1.0 - rho * rho).sqrt();
    let mut wander: f64 = rng.sample(StandardNormal);
    let mut phase = 0.0;
    let mut phases = Vec::with_capacity(n);
    for _ in 0..n {
        phases.push(phase);
        let f = f0 * (1.0 + profile.jitter * wander);
        phase = (phase + 2.0 * PI * f / sample_rate) % (2.0 * PI);
        wander = rho * wander + kick * rng.sample::<f64, _>(StandardNormal);
    }

    let top = sample_rate / 2.0 / (1.0 + 4.0 * profile.jitter);
    let k_max = profile.n_harmonics.min((top / f0).floor() as usize).max(1);
    let coeffs: Vec<Complex<f64>> = (1..=k_max)
        .map(|k| {
            let amp = profile.harmonic_power(k).sqrt();
            Complex::from_polar(amp, rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    let harmonic_power: f64 = coeffs.iter().map(|c| c.norm_sqr() / 2.0).sum();

    let mut x: Vec<f64> = phases
        .iter()
        .map(|&p| {
            let step = Complex::from_polar(1.0, p);
            let mut z = step;
            let mut acc = 0.0;
            for c in &coeffs {
                acc += c.re * z.im + c.im * z.re;
                z *= step;
            }
            acc
        })
        .collect();

    if profile.breathiness > 0.0 {
        let noise = shaped_noise(n, sample_rate, &mut rng, |hz| {
            profile.breathiness * profile.envelope_power(hz) / (2.0 * 10.0)
        });
        for (v, b) in x.iter_mut().zip(noise) {
            *v += b;
        }
    }
    if profile.noise_floor > 0.0 {
        let white = Normal::new(0.0, (profile.noise_floor * harmonic_power).sqrt())
            .map_err(|e| Error::Config(e.to_string()))?;
        for v in x.iter_mut() {
            *v += white.sample(&mut rng);
        }
    }

    let ramp = ((0.05 * sample_rate) as usize).min(n / 4);
    for i in 0..ramp {
        let w = 0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos();
        x[i] *= w;
        x[n - 1 - i] *= w;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 0.0 { 0.9 / peak } else { 0.0 };
    let samples = x.iter().map(|&v| wav::quantize(v * scale) as f64 / 32768.0).collect();
    AudioSignal::new(samples, sample_rate)
}

/// Gaussian noise with one-sided power density `psd(hz)` per Hz.
fn shaped_noise<R: Rng>(n: usize, sample_rate: f64, rng: &mut R, psd: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (j, v) in buf.iter_mut().enumerate() {
        let hz = j.min(n - j) as f64 * sample_rate / n as f64;
        *v *= (psd(hz) * sample_rate / 2.0).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|v| v.re / n as f64).collect()
}

/// Corpus composition and the spread of per-subject voice parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub male_singers: usize,
    pub female_singers: usize,
    pub male_non_singers: usize,
    pub female_non_singers: usize,
    pub takes_per_scale: usize,
    pub take_duration: f64,
    pub sample_rate: f64,
    /// Median power gain of the male singer's 3 kHz bump.
    pub male_formant_gain: f64,
    /// Median power gain of the female singer's 10 kHz bump.
    pub female_formant_gain: f64,
    /// Std of the log gain across subjects.
    pub formant_gain_spread: f64,
    /// Median gain of the male chest resonance near 180 Hz.
    pub chest_gain: f64,
    pub decay_range: (f64, f64),
    pub jitter_range: (f64, f64),
    pub noise_floor_range: (f64, f64),
    pub breathiness_range: (f64, f64),
    /// Relative std of per-take mistuning.
    pub detune: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            male_singers: 11,
            female_singers: 12,
            male_non_singers: 14,
            female_non_singers: 13,
            takes_per_scale: 1,
            take_duration: 1.5,
            sample_rate: 48_000.0,
            male_formant_gain: 8.0,
            female_formant_gain: 10.0,
            formant_gain_spread: 0.4,
            chest_gain: 20.0,
            decay_range: (1.8, 2.2),
            jitter_range: (0.002, 0.008),
            noise_floor_range: (1e-6, 1e-5),
            breathiness_range: (0.01, 0.03),
            detune: 0.005,
        }
    }
}

impl CorpusSpec {
    /// Same voice parameters with different group sizes, in the order
    /// male singers, female singers, male non-singers, female non-singers.
    pub fn with_counts(counts: [usize; 4]) -> Self {
        Self {
            male_singers: counts[0],
            female_singers: counts[1],
            male_non_singers: counts[2],
            female_non_singers: counts[3],
            ..Self::default()
        }
    }

    fn groups(&self) -> [(Gender, Choral, usize); 4] {
        [
            (Gender::Male, Choral::Singer, self.male_singers),
            (Gender::Female, Choral::Singer, self.female_singers),
            (Gender::Male, Choral::NonSinger, self.male_non_singers),
            (Gender::Female, Choral::NonSinger, self.female_non_singers),
        ]
    }

    pub fn n_subjects(&self) -> usize {
        self.groups().iter().map(|g| g.2).sum()
    }
}

impl fmt::Display for CorpusSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "counts={},{},{},{} takes_per_scale={} duration={:?} rate={:?} male_formant_gain={:?} \
             female_formant_gain={:?} gain_spread={:?} chest_gain={:?} decay={:?}..{:?} jitter={:?}..{:?} \
             noise_floor={:?}..{:?} breathiness={:?}..{:?} detune={:?}",
            self.male_singers,
            self.female_singers,
            self.male_non_singers,
            self.female_non_singers,
            self.takes_per_scale,
            self.take_duration,
            self.sample_rate,
            self.male_formant_gain,
            self.female_formant_gain,
            self.formant_gain_spread,
            self.chest_gain,
            self.decay_range.0,
            self.decay_range.1,
            self.jitter_range.0,
            self.jitter_range.1,
            self.noise_floor_range.0,
            self.noise_floor_range.1,
            self.breathiness_range.0,
            self.breathiness_range.1,
            self.detune,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Take {
    /// Index into the scale, 0 = do .. 7 = high do.
    pub scale: usize,
    pub index: usize,
    pub seed: u64,
    pub profile: VoiceProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub gender: Gender,
    pub choral: Choral,
    pub takes: Vec<Take>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub seed: u64,
    pub subjects: Vec<Subject>,
}

impl Corpus {
    pub fn n_takes(&self) -> usize {
        self.subjects.iter().map(|s| s.takes.len()).sum()
    }

    pub fn render(&self, take: &Take) -> Result<AudioSignal<f64>> {
        generate_take(&take.profile, self.spec.take_duration, self.spec.sample_rate, take.seed)
    }

    /// Writes one WAV per take under `dir` and a `manifest.csv` beside them.
    pub fn write(&self, dir: &Path) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let mut records = Vec::with_capacity(self.n_takes());
        for subject in &self.subjects {
            fs::create_dir_all(dir.join(&subject.id))?;
            for take in &subject.takes {
                let rel = take_path(&subject.id, take);
                wav::write_wav(&dir.join(&rel), &self.render(take)?)?;
                records.push(ManifestRecord {
                    subject_id: subject.id.clone(),
                    gender: subject.gender,
                    choral: subject.choral,
                    scale: take.scale,
                    path: rel.into(),
                    seed: Some(take.seed),
                });
            }
        }
        let manifest = Manifest {
            provenance: vec![
                format!("generator={GENERATOR_VERSION} seed={}", self.seed),
                format!("spec {}", self.spec),
            ],
            records,
            base_dir: dir.to_path_buf(),
        };
        manifest.write(&dir.join("manifest.csv"))?;
        Ok(manifest)
    }
}

fn take_path(subject: &str, take: &Take) -> String {
    let scale = Task::Scale.labels()[take.scale].replace('\'', "2");
    if take.index == 0 {
        format!("{subject}/{scale}.wav")
    } else {
        format!("{subject}/{scale}_{}.wav", take.index)
    }
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    uniform(rng, (lo.ln(), hi.ln())).exp()
}

fn lognormal<R: Rng>(rng: &mut R, median: f64, spread: f64) -> f64 {
    if spread > 0.0 {
        LogNormal::new(median.ln(), spread).unwrap().sample(rng)
    } else {
        median
    }
}

/// Plans a corpus: per-subject voices and per-take seeds. No audio is rendered.
pub fn generate_corpus(spec: &CorpusSpec, corpus_seed: u64) -> Result<Corpus> {
    if spec.n_subjects() == 0 || spec.takes_per_scale == 0 {
        return Err(Error::Config("corpus needs at least one subject and one take per scale".into()));
    }
    if !(spec.take_duration >= 0.1) || !(spec.sample_rate >= 2.0 * 20_000.0) {
        return Err(Error::Config("takes need >= 0.1 s at a rate covering 20 kHz".into()));
    }
    let mut subjects = Vec::with_capacity(spec.n_subjects());
    for (gender, choral, count) in spec.groups() {
        for i in 0..count {
            let id = format!("{}{}{:02}", gender.code(), choral.code(), i + 1);
            let mut rng = seed::rng(seed::derive(corpus_seed, &format!("subject:{id}"), 0));
            let decay = uniform(&mut rng, spec.decay_range);
            let jitter = uniform(&mut rng, spec.jitter_range);
            let noise_floor = log_uniform(&mut rng, spec.noise_floor_range);
            let breathiness = log_uniform(&mut rng, spec.breathiness_range);
            // an open "a" vowel
            let mut bumps = vec![
                FormantBump {
                    center_hz: uniform(&mut rng, (700.0, 850.0)),
                    bandwidth_hz: 120.0,
                    gain: uniform(&mut rng, (4.0, 6.0)),
                },
                FormantBump {
                    center_hz: uniform(&mut rng, (1100.0, 1300.0)),
                    bandwidth_hz: 150.0,
                    gain: uniform(&mut rng, (2.0, 4.0)),
                },
            ];
            if gender == Gender::Male {
                bumps.push(FormantBump {
                    center_hz: uniform(&mut rng, (160.0, 200.0)),
                    bandwidth_hz: uniform(&mut rng, (50.0, 70.0)),
                    gain: lognormal(&mut rng, spec.chest_gain, 0.25),
                });
            }
            if choral == Choral::Singer {
                bumps.push(match gender {
                    Gender::Male => FormantBump {
                        center_hz: 3000.0 + 100.0 * rng.sample::<f64, _>(StandardNormal),
                        bandwidth_hz: 250.0,
                        gain: lognormal(&mut rng, spec.male_formant_gain, spec.formant_gain_spread),
                    },
                    Gender::Female => FormantBump {
                        center_hz: 10_000.0 + 300.0 * rng.sample::<f64, _>(StandardNormal),
                        bandwidth_hz: 800.0,
                        gain: lognormal(&mut rng, spec.female_formant_gain, spec.formant_gain_spread),
                    },
                });
            }
            let fundamentals = scale_fundamentals(gender);
            let mut takes = Vec::with_capacity(8 * spec.takes_per_scale);
            for (scale, &f) in fundamentals.iter().enumerate() {
                for index in 0..spec.takes_per_scale {
                    let take_seed = seed::derive(corpus_seed, &format!("take:{id}:{scale}"), index as u64);
                    let mut take_rng = seed::rng(seed::derive(take_seed, "detune", 0));
                    let f0 = f * (1.0 + spec.detune * take_rng.sample::<f64, _>(StandardNormal));
                    takes.push(Take {
                        scale,
                        index,
                        seed: take_seed,
                        profile: VoiceProfile {
                            fundamental_hz: f0,
                            n_harmonics: (20_000.0 / f0).floor() as usize,
                            harmonic_decay: decay,
                            formant_bumps: bumps.clone(),
                            jitter,
                            noise_floor,
                            breathiness,
                            gender,
                            choral,
                        },
                    });
                }
            }
            subjects.push(Subject { id, gender, choral, takes });
        }
    }
    Ok(Corpus { spec: spec.clone(), seed: corpus_seed, subjects })
}
