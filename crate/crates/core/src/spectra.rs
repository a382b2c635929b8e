//! From raw audio to unit-mass spectra on a log-frequency grid.
//!
//! A take is cut into non-overlapping pieces of `delta` seconds, the loudest
//! pieces are kept, and each one becomes a [`PowerSpectrum`] binned on a
//! linear grid whose bin `j` is centred on `f_min + j * bin_width`. The
//! spectrum is then resampled at points uniformly spaced in `log10(Hz)` by
//! linear interpolation of `log10(I)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::Scalar;

/// Relative floor applied to empty bins before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal<T> {
    samples: Vec<T>,
    sample_rate: f64,
}

impl<T: Scalar> AudioSignal<T> {
    pub fn new(samples: Vec<T>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Range(format!("sample rate {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::Range(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// The same signal with every sample multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * k).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment<T> {
    pub samples: Vec<T>,
    /// Index of the first sample within the source signal.
    pub start: usize,
    pub sample_rate: f64,
    pub rms: T,
}

impl<T: Scalar> Segment<T> {
    pub fn new(samples: Vec<T>, start: usize, sample_rate: f64) -> Self {
        let rms = rms(&samples);
        Self { samples, start, sample_rate, rms }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

pub fn rms<T: Scalar>(samples: &[T]) -> T {
    if samples.is_empty() {
        return T::zero();
    }
    let sum: T = samples.iter().map(|&s| s * s).sum();
    (sum / T::of(samples.len() as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    /// Squared FFT magnitude.
    Power,
    /// FFT magnitude.
    Amplitude,
}

/// Whether classifier features are log intensities or the intensities
/// themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureScale {
    Log,
    Raw,
}

macro_rules! keyword_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Parse(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

keyword_enum!(Window { Hann => "hann", Rectangular => "rectangular" });
keyword_enum!(SpectrumKind { Power => "power", Amplitude => "amplitude" });
keyword_enum!(FeatureScale { Log => "log", Raw => "raw" });

/// Points uniformly spaced in `log10(Hz)`, both ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    pub n_points: usize,
    pub log_f_lo: f64,
    pub log_f_hi: f64,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self { n_points: 2000, log_f_lo: 50f64.log10(), log_f_hi: 20_000f64.log10() }
    }
}

impl LogGrid {
    pub fn new(n_points: usize, log_f_lo: f64, log_f_hi: f64) -> Result<Self> {
        if n_points < 2 || !(log_f_lo < log_f_hi) || !log_f_lo.is_finite() || !log_f_hi.is_finite() {
            return Err(Error::Range(format!(
                "log grid of {n_points} points over [{log_f_lo}, {log_f_hi}]"
            )));
        }
        Ok(Self { n_points, log_f_lo, log_f_hi })
    }

    pub fn step(&self) -> f64 {
        (self.log_f_hi - self.log_f_lo) / (self.n_points - 1) as f64
    }

    pub fn log_frequency(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.log_f_hi
        } else {
            self.log_f_lo + i as f64 * self.step()
        }
    }

    pub fn frequency_hz(&self, i: usize) -> f64 {
        10f64.powf(self.log_frequency(i))
    }

    /// Grid index whose frequency is `hz`, within a relative tolerance of
    /// 1e-9 of the grid step.
    pub fn index_of(&self, hz: f64) -> Option<usize> {
        if !(hz > 0.0) {
            return None;
        }
        let pos = (hz.log10() - self.log_f_lo) / self.step();
        let i = pos.round();
        if (pos - i).abs() > 1e-6 || i < 0.0 || i >= self.n_points as f64 {
            return None;
        }
        Some(i as usize)
    }

    /// Nearest grid index to `hz`, clamped to the grid.
    pub fn nearest_index(&self, hz: f64) -> usize {
        let pos = (hz.max(f64::MIN_POSITIVE).log10() - self.log_f_lo) / self.step();
        pos.round().clamp(0.0, (self.n_points - 1) as f64) as usize
    }
}

/// Every knob of the audio-to-spectrum pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Piece length in seconds.
    pub delta: f64,
    /// Pieces kept per take.
    pub top_n: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub bin_width: f64,
    pub window: Window,
    pub kind: SpectrumKind,
    pub grid: LogGrid,
    pub features: FeatureScale,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            top_n: 10,
            f_min: 0.0,
            f_max: 20_000.0,
            bin_width: 10.0,
            window: Window::Hann,
            kind: SpectrumKind::Power,
            grid: LogGrid::default(),
            features: FeatureScale::Log,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta {} must be positive", self.delta)));
        }
        if self.top_n == 0 {
            return Err(Error::Config("top_n must be at least 1".into()));
        }
        bin_count(self.f_min, self.f_max, self.bin_width)?;
        check_grid_support(&self.grid, self.f_min, self.f_max, self.bin_width)
    }

    pub fn n_bins(&self) -> usize {
        bin_count(self.f_min, self.f_max, self.bin_width).unwrap_or(0)
    }
}

impl fmt::Display for SpectralConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "delta={:?} top_n={} f_min={:?} f_max={:?} bin_width={:?} window={} kind={} \
             log_points={} log_f_lo={:?} log_f_hi={:?} features={}",
            self.delta,
            self.top_n,
            self.f_min,
            self.f_max,
            self.bin_width,
            self.window,
            self.kind,
            self.grid.n_points,
            self.grid.log_f_lo,
            self.grid.log_f_hi,
            self.features
        )
    }
}

impl FromStr for SpectralConfig {
    type Err = Error;

    /// Parses the `key=value` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let mut cfg = SpectralConfig::default();
        for field in s.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("spectral field `{field}`")))?;
            let num = || -> Result<f64> {
                value.parse().map_err(|_| Error::Parse(format!("{key}={value}")))
            };
            match key {
                "delta" => cfg.delta = num()?,
                "top_n" => cfg.top_n = num()? as usize,
                "f_min" => cfg.f_min = num()?,
                "f_max" => cfg.f_max = num()?,
                "bin_width" => cfg.bin_width = num()?,
                "window" => cfg.window = value.parse()?,
                "kind" => cfg.kind = value.parse()?,
                "log_points" => cfg.grid.n_points = num()? as usize,
                "log_f_lo" => cfg.grid.log_f_lo = num()?,
                "log_f_hi" => cfg.grid.log_f_hi = num()?,
                "features" => cfg.features = value.parse()?,
                other => return Err(Error::Parse(format!("unknown spectral key `{other}`"))),
            }
        }
        Ok(cfg)
    }
}

fn bin_count(f_min: f64, f_max: f64, bin_width: f64) -> Result<usize> {
    if !(bin_width > 0.0) || !(f_min >= 0.0) || !(f_min < f_max) {
        return Err(Error::Range(format!(
            "frequency range [{f_min}, {f_max}) with bin width {bin_width}"
        )));
    }
    let n = (f_max - f_min) / bin_width;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::Range(format!(
            "range {f_min}..{f_max} Hz is not a whole number of {bin_width} Hz bins"
        )));
    }
    Ok(rounded as usize)
}

fn check_grid_support(grid: &LogGrid, f_min: f64, f_max: f64, bin_width: f64) -> Result<()> {
    LogGrid::new(grid.n_points, grid.log_f_lo, grid.log_f_hi)?;
    let lo = 10f64.powf(grid.log_f_lo);
    if lo < (f_min + bin_width) * (1.0 - 1e-12) {
        return Err(Error::Range(format!(
            "log grid starts at {lo} Hz, below the first non-zero bin at {} Hz",
            f_min + bin_width
        )));
    }
    if grid.log_f_hi > f_max.log10() + 1e-12 {
        return Err(Error::Range(format!(
            "log grid ends at {} Hz, above f_max {f_max} Hz",
            10f64.powf(grid.log_f_hi)
        )));
    }
    Ok(())
}

/// Un-normalized spectrum: bin `j` is centred on `f_min + j * bin_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSpectrum<T> {
    pub intensities: Vec<T>,
    pub bin_width: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl<T: Scalar> RawSpectrum<T> {
    pub fn bin_frequency(&self, j: usize) -> f64 {
        self.f_min + j as f64 * self.bin_width
    }

    pub fn is_silent(&self) -> bool {
        self.intensities.iter().all(|&v| v == T::zero())
    }
}

/// Spectrum with unit mass: `sum(intensities) * bin_width == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum<T> {
    pub intensities: Vec<T>,
    pub bin_width: f64,
    pub f_min: f64,
    pub f_max: f64,
}

impl<T: Scalar> PowerSpectrum<T> {
    pub fn bin_frequency(&self, j: usize) -> f64 {
        self.f_min + j as f64 * self.bin_width
    }

    pub fn mass(&self) -> T {
        self.intensities.iter().copied().sum::<T>() * T::of(self.bin_width)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "frequency_hz,intensity")?;
        for (j, v) in self.intensities.iter().enumerate() {
            writeln!(w, "{},{:e}", self.bin_frequency(j), v.as_f64())?;
        }
        Ok(())
    }
}

/// Log intensities sampled on a [`LogGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogSpectrum<T> {
    pub grid: LogGrid,
    pub log_intensities: Vec<T>,
}

impl<T: Scalar> LogSpectrum<T> {
    pub fn n_points(&self) -> usize {
        self.log_intensities.len()
    }

    pub fn log_frequencies(&self) -> Vec<f64> {
        (0..self.grid.n_points).map(|i| self.grid.log_frequency(i)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "frequency_hz,intensity")?;
        for (i, v) in self.log_intensities.iter().enumerate() {
            writeln!(w, "{},{:e}", self.grid.frequency_hz(i), 10f64.powf(v.as_f64()))?;
        }
        Ok(())
    }
}

/// Cuts `signal` into consecutive, non-overlapping pieces of `delta`
/// seconds; a shorter tail is dropped.
pub fn segment<T: Scalar>(signal: &AudioSignal<T>, delta: f64) -> Result<Vec<Segment<T>>> {
    if !(delta > 0.0) {
        return Err(Error::Config(format!("delta {delta} must be positive")));
    }
    let len = (delta * signal.sample_rate).round() as usize;
    if len == 0 || signal.samples.len() < len {
        return Err(Error::InsufficientAudio(format!(
            "{} samples, need at least {len} for one {delta} s piece",
            signal.samples.len()
        )));
    }
    Ok(signal
        .samples
        .chunks_exact(len)
        .enumerate()
        .map(|(i, chunk)| Segment::new(chunk.to_vec(), i * len, signal.sample_rate))
        .collect())
}

/// The `n` pieces with the largest RMS, in temporal order. Equal RMS goes to
/// the earlier piece. Fewer than `n` pieces are returned as they are.
pub fn select_top_segments<T: Scalar>(segments: &[Segment<T>], n: usize) -> Result<Vec<Segment<T>>> {
    if segments.is_empty() {
        return Err(Error::InsufficientAudio("no segments".into()));
    }
    if n == 0 {
        return Err(Error::Config("must select at least one segment".into()));
    }
    let mut order: Vec<usize> = (0..segments.len()).collect();
    order.sort_by(|&a, &b| {
        segments[b]
            .rms
            .partial_cmp(&segments[a].rms)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(segments[a].start.cmp(&segments[b].start))
    });
    order.truncate(n);
    order.sort_by_key(|&i| segments[i].start);
    Ok(order.into_iter().map(|i| segments[i].clone()).collect())
}

/// Windowed FFT for a fixed piece length, reusable across pieces.
pub struct SpectrumAnalyzer<T: Scalar> {
    fft: Arc<dyn Fft<T>>,
    window: Vec<T>,
    kind: SpectrumKind,
}

impl<T: Scalar> SpectrumAnalyzer<T> {
    pub fn new(len: usize, window: Window, kind: SpectrumKind) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        let window = match window {
            Window::Rectangular => vec![T::one(); len],
            // periodic Hann
            Window::Hann => (0..len)
                .map(|i| {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / len as f64;
                    T::of(0.5 - 0.5 * x.cos())
                })
                .collect(),
        };
        Self { fft, window, kind }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    /// Spectrum of `samples` accumulated into `bin_width` bins over
    /// `[f_min, f_max)`. Every FFT bin whose centre falls inside a grid bin
    /// adds its value there.
    pub fn raw_spectrum(
        &self,
        samples: &[T],
        sample_rate: f64,
        f_min: f64,
        f_max: f64,
        bin_width: f64,
    ) -> Result<RawSpectrum<T>> {
        if samples.len() != self.len() {
            return Err(Error::Config(format!(
                "analyzer built for {} samples, got {}",
                self.len(),
                samples.len()
            )));
        }
        if samples.is_empty() {
            return Err(Error::InsufficientAudio("empty segment".into()));
        }
        if f_max > sample_rate / 2.0 * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "f_max {f_max} Hz above the Nyquist frequency {} Hz",
                sample_rate / 2.0
            )));
        }
        let n_bins = bin_count(f_min, f_max, bin_width)?;
        let mut buf: Vec<Complex<T>> = samples
            .iter()
            .zip(&self.window)
            .map(|(&s, &w)| Complex::new(s * w, T::zero()))
            .collect();
        self.fft.process(&mut buf);

        let n = samples.len();
        let mut intensities = vec![T::zero(); n_bins];
        for (k, c) in buf.iter().enumerate().take(n / 2 + 1) {
            let f = k as f64 * sample_rate / n as f64;
            let pos = (f - f_min) / bin_width + 0.5;
            if pos < 0.0 {
                continue;
            }
            let j = pos.floor() as usize;
            if j >= n_bins {
                break;
            }
            intensities[j] = intensities[j]
                + match self.kind {
                    SpectrumKind::Power => c.norm_sqr(),
                    SpectrumKind::Amplitude => c.norm(),
                };
        }
        Ok(RawSpectrum { intensities, bin_width, f_min, f_max })
    }
}

/// Hann-windowed power spectrum of one piece.
pub fn power_spectrum<T: Scalar>(
    segment: &Segment<T>,
    f_min: f64,
    f_max: f64,
    bin_width: f64,
) -> Result<RawSpectrum<T>> {
    SpectrumAnalyzer::new(segment.samples.len(), Window::Hann, SpectrumKind::Power).raw_spectrum(
        &segment.samples,
        segment.sample_rate,
        f_min,
        f_max,
        bin_width,
    )
}

/// Divides by the spectral integral so the result has unit mass.
pub fn normalize<T: Scalar>(raw: &RawSpectrum<T>) -> Result<PowerSpectrum<T>> {
    let total: T = raw.intensities.iter().copied().sum::<T>() * T::of(raw.bin_width);
    if !(total > T::zero()) || !total.is_finite() {
        return Err(Error::Silence);
    }
    Ok(PowerSpectrum {
        intensities: raw.intensities.iter().map(|&v| v / total).collect(),
        bin_width: raw.bin_width,
        f_min: raw.f_min,
        f_max: raw.f_max,
    })
}

/// Floored `log10` of every bin.
fn floored_logs<T: Scalar>(spec: &PowerSpectrum<T>) -> Result<Vec<T>> {
    let max = spec.intensities.iter().copied().fold(T::zero(), T::max);
    if !(max > T::zero()) {
        return Err(Error::Silence);
    }
    let floor = max * T::of(LOG_FLOOR);
    Ok(spec.intensities.iter().map(|&v| v.max(floor).log10()).collect())
}

/// Linear interpolation of the log values between the two bin centres
/// bracketing `hz`. Above the last centre the last value is held.
fn interpolate<T: Scalar>(logs: &[T], f_min: f64, bin_width: f64, hz: f64) -> T {
    let pos = (hz - f_min) / bin_width;
    let last = logs.len() - 1;
    if pos >= last as f64 {
        return logs[last];
    }
    let j = pos.floor().max(0.0) as usize;
    let t = pos - j as f64;
    if t == 0.0 {
        return logs[j];
    }
    let t = T::of(t);
    logs[j] * (T::one() - t) + logs[j + 1] * t
}

/// Resamples `spec` on `grid`.
pub fn log_resample<T: Scalar>(spec: &PowerSpectrum<T>, grid: &LogGrid) -> Result<LogSpectrum<T>> {
    check_grid_support(grid, spec.f_min, spec.f_max, spec.bin_width)?;
    let logs = floored_logs(spec)?;
    let log_intensities = (0..grid.n_points)
        .map(|i| interpolate(&logs, spec.f_min, spec.bin_width, grid.frequency_hz(i)))
        .collect();
    Ok(LogSpectrum { grid: *grid, log_intensities })
}

/// Log intensity of `spec` at an arbitrary frequency inside its support.
pub fn log_intensity_at<T: Scalar>(spec: &PowerSpectrum<T>, hz: f64) -> Result<T> {
    if hz < spec.f_min + spec.bin_width || hz > spec.f_max {
        return Err(Error::Range(format!("{hz} Hz outside the spectrum support")));
    }
    let logs = floored_logs(spec)?;
    Ok(interpolate(&logs, spec.f_min, spec.bin_width, hz))
}

/// Runs the full per-take pipeline: segment, keep the `top_n` loudest pieces,
/// and return their log spectra in temporal order. Silent pieces are skipped;
/// a take with no audible piece is a [`Error::Silence`].
pub fn analyze_take<T: Scalar>(signal: &AudioSignal<T>, cfg: &SpectralConfig) -> Result<Vec<LogSpectrum<T>>> {
    cfg.validate()?;
    let segments = segment(signal, cfg.delta)?;
    let top = select_top_segments(&segments, cfg.top_n)?;
    let analyzer = SpectrumAnalyzer::new(top[0].samples.len(), cfg.window, cfg.kind);
    let mut out = Vec::with_capacity(top.len());
    for seg in &top {
        match analyze_samples(&analyzer, &seg.samples, signal.sample_rate, cfg) {
            Ok(spec) => out.push(spec),
            Err(Error::Silence) => continue,
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(Error::Silence);
    }
    Ok(out)
}

/// Spectrum, normalization and log resampling of a single piece.
pub fn analyze_samples<T: Scalar>(
    analyzer: &SpectrumAnalyzer<T>,
    samples: &[T],
    sample_rate: f64,
    cfg: &SpectralConfig,
) -> Result<LogSpectrum<T>> {
    let raw = analyzer.raw_spectrum(samples, sample_rate, cfg.f_min, cfg.f_max, cfg.bin_width)?;
    if raw.is_silent() {
        return Err(Error::Silence);
    }
    let spec = normalize(&raw)?;
    log_resample(&spec, &cfg.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sine(freq: f64, rate: f64, n: usize, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin())
            .collect()
    }

    fn signal(samples: Vec<f64>, rate: f64) -> AudioSignal<f64> {
        AudioSignal::new(samples, rate).unwrap()
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(AudioSignal::new(vec![0.0f64], 0.0).is_err());
        assert!(AudioSignal::new(vec![f64::NAN], 48_000.0).is_err());
    }

    #[test]
    fn segments_of_a_one_and_a_half_second_take() {
        let sig = signal(vec![0.1; 72_000], 48_000.0);
        let segs = segment(&sig, 0.1).unwrap();
        assert_eq!(segs.len(), 15);
        assert!(segs.iter().all(|s| s.samples.len() == 4_800));
        assert_relative_eq!(segs[0].duration(), 0.1);
    }

    #[test]
    fn remainder_is_dropped() {
        let sig = signal(vec![0.1; 12_000], 48_000.0);
        let segs = segment(&sig, 0.1).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[1].start, 4_800);
    }

    #[test]
    fn silence_has_zero_rms() {
        let segs = segment(&signal(vec![0.0; 9_600], 48_000.0), 0.1).unwrap();
        assert!(segs.iter().all(|s| s.rms == 0.0));
    }

    #[test]
    fn too_short_for_one_piece() {
        let err = segment(&signal(vec![0.0; 100], 48_000.0), 0.1).unwrap_err();
        assert!(matches!(err, Error::InsufficientAudio(_)));
    }

    fn segs_with_rms(levels: &[f64]) -> Vec<Segment<f64>> {
        levels
            .iter()
            .enumerate()
            .map(|(i, &l)| Segment::new(vec![l; 4], i * 4, 40.0))
            .collect()
    }

    #[test]
    fn top_segments_by_rms_in_time_order() {
        let levels: Vec<f64> = (0..15).map(|i| ((i * 7) % 15) as f64).collect();
        let top = select_top_segments(&segs_with_rms(&levels), 10).unwrap();
        assert_eq!(top.len(), 10);
        assert!(top.iter().all(|s| s.rms >= 5.0));
        assert!(top.windows(2).all(|w| w[0].start < w[1].start));
    }

    #[test]
    fn fewer_segments_than_requested() {
        let top = select_top_segments(&segs_with_rms(&[1.0, 2.0, 3.0, 4.0, 5.0]), 10).unwrap();
        assert_eq!(top.len(), 5);
    }

    #[test]
    fn rms_ties_prefer_earlier() {
        let top = select_top_segments(&segs_with_rms(&[1.0, 2.0, 2.0, 2.0]), 2).unwrap();
        let starts: Vec<usize> = top.iter().map(|s| s.start).collect();
        assert_eq!(starts, vec![4, 8]);
    }

    #[test]
    fn empty_selection_input() {
        let err = select_top_segments::<f64>(&[], 3).unwrap_err();
        assert!(matches!(err, Error::InsufficientAudio(_)));
    }

    #[test]
    fn default_grid_has_2000_bins() {
        let seg = Segment::new(sine(440.0, 48_000.0, 4_800, 0.5), 0, 48_000.0);
        let raw = power_spectrum(&seg, 0.0, 20_000.0, 10.0).unwrap();
        assert_eq!(raw.intensities.len(), 2_000);
        assert!(raw.intensities.iter().all(|&v| v >= 0.0));
    }

    /// Direct DFT sum at every multiple of 10 Hz; the oracle for the FFT path.
    fn direct_power(samples: &[f64], rate: f64, bins: usize) -> Vec<f64> {
        let n = samples.len();
        let w: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        (0..bins)
            .map(|j| {
                let f = j as f64 * 10.0;
                let (mut re, mut im) = (0.0, 0.0);
                for (i, (&s, &wi)) in samples.iter().zip(&w).enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * f * i as f64 / rate;
                    re += s * wi * ph.cos();
                    im += s * wi * ph.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn sinusoid_peak_matches_direct_dft() {
        let samples = sine(440.0, 48_000.0, 4_800, 0.7);
        let seg = Segment::new(samples.clone(), 0, 48_000.0);
        let raw = power_spectrum(&seg, 0.0, 20_000.0, 10.0).unwrap();
        let oracle = direct_power(&samples, 48_000.0, 2_000);
        let argmax = |v: &[f64]| {
            v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        assert_eq!(argmax(&raw.intensities), argmax(&oracle));
        assert_relative_eq!(raw.bin_frequency(argmax(&raw.intensities)), 440.0);
        let peak = oracle[44];
        for (a, b) in raw.intensities.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * peak, "{a} vs {b}");
        }
    }

    #[test]
    fn f_max_above_nyquist() {
        let seg = Segment::new(vec![0.1; 800], 0, 8_000.0);
        let err = power_spectrum(&seg, 0.0, 20_000.0, 10.0).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
    }

    #[test]
    fn silent_segment_gives_zero_spectrum_then_silence() {
        let seg = Segment::new(vec![0.0; 4_800], 0, 48_000.0);
        let raw = power_spectrum(&seg, 0.0, 20_000.0, 10.0).unwrap();
        assert!(raw.is_silent());
        assert!(matches!(normalize(&raw), Err(Error::Silence)));
    }

    fn raw(intensities: Vec<f64>, bin_width: f64) -> RawSpectrum<f64> {
        let f_max = intensities.len() as f64 * bin_width;
        RawSpectrum { intensities, bin_width, f_min: 0.0, f_max }
    }

    #[test]
    fn normalize_constant_spectrum() {
        let spec = normalize(&raw(vec![3.0; 2_000], 10.0)).unwrap();
        for &v in &spec.intensities {
            assert_relative_eq!(v, 1.0 / 20_000.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn normalize_two_bins() {
        let spec = normalize(&raw(vec![3.0, 1.0], 1.0)).unwrap();
        assert_eq!(spec.intensities, vec![0.75, 0.25]);
    }

    #[test]
    fn grid_point_on_bin_centre_is_exact() {
        let values: Vec<f64> = (0..100).map(|j| 1.0 + (j as f64 * 0.37).sin().abs()).collect();
        let spec = normalize(&raw(values, 10.0)).unwrap();
        for j in 1..99 {
            let got = log_intensity_at(&spec, j as f64 * 10.0).unwrap();
            assert_eq!(got, spec.intensities[j].log10());
        }
    }

    #[test]
    fn power_law_is_a_straight_line_in_log_log() {
        // I(f) = 1/f sampled on bin centres; between centres the linear
        // interpolation of log I deviates from the power law, so the slope is
        // checked on grid points that land on bin centres.
        let values: Vec<f64> = (0..2_000).map(|j| if j == 0 { 0.0 } else { 1.0 / (j as f64 * 10.0) }).collect();
        let spec = normalize(&raw(values, 10.0)).unwrap();
        let grid = LogGrid::new(3, 2.0, 4.0).unwrap();
        let ls = log_resample(&spec, &grid).unwrap();
        let slope = |a: usize, b: usize| {
            (ls.log_intensities[b] - ls.log_intensities[a]) / (grid.log_frequency(b) - grid.log_frequency(a))
        };
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            assert_relative_eq!(slope(a, b), -1.0, max_relative = 1e-6);
        }
        // direct evaluation: log10(c / f) with c the normalization constant
        let c = spec.intensities[10] * 100.0;
        for i in 0..3 {
            let f = grid.frequency_hz(i);
            assert_relative_eq!(ls.log_intensities[i], (c / f).log10(), max_relative = 1e-6);
        }
    }

    #[test]
    fn zero_bins_are_floored() {
        let mut values = vec![1.0; 200];
        values[50] = 0.0;
        let spec = normalize(&raw(values, 10.0)).unwrap();
        let got = log_intensity_at(&spec, 500.0).unwrap();
        assert!(got.is_finite());
        assert_relative_eq!(got, (spec.intensities[0] * LOG_FLOOR).log10(), max_relative = 1e-12);
    }

    #[test]
    fn grid_bounds_are_checked() {
        let spec = normalize(&raw(vec![1.0; 2_000], 10.0)).unwrap();
        let below = LogGrid::new(10, 0.5, 3.0).unwrap();
        assert!(matches!(log_resample(&spec, &below), Err(Error::Range(_))));
        let above = LogGrid::new(10, 2.0, 4.5).unwrap();
        assert!(matches!(log_resample(&spec, &above), Err(Error::Range(_))));
        let ok = log_resample(&spec, &LogGrid::default()).unwrap();
        assert_eq!(ok.n_points(), 2_000);
        let lf = ok.log_frequencies();
        let step = lf[1] - lf[0];
        assert!(lf.windows(2).all(|w| (w[1] - w[0] - step).abs() < 1e-12));
    }

    #[test]
    fn grid_index_lookup() {
        let g = LogGrid::default();
        for i in [0, 1, 777, 1_999] {
            assert_eq!(g.index_of(g.frequency_hz(i)), Some(i));
            assert_eq!(g.nearest_index(g.frequency_hz(i) * 1.0001), i);
        }
        assert_eq!(g.index_of(g.frequency_hz(10) * 1.0002), None);
        assert_eq!(g.index_of(10.0), None);
    }

    #[test]
    fn config_round_trips_through_text() {
        let mut cfg = SpectralConfig::default();
        cfg.window = Window::Rectangular;
        cfg.features = FeatureScale::Raw;
        cfg.grid.n_points = 123;
        let back: SpectralConfig = cfg.to_string().parse().unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn take_pipeline_yields_top_n_spectra() {
        let mut samples = sine(330.0, 48_000.0, 72_000, 0.5);
        for s in samples.iter_mut().take(9_600) {
            *s = 0.0;
        }
        let specs = analyze_take(&signal(samples, 48_000.0), &SpectralConfig::default()).unwrap();
        assert_eq!(specs.len(), 10);
        let silent = analyze_take(&signal(vec![0.0; 72_000], 48_000.0), &SpectralConfig::default());
        assert!(matches!(silent, Err(Error::Silence)));
    }

    #[test]
    fn works_in_single_precision() {
        let samples: Vec<f32> = sine(440.0, 48_000.0, 4_800, 0.5).into_iter().map(|x| x as f32).collect();
        let seg = Segment::new(samples, 0, 48_000.0);
        let spec = normalize(&power_spectrum(&seg, 0.0, 20_000.0, 10.0).unwrap()).unwrap();
        assert!((spec.mass() - 1.0).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn amplitude_scaling_does_not_change_the_spectrum(
            k in 1e-3f64..1e3,
            f in 60.0f64..5_000.0,
            noise_seed in 0u64..1_000,
        ) {
            use rand::Rng;
            let mut rng = crate::seed::rng(noise_seed);
            let base: Vec<f64> = sine(f, 48_000.0, 4_800, 0.3)
                .into_iter()
                .map(|s| s + 0.01 * rng.random::<f64>())
                .collect();
            let a = Segment::new(base.clone(), 0, 48_000.0);
            let b = Segment::new(base.iter().map(|s| s * k).collect(), 0, 48_000.0);
            let na = normalize(&power_spectrum(&a, 0.0, 20_000.0, 10.0).unwrap()).unwrap();
            let nb = normalize(&power_spectrum(&b, 0.0, 20_000.0, 10.0).unwrap()).unwrap();
            for (x, y) in na.intensities.iter().zip(&nb.intensities) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }

        #[test]
        fn every_spectrum_has_unit_mass(values in prop::collection::vec(0.0f64..1e6, 2..400), width in 0.5f64..50.0) {
            prop_assume!(values.iter().any(|&v| v > 0.0));
            let spec = normalize(&raw(values, width)).unwrap();
            prop_assert!((spec.mass() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn segments_partition_the_signal(len in 1usize..5_000, rate in prop::sample::select(vec![8_000.0, 16_000.0, 48_000.0])) {
            let samples: Vec<f64> = (0..len).map(|i| (i as f64 * 0.01).sin()).collect();
            let sig = signal(samples.clone(), rate);
            match segment(&sig, 0.01) {
                Ok(segs) => {
                    let joined: Vec<f64> = segs.iter().flat_map(|s| s.samples.iter().copied()).collect();
                    prop_assert_eq!(&joined[..], &samples[..joined.len()]);
                    let seg_len = (0.01 * rate) as usize;
                    prop_assert!(samples.len() - joined.len() < seg_len);
                }
                Err(Error::InsufficientAudio(_)) => prop_assert!(len < (0.01 * rate) as usize),
                Err(e) => prop_assert!(false, "{e:?}"),
            }
        }

        #[test]
        fn top_selection_ignores_input_order(levels in prop::collection::vec(0u8..6, 1..20), n in 1usize..12, seed in 0u64..100) {
            use rand::seq::SliceRandom;
            let segs = segs_with_rms(&levels.iter().map(|&l| l as f64).collect::<Vec<_>>());
            let mut shuffled = segs.clone();
            shuffled.shuffle(&mut crate::seed::rng(seed));
            let a = select_top_segments(&segs, n).unwrap();
            let b = select_top_segments(&shuffled, n).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
