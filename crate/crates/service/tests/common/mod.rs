#![allow(dead_code)]

use std::sync::OnceLock;

use voxclass::eval::AnalyzedCorpus;
use voxclass::gda::{ClassModel, Task};
use voxclass::model_io::ModelFile;
use voxclass::riskopt::{select_frequencies, SelectConfig};
use voxclass::spectra::SpectralConfig;
use voxclass::synth::{generate_corpus, Corpus, CorpusSpec};
use voxclass::wav::quantize;
use voxclass_service::ModelRegistry;

pub struct Fixture {
    pub corpus: Corpus,
    pub gender: ModelFile<f64>,
    pub choral: ModelFile<f64>,
}

fn train(corpus: &AnalyzedCorpus<f64>, task: Task) -> ModelFile<f64> {
    let pieces: Vec<_> = corpus
        .recordings
        .iter()
        .flat_map(|r| r.spectra.iter().map(move |s| (s, r.label(task))))
        .collect();
    let cfg = SelectConfig { d: 2, mc_samples: 500, stride: 8, restarts: 1, ..SelectConfig::default() };
    let sel = select_frequencies(&pieces, &cfg).unwrap();
    let model = ClassModel::fit_spectra(&pieces, sel.frequencies, corpus.spectral, cfg.epsilon).unwrap();
    ModelFile { model, training: format!("test-{task}"), comments: vec![] }
}

pub fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let corpus = generate_corpus(&CorpusSpec::with_counts([5, 5, 5, 5]), 11).unwrap();
        let analyzed = AnalyzedCorpus::from_corpus(&corpus, &SpectralConfig::default()).unwrap();
        Fixture { gender: train(&analyzed, Task::Gender), choral: train(&analyzed, Task::Choral), corpus }
    })
}

pub fn registry() -> ModelRegistry {
    let f = fixture();
    ModelRegistry::new(vec![f.gender.clone(), f.choral.clone()]).unwrap()
}

/// 16-bit chunks of `chunk` samples from one take of subject `id`.
pub fn take_chunks(id: &str, scale: usize, chunk: usize) -> Vec<Vec<i16>> {
    let f = fixture();
    let subject = f.corpus.subjects.iter().find(|s| s.id == id).unwrap();
    let take = subject.takes.iter().find(|t| t.scale == scale).unwrap();
    let signal = f.corpus.render(take).unwrap();
    signal
        .samples()
        .chunks_exact(chunk)
        .map(|c| c.iter().map(|&x| quantize(x)).collect())
        .collect()
}
