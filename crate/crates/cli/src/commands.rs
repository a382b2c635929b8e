use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use voxclass::eval::{self, AnalyzedCorpus, EvalConfig, FoldSpec, PerformanceReport, SubjectInfo};
use voxclass::gda::{self, ClassLabel, ClassModel, Task};
use voxclass::manifest::Manifest;
use voxclass::model_io::ModelFile;
use voxclass::riskopt::{self, SelectConfig};
use voxclass::spectra::{self, LogSpectrum, SpectralConfig};
use voxclass::synth::{self, CorpusSpec};
use voxclass::{seed, wav, Error};

use crate::{
    check_input, check_output, parse_dims, parse_durations, parse_modes, parse_orderings, CorrelateArgs,
    EvaluateArgs, Failure, SelectArgs, TrainArgs,
};

/// Progress goes to stderr when `VOXCLASS_LOG` is set to anything but `off`.
fn log(msg: impl AsRef<str>) {
    static ON: OnceLock<bool> = OnceLock::new();
    if *ON.get_or_init(|| std::env::var("VOXCLASS_LOG").is_ok_and(|v| !v.is_empty() && v != "off")) {
        eprintln!("{}", msg.as_ref());
    }
}

fn header(command: &str) -> String {
    format!("voxclass {} {command}", env!("CARGO_PKG_VERSION"))
}

fn select_config(a: &SelectArgs, d: usize) -> SelectConfig {
    SelectConfig {
        d,
        mc_samples: a.mc_samples,
        seed: a.seed,
        tol: a.tol,
        max_passes: a.max_passes,
        restarts: a.restarts,
        stride: a.stride as usize,
        mode: a.risk,
        epsilon: a.epsilon,
        ..SelectConfig::default()
    }
}

fn load_corpus(manifest: &Path, spectral: &SpectralConfig) -> Result<AnalyzedCorpus<f64>, Failure> {
    let m = Manifest::read(manifest)?;
    log(format!("analysing {} takes from {}", m.records.len(), manifest.display()));
    Ok(AnalyzedCorpus::from_manifest(&m, spectral)?)
}

pub fn synth(out: &Path, seed: u64, counts: &str) -> Result<u8, Failure> {
    let counts: Vec<usize> = counts
        .split(',')
        .map(|c| c.trim().parse().map_err(|_| Failure::Usage(format!("bad --counts `{counts}`"))))
        .collect::<Result<_, _>>()?;
    let counts: [usize; 4] = counts
        .try_into()
        .map_err(|_| Failure::Usage("--counts needs four numbers".into()))?;
    check_output(out)?;
    let spec = CorpusSpec::with_counts(counts);
    let corpus = synth::generate_corpus(&spec, seed)?;
    let manifest = corpus.write(out)?;
    println!(
        "subjects={} takes={} male_singers={} female_singers={} male_non_singers={} female_non_singers={} manifest={}",
        corpus.subjects.len(),
        manifest.records.len(),
        counts[0],
        counts[1],
        counts[2],
        counts[3],
        out.join("manifest.csv").display()
    );
    Ok(0)
}

fn training_set<'a>(corpus: &'a AnalyzedCorpus<f64>, task: Task, population: eval::Population) -> Vec<(&'a LogSpectrum<f64>, ClassLabel)> {
    corpus
        .recordings
        .iter()
        .filter(|r| population.admits(&SubjectInfo { id: String::new(), gender: r.gender, choral: r.choral }))
        .flat_map(|r| r.spectra.iter().map(move |s| (s, r.label(task))))
        .collect()
}

pub fn train(a: &TrainArgs) -> Result<u8, Failure> {
    let d = a.d as usize;
    let freq_path = a.frequencies.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".freq.csv");
        PathBuf::from(p)
    });
    check_input(&a.manifest)?;
    check_output(&a.out)?;
    check_output(&freq_path)?;
    let spectral = SpectralConfig::default();
    let corpus = load_corpus(&a.manifest, &spectral)?;
    let cfg = select_config(&a.select, d);
    let train = training_set(&corpus, a.task, a.select.population);
    log(format!("selecting {d} frequencies for {} from {} pieces", a.task, train.len()));
    let selection = riskopt::select_frequencies(&train, &cfg)?;
    let model = ClassModel::fit_spectra(&train, selection.frequencies.clone(), spectral, cfg.epsilon)?;

    let comments = vec![
        header("train"),
        format!("manifest={} task={} population={}", a.manifest.display(), a.task, a.select.population),
        format!("select {cfg}"),
        format!("spectral {spectral}"),
        format!("risk={:?} initial_risk={:?} passes={}", selection.risk.risk, selection.initial_risk.risk, selection.pass_risks.len()),
    ];
    let training = seed::fingerprint(&format!("{} | {} | {}", corpus.source, comments[1], comments[2]));
    let file = ModelFile { model, training, comments: comments.clone() };
    file.write(&a.out)?;

    let mut csv = Vec::new();
    for c in &comments {
        csv.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    selection.write_csv(&mut csv)?;
    fs::write(&freq_path, csv)?;

    let hz: Vec<String> = selection.frequencies.frequencies_hz().iter().map(|f| format!("{f:.1}")).collect();
    println!(
        "task={} d={d} frequencies_hz={} risk={:.4} model={} frequencies={}",
        a.task,
        hz.join(","),
        selection.risk.risk,
        a.out.display(),
        freq_path.display()
    );
    Ok(0)
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Silence => "silence",
        Error::Io(_) => "io",
        Error::Format(_) | Error::Unsupported(_) => "format",
        Error::Range(_) | Error::Grid(_) | Error::Config(_) => "config",
        _ => "data",
    }
}

pub fn classify(model_path: &Path, wavs: &[PathBuf]) -> Result<u8, Failure> {
    let file = ModelFile::<f64>::read(model_path)?;
    let model = &file.model;
    let mut code = 0u8;
    for path in wavs {
        let result = wav::read_wav::<f64>(path)
            .and_then(|signal| spectra::analyze_take(&signal, &model.spectral))
            .and_then(|pieces| model.classify(&pieces));
        let mut line = format!("file={}", path.display());
        match result {
            Ok(post) => {
                let _ = write!(line, " label={}", gda::map_class(&post).name());
                for (label, p) in post.label_probs() {
                    let _ = write!(line, " P({label})={p:.6}");
                }
            }
            Err(e) => {
                let _ = write!(line, " error={} message=\"{}\"", error_kind(&e), e.to_string().replace('"', "'"));
                if code == 0 {
                    code = crate::exit_code(&e);
                }
            }
        }
        println!("{line}");
    }
    Ok(code)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<u8, Failure> {
    let dims = parse_dims(&a.d)?;
    let modes = parse_modes(&a.mode)?;
    let orderings = a.ordering.as_deref().map(parse_orderings).transpose()?;
    let durations = a.durations.as_deref().map(parse_durations).transpose()?;
    if orderings.is_some() && a.task != Task::Joint {
        return Err(Failure::Usage("--ordering needs --task joint".into()));
    }
    if orderings.is_some() && durations.is_some() {
        return Err(Failure::Usage("--ordering and --durations cannot be combined".into()));
    }
    if a.folds == 0 {
        return Err(Failure::Usage("--folds must be at least 1".into()));
    }
    check_input(&a.manifest)?;
    check_output(&a.out)?;

    let spectral = SpectralConfig::default();
    let corpus = load_corpus(&a.manifest, &spectral)?;
    let mut fold = FoldSpec::standard(a.task, a.select.population, seed::derive(a.select.seed, "folds", 0));
    fold.n_repeats = a.folds;
    let cfg = EvalConfig { select: select_config(&a.select, dims[0]), ..EvalConfig::default() };

    let mut rows: Vec<PerformanceReport> = Vec::new();
    for &d in &dims {
        if let Some(orderings) = &orderings {
            for &o in orderings {
                for &mode in &modes {
                    log(format!("joint D={d} ordering={o} mode={mode}"));
                    let mut r = eval::infer_joint(&corpus, &fold, d, o, mode, &cfg)?;
                    if modes.len() > 1 {
                        r.mode = format!("{o}/{mode}");
                    }
                    rows.push(r);
                }
            }
        } else {
            for &mode in &modes {
                log(format!("{} D={d} mode={mode}", a.task));
                match &durations {
                    Some(ts) => rows.extend(eval::duration_sweep(&corpus, &fold, d, mode, &cfg, ts)?),
                    None => rows.push(eval::cross_validate(&corpus, &fold, d, mode, &cfg)?),
                }
            }
        }
    }

    let mut out = String::new();
    for c in [
        header("evaluate"),
        format!(
            "manifest={} task={} d={} mode={} ordering={} durations={} folds={}",
            a.manifest.display(),
            a.task,
            a.d,
            a.mode,
            a.ordering.as_deref().unwrap_or("-"),
            a.durations.as_deref().unwrap_or("-"),
            a.folds
        ),
        format!("{fold}"),
        format!("select {}", cfg.select),
        format!("spectral {spectral}"),
    ] {
        let _ = writeln!(out, "# {c}");
    }
    if durations.is_some() {
        let _ = writeln!(out, "{},duration", PerformanceReport::CSV_HEADER);
        for r in &rows {
            let _ = writeln!(out, "{},{:?}", r.csv_row(), r.duration.unwrap_or(f64::NAN));
        }
    } else {
        let _ = writeln!(out, "{}", PerformanceReport::CSV_HEADER);
        for r in &rows {
            let _ = writeln!(out, "{}", r.csv_row());
        }
    }
    fs::write(&a.out, &out)?;
    print!("{}", out.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect::<String>());
    Ok(0)
}

pub fn correlate(a: &CorrelateArgs) -> Result<u8, Failure> {
    check_input(&a.manifest)?;
    check_input(&a.scores)?;
    let file = ModelFile::<f64>::read(&a.model)?;
    let model = &file.model;
    let class = model.task().label_named(&a.class).map_err(|e| Failure::Usage(e.to_string()))?;
    let corpus = load_corpus(&a.manifest, &model.spectral)?;
    let posteriors = eval::subject_posteriors(&corpus, model, class.value)?;
    let scores = eval::parse_scores(&fs::read_to_string(&a.scores)?)?;
    let c = eval::correlate_scores(&posteriors, &scores)?;
    println!("n={} pearson={:.6} spearman={:.6}", c.n, c.pearson, c.spearman);
    Ok(0)
}
