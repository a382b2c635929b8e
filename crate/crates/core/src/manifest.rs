//! Corpus manifests: one CSV record per take.
//!
//! ```text
//! # voxclass-manifest 1
//! # generator=voxclass-synth/1 seed=7
//! subject_id,gender,choral,scale,path,seed
//! MS01,M,S,do,MS01/do.wav,1234567
//! ```
//!
//! The first line carries the format version. Further `#` lines are free
//! provenance. `path` is relative to the manifest's directory unless
//! absolute; `seed` may be empty for real recordings.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gda::Task;
use crate::synth::{Choral, Gender};

pub const MANIFEST_VERSION: u32 = 1;
const MAGIC: &str = "# voxclass-manifest";
const HEADER: [&str; 6] = ["subject_id", "gender", "choral", "scale", "path", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub subject_id: String,
    pub gender: Gender,
    pub choral: Choral,
    pub scale: usize,
    pub path: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub provenance: Vec<String>,
    pub records: Vec<ManifestRecord>,
    /// Directory relative paths are resolved against.
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines.next().unwrap_or("");
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::Format(format!("not a manifest (first line `{first}`)")))?;
        if version != MANIFEST_VERSION {
            return Err(Error::Format(format!("manifest version {version} is not supported")));
        }
        let provenance = text
            .lines()
            .skip(1)
            .filter_map(|l| l.strip_prefix('#'))
            .map(|l| l.trim().to_string())
            .collect();

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(csv_error)?.clone();
        if header.iter().ne(HEADER) {
            return Err(Error::Format(format!("manifest header must be `{}`", HEADER.join(","))));
        }
        let mut records = Vec::new();
        let mut subjects: BTreeMap<String, (Gender, Choral)> = BTreeMap::new();
        for (line, row) in reader.records().enumerate() {
            let row = row.map_err(csv_error)?;
            let at = |e: Error| Error::Format(format!("manifest record {}: {e}", line + 1));
            let subject_id = row[0].to_string();
            if subject_id.is_empty() {
                return Err(at(Error::Parse("empty subject id".into())));
            }
            let gender: Gender = row[1].parse().map_err(at)?;
            let choral: Choral = row[2].parse().map_err(at)?;
            let scale = Task::Scale.label_named(&row[3]).map_err(at)?.value;
            let seed = match &row[5] {
                "" => None,
                s => Some(s.parse().map_err(|_| at(Error::Parse(format!("bad seed `{s}`"))))?),
            };
            let known = subjects.entry(subject_id.clone()).or_insert((gender, choral));
            if *known != (gender, choral) {
                return Err(at(Error::Parse(format!("subject {subject_id} changes gender or choral status"))));
            }
            records.push(ManifestRecord { subject_id, gender, choral, scale, path: PathBuf::from(&row[4]), seed });
        }
        if records.is_empty() {
            return Err(Error::Format("manifest has no records".into()));
        }
        Ok(Self { provenance, records, base_dir: base_dir.to_path_buf() })
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = format!("{MAGIC} {MANIFEST_VERSION}\n");
        for p in &self.provenance {
            out.push_str(&format!("# {p}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).map_err(csv_error)?;
        for r in &self.records {
            let path = r.path.to_str().ok_or_else(|| Error::Format("non UTF-8 path".into()))?;
            let seed = r.seed.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                r.subject_id.as_str(),
                r.gender.code(),
                r.choral.code(),
                Task::Scale.labels()[r.scale],
                path,
                &seed,
            ])
            .map_err(csv_error)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(self.to_text()?.as_bytes())?;
        Ok(())
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            self.base_dir.join(&record.path)
        }
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("manifest: {e}"))
}
