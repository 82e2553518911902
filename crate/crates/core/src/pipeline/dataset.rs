use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Expression, NUM_CLASSES};
use crate::rng::{mix_seed, SeededRng};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Manifest(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct ManifestRecord {
    /// As written in the manifest; relative paths resolve against
    /// [`Manifest::base_dir`].
    pub path: PathBuf,
    pub label: Expression,
    pub split: Option<Split>,
}

/// `path,label,split` records; the split column is optional.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Manifest {
    pub base_dir: PathBuf,
    pub records: Vec<ManifestRecord>,
}

#[derive(Deserialize)]
struct Row {
    path: String,
    label: String,
    #[serde(default)]
    split: Option<String>,
}

impl Manifest {
    pub fn new(base_dir: impl Into<PathBuf>, records: Vec<ManifestRecord>) -> Result<Self> {
        let m = Manifest {
            base_dir: base_dir.into(),
            records,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn resolve(&self, record: &ManifestRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            self.base_dir.join(&record.path)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(&r.path) {
                return Err(Error::Manifest(format!(
                    "duplicate path {}",
                    r.path.display()
                )));
            }
        }
        Ok(())
    }

    pub fn parse_csv(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if !headers.iter().any(|h| h == "path") || !headers.iter().any(|h| h == "label") {
            return Err(Error::Manifest(
                "header must contain `path` and `label` columns".into(),
            ));
        }
        let mut records = Vec::new();
        for (line, row) in reader.deserialize::<Row>().enumerate() {
            let row = row?;
            let context = |e: Error| Error::Manifest(format!("record {}: {e}", line + 1));
            if row.path.is_empty() {
                return Err(context(Error::Manifest("empty path".into())));
            }
            let label = row.label.parse().map_err(context)?;
            let split = match row.split.as_deref().map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse().map_err(context)?),
            };
            records.push(ManifestRecord {
                path: PathBuf::from(row.path),
                label,
                split,
            });
        }
        Self::new(base_dir, records)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_csv(&text, base).map_err(|e| e.at_path(path))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "label", "split"])?;
        for r in &self.records {
            let split = r.split.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([&r.path.to_string_lossy(), r.label.as_str(), split.as_str()])?;
        }
        w.flush()?;
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        out.write_all(&self.to_csv()?)?;
        Ok(())
    }

    /// PGM files in `dir` whose names follow the JAFFE convention
    /// (`KA.AN1.39.pgm`), sorted by file name.
    pub fn from_jaffe_dir(dir: &Path) -> Result<Self> {
        let mut records = Vec::new();
        let entries = std::fs::read_dir(dir).map_err(|e| Error::from(e).at_path(dir))?;
        for entry in entries {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if !name.to_ascii_lowercase().ends_with(".pgm") {
                continue;
            }
            if let Some(label) = Expression::from_jaffe_filename(&name) {
                records.push(ManifestRecord {
                    path: PathBuf::from(name),
                    label,
                    split: None,
                });
            }
        }
        records.sort_by(|a, b| a.path.cmp(&b.path));
        Self::new(dir, records)
    }

    /// Same records with paths rewritten to resolve from `new_base`:
    /// relative where the file lies under it, absolute otherwise.
    pub fn rebased(&self, new_base: &Path) -> Result<Manifest> {
        let new_base = std::path::absolute(new_base)?;
        let records = self
            .records
            .iter()
            .map(|r| {
                let full = std::path::absolute(self.resolve(r))?;
                let path = match full.strip_prefix(&new_base) {
                    Ok(rel) => rel.to_path_buf(),
                    Err(_) => full,
                };
                Ok(ManifestRecord { path, ..r.clone() })
            })
            .collect::<Result<_>>()?;
        Ok(Manifest {
            base_dir: new_base,
            records,
        })
    }

    pub fn has_split_tags(&self) -> bool {
        self.records.iter().any(|r| r.split.is_some())
    }

    /// Partition by tag; untagged records count as training data.
    pub fn by_tag(&self) -> (Manifest, Manifest) {
        let (test, train): (Vec<_>, Vec<_>) = self
            .records
            .iter()
            .cloned()
            .partition(|r| r.split == Some(Split::Test));
        (self.with_records(train), self.with_records(test))
    }

    pub fn filter(&self, split: Option<Split>) -> Manifest {
        match split {
            None => self.clone(),
            Some(Split::Test) => self.by_tag().1,
            Some(Split::Train) => self.by_tag().0,
        }
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut c = [0; NUM_CLASSES];
        for r in &self.records {
            c[r.label.index()] += 1;
        }
        c
    }

    fn with_records(&self, records: Vec<ManifestRecord>) -> Manifest {
        Manifest {
            base_dir: self.base_dir.clone(),
            records,
        }
    }
}

const SPLIT_STREAM: u64 = 0x5350_4c49_5400_0000;

/// Stratified split: `per_class_test` records of every class go to the test
/// side, picked by a seeded shuffle. Both halves keep manifest order and
/// carry the matching split tag.
pub fn split(
    manifest: &Manifest,
    seed: u64,
    per_class_test: usize,
) -> Result<(Manifest, Manifest)> {
    let counts = manifest.class_counts();
    if per_class_test > 0 {
        for e in Expression::ALL {
            if counts[e.index()] <= per_class_test {
                return Err(Error::Manifest(format!(
                    "class {e} has {} images, needs more than {per_class_test} to hold out {per_class_test}",
                    counts[e.index()]
                )));
            }
        }
    }
    let mut rng = SeededRng::new(mix_seed(seed ^ SPLIT_STREAM));
    let mut is_test = vec![false; manifest.len()];
    for e in Expression::ALL {
        let mut idx: Vec<usize> = (0..manifest.len())
            .filter(|&i| manifest.records[i].label == e)
            .collect();
        rng.shuffle(&mut idx);
        for &i in idx.iter().take(per_class_test) {
            is_test[i] = true;
        }
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (r, t) in manifest.records.iter().zip(is_test) {
        let mut r = r.clone();
        if t {
            r.split = Some(Split::Test);
            test.push(r);
        } else {
            r.split = Some(Split::Train);
            train.push(r);
        }
    }
    Ok((manifest.with_records(train), manifest.with_records(test)))
}
