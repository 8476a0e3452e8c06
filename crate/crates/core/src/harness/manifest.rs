use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cooc::ImageRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real,
    Gan,
}

impl Label {
    /// Network target: 1 for GAN, 0 for real.
    pub fn target(self) -> f64 {
        match self {
            Label::Real => 0.0,
            Label::Gan => 1.0,
        }
    }

    /// Decision rule on a predicted probability; exactly 0.5 counts as GAN.
    pub fn from_probability(p: f64) -> Self {
        if p >= 0.5 {
            Label::Gan
        } else {
            Label::Real
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Real => "real",
            Label::Gan => "gan",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    #[default]
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub path: PathBuf,
    pub label: Label,
    pub category: String,
    #[serde(default)]
    pub split: Split,
}

impl ImageRecord for Record {
    type Label = Label;

    fn path(&self) -> &Path {
        &self.path
    }

    fn label(&self) -> Label {
        self.label
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub records: Vec<Record>,
}

impl DatasetManifest {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        let m = Self { records };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for (i, r) in self.records.iter().enumerate() {
            if r.category.is_empty() {
                return Err(Error::ManifestParse {
                    line: i + 1,
                    reason: "empty category".into(),
                });
            }
            if !seen.insert(&r.path) {
                return Err(Error::DuplicatePath(r.path.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn in_split(&self, split: Split) -> Vec<Record> {
        self.records.iter().filter(|r| r.split == split).cloned().collect()
    }

    pub fn count(&self, label: Label) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Sorted distinct categories among records with `label`.
    pub fn categories(&self, label: Label) -> Vec<String> {
        let mut cats: Vec<String> = self
            .records
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.category.clone())
            .collect();
        cats.sort();
        cats.dedup();
        cats
    }

    /// JSON Lines, one record per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        Self::read_lines(BufReader::new(text.as_bytes()))
    }

    fn read_lines(reader: impl BufRead) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line).map_err(|e| Error::ManifestParse {
                line: i + 1,
                reason: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::new(records)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::read_lines(BufReader::new(f))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }
}

/// Maps top-level directory names to labels (case-insensitive).
#[derive(Debug, Clone)]
pub struct LabelingRule {
    pub real: Vec<String>,
    pub gan: Vec<String>,
}

impl Default for LabelingRule {
    fn default() -> Self {
        Self {
            real: vec!["real".into()],
            gan: vec!["gan".into(), "fake".into()],
        }
    }
}

impl LabelingRule {
    fn label_for(&self, name: &str) -> Option<Label> {
        let hit = |names: &[String]| names.iter().any(|n| n.eq_ignore_ascii_case(name));
        match (hit(&self.real), hit(&self.gan)) {
            (true, false) => Some(Label::Real),
            (false, true) => Some(Label::Gan),
            _ => None,
        }
    }
}

/// Category assigned to images stored directly under a label directory.
pub const UNCATEGORIZED: &str = "uncategorized";

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Walks `<root>/<label>/<category>/*.{png,jpg}` into a manifest with every
/// record unassigned, sorted by path.
pub fn build_manifest(root: impl AsRef<Path>, rule: &LabelingRule) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::FileNotFound(root.to_path_buf()));
    }
    let mut records = Vec::new();
    for label_dir in sorted_entries(root)? {
        if !label_dir.is_dir() {
            continue;
        }
        let name = label_dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label = rule
            .label_for(name)
            .ok_or_else(|| Error::AmbiguousLabel(label_dir.clone()))?;
        for entry in sorted_entries(&label_dir)? {
            if entry.is_dir() {
                let category = entry
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                for file in sorted_entries(&entry)? {
                    if file.is_file() && is_image(&file) {
                        records.push(Record {
                            path: file,
                            label,
                            category: category.clone(),
                            split: Split::Unassigned,
                        });
                    }
                }
            } else if is_image(&entry) {
                records.push(Record {
                    path: entry,
                    label,
                    category: UNCATEGORIZED.into(),
                    split: Split::Unassigned,
                });
            }
        }
    }
    if records.is_empty() {
        return Err(Error::EmptyDirectory(root.to_path_buf()));
    }
    records.sort_by(|a, b| a.path.cmp(&b.path));
    DatasetManifest::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(p: &Path) {
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, b"x").unwrap();
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            build_manifest(dir.path(), &LabelingRule::default()),
            Err(Error::EmptyDirectory(_))
        ));
    }

    #[test]
    fn walks_label_and_category() {
        let dir = tempfile::tempdir().unwrap();
        for i in 0..3 {
            touch(&dir.path().join(format!("real/x/{i}.png")));
        }
        touch(&dir.path().join("gan/y/a.jpg"));
        touch(&dir.path().join("gan/y/b.PNG"));
        touch(&dir.path().join("gan/y/notes.txt"));
        let m = build_manifest(dir.path(), &LabelingRule::default()).unwrap();
        assert_eq!(m.len(), 5);
        assert_eq!(m.count(Label::Real), 3);
        assert!(m
            .records
            .iter()
            .all(|r| (r.label == Label::Real) == (r.category == "x")));
        assert!(m.records.iter().all(|r| r.split == Split::Unassigned));
        let again = build_manifest(dir.path(), &LabelingRule::default()).unwrap();
        assert_eq!(m.to_jsonl().unwrap(), again.to_jsonl().unwrap());
    }

    #[test]
    fn unknown_label_dir() {
        let dir = tempfile::tempdir().unwrap();
        touch(&dir.path().join("maybe/x/1.png"));
        assert!(matches!(
            build_manifest(dir.path(), &LabelingRule::default()),
            Err(Error::AmbiguousLabel(_))
        ));
        let rule = LabelingRule {
            real: vec!["both".into()],
            gan: vec!["both".into()],
        };
        touch(&dir.path().join("both/x/1.png"));
        assert!(matches!(
            build_manifest(dir.path(), &rule),
            Err(Error::AmbiguousLabel(_))
        ));
    }

    #[test]
    fn jsonl_roundtrip_and_field_names() {
        let m = DatasetManifest::new(vec![Record {
            path: "a/b.png".into(),
            label: Label::Gan,
            category: "horse2zebra".into(),
            split: Split::Val,
        }])
        .unwrap();
        let text = m.to_jsonl().unwrap();
        assert_eq!(
            text,
            "{\"path\":\"a/b.png\",\"label\":\"gan\",\"category\":\"horse2zebra\",\"split\":\"val\"}\n"
        );
        assert_eq!(DatasetManifest::from_jsonl(&text).unwrap(), m);
    }

    #[test]
    fn rejects_duplicates_and_bad_lines() {
        let line = "{\"path\":\"a.png\",\"label\":\"real\",\"category\":\"c\",\"split\":\"train\"}\n";
        assert!(matches!(
            DatasetManifest::from_jsonl(&line.repeat(2)),
            Err(Error::DuplicatePath(_))
        ));
        assert!(matches!(
            DatasetManifest::from_jsonl("{\"path\":\"a.png\",\"label\":\"maybe\",\"category\":\"c\"}"),
            Err(Error::ManifestParse { line: 1, .. })
        ));
    }

    #[test]
    fn tie_goes_to_gan() {
        assert_eq!(Label::from_probability(0.5), Label::Gan);
        assert_eq!(Label::from_probability(0.499_999), Label::Real);
    }
}
