//! Caption files, split files and the assembled in-memory corpus.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::features::{read_features, sample_frames, write_features, SampledFeatures, VideoFeatures};
use super::text::preprocess_caption;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

pub const FEATURE_EXT: &str = "vfrm";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const FEATURES_DIR: &str = "features";

/// One line of the captions file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSet {
    pub video_id: String,
    pub captions: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptionRecord {
    pub video_id: String,
    pub tokens: Vec<u32>,
}

pub fn read_captions(path: &Path) -> Result<Vec<CaptionSet>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: CaptionSet = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            what: "captions file",
            detail: format!("line {}: {e}", lineno + 1),
        })?;
        out.push(set);
    }
    Ok(out)
}

pub fn write_captions(sets: &[CaptionSet], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    for s in sets {
        serde_json::to_writer(&mut buf, s)?;
        buf.push(b'\n');
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_split(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

pub fn write_split(ids: &[String], path: &Path) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for id in ids {
        writeln!(f, "{id}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Train/validation/test partition as 70/10/20 of the ids in order.
pub fn split_ids(ids: &[String]) -> Splits {
    let n = ids.len();
    let n_train = (7 * n + 5) / 10;
    let n_val = ((n + 5) / 10).min(n - n_train);
    Splits {
        train: ids[..n_train].to_vec(),
        val: ids[n_train..n_train + n_val].to_vec(),
        test: ids[n_train + n_val..].to_vec(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Splits {
    pub fn get(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let load = |name: &str| {
            let p = dir.join(format!("{name}.txt"));
            if !p.exists() {
                return Err(Error::MissingPath(p));
            }
            read_split(&p)
        };
        Ok(Splits {
            train: load("train")?,
            val: load("val")?,
            test: load("test")?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_split(&self.train, &dir.join("train.txt"))?;
        write_split(&self.val, &dir.join("val.txt"))?;
        write_split(&self.test, &dir.join("test.txt"))
    }
}

/// A video with its sampled features and encoded reference captions.
#[derive(Clone, Debug)]
pub struct VideoEntry {
    pub video_id: String,
    pub features: SampledFeatures,
    pub references: Vec<Vec<u32>>,
}

/// Everything training and evaluation need, keyed by video id.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub videos: BTreeMap<String, VideoEntry>,
    pub splits: Splits,
}

impl Corpus {
    /// Assembles a corpus, tokenizing caption text with `vocab`. Captions that
    /// are empty after cleaning are skipped with a warning.
    pub fn assemble(
        vocab: Vocabulary,
        features: &[VideoFeatures],
        captions: &[CaptionSet],
        splits: Splits,
    ) -> Result<Self> {
        let mut refs: BTreeMap<&str, Vec<Vec<u32>>> = BTreeMap::new();
        for set in captions {
            let entry = refs.entry(set.video_id.as_str()).or_default();
            for text in &set.captions {
                match preprocess_caption(text) {
                    Ok(toks) => entry.push(vocab.encode(&toks)),
                    Err(e) => log::warn!("skipping caption of {}: {e}", set.video_id),
                }
            }
        }
        let mut videos = BTreeMap::new();
        for vf in features {
            let references = refs.remove(vf.video_id.as_str()).unwrap_or_default();
            videos.insert(
                vf.video_id.clone(),
                VideoEntry {
                    video_id: vf.video_id.clone(),
                    features: sample_frames(vf)?,
                    references,
                },
            );
        }
        Ok(Corpus {
            vocab,
            videos,
            splits,
        })
    }

    /// Loads `<dir>/captions.jsonl`, `<dir>/features/*.vfrm` and split files,
    /// building the vocabulary from the training captions.
    pub fn load_dir(dir: &Path, min_count: usize) -> Result<Self> {
        Self::load(
            &dir.join(FEATURES_DIR),
            &dir.join(CAPTIONS_FILE),
            dir,
            min_count,
        )
    }

    pub fn load(
        features_dir: &Path,
        captions_file: &Path,
        splits_dir: &Path,
        min_count: usize,
    ) -> Result<Self> {
        Self::load_with(features_dir, captions_file, splits_dir, |splits, captions| {
            let mut train_tokens = Vec::new();
            for set in captions.iter().filter(|s| splits.train.contains(&s.video_id)) {
                for text in &set.captions {
                    if let Ok(t) = preprocess_caption(text) {
                        train_tokens.push(t);
                    }
                }
            }
            if train_tokens.is_empty() {
                return Err(Error::Config("no training captions".into()));
            }
            Vocabulary::build(&train_tokens, min_count)
        })
    }

    /// Like [`Corpus::load`] but encodes references with a fixed vocabulary,
    /// as evaluation of a trained checkpoint requires.
    pub fn load_with_vocab(
        features_dir: &Path,
        captions_file: &Path,
        splits_dir: &Path,
        vocab: Vocabulary,
    ) -> Result<Self> {
        Self::load_with(features_dir, captions_file, splits_dir, |_, _| Ok(vocab))
    }

    fn load_with(
        features_dir: &Path,
        captions_file: &Path,
        splits_dir: &Path,
        vocab: impl FnOnce(&Splits, &[CaptionSet]) -> Result<Vocabulary>,
    ) -> Result<Self> {
        for p in [features_dir, captions_file, splits_dir] {
            if !p.exists() {
                return Err(Error::MissingPath(p.to_path_buf()));
            }
        }
        let splits = Splits::load(splits_dir)?;
        let captions = read_captions(captions_file)?;
        let vocab = vocab(&splits, &captions)?;
        let mut features = Vec::new();
        let wanted = splits.train.iter().chain(&splits.val).chain(&splits.test);
        for id in wanted {
            let p = feature_path(features_dir, id);
            if !p.exists() {
                log::warn!("no features for {id} at {}", p.display());
                continue;
            }
            features.push(read_features(&p)?);
        }
        Self::assemble(vocab, &features, &captions, splits)
    }

    /// Entries of a split in split order; unknown ids are logged and skipped.
    pub fn split_entries(&self, name: &str) -> Result<Vec<&VideoEntry>> {
        let ids = self
            .splits
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown split `{name}`")))?;
        Ok(self.entries_for(ids))
    }

    pub fn entries_for(&self, ids: &[String]) -> Vec<&VideoEntry> {
        ids.iter()
            .filter_map(|id| {
                let e = self.videos.get(id);
                if e.is_none() {
                    log::warn!("unknown video id `{id}`; skipped");
                }
                e
            })
            .collect()
    }

    /// Reference captions of the training split, one set per video.
    pub fn training_references(&self) -> Vec<Vec<Vec<u32>>> {
        self.entries_for(&self.splits.train)
            .into_iter()
            .map(|e| e.references.clone())
            .collect()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.videos.values().next().map(|e| e.features.dim())
    }
}

pub fn feature_path(dir: &Path, video_id: &str) -> PathBuf {
    dir.join(format!("{video_id}.{FEATURE_EXT}"))
}

/// Writes features, captions and splits in the layout [`Corpus::load_dir`] reads.
pub fn write_corpus_dir(
    dir: &Path,
    features: &[VideoFeatures],
    captions: &[CaptionSet],
    splits: &Splits,
) -> Result<()> {
    let fdir = dir.join(FEATURES_DIR);
    fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
    for vf in features {
        write_features(vf, &feature_path(&fdir, &vf.video_id))?;
    }
    write_captions(captions, &dir.join(CAPTIONS_FILE))?;
    splits.save(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn twenty_videos_split_14_2_4() {
        let s = split_ids(&ids(20));
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (14, 2, 4));
        assert_eq!(s.train[0], "v0");
        assert_eq!(s.val[0], "v14");
    }

    #[test]
    fn tiny_splits_stay_in_bounds() {
        for n in 1..12 {
            let s = split_ids(&ids(n));
            assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        }
    }

    #[test]
    fn captions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let sets = vec![CaptionSet {
            video_id: "a".into(),
            captions: vec!["A dog runs.".into(), "dog".into()],
        }];
        write_captions(&sets, &p).unwrap();
        assert_eq!(read_captions(&p).unwrap(), sets);
    }

    #[test]
    fn empty_captions_are_skipped() {
        let vocab = Vocabulary::from_tokens(["dog".to_string()]);
        let vf = VideoFeatures::new("a", 2, 2, vec![0.0; 4]).unwrap();
        let sets = vec![CaptionSet {
            video_id: "a".into(),
            captions: vec!["...".into(), "Dog!".into()],
        }];
        let c = Corpus::assemble(vocab, &[vf], &sets, Splits::default()).unwrap();
        assert_eq!(c.videos["a"].references, vec![vec![4]]);
    }
}
