//! Raw dataset layouts to manifests.
//!
//! Two layouts ship: an index CSV (`labels.csv` at the dataset root) and
//! one folder per label. Video clips are directories of numbered frames;
//! ingest lists them as [`ClipRecord`]s and `sample-frames` expands them.

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{AgeGroup, Gender, MediaType, Provenance};
use crate::manifest::{DatasetManifest, SampleRecord};
use crate::media::clip_frame_count;
use crate::normalize::{sample_frames, FrameRole, SamplingStrategy};

pub const INDEX_FILE: &str = "labels.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `labels.csv` with columns `file,label` and optionally `user_id`,
    /// `age_years`, `age_group`, `gender`, `media_type`.
    #[default]
    IndexCsv,
    /// `<root>/<label>/<file>`; sub-directories are clips.
    FolderPerLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub media_path: String,
    pub label_raw: String,
    pub frame_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group: Option<AgeGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub manifest: DatasetManifest,
    pub clips: Vec<ClipRecord>,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg" | "bmp"))
}

fn strip_extension(rel: &str) -> String {
    match Path::new(rel).extension() {
        Some(ext) => rel[..rel.len() - ext.len() - 1].to_string(),
        None => rel.to_string(),
    }
}

fn optional<T: FromStr>(value: Option<&str>, what: &str, origin: &Path, line: usize) -> Result<Option<T>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::input(origin, line, format!("bad {what} `{v}`"))),
    }
}

pub fn ingest_dataset(name: &str, provenance: Provenance, root: &Path, layout: Layout) -> Result<Ingested> {
    let mut ingested = Ingested {
        manifest: DatasetManifest::new(name, provenance),
        clips: Vec::new(),
    };
    match layout {
        Layout::IndexCsv => ingest_index(root, &mut ingested)?,
        Layout::FolderPerLabel => ingest_folders(root, &mut ingested)?,
    }
    if ingested.manifest.samples.is_empty() && ingested.clips.is_empty() {
        return Err(Error::NoSamples(root.to_path_buf()));
    }
    Ok(ingested)
}

fn ingest_index(root: &Path, out: &mut Ingested) -> Result<()> {
    let index = root.join(INDEX_FILE);
    if !index.exists() {
        return Err(Error::NoSamples(root.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(&index)?;
    let header = reader.headers()?.clone();
    let col = |n: &str| header.iter().position(|h| h.trim() == n);
    let (Some(file_col), Some(label_col)) = (col("file"), col("label")) else {
        return Err(Error::input(&index, 1, "labels.csv needs `file` and `label` columns"));
    };
    let (user_col, age_col, group_col, gender_col, type_col) =
        (col("user_id"), col("age_years"), col("age_group"), col("gender"), col("media_type"));
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let get = |c: Option<usize>| c.and_then(|c| record.get(c));
        let file = record.get(file_col).unwrap_or("").trim().to_string();
        if file.is_empty() {
            return Err(Error::input(&index, line, "empty `file`"));
        }
        let label_raw = record.get(label_col).unwrap_or("").to_string();
        let user_id = get(user_col).map(str::trim).filter(|s| !s.is_empty()).map(String::from);
        let age_years: Option<f64> = optional(get(age_col), "age_years", &index, line)?;
        let age_group: Option<AgeGroup> = optional(get(group_col), "age_group", &index, line)?;
        let gender: Option<Gender> = optional(get(gender_col), "gender", &index, line)?;
        let path = root.join(&file);
        let media_type: MediaType = match optional(get(type_col), "media_type", &index, line)? {
            Some(t) => t,
            None if path.is_dir() => MediaType::Video,
            None => MediaType::Image,
        };
        match media_type {
            MediaType::Image => {
                let mut r = SampleRecord::image(&out.manifest.name, &strip_extension(&file), &file, &label_raw);
                r.user_id = user_id;
                r.age_years = age_years;
                r.age_group = age_group;
                r.gender = gender;
                out.manifest.samples.push(r);
            }
            MediaType::Video => out.clips.push(ClipRecord {
                clip_id: file.trim_end_matches('/').to_string(),
                media_path: file.trim_end_matches('/').to_string(),
                label_raw,
                frame_count: clip_frame_count(&path)?,
                user_id,
                age_years,
                age_group,
                gender,
            }),
        }
    }
    Ok(())
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    entries.sort();
    Ok(entries)
}

fn ingest_folders(root: &Path, out: &mut Ingested) -> Result<()> {
    if !root.is_dir() {
        return Err(Error::NoSamples(root.to_path_buf()));
    }
    for label_dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let label = label_dir.file_name().unwrap_or_default().to_string_lossy().to_string();
        for entry in sorted_entries(&label_dir)? {
            let rel = format!("{label}/{}", entry.file_name().unwrap_or_default().to_string_lossy());
            if entry.is_dir() {
                out.clips.push(ClipRecord {
                    clip_id: rel.clone(),
                    media_path: rel,
                    label_raw: label.clone(),
                    frame_count: clip_frame_count(&entry)?,
                    user_id: None,
                    age_years: None,
                    age_group: None,
                    gender: None,
                });
            } else if is_image(&entry) {
                out.manifest
                    .samples
                    .push(SampleRecord::image(&out.manifest.name, &strip_extension(&rel), &rel, &label));
            }
        }
    }
    Ok(())
}

pub fn clips_to_jsonl(clips: &[ClipRecord]) -> String {
    clips
        .iter()
        .map(|c| serde_json::to_string(c).expect("clip serializes") + "\n")
        .collect()
}

pub fn clips_from_jsonl(text: &str, origin: &Path) -> Result<Vec<ClipRecord>> {
    text.as_bytes()
        .lines()
        .enumerate()
        .filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|(i, l)| {
            let l = l.map_err(|e| Error::input(origin, i + 1, e.to_string()))?;
            serde_json::from_str(&l).map_err(|e| Error::input(origin, i + 1, e.to_string()))
        })
        .collect()
}

pub fn frame_sample_id(clip_id: &str, index: u32) -> String {
    format!("{clip_id}#{index:06}")
}

/// Appends the sampled frames of every clip to `manifest`. The neutral frame
/// of a neutral-to-apex clip is labelled `neutral`.
pub fn expand_clips(manifest: &mut DatasetManifest, clips: &[ClipRecord], strategy: SamplingStrategy) -> Result<usize> {
    let mut added = 0;
    for clip in clips {
        for frame in sample_frames(clip.frame_count, strategy, &clip.clip_id)? {
            let label = match frame.role {
                FrameRole::Neutral => "neutral",
                FrameRole::Target => clip.label_raw.as_str(),
            };
            let mut r = SampleRecord::frame(
                &manifest.name,
                &frame_sample_id(&clip.clip_id, frame.index),
                &clip.media_path,
                frame.index,
                label,
            );
            r.user_id = clip.user_id.clone();
            r.age_years = clip.age_years;
            r.age_group = clip.age_group;
            r.gender = clip.gender;
            manifest.samples.push(r);
            added += 1;
        }
    }
    Ok(added)
}
