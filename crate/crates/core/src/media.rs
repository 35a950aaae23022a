//! Locating and decoding the media a record points to.
//!
//! Videos are stored pre-decoded: a clip is a directory of numbered frames
//! (`000000.png`, `000001.png`, ...). Codec handling is out of scope.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::manifest::SampleRecord;

pub fn frame_file_name(index: u32) -> String {
    format!("{index:06}.png")
}

pub fn resolve_media(root: &Path, record: &SampleRecord) -> PathBuf {
    let base = root.join(&record.media_path);
    match record.frame_index {
        Some(i) => base.join(frame_file_name(i)),
        None => base,
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    image::open(path).map(|img| img.to_rgb8()).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    image::open(path).map(|img| img.to_luma8()).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_png(path: &Path, img: &GrayImage) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    crate::fsutil::write_atomic(path, |f| std::io::Write::write_all(f, &bytes))
}

pub fn save_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    let mut bytes = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    crate::fsutil::write_atomic(path, |f| std::io::Write::write_all(f, &bytes))
}

/// Number of frames in a pre-decoded clip directory.
pub fn clip_frame_count(clip_dir: &Path) -> Result<u32> {
    let entries = fs::read_dir(clip_dir).map_err(|e| Error::io(clip_dir, e))?;
    let mut count = 0u32;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(clip_dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if name.len() == 10 && name.ends_with(".png") && name[..6].bytes().all(|b| b.is_ascii_digit()) {
            count += 1;
        }
    }
    Ok(count)
}

/// Where the preprocessing stage stores a sample's normalized face.
pub fn processed_path(processed_root: &Path, dataset: &str, sample_id: &str) -> PathBuf {
    processed_root.join(dataset).join(format!("{}.png", sanitize(sample_id)))
}

/// Sample ids may contain `/` or `#`; keep file names flat and portable.
/// Other bytes are escaped as `~XX`, so distinct ids never collide.
pub fn sanitize(id: &str) -> String {
    let mut out = String::with_capacity(id.len());
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.') {
            out.push(b as char);
        } else {
            out.push_str(&format!("~{b:02X}"));
        }
    }
    out
}
