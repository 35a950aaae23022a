//! Synthetic glyph datasets for desk-scale runs.
//!
//! Each image holds one schematic face: a light ellipse with two dark eye
//! dots and a class glyph below them. Glyphs are mirror-symmetric so a
//! horizontal flip never changes the class. The generator writes the raw
//! layout `ingest` reads (`labels.csv`, `images/`, `clips/`) and the sidecar
//! the stub adapter answers from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapters::{HeadPoseEstimate, SidecarEntry, SidecarFace, SIDECAR_FILE};
use crate::error::Result;
use crate::fsutil::{create_dir_all, write_string_atomic};
use crate::labels::{ExpressionLabel, Gender, Provenance};
use crate::manifest::{BBox, Point};
use crate::media::{frame_file_name, save_rgb_png};
use crate::normalize::{age_group_for_years, SamplingStrategy};

pub const IMAGE_SIDE: u32 = 112;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variability {
    Low,
    High,
}

/// Which age column the dataset's own labels carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeSource {
    Years,
    Group,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDatasetSpec {
    pub name: String,
    pub provenance: Provenance,
    pub classes: Vec<ExpressionLabel>,
    pub images_per_class: usize,
    pub users: usize,
    pub variability: Variability,
    /// Fraction of samples whose written label is replaced by another class.
    pub label_noise: f64,
    pub clips: usize,
    pub clip_frames: u32,
    pub clip_strategy: SamplingStrategy,
    pub age_source: AgeSource,
    /// Adds images that exclusion must drop: no face, profile pose,
    /// missing landmarks and an unmapped label.
    pub exclusion_cases: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub name: String,
    pub root: PathBuf,
    pub images: usize,
    pub clips: usize,
    /// Samples whose written label differs from the drawn glyph.
    pub noisy_labels: usize,
}

/// The three datasets of the desk-scale run: a clean low-variability set,
/// the same classes with 30% label noise, and a high-variability superset.
pub fn desk_scale_specs(seed: u64) -> Vec<SynthDatasetSpec> {
    use ExpressionLabel::*;
    let base = SynthDatasetSpec {
        name: "GlyphClean".into(),
        provenance: Provenance::LabControlled,
        classes: vec![Happiness, Sadness, Surprise],
        images_per_class: 48,
        users: 12,
        variability: Variability::Low,
        label_noise: 0.0,
        clips: 3,
        clip_frames: 8,
        clip_strategy: SamplingStrategy::UniformFive,
        age_source: AgeSource::Years,
        exclusion_cases: true,
        seed,
    };
    vec![
        base.clone(),
        SynthDatasetSpec {
            name: "GlyphNoisy".into(),
            label_noise: 0.3,
            age_source: AgeSource::None,
            provenance: Provenance::WebManual,
            seed: seed.wrapping_add(1),
            ..base.clone()
        },
        SynthDatasetSpec {
            name: "GlyphSuperset".into(),
            classes: vec![Anger, Happiness, Sadness, Surprise, Neutral],
            variability: Variability::High,
            users: 16,
            clips: 4,
            clip_frames: 6,
            clip_strategy: SamplingStrategy::NeutralPlusApex,
            age_source: AgeSource::Group,
            provenance: Provenance::WebAutomatic,
            seed: seed.wrapping_add(2),
            ..base
        },
    ]
}

/// Placement and appearance of one drawn face.
#[derive(Debug, Clone, Copy)]
struct FacePose {
    center: (f64, f64),
    side: f64,
    angle_deg: f64,
    face_level: f64,
    background: f64,
    noise: f64,
    /// Horizontal and vertical stretch of the expression strokes.
    glyph_scale: (f64, f64),
    glyph_shift: f64,
}

impl FacePose {
    fn sample(variability: Variability, rng: &mut ChaCha8Rng) -> FacePose {
        let img = IMAGE_SIDE as f64;
        match variability {
            Variability::Low => FacePose {
                center: (img / 2.0 + rng.random_range(-3.0..3.0), img / 2.0 + rng.random_range(-3.0..3.0)),
                side: rng.random_range(58.0..62.0),
                angle_deg: rng.random_range(-5.0..5.0),
                face_level: 200.0,
                background: 40.0,
                noise: 0.0,
                glyph_scale: (1.0, 1.0),
                glyph_shift: 0.0,
            },
            Variability::High => {
                let side: f64 = rng.random_range(44.0..68.0);
                let margin = side * 0.75 + 2.0;
                FacePose {
                    center: (rng.random_range(margin..img - margin), rng.random_range(margin..img - margin)),
                    side,
                    angle_deg: rng.random_range(-25.0..25.0),
                    face_level: rng.random_range(150.0..235.0),
                    background: rng.random_range(10.0..110.0),
                    noise: 18.0,
                    glyph_scale: (rng.random_range(0.7..1.3), rng.random_range(0.7..1.3)),
                    glyph_shift: rng.random_range(-0.12..0.12),
                }
            }
        }
    }

    /// Face coordinates: u to the face's right, v downward, both in units of
    /// half the face side.
    fn to_face(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let h = self.side / 2.0;
        ((dx * c + dy * s) / h, (-dx * s + dy * c) / h)
    }

    fn to_image(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.angle_deg.to_radians().sin_cos();
        let h = self.side / 2.0;
        (self.center.0 + (u * c - v * s) * h, self.center.1 + (u * s + v * c) * h)
    }

    fn ink(&self, class: ExpressionLabel, u: f64, v: f64) -> bool {
        let (sx, sy) = self.glyph_scale;
        glyph_ink(class, u / sx, (v - self.glyph_shift - 0.5) / sy + 0.5)
    }

    fn bbox(&self) -> BBox {
        let h = self.side / 2.0;
        let x0 = (self.center.0 - h).round().max(0.0);
        let y0 = (self.center.1 - h).round().max(0.0);
        let x1 = (self.center.0 + h).round().min(IMAGE_SIDE as f64);
        let y1 = (self.center.1 + h).round().min(IMAGE_SIDE as f64);
        BBox::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
    }

    fn eyes(&self) -> (Point, Point) {
        let a = self.to_image(-EYE_U, EYE_V);
        let b = self.to_image(EYE_U, EYE_V);
        let p = |q: (f64, f64)| Point::new(q.0.round() as i32, q.1.round() as i32);
        if a.0 <= b.0 {
            (p(a), p(b))
        } else {
            (p(b), p(a))
        }
    }
}

const EYE_U: f64 = 0.45;
const EYE_V: f64 = -0.3;

fn band(d: f64, r: f64, w: f64) -> bool {
    (d - r).abs() <= w
}

/// Whether face coordinate (u, v) is ink for `class`. Depends on |u| only.
pub fn glyph_ink(class: ExpressionLabel, u: f64, v: f64) -> bool {
    let a = u.abs();
    match class {
        ExpressionLabel::Happiness => v > 0.3 && band((a * a + (v - 0.05).powi(2)).sqrt(), 0.55, 0.1),
        ExpressionLabel::Sadness => v < 0.72 && v > 0.3 && band((a * a + (v - 1.0).powi(2)).sqrt(), 0.55, 0.1),
        ExpressionLabel::Surprise => (a * a + (v - 0.5).powi(2)).sqrt() <= 0.26,
        ExpressionLabel::Anger => {
            let mouth = a < 0.45 && (0.45..=0.62).contains(&v);
            // Brows slanting down toward the nose.
            let brow = (0.12..=0.75).contains(&a) && (v - (-0.75 + 0.35 * (0.75 - a))).abs() <= 0.08;
            mouth || brow
        }
        ExpressionLabel::Disgust => (0.2..=0.45).contains(&a) && (0.4..=0.65).contains(&v),
        ExpressionLabel::Fear => a < 0.13 && (0.2..=0.82).contains(&v),
        ExpressionLabel::Neutral => a < 0.42 && (0.5..=0.57).contains(&v),
    }
}

fn render(pose: &FacePose, glyph: Option<ExpressionLabel>, rng: &mut ChaCha8Rng) -> RgbImage {
    let mut img = RgbImage::new(IMAGE_SIDE, IMAGE_SIDE);
    for (x, y, px) in img.enumerate_pixels_mut() {
        let (u, v) = pose.to_face(x as f64 + 0.5, y as f64 + 0.5);
        let in_face = glyph.is_some() && (u / 0.85).powi(2) + v * v <= 1.0;
        let level = if !in_face {
            pose.background
        } else {
            let eye = ((u.abs() - EYE_U).powi(2) + (v - EYE_V).powi(2)).sqrt() <= 0.12;
            if eye || glyph.is_some_and(|g| pose.ink(g, u, v)) {
                25.0
            } else {
                pose.face_level
            }
        };
        let jitter = if pose.noise > 0.0 {
            rng.random_range(-pose.noise..=pose.noise)
        } else {
            0.0
        };
        let l = (level + jitter).clamp(0.0, 255.0);
        // Skin-like tint inside the face, gray outside.
        *px = if in_face {
            Rgb([l as u8, (l * 0.86) as u8, (l * 0.74) as u8])
        } else {
            Rgb([l as u8, l as u8, l as u8])
        };
    }
    img
}

#[derive(Debug, Clone)]
struct User {
    id: String,
    age: f64,
    gender: Gender,
}

struct Writer {
    root: PathBuf,
    labels: String,
    sidecar: Vec<SidecarEntry>,
}

impl Writer {
    fn face_entry(
        &self,
        pose: &FacePose,
        user: &User,
        yaw: Option<f64>,
        rng: &mut ChaCha8Rng,
    ) -> SidecarFace {
        let (eye_left, eye_right) = pose.eyes();
        let has_landmarks = yaw.is_some();
        SidecarFace {
            bbox: pose.bbox(),
            confidence: 0.99,
            eye_left: has_landmarks.then_some(eye_left),
            eye_right: has_landmarks.then_some(eye_right),
            pose: yaw.map(|yaw| HeadPoseEstimate {
                yaw,
                pitch: 0.0,
                roll: pose.angle_deg,
            }),
            age_years: Some((user.age + rng.random_range(-2i32..=2) as f64).max(0.0)),
            gender: Some(if rng.random_bool(0.1) {
                match user.gender {
                    Gender::Male => Gender::Female,
                    Gender::Female => Gender::Male,
                }
            } else {
                user.gender
            }),
        }
    }

    fn label_row(&mut self, file: &str, label: &str, user: &User, age_source: AgeSource, media_type: &str) {
        let (age, group) = match age_source {
            AgeSource::Years => (user.age.to_string(), String::new()),
            AgeSource::Group => (String::new(), age_group_for_years(user.age).to_string()),
            AgeSource::None => (String::new(), String::new()),
        };
        let _ = writeln!(
            self.labels,
            "{file},{label},{},{age},{group},{},{media_type}",
            user.id, user.gender
        );
    }
}

/// Raw label text as a dataset might spell it.
fn spelled(label: ExpressionLabel, i: usize) -> String {
    match i % 3 {
        0 => label.as_str().to_string(),
        1 => {
            let s = label.as_str();
            s[..1].to_uppercase() + &s[1..]
        }
        _ => format!(" {} ", label.as_str().to_uppercase()),
    }
}

pub fn generate_dataset(spec: &SynthDatasetSpec, root: &Path) -> Result<SynthSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    create_dir_all(&root.join("images"))?;
    let users: Vec<User> = (0..spec.users.max(1))
        .map(|i| User {
            id: format!("u{i:02}"),
            age: rng.random_range(6..80) as f64,
            gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
        })
        .collect();
    let mut w = Writer {
        root: root.to_path_buf(),
        labels: String::from("file,label,user_id,age_years,age_group,gender,media_type\n"),
        sidecar: Vec::new(),
    };
    let mut noisy = 0;
    let mut images = 0;

    let mut n = 0usize;
    for class in &spec.classes {
        for k in 0..spec.images_per_class {
            let user = users[n % users.len()].clone();
            let pose = FacePose::sample(spec.variability, &mut rng);
            let written = if rng.random_bool(spec.label_noise.clamp(0.0, 1.0)) && spec.classes.len() > 1 {
                let others: Vec<_> = spec.classes.iter().filter(|c| *c != class).collect();
                noisy += 1;
                *others[rng.random_range(0..others.len())]
            } else {
                *class
            };
            let file = format!("images/{}_{k:03}.png", class.as_str());
            save_rgb_png(&w.root.join(&file), &render(&pose, Some(*class), &mut rng))?;
            let yaw = rng.random_range(-8.0..8.0);
            let face = w.face_entry(&pose, &user, Some(yaw), &mut rng);
            w.sidecar.push(SidecarEntry { file: file.clone(), faces: vec![face] });
            w.label_row(&file, &spelled(written, n), &user, spec.age_source, "image");
            images += 1;
            n += 1;
        }
    }

    if spec.exclusion_cases {
        let user = users[0].clone();
        let cases: [(&str, Option<f64>, bool, &str); 4] = [
            ("no_face", None, false, "happiness"),
            ("profile", Some(95.0), true, "happiness"),
            ("no_landmarks", None, true, "happiness"),
            ("unmapped", Some(0.0), true, "boredom"),
        ];
        for (tag, yaw, face, label) in cases {
            for k in 0..2 {
                let pose = FacePose::sample(spec.variability, &mut rng);
                let file = format!("images/x_{tag}_{k}.png");
                let glyph = face.then_some(spec.classes[0]);
                save_rgb_png(&w.root.join(&file), &render(&pose, glyph, &mut rng))?;
                let faces = if face {
                    vec![w.face_entry(&pose, &user, yaw, &mut rng)]
                } else {
                    vec![]
                };
                w.sidecar.push(SidecarEntry { file: file.clone(), faces });
                w.label_row(&file, label, &user, spec.age_source, "image");
                images += 1;
            }
        }
    }

    for c in 0..spec.clips {
        let class = spec.classes[c % spec.classes.len()];
        let user = users[c % users.len()].clone();
        let dir = format!("clips/clip_{c:02}");
        create_dir_all(&w.root.join(&dir))?;
        let mut pose = FacePose::sample(spec.variability, &mut rng);
        for f in 0..spec.clip_frames {
            let glyph = match spec.clip_strategy {
                SamplingStrategy::NeutralPlusApex if f < spec.clip_frames / 2 => ExpressionLabel::Neutral,
                _ => class,
            };
            pose.center.0 = (pose.center.0 + rng.random_range(-0.5..0.5)).clamp(40.0, IMAGE_SIDE as f64 - 40.0);
            let file = format!("{dir}/{}", frame_file_name(f));
            save_rgb_png(&w.root.join(&file), &render(&pose, Some(glyph), &mut rng))?;
            let face = w.face_entry(&pose, &user, Some(0.0), &mut rng);
            w.sidecar.push(SidecarEntry { file, faces: vec![face] });
        }
        w.label_row(&dir, class.as_str(), &user, spec.age_source, "video");
    }

    write_string_atomic(&root.join("labels.csv"), &w.labels)?;
    let mut sidecar = String::new();
    for e in &w.sidecar {
        sidecar.push_str(&serde_json::to_string(e).expect("sidecar serializes"));
        sidecar.push('\n');
    }
    write_string_atomic(&root.join(SIDECAR_FILE), &sidecar)?;
    Ok(SynthSummary {
        name: spec.name.clone(),
        root: root.to_path_buf(),
        images,
        clips: spec.clips,
        noisy_labels: noisy,
    })
}

/// Generates every spec under `out/<name>/`.
pub fn generate_all(specs: &[SynthDatasetSpec], out: &Path) -> Result<BTreeMap<String, SynthSummary>> {
    specs
        .iter()
        .map(|s| Ok((s.name.clone(), generate_dataset(s, &out.join(&s.name))?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glyphs_are_mirror_symmetric_and_distinct() {
        let grid: Vec<(f64, f64)> = (0..40)
            .flat_map(|i| (0..40).map(move |j| (-1.0 + i as f64 / 20.0, -1.0 + j as f64 / 20.0)))
            .collect();
        let masks: Vec<Vec<bool>> = ExpressionLabel::ALL
            .iter()
            .map(|c| grid.iter().map(|&(u, v)| glyph_ink(*c, u, v)).collect())
            .collect();
        for c in ExpressionLabel::ALL {
            for &(u, v) in &grid {
                assert_eq!(glyph_ink(*c, u, v), glyph_ink(*c, -u, v));
            }
        }
        for i in 0..masks.len() {
            assert!(masks[i].iter().any(|b| *b));
            for j in i + 1..masks.len() {
                let diff = masks[i].iter().zip(&masks[j]).filter(|(a, b)| a != b).count();
                assert!(diff > 20, "{} vs {}", ExpressionLabel::ALL[i], ExpressionLabel::ALL[j]);
            }
        }
    }

    #[test]
    fn eyes_are_inside_the_box_and_ordered() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let pose = FacePose::sample(Variability::High, &mut rng);
            let b = pose.bbox();
            assert!(b.fits_within(IMAGE_SIDE, IMAGE_SIDE));
            let (l, r) = pose.eyes();
            assert!(l.x <= r.x);
            for e in [l, r] {
                assert!(e.x as u32 >= b.x && (e.x as u64) < b.right());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SynthDatasetSpec {
            images_per_class: 3,
            clips: 1,
            ..desk_scale_specs(5).remove(1)
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_dataset(&spec, a.path()).unwrap();
        generate_dataset(&spec, b.path()).unwrap();
        for f in ["labels.csv", SIDECAR_FILE, "images/happiness_002.png", "clips/clip_00/000007.png"] {
            assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}
