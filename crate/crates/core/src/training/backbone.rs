//! Architecture registry and the in-process "tiny" backbone.
//!
//! `tiny` is a one-hidden-layer perceptron over a 32x32 downsampled,
//! per-image standardized face;
//! it exists so the whole protocol can run at desk scale. The two
//! large pretrained backbones are registered as external architectures:
//! they are trained and queried through a user-supplied command.

use image::GrayImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;

/// Square single-channel image with values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub side: usize,
    pub data: Vec<f64>,
}

impl Plane {
    /// Box-filter downsample of a square grayscale image to `side`.
    pub fn from_gray(img: &GrayImage, side: usize) -> Plane {
        Plane::from_gray_center(img, side, 1.0)
    }

    /// Downsamples the central `fraction` of the image (per axis) to `side`.
    pub fn from_gray_center(img: &GrayImage, side: usize, fraction: f64) -> Plane {
        let (w, h) = img.dimensions();
        let (w, h) = (w as usize, h as usize);
        let cw = ((w as f64 * fraction).round() as usize).clamp(1, w);
        let ch = ((h as f64 * fraction).round() as usize).clamp(1, h);
        let (left, top) = ((w - cw) / 2, (h - ch) / 2);
        let mut data = Vec::with_capacity(side * side);
        for oy in 0..side {
            let y0 = oy * ch / side;
            let y1 = ((oy + 1) * ch / side).max(y0 + 1);
            for ox in 0..side {
                let x0 = ox * cw / side;
                let x1 = ((ox + 1) * cw / side).max(x0 + 1);
                let mut sum = 0u64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += img.get_pixel((left + x) as u32, (top + y) as u32)[0] as u64;
                    }
                }
                data.push(sum as f64 / ((y1 - y0) * (x1 - x0)) as f64 / 255.0);
            }
        }
        Plane { side, data }
    }
}

/// Repeats a single-channel plane `channels` times (channel-major).
pub fn replicate_channels(plane: &Plane, channels: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(plane.data.len() * channels);
    for _ in 0..channels {
        out.extend_from_slice(&plane.data);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchitectureKind {
    /// `field_of_view` is the central fraction of the face crop it sees.
    Mlp { input_side: usize, hidden: usize, field_of_view: f64 },
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub id: String,
    pub kind: ArchitectureKind,
    /// Channels the backbone consumes; grayscale inputs are replicated.
    pub input_channels: usize,
}

/// `tiny` sees the central half of the aligned crop, where the face is.
const TINY_FIELD_OF_VIEW: f64 = 0.5;

pub const REGISTERED_ARCHITECTURES: &[&str] = &["tiny", "swin_t", "convnext_t"];

pub fn architecture(id: &str) -> Result<ArchitectureSpec> {
    let (kind, input_channels) = match id {
        "tiny" => (
            ArchitectureKind::Mlp {
                input_side: 32,
                hidden: 64,
                field_of_view: TINY_FIELD_OF_VIEW,
            },
            1,
        ),
        "swin_t" | "convnext_t" => (ArchitectureKind::External, 3),
        other => return Err(Error::UnknownArchitecture(other.to_string())),
    };
    Ok(ArchitectureSpec {
        id: id.to_string(),
        kind,
        input_channels,
    })
}

/// Dense ReLU network with one hidden layer and a softmax head.
///
/// Parameters live in one flat vector: `w1 (hidden x input)`, `b1`,
/// `w2 (classes x hidden)`, `b2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpClassifier {
    pub input_side: usize,
    pub channels: usize,
    pub hidden: usize,
    pub classes: Vec<ExpressionLabel>,
    #[serde(default = "full_view")]
    pub field_of_view: f64,
    pub params: Vec<f64>,
}

fn full_view() -> f64 {
    1.0
}

/// Per-sample network state kept for the backward pass.
struct Activations {
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl MlpClassifier {
    pub fn new(input_side: usize, channels: usize, hidden: usize, classes: Vec<ExpressionLabel>, rng: &mut impl Rng) -> Self {
        let input = input_side * input_side * channels;
        let k = classes.len();
        let mut params = Vec::with_capacity(hidden * input + hidden + k * hidden + k);
        let a1 = (6.0 / (input + hidden) as f64).sqrt();
        params.extend((0..hidden * input).map(|_| rng.random_range(-a1..a1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        let a2 = (6.0 / (hidden + k) as f64).sqrt();
        params.extend((0..k * hidden).map(|_| rng.random_range(-a2..a2)));
        params.extend(std::iter::repeat_n(0.0, k));
        MlpClassifier {
            input_side,
            channels,
            hidden,
            classes,
            field_of_view: 1.0,
            params,
        }
    }

    pub fn with_field_of_view(mut self, fraction: f64) -> Self {
        self.field_of_view = fraction;
        self
    }

    pub fn plane_from_gray(&self, img: &GrayImage) -> Plane {
        Plane::from_gray_center(img, self.input_side, self.field_of_view)
    }

    pub fn input_dim(&self) -> usize {
        self.input_side * self.input_side * self.channels
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input_dim();
        let b1 = w1 + self.hidden;
        let w2 = b1 + self.classes.len() * self.hidden;
        (w1, b1, w2)
    }

    /// Per-image standardized input: zero mean, unit variance.
    pub fn input_from_plane(&self, plane: &Plane) -> Vec<f64> {
        let n = plane.data.len().max(1) as f64;
        let mean = plane.data.iter().sum::<f64>() / n;
        let var = plane.data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-3);
        replicate_channels(plane, self.channels)
            .into_iter()
            .map(|v| (v - mean) / sd)
            .collect()
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let d = self.input_dim();
        let k = self.classes.len();
        let (o_b1, o_w2, o_b2) = self.offsets();
        let p = &self.params;
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &p[j * d..(j + 1) * d];
                let z = p[o_b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                z.max(0.0)
            })
            .collect();
        let logits: Vec<f64> = (0..k)
            .map(|c| {
                let row = &p[o_w2 + c * self.hidden..o_w2 + (c + 1) * self.hidden];
                p[o_b2 + c] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        Activations {
            hidden,
            probs: exp.into_iter().map(|e| e / total).collect(),
        }
    }

    /// Class probabilities in `self.classes` order.
    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).probs
    }

    /// Weighted mean cross-entropy over a batch and its gradient.
    ///
    /// Each item is (input, class index, weight); the loss is
    /// `sum(w_i * -log p_i) / sum(w_i)`.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize, f64)]) -> (f64, Vec<f64>) {
        let d = self.input_dim();
        let k = self.classes.len();
        let (o_b1, o_w2, o_b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let weight_sum: f64 = batch.iter().map(|b| b.2).sum();
        let mut loss = 0.0;
        for &(x, target, weight) in batch {
            let act = self.forward(x);
            loss += -weight * act.probs[target].max(f64::MIN_POSITIVE).ln();
            let scale = weight / weight_sum;
            let mut dhidden = vec![0.0; self.hidden];
            for c in 0..k {
                let dz = scale * (act.probs[c] - if c == target { 1.0 } else { 0.0 });
                grad[o_b2 + c] += dz;
                let w_row = o_w2 + c * self.hidden;
                for j in 0..self.hidden {
                    grad[w_row + j] += dz * act.hidden[j];
                    dhidden[j] += dz * self.params[w_row + j];
                }
            }
            for j in 0..self.hidden {
                if act.hidden[j] <= 0.0 {
                    continue;
                }
                let dz = dhidden[j];
                grad[o_b1 + j] += dz;
                let row = &mut grad[j * d..(j + 1) * d];
                for (g, v) in row.iter_mut().zip(x) {
                    *g += dz * v;
                }
            }
        }
        (loss / weight_sum, grad)
    }
}

/// Adam with the usual defaults for beta1/beta2/epsilon.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
    }
}
