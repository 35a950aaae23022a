//! Training-time augmentation on square single-channel planes in [0, 1].

use rand::Rng;

use super::config::AugmentationConfig;
use super::backbone::Plane;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub flip: bool,
    pub angle_degrees: f64,
    pub shift: (f64, f64),
    pub scale: f64,
    pub brightness: f64,
    pub contrast: f64,
}

impl AugmentParams {
    pub const IDENTITY: AugmentParams = AugmentParams {
        flip: false,
        angle_degrees: 0.0,
        shift: (0.0, 0.0),
        scale: 1.0,
        brightness: 1.0,
        contrast: 1.0,
    };

    pub fn sample(config: &AugmentationConfig, side: usize, rng: &mut impl Rng) -> Self {
        let sym = |rng: &mut dyn rand::RngCore, r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let t = config.translation * side as f64;
        AugmentParams {
            flip: rng.random_bool(config.flip_probability),
            angle_degrees: sym(rng, config.rotation_degrees),
            shift: (sym(rng, t), sym(rng, t)),
            scale: if config.scale_max > config.scale_min {
                rng.random_range(config.scale_min..=config.scale_max)
            } else {
                config.scale_min
            },
            brightness: 1.0 + sym(rng, config.brightness),
            contrast: 1.0 + sym(rng, config.contrast),
        }
    }
}

fn sample(plane: &Plane, x: f64, y: f64) -> f64 {
    let side = plane.side as isize;
    let fx = x - 0.5;
    let fy = y - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let at = |xi: isize, yi: isize| {
        if xi < 0 || yi < 0 || xi >= side || yi >= side {
            0.0
        } else {
            plane.data[(yi * side + xi) as usize]
        }
    };
    let (x0, y0) = (x0 as isize, y0 as isize);
    let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
    let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

pub fn apply(plane: &Plane, p: &AugmentParams) -> Plane {
    let n = plane.side;
    let c = n as f64 / 2.0;
    let (s, co) = p.angle_degrees.to_radians().sin_cos();
    let mut out = vec![0.0; n * n];
    for v in 0..n {
        for u in 0..n {
            // Inverse map: output -> un-shift -> un-rotate/scale -> un-flip.
            let ox = u as f64 + 0.5 - c - p.shift.0;
            let oy = v as f64 + 0.5 - c - p.shift.1;
            let mut sx = (co * ox + s * oy) / p.scale + c;
            let sy = (-s * ox + co * oy) / p.scale + c;
            if p.flip {
                sx = n as f64 - sx;
            }
            out[v * n + u] = sample(plane, sx, sy);
        }
    }
    let mean = out.iter().sum::<f64>() / out.len() as f64;
    for x in &mut out {
        *x = (((*x - mean) * p.contrast + mean) * p.brightness).clamp(0.0, 1.0);
    }
    Plane { side: n, data: out }
}
