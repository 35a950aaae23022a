//! Eye-based rotation, face cropping and grayscale conversion.
//!
//! The source is rotated about the eye midpoint so that the eye line becomes
//! horizontal. The crop is the detector box grown by a quarter of its size on
//! every side, squared about its center, and resampled to
//! `OUTPUT_SIDE x OUTPUT_SIDE`. Whatever falls outside the source is black.

use image::{GrayImage, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::manifest::BBox;

pub const OUTPUT_SIDE: u32 = 224;

/// Fraction of the box width/height added on each side before squaring.
const CROP_MARGIN: f64 = 0.25;

/// Maps between source pixel coordinates and output pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    /// Rotation of the eye line in the source, radians (image y axis points down).
    pub angle: f64,
    pub pivot: (f64, f64),
    /// Crop center in the aligned (de-rotated) frame.
    pub center: (f64, f64),
    /// Side of the square crop in source pixels.
    pub side: f64,
    pub output_side: u32,
}

impl CropTransform {
    fn rotate(p: (f64, f64), pivot: (f64, f64), angle: f64) -> (f64, f64) {
        let (s, c) = angle.sin_cos();
        let dx = p.0 - pivot.0;
        let dy = p.1 - pivot.1;
        (pivot.0 + c * dx - s * dy, pivot.1 + s * dx + c * dy)
    }

    fn scale(&self) -> f64 {
        self.side / self.output_side as f64
    }

    /// Source point to continuous output coordinates.
    pub fn to_output(&self, p: (f64, f64)) -> (f64, f64) {
        let q = Self::rotate(p, self.pivot, -self.angle);
        let half = self.side / 2.0;
        let k = self.scale();
        ((q.0 - (self.center.0 - half)) / k, (q.1 - (self.center.1 - half)) / k)
    }

    /// Continuous output coordinates to the source point they sample.
    pub fn to_source(&self, o: (f64, f64)) -> (f64, f64) {
        let half = self.side / 2.0;
        let k = self.scale();
        let q = (self.center.0 - half + o.0 * k, self.center.1 - half + o.1 * k);
        Self::rotate(q, self.pivot, self.angle)
    }
}

#[derive(Debug, Clone)]
pub struct AlignedFace {
    pub image: GrayImage,
    pub transform: CropTransform,
}

/// Angle of the line from `left` to `right`, in degrees.
pub fn eye_line_angle_degrees(left: (f64, f64), right: (f64, f64)) -> f64 {
    (right.1 - left.1).atan2(right.0 - left.0).to_degrees()
}

fn luma_plane(image: &RgbImage) -> Vec<f32> {
    image
        .pixels()
        .map(|p| 0.299 * p[0] as f32 + 0.587 * p[1] as f32 + 0.114 * p[2] as f32)
        .collect()
}

/// Bilinear sample with pixel centers at integer + 0.5; out-of-frame pixels are 0.
fn sample_bilinear(plane: &[f32], width: u32, height: u32, x: f64, y: f64) -> f32 {
    let fx = x - 0.5;
    let fy = y - 0.5;
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = (fx - x0) as f32;
    let ty = (fy - y0) as f32;
    let fetch = |xi: f64, yi: f64| -> f32 {
        if xi < 0.0 || yi < 0.0 || xi >= width as f64 || yi >= height as f64 {
            0.0
        } else {
            plane[yi as usize * width as usize + xi as usize]
        }
    };
    let a = fetch(x0, y0);
    let b = fetch(x0 + 1.0, y0);
    let c = fetch(x0, y0 + 1.0);
    let d = fetch(x0 + 1.0, y0 + 1.0);
    let top = a + (b - a) * tx;
    let bottom = c + (d - c) * tx;
    top + (bottom - top) * ty
}

/// Rotates the face upright, crops it and returns a 224x224 luma image
/// together with the coordinate transform that produced it.
///
/// `eye_left` is the eye with the smaller x coordinate; swapped inputs are
/// reordered.
pub fn align_and_crop(image: &RgbImage, eye_left: (f64, f64), eye_right: (f64, f64), bbox: BBox) -> Result<AlignedFace> {
    let (width, height) = image.dimensions();
    if eye_left == eye_right {
        return Err(Error::Alignment(format!("eye coordinates coincide at {eye_left:?}")));
    }
    if !bbox.intersects(width, height) {
        return Err(Error::Geometry(format!("face box {bbox:?} lies outside the {width}x{height} image")));
    }
    let (left, right) = if eye_left.0 <= eye_right.0 {
        (eye_left, eye_right)
    } else {
        (eye_right, eye_left)
    };

    let angle = (right.1 - left.1).atan2(right.0 - left.0);
    let pivot = ((left.0 + right.0) / 2.0, (left.1 + right.1) / 2.0);
    let side = (bbox.width as f64).max(bbox.height as f64) * (1.0 + 2.0 * CROP_MARGIN);
    let center = CropTransform::rotate(bbox.center(), pivot, -angle);
    let transform = CropTransform {
        angle,
        pivot,
        center,
        side,
        output_side: OUTPUT_SIDE,
    };

    let plane = luma_plane(image);
    let mut out = GrayImage::new(OUTPUT_SIDE, OUTPUT_SIDE);
    for (u, v, px) in out.enumerate_pixels_mut() {
        let (sx, sy) = transform.to_source((u as f64 + 0.5, v as f64 + 0.5));
        let value = sample_bilinear(&plane, width, height, sx, sy);
        *px = Luma([value.round().clamp(0.0, 255.0) as u8]);
    }
    Ok(AlignedFace { image: out, transform })
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn canvas(w: u32, h: u32) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb([200, 200, 200]))
    }

    #[test]
    fn horizontal_eyes_need_no_rotation() {
        let img = canvas(300, 300);
        let face = align_and_crop(&img, (100.0, 120.0), (200.0, 120.0), BBox::new(80, 80, 140, 140)).unwrap();
        assert_eq!(face.transform.angle, 0.0);
        assert_eq!(face.image.dimensions(), (224, 224));
    }

    #[test]
    fn diagonal_eyes_rotate_by_45_degrees() {
        let img = canvas(300, 300);
        let face = align_and_crop(&img, (100.0, 100.0), (200.0, 200.0), BBox::new(60, 60, 180, 180)).unwrap();
        assert!((face.transform.angle.to_degrees() - 45.0).abs() < 1e-12);
        let l = face.transform.to_output((100.0, 100.0));
        let r = face.transform.to_output((200.0, 200.0));
        assert!(eye_line_angle_degrees(l, r).abs() < 1e-9);
    }

    #[test]
    fn transform_round_trips() {
        let img = canvas(200, 160);
        let face = align_and_crop(&img, (70.0, 80.0), (130.0, 60.0), BBox::new(40, 30, 120, 110)).unwrap();
        let p = (91.25, 47.5);
        let back = face.transform.to_source(face.transform.to_output(p));
        assert!((back.0 - p.0).abs() < 1e-9 && (back.1 - p.1).abs() < 1e-9);
    }

    #[test]
    fn crop_leaving_the_frame_is_padded_black() {
        let img = canvas(100, 100);
        let face = align_and_crop(&img, (20.0, 30.0), (60.0, 30.0), BBox::new(0, 0, 80, 80)).unwrap();
        assert_eq!(face.image.get_pixel(0, 0)[0], 0);
        assert_eq!(face.image.get_pixel(112, 112)[0], 200);
    }

    #[test]
    fn luma_weights() {
        let img = RgbImage::from_pixel(50, 50, Rgb([255, 0, 0]));
        let face = align_and_crop(&img, (15.0, 25.0), (35.0, 25.0), BBox::new(20, 20, 10, 10)).unwrap();
        // 0.299 * 255 = 76.2
        assert_eq!(face.image.get_pixel(112, 112)[0], 76);
    }

    #[test]
    fn coincident_eyes_fail() {
        let err = align_and_crop(&canvas(50, 50), (10.0, 10.0), (10.0, 10.0), BBox::new(0, 0, 20, 20)).unwrap_err();
        assert!(matches!(err, Error::Alignment(_)));
    }

    #[test]
    fn box_outside_image_fails() {
        let err = align_and_crop(&canvas(50, 50), (10.0, 10.0), (20.0, 10.0), BBox::new(60, 60, 20, 20)).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn rotated_marker_lands_on_the_horizontal() {
        // Two dark dots on a tilted line end up on the same output row.
        let mut img = canvas(240, 240);
        let angle = 30f64.to_radians();
        let mid = (120.0, 120.0);
        let half = 40.0;
        let l = (mid.0 - half * angle.cos(), mid.1 - half * angle.sin());
        let r = (mid.0 + half * angle.cos(), mid.1 + half * angle.sin());
        for (x, y, p) in img.enumerate_pixels_mut() {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            for e in [l, r] {
                if (fx - e.0).powi(2) + (fy - e.1).powi(2) < 25.0 {
                    *p = Rgb([0, 0, 0]);
                }
            }
        }
        let face = align_and_crop(&img, l, r, BBox::new(60, 60, 120, 120)).unwrap();
        let centroid = |x_range: std::ops::Range<u32>| {
            let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
            for y in 0..224 {
                for x in x_range.clone() {
                    let dark = 200.0 - face.image.get_pixel(x, y)[0] as f64;
                    if dark > 20.0 {
                        sx += dark * (x as f64 + 0.5);
                        sy += dark * (y as f64 + 0.5);
                        n += dark;
                    }
                }
            }
            (sx / n, sy / n)
        };
        let a = centroid(0..112);
        let b = centroid(112..224);
        assert!(eye_line_angle_degrees(a, b).abs() < 0.5);
    }
}
