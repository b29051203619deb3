use image::imageops::{self, FilterType};
use image::RgbaImage;

use super::MetricsError;

/// SSIM window side and Gaussian width.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Grayscale plane in [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Gray {
    /// Rec.601 luma; equal channels map to themselves exactly.
    pub fn from_rgba(img: &RgbaImage) -> Gray {
        let data = img
            .pixels()
            .map(|p| (299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32) as f64 / 1000.0)
            .collect();
        Gray {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Both images as grayscale at the reference's size; the candidate is resized bilinearly.
pub fn grayscale_pair(reference: &RgbaImage, candidate: &RgbaImage) -> (Gray, Gray) {
    let resized;
    let degenerate = |i: &RgbaImage| i.width() == 0 || i.height() == 0;
    let candidate = if candidate.dimensions() == reference.dimensions() || degenerate(candidate) || degenerate(reference) {
        candidate
    } else {
        resized = imageops::resize(candidate, reference.width(), reference.height(), FilterType::Triangle);
        &resized
    };
    (Gray::from_rgba(reference), Gray::from_rgba(candidate))
}

/// Mean squared grayscale difference.
pub fn mse(reference: &RgbaImage, candidate: &RgbaImage) -> Result<f64, MetricsError> {
    let (a, b) = grayscale_pair(reference, candidate);
    if a.data.is_empty() || a.data.len() != b.data.len() {
        return Err(MetricsError::EmptyImage);
    }
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.data.len() as f64)
}

/// Normalized 1-D Gaussian taps.
pub fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian filter over the valid region.
fn filter(img: &Gray, f: impl Fn(usize, usize) -> f64, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (w, h) = (img.width, img.height);
    let (ow, oh) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * f(x + i, y)).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean local SSIM (11×11 Gaussian window, σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim(reference: &RgbaImage, candidate: &RgbaImage) -> Result<f64, MetricsError> {
    let (a, b) = grayscale_pair(reference, candidate);
    ssim_gray(&a, &b)
}

pub fn ssim_gray(a: &Gray, b: &Gray) -> Result<f64, MetricsError> {
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(MetricsError::ImageTooSmall {
            width: a.width,
            height: a.height,
        });
    }
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::EmptyImage);
    }
    let k = gaussian_kernel();
    let mu_a = filter(a, |x, y| a.at(x, y), &k);
    let mu_b = filter(b, |x, y| b.at(x, y), &k);
    let aa = filter(a, |x, y| a.at(x, y) * a.at(x, y), &k);
    let bb = filter(b, |x, y| b.at(x, y) * b.at(x, y), &k);
    let ab = filter(a, |x, y| a.at(x, y) * b.at(x, y), &k);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = aa[i] - ma * ma;
            let var_b = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (var_a + var_b + C2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
