use image::{ImageFormat, RgbaImage};
use sha2::{Digest, Sha256};
use std::io::Cursor;
use std::path::Path;

use super::{BBox, MetadataError};

pub fn load_image(path: &Path) -> Result<RgbaImage, MetadataError> {
    let bytes = std::fs::read(path).map_err(|source| MetadataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_png(&bytes).map_err(|message| MetadataError::Image {
        path: path.to_path_buf(),
        message,
    })
}

pub fn decode_png(bytes: &[u8]) -> Result<RgbaImage, String> {
    image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map(|img| img.to_rgba8())
        .map_err(|e| e.to_string())
}

pub fn encode_png(img: &RgbaImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory png encoding");
    out.into_inner()
}

/// SHA-256 over dimensions and raw RGBA samples; independent of the container encoding.
pub fn image_digest(img: &RgbaImage) -> String {
    let mut h = Sha256::new();
    h.update(img.width().to_le_bytes());
    h.update(img.height().to_le_bytes());
    h.update(img.as_raw());
    hex::encode(h.finalize())
}

/// Copy the pixels under `bbox`, clamped to the image bounds.
pub fn crop_region(image: &RgbaImage, bbox: &BBox) -> Result<RgbaImage, MetadataError> {
    let bounds = BBox::new(0, 0, image.width() as i64, image.height() as i64);
    let clamped = bbox.clamp_to(&bounds);
    if clamped.is_degenerate() {
        return Err(MetadataError::EmptyCrop(*bbox));
    }
    Ok(image::imageops::crop_imm(
        image,
        clamped.x as u32,
        clamped.y as u32,
        clamped.w as u32,
        clamped.h as u32,
    )
    .to_image())
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgba;

    fn gradient(w: u32, h: u32) -> RgbaImage {
        RgbaImage::from_fn(w, h, |x, y| Rgba([x as u8, y as u8, (x * y) as u8, 255]))
    }

    #[test]
    fn full_crop_is_identity() {
        let img = gradient(20, 12);
        let out = crop_region(&img, &BBox::new(0, 0, 20, 12)).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn single_pixel_crop() {
        let img = gradient(20, 12);
        let out = crop_region(&img, &BBox::new(0, 0, 1, 1)).unwrap();
        assert_eq!(out.dimensions(), (1, 1));
        assert_eq!(out.get_pixel(0, 0), img.get_pixel(0, 0));
    }

    #[test]
    fn crop_past_right_edge_is_clamped() {
        let img = gradient(20, 12);
        let out = crop_region(&img, &BBox::new(10, 2, 15, 5)).unwrap();
        assert_eq!(out.dimensions(), (10, 5));
        assert_eq!(out.get_pixel(0, 0), img.get_pixel(10, 2));
    }

    #[test]
    fn empty_crop_rejected() {
        let img = gradient(20, 12);
        assert!(matches!(
            crop_region(&img, &BBox::new(30, 0, 5, 5)),
            Err(MetadataError::EmptyCrop(_))
        ));
        assert!(crop_region(&img, &BBox::new(3, 3, 0, 4)).is_err());
    }

    #[test]
    fn recrop_of_full_rect_is_stable() {
        let img = gradient(20, 12);
        let first = crop_region(&img, &BBox::new(-4, 3, 11, 30)).unwrap();
        let full = BBox::new(0, 0, first.width() as i64, first.height() as i64);
        assert_eq!(crop_region(&first, &full).unwrap(), first);
    }

    #[test]
    fn png_round_trip_and_digest() {
        let img = gradient(9, 7);
        let back = decode_png(&encode_png(&img)).unwrap();
        assert_eq!(back, img);
        assert_eq!(image_digest(&back), image_digest(&img));
        assert_ne!(image_digest(&gradient(7, 9)), image_digest(&img));
    }
}
