//! Grayscale frames with intensities in `[0, 1]`.

use image::DynamicImage;

use crate::error::{Error, Result};

/// Row-major grayscale image. Pixel `(x, y)` covers `[x, x+1) x [y, y+1)`,
/// so its center sits at `(x + 0.5, y + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayFrame {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("frame must be nonempty".into()));
        }
        if data.len() != width * height {
            return Err(Error::Domain(format!(
                "frame data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    fn at_or_zero(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.data[y as usize * self.width + x as usize]
        }
    }

    /// Bilinear sample at continuous coordinates; pixels outside the image read as 0.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let gx = x - 0.5;
        let gy = y - 0.5;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let a = self.at_or_zero(xi, yi);
        let b = self.at_or_zero(xi + 1, yi);
        let c = self.at_or_zero(xi, yi + 1);
        let d = self.at_or_zero(xi + 1, yi + 1);
        // Integer coordinates must reproduce the pixel exactly.
        if fx == 0.0 && fy == 0.0 {
            return a;
        }
        (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
    }

    /// Converts a decoded image to gray levels in `[0, 1]` using ITU-R 601
    /// luma weights on the 8-bit (or 16-bit) channels.
    pub fn from_image(img: &DynamicImage) -> Result<Self> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data: Vec<f64> = match img {
            DynamicImage::ImageLuma8(g) => g.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(g) => g.pixels().map(|p| p.0[0] as f64 / 65535.0).collect(),
            DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
                .to_rgb16()
                .pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 65535.0)
                .collect(),
            _ => img
                .to_rgb8()
                .pixels()
                .map(|p| luma(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64) / 255.0)
                .collect(),
        };
        Self::new(w, h, data)
    }

    /// 8-bit grayscale export, rounding to the nearest level.
    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let v = self.get(x as usize, y as usize).clamp(0.0, 1.0);
            image::Luma([(v * 255.0).round() as u8])
        })
    }
}

fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_at_pixel_centers_is_exact() {
        let f = GrayFrame::from_fn(5, 4, |x, y| (x * 10 + y) as f64 / 100.0).unwrap();
        for y in 0..4 {
            for x in 0..5 {
                assert_eq!(f.sample(x as f64 + 0.5, y as f64 + 0.5), f.get(x, y));
            }
        }
    }

    #[test]
    fn sample_interpolates_and_zero_fills() {
        let f = GrayFrame::from_fn(2, 1, |x, _| x as f64).unwrap();
        assert!((f.sample(1.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(f.sample(-5.0, 0.5), 0.0);
        // Halfway between the last pixel and the zero fill.
        assert!((f.sample(2.0, 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(GrayFrame::new(0, 3, vec![]).is_err());
        assert!(GrayFrame::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn rgb_uses_601_weights() {
        let img = image::RgbImage::from_pixel(1, 1, image::Rgb([255, 0, 0]));
        let f = GrayFrame::from_image(&DynamicImage::ImageRgb8(img)).unwrap();
        assert!((f.get(0, 0) - 0.299).abs() < 1e-12);
    }
}
