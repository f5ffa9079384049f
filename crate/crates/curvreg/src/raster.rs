//! Grayscale images and binary masks.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{point_in_polygon, Vec2};

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gray {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Gray {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, v: f64) -> Self {
        Self::new(width, height, vec![v; width * height])
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Reads PGM (P2/P5), PNG or GIF; colour inputs are converted to luma.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        let luma = img.to_luma16();
        let (w, h) = luma.dimensions();
        let data = luma.as_raw().iter().map(|&v| v as f64 / 65535.0).collect();
        Ok(Self::new(w as usize, h as usize, data))
    }

    /// Bilinear upsampling by an integer factor.
    pub fn upscale(&self, k: usize) -> Gray {
        if k <= 1 {
            return self.clone();
        }
        let (w, h) = (self.width * k, self.height * k);
        let mut out = Gray::filled(w, h, 0.0);
        for y in 0..h {
            let sy = ((y as f64 + 0.5) / k as f64 - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let fy = sy - y0 as f64;
            for x in 0..w {
                let sx = ((x as f64 + 0.5) / k as f64 - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let fx = sx - x0 as f64;
                let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
                let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
                out.set(x, y, top * (1.0 - fy) + bot * fy);
            }
        }
        out
    }

    /// Box-filter downsampling so that the longer side is at most `max_side`.
    pub fn fit_within(&self, max_side: usize) -> Gray {
        let side = self.width.max(self.height);
        if side <= max_side || max_side == 0 {
            return self.clone();
        }
        let f = side.div_ceil(max_side);
        let (w, h) = (self.width.div_ceil(f), self.height.div_ceil(f));
        let mut out = Gray::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                let (mut s, mut n) = (0.0, 0.0);
                for yy in y * f..((y + 1) * f).min(self.height) {
                    for xx in x * f..((x + 1) * f).min(self.width) {
                        s += self.get(xx, yy);
                        n += 1.0;
                    }
                }
                out.set(x, y, s / n);
            }
        }
        out
    }
}

/// Binary grid; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Out-of-range coordinates read as background.
    pub fn get_i(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Copy with `margin` background cells added on every side.
    pub fn padded(&self, margin: usize) -> Mask {
        let mut out = Mask::new(self.width + 2 * margin, self.height + 2 * margin);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    out.set(x + margin, y + margin, true);
                }
            }
        }
        out
    }

    /// Cells whose centre lies inside the polygon.
    pub fn from_polygon(width: usize, height: usize, poly: &[Vec2]) -> Mask {
        let mut m = Mask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if point_in_polygon(Vec2::new(x as f64, y as f64), poly) {
                    m.set(x, y, true);
                }
            }
        }
        m
    }

    pub fn disk(width: usize, height: usize, c: Vec2, r: f64) -> Mask {
        let mut m = Mask::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if Vec2::new(x as f64, y as f64).dist(c) <= r {
                    m.set(x, y, true);
                }
            }
        }
        m
    }
}

/// Foreground is every pixel darker than `threshold · max`.
pub fn binarize(img: &Gray, threshold: f64) -> Result<Mask> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::EmptyImage);
    }
    let max = img.data.iter().cloned().fold(0.0, f64::max);
    let cut = threshold * max;
    Ok(Mask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v < cut).collect(),
    })
}

/// Writes an 8-bit binary PGM (P5).
pub fn write_pgm8(path: &Path, img: &Gray) -> Result<()> {
    let mut buf = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    buf.extend(img.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    std::fs::write(path, buf)?;
    Ok(())
}
