//! Raster types shared by every stage, binary PGM/PPM I/O, grayscale
//! conversion and the two geometric primitives (crop, rotate).
//!
//! Coordinates are `x` = column, `y` = row, origin at the top-left pixel.
//! All pixel buffers are row-major.

use std::fmt;

use thiserror::Error;

/// Largest rotation accepted by [`rotate`], in degrees.
pub const MAX_ROTATION_DEG: f64 = 45.0;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("malformed PNM header: {0}")]
    MalformedHeader(String),
    #[error("truncated PNM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unsupported PNM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("rectangle {rect} does not fit inside a {width}x{height} image")]
    OutOfBounds { rect: Rect, width: usize, height: usize },
    #[error("rotation of {0} degrees is outside the supported range")]
    AngleOutOfRange(f64),
    #[error("pixel buffer of length {len} does not match {width}x{height}")]
    DimensionMismatch { len: usize, width: usize, height: usize },
}

pub type Result<T> = std::result::Result<T, ImageError>;

/// Axis-aligned rectangle in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub const fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.right() <= width && self.bottom() <= height
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Overlap area divided by union area, in [0, 1].
    pub fn overlap_over_union(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Rect) -> Rect {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Grows the rectangle by `margin` on every side, clipped to the image.
    pub fn padded(&self, margin: usize, width: usize, height: usize) -> Rect {
        let x0 = self.x.saturating_sub(margin);
        let y0 = self.y.saturating_sub(margin);
        let x1 = (self.right() + margin).min(width);
        let y1 = (self.bottom() + margin).min(height);
        Rect::new(x0, y0, x1 - x0, y1 - y0)
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.w, self.h, self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len() * 3
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len()
    }

    /// (min, max) intensity; `None` for an empty image.
    pub fn min_max(&self) -> Option<(u8, u8)> {
        min_max(self.pixels.iter().copied())
    }
}

/// Pixel label of a binarized raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ink {
    Foreground,
    Background,
}

/// Two-level raster; `true` marks foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    pixels: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![false; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<bool>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImageError::DimensionMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image from rows of `'#'` (foreground) and anything else
    /// (background). Handy for tests and fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut img = Self::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            assert_eq!(row.chars().count(), width, "ragged ascii raster");
            for (x, c) in row.chars().enumerate() {
                img.set(x, y, c == '#');
            }
        }
        img
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x]
    }

    pub fn ink(&self, x: usize, y: usize) -> Ink {
        if self.get(x, y) {
            Ink::Foreground
        } else {
            Ink::Background
        }
    }

    pub fn set(&mut self, x: usize, y: usize, fg: bool) {
        self.pixels[y * self.width + x] = fg;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn byte_len(&self) -> usize {
        self.pixels.len()
    }

    pub fn crop(&self, r: Rect) -> Result<BinaryImage> {
        check_rect(r, self.width, self.height)?;
        let mut pixels = Vec::with_capacity(r.area());
        for y in r.y..r.bottom() {
            pixels.extend_from_slice(&self.pixels[y * self.width + r.x..y * self.width + r.right()]);
        }
        Ok(BinaryImage {
            width: r.w,
            height: r.h,
            pixels,
        })
    }

    /// Tight bounding box of the foreground, if any.
    pub fn foreground_bbox(&self) -> Option<Rect> {
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0 != usize::MAX).then(|| Rect::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }

    /// Renders foreground as 0 and background as 255.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| if p { 0 } else { 255 }).collect(),
        }
    }
}

/// Either flavour of decoded PNM file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PnmImage {
    Gray(GrayImage),
    Color(ColorImage),
}

impl PnmImage {
    pub fn into_gray(self) -> GrayImage {
        match self {
            PnmImage::Gray(g) => g,
            PnmImage::Color(c) => to_grayscale(&c),
        }
    }
}

/// Borrowed image handed to [`save_pnm`].
#[derive(Debug, Clone, Copy)]
pub enum PnmRef<'a> {
    Gray(&'a GrayImage),
    Binary(&'a BinaryImage),
    Color(&'a ColorImage),
}

impl<'a> From<&'a GrayImage> for PnmRef<'a> {
    fn from(img: &'a GrayImage) -> Self {
        PnmRef::Gray(img)
    }
}

impl<'a> From<&'a BinaryImage> for PnmRef<'a> {
    fn from(img: &'a BinaryImage) -> Self {
        PnmRef::Binary(img)
    }
}

impl<'a> From<&'a ColorImage> for PnmRef<'a> {
    fn from(img: &'a ColorImage) -> Self {
        PnmRef::Color(img)
    }
}

pub(crate) fn min_max(it: impl Iterator<Item = u8>) -> Option<(u8, u8)> {
    it.fold(None, |acc, v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Luma conversion with weights 0.299 / 0.587 / 0.114, rounded half up.
///
/// Evaluated in integer thousandths so `(v, v, v)` maps back to `v` exactly.
pub fn to_grayscale(img: &ColorImage) -> GrayImage {
    let pixels = img.pixels.iter().map(|&rgb| luma(rgb)).collect();
    GrayImage {
        width: img.width,
        height: img.height,
        pixels,
    }
}

#[inline]
pub fn luma([r, g, b]: [u8; 3]) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000).min(255) as u8
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(ImageError::MalformedHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ImageError::MalformedHeader(format!("{what} out of range")))
    }
}

/// Decodes a binary PGM (`P5`) or PPM (`P6`) file with maxval 255.
pub fn load_pnm(bytes: &[u8]) -> Result<PnmImage> {
    if bytes.len() < 2 {
        return Err(ImageError::MalformedHeader("missing magic number".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(ImageError::MalformedHeader(format!(
                "unsupported magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(ImageError::MalformedHeader("zero image dimension".into()));
    }
    if maxval != 255 {
        return Err(ImageError::UnsupportedMaxval(maxval));
    }
    match bytes.get(rd.pos) {
        Some(c) if c.is_ascii_whitespace() => rd.pos += 1,
        _ => {
            return Err(ImageError::MalformedHeader(
                "expected a single whitespace after maxval".into(),
            ))
        }
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| ImageError::MalformedHeader("image dimensions overflow".into()))?;
    let payload = &bytes[rd.pos..];
    if payload.len() < expected {
        return Err(ImageError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let payload = &payload[..expected];
    Ok(if channels == 1 {
        PnmImage::Gray(GrayImage {
            width,
            height,
            pixels: payload.to_vec(),
        })
    } else {
        PnmImage::Color(ColorImage {
            width,
            height,
            pixels: payload.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    })
}

/// Encodes an image as binary PGM/PPM. Binary images are written as PGM
/// with foreground = 0 and background = 255.
pub fn save_pnm<'a>(img: impl Into<PnmRef<'a>>) -> Vec<u8> {
    let img = img.into();
    let (magic, w, h) = match img {
        PnmRef::Gray(g) => ("P5", g.width, g.height),
        PnmRef::Binary(b) => ("P5", b.width, b.height),
        PnmRef::Color(c) => ("P6", c.width, c.height),
    };
    let mut out = format!("{magic}\n{w} {h}\n255\n").into_bytes();
    match img {
        PnmRef::Gray(g) => out.extend_from_slice(&g.pixels),
        PnmRef::Binary(b) => out.extend(b.pixels.iter().map(|&p| if p { 0u8 } else { 255 })),
        PnmRef::Color(c) => out.extend(c.pixels.iter().flatten()),
    }
    out
}

fn check_rect(r: Rect, width: usize, height: usize) -> Result<()> {
    if r.fits_in(width, height) {
        Ok(())
    } else {
        Err(ImageError::OutOfBounds {
            rect: r,
            width,
            height,
        })
    }
}

pub fn crop(img: &GrayImage, r: Rect) -> Result<GrayImage> {
    check_rect(r, img.width, img.height)?;
    let mut pixels = Vec::with_capacity(r.area());
    for y in r.y..r.bottom() {
        pixels.extend_from_slice(&img.row(y)[r.x..r.right()]);
    }
    Ok(GrayImage {
        width: r.w,
        height: r.h,
        pixels,
    })
}

/// Size of the canvas that holds a `w`x`h` image rotated by `angle_deg`.
/// Parity of each side is kept so the centre pixel stays on the grid.
pub fn rotated_canvas(w: usize, h: usize, angle_deg: f64) -> (usize, usize) {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (s, c) = (s.abs(), c.abs());
    let fit = |len: f64, orig: usize| {
        let mut n = ((len - 1e-9).ceil() as usize).max(orig.min(1));
        if n % 2 != orig % 2 {
            n += 1;
        }
        n
    };
    (
        fit(w as f64 * c + h as f64 * s, w),
        fit(w as f64 * s + h as f64 * c, h),
    )
}

/// Rotates counter-clockwise (as displayed) by `angle_deg` about the image
/// centre. The canvas grows to hold the rotated frame; pixels that map
/// outside the source take `fill`. Resampling is bilinear inverse mapping.
pub fn rotate(img: &GrayImage, angle_deg: f64, fill: u8) -> Result<GrayImage> {
    if !angle_deg.is_finite() || angle_deg.abs() > MAX_ROTATION_DEG {
        return Err(ImageError::AngleOutOfRange(angle_deg));
    }
    if angle_deg == 0.0 {
        return Ok(img.clone());
    }
    let (ow, oh) = rotated_canvas(img.width, img.height, angle_deg);
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (icx, icy) = ((img.width as f64 - 1.0) / 2.0, (img.height as f64 - 1.0) / 2.0);
    let (ocx, ocy) = ((ow as f64 - 1.0) / 2.0, (oh as f64 - 1.0) / 2.0);
    let mut out = GrayImage::new(ow, oh, fill);
    let (w, h) = (img.width as isize, img.height as isize);
    for y in 0..oh {
        let dy = y as f64 - ocy;
        for x in 0..ow {
            let dx = x as f64 - ocx;
            // Inverse of the displayed counter-clockwise rotation (y points down).
            let sx = dx * c - dy * s + icx;
            let sy = dx * s + dy * c + icy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            if x0 < -1 || y0 < -1 || x0 >= w || y0 >= h {
                continue;
            }
            let sample = |xx: isize, yy: isize| -> f64 {
                if xx < 0 || yy < 0 || xx >= w || yy >= h {
                    fill as f64
                } else {
                    img.pixels[yy as usize * img.width + xx as usize] as f64
                }
            };
            let top = sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx;
            let bottom = sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx;
            let v = top * (1.0 - fy) + bottom * fy;
            out.pixels[y * ow + x] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Separable Gaussian blur with edge clamping. `sigma <= 0` is the identity.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let norm: f64 = kernel.iter().sum();
    let (w, h) = (img.width as isize, img.height as isize);
    let mut tmp = vec![0f64; img.pixels.len()];
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .zip(-r..=r)
                .map(|(k, d)| k * img.pixels[(y * w + (x + d).clamp(0, w - 1)) as usize] as f64)
                .sum();
            tmp[(y * w + x) as usize] = acc / norm;
        }
    }
    let mut out = GrayImage::new(img.width, img.height, 0);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = kernel
                .iter()
                .zip(-r..=r)
                .map(|(k, d)| k * tmp[((y + d).clamp(0, h - 1) * w + x) as usize])
                .sum();
            out.pixels[(y * w + x) as usize] = (acc / norm).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}
