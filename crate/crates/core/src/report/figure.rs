//! A minimal vector scene rendered both to SVG text and to an RGB raster.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, IoContext, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Color(pub u8, pub u8, pub u8);

impl Color {
    pub const WHITE: Color = Color(255, 255, 255);
    pub const BLACK: Color = Color(0, 0, 0);
    pub const GREY: Color = Color(150, 150, 150);

    fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    Start,
    Middle,
    End,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Rect {
        x: f64,
        y: f64,
        w: f64,
        h: f64,
        fill: Color,
    },
    Line {
        points: Vec<(f64, f64)>,
        stroke: Color,
        width: f64,
        dashed: bool,
    },
    /// Closed filled polygon.
    Area {
        points: Vec<(f64, f64)>,
        fill: Color,
        opacity: f64,
    },
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
        fill: Color,
        opacity: f64,
    },
    Text {
        x: f64,
        y: f64,
        text: String,
        size: f64,
        anchor: Anchor,
        fill: Color,
    },
}

/// Pixel-space scene with the origin at the top left.
#[derive(Clone, Debug, PartialEq)]
pub struct Figure {
    pub width: u32,
    pub height: u32,
    pub shapes: Vec<Shape>,
}

impl Figure {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            shapes: vec![Shape::Rect {
                x: 0.0,
                y: 0.0,
                w: width as f64,
                h: height as f64,
                fill: Color::WHITE,
            }],
        }
    }

    pub fn push(&mut self, shape: Shape) {
        self.shapes.push(shape);
    }

    pub fn text(&mut self, x: f64, y: f64, text: impl Into<String>, size: f64, anchor: Anchor) {
        self.push(Shape::Text {
            x,
            y,
            text: text.into(),
            size,
            anchor,
            fill: Color::BLACK,
        });
    }

    pub fn to_svg(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = self.width,
            h = self.height
        );
        for shape in &self.shapes {
            let _ = match shape {
                Shape::Rect { x, y, w, h, fill } => writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{}"/>"#,
                    fill.hex()
                ),
                Shape::Line {
                    points,
                    stroke,
                    width,
                    dashed,
                } => writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="{width}"{}/>"#,
                    svg_points(points),
                    stroke.hex(),
                    if *dashed { r#" stroke-dasharray="6 4""# } else { "" }
                ),
                Shape::Area { points, fill, opacity } => writeln!(
                    s,
                    r#"<polygon points="{}" fill="{}" fill-opacity="{opacity}" stroke="none"/>"#,
                    svg_points(points),
                    fill.hex()
                ),
                Shape::Circle {
                    cx,
                    cy,
                    r,
                    fill,
                    opacity,
                } => writeln!(
                    s,
                    r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}" fill="{}" fill-opacity="{opacity}"/>"#,
                    fill.hex()
                ),
                Shape::Text {
                    x,
                    y,
                    text,
                    size,
                    anchor,
                    fill,
                } => writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" text-anchor="{}" fill="{}">{}</text>"#,
                    match anchor {
                        Anchor::Start => "start",
                        Anchor::Middle => "middle",
                        Anchor::End => "end",
                    },
                    fill.hex(),
                    xml_escape(text)
                ),
            };
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn rasterize(&self) -> RgbImage {
        let mut img = RgbImage::from_pixel(self.width, self.height, Rgb([255, 255, 255]));
        for shape in &self.shapes {
            match shape {
                Shape::Rect { x, y, w, h, fill } => {
                    let poly = [(*x, *y), (x + w, *y), (x + w, y + h), (*x, y + h)];
                    fill_polygon(&mut img, &poly, *fill, 1.0);
                }
                Shape::Line {
                    points,
                    stroke,
                    width,
                    dashed,
                } => {
                    let segments = if *dashed { dash(points, 6.0, 4.0) } else { vec![points.clone()] };
                    for seg in segments {
                        for w in seg.windows(2) {
                            stroke_segment(&mut img, w[0], w[1], *width, *stroke);
                        }
                    }
                }
                Shape::Area { points, fill, opacity } => fill_polygon(&mut img, points, *fill, *opacity),
                Shape::Circle {
                    cx,
                    cy,
                    r,
                    fill,
                    opacity,
                } => fill_circle(&mut img, *cx, *cy, *r, *fill, *opacity),
                Shape::Text {
                    x,
                    y,
                    text,
                    size,
                    anchor,
                    fill,
                } => draw_text(&mut img, *x, *y, text, *size, *anchor, *fill),
            }
        }
        img
    }

    /// Writes `<stem>.svg` and `<stem>.png`.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<[PathBuf; 2]> {
        let stem = stem.as_ref();
        let svg = stem.with_extension("svg");
        let png = stem.with_extension("png");
        std::fs::write(&svg, self.to_svg()).at(&svg)?;
        self.rasterize()
            .save(&png)
            .map_err(|source| Error::Image { path: png.clone(), source })?;
        Ok([svg, png])
    }
}

fn svg_points(points: &[(f64, f64)]) -> String {
    points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn blend(img: &mut RgbImage, x: i64, y: i64, c: Color, alpha: f64) {
    if x < 0 || y < 0 || x >= img.width() as i64 || y >= img.height() as i64 {
        return;
    }
    let p = img.get_pixel_mut(x as u32, y as u32);
    for (k, v) in [c.0, c.1, c.2].into_iter().enumerate() {
        p.0[k] = (p.0[k] as f64 * (1.0 - alpha) + v as f64 * alpha).round() as u8;
    }
}

/// Even-odd scanline fill sampled at pixel centres.
fn fill_polygon(img: &mut RgbImage, points: &[(f64, f64)], c: Color, alpha: f64) {
    if points.len() < 3 {
        return;
    }
    let y_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor().max(0.0) as i64;
    let y_max = points
        .iter()
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max)
        .ceil()
        .min(img.height() as f64) as i64;
    let mut xs = Vec::new();
    for py in y_min..y_max {
        let yc = py as f64 + 0.5;
        xs.clear();
        for i in 0..points.len() {
            let (x0, y0) = points[i];
            let (x1, y1) = points[(i + 1) % points.len()];
            if (y0 <= yc) != (y1 <= yc) {
                xs.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = (pair[0] - 0.5).ceil() as i64;
            let end = (pair[1] - 0.5).floor() as i64;
            for px in start..=end {
                blend(img, px, py, c, alpha);
            }
        }
    }
}

fn stroke_segment(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), width: f64, c: Color) {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return;
    }
    let half = width.max(1.0) / 2.0;
    let (nx, ny) = (-dy / len * half, dx / len * half);
    let quad = [
        (a.0 + nx, a.1 + ny),
        (b.0 + nx, b.1 + ny),
        (b.0 - nx, b.1 - ny),
        (a.0 - nx, a.1 - ny),
    ];
    fill_polygon(img, &quad, c, 1.0);
    fill_circle(img, b.0, b.1, half, c, 1.0);
}

fn fill_circle(img: &mut RgbImage, cx: f64, cy: f64, r: f64, c: Color, alpha: f64) {
    let (x0, x1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
    let (y0, y1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
    for py in y0..=y1 {
        for px in x0..=x1 {
            let (ex, ey) = (px as f64 + 0.5 - cx, py as f64 + 0.5 - cy);
            if ex * ex + ey * ey <= r * r {
                blend(img, px, py, c, alpha);
            }
        }
    }
}

fn dash(points: &[(f64, f64)], on: f64, off: f64) -> Vec<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    let mut current = vec![points[0]];
    let (mut drawing, mut left) = (true, on);
    for w in points.windows(2) {
        let (mut p, q) = (w[0], w[1]);
        let mut remaining = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        while remaining > left {
            let t = left / remaining;
            p = (p.0 + (q.0 - p.0) * t, p.1 + (q.1 - p.1) * t);
            remaining -= left;
            if drawing {
                current.push(p);
                out.push(std::mem::take(&mut current));
            } else {
                current = vec![p];
            }
            drawing = !drawing;
            left = if drawing { on } else { off };
        }
        left -= remaining;
        if drawing {
            current.push(q);
        }
    }
    if drawing && current.len() > 1 {
        out.push(current);
    }
    out
}

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5×7 bitmap glyphs, one row per byte with the leftmost column in bit 4.
fn glyph(c: char) -> [u8; GLYPH_H] {
    match c.to_ascii_uppercase() {
        '0' => [0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E],
        '1' => [0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E],
        '2' => [0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F],
        '3' => [0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E],
        '4' => [0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02],
        '5' => [0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E],
        '6' => [0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E],
        '7' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E],
        '9' => [0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C],
        'A' => [0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11],
        'B' => [0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E],
        'C' => [0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E],
        'D' => [0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C],
        'E' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F],
        'F' => [0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10],
        'G' => [0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F],
        'H' => [0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11],
        'I' => [0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E],
        'J' => [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C],
        'K' => [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
        'L' => [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F],
        'M' => [0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11],
        'N' => [0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11],
        'O' => [0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'P' => [0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10],
        'Q' => [0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D],
        'R' => [0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11],
        'S' => [0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E],
        'T' => [0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
        'U' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E],
        'V' => [0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04],
        'W' => [0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A],
        'X' => [0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11],
        'Y' => [0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04],
        'Z' => [0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C],
        ',' => [0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08],
        '-' => [0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00],
        '+' => [0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00],
        '±' => [0x04, 0x04, 0x1F, 0x04, 0x04, 0x00, 0x1F],
        ':' => [0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00],
        '=' => [0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00],
        '(' => [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
        ')' => [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
        '/' => [0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00],
        '%' => [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
        '_' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F],
        _ => [0; GLYPH_H],
    }
}

/// Bitmap text whose baseline sits at `y`; the glyph scale is the nearest integer to `size / 9`.
fn draw_text(img: &mut RgbImage, x: f64, y: f64, text: &str, size: f64, anchor: Anchor, c: Color) {
    let scale = (size / 9.0).round().max(1.0) as i64;
    let advance = (GLYPH_W as i64 + 1) * scale;
    let width = advance * text.chars().count() as i64 - scale;
    let left = match anchor {
        Anchor::Start => x.round() as i64,
        Anchor::Middle => x.round() as i64 - width / 2,
        Anchor::End => x.round() as i64 - width,
    };
    let top = y.round() as i64 - GLYPH_H as i64 * scale;
    for (k, ch) in text.chars().enumerate() {
        let rows = glyph(ch);
        let gx = left + k as i64 * advance;
        for (r, bits) in rows.iter().enumerate() {
            for col in 0..GLYPH_W {
                if bits >> (GLYPH_W - 1 - col) & 1 == 1 {
                    for sy in 0..scale {
                        for sx in 0..scale {
                            blend(img, gx + col as i64 * scale + sx, top + r as i64 * scale + sy, c, 1.0);
                        }
                    }
                }
            }
        }
    }
}
