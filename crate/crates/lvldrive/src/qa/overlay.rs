//! Overlay rasterization onto RGB images and binary PPM (P6) output.

use std::io::Write;

use super::{OverlayKind, OverlayOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            pixels.extend_from_slice(&rgb);
        }
        Image { width, height, pixels }
    }

    pub fn set(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return;
        }
        let i = ((y as u32 * self.width + x as u32) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }
}

const ARROW_COLOR: [u8; 3] = [220, 30, 30];
const MASK_COLOR: [u8; 3] = [0, 0, 0];

/// Applies overlays in order. Masks fill solid black (idempotent); arrows
/// draw a 3 px wide line with a triangular head.
pub fn rasterize_overlays(mut img: Image, ops: &[OverlayOp]) -> Image {
    for op in ops {
        match &op.kind {
            OverlayKind::MaskRect { rect } => {
                let x0 = rect.x_min.floor().max(0.0) as i64;
                let y0 = rect.y_min.floor().max(0.0) as i64;
                let x1 = (rect.x_max.ceil() as i64).min(img.width as i64);
                let y1 = (rect.y_max.ceil() as i64).min(img.height as i64);
                for y in y0..y1 {
                    for x in x0..x1 {
                        img.set(x, y, MASK_COLOR);
                    }
                }
            }
            OverlayKind::Arrow { tail, head } => {
                draw_thick_line(&mut img, *tail, *head, ARROW_COLOR);
                draw_arrow_head(&mut img, *tail, *head, ARROW_COLOR);
            }
        }
    }
    img
}

fn draw_thick_line(img: &mut Image, a: [f64; 2], b: [f64; 2], rgb: [u8; 3]) {
    let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a[0] + t * (b[0] - a[0])).round() as i64;
        let y = (a[1] + t * (b[1] - a[1])).round() as i64;
        // 3 px wide: the pixel and its 8-neighborhood minus corners.
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            img.set(x + dx, y + dy, rgb);
        }
    }
}

fn draw_arrow_head(img: &mut Image, tail: [f64; 2], head: [f64; 2], rgb: [u8; 3]) {
    let dx = head[0] - tail[0];
    let dy = head[1] - tail[1];
    let norm = (dx * dx + dy * dy).sqrt();
    if norm < 1e-9 {
        return;
    }
    let dir = [dx / norm, dy / norm];
    let perp = [-dir[1], dir[0]];
    let base = [head[0] - dir[0] * 12.0, head[1] - dir[1] * 12.0];
    let left = [base[0] + perp[0] * 6.0, base[1] + perp[1] * 6.0];
    let right = [base[0] - perp[0] * 6.0, base[1] - perp[1] * 6.0];
    // Fill the triangle by sweeping lines from the head to the base edge.
    let sweep = 24;
    for s in 0..=sweep {
        let t = s as f64 / sweep as f64;
        let p = [
            left[0] + t * (right[0] - left[0]),
            left[1] + t * (right[1] - left[1]),
        ];
        draw_line(img, head, p, rgb);
    }
}

fn draw_line(img: &mut Image, a: [f64; 2], b: [f64; 2], rgb: [u8; 3]) {
    let steps = ((b[0] - a[0]).abs().max((b[1] - a[1]).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = (a[0] + t * (b[0] - a[0])).round() as i64;
        let y = (a[1] + t * (b[1] - a[1])).round() as i64;
        img.set(x, y, rgb);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{CameraName, Rect2D};

    #[test]
    fn empty_ops_is_identity() {
        let img = Image::filled(16, 16, [100, 120, 140]);
        let out = rasterize_overlays(img.clone(), &[]);
        assert_eq!(img, out);
    }

    #[test]
    fn full_mask_blacks_out() {
        let img = Image::filled(8, 8, [200, 200, 200]);
        let ops = vec![OverlayOp {
            kind: OverlayKind::MaskRect {
                rect: Rect2D { x_min: 0.0, y_min: 0.0, x_max: 8.0, y_max: 8.0 },
            },
            camera: CameraName::CAM_FRONT,
        }];
        let out = rasterize_overlays(img, &ops);
        assert!(out.pixels.iter().all(|&p| p == 0));
    }

    #[test]
    fn mask_is_idempotent() {
        let img = Image::filled(32, 32, [180, 50, 90]);
        let ops = vec![OverlayOp {
            kind: OverlayKind::MaskRect {
                rect: Rect2D { x_min: 4.0, y_min: 4.0, x_max: 20.0, y_max: 16.0 },
            },
            camera: CameraName::CAM_FRONT,
        }];
        let once = rasterize_overlays(img, &ops);
        let twice = rasterize_overlays(once.clone(), &ops);
        assert_eq!(once, twice);
    }

    #[test]
    fn arrow_colors_head_pixel() {
        let img = Image::filled(32, 32, [255, 255, 255]);
        let ops = vec![OverlayOp {
            kind: OverlayKind::Arrow { tail: [0.0, 0.0], head: [10.0, 10.0] },
            camera: CameraName::CAM_FRONT,
        }];
        let out = rasterize_overlays(img, &ops);
        assert_eq!(out.get(10, 10), ARROW_COLOR);
    }

    #[test]
    fn ppm_header() {
        let img = Image::filled(3, 2, [1, 2, 3]);
        let mut buf = Vec::new();
        img.write_ppm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n3 2\n255\n"));
        assert_eq!(buf.len(), 11 + 18);
    }
}
