//! Minimal line-plot rasterizer for sweep curves.

use std::path::Path;

use anyhow::Result;
use image::{Rgb, RgbImage};

const W: u32 = 480;
const H: u32 = 320;
const MARGIN: i64 = 32;

fn line(img: &mut RgbImage, (mut x0, mut y0): (i64, i64), (x1, y1): (i64, i64), c: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let mut err = dx + dy;
    loop {
        if (0..W as i64).contains(&x0) && (0..H as i64).contains(&y0) {
            img.put_pixel(x0 as u32, y0 as u32, c);
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
}

/// Each series is scaled to its own range and drawn over the shared x axis.
pub fn line_plot(xs: &[f64], series: &[(&[f64], Rgb<u8>)], path: &Path) -> Result<()> {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let black = Rgb([0, 0, 0]);
    let (left, right, top, bottom) = (MARGIN, W as i64 - MARGIN, MARGIN, H as i64 - MARGIN);
    line(&mut img, (left, bottom), (right, bottom), black);
    line(&mut img, (left, bottom), (left, top), black);

    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        }
    };
    let (x_lo, x_hi) = span(xs);
    let px = |x: f64| left + ((x - x_lo) / (x_hi - x_lo) * (right - left) as f64).round() as i64;
    for (ys, color) in series {
        let (y_lo, y_hi) = span(ys);
        let py = |y: f64| bottom - ((y - y_lo) / (y_hi - y_lo) * (bottom - top) as f64).round() as i64;
        let pts: Vec<(i64, i64)> = xs.iter().zip(ys.iter()).map(|(&x, &y)| (px(x), py(y))).collect();
        for w in pts.windows(2) {
            line(&mut img, w[0], w[1], *color);
        }
        for &(x, y) in &pts {
            for d in -2..=2 {
                line(&mut img, (x - 2, y + d), (x + 2, y + d), *color);
            }
        }
    }
    img.save(path)?;
    Ok(())
}
