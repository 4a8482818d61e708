//! Minimal PNG chart rendering for the report command: loss curves,
//! confusion-matrix heatmap, and class-distribution bars. Drawn directly
//! onto pixel buffers (no font rendering); the numbers behind every plot
//! live in `report.json`.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};

const WIDTH: u32 = 800;
const HEIGHT: u32 = 500;
const MARGIN: u32 = 50;

const BACKGROUND: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([40, 40, 40]);
const GRID: Rgb<u8> = Rgb([225, 225, 225]);

/// Line colors cycled across series.
pub const SERIES_COLORS: [Rgb<u8>; 5] = [
    Rgb([31, 119, 180]),
    Rgb([255, 127, 14]),
    Rgb([44, 160, 44]),
    Rgb([214, 39, 40]),
    Rgb([148, 103, 189]),
];

fn blank(width: u32, height: u32) -> RgbImage {
    RgbImage::from_pixel(width, height, BACKGROUND)
}

fn draw_line(img: &mut RgbImage, from: (f64, f64), to: (f64, f64), color: Rgb<u8>) {
    let (x0, y0) = from;
    let (x1, y1) = to;
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let x = x0 + (x1 - x0) * t;
        let y = y0 + (y1 - y0) * t;
        let (xi, yi) = (x.round() as i64, y.round() as i64);
        if xi >= 0 && yi >= 0 && (xi as u32) < img.width() && (yi as u32) < img.height() {
            img.put_pixel(xi as u32, yi as u32, color);
        }
    }
}

fn draw_axes(img: &mut RgbImage) {
    let w = img.width() as f64;
    let h = img.height() as f64;
    let m = MARGIN as f64;
    draw_line(img, (m, h - m), (w - m, h - m), AXIS);
    draw_line(img, (m, m), (m, h - m), AXIS);
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path)
        .map_err(|e| Error::format(format!("writing plot {}: {e}", path.display())))
}

/// Multi-series line chart; one polyline per named series over an
/// implicit 0..len x-axis.
pub fn render_line_chart(series: &[(&str, &[f64])], path: &Path) -> Result<()> {
    let mut img = blank(WIDTH, HEIGHT);
    let points: Vec<f64> = series
        .iter()
        .flat_map(|(_, ys)| ys.iter().copied())
        .filter(|v| v.is_finite())
        .collect();
    if points.is_empty() {
        draw_axes(&mut img);
        return save(&img, path);
    }
    let y_min = points.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = points.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (y_max - y_min).max(1e-12);
    let max_len = series.iter().map(|(_, ys)| ys.len()).max().unwrap_or(1).max(2);

    let plot_w = (WIDTH - 2 * MARGIN) as f64;
    let plot_h = (HEIGHT - 2 * MARGIN) as f64;
    let to_xy = |i: usize, v: f64| -> (f64, f64) {
        let x = MARGIN as f64 + plot_w * i as f64 / (max_len - 1) as f64;
        let y = (HEIGHT - MARGIN) as f64 - plot_h * (v - y_min) / span;
        (x, y)
    };

    // Light horizontal grid at quartiles.
    for q in 1..4 {
        let v = y_min + span * q as f64 / 4.0;
        let (_, y) = to_xy(0, v);
        draw_line(&mut img, (MARGIN as f64, y), ((WIDTH - MARGIN) as f64, y), GRID);
    }
    draw_axes(&mut img);

    for (si, (_, ys)) in series.iter().enumerate() {
        let color = SERIES_COLORS[si % SERIES_COLORS.len()];
        let finite: Vec<(usize, f64)> = ys
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .collect();
        for pair in finite.windows(2) {
            draw_line(&mut img, to_xy(pair[0].0, pair[0].1), to_xy(pair[1].0, pair[1].1), color);
        }
        if finite.len() == 1 {
            let (x, y) = to_xy(finite[0].0, finite[0].1);
            draw_line(&mut img, (x - 2.0, y), (x + 2.0, y), color);
        }
    }
    save(&img, path)
}

/// Confusion-matrix heatmap: rows are true classes, columns predictions,
/// cell intensity scaled by the row maximum.
pub fn render_confusion(confusion: &[Vec<usize>], path: &Path) -> Result<()> {
    let n = confusion.len().max(1);
    let size: u32 = 600;
    let cell = (size - 2 * MARGIN) / n as u32;
    let mut img = blank(size, size);
    for (r, row) in confusion.iter().enumerate() {
        let row_max = row.iter().copied().max().unwrap_or(0).max(1);
        for (c, &count) in row.iter().enumerate() {
            let intensity = count as f64 / row_max as f64;
            let shade = (255.0 - 205.0 * intensity) as u8;
            let color = Rgb([shade, shade, 255]);
            let x0 = MARGIN + c as u32 * cell;
            let y0 = MARGIN + r as u32 * cell;
            for y in y0..y0 + cell {
                for x in x0..x0 + cell {
                    img.put_pixel(x, y, color);
                }
            }
        }
    }
    // Grid lines.
    for i in 0..=n as u32 {
        let offset = (MARGIN + i * cell) as f64;
        let lo = MARGIN as f64;
        let hi = (MARGIN + n as u32 * cell) as f64;
        draw_line(&mut img, (offset, lo), (offset, hi), AXIS);
        draw_line(&mut img, (lo, offset), (hi, offset), AXIS);
    }
    save(&img, path)
}

/// Class-distribution bar chart in fixed class order.
pub fn render_bars(counts: &[usize], path: &Path) -> Result<()> {
    let mut img = blank(WIDTH, HEIGHT);
    draw_axes(&mut img);
    let n = counts.len().max(1);
    let max = counts.iter().copied().max().unwrap_or(0).max(1);
    let plot_w = (WIDTH - 2 * MARGIN) as f64;
    let plot_h = (HEIGHT - 2 * MARGIN) as f64;
    let slot = plot_w / n as f64;
    for (i, &count) in counts.iter().enumerate() {
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let bar_h = plot_h * count as f64 / max as f64;
        let x0 = MARGIN as f64 + slot * i as f64 + slot * 0.15;
        let x1 = MARGIN as f64 + slot * (i as f64 + 1.0) - slot * 0.15;
        let y1 = (HEIGHT - MARGIN) as f64;
        let y0 = y1 - bar_h;
        let (x0, x1) = (x0.round() as u32, x1.round() as u32);
        for x in x0..x1 {
            draw_line(&mut img, (x as f64, y0), (x as f64, y1 - 1.0), color);
        }
    }
    save(&img, path)
}
