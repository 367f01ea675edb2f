//! Diverging-colormap heatmaps written as binary PPM (P6, maxval 255).
//!
//! Zero maps to white, +bound to full red, -bound to full blue, where
//! bound = max |value| so the scale is symmetric. An all-zero map renders
//! all white.

use std::io::Write;
use std::path::Path;

use crate::errors::CliResult;

/// RGB bytes (row-major, 3 bytes per pixel) for a square map.
pub fn render_rgb(values: &[f64], side: usize) -> Vec<u8> {
    debug_assert_eq!(values.len(), side * side);
    let bound = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut rgb = Vec::with_capacity(values.len() * 3);
    for v in values {
        let (r, g, b) = if bound == 0.0 || *v == 0.0 {
            (255, 255, 255)
        } else if *v > 0.0 {
            let fade = (255.0 * (1.0 - v / bound)).round() as u8;
            (255, fade, fade)
        } else {
            let fade = (255.0 * (1.0 - (-v) / bound)).round() as u8;
            (fade, fade, 255)
        };
        rgb.extend_from_slice(&[r, g, b]);
    }
    rgb
}

pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[u8]) -> CliResult<()> {
    debug_assert_eq!(rgb.len(), width * height * 3);
    let mut file = std::fs::File::create(path)?;
    write!(file, "P6\n{width} {height}\n255\n")?;
    file.write_all(rgb)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_map_is_all_white() {
        let rgb = render_rgb(&[0.0; 4], 2);
        assert!(rgb.iter().all(|b| *b == 255));
    }

    #[test]
    fn colormap_anchors() {
        let rgb = render_rgb(&[1.0, -1.0, 0.0, 0.5], 2);
        assert_eq!(&rgb[0..3], &[255, 0, 0]); // +bound: full red
        assert_eq!(&rgb[3..6], &[0, 0, 255]); // -bound: full blue
        assert_eq!(&rgb[6..9], &[255, 255, 255]); // zero: white
        assert_eq!(&rgb[9..12], &[255, 128, 128]); // halfway to red
    }

    #[test]
    fn symmetric_values_get_mirrored_colors() {
        let rgb = render_rgb(&[0.3, -0.3, 0.6, -0.6], 2);
        // red channel of positive == blue channel of negative, etc.
        assert_eq!(rgb[0], rgb[5]);
        assert_eq!(rgb[1], rgb[3]);
        assert_eq!(rgb[1], rgb[4]);
    }
}
