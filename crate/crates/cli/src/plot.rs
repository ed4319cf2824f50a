//! SVG heatmaps of spectrum matrices: frames along x, range bins along y with
//! bin 0 at the bottom.

use std::fmt::Write;

use headmotion::dsp::SpectrumMatrix;
use headmotion::radar_sim::HeadMotion;

const CELL_W: usize = 12;
const CELL_H: usize = 6;

/// Samples of the viridis colour map at 0, 0.25, 0.5, 0.75 and 1.
const STOPS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Quantised intensity of every cell, indexed `[bin][frame]`. Values are
/// clamped to `[0, 1]` before scaling to `0..=255`.
pub fn intensity_levels(m: &SpectrumMatrix) -> Vec<Vec<u8>> {
    (0..m.bins)
        .map(|b| {
            (0..m.frames)
                .map(|f| (m.get(f, b).clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect()
        })
        .collect()
}

pub fn colour(level: u8) -> [u8; 3] {
    let t = level as f64 / 255.0 * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let w = t - i as f64;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (STOPS[i][c] * (1.0 - w) + STOPS[i + 1][c] * w).round() as u8;
    }
    out
}

pub fn render_svg(m: &SpectrumMatrix) -> String {
    let levels = intensity_levels(m);
    let (w, h) = (m.frames * CELL_W, m.bins * CELL_H);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
    );
    for (b, row) in levels.iter().enumerate() {
        let y = (m.bins - 1 - b) * CELL_H;
        for (f, &level) in row.iter().enumerate() {
            let [r, g, bl] = colour(level);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="#{r:02x}{g:02x}{bl:02x}"/>"##,
                f * CELL_W
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// `sample00012_nod.svg`
pub fn file_name(index: usize, label: u8) -> String {
    let name = HeadMotion::try_from(label).map(|c| c.name()).unwrap_or("unknown");
    format!("sample{index:05}_{name}.svg")
}
