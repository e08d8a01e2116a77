use std::fmt::Write as _;

use mhal::engine::Tensor;

const CELL_W: usize = 56;
const CELL_H: usize = 22;
const LABEL_W: usize = 140;
const HEADER_H: usize = 28;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Token rows by label columns, darker cells for higher probability.
pub fn heatmap(tokens: &[&str], labels: &[String], probs: &Tensor) -> String {
    let w = LABEL_W + CELL_W * labels.len();
    let h = HEADER_H + CELL_H * tokens.len();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="12">"#
    );
    for (j, l) in labels.iter().enumerate() {
        let x = LABEL_W + j * CELL_W + CELL_W / 2;
        let _ = writeln!(s, r#"<text x="{x}" y="18" text-anchor="middle">{}</text>"#, escape(l));
    }
    for (i, t) in tokens.iter().enumerate() {
        let y = HEADER_H + i * CELL_H;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            LABEL_W - 6,
            y + CELL_H - 6,
            escape(t)
        );
        for j in 0..labels.len() {
            let p = probs.get(i, j).clamp(0.0, 1.0);
            let g = (255.0 * (1.0 - p)).round() as u8;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="rgb({g},{g},{g})"><title>{:.3}</title></rect>"#,
                LABEL_W + j * CELL_W,
                p
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
