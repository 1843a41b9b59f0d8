use std::fmt::Write;

/// One scatter panel: axis indices into the point coordinates and a title.
pub struct Panel {
    pub title: &'static str,
    pub axes: [usize; 2],
}

/// Panels for a cloud dimension: a single view in 2D, front and top in 3D.
pub fn panels_for(dim: usize) -> Vec<Panel> {
    if dim == 2 {
        vec![Panel {
            title: "x-y",
            axes: [0, 1],
        }]
    } else {
        vec![
            Panel {
                title: "front (x-z)",
                axes: [0, 2],
            },
            Panel {
                title: "top (x-y)",
                axes: [0, 1],
            },
        ]
    }
}

const SIZE: f64 = 360.0;
const MARGIN: f64 = 24.0;

/// SVG 1.1 scatter of named point sets, one panel per projection. Each set
/// is `(label, color, flat coordinates)`.
pub fn scatter(dim: usize, sets: &[(&str, &str, &[f64])]) -> String {
    let panels = panels_for(dim);
    let width = panels.len() as f64 * (SIZE + MARGIN) + MARGIN;
    let height = SIZE + 3.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    for (k, panel) in panels.iter().enumerate() {
        let [a, b] = panel.axes;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for (_, _, pts) in sets {
            for p in pts.chunks_exact(dim) {
                for (j, &ax) in [a, b].iter().enumerate() {
                    lo[j] = lo[j].min(p[ax]);
                    hi[j] = hi[j].max(p[ax]);
                }
            }
        }
        let span = (0..2).map(|j| hi[j] - lo[j]).fold(1e-9, f64::max);
        let x0 = MARGIN + k as f64 * (SIZE + MARGIN);
        let y0 = 2.0 * MARGIN;
        let _ = writeln!(
            s,
            r#"<g><rect x="{x0}" y="{y0}" width="{SIZE}" height="{SIZE}" fill="none" stroke="gray"/><text x="{x0}" y="{}" font-size="12">{}</text>"#,
            y0 - 6.0,
            panel.title
        );
        for (_, color, pts) in sets {
            for p in pts.chunks_exact(dim) {
                let u = x0 + (p[a] - lo[0]) / span * SIZE;
                let v = y0 + SIZE - (p[b] - lo[1]) / span * SIZE;
                let _ = writeln!(
                    s,
                    r#"<circle cx="{u:.2}" cy="{v:.2}" r="2" fill="{color}" fill-opacity="0.6"/>"#
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }
    for (i, (label, color, _)) in sets.iter().enumerate() {
        let x = MARGIN + i as f64 * 120.0;
        let _ = writeln!(
            s,
            r#"<circle cx="{x}" cy="{MARGIN}" r="4" fill="{color}"/><text x="{}" y="{}" font-size="12">{label}</text>"#,
            x + 8.0,
            MARGIN + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
