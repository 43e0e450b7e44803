//! Minimal hand-written SVG output: learning curves and board fills.
//!
//! Numbers are printed with fixed precision so the files are byte-stable across runs.

use std::fmt::Write;

use crate::env::BoardState;

const PALETTE: [&str; 8] = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"];

/// One named series of (x, y) points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PANEL_W: f64 = 480.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 50.0;

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    (x0, x1, y0, y1)
}

fn panel(out: &mut String, top: f64, title: &str, series: &[Series]) {
    let (x0, x1, y0, y1) = bounds(series);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * PANEL_W;
    let sy = |y: f64| top + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.1}" y="{top:.1}" width="{PANEL_W:.1}" height="{PANEL_H:.1}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="13">{title}</text>"#, MARGIN, top - 8.0);
    for (v, y) in [(y1, sy(y1)), (y0, sy(y0))] {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{v:.1}</text>"#, MARGIN - 4.0, y + 4.0);
    }
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" font-size="10" text-anchor="middle">{v:.0}</text>"#,
            top + PANEL_H + 14.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            s.label
        );
        let ly = top + 14.0 + 13.0 * i as f64;
        let lx = MARGIN + PANEL_W + 10.0;
        let _ = writeln!(out, r#"<text x="{lx:.1}" y="{ly:.1}" font-size="10" fill="{colour}">{}</text>"#, s.label);
    }
}

/// Stacked panels sharing the x axis label, one per `(title, series)` entry.
pub fn line_chart_svg(x_label: &str, panels: &[(&str, Vec<Series>)]) -> String {
    let width = MARGIN + PANEL_W + 110.0;
    let height = panels.len() as f64 * (PANEL_H + 60.0) + 30.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif">"#
    );
    for (i, (title, series)) in panels.iter().enumerate() {
        panel(&mut out, 30.0 + i as f64 * (PANEL_H + 60.0), title, series);
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{x_label}</text>"#,
        MARGIN + PANEL_W / 2.0,
        height - 6.0
    );
    out.push_str("</svg>\n");
    out
}

/// Boards side by side; each occupied cell is coloured by piece and labelled `P<id + 1>`.
/// The length axis `x` runs left to right and the width axis `y` top to bottom, matching
/// the ASCII render.
pub fn boards_svg(title: &str, boards: &[BoardState]) -> String {
    const CELL: f64 = 36.0;
    const GAP: f64 = 30.0;
    let width = boards.iter().map(|b| b.length as f64 * CELL + GAP).sum::<f64>() + GAP;
    let height = boards.iter().map(|b| b.width as f64 * CELL).fold(0.0, f64::max) + 2.0 * GAP + 10.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<text x="{GAP:.1}" y="20" font-size="13">{title}</text>"#);
    let mut left = GAP;
    for (b, board) in boards.iter().enumerate() {
        let top = 2.0 * GAP;
        let _ = writeln!(out, r#"<text x="{left:.1}" y="{:.1}" font-size="11">board {b}</text>"#, top - 6.0);
        for x in 0..board.length {
            for y in 0..board.width {
                let i = board.index(x, y);
                let (px, py) = (left + x as f64 * CELL, top + y as f64 * CELL);
                let fill = match board.piece_map[i] {
                    0 => "#ffffff",
                    id => PALETTE[(usize::from(id) - 1) % PALETTE.len()],
                };
                let _ = writeln!(
                    out,
                    r##"<rect x="{px:.1}" y="{py:.1}" width="{CELL:.1}" height="{CELL:.1}" fill="{fill}" stroke="#333"/>"##
                );
                if board.occupancy[i] != 0 {
                    let _ = writeln!(
                        out,
                        r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">P{}</text>"#,
                        px + CELL / 2.0,
                        py + CELL / 2.0 + 4.0,
                        board.piece_map[i]
                    );
                }
            }
        }
        left += board.length as f64 * CELL + GAP;
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BoardSpec;

    #[test]
    fn chart_contains_one_polyline_per_series() {
        let s = |l: &str| Series { label: l.into(), points: vec![(0.0, 1.0), (10.0, 3.0)] };
        let svg = line_chart_svg("steps", &[("reward", vec![s("a"), s("b")]), ("length", vec![s("a")])]);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn empty_and_flat_series_do_not_produce_nan() {
        let flat = Series { label: "f".into(), points: vec![(5.0, 2.0)] };
        let svg = line_chart_svg("x", &[("flat", vec![flat]), ("empty", vec![])]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn board_cells_are_all_drawn() {
        let board = BoardState::new(&BoardSpec { width: 3, length: 2, height_limit: 100 });
        let svg = boards_svg("t", &[board.clone(), board]);
        assert_eq!(svg.matches("<rect").count(), 12);
    }
}
