//! Deterministic SVG rendering of a grid, its initial label belief, and a
//! realized trajectory with replan markers.

use std::fmt::Write;

use crate::executor::EpisodeTrace;
use crate::model::{Belief, GridMap};
use crate::scltl::{Alphabet, ObsId};

const CELL: f64 = 48.0;
const MARGIN: f64 = 16.0;

/// One fill color per observation index, wrapping around.
const PALETTE: [&str; 8] = [
    "#f2c94c", "#2f80ed", "#27ae60", "#eb5757", "#9b51e0", "#f2994a", "#56ccf2", "#6fcf97",
];

fn obs_color(o: ObsId) -> &'static str {
    PALETTE[o.0 as usize % PALETTE.len()]
}

/// Cell center in image coordinates; grid y grows upward, image y downward.
fn center(grid: &GridMap, cell: (u32, u32)) -> (f64, f64) {
    let (x, y) = cell;
    (
        MARGIN + (x as f64 + 0.5) * CELL,
        MARGIN + ((grid.height() - 1 - y) as f64 + 0.5) * CELL,
    )
}

/// Renders the map and, when given, the realized path. The output is byte
/// deterministic for equal inputs.
pub fn render_trace(
    grid: &GridMap,
    alphabet: &Alphabet,
    belief: &Belief,
    trace: Option<&EpisodeTrace>,
) -> String {
    let w = MARGIN * 2.0 + grid.width() as f64 * CELL;
    let h = MARGIN * 2.0 + grid.height() as f64 * CELL;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" \
         viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(
        svg,
        "<rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"#ffffff\"/>"
    );

    // Blocked cells and belief shading, row-major.
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            let (cx, cy) = center(grid, (x, y));
            let (rx, ry) = (cx - CELL / 2.0, cy - CELL / 2.0);
            match grid.state_at((x, y)) {
                None => {
                    let _ = writeln!(
                        svg,
                        "<rect x=\"{rx:.1}\" y=\"{ry:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" fill=\"#333333\"/>"
                    );
                }
                Some(state) => {
                    for o in (0..alphabet.len()).map(|i| ObsId(i as u8)) {
                        let mass: f64 = belief
                            .support(state)
                            .iter()
                            .filter(|(l, _)| l.contains(o))
                            .map(|&(_, p)| p)
                            .sum();
                        if mass > 0.0 {
                            let opacity = 0.15 + 0.45 * mass.min(1.0);
                            let _ = writeln!(
                                svg,
                                "<rect x=\"{rx:.1}\" y=\"{ry:.1}\" width=\"{CELL:.1}\" height=\"{CELL:.1}\" \
                                 fill=\"{}\" fill-opacity=\"{opacity:.3}\"/>",
                                obs_color(o)
                            );
                            let _ = writeln!(
                                svg,
                                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" fill=\"#000000\">{}:{mass:.2}</text>",
                                rx + 3.0,
                                ry + 12.0 + 11.0 * o.0 as f64,
                                alphabet.name(o)
                            );
                        }
                    }
                }
            }
        }
    }

    // Grid lines.
    for i in 0..=grid.width() {
        let x = MARGIN + i as f64 * CELL;
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{MARGIN:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#999999\" stroke-width=\"1\"/>",
            h - MARGIN
        );
    }
    for j in 0..=grid.height() {
        let y = MARGIN + j as f64 * CELL;
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#999999\" stroke-width=\"1\"/>",
            w - MARGIN
        );
    }

    if let Some(trace) = trace {
        if !trace.states.is_empty() {
            let points: Vec<String> = trace
                .states
                .iter()
                .map(|&s| {
                    let (cx, cy) = center(grid, grid.cell_of(s));
                    format!("{cx:.1},{cy:.1}")
                })
                .collect();
            if points.len() > 1 {
                let _ = writeln!(
                    svg,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2.5\"/>",
                    points.join(" ")
                );
            }
            // Replan markers at the state where each replan happened.
            for r in &trace.replans {
                if let Some(&s) = trace.states.get(r.t) {
                    let (cx, cy) = center(grid, grid.cell_of(s));
                    let _ = writeln!(
                        svg,
                        "<circle cx=\"{cx:.1}\" cy=\"{cy:.1}\" r=\"6\" fill=\"none\" stroke=\"#eb5757\" stroke-width=\"2\"/>"
                    );
                }
            }
            let (sx, sy) = center(grid, grid.cell_of(trace.states[0]));
            let _ = writeln!(
                svg,
                "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"4\" fill=\"#27ae60\"/>"
            );
            let (ex, ey) = center(grid, grid.cell_of(*trace.states.last().unwrap()));
            let _ = writeln!(
                svg,
                "<circle cx=\"{ex:.1}\" cy=\"{ey:.1}\" r=\"4\" fill=\"#000000\"/>"
            );
        }
    }

    svg.push_str("</svg>\n");
    svg
}
