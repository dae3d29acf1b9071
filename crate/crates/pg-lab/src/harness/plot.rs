//! SVG rendering of run curves, with no plotting dependency.

use super::compare::{load_method, LoadedRun};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 60.0;

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(points: impl Iterator<Item = (f64, f64)>) -> Frame {
        let mut frame = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for (x, y) in points {
            frame.x_min = frame.x_min.min(x);
            frame.x_max = frame.x_max.max(x);
            frame.y_min = frame.y_min.min(y);
            frame.y_max = frame.y_max.max(y);
        }
        if frame.x_min >= frame.x_max {
            frame.x_max = frame.x_min + 1.0;
        }
        if frame.y_min >= frame.y_max {
            frame.y_max = frame.y_min + 1.0;
        }
        frame
    }

    fn x(&self, value: f64) -> f64 {
        MARGIN + (value - self.x_min) / (self.x_max - self.x_min) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, value: f64) -> f64 {
        HEIGHT - MARGIN - (value - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn svg_document(title: &str, x_label: &str, y_label: &str, frame: &Frame, body: &str) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    for i in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * i as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * i as f64 / 4.0;
        let _ = write!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{fx:.0}</text>\n\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{fy:.1}</text>\n",
            frame.x(fx),
            HEIGHT - MARGIN + 18.0,
            MARGIN - 6.0,
            frame.y(fy) + 4.0
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\">{x_label}</text>\n\
         <text x=\"18\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"13\" \
         transform=\"rotate(-90 18 {:.1})\">{y_label}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 14.0,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    svg.push_str(body);
    svg.push_str("</svg>\n");
    svg
}

fn polyline(points: &[(f64, f64)], frame: &Frame, color: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", frame.x(x), frame.y(y)))
        .collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
        coords.join(" ")
    )
}

/// Mean evaluation curve (with a +-1 std band when several runs exist).
fn eval_curve_svg(runs: &[LoadedRun]) -> Result<String> {
    let steps: Vec<u64> = runs[0].curve.iter().map(|&(s, _)| s).collect();
    let aligned = runs
        .iter()
        .all(|r| r.curve.len() == steps.len() && r.curve.iter().map(|&(s, _)| s).eq(steps.iter().copied()));
    if !aligned {
        return Err(Error::Config(
            "runs have mismatched evaluation grids; plot them individually".into(),
        ));
    }
    let mut mean = Vec::with_capacity(steps.len());
    let mut lower = Vec::with_capacity(steps.len());
    let mut upper = Vec::with_capacity(steps.len());
    for i in 0..steps.len() {
        let values: Vec<f64> = runs.iter().map(|r| r.curve[i].1).collect();
        let (m, s) = super::compare::mean_std(&values);
        mean.push((steps[i] as f64, m));
        lower.push((steps[i] as f64, m - s));
        upper.push((steps[i] as f64, m + s));
    }
    let frame = Frame::of(lower.iter().chain(upper.iter()).copied());
    let mut body = String::new();
    if runs.len() > 1 {
        body.push_str(&polyline(&lower, &frame, "#bbbbff"));
        body.push_str(&polyline(&upper, &frame, "#bbbbff"));
    }
    body.push_str(&polyline(&mean, &frame, "#2222cc"));
    Ok(svg_document(
        &format!("greedy evaluation return ({} run{})", runs.len(), if runs.len() == 1 { "" } else { "s" }),
        "environment steps",
        "mean return",
        &frame,
        &body,
    ))
}

/// Parse search.csv (winner_tag is textual).
fn read_search_csv(path: &Path) -> Result<Vec<(u64, String, f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != "step,critic_index,winner_tag,original_mse,winner_mse" {
        return Err(Error::Config(format!(
            "{}: unexpected search.csv header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(Error::Config(format!("malformed search row '{line}'")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Config(format!("bad number '{s}' in search.csv")))
        };
        rows.push((
            parse(cells[0])? as u64,
            cells[2].to_string(),
            parse(cells[3])?,
            parse(cells[4])?,
        ));
    }
    Ok(rows)
}

/// Cumulative improvement counts per perturbation scale over search events.
fn search_wins_svg(rows: &[(u64, String, f64, f64)]) -> String {
    let mut small = 0u64;
    let mut large = 0u64;
    let mut small_curve = vec![(0.0, 0.0)];
    let mut large_curve = vec![(0.0, 0.0)];
    for (step, tag, original_mse, winner_mse) in rows {
        if winner_mse < original_mse {
            match tag.as_str() {
                "small" => small += 1,
                "large" => large += 1,
                _ => {}
            }
        }
        small_curve.push((*step as f64, small as f64));
        large_curve.push((*step as f64, large as f64));
    }
    let frame = Frame::of(small_curve.iter().chain(large_curve.iter()).copied());
    let mut body = String::new();
    body.push_str(&polyline(&small_curve, &frame, "#2266cc"));
    body.push_str(&polyline(&large_curve, &frame, "#cc7722"));
    body.push_str(
        "<text x=\"80\" y=\"44\" font-size=\"12\" fill=\"#2266cc\">small-scale wins</text>\n\
         <text x=\"80\" y=\"60\" font-size=\"12\" fill=\"#cc7722\">large-scale wins</text>\n",
    );
    svg_document(
        "cumulative search improvements by scale",
        "environment steps",
        "cumulative wins",
        &frame,
        &body,
    )
}

/// Render `eval_curve.svg` (and `search_wins.svg` when search events were
/// logged) into `dir`. Accepts a single run directory or a method directory
/// of runs.
pub fn plot_run(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let runs = load_method(dir)?;
    let mut written = Vec::new();
    let eval_path = dir.join("eval_curve.svg");
    std::fs::write(&eval_path, eval_curve_svg(&runs)?)?;
    written.push(eval_path);

    let search_csv = dir.join("search.csv");
    if search_csv.exists() {
        let rows = read_search_csv(&search_csv)?;
        if !rows.is_empty() {
            let path = dir.join("search_wins.svg");
            std::fs::write(&path, search_wins_svg(&rows))?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_never_degenerate() {
        let frame = Frame::of([(1.0, 2.0)].into_iter());
        assert!(frame.x_max > frame.x_min);
        assert!(frame.y_max > frame.y_min);
    }

    #[test]
    fn svg_output_is_well_formed_enough() {
        let runs = vec![LoadedRun {
            name: "r".into(),
            curve: vec![(0, -10.0), (100, -5.0), (200, -2.0)],
        }];
        let svg = eval_curve_svg(&runs).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert!(svg.contains("polyline"));
    }
}
