//! Plot files for one density grid.
//!
//! The CSV has the columns `kind,row,col,x,y,masked,value`, preceded by
//! `#` comment lines. Row kinds:
//!
//! | kind        | row         | col      | x, y          | masked | value   |
//! |-------------|-------------|----------|---------------|--------|---------|
//! | `bandwidth` |             |          | kernel stds   |        |         |
//! | `cell`      | grid row    | grid col | cell centre   | 0 / 1  | density |
//! | `level`     | level index |          | x = mass      |        | density |
//! | `contour`   | level index | line     | vertex        |        |         |
//! | `point`     | point index |          | position      |        |         |
//!
//! Floats are written in shortest round-trip form, so parsing recovers them
//! exactly.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::kde::DensityGrid;
use super::{SimplexPoint, SQRT3_2, VERTICES};
use crate::error::{Error, Result};

const CSV_HEADER: [&str; 7] = ["kind", "row", "col", "x", "y", "masked", "value"];

const SCALE: f64 = 500.0;
const MARGIN: f64 = 60.0;
const TITLE_BAND: f64 = 30.0;
const SHADES: f64 = 32.0;
const CONTOUR_COLOURS: [&str; 3] = ["#8b0000", "#d62728", "#ff9896"];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlotSpec {
    pub title: String,
    /// Labels of V1, V2, V3.
    pub vertex_labels: [String; 3],
    /// Written as `#` lines in the CSV and as an XML comment in the SVG.
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlotFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn emit_plot(grid: &DensityGrid, points: &[SimplexPoint], spec: &PlotSpec, stem: &Path) -> Result<PlotFiles> {
    let with_ext = |ext: &str| {
        let mut s = OsString::from(stem.as_os_str());
        s.push(ext);
        PathBuf::from(s)
    };
    let files = PlotFiles {
        csv: with_ext(".csv"),
        svg: with_ext(".svg"),
    };
    let csv = render_csv(grid, points, spec)?;
    fs::write(&files.csv, csv).map_err(|e| Error::io(&files.csv, e))?;
    fs::write(&files.svg, render_svg(grid, points, spec)).map_err(|e| Error::io(&files.svg, e))?;
    Ok(files)
}

fn render_csv(grid: &DensityGrid, points: &[SimplexPoint], spec: &PlotSpec) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for c in &spec.comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let f = |v: f64| v.to_string();
    let e = String::new;
    w.write_record(["bandwidth".into(), e(), e(), f(grid.bandwidth[0]), f(grid.bandwidth[1]), e(), e()])?;
    for r in 0..grid.resolution {
        for c in 0..grid.resolution {
            let [x, y] = grid.cell_center(r, c);
            let masked = if grid.is_inside(r, c) { "0" } else { "1" };
            w.write_record([
                "cell".into(),
                r.to_string(),
                c.to_string(),
                f(x),
                f(y),
                masked.into(),
                f(grid.value(r, c)),
            ])?;
        }
    }
    for (i, l) in grid.levels.iter().enumerate() {
        w.write_record(["level".into(), i.to_string(), e(), f(l.mass), e(), e(), f(l.density)])?;
    }
    for (i, l) in grid.levels.iter().enumerate() {
        for (j, line) in l.polylines.iter().enumerate() {
            for p in line {
                w.write_record(["contour".into(), i.to_string(), j.to_string(), f(p[0]), f(p[1]), e(), e()])?;
            }
        }
    }
    for (i, p) in points.iter().enumerate() {
        w.write_record(["point".into(), i.to_string(), e(), f(p.xy[0]), f(p.xy[1]), e(), e()])?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

/// Grid, levels and points recovered from a plot CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlotCsv {
    pub resolution: usize,
    pub bandwidth: [f64; 2],
    pub values: Vec<f64>,
    pub inside: Vec<bool>,
    /// `(mass, density)` per level.
    pub levels: Vec<(f64, f64)>,
    pub points: Vec<[f64; 2]>,
}

pub fn read_plot_csv(path: &Path) -> Result<PlotCsv> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("{}: unexpected header {header:?}", path.display())));
    }
    let mut out = PlotCsv::default();
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: m,
        };
        let num = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
        };
        let idx = |i: usize| -> Result<usize> {
            record[i].parse::<usize>().map_err(|e| bad(format!("column {}: {e}", CSV_HEADER[i])))
        };
        match &record[0] {
            "bandwidth" => out.bandwidth = [num(3)?, num(4)?],
            "cell" => cells.push((idx(1)?, idx(2)?, &record[5] == "0", num(6)?)),
            "level" => out.levels.push((num(3)?, num(6)?)),
            "point" => out.points.push([num(3)?, num(4)?]),
            "contour" => {}
            other => return Err(bad(format!("unknown row kind {other:?}"))),
        }
    }
    let n = (cells.len() as f64).sqrt().round() as usize;
    if n * n != cells.len() {
        return Err(Error::Format(format!("{}: {} cells do not form a square grid", path.display(), cells.len())));
    }
    out.resolution = n;
    out.values = vec![0.0; n * n];
    out.inside = vec![false; n * n];
    for (r, c, inside, v) in cells {
        if r >= n || c >= n {
            return Err(Error::Format(format!("{}: cell ({r}, {c}) outside a {n}x{n} grid", path.display())));
        }
        out.values[r * n + c] = v;
        out.inside[r * n + c] = inside;
    }
    Ok(out)
}

fn px(x: f64) -> f64 {
    MARGIN + x * SCALE
}

fn py(y: f64) -> f64 {
    MARGIN + TITLE_BAND + (SQRT3_2 - y) * SCALE
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render_svg(grid: &DensityGrid, points: &[SimplexPoint], spec: &PlotSpec) -> String {
    let width = 2.0 * MARGIN + SCALE;
    let height = 2.0 * MARGIN + TITLE_BAND + SQRT3_2 * SCALE;
    let tri: Vec<String> = VERTICES.iter().map(|v| format!("{:.2},{:.2}", px(v[0]), py(v[1]))).collect();
    let tri = tri.join(" ");
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    for c in &spec.comments {
        let _ = writeln!(s, "<!-- {} -->", c.replace("--", "- -"));
    }
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">{}</text>",
        width / 2.0,
        MARGIN / 2.0 + 10.0,
        xml_escape(&spec.title)
    );
    let _ = writeln!(s, "<defs><clipPath id=\"tri\"><polygon points=\"{tri}\"/></clipPath></defs>");

    // shading: runs of equal quantised opacity along each row
    let max = grid.values.iter().cloned().fold(0.0, f64::max);
    let [dx, dy] = grid.cell_size();
    let _ = writeln!(s, "<g clip-path=\"url(#tri)\" fill=\"#08519c\" stroke=\"none\">");
    if max > 0.0 {
        for r in 0..grid.resolution {
            let shade = |c: usize| -> u32 {
                if grid.is_inside(r, c) {
                    (grid.value(r, c) / max * SHADES).round() as u32
                } else {
                    0
                }
            };
            let mut c = 0;
            while c < grid.resolution {
                let q = shade(c);
                let start = c;
                while c < grid.resolution && shade(c) == q {
                    c += 1;
                }
                if q == 0 {
                    continue;
                }
                let _ = writeln!(
                    s,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill-opacity=\"{:.4}\"/>",
                    px(start as f64 * dx),
                    py((r + 1) as f64 * dy),
                    (c - start) as f64 * dx * SCALE,
                    dy * SCALE,
                    f64::from(q) / SHADES
                );
            }
        }
    }
    s.push_str("</g>\n");
    let _ = writeln!(s, "<polygon points=\"{tri}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>");

    for (level, colour) in grid.levels.iter().zip(CONTOUR_COLOURS) {
        let _ = writeln!(
            s,
            "<g fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"><!-- {:.0}% -->",
            level.mass * 100.0
        );
        for line in &level.polylines {
            let pts: Vec<String> = line.iter().map(|p| format!("{:.2},{:.2}", px(p[0]), py(p[1]))).collect();
            let _ = writeln!(s, "<polyline points=\"{}\"/>", pts.join(" "));
        }
        s.push_str("</g>\n");
    }

    s.push_str("<g fill=\"black\" fill-opacity=\"0.6\">\n");
    for p in points {
        let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\"/>", px(p.xy[0]), py(p.xy[1]));
    }
    s.push_str("</g>\n");

    let anchors = [("end", -8.0, 18.0), ("start", 8.0, 18.0), ("middle", 0.0, -10.0)];
    for ((v, label), (anchor, ox, oy)) in VERTICES.iter().zip(&spec.vertex_labels).zip(anchors) {
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"{anchor}\">{}</text>",
            px(v[0]) + ox,
            py(v[1]) + oy,
            xml_escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{kde2d, simplex_project, Bandwidth};

    fn spec() -> PlotSpec {
        PlotSpec {
            title: "BD <test>".into(),
            vertex_labels: ["BD".into(), "HC".into(), "BPD".into()],
            comments: vec!["config_hash: abc".into()],
        }
    }

    fn sample() -> (DensityGrid, Vec<SimplexPoint>) {
        let pts: Vec<_> = [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [0.1, 0.8, 0.1], [1.0 / 3.0; 3]]
            .iter()
            .map(|p| simplex_project(*p).unwrap())
            .collect();
        (kde2d(&pts, None, Bandwidth::Scott, 40).unwrap(), pts)
    }

    #[test]
    fn csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let (g, pts) = sample();
        let files = emit_plot(&g, &pts, &spec(), &dir.path().join("p")).unwrap();
        let back = read_plot_csv(&files.csv).unwrap();
        assert_eq!(back.resolution, g.resolution);
        assert_eq!(back.values, g.values);
        assert_eq!(back.inside, g.inside);
        assert_eq!(back.bandwidth, g.bandwidth);
        assert_eq!(back.points, pts.iter().map(|p| p.xy).collect::<Vec<_>>());
        let levels: Vec<_> = g.levels.iter().map(|l| (l.mass, l.density)).collect();
        assert_eq!(back.levels, levels);
    }

    #[test]
    fn output_is_deterministic_and_self_contained() {
        let dir = tempfile::tempdir().unwrap();
        let (g, pts) = sample();
        let a = emit_plot(&g, &pts, &spec(), &dir.path().join("a")).unwrap();
        let b = emit_plot(&g, &pts, &spec(), &dir.path().join("b")).unwrap();
        assert_eq!(fs::read(&a.svg).unwrap(), fs::read(&b.svg).unwrap());
        assert_eq!(fs::read(&a.csv).unwrap(), fs::read(&b.csv).unwrap());
        let svg = fs::read_to_string(&a.svg).unwrap();
        assert!(svg.contains("BD &lt;test&gt;"));
        assert!(svg.contains("<!-- config_hash: abc -->"));
        for colour in CONTOUR_COLOURS {
            assert!(svg.contains(colour));
        }
        assert!(!svg.contains("href"));
    }

    #[test]
    fn empty_overlay_has_no_markers() {
        let dir = tempfile::tempdir().unwrap();
        let (g, _) = sample();
        let f = emit_plot(&g, &[], &spec(), &dir.path().join("e")).unwrap();
        let svg = fs::read_to_string(&f.svg).unwrap();
        assert!(!svg.contains("<circle"));
        assert!(svg.contains("<polygon"));
        assert!(svg.contains("fill-opacity"));
    }
}
