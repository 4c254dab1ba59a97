//! Plain-text matrix/vector files, CSV rendering and a small SVG line-chart
//! writer.
//!
//! Matrix files: a header line `M N`, then `M` lines of `N` space-separated
//! numbers. Vectors use the same format as an `n x 1` matrix; readers also
//! accept `1 x n`. Every float is written with 17 significant digits, which
//! round-trips `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_to_string(m: &Matrix) -> String {
    let mut s = String::with_capacity(m.rows() * m.cols() * 24 + 16);
    let _ = writeln!(s, "{} {}", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn vector_to_string(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24 + 16);
    let _ = writeln!(s, "{} 1", v.len());
    for x in v {
        s.push_str(&fmt_f64(*x));
        s.push('\n');
    }
    s
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Matrix> {
    let mut tokens = text.split_whitespace();
    let mut dim = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| parse_err(path, format!("missing {name} in header")))?
            .parse::<usize>()
            .map_err(|e| parse_err(path, format!("bad {name} in header: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let data = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| parse_err(path, format!("bad number {t:?}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if data.len() != rows * cols {
        return Err(parse_err(
            path,
            format!("header says {rows}x{cols} but found {} numbers", data.len()),
        ));
    }
    Matrix::new(rows, cols, data).map_err(|e| parse_err(path, e.to_string()))
}

pub fn parse_vector(text: &str, path: &Path) -> Result<Vec<f64>> {
    let m = parse_matrix(text, path)?;
    if m.cols() != 1 && m.rows() != 1 {
        return Err(parse_err(
            path,
            format!(
                "expected a vector, found a {}x{} matrix",
                m.rows(),
                m.cols()
            ),
        ));
    }
    Ok(m.as_slice().to_vec())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    parse_matrix(&read(path)?, path)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&read(path)?, path)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_text(path, &matrix_to_string(m))
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    write_text(path, &vector_to_string(v))
}

/// Accumulates CSV rows in memory; floats are rendered with [`fmt_f64`].
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(i64),
    U(usize),
    S(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        debug_assert_eq!(cells.len(), self.columns);
        let rendered: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::F(v) => fmt_f64(*v),
                Cell::I(v) => v.to_string(),
                Cell::U(v) => v.to_string(),
                Cell::S(v) => v.to_string(),
            })
            .collect();
        self.text.push_str(&rendered.join(","));
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.text)
    }
}

/// A named polyline for [`LineChart`].
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// Minimal SVG line chart: axes, optional log-scaled y axis, one polyline
/// per series and a legend.
#[derive(Debug, Clone)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#000000", "#9467bd", "#ff7f0e",
];

impl LineChart {
    pub fn new(title: &str, x_label: &str, y_label: &str, log_y: bool) -> Self {
        LineChart {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_y,
            series: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.series.push(Series {
            name: name.into(),
            points,
        });
    }

    pub fn render(&self) -> String {
        let (w, h) = (640.0, 420.0);
        let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
        let ty = |y: f64| if self.log_y { y.log10() } else { y };
        let pts: Vec<(f64, f64)> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
            .map(|(x, y)| (x, ty(y)))
            .collect();
        let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
            (
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
            ),
            |(a, b, c, d), (x, y)| (a.min(*x), b.max(*x), c.min(*y), d.max(*y)),
        );
        if pts.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
        let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{left} {top} V{} H{}" stroke="black" fill="none"/>"#,
            h - bottom,
            w - right
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = x0 + f * (x1 - x0);
            let yv = y0 + f * (y1 - y0);
            let ylab = if self.log_y {
                format!("1e{yv:.1}")
            } else {
                format!("{yv:.3e}")
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{:.4}</text>"#,
                px(xv),
                h - bottom + 16.0,
                xv
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
                left - 4.0,
                py(yv) + 4.0,
                ylab
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            (left + w - right) / 2.0,
            h - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            h / 2.0,
            h / 2.0,
            escape(&self.y_label)
        );
        for (k, series) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let coords: Vec<String> = series
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(ty(*y))))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                coords.join(" ")
            );
            let ly = top + 14.0 * k as f64;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{ly:.1}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
                w - right - 4.0,
                escape(&series.name)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_rendering_has_17_significant_digits() {
        assert_eq!(fmt_f64(2.0), "2.0000000000000000e0");
        assert_eq!(fmt_f64(-0.1), "-1.0000000000000001e-1");
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn matrix_text_format() {
        let m = Matrix::from_rows(&[vec![1.0, -2.5], vec![0.1, 3.0]]).unwrap();
        let text = matrix_to_string(&m);
        assert!(text.starts_with("2 2\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_matrix(&text, Path::new("m")).unwrap(), m);
    }

    #[test]
    fn vector_accepts_row_or_column() {
        let p = Path::new("v");
        assert_eq!(
            parse_vector("3 1\n1\n2\n3\n", p).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            parse_vector("1 3\n1 2 3\n", p).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(parse_vector("2 2\n1 2\n3 4\n", p).is_err());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let p = Path::new("bad");
        assert!(parse_matrix("", p).is_err());
        assert!(parse_matrix("2 2\n1 2 3\n", p).is_err());
        assert!(parse_matrix("1 1\nabc\n", p).is_err());
        assert!(parse_matrix("x 1\n1\n", p).is_err());
    }

    #[test]
    fn csv_rows() {
        let mut c = Csv::new(&["a", "b", "c"]);
        c.row(&[Cell::U(1), Cell::F(0.5), Cell::S("x")]);
        assert_eq!(c.as_str(), "a,b,c\n1,5.0000000000000000e-1,x\n");
    }

    #[test]
    fn svg_has_one_polyline_per_series() {
        let mut chart = LineChart::new("t", "x", "y", true);
        chart.add("a", vec![(0.0, 1.0), (1.0, 0.1)]);
        chart.add("b<c", vec![(0.0, 1.0), (1.0, 0.0)]);
        let svg = chart.render();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("b&lt;c"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
