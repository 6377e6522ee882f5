//! Plain-text artifacts: CSV tables, a coordinate-format matrix dump and a
//! log-log SVG plot.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so identical results produce byte-identical files.
//!
//! # Coordinate matrix format
//!
//! ```text
//! % <free-form comment lines start with '%'>
//! <rows> <cols> <nonzeros>
//! <row> <col> <value>      (1-based indices, one nonzero per line)
//! ```

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;

use crate::analysis::{AbscissaSweep, ResolventReport};
use crate::dynamics::EnergySample;
use crate::error::{Error, Result};
use crate::linalg::SymTridiag;

/// Writes the nonzeros of a dense matrix in coordinate format.
pub fn write_coordinate<W: Write>(out: &mut W, name: &str, m: &DMatrix<f64>) -> io::Result<()> {
    let entries: Vec<(usize, usize, f64)> = (0..m.ncols())
        .flat_map(|c| (0..m.nrows()).map(move |r| (r, c)))
        .filter(|&(r, c)| m[(r, c)] != 0.0)
        .map(|(r, c)| (r, c, m[(r, c)]))
        .collect();
    writeln!(out, "% {name}")?;
    writeln!(out, "{} {} {}", m.nrows(), m.ncols(), entries.len())?;
    for (r, c, v) in entries {
        writeln!(out, "{} {} {}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn write_tridiag_coordinate<W: Write>(out: &mut W, name: &str, t: &SymTridiag) -> io::Result<()> {
    write_coordinate(out, name, &t.to_dense())
}

/// Parses a coordinate-format matrix back into dense form.
pub fn read_coordinate<R: BufRead>(input: R) -> Result<DMatrix<f64>> {
    let mut lines = input
        .lines()
        .map(|l| l.map_err(|e| Error::InvalidInput(e.to_string())))
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim_start().starts_with('%') && !s.trim().is_empty()));
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("missing size line".into()))??;
    let dims: Vec<usize> = parse_fields(&header)?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(Error::InvalidInput(format!("bad size line: {header}")));
    };
    let mut m = DMatrix::zeros(rows, cols);
    let mut count = 0;
    for line in lines {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = (f.len() == 3)
            .then(|| Some((f[0].parse::<usize>().ok()?, f[1].parse::<usize>().ok()?, f[2].parse::<f64>().ok()?)))
            .flatten();
        match parsed {
            Some((r, c, v)) if (1..=rows).contains(&r) && (1..=cols).contains(&c) => m[(r - 1, c - 1)] = v,
            _ => return Err(Error::InvalidInput(format!("bad entry line: {line}"))),
        }
        count += 1;
    }
    if count != nnz {
        return Err(Error::InvalidInput(format!("expected {nnz} entries, found {count}")));
    }
    Ok(m)
}

fn parse_fields<T: std::str::FromStr>(line: &str) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("cannot parse '{s}'"))))
        .collect()
}

/// `t,E,P` table of an energy history.
pub fn write_energy_csv<W: Write>(out: &mut W, samples: &[EnergySample]) -> io::Result<()> {
    writeln!(out, "t,E,P")?;
    for s in samples {
        writeln!(out, "{},{},{}", s.t, s.energy, s.power)?;
    }
    Ok(())
}

/// Reads a `t,E,P` table (the `P` column is optional).
pub fn read_energy_csv<R: BufRead>(input: R) -> Result<Vec<EnergySample>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if k == 0 && line.split(',').next().map(str::trim) == Some("t") {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("line {}: cannot parse '{line}'", k + 1)))?;
        if f.len() < 2 || f.len() > 3 {
            return Err(Error::InvalidInput(format!("line {}: expected t,E[,P]", k + 1)));
        }
        out.push(EnergySample {
            t: f[0],
            energy: f[1],
            power: f.get(2).copied().unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// `lambda,sup_resolvent_norm,argmax_mode` table of a sweep.
pub fn write_resolvent_csv<W: Write>(out: &mut W, report: &ResolventReport) -> io::Result<()> {
    writeln!(out, "lambda,sup_resolvent_norm,argmax_mode")?;
    for p in &report.points {
        writeln!(out, "{},{},{}", p.lambda, p.sup_norm, p.argmax_mode)?;
    }
    Ok(())
}

/// `j,abscissa,min_abs_real` table.
pub fn write_abscissa_csv<W: Write>(out: &mut W, sweep: &AbscissaSweep) -> io::Result<()> {
    writeln!(out, "j,abscissa,min_abs_real")?;
    for r in &sweep.rows {
        writeln!(out, "{},{},{}", r.j, r.abscissa, r.min_abs_real)?;
    }
    Ok(())
}

/// One polyline of a log-log plot.
pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub color: &'a str,
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Minimal standalone SVG with logarithmic axes. Non-positive points are
/// skipped.
pub fn loglog_svg(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> String {
    let pts = || {
        series
            .iter()
            .flat_map(|s| s.xs.iter().zip(s.ys))
            .filter(|(x, y)| **x > 0.0 && **y > 0.0)
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts() {
        x0 = x0.min(x.log10());
        x1 = x1.max(x.log10());
        y0 = y0.min(y.log10());
        y1 = y1.max(y.log10());
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = (x0.floor(), x1.ceil().max(x0.floor() + 1.0));
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let px = |x: f64| MARGIN + (x.log10() - x0) / (x1 - x0) * (PLOT_W - 2.0 * MARGIN);
    let py = |y: f64| PLOT_H - MARGIN - (y.log10() - y0) / (y1 - y0) * (PLOT_H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        PLOT_W / 2.0,
        escape(title)
    );
    let (left, right, top, bottom) = (MARGIN, PLOT_W - MARGIN, MARGIN, PLOT_H - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    );
    for e in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{bottom}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{}" text-anchor="middle">1e{e}</text>"#, bottom + 16.0);
    }
    for e in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(e));
        let _ = writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{right}" y2="{y:.1}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"#, left - 6.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        PLOT_W / 2.0,
        PLOT_H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        PLOT_H / 2.0,
        PLOT_H / 2.0,
        escape(y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser
            .xs
            .iter()
            .zip(ser.ys)
            .filter(|(x, y)| **x > 0.0 && **y > 0.0)
            .map(|(x, y)| format!("{:.1},{:.1}", px(*x), py(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            ser.color,
            path.join(" ")
        );
        let ly = top + 16.0 + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{}">{}</text>"#,
            left + 10.0,
            ser.color,
            escape(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_round_trip() {
        let t = SymTridiag {
            diag: vec![2.0, 2.5, 1.0 / 3.0],
            off: vec![-1.0, 0.1],
        };
        let mut buf = Vec::new();
        write_tridiag_coordinate(&mut buf, "K", &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("% K\n3 3 7\n1 1 2\n"));
        assert_eq!(read_coordinate(&buf[..]).unwrap(), t.to_dense());
    }

    #[test]
    fn coordinate_rejects_bad_input() {
        assert!(read_coordinate(&b"2 2 1\n3 1 1.0\n"[..]).is_err());
        assert!(read_coordinate(&b"2 2 2\n1 1 1.0\n"[..]).is_err());
        assert!(read_coordinate(&b""[..]).is_err());
    }

    #[test]
    fn energy_csv_round_trip() {
        let s = vec![
            EnergySample {
                t: 0.0,
                energy: 1.5,
                power: 0.25,
            },
            EnergySample {
                t: 0.1,
                energy: 1.0 / 3.0,
                power: 1e-300,
            },
        ];
        let mut buf = Vec::new();
        write_energy_csv(&mut buf, &s).unwrap();
        assert!(buf.starts_with(b"t,E,P\n0,1.5,0.25\n"));
        assert_eq!(read_energy_csv(&buf[..]).unwrap(), s);
        let two = read_energy_csv(&b"t,E\n1,2\n3,4\n"[..]).unwrap();
        assert_eq!(two[1].energy, 4.0);
        assert!(read_energy_csv(&b"t,E\n1,x\n"[..]).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let xs = [1.0, 10.0, 100.0];
        let ys = [1.0, 100.0, -1.0];
        let svg = loglog_svg(
            "a<b",
            "x",
            "y",
            &[PlotSeries {
                label: "s",
                xs: &xs,
                ys: &ys,
                color: "navy",
            }],
        );
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
