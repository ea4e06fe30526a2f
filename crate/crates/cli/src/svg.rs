//! Minimal SVG line charts: fixed 800x600 viewBox, linear axes scaled to the
//! data extent plus a 5% margin, one `<polyline>` per series.

use std::fmt::Write as _;
use std::path::PathBuf;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 70.0;
const TICKS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Solid,
    Dotted,
    /// Points only: the polyline is unstroked and carries circle markers.
    Markers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    pub color: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotError {
    NoSeries,
    EmptySeries(String),
    NonFinite(String),
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::NoSeries => write!(f, "plot has no series"),
            PlotError::EmptySeries(s) => write!(f, "series `{s}` has no points"),
            PlotError::NonFinite(s) => write!(f, "series `{s}` has a non-finite coordinate"),
        }
    }
}

impl std::error::Error for PlotError {}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Axis range padded by 5% on each side; a degenerate range is widened.
fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    if span <= 0.0 {
        let d = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return (lo - d, hi + d);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

impl PlotSpec {
    pub fn validate(&self) -> Result<(), PlotError> {
        if self.series.is_empty() {
            return Err(PlotError::NoSeries);
        }
        for s in &self.series {
            if s.points.is_empty() {
                return Err(PlotError::EmptySeries(s.name.clone()));
            }
            if s.points
                .iter()
                .any(|(x, y)| !(x.is_finite() && y.is_finite()))
            {
                return Err(PlotError::NonFinite(s.name.clone()));
            }
        }
        Ok(())
    }

    pub fn render(&self) -> Result<String, PlotError> {
        self.validate()?;
        let all = self.series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let (x0, x1) = padded(x0, x1);
        let (y0, y1) = padded(y0, y1);
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * plot_h;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"#
        );
        let _ = writeln!(
            svg,
            r#"<defs><marker id="dot" viewBox="0 0 10 10" refX="5" refY="5" markerWidth="7" markerHeight="7"><circle cx="5" cy="5" r="4" fill="context-stroke"/></marker></defs>"#
        );
        let _ = writeln!(
            svg,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="30" text-anchor="middle" font-size="18">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        for i in 0..=TICKS {
            let t = i as f64 / TICKS as f64;
            let xv = x0 + t * (x1 - x0);
            let yv = y0 + t * (y1 - y0);
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                svg,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" text-anchor="middle" font-size="12">{}</text>"#,
                tick_label(xv),
                b = TOP + plot_h,
                b2 = TOP + plot_h + 6.0,
                ty = TOP + plot_h + 22.0
            );
            let _ = writeln!(
                svg,
                r#"<line x1="{l}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end" font-size="12">{}</text>"#,
                tick_label(yv),
                l = LEFT - 6.0,
                tx = LEFT - 10.0,
                ty = py + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 20.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="20" y="{y}" text-anchor="middle" font-size="14" transform="rotate(-90 20 {y})">{}</text>"#,
            escape(&self.y_label),
            y = TOP + plot_h / 2.0
        );

        for (i, s) in self.series.iter().enumerate() {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let style = match s.style {
                Style::Solid => format!(r#"fill="none" stroke="{}" stroke-width="2""#, s.color),
                Style::Dotted => format!(
                    r#"fill="none" stroke="{}" stroke-width="1.5" stroke-dasharray="2,4""#,
                    s.color
                ),
                Style::Markers => format!(
                    r#"fill="none" stroke="{}" stroke-width="0" marker-start="url(#dot)" marker-mid="url(#dot)" marker-end="url(#dot)""#,
                    s.color
                ),
            };
            let _ = writeln!(
                svg,
                r#"<polyline data-series="{}" points="{}" {style}/>"#,
                escape(&s.name),
                pts.join(" ")
            );
            let ly = TOP + 18.0 + 18.0 * i as f64;
            let lx = LEFT + 14.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{ly}" font-size="12" fill="{}">{}</text>"#,
                lx,
                s.color,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }

    pub fn write(&self) -> std::io::Result<()> {
        let svg = self
            .render()
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, e))?;
        std::fs::write(&self.output, svg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(series: Vec<Series>) -> PlotSpec {
        PlotSpec {
            title: "F vs <mu_in> & more".into(),
            x_label: "mu_in".into(),
            y_label: "fidelity".into(),
            series,
            output: PathBuf::from("unused.svg"),
        }
    }

    fn line(name: &str, pts: &[(f64, f64)], style: Style) -> Series {
        Series {
            name: name.into(),
            points: pts.to_vec(),
            style,
            color: "black",
        }
    }

    #[test]
    fn one_polyline_per_series() {
        let s = spec(vec![
            line("a", &[(0.0, 0.5), (1.0, 0.8)], Style::Solid),
            line("b", &[(0.0, 0.5), (1.0, 0.9)], Style::Dotted),
            line("data", &[(0.5, 0.7)], Style::Markers),
        ]);
        let svg = s.render().unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("viewBox=\"0 0 800 600\""));
        assert!(svg.contains("F vs &lt;mu_in&gt; &amp; more"));
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(spec(vec![]).render(), Err(PlotError::NoSeries));
        assert_eq!(
            spec(vec![line("e", &[], Style::Solid)]).render(),
            Err(PlotError::EmptySeries("e".into()))
        );
        assert_eq!(
            spec(vec![line("n", &[(0.0, f64::NAN)], Style::Solid)]).render(),
            Err(PlotError::NonFinite("n".into()))
        );
    }

    #[test]
    fn degenerate_extent_is_widened() {
        assert_eq!(padded(2.0, 2.0), (1.9, 2.1));
        assert_eq!(padded(0.0, 0.0), (-1.0, 1.0));
        let (lo, hi) = padded(0.0, 10.0);
        assert!((lo + 0.5).abs() < 1e-12 && (hi - 10.5).abs() < 1e-12);
    }
}
