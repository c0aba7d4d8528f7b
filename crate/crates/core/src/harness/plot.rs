use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SimLog;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Files written by [`emit_plots`], in order.
pub const PLOT_FILES: [&str; 7] = [
    "shoulder_angle.svg",
    "elbow_angle.svg",
    "pwm.svg",
    "error.svg",
    "wrist_xy.svg",
    "wrist_xz.svg",
    "wrist_yz.svg",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#7f7f7f"];

struct Series {
    name: &'static str,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

struct Panel {
    title: String,
    x_label: &'static str,
    y_label: &'static str,
    series: Vec<Series>,
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for (x, y) in series.iter().flat_map(|s| s.points.iter()) {
        b.0 = b.0.min(*x);
        b.1 = b.1.max(*x);
        b.2 = b.2.min(*y);
        b.3 = b.3.max(*y);
    }
    let pad = |lo: f64, hi: f64| {
        if !(lo <= hi) {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        }
    };
    let (x0, x1) = pad(b.0, b.1);
    let (y0, y1) = pad(b.2, b.3);
    (x0, x1, y0, y1)
}

fn render(panel: &Panel) -> String {
    let (x0, x1, y0, y1) = bounds(&panel.series);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        panel.title
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{:.3}</text>"#,
            sx(xv),
            HEIGHT - MARGIN + 16.0,
            xv
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.3}</text>"#,
            MARGIN - 4.0,
            sy(yv) + 4.0,
            yv
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        panel.x_label
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        panel.y_label
    );
    for (i, series) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let dash = if series.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let mut pts = String::new();
        for (x, y) in &series.points {
            let _ = write!(pts, "{:.2},{:.2} ", sx(*x), sy(*y));
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            pts.trim_end()
        );
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN - 6.0,
            series.name
        );
    }
    s.push_str("</svg>\n");
    s
}

fn panels<T: Real>(log: &SimLog<T>) -> Vec<Panel> {
    let f = |v: T| v.to_f64_lossy();
    let col = |pick: &dyn Fn(&super::LogRow<T>) -> (T, T)| -> Vec<(f64, f64)> {
        log.rows.iter().map(|r| pick(r)).map(|(a, b)| (f(a), f(b))).collect()
    };
    let series = |name, points, dashed| Series { name, points, dashed };
    let label = &log.label;
    vec![
        Panel {
            title: format!("{label} shoulder angle"),
            x_label: "t (s)",
            y_label: "theta_s (rad)",
            series: vec![
                series("desired", col(&|r| (r.t, r.desired.theta_s)), true),
                series("true", col(&|r| (r.t, r.truth.theta_s)), false),
                series("measured", col(&|r| (r.t, r.measured.theta_s)), false),
            ],
        },
        Panel {
            title: format!("{label} elbow angle"),
            x_label: "t (s)",
            y_label: "theta_e (rad)",
            series: vec![
                series("desired", col(&|r| (r.t, r.desired.theta_e)), true),
                series("true", col(&|r| (r.t, r.truth.theta_e)), false),
                series("measured", col(&|r| (r.t, r.measured.theta_e)), false),
            ],
        },
        Panel {
            title: format!("{label} PWM"),
            x_label: "t (s)",
            y_label: "PWM (%)",
            series: vec![
                series("shoulder", col(&|r| (r.t, r.pwm_s)), false),
                series("elbow", col(&|r| (r.t, r.pwm_e)), false),
            ],
        },
        Panel {
            title: format!("{label} absolute error"),
            x_label: "t (s)",
            y_label: "error (deg)",
            series: vec![
                series(
                    "shoulder",
                    col(&|r| (r.t, (r.desired.theta_s - r.truth.theta_s).abs().to_degrees_())),
                    false,
                ),
                series(
                    "elbow",
                    col(&|r| (r.t, (r.desired.theta_e - r.truth.theta_e).abs().to_degrees_())),
                    false,
                ),
            ],
        },
        Panel {
            title: format!("{label} wrist path (x-y)"),
            x_label: "x (m)",
            y_label: "y (m)",
            series: vec![
                series("desired", col(&|r| (r.wrist_desired.x, r.wrist_desired.y)), true),
                series("true", col(&|r| (r.wrist.x, r.wrist.y)), false),
            ],
        },
        Panel {
            title: format!("{label} wrist path (x-z)"),
            x_label: "x (m)",
            y_label: "z (m)",
            series: vec![
                series("desired", col(&|r| (r.wrist_desired.x, r.wrist_desired.z)), true),
                series("true", col(&|r| (r.wrist.x, r.wrist.z)), false),
            ],
        },
        Panel {
            title: format!("{label} wrist path (y-z)"),
            x_label: "y (m)",
            y_label: "z (m)",
            series: vec![
                series("desired", col(&|r| (r.wrist_desired.y, r.wrist_desired.z)), true),
                series("true", col(&|r| (r.wrist.y, r.wrist.z)), false),
            ],
        },
    ]
}

/// Writes one SVG per panel into `dir` and returns the paths.
pub fn emit_plots<T: Real>(log: &SimLog<T>, dir: &Path) -> Result<Vec<PathBuf>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(PLOT_FILES.len());
    for (name, panel) in PLOT_FILES.iter().zip(panels(log)) {
        let path = dir.join(name);
        fs::write(&path, render(&panel)).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run, Scenario};

    #[test]
    fn plots_are_reproducible() {
        let (log, _) = run(&Scenario::<f64>::for_setpoint("P6").unwrap()).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = emit_plots(&log, a.path()).unwrap();
        let pb = emit_plots(&log, b.path()).unwrap();
        assert_eq!(pa.len(), PLOT_FILES.len());
        for (x, y) in pa.iter().zip(&pb) {
            let sx = fs::read(x).unwrap();
            assert!(sx.starts_with(b"<svg"));
            assert_eq!(sx, fs::read(y).unwrap());
        }
    }

    #[test]
    fn flat_series_get_a_unit_range() {
        let panel = Panel {
            title: "flat".into(),
            x_label: "t",
            y_label: "v",
            series: vec![Series {
                name: "c",
                points: vec![(0.0, 1.0), (1.0, 1.0)],
                dashed: false,
            }],
        };
        let svg = render(&panel);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn empty_log_is_an_error() {
        let log = SimLog::<f64> {
            rows: vec![],
            held_ticks: vec![],
            label: String::new(),
        };
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(emit_plots(&log, d.path()), Err(Error::EmptyLog)));
    }
}
