use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use softreach::harness::{
    emit_plots, fmt_sig, run, run_table3_suite, save_metrics, save_points, save_summary, write_csv,
    Scenario, ScenarioConfig, DEFAULT_REPETITIONS,
};
use softreach::kinematics::{CartesianPoint, JointAngles, SINGULARITY_TOLERANCE};
use softreach::plant::{identified_models, SecondOrderModel};
use softreach::sysid::{average_trials, fit_second_order, DEFAULT_TS};
use softreach::trajectory::plan;

#[derive(Parser)]
#[command(name = "softreach", version, about = "Soft pneumatic arm kinematics, control and simulation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML scenario file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// IMU noise, degrees per axis
    #[arg(long, global = true)]
    noise_deg: Option<f64>,
    /// P1..P8
    #[arg(long, global = true)]
    setpoint: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Wrist position for joint angles (radians)
    Fk {
        #[arg(allow_negative_numbers = true)]
        theta_s: f64,
        #[arg(allow_negative_numbers = true)]
        theta_e: f64,
    },
    /// Joint angles for a wrist position (meters)
    Ik {
        #[arg(allow_negative_numbers = true)]
        x: f64,
        #[arg(allow_negative_numbers = true)]
        y: f64,
        #[arg(allow_negative_numbers = true)]
        z: f64,
    },
    /// Reachable wrist positions over the joint-limit grid, to workspace.csv
    Workspace {
        #[arg(long, default_value_t = 21)]
        n: usize,
    },
    /// Jacobian minors over the joint-limit grid, to singularities.csv
    Singularities {
        #[arg(long, default_value_t = 91)]
        n: usize,
    },
    /// Desired joint trajectory for the setpoint, to traj.csv
    Traj {
        #[arg(long, default_value_t = 50.0)]
        rate: f64,
    },
    /// One closed-loop run: log.csv, metrics.csv and plots
    Simulate {
        #[arg(long)]
        no_plots: bool,
    },
    /// All eight setpoints with repetitions, to summary.csv
    Suite {
        #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
        reps: usize,
    },
    /// Fit a second-order model to step-response trials (CSV t,pwm,angle_deg)
    Sysid {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_TS)]
        ts: f64,
        #[arg(long)]
        init_b: Option<f64>,
        #[arg(long)]
        init_a1: Option<f64>,
        #[arg(long)]
        init_a0: Option<f64>,
        /// Also write the fit to this CSV
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn scenario(common: &Common) -> Result<Scenario<f64>> {
    let mut scn = Scenario::for_setpoint("P1")?;
    if let Some(path) = &common.config {
        ScenarioConfig::load(path)?.apply(&mut scn)?;
    }
    if let Some(label) = &common.setpoint {
        let duration = scn.spec.duration;
        scn.spec = softreach::trajectory::setpoint_spec(label)?;
        scn.spec.duration = duration;
    }
    if let Some(seed) = common.seed {
        scn.seed = seed;
    }
    if let Some(noise) = common.noise_deg {
        scn.noise.sigma_deg = noise;
    }
    Ok(scn)
}

fn out_file(common: &Common, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(common.out.join(name))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let common = &cli.common;
    let scn = scenario(common)?;
    let geom = scn.geometry;
    geom.validate()?;
    match cli.command {
        Command::Fk { theta_s, theta_e } => {
            let p = geom.forward_kinematics(&JointAngles::new(theta_s, theta_e));
            println!("x={} y={} z={}", fmt_sig(p.x), fmt_sig(p.y), fmt_sig(p.z));
        }
        Command::Ik { x, y, z } => {
            let q = geom.inverse_kinematics(&CartesianPoint::new(x, y, z))?;
            println!("theta_s={} theta_e={}", fmt_sig(q.theta_s), fmt_sig(q.theta_e));
        }
        Command::Workspace { n } => {
            let path = out_file(common, "workspace.csv")?;
            let points = geom.sample_workspace(n);
            save_points(&points, &path)?;
            println!("{} points -> {}", points.len(), path.display());
        }
        Command::Singularities { n } => {
            let path = out_file(common, "singularities.csv")?;
            let scan = geom.singularity_scan(n);
            let tol = SINGULARITY_TOLERANCE;
            let rows: Vec<Vec<String>> = scan
                .iter()
                .map(|(q, d)| {
                    let v = d.vanishing(tol);
                    let mut cells: Vec<String> = [q.theta_s, q.theta_e, d.j1, d.j2, d.j3]
                        .iter()
                        .map(|x| fmt_sig(*x))
                        .collect();
                    cells.extend(v.iter().map(|b| u8::from(*b).to_string()));
                    cells.push(u8::from(d.is_singular(tol)).to_string());
                    cells
                })
                .collect();
            let header = [
                "theta_s", "theta_e", "det_j1", "det_j2", "det_j3", "zero_j1", "zero_j2", "zero_j3", "singular",
            ];
            let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
            write_csv(std::io::BufWriter::new(file), &header, rows)?;
            let singular = scan.iter().filter(|(_, d)| d.is_singular(tol)).count();
            println!("{} configurations, {} singular", scan.len(), singular);
            for (q, d) in &scan {
                let zeros = d.vanishing(tol).iter().filter(|b| **b).count();
                if zeros >= 2 {
                    println!(
                        "  theta_s={} theta_e={}: {} of 3 minors vanish",
                        fmt_sig(q.theta_s),
                        fmt_sig(q.theta_e),
                        zeros
                    );
                }
            }
        }
        Command::Traj { rate } => {
            if !(rate > 0.0) {
                bail!("rate must be positive, got {rate}");
            }
            let planned = plan(&geom, &scn.spec, &scn.limits)?;
            let n = (planned.duration() * rate).ceil() as usize;
            let rows = (0..=n).map(|k| {
                let t = (k as f64 / rate).min(planned.duration());
                let (q, qd) = planned.desired(t);
                [t, q.theta_s, q.theta_e, qd.theta_s, qd.theta_e].map(fmt_sig)
            });
            let path = out_file(common, "traj.csv")?;
            let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
            write_csv(
                std::io::BufWriter::new(file),
                &["t", "theta_s_des", "theta_e_des", "theta_s_dot_des", "theta_e_dot_des"],
                rows,
            )?;
            println!(
                "{} ({}) duration {} s -> {}",
                planned.label,
                planned.mode,
                fmt_sig(planned.duration()),
                path.display()
            );
        }
        Command::Simulate { no_plots } => {
            let (log, metrics) = run(&scn)?;
            log.save(&out_file(common, "log.csv")?)?;
            save_metrics(&metrics, log.held_ticks.len(), &out_file(common, "metrics.csv")?)?;
            if !no_plots {
                emit_plots(&log, &common.out)?;
            }
            println!("{} ({} rows)", scn.spec.label, log.len());
            println!(
                "steady-state error: shoulder {} deg, elbow {} deg",
                fmt_sig(metrics.steady_state_error.shoulder.to_degrees()),
                fmt_sig(metrics.steady_state_error.elbow.to_degrees())
            );
            println!(
                "settling time: shoulder {} s, elbow {} s",
                fmt_sig(metrics.settling_time.shoulder),
                fmt_sig(metrics.settling_time.elbow)
            );
            println!("wrist terminal error: {} m", fmt_sig(metrics.wrist_terminal_error));
        }
        Command::Suite { reps } => {
            let rows = run_table3_suite(&scn, reps)?;
            let path = out_file(common, "summary.csv")?;
            save_summary(&rows, &path)?;
            println!("setpoint mode ss_err_s(deg) ss_err_e(deg) miss_s miss_e");
            for r in &rows {
                println!(
                    "{:<8} {:<4} {:>12} {:>12} {:<6} {:<6}",
                    r.label,
                    r.mode.abbrev(),
                    fmt_sig(r.metrics.steady_state_error.shoulder.to_degrees()),
                    fmt_sig(r.metrics.steady_state_error.elbow.to_degrees()),
                    r.saturated_miss.shoulder,
                    r.saturated_miss.elbow
                );
            }
            println!("-> {}", path.display());
        }
        Command::Sysid {
            files,
            ts,
            init_b,
            init_a1,
            init_a0,
            report,
        } => {
            let (_, elbow) = identified_models::<f64>();
            let init = SecondOrderModel::new(
                init_b.unwrap_or(elbow.b),
                init_a1.unwrap_or(elbow.a1),
                init_a0.unwrap_or(elbow.a0),
            );
            let data = average_trials(ts, read_trials(&files)?)?;
            let fit = fit_second_order(&data, &init)?;
            let m = fit.model;
            println!("b={} a1={} a0={}", fmt_sig(m.b), fmt_sig(m.a1), fmt_sig(m.a0));
            println!("fit={}%", fmt_sig(fit.fit_percent));
            if let Some(path) = report {
                let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
                write_csv(
                    std::io::BufWriter::new(file),
                    &["b", "a1", "a0", "fit_percent", "residual_norm"],
                    [[m.b, m.a1, m.a0, fit.fit_percent, fit.residual_norm].map(fmt_sig)],
                )?;
            }
        }
    }
    Ok(())
}

/// Reads one trial per file and groups them by their PWM level.
fn read_trials(files: &[PathBuf]) -> Result<Vec<(f64, Vec<Vec<f64>>)>> {
    let mut levels: BTreeMap<u64, (f64, Vec<Vec<f64>>)> = BTreeMap::new();
    for path in files {
        let (pwm, angles) = read_trial(path)?;
        levels.entry(pwm.to_bits()).or_insert_with(|| (pwm, Vec::new())).1.push(angles);
    }
    let mut out: Vec<_> = levels.into_values().collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

fn read_trial(path: &Path) -> Result<(f64, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{}: missing column {name}", path.display()))
    };
    let (pwm_col, angle_col) = (col("pwm")?, col("angle_deg")?);
    let mut pwm = None;
    let mut angles = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |c: usize| -> Result<f64> {
            let field = record.get(c).unwrap_or("").trim();
            field
                .parse()
                .with_context(|| format!("{} row {}: bad number {field:?}", path.display(), i + 2))
        };
        let p = parse(pwm_col)?;
        match pwm {
            None => pwm = Some(p),
            Some(level) if level != p => {
                bail!("{}: pwm changes from {level} to {p} at row {}", path.display(), i + 2)
            }
            Some(_) => {}
        }
        angles.push(parse(angle_col)?);
    }
    let pwm = pwm.with_context(|| format!("{}: no samples", path.display()))?;
    Ok((pwm, angles))
}
