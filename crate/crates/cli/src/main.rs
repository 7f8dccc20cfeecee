//! Command-line front end: wave solving, stability spectra, annulus
//! analysis, batch field evaluation, and the scripted experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use kelvinwave::experiments::{self, ExperimentConfig, ExperimentKind, RunRecord};
use kelvinwave::spectral::{assemble_linearized, constrained_spectrum, ConstraintSet};
use kelvinwave::svg::contours_to_svg;
use kelvinwave::vstate;
use kelvinwave::{field, NodeContour};

#[derive(Parser)]
#[command(
    name = "kelvinwave",
    about = "Contour-dynamics laboratory for rotating vortex patches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a rotating m-wave and print it as JSON
    Vstate {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        beta: f64,
        /// write an SVG of the boundary here
        #[arg(long)]
        svg: Option<PathBuf>,
        /// reach large amplitudes through continuation steps
        #[arg(long, default_value_t = 1)]
        steps: usize,
    },
    /// Constrained spectrum of the linearized energy form
    Spectrum {
        #[arg(long)]
        m: u32,
        #[arg(long)]
        beta: f64,
        /// collocation grid size (rounded up to a multiple of 2m)
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// write the full spectrum as CSV here
        #[arg(long)]
        csv: Option<PathBuf>,
        /// drop the m-fold restriction (control computation)
        #[arg(long, default_value_t = false)]
        unrestricted: bool,
    },
    /// Annulus stability constants, critical radius and mode scan
    Annulus {
        #[arg(long)]
        r1: f64,
        #[arg(long)]
        r2: f64,
        /// write psi(r) samples as CSV here
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run one experiment from a JSON config
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// output root; a timestamped directory is created inside
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Run a JSON array of configs in parallel and print a summary table
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// Evaluate stream and velocity of a patch at points from a CSV
    Field {
        /// contour as a JSON array of [x, y] pairs
        #[arg(long)]
        contour: PathBuf,
        /// targets CSV with columns x,y
        #[arg(long)]
        points: PathBuf,
        /// output CSV (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Vstate { m, beta, svg, steps } => {
            let wave = if steps <= 1 {
                vstate::solve_kelvin(m, beta)?
            } else {
                vstate::continuation(m, beta, steps)?.pop().unwrap()
            };
            println!("{}", serde_json::to_string_pretty(&wave)?);
            if let Some(path) = svg {
                let c = wave.contour(720)?;
                let extent = 1.2 * c.max_radius();
                fs::write(&path, contours_to_svg(&[(&c, "black")], extent))?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Spectrum {
            m,
            beta,
            n,
            csv,
            unrestricted,
        } => {
            let wave = if beta == 0.0 {
                vstate::KelvinWave::disc(m)
            } else {
                vstate::solve_kelvin(m, beta)?
            };
            let n = n.div_ceil(2 * m as usize) * 2 * m as usize;
            let op = assemble_linearized(&wave, n)?;
            let cs = ConstraintSet::new(n, m, !unrestricted);
            let eigs = constrained_spectrum(&op, &cs)?;
            let i0_min = op.i0.iter().cloned().fold(f64::INFINITY, f64::min);
            let i0_max = op.i0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let top: Vec<f64> = eigs.iter().take(10).copied().collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "m": m,
                    "beta": beta,
                    "n": n,
                    "mfold_restricted": !unrestricted,
                    "max_eig": eigs[0],
                    "eigs": top,
                    "I0_range": [i0_min, i0_max],
                }))?
            );
            if let Some(path) = csv {
                let mut text = String::from("index,eigenvalue\n");
                for (i, e) in eigs.iter().enumerate() {
                    text.push_str(&format!("{i},{e:.12e}\n"));
                }
                fs::write(&path, text)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Annulus { r1, r2, csv } => {
            let model = kelvinwave::annulus::build_annulus(r1, r2)?;
            let threshold = model.coercivity_threshold(None)?;
            let per_mode: Vec<(u32, f64)> = (1..=(4 * threshold))
                .map(|n| (n, model.mode_max_eigenvalue(n).unwrap()))
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "r1": r1,
                    "r2": r2,
                    "C1": model.c1,
                    "rstar": model.rstar,
                    "slope_inner": model.slope_inner,
                    "slope_outer": model.slope_outer,
                    "threshold_m": threshold,
                    "mode_max_eigenvalues": per_mode,
                }))?
            );
            if let Some(path) = csv {
                let mut text = String::from("r,g_bar,psi\n");
                let rmax = 1.5 * model.rstar;
                for i in 0..=600 {
                    let r = rmax * i as f64 / 600.0;
                    text.push_str(&format!(
                        "{r:.6},{:.12e},{:.12e}\n",
                        model.g_bar(r),
                        model.stream(r)
                    ));
                }
                fs::write(&path, text)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Experiment { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text)?;
            let record = experiments::run(&cfg)?;
            let dir = write_record(&out, &record)?;
            print_summary(&record);
            eprintln!("outputs in {}", dir.display());
        }
        Command::Sweep { config, out } => {
            let text = fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfgs: Vec<ExperimentConfig> = serde_json::from_str(&text)?;
            let rows = experiments::sweep(&cfgs)?;
            for (i, row) in rows.iter().enumerate() {
                match row {
                    Ok(record) => {
                        let dir = write_record(&out, record)?;
                        print!("row {i}: ");
                        print_summary(record);
                        eprintln!("  outputs in {}", dir.display());
                    }
                    Err(e) => println!("row {i}: FAILED: {e}"),
                }
            }
        }
        Command::Field { contour, points, out } => {
            let c: NodeContour = serde_json::from_str(&fs::read_to_string(&contour)?)?;
            let pts = field::parse_points_csv(&fs::read_to_string(&points)?)?;
            let samples = field::eval_batch(&c, &pts);
            let csv = field::samples_to_csv(&samples);
            match out {
                Some(path) => {
                    fs::write(&path, csv)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
    }
    Ok(())
}

fn kind_slug(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Stability => "stability",
        ExperimentKind::RotationTracking => "rotation-tracking",
        ExperimentKind::Filamentation => "filamentation",
    }
}

fn write_record(root: &Path, record: &RunRecord) -> Result<PathBuf> {
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH)?.as_millis();
    let dir = root.join(format!("{}-{stamp}", kind_slug(record.config.kind)));
    fs::create_dir_all(&dir)?;
    fs::write(
        dir.join("record.json"),
        serde_json::to_string_pretty(record)?,
    )?;
    fs::write(dir.join("series.csv"), experiments::record_to_csv(record))?;
    let extent = record
        .snapshots
        .iter()
        .map(|(_, c)| c.max_radius())
        .fold(1.0, f64::max)
        * 1.15;
    for (t, c) in &record.snapshots {
        fs::write(
            dir.join(format!("frame-t{t:.2}.svg")),
            contours_to_svg(&[(c, "black")], extent),
        )?;
        fs::write(
            dir.join(format!("contour-t{t:.2}.json")),
            serde_json::to_string(c)?,
        )?;
    }
    Ok(dir)
}

fn print_summary(record: &RunRecord) {
    let v = &record.verdicts;
    match record.config.kind {
        ExperimentKind::Stability => println!(
            "stability: max L1 to rotated wave = {:.3e} (threshold {:.1e}) pass = {:?}",
            v.max_l1_fixed.unwrap_or(f64::NAN),
            experiments::STABILITY_L1_THRESHOLD,
            v.stability_pass
        ),
        ExperimentKind::RotationTracking => println!(
            "rotation tracking: windowed drift = {:.3e}, estimators consistent = {:?}",
            v.windowed_drift.unwrap_or(f64::NAN),
            v.estimators_consistent
        ),
        ExperimentKind::Filamentation => println!(
            "filamentation: perimeter {:.3} -> {:.3} (ratio {:.2}), monotone after t = {:?}",
            v.perimeter_initial.unwrap_or(f64::NAN),
            v.perimeter_final.unwrap_or(f64::NAN),
            v.perimeter_ratio.unwrap_or(f64::NAN),
            v.monotone_after
        ),
    }
}
