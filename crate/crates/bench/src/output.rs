use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scheme};
use crate::error::{BenchError, BenchResult};
use crate::sweep::{eval_seed, SweepResult};

pub const CSV_HEADER: &str = "axis,scheme,mean_rate,std_rate,overhead,n";

pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> BenchResult<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.axis_value, r.scheme, r.mean_rate, r.std_rate, r.overhead, r.n
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TrainingEntry {
    n_antennas: usize,
    carrier_ghz: f64,
    epochs: usize,
    batches_per_epoch: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: BTreeMap<&'static str, String>,
    training_seed: u64,
    eval_seeds: Vec<u64>,
    rows: usize,
    training: Vec<TrainingEntry>,
    files: [&'a str; 3],
}

/// Paths written by [`emit_outputs`].
#[derive(Debug, Clone)]
pub struct Outputs {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub plot: PathBuf,
}

/// CSV first, so the numbers survive a failing manifest or plot.
pub fn emit_outputs(result: &SweepResult, cfg: &ExperimentConfig, dir: &Path) -> BenchResult<Outputs> {
    if result.rows.is_empty() {
        return Err(BenchError::Config("empty sweep result".into()));
    }
    fs::create_dir_all(dir)?;
    let out = Outputs {
        csv: dir.join("sweep.csv"),
        manifest: dir.join("manifest.json"),
        plot: dir.join(format!("sweep_{}.svg", cfg.axis.as_str())),
    };
    let mut csv = Vec::new();
    write_csv(result, &mut csv)?;
    fs::write(&out.csv, csv)?;

    let plot_name = out.plot.file_name().and_then(|s| s.to_str()).unwrap_or("sweep.svg");
    let manifest = Manifest {
        tool: "nfbeam-bench",
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.to_pairs(),
        training_seed: cfg.seed,
        eval_seeds: (0..cfg.grid.len()).map(|i| eval_seed(cfg.seed, i)).collect(),
        rows: result.rows.len(),
        training: result
            .training
            .iter()
            .map(|t| TrainingEntry {
                n_antennas: t.n_antennas,
                carrier_ghz: t.carrier_ghz,
                epochs: t.epochs,
                batches_per_epoch: t.batches_per_epoch,
            })
            .collect(),
        files: ["sweep.csv", "manifest.json", plot_name],
    };
    fs::write(&out.manifest, serde_json::to_string_pretty(&manifest)? + "\n")?;
    plot(result, cfg, &out.plot)?;
    Ok(out)
}

fn schemes_in(result: &SweepResult) -> Vec<Scheme> {
    let mut s: Vec<Scheme> = Vec::new();
    for r in &result.rows {
        if !s.contains(&r.scheme) {
            s.push(r.scheme);
        }
    }
    s
}

pub fn plot(result: &SweepResult, cfg: &ExperimentConfig, path: &Path) -> BenchResult<()> {
    let perr = |e: &dyn std::fmt::Display| BenchError::Plot(e.to_string());
    let xs: Vec<f64> = result.rows.iter().map(|r| r.axis_value).collect();
    let (mut x0, mut x1) = (xs.iter().cloned().fold(f64::INFINITY, f64::min), xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if x0 == x1 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let y1 = result.rows.iter().map(|r| r.mean_rate).fold(0.0, f64::max) * 1.1 + 1e-9;

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| perr(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| perr(&e))?;
    chart
        .configure_mesh()
        .x_desc(cfg.axis.label())
        .y_desc("mean rate (bit/s/Hz)")
        .draw()
        .map_err(|e| perr(&e))?;
    for (k, scheme) in schemes_in(result).into_iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let pts: Vec<(f64, f64)> = result
            .rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.axis_value, r.mean_rate))
            .collect();
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| perr(&e))?
            .label(scheme.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| perr(&e))?;
    root.present().map_err(|e| perr(&e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadLine {
    pub scheme: Scheme,
    /// Codeword evaluations per beam decision.
    pub per_decision: f64,
    /// Summed over every evaluated decision.
    pub total: f64,
    /// `epochs × batches`, learned scheme only.
    pub training_batches: Option<usize>,
}

pub fn overhead_report(result: &SweepResult) -> Vec<OverheadLine> {
    schemes_in(result)
        .into_iter()
        .map(|scheme| {
            let rows: Vec<_> = result.rows.iter().filter(|r| r.scheme == scheme).collect();
            let decisions: usize = rows.iter().map(|r| r.n).sum();
            let total: f64 = rows.iter().map(|r| r.overhead * r.n as f64).sum();
            OverheadLine {
                scheme,
                per_decision: if decisions > 0 { total / decisions as f64 } else { 0.0 },
                total,
                training_batches: (scheme == Scheme::Learned).then(|| {
                    result
                        .training
                        .iter()
                        .map(|t| t.epochs * t.batches_per_epoch)
                        .sum()
                }),
            }
        })
        .collect()
}

pub fn format_overhead(lines: &[OverheadLine]) -> String {
    let mut s = format!("{:<22} {:>14} {:>14} {:>16}\n", "scheme", "per-decision", "total", "training batches");
    for l in lines {
        let train = l.training_batches.map(|b| b.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "{:<22} {:>14} {:>14} {:>16}", l.scheme.as_str(), l.per_decision, l.total, train);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Axis;
    use crate::sweep::{SweepRow, TrainingCost};

    fn result() -> SweepResult {
        let row = |v: f64, scheme, rate, overhead| SweepRow {
            axis_value: v,
            scheme,
            mean_rate: rate,
            std_rate: 0.1,
            overhead,
            n: 10,
        };
        SweepResult {
            axis: Axis::Snr,
            rows: vec![
                row(0.0, Scheme::Learned, 1.5, 0.0),
                row(0.0, Scheme::Exhaustive256, 1.0, 256.0),
                row(5.0, Scheme::Learned, 2.5, 0.0),
                row(5.0, Scheme::Exhaustive256, 2.0, 256.0),
            ],
            training: vec![TrainingCost {
                n_antennas: 64,
                carrier_ghz: 50.0,
                epochs: 200,
                batches_per_epoch: 5,
            }],
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(&result(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[2], "0,exhaustive-256,1,0.1,256,10");
    }

    #[test]
    fn overhead_accounting() {
        let rep = overhead_report(&result());
        assert_eq!(rep[0].scheme, Scheme::Learned);
        assert_eq!(rep[0].per_decision, 0.0);
        assert_eq!(rep[0].training_batches, Some(1000));
        assert_eq!(rep[1].per_decision, 256.0);
        assert_eq!(rep[1].total, 5120.0);
        assert!(format_overhead(&rep).contains("exhaustive-256"));
    }

    #[test]
    fn emits_all_files() {
        let dir = std::env::temp_dir().join(format!("nfbeam-out-{}", std::process::id()));
        let cfg = ExperimentConfig::default();
        let out = emit_outputs(&result(), &cfg, &dir).unwrap();
        for p in [&out.csv, &out.manifest, &out.plot] {
            assert!(fs::metadata(p).unwrap().len() > 0, "{}", p.display());
        }
        let manifest: serde_json::Value = serde_json::from_slice(&fs::read(&out.manifest).unwrap()).unwrap();
        assert_eq!(manifest["config"]["axis"], "snr");
        assert_eq!(manifest["eval_seeds"].as_array().unwrap().len(), 9);
        fs::remove_dir_all(dir).ok();
    }
}
