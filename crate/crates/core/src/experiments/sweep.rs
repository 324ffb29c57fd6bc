use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit, fit_windowed, FitKind, RateFit};
use super::metrics::{generalization_gap, mean_std, median, GapSummary};
use super::report::ExperimentReport;
use super::run::{run_point, DataCache, RunSpec};
use crate::error::{invalid, Result};

/// Smallest prefix a windowed rate fit may use.
pub const MIN_FIT_WINDOW: usize = 4;

#[derive(Debug, Clone)]
pub struct SeriesPlan {
    pub name: String,
    pub points: Vec<(f64, RunSpec)>,
}

#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub name: String,
    pub x_label: String,
    /// Rate laws fitted to the mean test error (and gap) of every series.
    pub fits: Vec<FitKind>,
    pub series: Vec<SeriesPlan>,
}

#[derive(Debug, Clone)]
pub struct PresetPlan {
    pub name: String,
    pub desk: bool,
    pub notes: Vec<String>,
    pub sweeps: Vec<SweepPlan>,
}

impl PresetPlan {
    pub fn run_count(&self) -> usize {
        self.sweeps.iter().flat_map(|s| &s.series).map(|s| s.points.len()).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointSummary {
    pub x: f64,
    pub reports: Vec<ExperimentReport>,
    /// Replicates that failed, with the error text.
    pub failures: Vec<String>,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
    pub gap_mean: f64,
    pub gap_std: f64,
    pub test_median: f64,
    pub gap_median: f64,
}

impl PointSummary {
    fn new(x: f64, reports: Vec<ExperimentReport>, failures: Vec<String>) -> Self {
        let col = |f: fn(&ExperimentReport) -> f64| reports.iter().map(f).collect::<Vec<f64>>();
        let (train, test, gap) = (col(|r| r.final_train_mse), col(|r| r.final_test_mse), col(|r| r.gap));
        let (train_mean, train_std) = mean_std(&train);
        let (test_mean, test_std) = mean_std(&test);
        let (gap_mean, gap_std) = mean_std(&gap);
        PointSummary {
            x,
            failures,
            train_mean,
            train_std,
            test_mean,
            test_std,
            gap_mean,
            gap_std,
            test_median: median(&test).unwrap_or(f64::NAN),
            gap_median: median(&gap).unwrap_or(f64::NAN),
            reports,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub name: String,
    pub points: Vec<PointSummary>,
    /// Keyed `test_<kind>` / `gap_<kind>`.
    pub fits: BTreeMap<String, RateFit>,
    /// Per-run gaps and the test-on-train slope over all runs of the series.
    pub gap: Option<GapSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub name: String,
    pub x_label: String,
    pub series: Vec<SeriesSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PresetReport {
    pub name: String,
    pub desk: bool,
    pub runs: usize,
    pub notes: Vec<String>,
    pub sweeps: Vec<SweepSummary>,
}

impl PresetReport {
    pub fn sweep(&self, name: &str) -> Option<&SweepSummary> {
        self.sweeps.iter().find(|s| s.name == name)
    }
}

impl SweepSummary {
    pub fn series(&self, name: &str) -> Option<&SeriesSummary> {
        self.series.iter().find(|s| s.name == name)
    }
}

fn kind_name(kind: FitKind) -> &'static str {
    match kind {
        FitKind::PowerLaw => "power_law",
        FitKind::Exponential => "exponential",
    }
}

/// Fits `kind` to positive `(x, err)` pairs: windowed when enough points
/// exist, plain with three, nothing below that.
pub fn sweep_fit(kind: FitKind, xs: &[f64], errs: &[f64]) -> Option<RateFit> {
    let (xs, errs): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(errs)
        .filter(|(x, e)| e.is_finite() && **e > 0.0 && (kind == FitKind::Exponential || **x > 0.0))
        .map(|(x, e)| (*x, *e))
        .unzip();
    if xs.len() > MIN_FIT_WINDOW {
        fit_windowed(kind, &xs, &errs, MIN_FIT_WINDOW).ok()
    } else {
        fit(kind, &xs, &errs).ok()
    }
}

fn summarize_series(name: &str, points: Vec<PointSummary>, kinds: &[FitKind]) -> SeriesSummary {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let test: Vec<f64> = points.iter().map(|p| p.test_mean).collect();
    let gap: Vec<f64> = points.iter().map(|p| p.gap_mean).collect();
    let mut fits = BTreeMap::new();
    for &k in kinds {
        if let Some(f) = sweep_fit(k, &xs, &test) {
            fits.insert(format!("test_{}", kind_name(k)), f);
        }
        if gap.iter().all(|g| *g > 0.0) {
            if let Some(f) = sweep_fit(k, &xs, &gap) {
                fits.insert(format!("gap_{}", kind_name(k)), f);
            }
        }
    }
    let all: Vec<&ExperimentReport> = points.iter().flat_map(|p| &p.reports).collect();
    SeriesSummary {
        name: name.to_string(),
        gap: (!all.is_empty()).then(|| generalization_gap(&all)).and_then(|g| g.ok()),
        points,
        fits,
    }
}

fn slug(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

fn run_dir(root: &Path, sweep: &str, series: &str, x: f64, r: usize) -> PathBuf {
    root.join(sweep).join(series).join(format!("x{}_run{r}", slug(x)))
}

/// Runs every point of `plan` `runs` times (seeds shifted by the replicate
/// index) and, with `out`, writes per-run artifacts, per-sweep summary CSVs,
/// fit tables and plot scripts below `out/<preset>/`.
pub fn run_plan(plan: &PresetPlan, runs: usize, out: Option<&Path>) -> Result<PresetReport> {
    if runs == 0 {
        return Err(invalid("--runs must be at least 1"));
    }
    let root = out.map(|o| o.join(&plan.name));
    let cache = DataCache::new();
    let jobs: Vec<(usize, usize, usize, usize)> = plan
        .sweeps
        .iter()
        .enumerate()
        .flat_map(|(si, sw)| {
            sw.series.iter().enumerate().flat_map(move |(ci, se)| {
                (0..se.points.len()).flat_map(move |pi| (0..runs).map(move |r| (si, ci, pi, r)))
            })
        })
        .collect();
    let results: Vec<Result<ExperimentReport>> = jobs
        .par_iter()
        .map(|&(si, ci, pi, r)| {
            let sweep = &plan.sweeps[si];
            let series = &sweep.series[ci];
            let (x, base) = &series.points[pi];
            let mut spec = base.replicate(r as u64);
            spec.label = format!("{}/{}/{}/x={}/run{r}", plan.name, sweep.name, series.name, x);
            let outcome = run_point(&spec, &cache)?;
            if let Some(root) = &root {
                let dir = run_dir(root, &sweep.name, &series.name, *x, r);
                fs::create_dir_all(&dir)?;
                fs::write(dir.join("report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
                fs::write(dir.join("config.toml"), spec.to_toml()?)?;
                let mut w = BufWriter::new(fs::File::create(dir.join("history.csv"))?);
                outcome.report.write_history_csv(&mut w)?;
                w.flush()?;
                outcome.model.save(dir.join("model.bin"))?;
            }
            Ok(outcome.report)
        })
        .collect();

    let mut results = results.into_iter();
    let mut sweeps = Vec::new();
    for sweep in &plan.sweeps {
        let mut series_out = Vec::new();
        for series in &sweep.series {
            let mut points = Vec::new();
            for (x, _) in &series.points {
                let mut reports = Vec::new();
                let mut failures = Vec::new();
                for r in 0..runs {
                    match results.next().expect("one result per job") {
                        Ok(rep) => reports.push(rep),
                        Err(e) => failures.push(format!("run {r}: {e}")),
                    }
                }
                points.push(PointSummary::new(*x, reports, failures));
            }
            series_out.push(summarize_series(&series.name, points, &sweep.fits));
        }
        sweeps.push(SweepSummary {
            name: sweep.name.clone(),
            x_label: sweep.x_label.clone(),
            series: series_out,
        });
    }
    let report = PresetReport {
        name: plan.name.clone(),
        desk: plan.desk,
        runs,
        notes: plan.notes.clone(),
        sweeps,
    };
    if let Some(root) = &root {
        write_outputs(&report, root)?;
    }
    Ok(report)
}

pub fn write_summary_csv<W: Write>(sweep: &SweepSummary, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "series,x,runs,failed,train_mean,train_std,test_mean,test_std,gap_mean,gap_std,test_median,gap_median"
    )?;
    for s in &sweep.series {
        for p in &s.points {
            writeln!(
                w,
                "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.name,
                p.x,
                p.reports.len(),
                p.failures.len(),
                p.train_mean,
                p.train_std,
                p.test_mean,
                p.test_std,
                p.gap_mean,
                p.gap_std,
                p.test_median,
                p.gap_median
            )?;
        }
    }
    Ok(())
}

pub fn write_fits_csv<W: Write>(sweep: &SweepSummary, w: &mut W) -> Result<()> {
    writeln!(w, "series,fit,slope,intercept,r2,points,slope_stderr")?;
    for s in &sweep.series {
        for (name, f) in &s.fits {
            writeln!(
                w,
                "{},{},{:e},{:e},{},{},{:e}",
                s.name, name, f.slope, f.intercept, f.r2, f.points, f.slope_stderr
            )?;
        }
    }
    Ok(())
}

/// Matplotlib script plotting mean train/test error with one-SD bars per series.
pub fn plot_script(sweep: &SweepSummary) -> String {
    format!(
        r#"import csv
import collections
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = collections.defaultdict(list)
with open("summary.csv") as f:
    for r in csv.DictReader(f):
        rows[r["series"]].append(r)

fig, ax = plt.subplots(figsize=(6, 4))
for name, rs in rows.items():
    x = [float(r["x"]) for r in rs]
    for key, style in (("train", "-"), ("test", "--")):
        y = [float(r[key + "_mean"]) for r in rs]
        e = [float(r[key + "_std"]) if r[key + "_std"] != "NaN" else 0.0 for r in rs]
        ax.errorbar(x, y, yerr=e, linestyle=style, marker="o", capsize=3, label=f"{{name}} {{key}}")
ax.set_yscale("log")
ax.set_xlabel("{x_label}")
ax.set_ylabel("MSE")
ax.set_title("{title}")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("{title}.png", dpi=150)
"#,
        x_label = sweep.x_label,
        title = sweep.name
    )
}

fn write_outputs(report: &PresetReport, root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    fs::write(root.join("preset.json"), serde_json::to_string_pretty(report)?)?;
    let mut notes = String::new();
    for n in &report.notes {
        notes.push_str(n);
        notes.push('\n');
    }
    fs::write(root.join("notes.txt"), notes)?;
    for sweep in &report.sweeps {
        let dir = root.join(&sweep.name);
        fs::create_dir_all(&dir)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("summary.csv"))?);
        write_summary_csv(sweep, &mut w)?;
        w.flush()?;
        let mut w = BufWriter::new(fs::File::create(dir.join("fits.csv"))?);
        write_fits_csv(sweep, &mut w)?;
        w.flush()?;
        fs::write(dir.join("plot.py"), plot_script(sweep))?;
    }
    Ok(())
}
