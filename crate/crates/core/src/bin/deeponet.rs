use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use deeponet::dataset::{load_dataset, save_dataset, Problem};
use deeponet::deeponet::IndexedData;
use deeponet::experiments::{
    run_point, run_preset, sweep_fit, DataCache, DataSpec, FitKind, Overrides, PresetReport, RunSpec, TrainedModel,
};
use deeponet::spaces::InputSpace;
use deeponet::{Error, Result};

#[derive(Parser)]
#[command(name = "deeponet", version, about = "Learn operators with branch-trunk networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample input functions, solve the reference problem and write train/test containers.
    GenData(GenDataArgs),
    /// Train one model described by a TOML run config.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset container.
    Eval(EvalArgs),
    /// Run one of the convergence-study sweeps.
    Preset(PresetArgs),
    /// Fit exponential and power-law rates to (x, error) columns of a CSV.
    FitRates(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Antiderivative,
    NonlinearOde,
    Pendulum,
    DiffusionReaction,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceArg {
    Grf,
    Chebyshev,
}

#[derive(Args)]
struct GenDataArgs {
    /// TOML data config (the `[data]` table of a run config, or a bare one); replaces the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "antiderivative")]
    problem: ProblemArg,
    /// Pendulum k.
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    /// Pendulum horizon T.
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, value_enum, default_value = "grf")]
    space: SpaceArg,
    #[arg(long, default_value_t = 0.2)]
    length_scale: f64,
    /// Chebyshev basis count N.
    #[arg(long, default_value_t = 10)]
    degree: usize,
    /// Chebyshev coefficient bound M.
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value_t = 1000)]
    train_u: usize,
    #[arg(long, default_value_t = 1000)]
    test_u: usize,
    /// Locations per training function (P for the diffusion-reaction problem).
    #[arg(long, default_value_t = 1)]
    train_points: usize,
    #[arg(long, default_value_t = 1)]
    test_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write CSV exports next to the containers.
    #[arg(long)]
    csv: bool,
    #[arg(long, default_value = "data")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML run config.
    #[arg(long)]
    config: PathBuf,
    /// Replaces the data, init and minibatch seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent replicates with shifted seeds.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value = "runs/train")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Fraction of worst records dropped from the MSE.
    #[arg(long, default_value_t = 0.0)]
    trim: f64,
    /// Write per-record predictions here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PresetArgs {
    name: String,
    /// TOML overrides (iterations, lr, batch_size, eval_every, seed, m, train_u, test_u, train_points, test_points, values).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reduced sizes for a workstation; every substitution is noted in the report.
    #[arg(long)]
    desk: bool,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with a header row, e.g. a preset summary.csv.
    input: PathBuf,
    #[arg(long, default_value = "x")]
    x: String,
    #[arg(long, default_value = "test_mean")]
    y: String,
    /// Column grouping rows into separately fitted series.
    #[arg(long, default_value = "series")]
    group: String,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let spec = match &a.config {
        Some(path) => {
            let value: toml::Value = read_toml(path)?;
            let table = value.get("data").cloned().unwrap_or(value);
            table.try_into().map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => DataSpec {
            problem: match a.problem {
                ProblemArg::Antiderivative => Problem::Antiderivative,
                ProblemArg::NonlinearOde => Problem::NonlinearOde,
                ProblemArg::Pendulum => Problem::Pendulum { k: a.k, horizon: a.horizon },
                ProblemArg::DiffusionReaction => Problem::DiffusionReaction {
                    diffusion: 0.01,
                    reaction: 0.01,
                },
            },
            space: match a.space {
                SpaceArg::Grf => InputSpace::Grf {
                    length_scale: a.length_scale,
                },
                SpaceArg::Chebyshev => InputSpace::Chebyshev {
                    degree: a.degree,
                    bound: a.bound,
                },
            },
            m: a.m,
            train_u: a.train_u,
            test_u: a.test_u,
            train_points: a.train_points,
            test_points: a.test_points,
            seed: a.seed,
        },
    };
    fs::create_dir_all(&a.out)?;
    for (name, ds) in [("train", spec.build_train()?), ("test", spec.build_test()?)] {
        let path = a.out.join(format!("{name}.opds"));
        save_dataset(&ds, &path)?;
        println!("{}: {} records, {} dropped", path.display(), ds.len(), ds.dropped());
        if a.csv {
            let mut w = BufWriter::new(fs::File::create(a.out.join(format!("{name}.csv")))?);
            ds.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut spec = RunSpec::from_toml(&fs::read_to_string(&a.config)?)?;
    if let Some(seed) = a.seed {
        spec.data.seed = seed;
        spec.model_seed = seed;
        spec.train.seed = seed;
    }
    let cache = DataCache::new();
    for r in 0..a.runs {
        let run = spec.replicate(r as u64);
        let outcome = run_point(&run, &cache)?;
        let dir = if a.runs == 1 { a.out.clone() } else { a.out.join(format!("run{r}")) };
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&outcome.report)?)?;
        fs::write(dir.join("config.toml"), run.to_toml()?)?;
        let mut w = BufWriter::new(fs::File::create(dir.join("history.csv"))?);
        outcome.report.write_history_csv(&mut w)?;
        w.flush()?;
        outcome.model.save(dir.join("model.bin"))?;
        let rep = &outcome.report;
        println!(
            "run {r}: train {:.4e} test {:.4e} gap {:.3e} ({:.1}s) config {}",
            rep.final_train_mse, rep.final_test_mse, rep.gap, rep.runtime_secs, rep.config_hash
        );
        for (name, v) in &rep.extra_test_mse {
            println!("  {name}: {v:.4e}");
        }
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let ds = load_dataset(&a.data)?;
    let model = TrainedModel::load(&a.model, ds.dim_y())?;
    ds.check_shapes(model.m(), ds.dim_y())?;
    let data = IndexedData::from_dataset(&ds);
    let mse = model.evaluate(&data, a.trim)?;
    println!("records {} mse {:.6e}", ds.len(), mse);
    if let Some(out) = a.out {
        let preds = model.predict(&data)?;
        let mut w = BufWriter::new(fs::File::create(out)?);
        writeln!(w, "record,prediction,target")?;
        for (i, (p, t)) in preds.iter().zip(ds.targets()).enumerate() {
            writeln!(w, "{i},{p:e},{t:e}")?;
        }
        w.flush()?;
    }
    Ok(())
}

fn print_preset(report: &PresetReport) {
    for n in &report.notes {
        println!("note: {n}");
    }
    for sweep in &report.sweeps {
        println!("sweep {} ({})", sweep.name, sweep.x_label);
        for s in &sweep.series {
            for p in &s.points {
                println!(
                    "  {:<22} x={:<8} train {:.3e} ± {:.1e}  test {:.3e} ± {:.1e}{}",
                    s.name,
                    p.x,
                    p.train_mean,
                    p.train_std,
                    p.test_mean,
                    p.test_std,
                    if p.failures.is_empty() { String::new() } else { format!("  ({} failed)", p.failures.len()) }
                );
                for r in &p.reports {
                    for (name, v) in &r.extra_test_mse {
                        println!("    {name}: {v:.3e}");
                    }
                }
            }
            for (name, f) in &s.fits {
                println!(
                    "  {:<22} {name}: slope {:.4} (base {:.3}) R² {:.3} over {} points",
                    s.name,
                    f.slope,
                    f.growth_base(),
                    f.r2,
                    f.points
                );
            }
            if let Some(g) = &s.gap {
                if let Some(slope) = &g.slope {
                    println!("  {:<22} test-vs-train slope {:.3} (R² {:.3})", s.name, slope.slope, slope.r2);
                }
            }
        }
    }
}

fn preset(a: PresetArgs) -> Result<()> {
    let mut overrides = match &a.config {
        Some(path) => Overrides::from_toml(&fs::read_to_string(path)?)?,
        None => Overrides::default(),
    };
    if a.seed.is_some() {
        overrides.seed = a.seed;
    }
    let report = run_preset(&a.name, a.desk, &overrides, a.runs, Some(&a.out))?;
    print_preset(&report);
    println!("wrote {}", a.out.join(&a.name).display());
    Ok(())
}

fn fit_rates(a: FitArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&a.input).map_err(|e| Error::Config(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column {name:?} not found in {}", a.input.display())))
    };
    let (xi, yi) = (col(&a.x)?, col(&a.y)?);
    let gi = headers.iter().position(|h| h == a.group);
    let mut groups: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Config(e.to_string()))?;
        let parse = |i: usize| {
            row[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("{:?}: {e}", &row[i])))
        };
        let key = gi.map_or_else(String::new, |g| row[g].to_string());
        let (x, y) = (parse(xi)?, parse(yi)?);
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1.push(x);
                g.2.push(y);
            }
            None => groups.push((key, vec![x], vec![y])),
        }
    }
    println!("series,fit,slope,base,r2,points");
    for (key, xs, ys) in &groups {
        for (name, kind) in [("exponential", FitKind::Exponential), ("power_law", FitKind::PowerLaw)] {
            match sweep_fit(kind, xs, ys) {
                Some(f) => println!("{key},{name},{:.6},{:.6},{:.4},{}", f.slope, f.growth_base(), f.r2, f.points),
                None => println!("{key},{name},,,,insufficient points"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Preset(a) => preset(a),
        Command::FitRates(a) => fit_rates(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
