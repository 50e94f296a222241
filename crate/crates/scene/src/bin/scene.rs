//! Thin command-line front end over the library. Every command is a pure
//! function of its flags, input files, and seed; outputs are written
//! atomically. Exit codes: 0 success, 1 usage or config mistake, 2 runtime or
//! convergence failure. Errors print one machine-parsable line:
//! `error: <kind>: <detail>`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use scene::config::parse_config;
use scene::error::{Error, Result};
use scene::evaluation::{empirical_band, kfold_cindex, qq_series};
use scene::generator::{sample_times, survival_curve_on_grid};
use scene::io;
use scene::oracle::solve_self_consistent;
use scene::selfcheck::run_selfcheck;
use scene::simulation::{simulate, SimulationSpec, TruthOracle};
use scene::survival::km_estimate;
use scene::trainer::{train, variable_importance};

const USAGE: &str = "\
usage: scene <command> [flags]

commands:
  simulate   --model ph|po --n N --p P --tau T --seed S --out data.csv [--r R]
  train      --data data.csv --config run.cfg --out-model model.json --out-history history.csv [--jobs J]
  predict    --model model.json --x \"v1,v2,...\" --grid \"t1,t2,...\" --seed S --out curve.csv [--k K]
  km         --data data.csv --out km.csv
  importance --model model.json --out importance.json
  band       --curves-dir DIR --level L --out band.csv [--jobs J]
  qq         --model model.json --truth ph|po --x \"v1,v2,...\" --seed S --out qq.csv [--k K] [--q Q] [--r R]
  cv         --data data.csv --config run.cfg --folds K --out cv.json [--jobs J]
  selfcheck

environment:
  SCENE_LOG=debug|info|quiet   stderr verbosity (stdout carries data only)
";

#[derive(Clone, Copy, PartialEq, PartialOrd)]
enum LogLevel {
    Quiet = 0,
    Info = 1,
    Debug = 2,
}

fn log_level() -> LogLevel {
    match std::env::var("SCENE_LOG").as_deref() {
        Ok("debug") => LogLevel::Debug,
        Ok("quiet") => LogLevel::Quiet,
        _ => LogLevel::Info,
    }
}

fn info(msg: &str) {
    if log_level() >= LogLevel::Info {
        eprintln!("{}", msg);
    }
}

fn debug(msg: &str) {
    if log_level() >= LogLevel::Debug {
        eprintln!("{}", msg);
    }
}

struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String], allowed: &[&str]) -> Result<Flags> {
        let mut values = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let arg = &args[i];
            let Some(name) = arg.strip_prefix("--") else {
                return Err(Error::Usage(format!("unexpected argument `{}`", arg)));
            };
            if !allowed.contains(&name) {
                return Err(Error::Usage(format!("unknown flag `--{}`", name)));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::Usage(format!("flag `--{}` needs a value", name)))?;
            if values.insert(name.to_string(), value.clone()).is_some() {
                return Err(Error::Usage(format!("flag `--{}` given twice", name)));
            }
            i += 2;
        }
        Ok(Flags { values })
    }

    fn req(&self, name: &str) -> Result<&str> {
        self.values
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::Usage(format!("missing required flag `--{}`", name)))
    }

    fn opt(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(String::as_str)
    }

    fn req_parse<T: std::str::FromStr>(&self, name: &str) -> Result<T> {
        let raw = self.req(name)?;
        raw.parse()
            .map_err(|_| Error::Usage(format!("flag `--{}`: cannot parse `{}`", name, raw)))
    }

    fn opt_parse<T: std::str::FromStr>(&self, name: &str, default: T) -> Result<T> {
        match self.opt(name) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| Error::Usage(format!("flag `--{}`: cannot parse `{}`", name, raw))),
        }
    }

    fn opt_f64(&self, name: &str) -> Result<Option<f64>> {
        self.opt(name)
            .map(|raw| {
                raw.parse()
                    .map_err(|_| Error::Usage(format!("flag `--{}`: cannot parse `{}`", name, raw)))
            })
            .transpose()
    }
}

fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| Error::Usage(format!("cannot parse {} list `{}`", what, raw)))?;
    if vals.is_empty() {
        return Err(Error::Usage(format!("{} list is empty", what)));
    }
    Ok(vals)
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    std::process::exit(run(&args));
}

fn run(args: &[String]) -> i32 {
    let Some(command) = args.first() else {
        eprint!("{}", USAGE);
        return 1;
    };
    let rest = &args[1..];
    let outcome = match command.as_str() {
        "simulate" => cmd_simulate(rest),
        "train" => cmd_train(rest),
        "predict" => cmd_predict(rest),
        "km" => cmd_km(rest),
        "importance" => cmd_importance(rest),
        "band" => cmd_band(rest),
        "qq" => cmd_qq(rest),
        "cv" => cmd_cv(rest),
        "selfcheck" => cmd_selfcheck(rest),
        "help" | "--help" | "-h" => {
            print!("{}", USAGE);
            Ok(())
        }
        other => Err(Error::Usage(format!("unknown command `{}`", other))),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.kind(), e);
            e.exit_code()
        }
    }
}

fn sim_spec_from(
    model: &str,
    n: usize,
    p: usize,
    tau: f64,
    seed: u64,
    r: Option<f64>,
) -> Result<SimulationSpec> {
    let mut spec = match model {
        "ph" => SimulationSpec::ph(n, p, tau, seed),
        "po" => SimulationSpec::po(n, p, tau, seed),
        other => {
            return Err(Error::Usage(format!(
                "model must be `ph` or `po`, got `{}`",
                other
            )))
        }
    };
    if let Some(r) = r {
        spec.r = r;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["model", "n", "p", "tau", "seed", "out", "r"])?;
    let spec = sim_spec_from(
        flags.req("model")?,
        flags.req_parse("n")?,
        flags.req_parse("p")?,
        flags.req_parse("tau")?,
        flags.req_parse("seed")?,
        flags.opt_f64("r")?,
    )?;
    let out = PathBuf::from(flags.req("out")?);
    let data = simulate(&spec)?;
    io::write_dataset(&data, &out)?;
    let sidecar = io::SimulationSidecar::new(&spec, &data);
    let sidecar_path = sidecar_path(&out);
    io::write_sidecar(&sidecar, &sidecar_path)?;
    info(&format!(
        "wrote {} records to {} (censoring {:.2}%), sidecar {}",
        data.len(),
        out.display(),
        100.0 * data.censoring_rate(),
        sidecar_path.display()
    ));
    Ok(())
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut os = out.as_os_str().to_os_string();
    os.push(".meta.json");
    PathBuf::from(os)
}

fn cmd_train(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["data", "config", "out-model", "out-history", "jobs"])?;
    let data = io::read_dataset(Path::new(flags.req("data")?))?;
    let config_text = std::fs::read_to_string(flags.req("config")?)?;
    let mut cfg = parse_config(&config_text)?;
    cfg.jobs = flags.opt_parse("jobs", default_jobs())?;
    let out_model = PathBuf::from(flags.req("out-model")?);
    let out_history = PathBuf::from(flags.req("out-history")?);
    info(&format!(
        "training on {} records (p = {}) for {} epochs",
        data.len(),
        data.covariate_dim(),
        cfg.epochs
    ));
    let model = train(&data, &cfg)?;
    if let Some(last) = model.history.last() {
        debug(&format!("final loss {:.6e}", last.c_tilde));
    }
    io::write_model(&io::ModelFile::from_trained(&model), &out_model)?;
    io::write_history(&model.history, &out_history)?;
    info(&format!(
        "wrote model to {} and history to {}",
        out_model.display(),
        out_history.display()
    ));
    Ok(())
}

fn cmd_predict(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["model", "x", "grid", "seed", "out", "k"])?;
    let model = io::read_model(Path::new(flags.req("model")?))?;
    let x = parse_f64_list(flags.req("x")?, "covariate")?;
    let grid = parse_f64_list(flags.req("grid")?, "grid")?;
    let seed: u64 = flags.req_parse("seed")?;
    let k: usize = flags.opt_parse("k", 400)?;
    let curve = survival_curve_on_grid(&model.generator, &x, &grid, k, seed)?;
    io::write_curve(&curve, Path::new(flags.req("out")?))?;
    Ok(())
}

fn cmd_km(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["data", "out"])?;
    let data = io::read_dataset(Path::new(flags.req("data")?))?;
    let curve = km_estimate(&data)?;
    // quick cross-check against the fixed-point oracle on small inputs
    if data.len() <= 200 {
        let sol = solve_self_consistent(&data, 1e-10, 10_000)?;
        let worst = sol
            .grid
            .iter()
            .zip(&sol.values)
            .map(|(t, v)| (v - curve.eval(*t)).abs())
            .fold(0.0f64, f64::max);
        debug(&format!("fixed-point oracle sup gap {:.2e}", worst));
    }
    io::write_curve(&curve, Path::new(flags.req("out")?))?;
    Ok(())
}

fn cmd_importance(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["model", "out"])?;
    let model = io::read_model(Path::new(flags.req("model")?))?;
    let iv = variable_importance(&model.generator);
    let p_u = model.generator.p_u();
    let report = serde_json::json!({
        "p_u": p_u,
        "gamma": iv.gamma,
        "threshold": iv.threshold,
        "selected": (0..model.generator.covariate_dim())
            .filter(|j| iv.gamma[p_u + j] <= iv.threshold)
            .collect::<Vec<_>>(),
        "pruned_during_training": model.pruned_covariates,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    io::atomic_write(Path::new(flags.req("out")?), text.as_bytes())?;
    Ok(())
}

fn cmd_band(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["curves-dir", "level", "out", "jobs"])?;
    let dir = PathBuf::from(flags.req("curves-dir")?);
    let level: f64 = flags.opt_parse("level", 0.9)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .csv curves found in {}",
            dir.display()
        )));
    }
    debug(&format!("reading {} curves", paths.len()));
    let _jobs: usize = flags.opt_parse("jobs", default_jobs())?;
    let curves = paths
        .iter()
        .map(|p| io::read_curve(p))
        .collect::<Result<Vec<_>>>()?;
    let band = empirical_band(&curves, level)?;
    io::write_band(&band, Path::new(flags.req("out")?))?;
    Ok(())
}

fn cmd_qq(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["model", "truth", "x", "seed", "out", "k", "q", "r"])?;
    let model = io::read_model(Path::new(flags.req("model")?))?;
    let x = parse_f64_list(flags.req("x")?, "covariate")?;
    let seed: u64 = flags.req_parse("seed")?;
    let k: usize = flags.opt_parse("k", 400)?;
    let q: usize = flags.opt_parse("q", 100)?;
    let spec = sim_spec_from(flags.req("truth")?, 1, x.len().max(2), 1.0, 0, flags.opt_f64("r")?)?;
    let truth = TruthOracle::new(spec)?;
    let batch = sample_times(&model.generator, &x, k, seed)?;
    let qq = qq_series(&truth, &x, &batch, q)?;
    io::write_qq(&qq, Path::new(flags.req("out")?))?;
    Ok(())
}

fn cmd_cv(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["data", "config", "folds", "out", "jobs"])?;
    let data = io::read_dataset(Path::new(flags.req("data")?))?;
    let config_text = std::fs::read_to_string(flags.req("config")?)?;
    let cfg = parse_config(&config_text)?;
    let folds: usize = flags.req_parse("folds")?;
    let jobs = flags.opt_parse("jobs", default_jobs())?;
    info(&format!(
        "{}-fold cross-validation on {} records with {} parallel folds",
        folds,
        data.len(),
        jobs
    ));
    let report = kfold_cindex(&data, &cfg, folds, jobs)?;
    info(&format!("mean C {:.4} (sd {:.4})", report.mean, report.sd));
    io::write_cv(&report, Path::new(flags.req("out")?))?;
    Ok(())
}

fn cmd_selfcheck(args: &[String]) -> Result<()> {
    Flags::parse(args, &[])?;
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    if run_selfcheck(&mut lock) {
        Ok(())
    } else {
        Err(Error::ContractViolation("selfcheck found failures".into()))
    }
}
