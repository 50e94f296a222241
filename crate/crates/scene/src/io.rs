//! File formats: the dataset CSV schema, curve and history CSVs, model JSON,
//! and evaluation outputs. All writers go through a temp-file rename so a
//! crash never leaves a half-written file, and floats are written in shortest
//! round-trip form so re-reading reproduces values exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{BandSummary, CvReport, QqSeries};
use crate::generator::GeneratorModel;
use crate::nn::Mlp;
use crate::simulation::{SimModel, SimulationSpec};
use crate::survival::{Dataset, Record, SurvivalCurve};
use crate::trainer::{HistoryRow, TrainedModel};

/// Writes bytes via a sibling temp file plus rename.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let mut tmp = std::ffi::OsString::from(".");
    tmp.push(file_name);
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp_path = match dir {
        Some(d) => d.join(&tmp),
        None => std::path::PathBuf::from(&tmp),
    };
    std::fs::write(&tmp_path, contents)?;
    std::fs::rename(&tmp_path, path)?;
    Ok(())
}

/// Dataset CSV: header `time,event,x1,...,xp`, one record per row.
pub fn write_dataset(data: &Dataset, path: &Path) -> Result<()> {
    let p = data.covariate_dim();
    let mut out = String::from("time,event");
    for j in 1..=p {
        let _ = write!(out, ",x{}", j);
    }
    out.push('\n');
    for r in data.records() {
        let _ = write!(out, "{},{}", r.time, u8::from(r.event));
        for v in &r.covariates {
            let _ = write!(out, ",{}", v);
        }
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Reads the dataset CSV schema, rejecting malformed rows with their line
/// number (the header is line 1).
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {}", path.display(), e))))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty file, expected a header".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "time" || cols[1] != "event" {
        return Err(Error::Schema(format!(
            "header must start with `time,event`, got `{}`",
            header
        )));
    }
    let p = cols.len() - 2;
    for (j, col) in cols[2..].iter().enumerate() {
        let expected = format!("x{}", j + 1);
        if *col != expected {
            return Err(Error::Schema(format!(
                "covariate column {} must be named `{}`, got `{}`",
                j + 3,
                expected,
                col
            )));
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let row = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != p + 2 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                row,
                p + 2,
                fields.len()
            )));
        }
        let time: f64 = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: unparsable time `{}`", row, fields[0])))?;
        if !(time > 0.0 && time.is_finite()) {
            return Err(Error::Parse(format!("row {}: time must be positive", row)));
        }
        let event = match fields[1] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse(format!(
                    "row {}: event must be 0 or 1, got `{}`",
                    row, other
                )))
            }
        };
        let covariates: Vec<f64> = fields[2..]
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Parse(format!("row {}: unparsable covariate x{} `{}`", row, j + 1, f))
                    })
            })
            .collect::<Result<_>>()?;
        records.push(Record {
            time,
            event,
            covariates,
        });
    }
    Dataset::new(records)
}

/// Curve CSV: header `t,s`.
pub fn write_curve(curve: &SurvivalCurve, path: &Path) -> Result<()> {
    let mut out = String::from("t,s\n");
    for (t, s) in curve.times().iter().zip(curve.probs()) {
        let _ = writeln!(out, "{},{}", t, s);
    }
    atomic_write(path, out.as_bytes())
}

pub fn read_curve(path: &Path) -> Result<SurvivalCurve> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("t,s") => {}
        other => {
            return Err(Error::Schema(format!(
                "curve header must be `t,s`, got `{}`",
                other.unwrap_or_default()
            )))
        }
    }
    let mut times = Vec::new();
    let mut probs = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let (t, s) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("row {}: expected `t,s`", idx + 2)))?;
        times.push(
            t.parse()
                .map_err(|_| Error::Parse(format!("row {}: unparsable time `{}`", idx + 2, t)))?,
        );
        probs.push(
            s.parse()
                .map_err(|_| Error::Parse(format!("row {}: unparsable value `{}`", idx + 2, s)))?,
        );
    }
    SurvivalCurve::new(times, probs)
}

/// Training history CSV: `iter,c_tilde,grad_norm_omega,grad_norm_zeta`.
pub fn write_history(history: &[HistoryRow], path: &Path) -> Result<()> {
    let mut out = String::from("iter,c_tilde,grad_norm_omega,grad_norm_zeta\n");
    for row in history {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            row.iter, row.c_tilde, row.grad_norm_omega, row.grad_norm_zeta
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Band CSV: `t,lower,mean,upper`.
pub fn write_band(band: &BandSummary, path: &Path) -> Result<()> {
    let mut out = String::from("t,lower,mean,upper\n");
    for j in 0..band.grid.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            band.grid[j], band.lower[j], band.mean[j], band.upper[j]
        );
    }
    atomic_write(path, out.as_bytes())
}

/// QQ CSV: `q,true_q,gen_q`.
pub fn write_qq(qq: &QqSeries, path: &Path) -> Result<()> {
    let mut out = String::from("q,true_q,gen_q\n");
    for i in 0..qq.levels.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            qq.levels[i], qq.true_quantiles[i], qq.generated_quantiles[i]
        );
    }
    atomic_write(path, out.as_bytes())
}

/// Cross-validation JSON: `{"folds":[...],"mean":...,"sd":...}`.
pub fn write_cv(report: &CvReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string(report)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

/// On-disk model document: the generator, the weight network, and any pruned
/// covariate indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub generator: GeneratorModel,
    pub phi: Mlp,
    pub pruned_covariates: Vec<usize>,
}

impl ModelFile {
    pub fn from_trained(model: &TrainedModel) -> Self {
        ModelFile {
            generator: model.generator.clone(),
            phi: model.phi.clone(),
            pruned_covariates: model.pruned_covariates.clone(),
        }
    }
}

pub fn write_model(model: &ModelFile, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string(model)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    let model: ModelFile = serde_json::from_str(&text)?;
    model.generator.validate()?;
    model.phi.validate()?;
    Ok(model)
}

/// Sidecar metadata written next to simulated datasets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSidecar {
    pub model: SimModel,
    #[serde(rename = "N")]
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    pub r: f64,
    pub seed: u64,
    pub realized_censoring_rate: f64,
}

impl SimulationSidecar {
    pub fn new(spec: &SimulationSpec, data: &Dataset) -> Self {
        SimulationSidecar {
            model: spec.model,
            n: spec.n,
            p: spec.p,
            tau: spec.tau,
            r: spec.r,
            seed: spec.seed,
            realized_censoring_rate: data.censoring_rate(),
        }
    }
}

pub fn write_sidecar(sidecar: &SimulationSidecar, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string(sidecar)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tempdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "scene-io-test-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn dataset_round_trip_is_value_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let records: Vec<Record> = (0..1000)
            .map(|_| Record {
                time: rng.gen_range(1e-6..1e3),
                event: rng.r#gen(),
                covariates: (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect(),
            })
            .collect();
        let data = Dataset::new(records).unwrap();
        let path = tempdir().join("roundtrip.csv");
        write_dataset(&data, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(data, back);
    }

    #[test]
    fn header_must_match_schema() {
        assert!(matches!(
            parse_dataset("time,evt,x1\n1,1,0.5\n"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_dataset("time,event,z1\n1,1,0.5\n"),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            parse_dataset("time,event,x2\n1,1,0.5\n"),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn bad_rows_are_named() {
        let err = parse_dataset("time,event,x1\n-1,1,0.5\n").unwrap_err();
        match err {
            Error::Parse(msg) => assert_eq!(msg, "row 2: time must be positive"),
            other => panic!("unexpected {:?}", other),
        }
        let err = parse_dataset("time,event,x1\n1,1,0.5\n2,maybe,0.1\n").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.starts_with("row 3:"), "{}", msg),
            other => panic!("unexpected {:?}", other),
        }
        let err = parse_dataset("time,event,x1\n1,1\n").unwrap_err();
        match err {
            Error::Parse(msg) => assert!(msg.contains("expected 3 fields"), "{}", msg),
            other => panic!("unexpected {:?}", other),
        }
        // non-finite covariates are data errors, not numbers
        assert!(parse_dataset("time,event,x1\n1,1,NaN\n").is_err());
    }

    #[test]
    fn curve_round_trip() {
        let curve = SurvivalCurve::new(vec![1.0, 2.5, 7.125], vec![0.9, 0.53, 0.1]).unwrap();
        let path = tempdir().join("curve.csv");
        write_curve(&curve, &path).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(curve, back);
    }

    #[test]
    fn history_csv_format() {
        let rows = vec![HistoryRow {
            iter: 1,
            c_tilde: 0.25,
            grad_norm_omega: 1.5,
            grad_norm_zeta: 0.75,
        }];
        let path = tempdir().join("history.csv");
        write_history(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "iter,c_tilde,grad_norm_omega,grad_norm_zeta\n1,0.25,1.5,0.75\n");
    }

    #[test]
    fn model_file_round_trip() {
        use crate::nn::{Activation, OutputActivation};
        let net = Mlp::init(&[7, 6, 1], Activation::Relu, OutputActivation::Exp, 3).unwrap();
        let phi = Mlp::init(&[2, 4, 1], Activation::Relu, OutputActivation::Sigmoid, 4).unwrap();
        let model = ModelFile {
            generator: GeneratorModel::new(net, 5).unwrap(),
            phi,
            pruned_covariates: vec![1],
        };
        let path = tempdir().join("model.json");
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&model).unwrap(),
            serde_json::to_string(&back).unwrap()
        );
    }

    #[test]
    fn sidecar_contains_settings_and_rate() {
        let spec = SimulationSpec::ph(100, 3, 5.0, 9);
        let data = crate::simulation::simulate(&spec).unwrap();
        let sidecar = SimulationSidecar::new(&spec, &data);
        let text = serde_json::to_string(&sidecar).unwrap();
        assert!(text.contains("\"model\":\"ph\""));
        assert!(text.contains("\"N\":100"));
        assert!(text.contains("realized_censoring_rate"));
    }
}
