//! Flag/file merging and the small spec grammars the subcommands share.
//!
//! Every job setting can come from `--config file.toml` or from a flag, with
//! the flag winning. Parsing never touches the engine except to build the
//! final typed values, so a bad token fails fast with a message that names
//! it.

use std::path::{Path, PathBuf};

use l1pred::radial::CenterEstimator;
use l1pred::risk::{LossTransform, McSpec, QuadSpec};

use crate::CliError;

/// Keys accepted in a `--config` TOML file. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub p: Option<String>,
    pub q: Option<String>,
    pub gamma: Option<String>,
    pub c_grid: Option<String>,
    pub lambda_grid: Option<String>,
    pub m: Option<f64>,
    pub c: Option<f64>,
    pub estimator: Option<String>,
    pub dims: Option<String>,
    pub quad_nodes: Option<usize>,
    pub tail_mass: Option<f64>,
    pub mc_n: Option<usize>,
    pub mc_batch: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub data: Option<String>,
    pub data_file: Option<String>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config file {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| {
            CliError::Config(format!("config file {}: {e}", path.display()))
        })
    }
}

/// Fully merged settings for the CSV-producing subcommands, defaults applied.
/// Spec strings are kept verbatim so output headers echo exactly what ran.
#[derive(Debug)]
pub struct Job {
    pub p: Option<String>,
    pub q: Option<String>,
    pub gamma: String,
    pub c_grid: Option<String>,
    pub lambda_grid: Option<String>,
    pub m: f64,
    pub c: f64,
    pub estimator: String,
    pub dims: String,
    pub quad: QuadSpec,
    pub mc_n: usize,
    pub mc_batch: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Job {
    pub fn resolve(args: crate::JobArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Job {
            p: args.p.or(file.p),
            q: args.q.or(file.q),
            gamma: args.gamma.or(file.gamma).unwrap_or_else(|| "identity".into()),
            c_grid: args.c_grid.or(file.c_grid),
            lambda_grid: args.lambda_grid.or(file.lambda_grid),
            m: args.m.or(file.m).unwrap_or(1.0),
            c: args.c.or(file.c).unwrap_or(1.05),
            estimator: args
                .estimator
                .or(file.estimator)
                .unwrap_or_else(|| "mle-ball".into()),
            dims: args.dims.or(file.dims).unwrap_or_else(|| "1,2,3,4,5".into()),
            quad: QuadSpec {
                nodes: args.quad_nodes.or(file.quad_nodes).unwrap_or(256),
                tail_mass: args.tail_mass.or(file.tail_mass).unwrap_or(1e-10),
            },
            mc_n: args.mc_n.or(file.mc_n).unwrap_or(100_000),
            mc_batch: args.mc_batch.or(file.mc_batch).unwrap_or(2_000),
            seed: args.seed.or(file.seed).unwrap_or(17),
            out: args.out.or(file.out.map(PathBuf::from)),
        })
    }

    pub fn mc_spec(&self, seed: u64) -> McSpec {
        McSpec {
            n: self.mc_n,
            seed,
            batch: self.mc_batch,
        }
    }

    /// The p spec string, required by every curve command.
    pub fn require_p(&self) -> Result<&str, CliError> {
        self.p
            .as_deref()
            .ok_or_else(|| CliError::Config("missing --p (sampling model spec)".into()))
    }

    /// The q spec string; the plug-in family defaults to the sampling model.
    pub fn q_spec<'a>(&'a self, p_spec: &'a str) -> &'a str {
        self.q.as_deref().unwrap_or(p_spec)
    }

    pub fn gamma(&self) -> Result<LossTransform, CliError> {
        parse_gamma(&self.gamma)
    }

    pub fn estimator(&self) -> Result<CenterEstimator, CliError> {
        match self.estimator.as_str() {
            "raw" => Ok(CenterEstimator::RawX),
            "mle-ball" => CenterEstimator::mle_ball(self.m).map_err(CliError::Engine),
            other => Err(CliError::Config(format!(
                "unknown estimator '{other}' (expected raw or mle-ball)"
            ))),
        }
    }
}

/// An inclusive arithmetic grid parsed from `a:b:step`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: String,
    pub values: Vec<f64>,
}

pub fn parse_grid(what: &str, spec: &str) -> Result<Grid, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "{what} '{spec}' must have the form start:end:step"
        )));
    }
    let a = parse_num(&format!("{what} start"), parts[0])?;
    let b = parse_num(&format!("{what} end"), parts[1])?;
    let step = parse_num(&format!("{what} step"), parts[2])?;
    if !(step > 0.0) {
        return Err(CliError::Config(format!(
            "{what} step must be > 0, got {step}"
        )));
    }
    if b < a {
        return Err(CliError::Config(format!(
            "{what} '{spec}' is empty: start {a} exceeds end {b}"
        )));
    }
    // Tiny forward slack so an end that is a whole number of steps away
    // stays included despite accumulated rounding.
    let n = ((b - a) / step + 1e-9).floor() as usize;
    if n >= 1_000_000 {
        return Err(CliError::Config(format!(
            "{what} '{spec}' has {} points; the cap is 1000000",
            n + 1
        )));
    }
    let values = (0..=n).map(|k| a + k as f64 * step).collect();
    Ok(Grid {
        spec: spec.trim().to_string(),
        values,
    })
}

pub fn parse_gamma(spec: &str) -> Result<LossTransform, CliError> {
    let spec = spec.trim();
    if spec == "identity" {
        return Ok(LossTransform::identity());
    }
    if let Some(k) = spec.strip_prefix("power:") {
        let k = parse_num("power exponent", k)?;
        return LossTransform::power(k).map_err(CliError::Engine);
    }
    Err(CliError::Config(format!(
        "unknown loss transform '{spec}' (expected identity or power:k)"
    )))
}

pub fn parse_dims(spec: &str) -> Result<Vec<u32>, CliError> {
    let mut dims = Vec::new();
    for tok in spec.split(',') {
        let tok = tok.trim();
        let d: u32 = tok
            .parse()
            .map_err(|_| CliError::Config(format!("dimension '{tok}' is not a whole number")))?;
        if !(1..=100).contains(&d) {
            return Err(CliError::Config(format!(
                "dimension {d} is outside the supported range 1..=100"
            )));
        }
        dims.push(d);
    }
    if dims.is_empty() {
        return Err(CliError::Config("the dimension list is empty".into()));
    }
    Ok(dims)
}

pub fn parse_data_list(spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|tok| parse_num("observation", tok))
        .collect()
}

pub fn read_data_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read data file {}: {e}", path.display()))
    })?;
    let data: Result<Vec<f64>, CliError> = text
        .split_whitespace()
        .map(|tok| parse_num("observation", tok))
        .collect();
    let data = data?;
    if data.is_empty() {
        return Err(CliError::Config(format!(
            "data file {} holds no observations",
            path.display()
        )));
    }
    Ok(data)
}

fn parse_num(what: &str, tok: &str) -> Result<f64, CliError> {
    let tok = tok.trim();
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Config(format!("{what} '{tok}' is not a finite number"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_include_both_endpoints() {
        let g = parse_grid("scale grid", "1:1.4:0.005").unwrap();
        assert_eq!(g.values.len(), 81);
        assert_eq!(g.values[0], 1.0);
        assert!((g.values[80] - 1.4).abs() < 1e-12);
        for w in g.values.windows(2) {
            assert!(w[1] > w[0]);
        }

        // A span that is not a whole number of steps stops short of the end.
        let g = parse_grid("scale grid", "1:1.4:0.03").unwrap();
        assert_eq!(g.values.len(), 14);
        assert!(g.values[13] <= 1.4);

        // Degenerate span: a single point.
        let g = parse_grid("scale grid", "2:2:0.1").unwrap();
        assert_eq!(g.values, vec![2.0]);
    }

    #[test]
    fn bad_grids_name_the_offending_part() {
        let err = parse_grid("scale grid", "1:2").unwrap_err().to_string();
        assert!(err.contains("start:end:step"), "{err}");
        let err = parse_grid("scale grid", "2:1:0.5").unwrap_err().to_string();
        assert!(err.contains("empty"), "{err}");
        let err = parse_grid("scale grid", "1:2:0").unwrap_err().to_string();
        assert!(err.contains("step"), "{err}");
        let err = parse_grid("scale grid", "1:x:0.5").unwrap_err().to_string();
        assert!(err.contains("'x'"), "{err}");
    }

    #[test]
    fn gamma_grammar_covers_identity_and_power() {
        assert_eq!(parse_gamma("identity").unwrap().describe(), "identity");
        assert_eq!(parse_gamma("power:2").unwrap().describe(), "power:2");
        let err = parse_gamma("cube").unwrap_err().to_string();
        assert!(err.contains("'cube'"), "{err}");
        // A non-positive exponent is rejected by the engine, not the parser.
        assert!(parse_gamma("power:0").is_err());
    }

    #[test]
    fn dims_and_data_lists_parse() {
        assert_eq!(parse_dims("1, 3,5").unwrap(), vec![1, 3, 5]);
        assert!(parse_dims("0").is_err());
        assert!(parse_dims("two").is_err());
        assert_eq!(parse_data_list("0.3,-1,2e-1").unwrap(), vec![0.3, -1.0, 0.2]);
        assert!(parse_data_list("0.3,nan").is_err());
    }
}
