//! Settings from flags and an optional TOML file.
//!
//! Every option can be given either way; flags win over the file. Unknown
//! keys are rejected, and so are keys that the chosen command does not use,
//! so a typo can never silently fall back to a default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use concreg_core::risk::{SignalFamily, SignalSpec};
use concreg_core::ConeSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::grid::{is_geometric, parse_int_grid, parse_real_grid};
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "concreg",
    version,
    about = "Concave least-squares regression experiments"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with any of the command's options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Exit with status 3 if a checked property fails.
    #[arg(long, global = true)]
    pub check: bool,
    /// More diagnostics on standard error (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Project a sequence onto a cone and report the KKT residual.
    Project(Settings),
    /// Localized Gaussian width curve and its fixed point.
    Width(Settings),
    /// Truncate a random concave sequence and fuzz the truncation claims.
    TruncateDemo(Settings),
    /// Packing and net counts of bounded concave sequences.
    Cover(Settings),
    /// Risk of the least-squares estimator across sample sizes.
    Risk(Settings),
    /// Regret under a misspecified (non-concave) truth.
    Regret(Settings),
    /// Decomposition, tail, maximal-inequality and Lipschitz audits.
    Audit(Settings),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Project(_) => "project",
            Command::Width(_) => "width",
            Command::TruncateDemo(_) => "truncate-demo",
            Command::Cover(_) => "cover",
            Command::Risk(_) => "risk",
            Command::Regret(_) => "regret",
            Command::Audit(_) => "audit",
        }
    }

    pub fn settings(&self) -> &Settings {
        match self {
            Command::Project(s)
            | Command::Width(s)
            | Command::TruncateDemo(s)
            | Command::Cover(s)
            | Command::Risk(s)
            | Command::Regret(s)
            | Command::Audit(s) => s,
        }
    }

    /// Keys this command reads.
    pub fn allowed_keys(&self) -> &'static [&'static str] {
        const SIGNAL: [&str; 6] = ["signal", "scale", "a", "b", "pieces", "values"];
        match self {
            Command::Project(_) => &[
                "input", "cone", "k", "m1", "m2", "bound", "tol", "format", "output", "seed",
            ],
            Command::Width(_) => &[
                "center", "scale", "a", "b", "pieces", "values", "n", "sigma", "reps", "tgrid", "cone", "k",
                "m1", "m2", "tol", "seed", "format", "output",
            ],
            Command::TruncateDemo(_) => &["n", "level", "sigma", "instances", "seed", "format", "output"],
            Command::Cover(_) => &[
                "ngrid",
                "bound",
                "epsgrid",
                "budget",
                "max_points",
                "three_block_cap",
                "seed",
                "format",
                "output",
            ],
            Command::Risk(_) | Command::Regret(_) => &[
                SIGNAL[0],
                SIGNAL[1],
                SIGNAL[2],
                SIGNAL[3],
                SIGNAL[4],
                SIGNAL[5],
                "ngrid",
                "sigma",
                "reps",
                "slope_min",
                "slope_max",
                "seed",
                "format",
                "output",
            ],
            Command::Audit(_) => &[
                "kind", SIGNAL[0], SIGNAL[1], SIGNAL[2], SIGNAL[3], SIGNAL[4], SIGNAL[5], "n", "ngrid",
                "sigma", "reps", "xgrid", "agrid", "t", "pairs", "tol", "seed", "format", "output",
            ],
        }
    }
}

/// A grid given as text (`64:4096:x2`, `1,2,4`) or, in TOML, as an array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridText {
    Text(String),
    List(Vec<f64>),
}

impl GridText {
    fn as_text(&self) -> String {
        match self {
            GridText::Text(s) => s.clone(),
            GridText::List(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        }
    }
}

impl std::str::FromStr for GridText {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(GridText::Text(s.to_string()))
    }
}

/// Union of every command option; see [`Command::allowed_keys`].
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[command(allow_negative_numbers = true)]
pub struct Settings {
    /// Master seed (required by every randomized command).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// csv (default) or json.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Input sequence: one number per line (`#` comments, optional header).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// concave, mode, three-block, ortho-affine, bounded, bounded-three-block.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cone: Option<String>,
    /// Mode index (1-based) for `--cone mode`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<usize>,
    /// Sup-norm bound B.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Solver tolerance on KKT residuals.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// zero, affine, quadratic, piecewise, convex or custom.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal: Option<String>,
    /// Width center; same names as --signal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    /// Intercept of the affine signal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Slope of the affine signal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pieces: Option<usize>,
    /// File with the values of a custom signal.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Sample sizes, e.g. 64:4096:x2.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ngrid: Option<GridText>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Radii, or `geometric` for the default grid.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tgrid: Option<GridText>,
    /// Radii as multiples of B·√n, e.g. 0.02:0.5:n6.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsgrid: Option<GridText>,
    /// Consecutive rejections that end a greedy packing.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
    /// Point cap for the three-block packing (0 skips it).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub three_block_cap: Option<usize>,
    /// Truncation level L (default 128·σ).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    /// Number of fuzzed truncation instances.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<usize>,
    /// decomposition, tail, maxima or lipschitz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xgrid: Option<GridText>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agrid: Option<GridText>,
    /// Ball radius for the Lipschitz audit.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,
    /// Lower end of the accepted fitted slope (with --check).
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_max: Option<f64>,
}

impl Settings {
    fn keys(&self) -> Vec<String> {
        match serde_json::to_value(self).expect("settings serialize") {
            Value::Object(m) => m.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

pub fn read_settings_file(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| {
        let msg = e.message().to_string();
        // toml reports unknown keys as "unknown field `x`, expected ..."
        let key = msg
            .split('`')
            .nth(1)
            .map(str::to_string)
            .unwrap_or_else(|| "config".into());
        CliError::invalid(&key, format!("{}: {msg}", path.display()))
    })
}

/// File settings overlaid by flag settings; then rejects keys the command
/// does not read.
pub fn merge(command: &Command, file: Option<Settings>) -> Result<Settings> {
    let flags = command.settings();
    let mut merged = match file {
        Some(f) => match serde_json::to_value(&f).expect("settings serialize") {
            Value::Object(m) => m,
            _ => Map::new(),
        },
        None => Map::new(),
    };
    if let Value::Object(m) = serde_json::to_value(flags).expect("settings serialize") {
        for (k, v) in m {
            merged.insert(k, v);
        }
    }
    let settings: Settings = serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("inconsistent settings: {e}")))?;
    let allowed = command.allowed_keys();
    if let Some(key) = settings
        .keys()
        .into_iter()
        .find(|k| !allowed.contains(&k.as_str()))
    {
        return Err(CliError::invalid(
            &key,
            format!(
                "not an option of `{}` (accepted: {})",
                command.name(),
                allowed.join(", ")
            ),
        ));
    }
    Ok(settings)
}

/// Records resolved values for the report header while reading them.
#[derive(Debug, Default)]
pub struct Resolved {
    pub entries: Vec<(String, String)>,
}

impl Resolved {
    pub fn record(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn real(&mut self, key: &str, value: Option<f64>, default: f64) -> f64 {
        let v = value.unwrap_or(default);
        self.record(key, format!("{v:?}"));
        v
    }

    pub fn count(&mut self, key: &str, value: Option<usize>, default: usize) -> usize {
        let v = value.unwrap_or(default);
        self.record(key, v);
        v
    }
}

pub fn require_seed(s: &Settings) -> Result<u64> {
    s.seed.ok_or_else(|| {
        CliError::invalid(
            "seed",
            "a seed is required; runs are never seeded from the environment",
        )
    })
}

pub fn format_of(s: &Settings) -> Result<Format> {
    match s.format.as_deref().unwrap_or("csv") {
        "csv" => Ok(Format::Csv),
        "json" => Ok(Format::Json),
        other => Err(CliError::invalid(
            "format",
            format!("expected csv or json, got `{other}`"),
        )),
    }
}

pub fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

pub fn nonnegative(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::invalid(
            key,
            format!("must be nonnegative and finite, got {v}"),
        ))
    }
}

pub fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(CliError::invalid(key, format!("must be at least {min}, got {v}")))
    }
}

pub fn real_grid(r: &mut Resolved, key: &str, value: &Option<GridText>, default: &str) -> Result<Vec<f64>> {
    let text = value
        .as_ref()
        .map(GridText::as_text)
        .unwrap_or_else(|| default.to_string());
    let grid = parse_real_grid(key, &text)?;
    r.record(key, &text);
    Ok(grid)
}

/// Integer grid of sample sizes; a non-geometric grid is accepted with a
/// warning.
pub fn n_grid(r: &mut Resolved, value: &Option<GridText>, default: &str, min: usize) -> Result<Vec<usize>> {
    let text = value
        .as_ref()
        .map(GridText::as_text)
        .unwrap_or_else(|| default.to_string());
    let grid = parse_int_grid("ngrid", &text)?;
    if let Some(n) = grid.iter().find(|n| **n < min) {
        return Err(CliError::invalid(
            "ngrid",
            format!("every n must be at least {min}, got {n}"),
        ));
    }
    let reals: Vec<f64> = grid.iter().map(|&n| n as f64).collect();
    if !is_geometric(&reals) {
        log::warn!("ngrid {text} is not geometric; rate fits weight it unevenly");
    }
    r.record("ngrid", &text);
    Ok(grid)
}

/// Reads a sequence: one number per line, `#` comments and blank lines
/// ignored, an unparseable first line treated as a header. Lines with
/// several comma-separated fields use the last field.
pub fn read_sequence(key: &str, path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    let mut first = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(v) => {
                return Err(CliError::invalid(
                    key,
                    format!("{}:{}: non-finite value {v}", path.display(), lineno + 1),
                ))
            }
            Err(_) if first => {}
            Err(_) => {
                return Err(CliError::invalid(
                    key,
                    format!("{}:{}: `{field}` is not a number", path.display(), lineno + 1),
                ))
            }
        }
        first = false;
    }
    if out.is_empty() {
        return Err(CliError::invalid(
            key,
            format!("{} contains no values", path.display()),
        ));
    }
    Ok(out)
}

/// Signal (or width center) named by `key`, of length `n`.
pub fn signal(
    r: &mut Resolved,
    s: &Settings,
    key: &str,
    name: Option<&str>,
    default: &str,
    n: usize,
) -> Result<SignalSpec> {
    let name = name.unwrap_or(default);
    r.record(key, name);
    let family = match name {
        "zero" => SignalFamily::Affine { a: 0.0, b: 0.0 },
        "affine" => SignalFamily::Affine {
            a: r.real("a", s.a, 0.0),
            b: r.real("b", s.b, 1.0),
        },
        "quadratic" => SignalFamily::QuadraticConcave {
            scale: r.real("scale", s.scale, 1.0),
        },
        "piecewise" => {
            let pieces = at_least("pieces", r.count("pieces", s.pieces, 4), 1)?;
            SignalFamily::PiecewiseLinearConcave { pieces }
        }
        "convex" => SignalFamily::MisspecifiedConvex {
            scale: r.real("scale", s.scale, 1.0),
        },
        "custom" => {
            let path = s
                .values
                .as_ref()
                .ok_or_else(|| CliError::invalid("values", "a custom signal needs a values file"))?;
            r.record("values", path.display());
            SignalFamily::Custom {
                values: read_sequence("values", path)?,
            }
        }
        other => {
            return Err(CliError::invalid(
                key,
                format!("unknown signal `{other}` (zero, affine, quadratic, piecewise, convex, custom)"),
            ))
        }
    };
    // Options that belong to other families are ignored; name them.
    let used: &[&str] = match name {
        "affine" => &["a", "b"],
        "quadratic" | "convex" => &["scale"],
        "piecewise" => &["pieces"],
        "custom" => &["values"],
        _ => &[],
    };
    for (k, set) in [
        ("a", s.a.is_some()),
        ("b", s.b.is_some()),
        ("scale", s.scale.is_some()),
        ("pieces", s.pieces.is_some()),
        ("values", s.values.is_some()),
    ] {
        if set && !used.contains(&k) {
            return Err(CliError::invalid(
                k,
                format!("does not apply to the `{name}` signal"),
            ));
        }
    }
    let spec = SignalSpec::new(family, n);
    if let SignalFamily::Custom { values } = &spec.family {
        if values.len() != n {
            return Err(CliError::invalid(
                "values",
                format!("{} values but n = {n}", values.len()),
            ));
        }
    }
    Ok(spec)
}

pub fn cone(r: &mut Resolved, s: &Settings) -> Result<ConeSpec> {
    let name = s.cone.as_deref().unwrap_or("concave");
    r.record("cone", name);
    let need = |key: &str, v: Option<usize>| {
        v.ok_or_else(|| CliError::invalid(key, format!("required by the `{name}` cone")))
    };
    let spec = match name {
        "concave" => ConeSpec::FullConcave,
        "ortho-affine" => ConeSpec::ConcaveOrthoAffine,
        "mode" => {
            let k = need("k", s.k)?;
            r.record("k", k);
            ConeSpec::ModeConstrained { k }
        }
        "three-block" => {
            let (m1, m2) = (need("m1", s.m1)?, need("m2", s.m2)?);
            r.record("m1", m1);
            r.record("m2", m2);
            ConeSpec::ThreeBlock { m1, m2 }
        }
        "bounded" => ConeSpec::BoundedConcave { bound: positive("bound", r.real("bound", s.bound, 1.0))? },
        "bounded-three-block" => {
            let (m1, m2) = (need("m1", s.m1)?, need("m2", s.m2)?);
            r.record("m1", m1);
            r.record("m2", m2);
            ConeSpec::BoundedThreeBlock { m1, m2, bound: positive("bound", r.real("bound", s.bound, 1.0))? }
        }
        other => {
            return Err(CliError::invalid(
                "cone",
                format!("unknown cone `{other}` (concave, mode, three-block, ortho-affine, bounded, bounded-three-block)"),
            ))
        }
    };
    let uses = |k: &str| match k {
        "k" => matches!(spec, ConeSpec::ModeConstrained { .. }),
        "m1" | "m2" => matches!(
            spec,
            ConeSpec::ThreeBlock { .. } | ConeSpec::BoundedThreeBlock { .. }
        ),
        "bound" => matches!(
            spec,
            ConeSpec::BoundedConcave { .. } | ConeSpec::BoundedThreeBlock { .. }
        ),
        _ => true,
    };
    for (k, set) in [
        ("k", s.k.is_some()),
        ("m1", s.m1.is_some()),
        ("m2", s.m2.is_some()),
        ("bound", s.bound.is_some()),
    ] {
        if set && !uses(k) {
            return Err(CliError::invalid(
                k,
                format!("does not apply to the `{name}` cone"),
            ));
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("concreg").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let cli = parse(&["risk", "--reps", "5", "--seed", "3"]);
        let file: Settings = toml::from_str("reps = 9\nsigma = 2\nngrid = [64, 128]").unwrap();
        let s = merge(&cli.command, Some(file)).unwrap();
        assert_eq!(s.reps, Some(5));
        assert_eq!(s.sigma, Some(2.0));
        assert_eq!(s.ngrid, Some(GridText::List(vec![64.0, 128.0])));
    }

    #[test]
    fn unknown_and_foreign_keys_are_named() {
        let err = toml::from_str::<Settings>("repz = 3").unwrap_err();
        assert!(err.message().contains("repz"));
        let cli = parse(&["risk", "--seed", "1", "--tgrid", "1,2"]);
        match merge(&cli.command, None) {
            Err(CliError::Invalid { key, .. }) => assert_eq!(key, "tgrid"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn seed_is_mandatory() {
        let cli = parse(&["risk"]);
        let s = merge(&cli.command, None).unwrap();
        assert!(matches!(require_seed(&s), Err(CliError::Invalid { ref key, .. }) if key == "seed"));
    }
}
