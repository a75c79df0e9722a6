use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::derive_p;
use crate::replicate::default_workers;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Scenario {
    PropStop,
    Abelian,
    ThmIff,
    Thm12,
    Thm12Thresholds,
    ThmGumbel,
    ThmDensity,
    LemMaxtail,
    Cluster,
    CondMoments,
    Stationarity,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::PropStop,
        Scenario::Abelian,
        Scenario::ThmIff,
        Scenario::Thm12,
        Scenario::Thm12Thresholds,
        Scenario::ThmGumbel,
        Scenario::ThmDensity,
        Scenario::LemMaxtail,
        Scenario::Cluster,
        Scenario::CondMoments,
        Scenario::Stationarity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PropStop => "prop-stop",
            Scenario::Abelian => "abelian",
            Scenario::ThmIff => "thm-iff",
            Scenario::Thm12 => "thm-12",
            Scenario::Thm12Thresholds => "thm-12-thresholds",
            Scenario::ThmGumbel => "thm-gumbel",
            Scenario::ThmDensity => "thm-density",
            Scenario::LemMaxtail => "lem-maxtail",
            Scenario::Cluster => "cluster",
            Scenario::CondMoments => "cond-moments",
            Scenario::Stationarity => "stationarity",
        }
    }

    /// Keys accepted besides the common ones.
    fn extra_keys(self) -> &'static [&'static str] {
        match self {
            Scenario::PropStop | Scenario::Abelian => &["q", "q-mode", "step-cap"],
            Scenario::ThmIff | Scenario::Thm12 | Scenario::Thm12Thresholds | Scenario::ThmGumbel => {
                &["q", "q-mode"]
            }
            Scenario::ThmDensity => &["mu", "step-cap"],
            Scenario::LemMaxtail | Scenario::Stationarity => &["q", "q-mode", "horizon", "x-level"],
            Scenario::Cluster => &["x-level"],
            Scenario::CondMoments => &["horizon", "x-level"],
        }
    }

    fn uses_q(self) -> bool {
        self.extra_keys().contains(&"q")
    }

    /// Scenarios whose chain needs a sink to stop.
    pub(crate) fn needs_dissipation(self) -> bool {
        matches!(
            self,
            Scenario::PropStop
                | Scenario::Abelian
                | Scenario::ThmIff
                | Scenario::Thm12
                | Scenario::Thm12Thresholds
                | Scenario::ThmGumbel
        )
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
                format!("unknown scenario {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// How the sink probability depends on `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum QMode {
    Const(f64),
    /// `q = 1/(n+1)`.
    RecipNPlus1,
    /// `q = n^{−a}`.
    Power(f64),
    /// `q = e^{−cn}`.
    Exp(f64),
}

impl QMode {
    pub fn q(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            QMode::Const(v) => v,
            QMode::RecipNPlus1 => 1.0 / (nf + 1.0),
            QMode::Power(a) => nf.powf(-a),
            QMode::Exp(c) => (-c * nf).exp(),
        }
    }

    /// `log r_n = −log q`.
    pub fn log_r(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            QMode::Const(v) => -v.ln(),
            QMode::RecipNPlus1 => (nf + 1.0).ln(),
            QMode::Power(a) => a * nf.ln(),
            QMode::Exp(c) => c * nf,
        }
    }
}

impl fmt::Display for QMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QMode::Const(v) => write!(f, "const:{v}"),
            QMode::RecipNPlus1 => f.write_str("recip-n-plus-1"),
            QMode::Power(a) => write!(f, "power:{a}"),
            QMode::Exp(c) => write!(f, "exp:{c}"),
        }
    }
}

impl FromStr for QMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "recip-n-plus-1" {
            return Ok(QMode::RecipNPlus1);
        }
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("expected const:v, recip-n-plus-1, power:a or exp:c, got {s:?}"))?;
        let v = parse_real(arg)?;
        match kind {
            "const" if (0.0..=1.0).contains(&v) => Ok(QMode::Const(v)),
            "const" => Err(format!("q must lie in [0, 1], got {v}")),
            "power" if v > 0.0 => Ok(QMode::Power(v)),
            "exp" if v > 0.0 => Ok(QMode::Exp(v)),
            "power" | "exp" => Err(format!("{kind} exponent must be positive, got {v}")),
            _ => Err(format!("unknown q-mode {kind:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(format!("expected csv or jsonl, got {s:?}")),
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: f64,
    pub q_mode: Option<QMode>,
    /// Particle density, fixed-energy only.
    pub mu: Option<f64>,
    pub reps: usize,
    pub seed: u64,
    pub horizon: Option<f64>,
    pub x_level: Option<f64>,
    pub step_cap: Option<u64>,
    pub parallel: usize,
    pub out: PathBuf,
    pub format: Format,
}

impl ScenarioConfig {
    /// Sink probability for this run; 0 when the scenario has none.
    pub fn q(&self) -> f64 {
        self.q_mode.map_or(0.0, |m| m.q(self.n))
    }

    /// Canonical description of everything that affects results.
    pub(crate) fn fingerprint(&self) -> String {
        format!(
            "{}|n={}|p={:e}|q={}|mu={:?}|reps={}|seed={}|h={:?}|x={:?}|cap={:?}",
            self.scenario,
            self.n,
            self.p,
            self.q_mode.map(|m| m.to_string()).unwrap_or_default(),
            self.mu,
            self.reps,
            self.seed,
            self.horizon,
            self.x_level,
            self.step_cap
        )
    }
}

/// Command-line flags. Every value is optional here; defaults and
/// validation depend on the scenario.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "arwlab", version, about = "Activated random walk scenario runner")]
pub struct Cli {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub lambda: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long = "q-mode")]
    pub q_mode: Option<String>,
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub reps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    #[arg(long = "x-level")]
    pub x_level: Option<String>,
    #[arg(long = "step-cap")]
    pub step_cap: Option<String>,
    /// Worker threads.
    #[arg(long)]
    pub parallel: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub format: Option<String>,
}

const KEYS: [&str; 15] = [
    "scenario", "n", "lambda", "p", "q", "q-mode", "mu", "reps", "seed", "horizon", "x-level",
    "step-cap", "parallel", "out", "format",
];

const COMMON_KEYS: [&str; 9] = ["scenario", "n", "lambda", "p", "reps", "seed", "parallel", "out", "format"];

impl Cli {
    fn entries(self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("scenario", self.scenario),
            ("n", self.n),
            ("lambda", self.lambda),
            ("p", self.p),
            ("q", self.q),
            ("q-mode", self.q_mode),
            ("mu", self.mu),
            ("reps", self.reps),
            ("seed", self.seed),
            ("horizon", self.horizon),
            ("x-level", self.x_level),
            ("step-cap", self.step_cap),
            ("parallel", self.parallel),
            ("out", self.out),
            ("format", self.format),
        ]
    }
}

/// Parses `argv` (program name first) into a validated config.
pub fn parse_config<I, T>(argv: I) -> Result<ScenarioConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::usage("argv", e.render().to_string()))?;
    from_cli(cli)
}

pub(crate) fn from_cli(mut cli: Cli) -> Result<ScenarioConfig> {
    let mut raw = match cli.config.take() {
        Some(path) => read_config_file(&path)?,
        None => BTreeMap::new(),
    };
    for (key, value) in cli.entries() {
        if let Some(v) = value {
            raw.insert(key.to_string(), v);
        }
    }
    build(&raw)
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::usage("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

/// Parses `key = value` lines; `#` starts a comment.
pub(crate) fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::usage("config", format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::usage(key, "unknown key"));
        }
        let value = v.trim();
        if value.is_empty() {
            return Err(Error::usage(key, "empty value"));
        }
        if map.insert(key.clone(), value.to_string()).is_some() {
            return Err(Error::usage(key, "given twice"));
        }
    }
    Ok(map)
}

/// A real number, or a ratio `a/b`.
fn parse_real(s: &str) -> std::result::Result<f64, String> {
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("not a number: {s:?}"))?;
            a / b
        }
        None => s.trim().parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: {s:?}"))
    }
}

/// A nonnegative integer, also written in floating notation such as `1e6`.
fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let v = parse_real(s)?;
    if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 {
        Ok(v as u64)
    } else {
        Err(format!("not a nonnegative integer: {s:?}"))
    }
}

fn get<T>(
    raw: &BTreeMap<String, String>,
    key: &str,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<Option<T>> {
    raw.get(key)
        .map(|v| parse(v).map_err(|msg| Error::usage(key, msg)))
        .transpose()
}

fn build(raw: &BTreeMap<String, String>) -> Result<ScenarioConfig> {
    let scenario = get(raw, "scenario", Scenario::from_str)?
        .ok_or_else(|| Error::usage("scenario", "missing"))?;
    for key in raw.keys() {
        if !COMMON_KEYS.contains(&key.as_str()) && !scenario.extra_keys().contains(&key.as_str()) {
            return Err(Error::usage(key.clone(), format!("not used by scenario {scenario}")));
        }
    }

    let p = match (get(raw, "lambda", parse_real)?, get(raw, "p", parse_real)?) {
        (Some(_), Some(_)) => return Err(Error::usage("p", "give either lambda or p, not both")),
        (Some(l), None) => derive_p(l).map_err(|e| Error::usage("lambda", e.to_string()))?,
        (None, Some(p)) if p > 0.0 && p < 1.0 => p,
        (None, Some(p)) => return Err(Error::usage("p", format!("must lie in (0, 1), got {p}"))),
        (None, None) => 0.5,
    };

    let q_explicit = match (get(raw, "q", parse_real)?, get(raw, "q-mode", QMode::from_str)?) {
        (Some(_), Some(_)) => return Err(Error::usage("q", "give either q or q-mode, not both")),
        (Some(q), None) if (0.0..=1.0).contains(&q) => Some(QMode::Const(q)),
        (Some(q), None) => return Err(Error::usage("q", format!("must lie in [0, 1], got {q}"))),
        (None, m) => m,
    };
    let q_mode = if scenario.uses_q() {
        Some(q_explicit.unwrap_or(match scenario {
            Scenario::PropStop => QMode::Const(1.0 / 3.0),
            Scenario::Abelian => QMode::Const(0.25),
            Scenario::ThmIff => QMode::Power(0.5),
            Scenario::Thm12 | Scenario::Thm12Thresholds => QMode::RecipNPlus1,
            Scenario::ThmGumbel => QMode::Power(1.25),
            _ => QMode::Const(0.0),
        }))
    } else {
        None
    };

    let n_default = match scenario {
        Scenario::PropStop => 3,
        Scenario::Abelian => 8,
        Scenario::ThmIff if matches!(q_mode, Some(QMode::Exp(_))) => 60,
        Scenario::ThmGumbel => 2000,
        _ => 10_000,
    };
    let n = get(raw, "n", parse_count)?.unwrap_or(n_default);
    if n == 0 || n > u32::MAX as u64 {
        return Err(Error::usage("n", format!("must lie in [1, 2^32), got {n}")));
    }
    let n = n as usize;

    let reps_default = match scenario {
        Scenario::PropStop => 200_000,
        Scenario::Abelian | Scenario::Thm12Thresholds => 100,
        Scenario::ThmIff | Scenario::Thm12 => 200,
        Scenario::ThmGumbel => 2000,
        Scenario::ThmDensity => 50,
        Scenario::LemMaxtail => 20_000,
        Scenario::Cluster | Scenario::Stationarity => 10_000,
        Scenario::CondMoments => 100_000,
    };
    let reps = get(raw, "reps", parse_count)?.unwrap_or(reps_default) as usize;
    if reps == 0 {
        return Err(Error::usage("reps", "must be positive"));
    }

    let mu = match scenario {
        Scenario::ThmDensity => {
            let mu = get(raw, "mu", parse_real)?.unwrap_or(p);
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(Error::usage("mu", format!("must lie in (0, 1], got {mu}")));
            }
            Some(mu)
        }
        _ => None,
    };

    let horizon = match scenario {
        Scenario::LemMaxtail => Some(40.0),
        Scenario::CondMoments => Some(1.0),
        Scenario::Stationarity => Some(20.0),
        _ => None,
    }
    .map(|d| get(raw, "horizon", parse_real).map(|h| h.unwrap_or(d)))
    .transpose()?;
    if let Some(h) = horizon {
        if !(h > 0.0) {
            return Err(Error::usage("horizon", format!("must be positive, got {h}")));
        }
    }

    let x_level = match scenario {
        Scenario::LemMaxtail | Scenario::Cluster | Scenario::CondMoments => Some(4.0),
        Scenario::Stationarity => Some(2.0),
        _ => None,
    }
    .map(|d| get(raw, "x-level", parse_real).map(|x| x.unwrap_or(d)))
    .transpose()?;

    let step_cap = get(raw, "step-cap", parse_count)?;
    if step_cap == Some(0) {
        return Err(Error::usage("step-cap", "must be positive"));
    }

    let seed = get(raw, "seed", parse_count)?.unwrap_or(1);
    let parallel = get(raw, "parallel", parse_count)?
        .map(|w| w as usize)
        .unwrap_or_else(default_workers);
    if parallel == 0 {
        return Err(Error::usage("parallel", "must be at least 1"));
    }
    let out = raw
        .get("out")
        .map(PathBuf::from)
        .ok_or_else(|| Error::usage("out", "missing"))?;
    let format = match get(raw, "format", Format::from_str)? {
        Some(f) => f,
        None if out.extension().is_some_and(|e| e == "jsonl") => Format::Jsonl,
        None => Format::Csv,
    };

    let config = ScenarioConfig {
        scenario,
        n,
        p,
        q_mode,
        mu,
        reps,
        seed,
        horizon,
        x_level,
        step_cap,
        parallel,
        out,
        format,
    };
    check_regime(&config)?;
    Ok(config)
}

/// Rejects parameters outside the hypotheses a scenario is meant to test.
fn check_regime(c: &ScenarioConfig) -> Result<()> {
    let q = c.q();
    if c.scenario.needs_dissipation() && !(q > 0.0) {
        return Err(Error::usage("q", format!("scenario {} needs q > 0", c.scenario)));
    }
    if matches!(c.scenario, Scenario::LemMaxtail | Scenario::Stationarity) && q >= 1.0 {
        return Err(Error::usage("q", "continuous time needs q < 1"));
    }
    match c.scenario {
        Scenario::PropStop if c.n > crate::oracle::MAX_EXACT_N => Err(Error::usage(
            "n",
            format!("the exact law is available only for n ≤ {}", crate::oracle::MAX_EXACT_N),
        )),
        Scenario::ThmGumbel => {
            let mode = c.q_mode.expect("q-mode is set for thm-gumbel");
            let nf = c.n as f64;
            let log_r = mode.log_r(c.n);
            // n^{1/2+ε} ≪ r_n with room to spare, and log r_n = o(n^{1/3})
            if log_r < 0.55 * nf.ln() {
                Err(Error::usage(
                    "q-mode",
                    format!("{mode} gives r_n = n^{:.3}; the Gumbel regime needs r_n ≥ n^0.55", log_r / nf.ln()),
                ))
            } else if log_r > nf.cbrt() {
                Err(Error::usage(
                    "q-mode",
                    format!("{mode} gives log r_n = {log_r:.3} above n^(1/3) = {:.3}", nf.cbrt()),
                ))
            } else {
                Ok(())
            }
        }
        Scenario::ThmDensity => {
            let m = (c.mu.unwrap() * c.n as f64).ceil() as usize;
            if m == 0 || m > c.n {
                Err(Error::usage("mu", format!("m = ⌈μn⌉ = {m} must lie in [1, n]")))
            } else {
                Ok(())
            }
        }
        Scenario::CondMoments | Scenario::Cluster => {
            let x = c.x_level.unwrap();
            crate::bup::x_prime(x, c.n, c.p)
                .map(|_| ())
                .map_err(|e| Error::usage("x-level", e.to_string()))
        }
        _ => Ok(()),
    }
}
