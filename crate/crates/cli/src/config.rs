use clap::{Args, Parser, Subcommand, ValueEnum};
use halledge::strip::{blob_hash, StripConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

/// Cap on the number of points a single range may expand to.
pub const MAX_POINTS: usize = 100_000;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(halledge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Numerical(err) => write!(f, "numerical failure: {err}"),
        }
    }
}

impl From<halledge::Error> for CliError {
    fn from(err: halledge::Error) -> Self {
        CliError::Numerical(err)
    }
}

pub fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Module errors raised while checking preconditions are configuration errors.
pub fn precondition(err: halledge::Error) -> CliError {
    CliError::Config(err.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "halledge", version, about = "Edge states of the magnetic Laplacian along a bent boundary")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// JSON run configuration; flags on the command line override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for tables, records and plots
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Table format [default: csv]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Also write SVG line charts into the output directory
    #[arg(long, global = true)]
    pub plot: bool,
    /// Accepted and ignored: every pipeline is deterministic
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandName {
    Dispersion,
    Perturb,
    Phase,
    Classical,
    Simulate,
    Sweep,
    Selfcheck,
}

impl fmt::Display for CommandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = serde_json::to_value(self).expect("command name serialises");
        write!(f, "{}", name.as_str().expect("command name is a string"))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Band energies and group velocities: CSV `n,k,E,E_prime`
    Dispersion(BandParams),
    /// Perturbative coefficients: CSV `n,k,E,E_prime,E1,E2,gammaB,gammaRW`
    Perturb(BandParams),
    /// Scattering phases of a bend: CSV `n,k,phi0,phi1`
    Phase(PhaseParams),
    /// Semiclassical against quantum phases: CSV `n,eta,k_n,E_n,...`
    Classical(ClassicalParams),
    /// Carry one packet across a bend and extract its phase
    Simulate(SimulateParams),
    /// Simulations over several beta, one worker per run
    Sweep(SweepParams),
    /// Run the acceptance criteria and print pass/fail for each
    Selfcheck(SelfcheckParams),
}

impl Command {
    fn name(&self) -> CommandName {
        match self {
            Command::Dispersion(_) => CommandName::Dispersion,
            Command::Perturb(_) => CommandName::Perturb,
            Command::Phase(_) => CommandName::Phase,
            Command::Classical(_) => CommandName::Classical,
            Command::Simulate(_) => CommandName::Simulate,
            Command::Sweep(_) => CommandName::Sweep,
            Command::Selfcheck(_) => CommandName::Selfcheck,
        }
    }

    fn flag_values(&self) -> Map<String, Value> {
        let value = match self {
            Command::Dispersion(p) => serde_json::to_value(p),
            Command::Perturb(p) => serde_json::to_value(p),
            Command::Phase(p) => serde_json::to_value(p),
            Command::Classical(p) => serde_json::to_value(p),
            Command::Simulate(p) => serde_json::to_value(p),
            Command::Sweep(p) => serde_json::to_value(p),
            Command::Selfcheck(p) => serde_json::to_value(p),
        };
        match value.expect("parameters serialise") {
            Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            _ => unreachable!("parameter structs serialise to objects"),
        }
    }
}

/// Numbers on the command line: `3`, `0,2,5`, or an inclusive range `-4..2`
/// walked with the matching step parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    text: String,
    kind: ValuesKind,
}

#[derive(Debug, Clone, PartialEq)]
enum ValuesKind {
    List(Vec<f64>),
    Range(f64, f64),
}

fn parse_number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

impl FromStr for Values {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let kind = if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi) = (parse_number(lo)?, parse_number(hi)?);
            if hi < lo {
                return Err(format!("range `{s}` runs backwards"));
            }
            ValuesKind::Range(lo, hi)
        } else {
            ValuesKind::List(s.split(',').map(parse_number).collect::<Result<_, _>>()?)
        };
        Ok(Self { text: s.to_string(), kind })
    }
}

impl Serialize for Values {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for Values {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Self {
                text: v.to_string(),
                kind: ValuesKind::List(vec![v]),
            }),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Values {
    /// The points, a range walked from its lower end in steps of `step`.
    pub fn expand(&self, name: &str, step: Option<f64>, step_name: &str) -> Result<Vec<f64>, CliError> {
        match self.kind {
            ValuesKind::List(ref v) => Ok(v.clone()),
            ValuesKind::Range(lo, hi) => {
                let step = step.ok_or_else(|| config_error(format!("range {name} = {} needs {step_name}", self.text)))?;
                if !(step.is_finite() && step > 0.0) {
                    return Err(config_error(format!("{step_name} = {step} must be positive")));
                }
                let count = ((hi - lo) / step + 1e-9).floor() + 1.0;
                if count > MAX_POINTS as f64 {
                    return Err(config_error(format!("{name} = {} with step {step} exceeds {MAX_POINTS} points", self.text)));
                }
                Ok((0..count as usize).map(|i| lo + i as f64 * step).collect())
            }
        }
    }

    /// Band indices, ranges taken in unit steps.
    pub fn indices(&self, name: &str) -> Result<Vec<usize>, CliError> {
        self.expand(name, Some(1.0), "")?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 && v <= 1e4 {
                    Ok(v as usize)
                } else {
                    Err(config_error(format!("{name} = {v} is not a band index")))
                }
            })
            .collect()
    }
}

/// Fetches a parameter that has no default.
pub fn required<T: Clone>(value: &Option<T>, name: &str) -> Result<T, CliError> {
    value.clone().ok_or_else(|| config_error(format!("parameter `{name}` is required")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Bump,
    TwoBump,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandParams {
    /// Bands: `2`, `0,2` or `0..3`
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<Values>,
    /// Momenta: `0.5`, `-1,0,1` or `-4..2`
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<Values>,
    /// Momentum step for a range
    #[arg(long)]
    pub dk: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseParams {
    /// Bands: `2`, `0,2` or `0..3`
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<Values>,
    /// Momenta: `0.5`, `-1,0,1` or `-4..2`
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<Values>,
    /// Momentum step for a range
    #[arg(long)]
    pub dk: Option<f64>,
    /// Total bending angle
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Half-length of the curved stretch [default: 1]
    #[arg(long)]
    pub half_support: Option<f64>,
    /// Curvature shape [default: bump]
    #[arg(long, value_enum)]
    pub profile: Option<Shape>,
    /// Angle turned by the first bump of a two-bump profile
    #[arg(long, allow_hyphen_values = true)]
    pub first_theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalParams {
    /// Bands: `10`, `5,10,20` or `5..8`
    #[arg(long, allow_hyphen_values = true)]
    pub n: Option<Values>,
    /// Incidence angles in (0, pi): `1.0` or `0.5..2.5`
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<Values>,
    /// Angle step for a range
    #[arg(long)]
    pub deta: Option<f64>,
    /// Total bending angle
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    /// Inverse length scale of the bend
    #[arg(long)]
    pub beta: Option<f64>,
    /// Band of the packet
    #[arg(long)]
    pub n: Option<usize>,
    /// Central momentum of the packet
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Momentum width of the packet [default: 0.075]
    #[arg(long)]
    pub k_width: Option<f64>,
    /// Total bending angle
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Half-length of the curved stretch [default: 1]
    #[arg(long)]
    pub half_support: Option<f64>,
    /// Curvature shape [default: bump]
    #[arg(long, value_enum)]
    pub profile: Option<Shape>,
    /// Angle turned by the first bump of a two-bump profile
    #[arg(long, allow_hyphen_values = true)]
    pub first_theta: Option<f64>,
    /// Complete strip configuration in place of the parameters above
    /// (config file only)
    #[arg(skip)]
    pub strip: Option<StripConfig>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    /// Values of beta: `6,8,12,16`, or `4..16` with --dbeta
    #[arg(long)]
    pub beta: Option<Values>,
    /// Step for a beta range
    #[arg(long)]
    pub dbeta: Option<f64>,
    /// Concurrent runs [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Band of the packet
    #[arg(long)]
    pub n: Option<usize>,
    /// Central momentum of the packet
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<f64>,
    /// Momentum width of the packet [default: 0.075]
    #[arg(long)]
    pub k_width: Option<f64>,
    /// Total bending angle
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Half-length of the curved stretch [default: 1]
    #[arg(long)]
    pub half_support: Option<f64>,
    /// Curvature shape [default: bump]
    #[arg(long, value_enum)]
    pub profile: Option<Shape>,
    /// Angle turned by the first bump of a two-bump profile
    #[arg(long, allow_hyphen_values = true)]
    pub first_theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfcheckParams {
    /// Include the strip simulations (several minutes per run)
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub simulations: Option<bool>,
}

#[derive(Debug, Clone)]
pub enum Job {
    Dispersion(BandParams),
    Perturb(BandParams),
    Phase(PhaseParams),
    Classical(ClassicalParams),
    Simulate(SimulateParams),
    Sweep(SweepParams),
    Selfcheck(SelfcheckParams),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<CommandName>,
    #[serde(default)]
    parameters: Map<String, Value>,
    output_dir: Option<PathBuf>,
    format: Option<Format>,
    plot: Option<bool>,
    #[allow(dead_code)]
    seed: Option<u64>,
}

/// A run with file and flags merged.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandName,
    pub job: Job,
    pub parameters: Map<String, Value>,
    pub output_dir: Option<PathBuf>,
    pub format: Format,
    pub plot: bool,
}

fn decode<T: DeserializeOwned>(command: CommandName, parameters: &Map<String, Value>) -> Result<T, CliError> {
    serde_json::from_value(Value::Object(parameters.clone())).map_err(|e| config_error(format!("{command} parameters: {e}")))
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self, CliError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<FileConfig>(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        Self::merge(file, cli)
    }

    /// Builds a run from a JSON document alone.
    #[cfg(test)]
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let file = serde_json::from_str::<FileConfig>(text).map_err(|e| config_error(e.to_string()))?;
        Self::merge(file, &Cli::parse_from(["halledge"]))
    }

    fn merge(file: FileConfig, cli: &Cli) -> Result<Self, CliError> {
        let (command, flags) = match &cli.command {
            Some(c) => (c.name(), c.flag_values()),
            None => (file.command.ok_or_else(|| config_error("no command given"))?, Map::new()),
        };
        if let Some(from_file) = file.command {
            if from_file != command {
                return Err(config_error(format!("command `{command}` conflicts with `{from_file}` in the config file")));
            }
        }
        let mut parameters = file.parameters;
        parameters.extend(flags);
        let job = match command {
            CommandName::Dispersion => Job::Dispersion(decode(command, &parameters)?),
            CommandName::Perturb => Job::Perturb(decode(command, &parameters)?),
            CommandName::Phase => Job::Phase(decode(command, &parameters)?),
            CommandName::Classical => Job::Classical(decode(command, &parameters)?),
            CommandName::Simulate => Job::Simulate(decode(command, &parameters)?),
            CommandName::Sweep => Job::Sweep(decode(command, &parameters)?),
            CommandName::Selfcheck => Job::Selfcheck(decode(command, &parameters)?),
        };
        Ok(Self {
            command,
            job,
            parameters,
            output_dir: cli.output_dir.clone().or(file.output_dir),
            format: cli.format.or(file.format).unwrap_or_default(),
            plot: cli.plot || file.plot.unwrap_or(false),
        })
    }

    /// Hash of everything that shapes the outputs; the output directory
    /// and the seed are left out.
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "command": self.command,
            "parameters": self.parameters,
            "format": self.format,
            "plot": self.plot,
        });
        blob_hash(&canonical.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("halledge").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn ranges_are_inclusive() {
        let v: Values = "-4..2".parse().unwrap();
        let ks = v.expand("k", Some(0.05), "dk").unwrap();
        assert_eq!(ks.len(), 121);
        assert_eq!(ks[0], -4.0);
        assert!((ks[120] - 2.0).abs() < 1e-12);
        assert_eq!("0..3".parse::<Values>().unwrap().indices("n").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!("0,2,5".parse::<Values>().unwrap().indices("n").unwrap(), vec![0, 2, 5]);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!("2..1".parse::<Values>().is_err());
        assert!("a".parse::<Values>().is_err());
        assert!("1,nan".parse::<Values>().is_err());
        assert!("1.5".parse::<Values>().unwrap().indices("n").is_err());
        assert!("-1".parse::<Values>().unwrap().indices("n").is_err());
        assert!("0..1".parse::<Values>().unwrap().expand("k", None, "dk").is_err());
        assert!("0..1".parse::<Values>().unwrap().expand("k", Some(1e-9), "dk").is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig = serde_json::from_str(
            r#"{"command": "phase", "parameters": {"n": 0, "k": "0,1", "theta": 0.2}, "format": "json"}"#,
        )
        .unwrap();
        let run = RunConfig::merge(file, &cli(&["phase", "--theta", "-0.4"])).unwrap();
        let Job::Phase(p) = &run.job else { panic!() };
        assert_eq!(p.theta, Some(-0.4));
        assert_eq!(p.k.as_ref().unwrap().expand("k", None, "dk").unwrap(), vec![0.0, 1.0]);
        assert_eq!(run.format, Format::Json);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"command": "phase", "bogus": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command": "phase", "parameters": {"thetta": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command": "dispersion", "parameters": {"theta": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"command": "simulate", "parameters": {"strip": {"beta": 1}}}"#).is_err());
    }

    #[test]
    fn conflicting_commands_are_rejected() {
        let file: FileConfig = serde_json::from_str(r#"{"command": "phase"}"#).unwrap();
        assert!(RunConfig::merge(file, &cli(&["dispersion"])).is_err());
    }

    #[test]
    fn hash_ignores_output_dir_and_seed() {
        let a = RunConfig::merge(FileConfig::default(), &cli(&["dispersion", "--n", "0", "--k", "0"])).unwrap();
        let b = RunConfig::merge(
            FileConfig::default(),
            &cli(&["--output-dir", "/tmp/x", "--seed", "7", "dispersion", "--n", "0", "--k", "0"]),
        )
        .unwrap();
        let c = RunConfig::merge(FileConfig::default(), &cli(&["dispersion", "--n", "0", "--k", "0.5"])).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
