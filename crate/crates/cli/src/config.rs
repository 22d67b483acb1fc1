//! Flat `key = value` configuration files.

use std::collections::BTreeMap;
use std::fmt;

use hlmetro::estimation::{PriorNoise, ThetaMode};
use hlmetro::homodyne::Branch;
use hlmetro::network::{Angle, NetworkElement, ParamNetwork};
use hlmetro::scenarios::{ChannelKind, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Fisher,
    Variance,
    Scaling,
    ScenarioTwoChannel,
    ScenarioLinearComb,
    PriorProbe,
}

impl Mode {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fisher" => Mode::Fisher,
            "variance" => Mode::Variance,
            "scaling" => Mode::Scaling,
            "scenario-two-channel" => Mode::ScenarioTwoChannel,
            "scenario-linear-comb" => Mode::ScenarioLinearComb,
            "prior-probe" => Mode::PriorProbe,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Mode::Fisher => "fisher",
            Mode::Variance => "variance",
            Mode::Scaling => "scaling",
            Mode::ScenarioTwoChannel => "scenario-two-channel",
            Mode::ScenarioLinearComb => "scenario-linear-comb",
            Mode::PriorProbe => "prior-probe",
        }
    }

    /// Modes that draw the prior at random rather than reading `phi_cl`.
    fn draws_prior(self) -> bool {
        matches!(self, Mode::Scaling | Mode::PriorProbe)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    TwoChannel {
        phi: [f64; 3],
        alpha1: f64,
        alpha2: f64,
    },
    LinearComb {
        weights: Vec<f64>,
        kinds: Vec<ChannelKind<f64>>,
        phi: Vec<f64>,
    },
    /// One phase shift on a single mode.
    PhaseShift {
        phi: f64,
    },
}

impl ScenarioSpec {
    pub fn scenario(&self) -> Scenario<f64> {
        match self {
            ScenarioSpec::TwoChannel { phi, alpha1, alpha2 } => Scenario::TwoChannel {
                phi: *phi,
                alpha1: *alpha1,
                alpha2: *alpha2,
            },
            ScenarioSpec::LinearComb { weights, kinds, phi } => Scenario::LinearComb {
                weights: weights.clone(),
                kinds: kinds.clone(),
                phi: phi.clone(),
            },
            ScenarioSpec::PhaseShift { phi } => {
                let layout = vec![NetworkElement::PhaseShift {
                    channel: 1,
                    phase: Angle::param(1),
                }];
                let network = ParamNetwork::new(1, 1, layout).expect("single phase-shift layout is valid");
                Scenario::Network {
                    network,
                    phi: vec![*phi],
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Theta,
    /// 1-based parameter index.
    Phi(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub mode: Mode,
    pub scenario: ScenarioSpec,
    /// Prior the stages are tuned from; `None` means the true values.
    pub phi_cl: Option<Vec<f64>>,
    pub photon_numbers: Vec<f64>,
    pub k: f64,
    pub c: f64,
    pub n: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub theta_mode: ThetaMode,
    pub branch: Branch,
    pub ell: Option<f64>,
    pub sweep: Sweep,
    pub grid: (f64, f64, usize),
    pub draws: usize,
    pub noise: PriorNoise,
}

impl Config {
    /// Caps sample, repetition and draw counts for quick runs.
    pub fn at_smoke_scale(mut self) -> Self {
        self.n = self.n.min(100);
        self.repetitions = self.repetitions.min(10);
        self.draws = self.draws.min(10);
        self
    }

    pub fn phi_cl_or_true(&self) -> Vec<f64> {
        self.phi_cl
            .clone()
            .unwrap_or_else(|| self.scenario.scenario().phi_true())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: Config,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

const COMMON: &[&str] = &["mode", "scenario", "seed"];
const TWO_CHANNEL: &[&str] = &["phi", "delta_alpha", "alpha1", "alpha2"];
const LINEAR_COMB: &[&str] = &[
    "phi",
    "weights",
    "channels",
    "local_delta_alpha",
    "local_phases",
    "local_phases_cl",
];
const PHASE_SHIFT: &[&str] = &["phi"];

fn mode_keys(mode: Mode) -> &'static [&'static str] {
    match mode {
        Mode::Fisher => &["N", "k", "branch", "ell", "phi_cl"],
        Mode::Variance => &["N", "k", "branch", "phi_cl", "sweep", "grid"],
        Mode::Scaling => &["N", "k", "c", "n", "R", "theta_mode", "branch"],
        Mode::ScenarioTwoChannel | Mode::ScenarioLinearComb => &["phi_cl"],
        Mode::PriorProbe => &["N", "c", "draws", "noise"],
    }
}

/// Parse a configuration file. Unknown keys, missing keys and malformed
/// values are errors carrying the line number; a repeated key overrides the
/// earlier one and produces a warning.
pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return err(Some(line), format!("expected `key = value`, got `{content}`"));
        };
        let key = key.trim();
        if key.is_empty() {
            return err(Some(line), "empty key");
        }
        let entry = Entry {
            value: value.trim().to_string(),
            line,
        };
        if let Some(prev) = entries.insert(key.to_string(), entry) {
            warnings.push(format!(
                "line {line}: duplicate key `{key}` overrides line {}",
                prev.line
            ));
        }
    }
    let config = Builder { entries }.build()?;
    Ok(Parsed { config, warnings })
}

struct Builder {
    entries: BTreeMap<String, Entry>,
}

impl Builder {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn required(&self, key: &str, mode: Mode) -> Result<&Entry, ConfigError> {
        match self.get(key) {
            Some(e) => Ok(e),
            None => err(None, format!("missing key `{key}` required by mode `{}`", mode.name())),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
            .map(|e| parse_number(&e.value).ok_or_else(|| bad(e, key, "a number")))
            .transpose()
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.get(key)
            .map(|e| {
                parse_number(&e.value)
                    .filter(|x| *x >= 1.0 && x.fract() == 0.0 && *x <= u32::MAX as f64)
                    .map(|x| x as usize)
                    .ok_or_else(|| bad(e, key, "a positive integer"))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        self.get(key)
            .map(|e| {
                let values = e
                    .value
                    .split(',')
                    .map(|s| parse_number(s.trim()))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| bad(e, key, "a comma-separated list of numbers"))?;
                Ok((values, e.line))
            })
            .transpose()
    }

    fn build(self) -> Result<Config, ConfigError> {
        let mode_entry = self.get("mode").ok_or(ConfigError {
            line: None,
            message: "missing key `mode`".into(),
        })?;
        let mode = Mode::parse(&mode_entry.value).ok_or_else(|| {
            bad(
                mode_entry,
                "mode",
                "one of fisher, variance, scaling, scenario-two-channel, scenario-linear-comb, prior-probe",
            )
        })?;

        let scenario_name = match mode {
            Mode::ScenarioTwoChannel => {
                self.expect_scenario("two-channel")?;
                "two-channel".to_string()
            }
            Mode::ScenarioLinearComb => {
                self.expect_scenario("linear-comb")?;
                "linear-comb".to_string()
            }
            _ => self.required("scenario", mode)?.value.clone(),
        };
        let scenario_keys = match scenario_name.as_str() {
            "two-channel" => TWO_CHANNEL,
            "linear-comb" => LINEAR_COMB,
            "phase-shift" => PHASE_SHIFT,
            _ => {
                let e = self.get("scenario").expect("scenario key present");
                return Err(bad(e, "scenario", "one of two-channel, linear-comb, phase-shift"));
            }
        };

        for (key, entry) in &self.entries {
            let known = COMMON.contains(&key.as_str())
                || scenario_keys.contains(&key.as_str())
                || mode_keys(mode).contains(&key.as_str());
            if !known {
                return err(
                    Some(entry.line),
                    format!(
                        "unknown key `{key}` for mode `{}` with scenario `{scenario_name}`",
                        mode.name()
                    ),
                );
            }
        }

        let scenario = match scenario_name.as_str() {
            "two-channel" => self.two_channel(mode)?,
            "linear-comb" => self.linear_comb(mode)?,
            _ => self.phase_shift(mode)?,
        };
        let num_params = scenario.scenario().num_params();

        let phi_cl = match self.list("phi_cl")? {
            Some((v, line)) if v.len() != num_params => {
                return err(Some(line), format!("phi_cl needs {num_params} values, got {}", v.len()))
            }
            Some((v, _)) => Some(v),
            None => None,
        };

        let photon_numbers = match mode {
            Mode::ScenarioTwoChannel | Mode::ScenarioLinearComb => Vec::new(),
            _ => {
                let e = self.required("N", mode)?;
                let (values, line) = self.list("N")?.expect("N present");
                if values.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
                    return err(Some(line), "N values must be positive");
                }
                if matches!(mode, Mode::Fisher | Mode::Variance) && values.len() != 1 {
                    return err(Some(e.line), format!("mode `{}` takes a single N", mode.name()));
                }
                if mode == Mode::Scaling {
                    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = values.iter().copied().fold(0.0, f64::max);
                    if values.len() < 3 || hi < 100.0 * lo * (1.0 - 1e-9) {
                        return err(Some(line), "scaling needs at least 3 N values spanning 2 decades");
                    }
                }
                values
            }
        };

        let k = self.number("k")?.unwrap_or(0.25);
        if !k.is_finite() {
            return err(self.get("k").map(|e| e.line), "k must be finite");
        }
        if k == 0.0 && matches!(mode, Mode::Scaling | Mode::Fisher) {
            return err(self.get("k").map(|e| e.line), "k must be nonzero");
        }
        let c = self.number("c")?.unwrap_or(1.0);
        if !(c >= 0.0) {
            return err(self.get("c").map(|e| e.line), "c must be >= 0");
        }
        let ell = self.number("ell")?;
        if let (Some(l), Some(e)) = (ell, self.get("ell")) {
            if !(l >= 0.0) {
                return err(Some(e.line), "ell must be >= 0");
            }
        }

        let seed = match self.get("seed") {
            Some(e) => e
                .value
                .parse::<u64>()
                .map_err(|_| bad(e, "seed", "an unsigned 64-bit integer"))?,
            None => 0,
        };

        let theta_mode = match self.get("theta_mode") {
            None => ThetaMode::Ideal,
            Some(e) => match e.value.as_str() {
                "ideal" => ThetaMode::Ideal,
                "prior" => ThetaMode::Prior,
                _ => return Err(bad(e, "theta_mode", "`ideal` or `prior`")),
            },
        };
        let branch = match self.get("branch") {
            None => Branch::Plus,
            Some(e) => match e.value.as_str() {
                "plus" | "+" | "+1" => Branch::Plus,
                "minus" | "-" | "-1" => Branch::Minus,
                _ => return Err(bad(e, "branch", "`plus` or `minus`")),
            },
        };
        let noise = match self.get("noise") {
            None => PriorNoise::ShotNoise,
            Some(e) => match e.value.as_str() {
                "shot" | "shot-noise" => PriorNoise::ShotNoise,
                "fixed" => PriorNoise::Fixed,
                _ => return Err(bad(e, "noise", "`shot` or `fixed`")),
            },
        };

        let (sweep, grid) = if mode == Mode::Variance {
            let e = self.required("sweep", mode)?;
            let sweep = match e.value.as_str() {
                "theta" => Sweep::Theta,
                other => match other.strip_prefix("phi").and_then(|s| s.parse::<usize>().ok()) {
                    Some(i) if (1..=num_params).contains(&i) => Sweep::Phi(i),
                    _ => {
                        return Err(bad(
                            e,
                            "sweep",
                            &format!("`theta` or `phi<i>` with 1 <= i <= {num_params}"),
                        ))
                    }
                },
            };
            self.required("grid", mode)?;
            let (g, line) = self.list("grid")?.expect("grid present");
            if g.len() != 3 || g[2] < 2.0 || g[2].fract() != 0.0 || !(g[1] > g[0]) {
                return err(
                    Some(line),
                    "grid must be `start, stop, count` with stop > start and integer count >= 2",
                );
            }
            (sweep, (g[0], g[1], g[2] as usize))
        } else {
            (Sweep::Theta, (0.0, 0.0, 0))
        };

        if mode == Mode::PriorProbe && matches!(scenario, ScenarioSpec::PhaseShift { .. }) {
            return err(
                self.get("scenario").map(|e| e.line),
                "prior-probe needs a scenario with prior-tuned stages",
            );
        }
        debug_assert!(!(mode.draws_prior() && phi_cl.is_some()));

        Ok(Config {
            mode,
            scenario,
            phi_cl,
            photon_numbers,
            k,
            c,
            n: self.count("n")?.unwrap_or(10_000),
            repetitions: self.count("R")?.unwrap_or(200),
            seed,
            theta_mode,
            branch,
            ell,
            sweep,
            grid,
            draws: self.count("draws")?.unwrap_or(200),
            noise,
        })
    }

    fn expect_scenario(&self, name: &str) -> Result<(), ConfigError> {
        match self.get("scenario") {
            Some(e) if e.value != name => Err(bad(e, "scenario", &format!("`{name}` in this mode"))),
            _ => Ok(()),
        }
    }

    fn angles(&self, key: &str, mode: Mode, len: Option<usize>) -> Result<Vec<f64>, ConfigError> {
        self.required(key, mode)?;
        let (values, line) = self.list(key)?.expect("key present");
        if let Some(n) = len {
            if values.len() != n {
                return err(Some(line), format!("{key} needs {n} values, got {}", values.len()));
            }
        }
        Ok(values)
    }

    fn two_channel(&self, mode: Mode) -> Result<ScenarioSpec, ConfigError> {
        let phi = self.angles("phi", mode, Some(3))?;
        let (alpha1, alpha2) = match (self.number("alpha1")?, self.number("alpha2")?) {
            (Some(a1), Some(a2)) => {
                if let Some(e) = self.get("delta_alpha") {
                    return err(Some(e.line), "give either delta_alpha or alpha1/alpha2, not both");
                }
                (a1, a2)
            }
            (None, None) => {
                let da = self.number("delta_alpha")?.unwrap_or(std::f64::consts::FRAC_PI_2);
                (da / 2.0, -da / 2.0)
            }
            _ => {
                let e = self.get("alpha1").or_else(|| self.get("alpha2")).expect("one present");
                return err(Some(e.line), "alpha1 and alpha2 must be given together");
            }
        };
        Ok(ScenarioSpec::TwoChannel {
            phi: [phi[0], phi[1], phi[2]],
            alpha1,
            alpha2,
        })
    }

    fn linear_comb(&self, mode: Mode) -> Result<ScenarioSpec, ConfigError> {
        let weights = self.angles("weights", mode, None)?;
        let m = weights.len();
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > 1e-9 {
            return err(
                self.get("weights").map(|e| e.line),
                format!("weights must be non-negative and sum to 1 (sum = {total})"),
            );
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let phi = self.angles("phi", mode, Some(m))?;
        let ch = self.required("channels", mode)?;
        let names: Vec<&str> = ch.value.split(',').map(str::trim).collect();
        if names.len() != m {
            return err(
                Some(ch.line),
                format!("channels needs {m} entries, got {}", names.len()),
            );
        }
        let locals = names.iter().filter(|n| **n == "local").count();
        let local_da = if locals > 0 {
            self.angles("local_delta_alpha", mode, Some(locals))?
        } else {
            Vec::new()
        };
        let local_phases = if locals > 0 {
            self.angles("local_phases", mode, Some(2 * locals))?
        } else {
            Vec::new()
        };
        let local_phases_cl = match self.list("local_phases_cl")? {
            Some((v, line)) if v.len() != 2 * locals => {
                return err(
                    Some(line),
                    format!("local_phases_cl needs {} values, got {}", 2 * locals, v.len()),
                )
            }
            Some((v, _)) => v,
            None => local_phases.clone(),
        };
        let mut kinds = Vec::with_capacity(m);
        let mut j = 0;
        for name in names {
            kinds.push(match name {
                "ps" | "phase" => ChannelKind::PhaseShift,
                "v" | "bs" => ChannelKind::BeamSplitterViaV,
                "local" => {
                    let kind = ChannelKind::GeneralizedLocal {
                        delta_alpha: local_da[j],
                        phases: [local_phases[2 * j], local_phases[2 * j + 1]],
                        phases_cl: [local_phases_cl[2 * j], local_phases_cl[2 * j + 1]],
                    };
                    j += 1;
                    kind
                }
                other => {
                    return err(
                        Some(ch.line),
                        format!("unknown channel kind `{other}` (expected ps, v or local)"),
                    )
                }
            });
        }
        Ok(ScenarioSpec::LinearComb { weights, kinds, phi })
    }

    fn phase_shift(&self, mode: Mode) -> Result<ScenarioSpec, ConfigError> {
        let phi = self.angles("phi", mode, Some(1))?;
        Ok(ScenarioSpec::PhaseShift { phi: phi[0] })
    }
}

fn bad(entry: &Entry, key: &str, expected: &str) -> ConfigError {
    ConfigError {
        line: Some(entry.line),
        message: format!("`{key}` must be {expected}, got `{}`", entry.value),
    }
}

/// Decimal number or `pi` fraction such as `pi/2`, `-3pi/4`, `2*pi`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Some(pos) = s.find("pi") {
        let (head, tail) = (&s[..pos], &s[pos + 2..]);
        let head = head.trim().trim_end_matches('*').trim();
        let coeff = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h.parse::<f64>().ok()?,
        };
        let tail = tail.trim();
        let denom = if tail.is_empty() {
            1.0
        } else {
            let d = tail.strip_prefix('/')?.trim().parse::<f64>().ok()?;
            if d == 0.0 {
                return None;
            }
            d
        };
        return Some(coeff * std::f64::consts::PI / denom);
    }
    let x = s.parse::<f64>().ok()?;
    x.is_finite().then_some(x)
}
