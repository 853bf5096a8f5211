//! `key = value` run configuration with explicit units.
//!
//! Lines starting with `#` are comments. Dimensional values must carry a unit
//! (`ns`, `us`, `ms`, `s`, `Hz`, `kHz`, `MHz`, `GHz`, `mV`, `V`). Unknown keys are
//! rejected with the offending line number.

use std::fmt::Write as _;
use std::path::Path;

use crate::circuit::{DeviceParams, QuenchVariant};
use crate::error::{Error, Result};
use crate::experiments::{Estimator, RunContext};
use crate::measurement::{InitSource, Layout, ReadoutParams};
use crate::noise::{NeighborState, NoiseConfig};
use crate::readout::SensorModel;
use crate::tomography::DEFAULT_BOOTSTRAP;

/// Angle range in radians, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for ThetaRange {
    fn default() -> Self {
        ThetaRange { start: 0.0, stop: 2.0 * std::f64::consts::PI, steps: 33 }
    }
}

impl std::str::FromStr for ThetaRange {
    type Err = String;

    /// `start:stop:steps`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected start:stop:steps, got `{s}`"));
        };
        let start = a.parse::<f64>().map_err(|e| format!("bad start `{a}`: {e}"))?;
        let stop = b.parse::<f64>().map_err(|e| format!("bad stop `{b}`: {e}"))?;
        let steps = n.parse::<usize>().map_err(|e| format!("bad steps `{n}`: {e}"))?;
        if steps < 2 {
            return Err(format!("a θ range needs at least 2 steps, got {steps}"));
        }
        if !start.is_finite() || !stop.is_finite() {
            return Err("θ endpoints must be finite".into());
        }
        Ok(ThetaRange { start, stop, steps })
    }
}

impl ThetaRange {
    pub fn grid(&self) -> Vec<f64> {
        crate::experiments::theta_grid(self.start, self.stop, self.steps).expect("validated range")
    }
}

/// Combo selection: `all` or `;`-separated lists such as `2-3-4;3-4-5`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ComboSpec {
    #[default]
    All,
    List(Vec<Vec<usize>>),
}

impl std::str::FromStr for ComboSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.trim() == "all" {
            return Ok(ComboSpec::All);
        }
        s.split(';')
            .map(|c| {
                c.split('-')
                    .map(|q| q.trim().parse::<usize>().map_err(|e| format!("bad qubit `{q}` in combo `{c}`: {e}")))
                    .collect()
            })
            .collect::<std::result::Result<_, _>>()
            .map(ComboSpec::List)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TomoTarget {
    /// State prepared by the full quench circuit at `tomo.theta`.
    Quench,
    Ghz,
    Bell,
}

impl std::str::FromStr for TomoTarget {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quench" => Ok(TomoTarget::Quench),
            "ghz" => Ok(TomoTarget::Ghz),
            "bell" => Ok(TomoTarget::Bell),
            _ => Err(format!("unknown tomography target `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TomoConfig {
    pub target: TomoTarget,
    pub shots: u64,
    pub bootstrap: usize,
    pub ghz_phase: f64,
    /// Quench angle for the `quench` target, in radians.
    pub theta: f64,
}

impl Default for TomoConfig {
    fn default() -> Self {
        TomoConfig { target: TomoTarget::Quench, shots: 1000, bootstrap: DEFAULT_BOOTSTRAP, ghz_phase: 0.0, theta: std::f64::consts::FRAC_PI_2 }
    }
}

/// Everything a run needs; CLI flags are applied on top.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n: usize,
    pub combos: ComboSpec,
    pub variant: QuenchVariant,
    pub theta: ThetaRange,
    pub shots: usize,
    pub seed: Option<u64>,
    pub qubit: usize,
    pub device: DeviceParams,
    pub noise: NoiseConfig,
    pub readout: ReadoutParams,
    pub layout: Layout,
    pub init: InitSource,
    pub estimator: Estimator,
    pub sensor: SensorModel,
    pub sensor_shots: usize,
    pub tomo: TomoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 4,
            combos: ComboSpec::All,
            variant: QuenchVariant::Simplified,
            theta: ThetaRange::default(),
            shots: 2000,
            seed: None,
            qubit: 1,
            device: DeviceParams::default(),
            noise: NoiseConfig::default(),
            readout: ReadoutParams::default(),
            layout: Layout::paper(),
            init: InitSource::PostSelectedSeed,
            estimator: Estimator::Exact,
            sensor: SensorModel::default(),
            sensor_shots: 5000,
            tomo: TomoConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn context(&self) -> RunContext {
        let mut noise = self.noise.clone();
        noise.base_seed = self.seed.unwrap_or(0);
        RunContext {
            device: self.device.clone(),
            noise,
            readout: self.readout,
            layout: self.layout,
            init: self.init,
            shots: self.shots,
            estimator: self.estimator,
        }
    }

    /// Canonical listing of the effective configuration, stable across runs.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("n", self.n.to_string());
        line(
            "combos",
            match &self.combos {
                ComboSpec::All => "all".into(),
                ComboSpec::List(l) => l.iter().map(|c| crate::circuit::combo_label(c)).collect::<Vec<_>>().join(";"),
            },
        );
        line("variant", format!("{:?}", self.variant).to_lowercase());
        line("theta", format!("{:?}:{:?}:{}", self.theta.start, self.theta.stop, self.theta.steps));
        line("shots", self.shots.to_string());
        line("seed", self.seed.map_or("none".into(), |v| v.to_string()));
        line("qubit", self.qubit.to_string());
        line("t_pi", format!("{:?}ns", self.device.t_pi_default_ns));
        for (q, v) in &self.device.t_pi_ns {
            line(&format!("t_pi.q{q}"), format!("{v:?}ns"));
        }
        line("j", format!("{:?}Hz", self.device.j_default_hz));
        for ((a, b), v) in &self.device.j_hz {
            line(&format!("j.q{a}.q{b}"), format!("{v:?}Hz"));
        }
        line("noise", if self.noise.enabled { "on" } else { "off" }.into());
        line("correlate_regimes", self.noise.correlate_regimes.to_string());
        line("t2_off", format!("{:?}us", self.noise.t2.default_off_us));
        line("t2_on", format!("{:?}us", self.noise.t2.default_on_us));
        for (q, v) in &self.noise.t2.off {
            line(&format!("t2_off.q{q}"), format!("{v:?}us"));
        }
        for ((q, nb, st), v) in &self.noise.t2.on {
            line(&format!("t2_on.q{q}.q{nb}.{}", format!("{st:?}").to_lowercase()), format!("{v:?}us"));
        }
        line("f_rabi", format!("{:?}MHz", self.noise.f_rabi_default_mhz));
        for (q, v) in &self.noise.f_rabi_mhz {
            line(&format!("f_rabi.q{q}"), format!("{v:?}MHz"));
        }
        line("relax_probability", format!("{:?}", self.readout.relax_probability));
        line("readout_error", format!("{:?}", self.readout.readout_error));
        line("even_dephasing", format!("{:?}", self.readout.even_dephasing));
        line("qnd_repeats", self.readout.qnd_repeats.to_string());
        line("conditional_flip", self.readout.conditional_flip.to_string());
        line("layout.qubits", self.layout.qubits.to_string());
        line(
            "init",
            match self.init {
                InitSource::PostSelectedSeed => "seed",
                InitSource::MaximallyMixed => "mixed",
            }
            .into(),
        );
        line("estimator", format!("{:?}", self.estimator).to_lowercase());
        let m = &self.sensor;
        line("sensor.v_odd", format!("{:?}mV", m.v_odd));
        line("sensor.v_even", format!("{:?}mV", m.v_even));
        line("sensor.sigma_odd", format!("{:?}mV", m.sigma_odd));
        line("sensor.sigma_even", format!("{:?}mV", m.sigma_even));
        line("sensor.drift_linear", format!("{:?}mV/ns", m.drift.linear_mv_per_ns));
        line("sensor.drift_transient", format!("{:?}mV", m.drift.transient_mv));
        line("sensor.drift_tau", format!("{:?}ns", m.drift.transient_tau_ns));
        line("sensor.jump_probability", format!("{:?}", m.jump_probability));
        line("sensor.jump", format!("{:?}mV", m.jump_mv));
        line("sensor.shots", self.sensor_shots.to_string());
        line("tomo.target", format!("{:?}", self.tomo.target).to_lowercase());
        line("tomo.shots", self.tomo.shots.to_string());
        line("tomo.bootstrap", self.tomo.bootstrap.to_string());
        line("tomo.ghz_phase", format!("{:?}", self.tomo.ghz_phase));
        line("tomo.theta", format!("{:?}", self.tomo.theta));
        s
    }
}

#[derive(Clone, Copy)]
enum Dim {
    Time,
    Freq,
    Volt,
}

/// Splits a number from its unit and converts to the canonical unit of `dim`
/// (ns, Hz or mV).
fn quantity(v: &str, dim: Dim) -> std::result::Result<f64, String> {
    let v = v.trim();
    let split = v.find(|c: char| c.is_ascii_alphabetic() || c == 'µ').ok_or_else(|| format!("`{v}` needs a unit"))?;
    // Exponent markers belong to the number.
    let split = if matches!(&v[split..split + 1], "e" | "E") && v[split + 1..].starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+') {
        v[split + 1..]
            .find(|c: char| c.is_ascii_alphabetic() || c == 'µ')
            .map(|i| split + 1 + i)
            .ok_or_else(|| format!("`{v}` needs a unit"))?
    } else {
        split
    };
    let (num, unit) = v.split_at(split);
    let x: f64 = num.trim().parse().map_err(|e| format!("bad number `{num}`: {e}"))?;
    let k = match (dim, unit.trim()) {
        (Dim::Time, "ns") => 1.0,
        (Dim::Time, "us" | "µs") => 1e3,
        (Dim::Time, "ms") => 1e6,
        (Dim::Time, "s") => 1e9,
        (Dim::Freq, "Hz") => 1.0,
        (Dim::Freq, "kHz") => 1e3,
        (Dim::Freq, "MHz") => 1e6,
        (Dim::Freq, "GHz") => 1e9,
        (Dim::Volt, "mV") => 1.0,
        (Dim::Volt, "V") => 1e3,
        (_, u) => return Err(format!("unit `{u}` is not valid here")),
    };
    Ok(x * k)
}

fn qubit_tag(s: &str) -> std::result::Result<usize, String> {
    s.strip_prefix('q')
        .and_then(|d| d.parse().ok())
        .filter(|&q: &usize| q >= 1)
        .ok_or_else(|| format!("expected a qubit tag like `q3`, got `{s}`"))
}

fn parse<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("bad value `{v}`: {e}"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("expected a boolean, got `{v}`")),
    }
}

fn apply(cfg: &mut RunConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    let parts: Vec<&str> = key.split('.').collect();
    match parts.as_slice() {
        ["n"] => cfg.n = parse(v)?,
        ["combos"] => cfg.combos = parse(v)?,
        ["variant"] => cfg.variant = parse(v)?,
        ["theta"] => cfg.theta = parse(v)?,
        ["shots"] => cfg.shots = parse(v)?,
        ["seed"] => cfg.seed = Some(parse(v)?),
        ["qubit"] => cfg.qubit = parse(v)?,
        ["t_pi"] => cfg.device.t_pi_default_ns = quantity(v, Dim::Time)?,
        ["t_pi", q] => {
            cfg.device.t_pi_ns.insert(qubit_tag(q)?, quantity(v, Dim::Time)?);
        }
        ["j"] => cfg.device.j_default_hz = quantity(v, Dim::Freq)?,
        ["j", a, b] => cfg.device.set_j(qubit_tag(a)?, qubit_tag(b)?, quantity(v, Dim::Freq)?),
        ["noise"] => cfg.noise.enabled = parse_bool(v)?,
        ["correlate_regimes"] => cfg.noise.correlate_regimes = parse_bool(v)?,
        ["t2_off"] => cfg.noise.t2.default_off_us = quantity(v, Dim::Time)? * 1e-3,
        ["t2_on"] => cfg.noise.t2.default_on_us = quantity(v, Dim::Time)? * 1e-3,
        ["t2_off", q] => {
            cfg.noise.t2.off.insert(qubit_tag(q)?, quantity(v, Dim::Time)? * 1e-3);
        }
        ["t2_on", q, nb, st] => {
            let state = match *st {
                "up" => NeighborState::Up,
                "down" => NeighborState::Down,
                "avg" => NeighborState::Avg,
                _ => return Err(format!("neighbor state must be up, down or avg, got `{st}`")),
            };
            cfg.noise.t2.on.insert((qubit_tag(q)?, qubit_tag(nb)?, state), quantity(v, Dim::Time)? * 1e-3);
        }
        ["f_rabi"] => cfg.noise.f_rabi_default_mhz = quantity(v, Dim::Freq)? * 1e-6,
        ["f_rabi", q] => {
            cfg.noise.f_rabi_mhz.insert(qubit_tag(q)?, quantity(v, Dim::Freq)? * 1e-6);
        }
        ["relax_probability"] => cfg.readout.relax_probability = parse(v)?,
        ["readout_error"] => cfg.readout.readout_error = parse(v)?,
        ["even_dephasing"] => cfg.readout.even_dephasing = parse(v)?,
        ["qnd_repeats"] => cfg.readout.qnd_repeats = parse(v)?,
        ["conditional_flip"] => cfg.readout.conditional_flip = parse_bool(v)?,
        ["layout", "qubits"] => cfg.layout = Layout::new(parse(v)?).map_err(|e| e.to_string())?,
        ["init"] => cfg.init = parse(v)?,
        ["estimator"] => {
            cfg.estimator = match v {
                "exact" => Estimator::Exact,
                "sampled" => Estimator::Sampled,
                _ => return Err(format!("estimator must be exact or sampled, got `{v}`")),
            }
        }
        ["sensor", "v_odd"] => cfg.sensor.v_odd = quantity(v, Dim::Volt)?,
        ["sensor", "v_even"] => cfg.sensor.v_even = quantity(v, Dim::Volt)?,
        ["sensor", "sigma_odd"] => cfg.sensor.sigma_odd = quantity(v, Dim::Volt)?,
        ["sensor", "sigma_even"] => cfg.sensor.sigma_even = quantity(v, Dim::Volt)?,
        ["sensor", "drift_linear"] => {
            let num = v.trim().strip_suffix("mV/ns").ok_or_else(|| format!("`{v}` must be given in mV/ns"))?;
            cfg.sensor.drift.linear_mv_per_ns = parse(num.trim())?;
        }
        ["sensor", "drift_transient"] => cfg.sensor.drift.transient_mv = quantity(v, Dim::Volt)?,
        ["sensor", "drift_tau"] => cfg.sensor.drift.transient_tau_ns = quantity(v, Dim::Time)?,
        ["sensor", "jump_probability"] => cfg.sensor.jump_probability = parse(v)?,
        ["sensor", "jump"] => cfg.sensor.jump_mv = quantity(v, Dim::Volt)?,
        ["sensor", "shots"] => cfg.sensor_shots = parse(v)?,
        ["tomo", "target"] => cfg.tomo.target = parse(v)?,
        ["tomo", "shots"] => cfg.tomo.shots = parse(v)?,
        ["tomo", "bootstrap"] => cfg.tomo.bootstrap = parse(v)?,
        ["tomo", "ghz_phase"] => cfg.tomo.ghz_phase = parse(v)?,
        ["tomo", "theta"] => cfg.tomo.theta = parse(v)?,
        _ => return Err(format!("unknown key `{key}`")),
    }
    Ok(())
}

/// Parses configuration text on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        apply(&mut cfg, k.trim(), v.trim()).map_err(err)?;
    }
    cfg.readout.validate()?;
    cfg.noise.t2.validate()?;
    cfg.sensor.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_fills_defaults() {
        let c = parse_config("# nothing\nseed = 7\n").unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.shots, 2000);
        assert!(c.echo().contains("seed = 7"));
    }

    #[test]
    fn units_are_converted() {
        let c = parse_config("t2_off.q3 = 2.5us\nt_pi = 0.2us\nj.q2.q3 = 2MHz\nf_rabi = 4e6Hz\nsensor.v_even = 0.01V").unwrap();
        assert_eq!(c.noise.t2.off[&3], 2.5);
        assert_eq!(c.device.t_pi_default_ns, 200.0);
        assert_eq!(c.device.j(2, 3), 2e6);
        assert_eq!(c.noise.f_rabi_default_mhz, 4.0);
        assert_eq!(c.sensor.v_even, 10.0);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = parse_config("seed = 1\nshotz = 5\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("shotz") && msg.contains('2'), "{msg}");
    }

    #[test]
    fn missing_unit_rejected() {
        assert!(parse_config("t2_off = 3").is_err());
        assert!(parse_config("t2_off = 3MHz").is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = parse_config("seed = 3\ncombos = 2-3-4;3-4-5\nt2_on.q3.q4.up = 1.5us\nlayout.qubits = 8").unwrap();
        let again = parse_config(&c.echo().replace("seed = none", "")).unwrap();
        assert_eq!(c, again);
    }
}
