//! Run configuration: a TOML document with a protocol declaration, a seed and
//! exactly one command table.
//!
//! ```toml
//! seed = 7
//!
//! [protocol]
//! segments = [{ kind = "harmonic", L = 1.0, A = 0.1, omega = 3.141592653589793 }]
//!
//! [command.fixed-points]
//! periods = 1
//! ```

use floquet_core::{
    DriveProtocol, FieldProfile, Interpolation, MediumSchedule, SegmentLaw,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required by every command except `medium` and `sweep-estimate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolDecl>,
    /// Seed for randomized grids (random iterate starts).
    #[serde(default)]
    pub seed: u64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolDecl {
    /// Time at which the first segment's duration starts counting.
    #[serde(default)]
    pub start: f64,
    pub segments: Vec<SegmentDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_reverse: Option<TimeReverseDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Harmonic,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentDecl {
    pub kind: SegmentKind,
    #[serde(rename = "L", alias = "length", alias = "mean")]
    pub length: f64,
    #[serde(rename = "A", alias = "amplitude", default)]
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default)]
    pub phi: f64,
    /// Absent means unbounded; only allowed on the last segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeReverseDecl {
    pub at: f64,
    pub q: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Command {
    Map(MapParams),
    Iterate(IterateParams),
    FixedPoints(FixedPointParams),
    Scan(ScanParams),
    Evolve(EvolveParams),
    Energy(EnergyParams),
    Casimir(CasimirParams),
    TimeReverse(TimeReverseParams),
    Lightcones(LightconeParams),
    Medium(MediumParams),
    SweepEstimate(SweepParams),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Map(_) => "map",
            Command::Iterate(_) => "iterate",
            Command::FixedPoints(_) => "fixed-points",
            Command::Scan(_) => "scan",
            Command::Evolve(_) => "evolve",
            Command::Energy(_) => "energy",
            Command::Casimir(_) => "casimir",
            Command::TimeReverse(_) => "time-reverse",
            Command::Lightcones(_) => "lightcones",
            Command::Medium(_) => "medium",
            Command::SweepEstimate(_) => "sweep-estimate",
        }
    }

    fn needs_protocol(&self) -> bool {
        !matches!(self, Command::Medium(_) | Command::SweepEstimate(_))
    }
}

fn one() -> u32 {
    1
}
fn default_samples() -> usize {
    2048
}
fn default_points() -> usize {
    1024
}
fn default_rays() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub periods: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterateParams {
    #[serde(default)]
    pub t0: f64,
    pub steps: usize,
    #[serde(default)]
    pub starts: Vec<f64>,
    /// Extra starting points drawn uniformly on the ring from `seed`.
    #[serde(default)]
    pub random_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointParams {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub periods: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// Scans the mean length of the (single, harmonic) protocol segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub l_min: f64,
    pub l_max: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub periods: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub profile: FieldProfile,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub t0: f64,
    /// Snapshots are taken after every `every` drive periods up to `periods`.
    pub periods: u32,
    #[serde(default = "one")]
    pub every: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub profile: FieldProfile,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub interpolation: Interpolation,
    #[serde(default)]
    pub t0: f64,
    pub periods: u32,
    /// Adds the weak-drive prediction `E0 cosh(2 q A~ n)` for this resonance
    /// order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak_q: Option<u32>,
    /// Also write the density profile after the last period.
    #[serde(default)]
    pub density: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CasimirParams {
    #[serde(default = "one")]
    pub q: u32,
    pub times: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Also evaluate the generic Moore-function density.
    #[serde(default)]
    pub generic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeReverseParams {
    /// Splice after this many drive periods (from t = 0) ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<u32>,
    /// ... or at this explicit time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(default = "one")]
    pub q: u32,
    #[serde(default = "default_rays")]
    pub rays: usize,
    /// Grid size for the field-return check; 0 skips it.
    #[serde(default)]
    pub field_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightconeParams {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub periods: u32,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_points")]
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketDecl {
    pub x: f64,
    #[serde(default = "unit")]
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub t: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumParams {
    pub schedule: MediumSchedule,
    pub packets: Vec<PacketDecl>,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub finesse: f64,
    /// Mirror speed; defaults to `A Ω` of the first protocol segment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    pub modulation_quality: f64,
}

impl SegmentDecl {
    fn law(&self, index: usize) -> Result<SegmentLaw, CliError> {
        let path = format!("protocol.segments[{index}]");
        match self.kind {
            SegmentKind::Harmonic => {
                let omega = self
                    .omega
                    .ok_or_else(|| CliError::schema(&path, "harmonic segment needs `omega`"))?;
                Ok(SegmentLaw::harmonic(self.length, self.amplitude, omega, self.phi))
            }
            SegmentKind::Constant => {
                if self.amplitude != 0.0 || self.omega.is_some() || self.phi != 0.0 {
                    return Err(CliError::schema(
                        &path,
                        "constant segment takes only `L` and `duration`",
                    ));
                }
                Ok(SegmentLaw::constant(self.length))
            }
        }
    }
}

impl ProtocolDecl {
    /// Builds and validates the protocol, applying the time-reverse
    /// directive if present.
    pub fn build(&self) -> Result<DriveProtocol, CliError> {
        if self.segments.is_empty() {
            return Err(CliError::schema("protocol.segments", "at least one segment is required"));
        }
        let pieces = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| Ok((s.law(i)?, s.duration)))
            .collect::<Result<Vec<_>, CliError>>()?;
        let p = DriveProtocol::concatenate(self.start, pieces)
            .map_err(|e| CliError::Protocol(e.to_string()))?;
        match self.time_reverse {
            Some(tr) => p
                .time_reverse(tr.at, tr.q)
                .map_err(|e| CliError::Protocol(format!("time_reverse: {e}"))),
            None => Ok(p),
        }
    }
}

/// A parsed config together with the protocol it declares.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub protocol: Option<DriveProtocol>,
}

/// Parses and validates a TOML run configuration. Schema errors carry the
/// dotted path of the offending key.
pub fn parse_config(text: &str) -> Result<Prepared, CliError> {
    let de = toml::Deserializer::new(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema {
            path,
            message: e.into_inner().message().trim().to_string(),
        }
    })?;
    prepare(config)
}

/// Validates an already deserialized config.
pub fn prepare(config: RunConfig) -> Result<Prepared, CliError> {
    let protocol = match (&config.protocol, config.command.needs_protocol()) {
        (Some(decl), _) => Some(decl.build()?),
        (None, true) => {
            return Err(CliError::schema(
                "protocol",
                &format!("command `{}` needs a protocol", config.command.name()),
            ))
        }
        (None, false) => None,
    };
    check_params(&config, protocol.as_ref())?;
    Ok(Prepared { config, protocol })
}

fn check_params(config: &RunConfig, protocol: Option<&DriveProtocol>) -> Result<(), CliError> {
    let at = |field: &str| format!("command.{}.{field}", config.command.name());
    let positive = |field: &str, v: usize| {
        if v == 0 {
            Err(CliError::schema(&at(field), "must be positive"))
        } else {
            Ok(())
        }
    };
    match &config.command {
        Command::Map(m) => {
            positive("periods", m.periods as usize)?;
            positive("samples", m.samples)?;
        }
        Command::FixedPoints(m) => {
            positive("periods", m.periods as usize)?;
            positive("samples", m.samples)?;
        }
        Command::Lightcones(m) => {
            positive("periods", m.periods as usize)?;
            positive("samples", m.samples)?;
            positive("grid", m.grid)?;
        }
        Command::Iterate(m) => {
            if m.starts.is_empty() && m.random_starts == 0 {
                return Err(CliError::schema(&at("starts"), "give `starts` or `random_starts`"));
            }
        }
        Command::Scan(m) => {
            positive("steps", m.steps)?;
            positive("periods", m.periods as usize)?;
            if !(m.l_min > 0.0 && m.l_max >= m.l_min) {
                return Err(CliError::schema(&at("l_min"), "need 0 < l_min <= l_max"));
            }
            harmonic_of(protocol)?;
        }
        Command::Evolve(m) => positive("every", m.every as usize)?,
        Command::Energy(_) => {}
        Command::Casimir(m) => {
            positive("q", m.q as usize)?;
            positive("points", m.points)?;
            harmonic_of(protocol)?;
        }
        Command::TimeReverse(m) => {
            positive("q", m.q as usize)?;
            positive("rays", m.rays)?;
            if m.periods.is_some() == m.t_star.is_some() {
                return Err(CliError::schema(
                    &at("t_star"),
                    "give exactly one of `periods` and `t_star`",
                ));
            }
            if config.protocol.as_ref().is_some_and(|p| p.time_reverse.is_some()) {
                return Err(CliError::schema(
                    "protocol.time_reverse",
                    "the time-reverse command performs its own splice",
                ));
            }
        }
        Command::Medium(m) => {
            validated_schedule(&m.schedule)
                .map_err(|e| CliError::schema(&at("schedule"), &e.to_string()))?;
            if m.packets.is_empty() {
                return Err(CliError::schema(&at("packets"), "at least one packet is required"));
            }
        }
        Command::SweepEstimate(m) => {
            if m.speed.is_none() {
                harmonic_of(protocol)?;
            }
        }
    }
    Ok(())
}

/// `(L, A, Ω, φ)` of a protocol made of one harmonic segment.
pub fn harmonic_of(protocol: Option<&DriveProtocol>) -> Result<(f64, f64, f64, f64), CliError> {
    let err = || CliError::schema("protocol.segments", "this command needs a single harmonic segment");
    let p = protocol.ok_or_else(err)?;
    match p.segments() {
        [seg] => match seg.law {
            SegmentLaw::Harmonic {
                mean,
                amplitude,
                omega,
                phase,
            } => Ok((mean, amplitude, omega, phase)),
            _ => Err(err()),
        },
        _ => Err(err()),
    }
}

/// Re-runs the constructor checks on a deserialized schedule.
pub fn validated_schedule(s: &MediumSchedule) -> floquet_core::Result<MediumSchedule> {
    MediumSchedule::new(s.half_length, s.regions.clone(), s.smoothness)
}
