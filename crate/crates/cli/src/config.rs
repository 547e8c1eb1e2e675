//! Scenario files: strict TOML, every key known, physics parameters explicit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qfd_core::manybody::{Interaction, Symmetry};
use qfd_core::potential::{Envelope, PotentialKind};
use qfd_core::qfdft::{ScfConfig, XcRegistry};
use qfd_core::{Grid1D, Potential, PotentialSpec, Scheme};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    TwobodyFull,
    TwobodyHartree,
    Reduced,
    Qfdft,
    Check,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::TwobodyFull => "twobody_full",
            Mode::TwobodyHartree => "twobody_hartree",
            Mode::Reduced => "reduced",
            Mode::Qfdft => "qfdft",
            Mode::Check => "check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub output_dir: PathBuf,
    pub grid: Option<GridBlock>,
    pub potential: Option<PotentialBlock>,
    #[serde(default)]
    pub state: Vec<StateBlock>,
    pub propagator: Option<PropagatorBlock>,
    pub trajectories: Option<TrajectoryBlock>,
    pub interaction: Option<InteractionBlock>,
    pub twobody: Option<TwoBodyBlock>,
    pub functional: Option<FunctionalBlock>,
    pub scf: Option<ScfBlock>,
    pub check: Option<CheckBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "boundary", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridBlock {
    Periodic { x_min: f64, length: f64, n: usize },
    Dirichlet { x_min: f64, x_max: f64, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialBlock {
    Free {
        envelope: Option<EnvelopeBlock>,
    },
    Harmonic {
        omega: f64,
        center: f64,
        envelope: Option<EnvelopeBlock>,
    },
    GaussianBarrier {
        height: f64,
        width: f64,
        center: f64,
        envelope: Option<EnvelopeBlock>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvelopeBlock {
    Constant,
    Sinusoidal { amplitude: f64, omega: f64 },
    LinearRamp { duration: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateBlock {
    Gaussian { center: f64, sigma: f64, k0: f64 },
    Harmonic { level: usize, omega: f64 },
    PlaneWave { k: f64 },
    /// A stored complex field on the scenario grid.
    File { path: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    SplitOperator,
    CrankNicolson,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Self {
        match s {
            SchemeName::SplitOperator => Scheme::SplitOperator,
            SchemeName::CrankNicolson => Scheme::CrankNicolson,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorBlock {
    pub scheme: SchemeName,
    pub mass: f64,
    pub t_final: f64,
    /// Omitted: 0.01·m·dx², recorded in the manifest.
    pub dt: Option<f64>,
    pub stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryBlock {
    pub n: usize,
    pub seed: u64,
    /// Omitted: the snapshot spacing.
    pub dt: Option<f64>,
    /// Store every `stride`-th integration step. Omitted: 1.
    pub stride: Option<usize>,
    /// Equivariance histogram bins. Omitted: 20.
    pub bins: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionBlock {
    None,
    SoftCoulomb { strength: f64, softening: f64 },
}

impl From<InteractionBlock> for Interaction {
    fn from(b: InteractionBlock) -> Self {
        match b {
            InteractionBlock::None => Interaction::None,
            InteractionBlock::SoftCoulomb { strength, softening } => Interaction::SoftCoulomb { strength, softening },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoBodyBlock {
    pub symmetry: Symmetry,
    /// Hartree runs only. Omitted: false.
    pub predictor_corrector: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalBlock {
    /// Couple the orbitals through the `[interaction]` kernel.
    pub hartree: bool,
    pub xc: String,
    /// Replace the initial orbitals by the self-consistent ground state first.
    pub stationary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScfBlock {
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    pub suite: String,
}

/// Parses TOML text; any syntax, type or unknown-key problem is a parse error.
pub fn parse(text: &str) -> Result<ScenarioConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load(path: &Path) -> Result<(String, ScenarioConfig), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let cfg = parse(&text)?;
    Ok((text, cfg))
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite, got {v}")))
    }
}

impl ScenarioConfig {
    fn require<'a, T>(&self, block: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        block
            .as_ref()
            .ok_or_else(|| invalid(name, format!("block is required for mode {}", self.mode.as_str())))
    }

    fn forbid<T>(&self, block: &Option<T>, name: &str) -> Result<(), CliError> {
        match block {
            Some(_) => Err(invalid(name, format!("block is not used by mode {}", self.mode.as_str()))),
            None => Ok(()),
        }
    }

    /// Range and consistency checks; nothing is computed.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.output_dir.as_os_str().is_empty() {
            return Err(invalid("output_dir", "must not be empty"));
        }
        if self.mode == Mode::Check {
            let c = self.require(&self.check, "check")?;
            if c.suite != "all" && !qfd_core::checks::SUITES.contains(&c.suite.as_str()) {
                return Err(invalid("check.suite", format!("unknown suite `{}`", c.suite)));
            }
            for (present, name) in [
                (self.grid.is_some(), "grid"),
                (self.potential.is_some(), "potential"),
                (!self.state.is_empty(), "state"),
                (self.propagator.is_some(), "propagator"),
                (self.trajectories.is_some(), "trajectories"),
                (self.interaction.is_some(), "interaction"),
                (self.twobody.is_some(), "twobody"),
                (self.functional.is_some(), "functional"),
                (self.scf.is_some(), "scf"),
            ] {
                if present {
                    return Err(invalid(name, "block is not used by mode check"));
                }
            }
            return Ok(());
        }
        self.forbid(&self.check, "check")?;
        let grid = self.grid_1d()?;
        self.potential_spec()?;
        let p = self.require(&self.propagator, "propagator")?;
        positive("propagator.mass", p.mass)?;
        positive("propagator.t_final", p.t_final)?;
        if let Some(dt) = p.dt {
            positive("propagator.dt", dt)?;
            if dt > p.t_final {
                return Err(invalid("propagator.dt", "exceeds propagator.t_final"));
            }
        }
        if p.stride == 0 {
            return Err(invalid("propagator.stride", "must be at least 1"));
        }
        if p.scheme == SchemeName::SplitOperator && !grid.is_periodic() {
            return Err(invalid("propagator.scheme", "split_operator needs a periodic grid"));
        }
        let states = match self.mode {
            Mode::Single => 1..=1,
            Mode::TwobodyFull | Mode::TwobodyHartree | Mode::Reduced => 2..=2,
            Mode::Qfdft => 1..=usize::MAX,
            Mode::Check => unreachable!(),
        };
        if !states.contains(&self.state.len()) {
            return Err(invalid(
                "state",
                format!("mode {} needs {:?} [[state]] entries, got {}", self.mode.as_str(), states, self.state.len()),
            ));
        }
        for (k, s) in self.state.iter().enumerate() {
            validate_state(k, s)?;
        }
        if let Some(t) = &self.trajectories {
            if t.n == 0 {
                return Err(invalid("trajectories.n", "must be at least 1"));
            }
            if let Some(dt) = t.dt {
                positive("trajectories.dt", dt)?;
            }
            if t.stride == Some(0) {
                return Err(invalid("trajectories.stride", "must be at least 1"));
            }
            if t.bins.is_some_and(|b| b < 2) {
                return Err(invalid("trajectories.bins", "must be at least 2"));
            }
        }
        match self.mode {
            Mode::Single => {
                self.forbid(&self.interaction, "interaction")?;
                self.forbid(&self.twobody, "twobody")?;
                self.forbid(&self.functional, "functional")?;
                self.forbid(&self.scf, "scf")?;
            }
            Mode::TwobodyFull | Mode::TwobodyHartree | Mode::Reduced => {
                self.interaction()?;
                self.require(&self.twobody, "twobody")?;
                self.forbid(&self.functional, "functional")?;
                self.forbid(&self.scf, "scf")?;
                if self.mode != Mode::TwobodyHartree && self.twobody.as_ref().unwrap().predictor_corrector.is_some() {
                    return Err(invalid("twobody.predictor_corrector", "only used by mode twobody_hartree"));
                }
                if self.mode == Mode::TwobodyHartree && self.twobody.as_ref().unwrap().symmetry != Symmetry::None {
                    return Err(invalid("twobody.symmetry", "a Hartree product has no exchange symmetry; use none"));
                }
            }
            Mode::Qfdft => {
                let f = self.require(&self.functional, "functional")?;
                self.forbid(&self.twobody, "twobody")?;
                if f.hartree {
                    self.interaction()?;
                } else {
                    self.forbid(&self.interaction, "interaction")?;
                }
                XcRegistry::builtin()
                    .get(&f.xc)
                    .map_err(|_| invalid("functional.xc", format!("unknown functional `{}`", f.xc)))?;
                if f.stationary {
                    self.scf_config()?;
                    if self.potential_spec()?.is_time_dependent() {
                        return Err(invalid("functional.stationary", "needs a time-independent potential"));
                    }
                } else {
                    self.forbid(&self.scf, "scf")?;
                }
                if self.trajectories.is_some() {
                    return Err(invalid("trajectories", "block is not used by mode qfdft"));
                }
            }
            Mode::Check => unreachable!(),
        }
        Ok(())
    }

    pub fn grid_1d(&self) -> Result<Grid1D, CliError> {
        let g = self.require(&self.grid, "grid")?;
        let built = match *g {
            GridBlock::Periodic { x_min, length, n } => {
                finite("grid.x_min", x_min)?;
                positive("grid.length", length)?;
                Grid1D::periodic(x_min, length, n)
            }
            GridBlock::Dirichlet { x_min, x_max, n } => {
                finite("grid.x_min", x_min)?;
                finite("grid.x_max", x_max)?;
                if x_max <= x_min {
                    return Err(invalid("grid.x_max", "must exceed grid.x_min"));
                }
                Grid1D::dirichlet(x_min, x_max, n)
            }
        };
        built.map_err(|e| invalid("grid.n", e.to_string()))
    }

    pub fn potential_spec(&self) -> Result<PotentialSpec, CliError> {
        let p = self.require(&self.potential, "potential")?;
        let (kind, env) = match *p {
            PotentialBlock::Free { envelope } => (PotentialKind::Free, envelope),
            PotentialBlock::Harmonic { omega, center, envelope } => {
                positive("potential.omega", omega)?;
                finite("potential.center", center)?;
                (PotentialKind::Harmonic { omega, center }, envelope)
            }
            PotentialBlock::GaussianBarrier {
                height,
                width,
                center,
                envelope,
            } => {
                finite("potential.height", height)?;
                positive("potential.width", width)?;
                finite("potential.center", center)?;
                (PotentialKind::GaussianBarrier { height, width, center }, envelope)
            }
        };
        let envelope = match env.unwrap_or(EnvelopeBlock::Constant) {
            EnvelopeBlock::Constant => Envelope::Constant,
            EnvelopeBlock::Sinusoidal { amplitude, omega } => {
                finite("potential.envelope.amplitude", amplitude)?;
                finite("potential.envelope.omega", omega)?;
                Envelope::Sinusoidal { amplitude, omega }
            }
            EnvelopeBlock::LinearRamp { duration } => {
                positive("potential.envelope.duration", duration)?;
                Envelope::LinearRamp { duration }
            }
        };
        let spec = PotentialSpec::new(kind).with_envelope(envelope);
        spec.validate().map_err(|e| invalid("potential", e.to_string()))?;
        Ok(spec)
    }

    pub fn interaction(&self) -> Result<Interaction, CliError> {
        let b = *self.require(&self.interaction, "interaction")?;
        if let InteractionBlock::SoftCoulomb { strength, softening } = b {
            finite("interaction.strength", strength)?;
            positive("interaction.softening", softening)?;
        }
        Ok(b.into())
    }

    pub fn scf_config(&self) -> Result<ScfConfig, CliError> {
        let mut c = ScfConfig::default();
        if let Some(b) = &self.scf {
            if let Some(a) = b.alpha {
                c.alpha = a;
            }
            if let Some(t) = b.tol {
                c.tol = t;
            }
            if let Some(m) = b.max_iter {
                c.max_iter = m;
            }
        }
        if let Some(p) = &self.propagator {
            c.mass = p.mass;
        }
        c.validate().map_err(|e| match e {
            qfd_core::QfdError::InvalidParameter { name, reason } => invalid(name, reason),
            other => invalid("scf", other.to_string()),
        })?;
        Ok(c)
    }
}

fn validate_state(k: usize, s: &StateBlock) -> Result<(), CliError> {
    let f = |name: &str| format!("state[{k}].{name}");
    match s {
        StateBlock::Gaussian { center, sigma, k0 } => {
            finite(&f("center"), *center)?;
            positive(&f("sigma"), *sigma)?;
            finite(&f("k0"), *k0)
        }
        StateBlock::Harmonic { omega, .. } => positive(&f("omega"), *omega),
        StateBlock::PlaneWave { k } => finite(&f("k"), *k),
        StateBlock::File { path } => {
            if path.is_file() {
                Ok(())
            } else {
                Err(invalid(f("path"), format!("no such file: {}", path.display())))
            }
        }
    }
}
