//! TOML experiment configuration with command-line overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::mesh::MeshSpec;
use crate::fem::solver::SolverConfig;
use crate::harness::sweep::SweepSpec;
use crate::meyers::{MeyersExample, Variant};
use crate::seminorms::family::FamilySpec;
use crate::weights::quadrature::QuadratureSpec;
use crate::weights::registry::WeightSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub threads: usize,
    pub quadrature: QuadratureSpec,
    pub analyze: AnalyzeConfig,
    pub example: ExampleConfig,
    pub solve: SolveConfig,
    pub sweep: SweepSpec,
    pub nfun: NfunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            threads: 1,
            quadrature: QuadratureSpec::default(),
            analyze: AnalyzeConfig::default(),
            example: ExampleConfig::default(),
            solve: SolveConfig::default(),
            sweep: SweepSpec::default(),
            nfun: NfunConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub weight: WeightSpec,
    pub family: FamilySpec,
    /// Radius of the domain ball `B_R(0)`.
    pub domain_radius: f64,
    /// Zoom levels added toward the origin to detect unbounded `bmo(M)`.
    pub zoom_levels: usize,
    /// Halvings of the radius per zoom level.
    pub zoom_halvings: usize,
    /// Exponents for the Muckenhoupt constants of `ω`.
    pub ap: Vec<f64>,
    /// Exponent of the relative-oscillation check.
    pub q: f64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            weight: WeightSpec::Example {
                variant: Variant::Degenerate,
                n: 2,
                eps: 0.25,
                theta: None,
            },
            family: FamilySpec::default(),
            domain_radius: 1.0,
            zoom_levels: 2,
            zoom_halvings: 16,
            ap: vec![2.0],
            q: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleConfig {
    pub variant: Variant,
    pub n: usize,
    pub eps: f64,
    pub theta: Option<f64>,
    /// Random points for the flux and gradient checks.
    pub points: usize,
    /// Meshes in the residual refinement study (planar examples only).
    pub levels: usize,
    pub mesh: MeshSpec,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        ExampleConfig {
            variant: Variant::Plain,
            n: 2,
            eps: 0.5,
            theta: None,
            points: 50,
            levels: 3,
            mesh: MeshSpec::default(),
        }
    }
}

impl ExampleConfig {
    pub fn build(&self) -> Result<MeyersExample> {
        let ex = MeyersExample::new(self.variant, self.n, self.eps)?;
        match self.theta {
            Some(t) => ex.with_theta(t),
            None => Ok(ex),
        }
    }
}

/// Boundary values of a solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundarySpec {
    Zero,
    /// `a·x + b`
    Linear { a: [f64; 2], b: f64 },
    /// The exact solution of the example weight.
    Example,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    pub weight: WeightSpec,
    pub p: f64,
    pub mesh: MeshSpec,
    pub level: usize,
    pub boundary: BoundarySpec,
    pub solver: SolverConfig,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            weight: WeightSpec::Example {
                variant: Variant::Plain,
                n: 2,
                eps: 0.25,
                theta: None,
            },
            p: 2.0,
            mesh: MeshSpec::default(),
            level: 1,
            boundary: BoundarySpec::Example,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NfunConfig {
    pub p: Vec<f64>,
    pub tuples: usize,
    pub hammer_pairs: usize,
    /// Largest hammer constant accepted without a violation.
    pub hammer_limit: f64,
}

impl Default for NfunConfig {
    fn default() -> Self {
        NfunConfig {
            p: vec![1.5, 2.0, 3.0, 4.5],
            tuples: 100_000,
            hammer_pairs: 100_000,
            hammer_limit: 10.0,
        }
    }
}

/// The subcommand a configuration is resolved for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    AnalyzeWeight,
    VerifyExample,
    Solve,
    CzSweep,
    NfunProps,
    Report,
}

/// Values given on the command line; each replaces the matching entry of
/// the command's section.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub grid: Option<usize>,
    pub eps: Option<f64>,
    pub p: Option<f64>,
    pub rho: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML.
    pub fn settings_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn apply(&mut self, cmd: Command, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        let unused = |flag: &str| Err(Error::Config(format!("--{flag} has no meaning for this command")));
        if let Some(g) = o.grid {
            match cmd {
                Command::VerifyExample => self.example.levels = g,
                Command::Solve => self.solve.level = g,
                Command::CzSweep => self.sweep.levels = g,
                Command::AnalyzeWeight => match &mut self.analyze.family {
                    FamilySpec::DyadicGrid { levels, .. } | FamilySpec::Random { levels, .. } => *levels = g,
                },
                _ => return unused("grid"),
            }
        }
        if let Some(e) = o.eps {
            match cmd {
                Command::VerifyExample => self.example.eps = e,
                Command::CzSweep => self.sweep.eps = vec![e],
                Command::AnalyzeWeight => set_weight_eps(&mut self.analyze.weight, e)?,
                Command::Solve => set_weight_eps(&mut self.solve.weight, e)?,
                _ => return unused("eps"),
            }
        }
        if let Some(p) = o.p {
            match cmd {
                Command::Solve => self.solve.p = p,
                Command::CzSweep => self.sweep.p = p,
                Command::NfunProps => self.nfun.p = vec![p],
                Command::AnalyzeWeight => self.analyze.ap = vec![p],
                _ => return unused("p"),
            }
        }
        if let Some(r) = o.rho {
            match cmd {
                Command::CzSweep => self.sweep.rho = vec![r],
                _ => return unused("rho"),
            }
        }
        Ok(())
    }

    /// Range checks for the parts used by `cmd`.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        self.quadrature.validate()?;
        match cmd {
            Command::AnalyzeWeight => {
                let a = &self.analyze;
                a.weight.build()?;
                if !(a.domain_radius > 0.0) {
                    return Err(Error::invalid("domain radius must be positive"));
                }
                if a.ap.iter().any(|p| !(*p > 1.0)) || !(a.q >= 1.0) {
                    return Err(Error::invalid("A_p exponents must exceed 1 and q must be at least 1"));
                }
            }
            Command::VerifyExample => {
                self.example.build()?;
                if self.example.points == 0 {
                    return Err(Error::invalid("verify-example needs at least one point"));
                }
            }
            Command::Solve => {
                let s = &self.solve;
                if s.weight.dim() != 2 {
                    return Err(Error::invalid("the solver supports planar weights only"));
                }
                s.weight.build()?;
                s.solver.validate()?;
                if !(s.p > 1.0 && s.p.is_finite()) {
                    return Err(Error::invalid(format!("p must lie in (1, inf), got {}", s.p)));
                }
                if s.boundary == BoundarySpec::Example && !matches!(s.weight, WeightSpec::Example { .. }) {
                    return Err(Error::invalid("example boundary values need an example weight"));
                }
            }
            Command::CzSweep => self.sweep.validate()?,
            Command::NfunProps => {
                if self.nfun.p.iter().any(|p| !(*p > 1.0 && p.is_finite())) {
                    return Err(Error::invalid("N-function exponents must lie in (1, inf)"));
                }
            }
            Command::Report => {}
        }
        Ok(())
    }
}

fn set_weight_eps(w: &mut WeightSpec, e: f64) -> Result<()> {
    match w {
        WeightSpec::Example { eps, .. } => {
            *eps = e;
            Ok(())
        }
        _ => Err(Error::Config("--eps applies to example weights only".into())),
    }
}
