//! Run configuration: a strict TOML schema and its effective (defaults
//! expanded) form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, ConfigError};
use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Poisson,
    Obstacle,
    Signorini,
    Tresca,
    Vi3,
    Gnep,
    Fixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainName {
    Interval,
    Rectangle,
    LShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub domain: DomainName,
    pub extents: Vec<[f64; 2]>,
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// Diffusion coefficient per axis; defaults to 1.
    #[serde(default)]
    pub a: Vec<Expr>,
    /// Reaction coefficient.
    #[serde(default)]
    pub a0: Expr,
    /// Load.
    #[serde(default)]
    pub f: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectName {
    All,
    West,
    East,
    South,
    North,
    InnerVertical,
    InnerHorizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionName {
    Dirichlet,
    Neumann,
    Signorini,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryEntry {
    pub id: String,
    pub select: SelectName,
    /// Tangential coordinate range along the selected side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    pub condition: ConditionName,
    /// Boundary value, flux or gap.
    #[serde(default)]
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Expr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeName {
    Free,
    Nonnegative,
    Nonpositive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionConfig {
    pub g: Expr,
    /// `"domain"` or the id of a boundary segment.
    #[serde(default = "domain_word")]
    pub on: String,
    /// Sign cone on every unknown (cone-constrained problems only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone: Option<ConeName>,
}

fn domain_word() -> String {
    "domain".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerConfig {
    pub gamma: f64,
    #[serde(default = "one")]
    pub beta: f64,
    pub target: Expr,
    /// Condition selecting observed nodes.
    #[serde(default = "always")]
    pub observe: String,
    #[serde(default = "unbounded")]
    pub control_box: [f64; 2],
}

fn one() -> f64 {
    1.0
}

fn always() -> String {
    "true".into()
}

fn unbounded() -> [f64; 2] {
    [f64::NEG_INFINITY, f64::INFINITY]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnepConfig {
    pub players: Vec<PlayerConfig>,
    #[serde(default = "neg_inf")]
    pub state_lower: Expr,
    #[serde(default = "pos_inf")]
    pub state_upper: Expr,
    /// Feasible samples drawn by the equilibrium check.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "one")]
    pub tau0: f64,
    #[serde(default = "half")]
    pub shrink: f64,
    #[serde(default = "armijo")]
    pub sigma: f64,
    #[serde(default = "tau_floor")]
    pub tau_min: f64,
}

fn neg_inf() -> Expr {
    Expr::Number(f64::NEG_INFINITY)
}

fn pos_inf() -> Expr {
    Expr::Number(f64::INFINITY)
}

fn default_samples() -> usize {
    500
}

fn half() -> f64 {
    0.5
}

fn armijo() -> f64 {
    1e-4
}

fn tau_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Option<String>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// PSOR relaxation factor.
    pub omega: Option<f64>,
    /// Active-set / semismooth Newton indicator scaling.
    pub c: Option<f64>,
    /// Tolerance the verifier applies to the final residuals.
    pub verify_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dir() -> String {
    "output".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshConfig>,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub boundary: Vec<BoundaryEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<ObstacleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<FrictionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnep: Option<GnepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<FixtureConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn methods(problem: ProblemKind) -> &'static [&'static str] {
    match problem {
        ProblemKind::Poisson => &["direct"],
        ProblemKind::Obstacle | ProblemKind::Signorini => &["pdas", "psor"],
        ProblemKind::Tresca | ProblemKind::Vi3 => &["newton", "uzawa"],
        ProblemKind::Gnep => &["relaxation"],
        ProblemKind::Fixture => &["study"],
    }
}

impl RunConfig {
    /// A config with every optional section empty.
    pub fn blank(problem: ProblemKind) -> Self {
        Self {
            problem,
            mesh: None,
            coefficients: CoefficientConfig::default(),
            boundary: Vec::new(),
            obstacle: None,
            friction: None,
            gnep: None,
            fixture: None,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.effective()
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks the schema rules serde cannot express and fills every default.
    pub fn effective(mut self) -> Result<Self, CliError> {
        let p = self.problem;
        if p != ProblemKind::Fixture {
            let mesh = self
                .mesh
                .as_ref()
                .ok_or_else(|| ConfigError::new("mesh", "section is required"))?;
            let dim = if mesh.domain == DomainName::Interval { 1 } else { 2 };
            if mesh.extents.len() != dim || mesh.n.len() != dim {
                return Err(ConfigError::new("mesh", format!("{:?} needs {dim} extents and {dim} sizes", mesh.domain)).into());
            }
            if self.coefficients.a.is_empty() {
                self.coefficients.a = vec![Expr::Number(1.0); dim];
            } else if self.coefficients.a.len() != dim {
                return Err(ConfigError::new("coefficients.a", format!("expected {dim} entries")).into());
            }
            if self.boundary.is_empty() {
                self.boundary.push(BoundaryEntry {
                    id: "boundary".into(),
                    select: SelectName::All,
                    range: None,
                    condition: ConditionName::Dirichlet,
                    value: Expr::Number(0.0),
                });
            }
        }
        let need = |present: bool, key: &str| -> Result<(), ConfigError> {
            if present {
                Ok(())
            } else {
                Err(ConfigError::new(key, format!("section is required for problem `{}`", problem_name(p))))
            }
        };
        match p {
            ProblemKind::Obstacle => need(self.obstacle.is_some(), "obstacle")?,
            ProblemKind::Tresca | ProblemKind::Vi3 => need(self.friction.is_some(), "friction")?,
            ProblemKind::Gnep => need(self.gnep.is_some(), "gnep")?,
            ProblemKind::Fixture => need(self.fixture.is_some(), "fixture")?,
            _ => {}
        }
        if p == ProblemKind::Vi3 {
            let fr = self.friction.as_mut().expect("checked above");
            fr.cone.get_or_insert(ConeName::Nonnegative);
        }
        if p == ProblemKind::Tresca && self.friction.as_ref().is_some_and(|f| f.cone.is_some()) {
            return Err(ConfigError::new("friction.cone", "only cone-constrained (vi3) problems take a cone").into());
        }
        let allowed = methods(p);
        let method = self.solver.method.get_or_insert_with(|| allowed[0].to_string());
        if !allowed.contains(&method.as_str()) {
            return Err(ConfigError::new(
                "solver.method",
                format!("`{method}` is not available for `{}`; choose one of {allowed:?}", problem_name(p)),
            )
            .into());
        }
        let (tol, verify) = match p {
            ProblemKind::Gnep => (1e-8, 1e-6),
            ProblemKind::Poisson => (1e-10, 1e-8),
            _ => (1e-8, 1e-8),
        };
        let tol = *self.solver.tol.get_or_insert(tol);
        self.solver.verify_tol.get_or_insert(verify);
        if !(tol > 0.0) {
            return Err(ConfigError::new("solver.tol", "must be positive").into());
        }
        if self.solver.max_iter == Some(0) {
            return Err(ConfigError::new("solver.max_iter", "must be at least 1").into());
        }
        if let Some(fx) = &self.fixture {
            regvi_core::fixtures::case_by_name(&fx.name).map_err(|e| ConfigError::new("fixture.name", e.to_string()))?;
            if fx.levels.as_ref().is_some_and(|l| l.len() < 3) {
                return Err(ConfigError::new("fixture.levels", "at least 3 refinement levels are required").into());
            }
        }
        if let Some(g) = &self.gnep {
            if g.players.is_empty() {
                return Err(ConfigError::new("gnep.players", "at least one player is required").into());
            }
        }
        Ok(self)
    }
}

pub fn problem_name(p: ProblemKind) -> &'static str {
    match p {
        ProblemKind::Poisson => "poisson",
        ProblemKind::Obstacle => "obstacle",
        ProblemKind::Signorini => "signorini",
        ProblemKind::Tresca => "tresca",
        ProblemKind::Vi3 => "vi3",
        ProblemKind::Gnep => "gnep",
        ProblemKind::Fixture => "fixture",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
problem = "poisson"
[mesh]
domain = "interval"
extents = [[0.0, 1.0]]
n = [7]
"#;

    #[test]
    fn defaults_are_expanded() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.coefficients.a, vec![Expr::Number(1.0)]);
        assert_eq!(cfg.boundary.len(), 1);
        assert_eq!(cfg.solver.method.as_deref(), Some("direct"));
        assert_eq!(cfg.solver.tol, Some(1e-10));
        assert_eq!(cfg.output.formats, vec![Format::Csv, Format::Json]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[solver]\ntolerance = 1e-3\n");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("tolerance"), "{err}");
    }

    #[test]
    fn wrong_method_names_the_key() {
        let text = format!("{MINIMAL}\n[solver]\nmethod = \"psor\"\n");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("solver.method"));
    }

    #[test]
    fn missing_problem_section() {
        let text = MINIMAL.replace("poisson", "obstacle");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("obstacle"));
    }

    #[test]
    fn dimension_checks() {
        let text = MINIMAL.replace("n = [7]", "n = [7, 7]");
        assert!(RunConfig::from_toml(&text).is_err());
    }
}
