//! TOML experiment configuration.
//!
//! Every table rejects unknown keys. A minimal file needs only the
//! `[experiment]` table:
//!
//! ```toml
//! [experiment]
//! name = "gridworld-curves"
//! seeds = [0, 1, 2, 3, 4]
//! ```
//!
//! Custom environments live in their own TOML file referenced by
//! `environment.file` (relative paths resolve against the config file):
//!
//! ```toml
//! rows = ["S..#....", "...#....", ".......G"]
//! noise = 0.5
//! discount = 0.9
//!
//! [scheme]
//! kind = "step-goal"
//! step = 0.001
//! goal = 10.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use mnm_core::environments::{preset, Cell, GridworldConfig, RewardScheme, WindyConfig, TRANSFER_GOALS};
use mnm_core::solvers::{QLearningConfig, SolverConfig, StopRule, TiltRefresh, Variant};
use serde::Deserialize;

use crate::error::{LabError, Result};

/// Environment variable that overrides `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "MNM_LAB_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GridworldCurves,
    Aliasing,
    ThreeState,
    BoundTrace,
    Transfer,
    Ablation,
    VerifyBounds,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::GridworldCurves,
        ExperimentKind::Aliasing,
        ExperimentKind::ThreeState,
        ExperimentKind::BoundTrace,
        ExperimentKind::Transfer,
        ExperimentKind::Ablation,
        ExperimentKind::VerifyBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::GridworldCurves => "gridworld-curves",
            ExperimentKind::Aliasing => "aliasing",
            ExperimentKind::ThreeState => "three-state",
            ExperimentKind::BoundTrace => "bound-trace",
            ExperimentKind::Transfer => "transfer",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::VerifyBounds => "verify-bounds",
        }
    }

    fn default_preset(self) -> &'static str {
        match self {
            ExperimentKind::Aliasing => "aliased-15",
            ExperimentKind::BoundTrace => "bound-trace",
            _ => "stochastic-d2",
        }
    }

    fn default_methods(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::GridworldCurves => &["mnm", "q-learning", "vmbpo"],
            ExperimentKind::Aliasing => &["mnm", "no_classifier"],
            ExperimentKind::ThreeState => &["mnm", "vmbpo", "no_log"],
            ExperimentKind::Ablation => &["mnm", "no_log", "no_classifier"],
            ExperimentKind::BoundTrace => &["mnm"],
            ExperimentKind::Transfer => &["transferred", "true"],
            ExperimentKind::VerifyBounds => &[],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A learner in a curve experiment: an augmented-reward variant or plain
/// Q-learning on the true reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Variant(Variant),
    QLearning,
}

impl Method {
    pub fn parse(name: &str) -> Result<Self> {
        if name == "q-learning" {
            return Ok(Method::QLearning);
        }
        name.parse::<Variant>()
            .map(Method::Variant)
            .map_err(|_| LabError::Config(format!("unknown method `{name}`")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Variant(v) => v.name(),
            Method::QLearning => "q-learning",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: ExperimentKind,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub methods: Option<Vec<String>>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopRuleName {
    MaxAbs,
    ChangedCount,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub polyak: f64,
    pub stop_tol: f64,
    pub max_iters: usize,
    pub smoothing: f64,
    pub vmbpo_eta: f64,
    pub stop_rule: StopRuleName,
    /// Entry-change threshold of the `changed-count` rule.
    pub changed_threshold: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            polyak: d.polyak,
            stop_tol: d.stop_tol,
            max_iters: d.max_iters,
            smoothing: d.smoothing,
            vmbpo_eta: d.vmbpo_eta,
            stop_rule: StopRuleName::MaxAbs,
            changed_threshold: 1e-9,
        }
    }
}

impl SolverSection {
    pub fn solver(&self, variant: Variant) -> SolverConfig {
        SolverConfig {
            variant,
            polyak: self.polyak,
            stop_tol: self.stop_tol,
            max_iters: self.max_iters,
            smoothing: self.smoothing,
            vmbpo_eta: self.vmbpo_eta,
            stop_rule: match self.stop_rule {
                StopRuleName::MaxAbs => StopRule::MaxAbs,
                StopRuleName::ChangedCount => StopRule::ChangedCount {
                    threshold: self.changed_threshold,
                },
            },
            trace_vmbpo: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefreshName {
    Episode,
    Step,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningSection {
    pub epsilon: f64,
    pub learning_rate: f64,
    pub episodes: usize,
    pub episode_length: usize,
    pub eval_every: usize,
    pub analytic_dynamics: bool,
    pub refresh: RefreshName,
    /// Fraction of the optimal return that counts as solving the task.
    pub threshold: f64,
}

impl Default for QLearningSection {
    fn default() -> Self {
        let d = QLearningConfig::default();
        Self {
            epsilon: d.epsilon,
            learning_rate: d.learning_rate,
            episodes: 10_000,
            episode_length: d.episode_length,
            eval_every: d.eval_every,
            analytic_dynamics: d.analytic_dynamics,
            refresh: RefreshName::Episode,
            threshold: 0.95,
        }
    }
}

impl QLearningSection {
    pub fn qlearning(&self) -> QLearningConfig {
        QLearningConfig {
            epsilon: self.epsilon,
            learning_rate: self.learning_rate,
            episodes: self.episodes,
            episode_length: self.episode_length,
            eval_every: self.eval_every,
            analytic_dynamics: self.analytic_dynamics,
            refresh: match self.refresh {
                RefreshName::Episode => TiltRefresh::PerEpisode,
                RefreshName::Step => TiltRefresh::PerStep,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierName {
    Exact,
    Restricted,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AliasingSection {
    pub block_size: usize,
    pub smoothing: f64,
    pub classifier: ClassifierName,
    /// Steps within which the greedy policy must reach the goal.
    pub success_steps: usize,
}

impl Default for AliasingSection {
    fn default() -> Self {
        Self {
            block_size: 3,
            smoothing: 0.7,
            classifier: ClassifierName::Restricted,
            success_steps: 200,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindySection {
    pub reward_left: f64,
    pub reward_middle: f64,
    pub reward_right: f64,
    pub wind_prob: f64,
    pub discount: f64,
    /// Horizon of the return-variance enumeration.
    pub variance_horizon: usize,
}

impl Default for WindySection {
    fn default() -> Self {
        let d = WindyConfig::default();
        Self {
            reward_left: d.reward_left,
            reward_middle: d.reward_middle,
            reward_right: d.reward_right,
            wind_prob: d.wind_prob,
            discount: d.discount,
            variance_horizon: 30,
        }
    }
}

impl WindySection {
    pub fn windy(&self) -> WindyConfig {
        WindyConfig {
            reward_left: self.reward_left,
            reward_middle: self.reward_middle,
            reward_right: self.reward_right,
            wind_prob: self.wind_prob,
            discount: self.discount,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundTraceSection {
    pub eta: f64,
    /// Horizon of the exponentiated-return recursion; by default the
    /// smallest one whose truncation error is below 1e-6, capped at 60.
    pub horizon: Option<usize>,
}

impl Default for BoundTraceSection {
    fn default() -> Self {
        Self {
            eta: 1.0,
            horizon: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub name: String,
    /// `[row, col]`.
    pub goal: [usize; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    /// Episode budget of every transfer run; overrides `qlearning.episodes`.
    pub episodes: usize,
    pub tasks: Vec<TaskSpec>,
    /// Task expected to be solved only with the transferred dynamics.
    pub challenging: String,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            episodes: 13_000,
            tasks: TRANSFER_GOALS
                .iter()
                .map(|(name, cell)| TaskSpec {
                    name: (*name).to_string(),
                    goal: [cell.row, cell.col],
                })
                .collect(),
            challenging: "C".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// Largest relative gap between the `no_classifier` and `mnm` final
    /// median returns still counted as "near".
    pub band: f64,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { band: 0.1 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Random instances per suite.
    pub cases: usize,
    pub tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            cases: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub environment: EnvironmentSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub qlearning: QLearningSection,
    #[serde(default)]
    pub aliasing: AliasingSection,
    #[serde(default)]
    pub windy: WindySection,
    #[serde(default)]
    pub bound_trace: BoundTraceSection,
    #[serde(default)]
    pub transfer: TransferSection,
    #[serde(default)]
    pub ablation: AblationSection,
    #[serde(default)]
    pub verify: VerifySection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let mut config: ExperimentConfig = toml::from_str(text).map_err(|source| LabError::Parse {
            path: origin.to_path_buf(),
            source,
        })?;
        config.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_toml(&text, path)
    }

    /// A config with every table at its default.
    pub fn with_defaults(kind: ExperimentKind, seeds: Vec<u64>) -> Self {
        Self {
            experiment: ExperimentSection {
                name: kind,
                seeds,
                output_dir: default_output_dir(),
                methods: None,
            },
            environment: EnvironmentSection::default(),
            solver: SolverSection::default(),
            qlearning: QLearningSection::default(),
            aliasing: AliasingSection::default(),
            windy: WindySection::default(),
            bound_trace: BoundTraceSection::default(),
            transfer: TransferSection::default(),
            ablation: AblationSection::default(),
            verify: VerifySection::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.seeds.is_empty() {
            return Err(LabError::Config("at least one seed is required".into()));
        }
        let mut seeds = self.experiment.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.experiment.seeds.len() {
            return Err(LabError::Config("seeds must be distinct".into()));
        }
        if self.environment.preset.is_some() && self.environment.file.is_some() {
            return Err(LabError::Config(
                "environment.preset and environment.file are mutually exclusive".into(),
            ));
        }
        self.solver.solver(Variant::Mnm).validate()?;
        self.qlearning.qlearning().validate()?;
        if !(self.qlearning.threshold > 0.0 && self.qlearning.threshold <= 1.0) {
            return Err(LabError::Config("qlearning.threshold must lie in (0, 1]".into()));
        }
        if self.aliasing.block_size == 0 {
            return Err(LabError::Config("aliasing.block_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.aliasing.smoothing) {
            return Err(LabError::Config("aliasing.smoothing must lie in [0, 1)".into()));
        }
        self.windy.windy().validate()?;
        if !(self.bound_trace.eta > 0.0) {
            return Err(LabError::Config("bound_trace.eta must be positive".into()));
        }
        if self.transfer.tasks.is_empty() {
            return Err(LabError::Config("transfer.tasks must not be empty".into()));
        }
        if self.verify.cases == 0 || !(self.verify.tol >= 0.0) {
            return Err(LabError::Config("verify.cases must be positive and verify.tol non-negative".into()));
        }
        for method in self.methods()? {
            let allowed = match (self.experiment.name, method) {
                (_, MethodName::Fixed(_)) => true,
                (ExperimentKind::GridworldCurves | ExperimentKind::Ablation, _) => true,
                (_, MethodName::Curve(m)) => matches!(m, Method::Variant(_)),
            };
            if !allowed {
                return Err(LabError::Config(format!(
                    "method `{}` is not available in {}",
                    method.name(),
                    self.experiment.name
                )));
            }
        }
        Ok(())
    }

    /// Methods to run, from `experiment.methods` or the experiment's default set.
    pub fn methods(&self) -> Result<Vec<MethodName>> {
        let kind = self.experiment.name;
        match &self.experiment.methods {
            None => Ok(kind
                .default_methods()
                .iter()
                .map(|m| {
                    Method::parse(m)
                        .map(MethodName::Curve)
                        .unwrap_or(MethodName::Fixed(m))
                })
                .collect()),
            Some(names) if matches!(kind, ExperimentKind::Transfer | ExperimentKind::VerifyBounds) => {
                Err(LabError::Config(format!(
                    "{kind} does not take a method list (got {names:?})"
                )))
            }
            Some(names) => names.iter().map(|n| Method::parse(n).map(MethodName::Curve)).collect(),
        }
    }

    /// The gridworld this experiment runs on.
    pub fn gridworld(&self) -> Result<GridworldConfig> {
        if let Some(file) = &self.environment.file {
            let path = self.base_dir.join(file);
            return load_environment(&path);
        }
        let name = self
            .environment
            .preset
            .as_deref()
            .unwrap_or(self.experiment.name.default_preset());
        Ok(preset(name)?)
    }

    pub fn task_cells(&self) -> Vec<(String, Cell)> {
        self.transfer
            .tasks
            .iter()
            .map(|t| (t.name.clone(), Cell::new(t.goal[0], t.goal[1])))
            .collect()
    }

    /// `experiment.output_dir`, or the override from [`OUTPUT_DIR_ENV`].
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.base_dir.join(&self.experiment.output_dir),
        }
    }
}

/// A configured method: a curve learner, or a fixed role name such as the
/// transfer experiment's `transferred` and `true` arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodName {
    Curve(Method),
    Fixed(&'static str),
}

impl MethodName {
    pub fn name(self) -> &'static str {
        match self {
            MethodName::Curve(m) => m.name(),
            MethodName::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum SchemeSpec {
    StepGoal { step: f64, goal: f64 },
    UnitStepGoal { step: f64, goal: f64 },
    Manhattan { away: f64, same: f64, toward: f64 },
}

impl From<SchemeSpec> for RewardScheme {
    fn from(spec: SchemeSpec) -> Self {
        match spec {
            SchemeSpec::StepGoal { step, goal } => RewardScheme::StepGoal { step, goal },
            SchemeSpec::UnitStepGoal { step, goal } => RewardScheme::UnitStepGoal { step, goal },
            SchemeSpec::Manhattan { away, same, toward } => RewardScheme::Manhattan { away, same, toward },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvironmentFile {
    rows: Vec<String>,
    noise: f64,
    discount: f64,
    scheme: SchemeSpec,
}

/// Parses a custom gridworld file; see the module docs for the schema.
pub fn parse_environment(text: &str, origin: &Path) -> Result<GridworldConfig> {
    let file: EnvironmentFile = toml::from_str(text).map_err(|source| LabError::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    Ok(GridworldConfig::from_rows(
        &file.rows,
        file.noise,
        file.scheme.into(),
        file.discount,
    )?)
}

pub fn load_environment(path: &Path) -> Result<GridworldConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_environment(&text, path)
}
