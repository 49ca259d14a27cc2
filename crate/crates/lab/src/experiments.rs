//! Experiment drivers.
//!
//! [`execute`] computes every record of an experiment in memory and
//! [`write_outputs`] lays them out on disk:
//!
//! ```text
//! <output_dir>/<experiment>/seed-<k>.csv   per-seed records
//! <output_dir>/<experiment>/aggregate.csv  median and quartiles per (method, step, metric)
//! <output_dir>/<experiment>/summary.csv    cross-seed rows (seed = "all") and checks
//! ```
//!
//! Learning runs use the stream seed of `(experiment, seed)`; all methods of
//! one seed share it. Experiments built on exact value iteration are
//! deterministic and ignore the seed, so their per-seed files repeat the
//! same numbers.
//!
//! A check is either a bound check, whose failure makes the run exit with
//! status 2, or a finding, which records whether a qualitative outcome was
//! reproduced and never changes the exit status.

use std::path::{Path, PathBuf};

use mnm_core::bounds::{default_horizon, BOUND_TOL};
use mnm_core::environments::{
    build_gridworld, build_windy_three_state, relocate_goal, AliasMap, GO_LEFT, GO_RIGHT,
    WINDY_MIDDLE,
};
use mnm_core::mdp::{
    expected_return, reach_probability, return_variance, solve_optimal, Reward, TabularMdp, TabularPolicy,
};
use mnm_core::solvers::{
    mnm_q_learning, mnm_value_iteration, q_learning, ClassifierSource, LearningCurve, QLearningConfig,
    SolverConfig, Variant,
};
use mnm_core::MnmError;
use rayon::prelude::*;

use crate::config::{ClassifierName, ExperimentConfig, ExperimentKind, Method, MethodName};
use crate::error::{LabError, Result, EXIT_BOUND_FAILURE, EXIT_OK};
use crate::records::{
    aggregate, aggregate_to_csv_bytes, flag, nearest_rank, to_csv_bytes, AggregateRow, RunRecord, SeedLabel,
};
use crate::seeding::stream_seed;
use crate::verify;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckKind {
    Bound,
    Finding,
    /// Reported only.
    Informational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, kind: CheckKind, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind,
            passed,
            detail: detail.into(),
        }
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    /// Per-seed records in configured seed order.
    pub per_seed: Vec<(u64, Vec<RunRecord>)>,
    /// Cross-seed rows.
    pub summary: Vec<RunRecord>,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let all: Vec<RunRecord> = self.per_seed.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
        aggregate(&all)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Summary rows followed by one row per check (method `check`).
    pub fn summary_records(&self) -> Vec<RunRecord> {
        let name = self.kind.name();
        let mut rows = self.summary.clone();
        rows.extend(
            self.checks
                .iter()
                .map(|c| RunRecord::new(name, SeedLabel::All, "check", 0, &c.name, flag(c.passed))),
        );
        rows
    }

    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.kind == CheckKind::Bound && !c.passed) {
            EXIT_BOUND_FAILURE
        } else {
            EXIT_OK
        }
    }
}

/// Runs the experiment and writes its CSV files.
pub fn run(config: &ExperimentConfig) -> Result<(ExperimentOutput, Vec<PathBuf>)> {
    let output = execute(config)?;
    let files = write_outputs(&config.output_dir(), &output)?;
    Ok((output, files))
}

pub fn execute(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.experiment.name {
        ExperimentKind::GridworldCurves | ExperimentKind::Ablation => curves(config),
        ExperimentKind::Aliasing => aliasing(config),
        ExperimentKind::ThreeState => three_state(config),
        ExperimentKind::BoundTrace => bound_trace(config),
        ExperimentKind::Transfer => transfer(config),
        ExperimentKind::VerifyBounds => verify_bounds(config),
    }
}

/// Learning curves for `{mnm, no_log, no_classifier}` with the ablation findings.
pub fn emit_ablation(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut config = config.clone();
    config.experiment.name = ExperimentKind::Ablation;
    execute(&config)
}

pub fn write_outputs(root: &Path, output: &ExperimentOutput) -> Result<Vec<PathBuf>> {
    let dir = root.join(output.kind.name());
    std::fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    let mut files = Vec::new();
    let mut write = |name: String, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| LabError::io(&path, e))?;
        files.push(path);
        Ok(())
    };
    for (seed, records) in &output.per_seed {
        write(format!("seed-{seed}.csv"), to_csv_bytes(records)?)?;
    }
    write("aggregate.csv".into(), aggregate_to_csv_bytes(&output.aggregate())?)?;
    write("summary.csv".into(), to_csv_bytes(&output.summary_records())?)?;
    Ok(files)
}

fn run_error(kind: ExperimentKind, method: &str, seed: u64) -> impl Fn(MnmError) -> LabError + '_ {
    move |source| LabError::Run {
        experiment: kind.name().to_string(),
        method: method.to_string(),
        seed,
        source,
    }
}

fn optimal_return(mdp: &TabularMdp) -> std::result::Result<f64, MnmError> {
    let opt = solve_optimal(mdp.dynamics(), Reward::StateAction(mdp.rewards()), mdp.discount())?;
    expected_return(mdp, &opt.policy)
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    nearest_rank(&sorted, 0.5)
}

/// Per-seed rows of one learning curve.
fn curve_records(
    kind: ExperimentKind,
    seed: u64,
    method: &str,
    curve: &LearningCurve,
    target: f64,
    episodes: usize,
) -> Vec<RunRecord> {
    let name = kind.name();
    let label = SeedLabel::Seed(seed);
    let mut rows: Vec<RunRecord> = curve
        .points
        .iter()
        .map(|&(e, r)| RunRecord::new(name, label, method, e, "return", r))
        .collect();
    let reached = curve.episodes_to_reach(target).map_or(f64::INFINITY, |e| e as f64);
    rows.push(RunRecord::new(name, label, method, episodes, "episodes_to_threshold", reached));
    rows.push(RunRecord::new(
        name,
        label,
        method,
        episodes,
        "final_return",
        curve.final_return().unwrap_or(f64::NAN),
    ));
    rows
}

/// Cross-seed medians of a learner's threshold episode and final return.
#[derive(Debug, Clone, Copy)]
struct CurveSummary {
    episodes: f64,
    final_return: f64,
}

fn summarize_curves(
    kind: ExperimentKind,
    method: &str,
    curves: &[&LearningCurve],
    target: f64,
    episodes: usize,
    summary: &mut Vec<RunRecord>,
) -> CurveSummary {
    let reached: Vec<f64> = curves
        .iter()
        .map(|c| c.episodes_to_reach(target).map_or(f64::INFINITY, |e| e as f64))
        .collect();
    let finals: Vec<f64> = curves.iter().map(|c| c.final_return().unwrap_or(f64::NAN)).collect();
    let s = CurveSummary {
        episodes: median(&reached),
        final_return: median(&finals),
    };
    let name = kind.name();
    summary.push(RunRecord::new(name, SeedLabel::All, method, episodes, "median_episodes_to_threshold", s.episodes));
    summary.push(RunRecord::new(name, SeedLabel::All, method, episodes, "median_final_return", s.final_return));
    s
}

fn run_curve(
    mdp: &TabularMdp,
    config: &ExperimentConfig,
    method: Method,
    qcfg: &QLearningConfig,
    seed: u64,
) -> Result<LearningCurve> {
    let kind = config.experiment.name;
    let stream = stream_seed(kind.name(), seed);
    match method {
        Method::QLearning => q_learning(mdp, qcfg, stream, None),
        Method::Variant(v) => mnm_q_learning(mdp, &config.solver.solver(v), qcfg, stream, None),
    }
    .map_err(run_error(kind, method.name(), seed))
}

fn curve_methods(config: &ExperimentConfig) -> Result<Vec<Method>> {
    config
        .methods()?
        .into_iter()
        .map(|m| match m {
            MethodName::Curve(c) => Ok(c),
            MethodName::Fixed(n) => Err(LabError::Config(format!("`{n}` is not a learner"))),
        })
        .collect()
}

fn curves(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let mdp = build_gridworld(&config.gridworld()?)?;
    let j_star = optimal_return(&mdp).map_err(run_error(kind, "optimal", 0))?;
    let target = config.qlearning.threshold * j_star;
    let qcfg = config.qlearning.qlearning();
    let methods = curve_methods(config)?;
    let runs: Vec<(u64, Vec<LearningCurve>)> = config
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| {
            let curves = methods
                .iter()
                .map(|&m| run_curve(&mdp, config, m, &qcfg, seed))
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, curves))
        })
        .collect::<Result<_>>()?;

    let per_seed = runs
        .iter()
        .map(|(seed, curves)| {
            let rows = methods
                .iter()
                .zip(curves)
                .flat_map(|(m, c)| curve_records(kind, *seed, m.name(), c, target, qcfg.episodes))
                .collect();
            (*seed, rows)
        })
        .collect();

    let mut summary = vec![RunRecord::new(kind.name(), SeedLabel::All, "optimal", 0, "optimal_return", j_star)];
    let stats: Vec<(Method, CurveSummary)> = methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let cs: Vec<&LearningCurve> = runs.iter().map(|(_, c)| &c[i]).collect();
            (m, summarize_curves(kind, m.name(), &cs, target, qcfg.episodes, &mut summary))
        })
        .collect();
    let find = |name: &str| stats.iter().find(|(m, _)| m.name() == name).map(|(_, s)| *s);

    let mut checks = Vec::new();
    if let Some(mnm) = find("mnm") {
        match kind {
            ExperimentKind::Ablation => {
                if let Some(nl) = find("no_log") {
                    checks.push(Check::new(
                        "no_log_worse",
                        CheckKind::Finding,
                        nl.final_return < mnm.final_return,
                        format!("no_log final median {} vs mnm {}", nl.final_return, mnm.final_return),
                    ));
                }
                if let Some(nc) = find("no_classifier") {
                    let gap = (nc.final_return - mnm.final_return).abs() / mnm.final_return.abs();
                    checks.push(Check::new(
                        "no_classifier_near",
                        CheckKind::Finding,
                        gap <= config.ablation.band,
                        format!("relative gap {gap} against band {}", config.ablation.band),
                    ));
                }
            }
            _ => {
                for (m, s) in &stats {
                    if m.name() == "mnm" {
                        continue;
                    }
                    checks.push(Check::new(
                        format!("mnm_final_ge_{}", m.name()),
                        CheckKind::Finding,
                        mnm.final_return >= s.final_return,
                        format!("final median {} vs {}", mnm.final_return, s.final_return),
                    ));
                    checks.push(Check::new(
                        format!("mnm_episodes_le_{}", m.name()),
                        CheckKind::Finding,
                        mnm.episodes <= s.episodes,
                        format!("median episodes to threshold {} vs {}", mnm.episodes, s.episodes),
                    ));
                }
            }
        }
    }
    Ok(ExperimentOutput {
        kind,
        per_seed,
        summary,
        checks,
    })
}

/// Repeats seed-independent rows for every configured seed.
fn replicate(kind: ExperimentKind, seeds: &[u64], rows: &[(String, usize, String, f64)]) -> Vec<(u64, Vec<RunRecord>)> {
    seeds
        .iter()
        .map(|&seed| {
            let records = rows
                .iter()
                .map(|(method, step, metric, value)| {
                    RunRecord::new(kind.name(), SeedLabel::Seed(seed), method, *step, metric, *value)
                })
                .collect();
            (seed, records)
        })
        .collect()
}

fn solver_variants(config: &ExperimentConfig) -> Result<Vec<Variant>> {
    curve_methods(config)?
        .into_iter()
        .map(|m| match m {
            Method::Variant(v) => Ok(v),
            Method::QLearning => Err(LabError::Config(format!(
                "q-learning is not available in {}",
                config.experiment.name
            ))),
        })
        .collect()
}

fn aliasing(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let grid = config.gridworld()?;
    let mdp = build_gridworld(&grid)?;
    let alias = AliasMap::new(&grid, config.aliasing.block_size)?;
    let source = match config.aliasing.classifier {
        ClassifierName::Exact => ClassifierSource::Exact,
        ClassifierName::Restricted => ClassifierSource::Restricted(alias.clone()),
    };
    let goal = grid.state(grid.goal);
    let mut rows = Vec::new();
    let mut success = Vec::new();
    for v in solver_variants(config)? {
        let solver = SolverConfig {
            smoothing: config.aliasing.smoothing,
            ..config.solver.solver(v)
        };
        let result = mnm_value_iteration(&mdp, &solver, &source, Some(&alias)).map_err(run_error(kind, v.name(), 0))?;
        let reach = reach_probability(mdp.dynamics(), &result.policy, mdp.initial(), goal, config.aliasing.success_steps);
        let j = expected_return(&mdp, &result.policy).map_err(run_error(kind, v.name(), 0))?;
        let ok = reach >= 0.5;
        let name = v.name().to_string();
        rows.push((name.clone(), 0, "reach_probability".to_string(), reach));
        rows.push((name.clone(), 0, "success".to_string(), flag(ok)));
        rows.push((name.clone(), 0, "expected_return".to_string(), j));
        rows.push((name.clone(), 0, "iterations".to_string(), result.trace.len() as f64));
        rows.push((name, 0, "converged".to_string(), flag(result.converged)));
        success.push((v, ok));
    }
    let summary = success
        .iter()
        .map(|(v, ok)| RunRecord::new(kind.name(), SeedLabel::All, v.name(), 0, "success", flag(*ok)))
        .collect();
    let mut checks = Vec::new();
    for (v, ok) in &success {
        match v {
            Variant::Mnm => checks.push(Check::new("mnm_reaches_goal", CheckKind::Finding, *ok, format!("success {ok}"))),
            Variant::NoClassifier => checks.push(Check::new(
                "no_classifier_fails",
                CheckKind::Finding,
                !ok,
                format!("success {ok}"),
            )),
            _ => {}
        }
    }
    Ok(ExperimentOutput {
        kind,
        per_seed: replicate(kind, &config.experiment.seeds, &rows),
        summary,
        checks,
    })
}

fn three_state(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let mdp = build_windy_three_state(&config.windy.windy())?;
    let err = |m: &'static str| run_error(kind, m, 0);
    let left = TabularPolicy::deterministic(2, &[GO_LEFT; 3])?;
    let right = TabularPolicy::deterministic(2, &[GO_RIGHT; 3])?;
    let (j_left, j_right) = (
        expected_return(&mdp, &left).map_err(err("left"))?,
        expected_return(&mdp, &right).map_err(err("right"))?,
    );
    let (var_left, var_right) = (
        return_variance(&mdp, &left).map_err(err("left"))?,
        return_variance(&mdp, &right).map_err(err("right"))?,
    );
    let mut rows = vec![
        ("left".to_string(), 0, "expected_return".to_string(), j_left),
        ("right".to_string(), 0, "expected_return".to_string(), j_right),
        ("left".to_string(), 0, "return_variance".to_string(), var_left),
        ("right".to_string(), 0, "return_variance".to_string(), var_right),
    ];
    let mut checks = vec![
        Check::new(
            "expected_return_left_gt_right",
            CheckKind::Finding,
            j_left > j_right,
            format!("J(left) {j_left} vs J(right) {j_right}"),
        ),
        Check::new(
            "variance_right_gt_left",
            CheckKind::Finding,
            var_right > var_left,
            format!("Var(right) {var_right} vs Var(left) {var_left}"),
        ),
    ];
    let mut summary = Vec::new();
    for v in solver_variants(config)? {
        let result = mnm_value_iteration(&mdp, &config.solver.solver(v), &ClassifierSource::Exact, None)
            .map_err(run_error(kind, v.name(), 0))?;
        let goes_right = result.policy.mode()[WINDY_MIDDLE] == GO_RIGHT;
        let j = expected_return(&mdp, &result.policy).map_err(run_error(kind, v.name(), 0))?;
        let name = v.name().to_string();
        rows.push((name.clone(), 0, "prefers_right".to_string(), flag(goes_right)));
        rows.push((name.clone(), 0, "expected_return".to_string(), j));
        rows.push((name, 0, "iterations".to_string(), result.trace.len() as f64));
        summary.push(RunRecord::new(kind.name(), SeedLabel::All, v.name(), 0, "prefers_right", flag(goes_right)));
        let expected_right = match v {
            Variant::Mnm | Variant::NoClassifier => Some(false),
            Variant::Vmbpo | Variant::NoLog => Some(true),
        };
        if let Some(want) = expected_right {
            let side = if want { "right" } else { "left" };
            checks.push(Check::new(
                format!("{}_prefers_{side}", v.name()),
                CheckKind::Finding,
                goes_right == want,
                format!("action at the middle state: {}", if goes_right { "right" } else { "left" }),
            ));
        }
    }
    Ok(ExperimentOutput {
        kind,
        per_seed: replicate(kind, &config.experiment.seeds, &rows),
        summary,
        checks,
    })
}

fn bound_trace(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let mdp = build_gridworld(&config.gridworld()?)?;
    let horizon = config.bound_trace.horizon.unwrap_or_else(|| default_horizon(&mdp));
    let eta = config.bound_trace.eta;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut summary = Vec::new();
    for v in solver_variants(config)? {
        let solver = SolverConfig {
            trace_vmbpo: Some((eta, horizon)),
            ..config.solver.solver(v)
        };
        let result = mnm_value_iteration(&mdp, &solver, &ClassifierSource::Exact, None)
            .map_err(run_error(kind, v.name(), 0))?;
        let mut lower_ok = 0usize;
        let mut upper_ok = 0usize;
        for r in &result.trace {
            let (lo, hi) = r.vmbpo.unwrap_or((f64::NAN, f64::NAN));
            let name = v.name().to_string();
            rows.push((name.clone(), r.iteration, "L_mnm".to_string(), r.objective_l));
            rows.push((name.clone(), r.iteration, "log_J".to_string(), r.log_return));
            rows.push((name.clone(), r.iteration, "vmbpo_obj".to_string(), lo));
            rows.push((name, r.iteration, "vmbpo_obj_upper".to_string(), hi));
            lower_ok += usize::from(r.objective_l <= r.log_return + BOUND_TOL);
            upper_ok += usize::from(lo >= r.log_return - BOUND_TOL);
        }
        let n = result.trace.len();
        summary.push(RunRecord::new(kind.name(), SeedLabel::All, v.name(), 0, "iterations", n as f64));
        if v == Variant::Mnm {
            checks.push(Check::new(
                "mnm_lower_bound_every_iteration",
                CheckKind::Bound,
                lower_ok == n && n > 0,
                format!("{lower_ok}/{n} iterations with L_mnm <= log_J"),
            ));
        }
        checks.push(Check::new(
            format!("{}_vmbpo_above_log_j_every_iteration", v.name()),
            CheckKind::Bound,
            upper_ok == n && n > 0,
            format!("{upper_ok}/{n} iterations with vmbpo_obj >= log_J"),
        ));
    }
    Ok(ExperimentOutput {
        kind,
        per_seed: replicate(kind, &config.experiment.seeds, &rows),
        summary,
        checks,
    })
}

fn transfer(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let grid = config.gridworld()?;
    let mdp = build_gridworld(&grid)?;
    let source = mnm_value_iteration(&mdp, &config.solver.solver(Variant::Mnm), &ClassifierSource::Exact, None)
        .map_err(run_error(kind, "source", 0))?
        .model;
    let qcfg = QLearningConfig {
        episodes: config.transfer.episodes,
        ..config.qlearning.qlearning()
    };
    let mnm_solver = config.solver.solver(Variant::Mnm);

    struct Task {
        name: String,
        mdp: TabularMdp,
        target: f64,
    }
    let tasks = config
        .task_cells()
        .into_iter()
        .map(|(name, cell)| {
            let task = relocate_goal(&mdp, &grid, cell)?;
            let j_star = optimal_return(&task).map_err(run_error(kind, &name, 0))?;
            Ok(Task {
                target: config.qlearning.threshold * j_star,
                name,
                mdp: task,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Per seed: for each task, (transferred, true) curves.
    let runs: Vec<(u64, Vec<(LearningCurve, LearningCurve)>)> = config
        .experiment
        .seeds
        .par_iter()
        .map(|&seed| {
            let stream = stream_seed(kind.name(), seed);
            let per_task = tasks
                .iter()
                .map(|t| {
                    let moved = mnm_q_learning(&t.mdp, &mnm_solver, &qcfg, stream, Some(&source))
                        .map_err(run_error(kind, "transferred", seed))?;
                    let plain = q_learning(&t.mdp, &qcfg, stream, None).map_err(run_error(kind, "true", seed))?;
                    Ok((moved, plain))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, per_task))
        })
        .collect::<Result<_>>()?;

    let per_seed = runs
        .iter()
        .map(|(seed, per_task)| {
            let mut rows = Vec::new();
            for (t, (moved, plain)) in tasks.iter().zip(per_task) {
                rows.extend(curve_records(kind, *seed, &format!("transferred-{}", t.name), moved, t.target, qcfg.episodes));
                rows.extend(curve_records(kind, *seed, &format!("true-{}", t.name), plain, t.target, qcfg.episodes));
            }
            (*seed, rows)
        })
        .collect();

    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        let moved: Vec<&LearningCurve> = runs.iter().map(|(_, r)| &r[i].0).collect();
        let plain: Vec<&LearningCurve> = runs.iter().map(|(_, r)| &r[i].1).collect();
        let m = summarize_curves(kind, &format!("transferred-{}", t.name), &moved, t.target, qcfg.episodes, &mut summary);
        let p = summarize_curves(kind, &format!("true-{}", t.name), &plain, t.target, qcfg.episodes, &mut summary);
        let (m_solved, p_solved) = (m.episodes.is_finite(), p.episodes.is_finite());
        let detail = format!("median episodes to threshold: transferred {} true {}", m.episodes, p.episodes);
        if t.name == config.transfer.challenging {
            checks.push(Check::new(
                format!("{}_transferred_solves", t.name),
                CheckKind::Finding,
                m_solved,
                detail.clone(),
            ));
            checks.push(Check::new(format!("{}_true_fails", t.name), CheckKind::Finding, !p_solved, detail));
        } else {
            checks.push(Check::new(
                format!("{}_no_gap", t.name),
                CheckKind::Finding,
                m_solved == p_solved,
                detail,
            ));
        }
    }
    Ok(ExperimentOutput {
        kind,
        per_seed,
        summary,
        checks,
    })
}

fn verify_bounds(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let kind = config.experiment.name;
    let seeds = &config.experiment.seeds;
    let reports: Vec<(u64, Vec<verify::SuiteReport>)> = seeds
        .par_iter()
        .map(|&seed| {
            let reports = verify::Suite::ALL
                .iter()
                .map(|s| {
                    s.run(seed, config.verify.cases, config.verify.tol)
                        .map_err(run_error(kind, s.name(), seed))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((seed, reports))
        })
        .collect::<Result<_>>()?;

    let name = kind.name();
    let per_seed = reports
        .iter()
        .map(|(seed, suites)| {
            let label = SeedLabel::Seed(*seed);
            let rows = suites
                .iter()
                .flat_map(|r| {
                    [
                        RunRecord::new(name, label, r.name, 0, "cases", r.cases as f64),
                        RunRecord::new(name, label, r.name, 0, "failures", r.failures as f64),
                        RunRecord::new(name, label, r.name, 0, "worst_margin", r.worst_margin.unwrap_or(f64::NAN)),
                    ]
                })
                .collect();
            (*seed, rows)
        })
        .collect();

    let mut summary = Vec::new();
    let mut checks = Vec::new();
    for (i, suite) in verify::Suite::ALL.iter().enumerate() {
        let cases: usize = reports.iter().map(|(_, r)| r[i].cases).sum();
        let failures: usize = reports.iter().map(|(_, r)| r[i].failures).sum();
        let worst = reports
            .iter()
            .filter_map(|(_, r)| r[i].worst_margin)
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
        summary.push(RunRecord::new(name, SeedLabel::All, suite.name(), 0, "cases", cases as f64));
        summary.push(RunRecord::new(name, SeedLabel::All, suite.name(), 0, "failures", failures as f64));
        let kind = if suite.informational() {
            CheckKind::Informational
        } else {
            CheckKind::Bound
        };
        let worst_text = worst.map_or_else(|| "-".to_string(), |w| format!("{w:e}"));
        checks.push(Check::new(
            suite.name(),
            kind,
            failures == 0,
            format!("{failures}/{cases} failures, worst margin {worst_text}"),
        ));
    }
    Ok(ExperimentOutput {
        kind,
        per_seed,
        summary,
        checks,
    })
}
