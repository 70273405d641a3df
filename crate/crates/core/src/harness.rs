//! Monte-Carlo experiment: drops, displacement steps, muting schemes and
//! the aggregated metrics.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::absf::{
    aggregate_per_henb, required_henb_rates_least_norm, required_rates_least_norm, victim_requirements,
    MutedRateRequirement, MutingPlan,
};
use crate::coalition::{align_coalition_patterns, collect_victim_sets, group_coalitions, Coalition, VictimSets};
use crate::config::{ConfigError, FrameConfig, RateEngine, ScenarioConfig};
use crate::deployment::{advance_step_with, generate_scenario, DeploymentError, Scenario};
use crate::propagation::{PropagationError, Shadowing, ShadowingField};
use crate::radio::{build_gain_matrix_with, compute_sinr, detect_aggressors, AggressorSets, SinrReport, TxPowers};
use crate::units::linear_to_db;

/// An MUE counts as unsatisfied when its post-muting SINR is more than this
/// far below the threshold.
pub const SINR_TOLERANCE_DB: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("at least one scheme is required")]
    NoSchemes,
    #[error("invalid scheme `{0}` (expected proposed, none, or fixed:<rate in [0,1]>)")]
    Scheme(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run {run}, step {step}, scheme {scheme}: {message}")]
    Run {
        run: usize,
        step: usize,
        scheme: String,
        message: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SchemeKind {
    Proposed,
    FixedRate(f64),
    NoAbsf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scheme {
    pub kind: SchemeKind,
    pub label: String,
}

impl Scheme {
    pub fn proposed() -> Self {
        Self {
            kind: SchemeKind::Proposed,
            label: "proposed".into(),
        }
    }

    pub fn fixed(alpha: f64) -> Self {
        Self {
            kind: SchemeKind::FixedRate(alpha),
            label: format!("fixed:{alpha}"),
        }
    }

    pub fn none() -> Self {
        Self {
            kind: SchemeKind::NoAbsf,
            label: "none".into(),
        }
    }

    /// Proposed, the three fixed baselines (0.1, 0.2, 0.3) and no muting.
    pub fn defaults() -> Vec<Scheme> {
        vec![
            Self::proposed(),
            Self::fixed(0.1),
            Self::fixed(0.2),
            Self::fixed(0.3),
            Self::none(),
        ]
    }

    /// Comma-separated list, e.g. `proposed,fixed:0.1,none`.
    pub fn parse_list(s: &str) -> Result<Vec<Scheme>, HarnessError> {
        let list = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Scheme::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        if list.is_empty() {
            return Err(HarnessError::NoSchemes);
        }
        Ok(list)
    }
}

impl FromStr for Scheme {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "proposed" => return Ok(Self::proposed()),
            "none" | "no_absf" => return Ok(Self::none()),
            _ => {}
        }
        let rate = lower
            .strip_prefix("fixed:")
            .or_else(|| lower.strip_prefix("fixed="))
            .and_then(|r| r.parse::<f64>().ok())
            .filter(|a| (0.0..=1.0).contains(a))
            .ok_or_else(|| HarnessError::Scheme(s.to_string()))?;
        Ok(Self::fixed(rate))
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Everything the muting schemes need from one drop at one step.
#[derive(Debug, Clone)]
pub struct DropAnalysis {
    pub report: SinrReport,
    pub aggressors: AggressorSets,
    /// One per victim, in victim order.
    pub requirements: Vec<MutedRateRequirement>,
    pub victim_sets: VictimSets,
    pub coalitions: Vec<Coalition>,
    /// Per-HeNB rate of the proposed scheme before alignment.
    pub henb_rates: Vec<f64>,
    /// Fallbacks taken by the least-norm engines.
    pub diagnostics: Vec<String>,
}

impl DropAnalysis {
    pub fn infeasible(&self) -> Vec<bool> {
        let mut out = vec![false; self.report.num_mues()];
        for r in &self.requirements {
            out[r.mue] = !r.feasible;
        }
        out
    }
}

/// Victims, rates and coalitions for an already computed SINR report.
pub fn analyze_report(report: SinrReport, config: &ScenarioConfig) -> DropAnalysis {
    let aggressors = detect_aggressors(&report, config.muting.aggressor_fraction);
    let mut diagnostics = Vec::new();
    let requirements = match config.muting.engine {
        RateEngine::LeastNorm => {
            let (reqs, fallbacks) = required_rates_least_norm(&report, &aggressors);
            if !fallbacks.is_empty() {
                let ids: Vec<String> = fallbacks.iter().map(|id| id.to_string()).collect();
                diagnostics.push(format!(
                    "least-norm system singular for MUE {}; used closed form",
                    ids.join(",")
                ));
            }
            reqs
        }
        _ => victim_requirements(&report, &aggressors),
    };
    let victim_sets = collect_victim_sets(&report.victims, &aggressors, report.num_henbs());
    let coalitions = group_coalitions(&victim_sets);
    let mut henb_rates = aggregate_per_henb(&requirements, &victim_sets);
    if config.muting.engine == RateEngine::LeastNormPerHenb && !report.victims.is_empty() {
        match required_henb_rates_least_norm(&report, &aggressors) {
            Ok(rates) => henb_rates = rates,
            Err(e) => diagnostics.push(format!("per-HeNB least-norm failed ({e}); used closed form")),
        }
    }
    DropAnalysis {
        report,
        aggressors,
        requirements,
        victim_sets,
        coalitions,
        henb_rates,
        diagnostics,
    }
}

pub fn analyze_drop(scenario: &Scenario, shadowing: &dyn Shadowing) -> Result<DropAnalysis, PropagationError> {
    let gains = build_gain_matrix_with(scenario, shadowing)?;
    let powers = TxPowers::from_config(&scenario.config, gains.henb_ids.len());
    let report = compute_sinr(&gains, &powers, scenario.config.sinr_threshold);
    Ok(analyze_report(report, &scenario.config))
}

/// Muting plan of `scheme`. Aggressor patterns are coalition-aligned for the
/// proposed and the fixed-rate schemes alike.
pub fn plan_for(scheme: &Scheme, analysis: &DropAnalysis, config: &ScenarioConfig) -> MutingPlan {
    let frame = &config.frame;
    let nf = analysis.report.num_henbs();
    let rates = match scheme.kind {
        SchemeKind::NoAbsf => return MutingPlan::silent(nf, frame),
        SchemeKind::Proposed => analysis.henb_rates.clone(),
        SchemeKind::FixedRate(alpha) => (0..nf)
            .map(|f| {
                if analysis.victim_sets.is_aggressor(f) {
                    alpha
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let offset = config.muting.pattern_offset % frame.subframes;
    let plan = MutingPlan::from_rates(rates, frame, offset);
    align_coalition_patterns(
        &analysis.coalitions,
        &plan,
        frame,
        offset,
        config.muting.stagger_coalitions,
    )
}

/// Frame-averaged SINR of every MUE with each HeNB's interference scaled by
/// `1 - blanked fraction` of its pattern.
pub fn post_muting_gamma(report: &SinrReport, plan: &MutingPlan) -> Vec<f64> {
    let rates = plan.applied_rates();
    (0..report.num_mues()).map(|m| report.muted_gamma(m, &rates)).collect()
}

pub fn is_satisfied(gamma: f64, gamma0: f64) -> bool {
    linear_to_db(gamma) >= linear_to_db(gamma0) - SINR_TOLERANCE_DB
}

/// Fraction of all MUEs whose post-muting SINR stays below threshold.
/// MUEs flagged in `excluded` are not counted as unsatisfied.
pub fn score_outage(post_gamma: &[f64], gamma0: f64, excluded: &[bool]) -> f64 {
    if post_gamma.is_empty() {
        return 0.0;
    }
    let bad = post_gamma
        .iter()
        .enumerate()
        .filter(|&(m, &g)| !is_satisfied(g, gamma0) && !excluded.get(m).copied().unwrap_or(false))
        .count();
    bad as f64 / post_gamma.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Throughput {
    pub mue_kbps: Vec<f64>,
    pub fue_kbps: Vec<f64>,
}

/// Shannon-rate throughput over one radio frame.
///
/// Each MUE gets an equal `1/M` share of the band in every subframe; its SINR
/// in subframe `s` excludes the HeNBs blanked in `s`. With aligned patterns
/// this is `share * B * (beta log2(1 + gamma_blank) + (1 - beta) log2(1 + gamma))`
/// where `beta` is the fraction of subframes in which all of the MUE's
/// aggressors are silent. An FUE gets the full band whenever its HeNB is not
/// blanked.
pub fn score_throughput(report: &SinrReport, plan: &MutingPlan, frame: &FrameConfig, bandwidth: f64) -> Throughput {
    let nm = report.num_mues();
    let nf = report.num_henbs();
    let ns = frame.subframes;
    let share = if nm > 0 { 1.0 / nm as f64 } else { 0.0 };
    let mue_kbps = (0..nm)
        .map(|m| {
            let per_subframe: f64 = (0..ns)
                .map(|s| {
                    let i: f64 = (0..nf)
                        .filter(|&f| !plan.patterns[f].is_blanked(s))
                        .map(|f| report.interference[(m, f)])
                        .sum();
                    (1.0 + report.signal[m] / (i + report.noise[m])).log2()
                })
                .sum();
            share * bandwidth * per_subframe / ns as f64 / 1e3
        })
        .collect();
    let fue_kbps = (0..nf)
        .map(|f| bandwidth * (1.0 + report.fue_gamma[f]).log2() * (1.0 - plan.patterns[f].rate()) / 1e3)
        .collect();
    Throughput { mue_kbps, fue_kbps }
}

/// Fraction of subframes in which every HeNB in `aggressors` is blanked.
pub fn protected_fraction(plan: &MutingPlan, aggressors: &[usize], frame: &FrameConfig) -> f64 {
    if aggressors.is_empty() {
        return 0.0;
    }
    let n = frame.subframes;
    let hits = (0..n)
        .filter(|&s| aggressors.iter().all(|&f| plan.patterns[f].is_blanked(s)))
        .count();
    hits as f64 / n as f64
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-drop, per-scheme scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DropScore {
    pub sinr_pre_db: f64,
    pub sinr_post_db: f64,
    /// Mean rate granted to the victims (0 without victims).
    pub muted_rate: f64,
    pub mue_throughput_kbps: f64,
    pub fue_throughput_kbps: f64,
    pub outage: f64,
    pub victims: f64,
    /// Victims that no muting can rescue, as a fraction of all MUEs.
    pub infeasible: f64,
}

pub fn score_drop(scheme: &Scheme, analysis: &DropAnalysis, plan: &MutingPlan, config: &ScenarioConfig) -> DropScore {
    let report = &analysis.report;
    let nm = report.num_mues();
    let post = post_muting_gamma(report, plan);
    let infeasible = analysis.infeasible();
    let excluded = match scheme.kind {
        SchemeKind::Proposed => infeasible.clone(),
        _ => vec![false; nm],
    };
    let tput = score_throughput(report, plan, &config.frame, config.bandwidth);
    let muted_rate = match scheme.kind {
        SchemeKind::NoAbsf => 0.0,
        _ if analysis.requirements.is_empty() => 0.0,
        SchemeKind::Proposed => mean(analysis.requirements.iter().map(|r| r.alpha)),
        SchemeKind::FixedRate(alpha) => alpha,
    };
    DropScore {
        sinr_pre_db: mean(report.gamma_db.iter().copied()),
        sinr_post_db: mean(post.iter().map(|&g| linear_to_db(g))),
        muted_rate,
        mue_throughput_kbps: mean(tput.mue_kbps.iter().copied()),
        fue_throughput_kbps: mean(tput.fue_kbps.iter().copied()),
        outage: score_outage(&post, report.gamma0, &excluded),
        victims: report.victims.len() as f64,
        infeasible: infeasible.iter().filter(|&&x| x).count() as f64 / nm.max(1) as f64,
    }
}

/// Scores of one run: `scores[step][scheme]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub run: usize,
    pub scores: Vec<Vec<DropScore>>,
    pub min_distance: Vec<Option<f64>>,
}

/// Simulate one run over all steps.
pub fn run_single(config: &ScenarioConfig, schemes: &[Scheme], run: usize) -> Result<RunTrace, HarnessError> {
    let fail = |step: usize, message: String| HarnessError::Run {
        run,
        step,
        scheme: "-".into(),
        message,
    };
    let mut scenario = generate_scenario(config, run).map_err(|e| fail(0, e.to_string()))?;
    let shadowing = ShadowingField::for_scenario(&scenario);
    let mut scores = Vec::with_capacity(config.num_steps + 1);
    let mut min_distance = Vec::with_capacity(config.num_steps + 1);
    for step in 0..=config.num_steps {
        if step > 0 {
            scenario =
                advance_step_with(&scenario, &shadowing).map_err(|e: DeploymentError| fail(step, e.to_string()))?;
        }
        let analysis = analyze_drop(&scenario, &shadowing).map_err(|e| fail(step, e.to_string()))?;
        let row = schemes
            .iter()
            .map(|s| {
                let plan = plan_for(s, &analysis, config);
                score_drop(s, &analysis, &plan, config)
            })
            .collect();
        scores.push(row);
        min_distance.push(scenario.min_mue_henb_distance());
    }
    Ok(RunTrace {
        run,
        scores,
        min_distance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct MetricSummary {
    pub mean: f64,
    pub stddev: f64,
    pub n: usize,
}

impl MetricSummary {
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stddev = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stddev, n }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.stddev / (self.n as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepMetrics {
    pub step: usize,
    pub sinr_pre_db: MetricSummary,
    pub sinr_post_db: MetricSummary,
    pub muted_rate: MetricSummary,
    pub mue_throughput_kbps: MetricSummary,
    pub fue_throughput_kbps: MetricSummary,
    pub outage: MetricSummary,
    pub victims: MetricSummary,
    pub infeasible: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeTrace {
    pub scheme: Scheme,
    pub steps: Vec<StepMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub run: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub runs_requested: usize,
    pub runs_completed: usize,
    pub failures: Vec<RunFailure>,
    pub schemes: Vec<SchemeTrace>,
    /// Mean over runs of the smallest MUE-HeNB distance at each step (m).
    pub min_mue_henb_distance: Vec<MetricSummary>,
}

impl MetricsReport {
    pub fn scheme(&self, label: &str) -> Option<&SchemeTrace> {
        self.schemes.iter().find(|s| s.scheme.label == label)
    }
}

pub fn run_experiment(
    config: &ScenarioConfig,
    schemes: &[Scheme],
    workers: usize,
) -> Result<MetricsReport, HarnessError> {
    run_experiment_with_progress(config, schemes, workers, &|_| {})
}

/// Run all drops, `workers` at a time, and reduce in run order so the result
/// does not depend on the worker count. `progress` is called with each
/// finished run index.
pub fn run_experiment_with_progress(
    config: &ScenarioConfig,
    schemes: &[Scheme],
    workers: usize,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<MetricsReport, HarnessError> {
    if schemes.is_empty() {
        return Err(HarnessError::NoSchemes);
    }
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let results: Vec<Result<RunTrace, HarnessError>> = pool.install(|| {
        (0..config.num_runs)
            .into_par_iter()
            .map(|run| {
                let r = run_single(config, schemes, run);
                progress(run);
                r
            })
            .collect()
    });
    let mut traces = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (run, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => traces.push(t),
            Err(e) => failures.push(RunFailure {
                run,
                message: e.to_string(),
            }),
        }
    }
    Ok(aggregate(config, schemes, &traces, failures))
}

pub fn aggregate(
    config: &ScenarioConfig,
    schemes: &[Scheme],
    traces: &[RunTrace],
    failures: Vec<RunFailure>,
) -> MetricsReport {
    let steps = config.num_steps + 1;
    let column = |step: usize, k: usize, pick: fn(&DropScore) -> f64| -> MetricSummary {
        let xs: Vec<f64> = traces.iter().map(|t| pick(&t.scores[step][k])).collect();
        MetricSummary::from_values(&xs)
    };
    let scheme_traces = schemes
        .iter()
        .enumerate()
        .map(|(k, scheme)| SchemeTrace {
            scheme: scheme.clone(),
            steps: (0..steps)
                .map(|step| StepMetrics {
                    step,
                    sinr_pre_db: column(step, k, |d| d.sinr_pre_db),
                    sinr_post_db: column(step, k, |d| d.sinr_post_db),
                    muted_rate: column(step, k, |d| d.muted_rate),
                    mue_throughput_kbps: column(step, k, |d| d.mue_throughput_kbps),
                    fue_throughput_kbps: column(step, k, |d| d.fue_throughput_kbps),
                    outage: column(step, k, |d| d.outage),
                    victims: column(step, k, |d| d.victims),
                    infeasible: column(step, k, |d| d.infeasible),
                })
                .collect(),
        })
        .collect();
    let min_mue_henb_distance = (0..steps)
        .map(|step| {
            let xs: Vec<f64> = traces.iter().filter_map(|t| t.min_distance[step]).collect();
            MetricSummary::from_values(&xs)
        })
        .collect();
    MetricsReport {
        config: config.clone(),
        seed: config.rng_seed,
        runs_requested: config.num_runs,
        runs_completed: traces.len(),
        failures,
        schemes: scheme_traces,
        min_mue_henb_distance,
    }
}

/// File names of the per-metric CSVs, in the order they are written.
pub const CSV_FILES: [&str; 5] = [
    "muted_rate.csv",
    "sinr.csv",
    "mue_throughput.csv",
    "fue_throughput.csv",
    "outage.csv",
];

pub const SUMMARY_FILE: &str = "summary.json";

fn csv_rows(out: &mut String, label: &str, steps: &[StepMetrics], pick: fn(&StepMetrics) -> MetricSummary) {
    use std::fmt::Write as _;
    for s in steps {
        let m = pick(s);
        writeln!(out, "{label},{},{},{},{}", s.step, m.mean, m.stddev, m.n).unwrap();
    }
}

impl MetricsReport {
    /// CSV text per metric family, keyed by file name. Columns:
    /// `scheme,step,mean,stddev,n`. `sinr.csv` holds post-muting SINR per
    /// scheme plus the unmuted SINR under the label `unmuted`.
    pub fn csv_documents(&self) -> Vec<(&'static str, String)> {
        let header = "scheme,step,mean,stddev,n\n";
        let family = |pick: fn(&StepMetrics) -> MetricSummary| {
            let mut out = header.to_string();
            for t in &self.schemes {
                csv_rows(&mut out, &t.scheme.label, &t.steps, pick);
            }
            out
        };
        let mut sinr = family(|s| s.sinr_post_db);
        if let Some(first) = self.schemes.first() {
            csv_rows(&mut sinr, "unmuted", &first.steps, |s| s.sinr_pre_db);
        }
        vec![
            (CSV_FILES[0], family(|s| s.muted_rate)),
            (CSV_FILES[1], sinr),
            (CSV_FILES[2], family(|s| s.mue_throughput_kbps)),
            (CSV_FILES[3], family(|s| s.fue_throughput_kbps)),
            (CSV_FILES[4], family(|s| s.outage)),
        ]
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Write the five CSVs and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let write = |name: &str, body: &str| {
            let path = dir.join(name);
            fs::File::create(&path)
                .and_then(|mut f| f.write_all(body.as_bytes()))
                .map_err(|source| HarnessError::Io {
                    path: path.display().to_string(),
                    source,
                })
        };
        for (name, body) in self.csv_documents() {
            write(name, &body)?;
        }
        write(SUMMARY_FILE, &self.summary_json())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absf::quantize_pattern;
    use crate::deployment::NodeId;
    use crate::radio::PathGainMatrix;
    use nalgebra::DMatrix;

    fn report(signal: Vec<f64>, cross: Vec<Vec<f64>>, fue_gamma: f64) -> SinrReport {
        let nm = signal.len();
        let nf = cross.first().map_or(0, Vec::len);
        let g = PathGainMatrix {
            mue_ids: (0..nm as u32).map(|i| NodeId(1 + i)).collect(),
            henb_ids: (0..nf as u32).map(|i| NodeId(50 + i)).collect(),
            fue_ids: (0..nf as u32).map(|i| NodeId(90 + i)).collect(),
            serving_gain: signal,
            cross_gain: DMatrix::from_fn(nm, nf, |m, f| cross[m][f]),
            fue_serving_gain: vec![fue_gamma; nf],
            fue_macro_gain: vec![0.0; nf],
            fue_cross_gain: DMatrix::zeros(nf, nf),
            noise_mw: 1.0,
        };
        compute_sinr(
            &g,
            &TxPowers {
                menb_mw: 1.0,
                henb_mw: vec![1.0; nf],
            },
            0.0,
        )
    }

    #[test]
    fn scheme_parsing() {
        let list = Scheme::parse_list("proposed, fixed:0.1,none").unwrap();
        assert_eq!(list, vec![Scheme::proposed(), Scheme::fixed(0.1), Scheme::none()]);
        assert!(Scheme::parse_list("fixed:1.5").is_err());
        assert!(Scheme::parse_list("bogus").is_err());
        assert!(matches!(Scheme::parse_list(""), Err(HarnessError::NoSchemes)));
        assert_eq!(Scheme::fixed(0.3).to_string(), "fixed:0.3");
    }

    #[test]
    fn unit_sinr_full_band() {
        // One MUE, no HeNBs, gamma = 1.
        let r = report(vec![1.0], vec![vec![]], 1.0);
        let frame = FrameConfig::default();
        let t = score_throughput(&r, &MutingPlan::silent(0, &frame), &frame, 10e6);
        assert!((t.mue_kbps[0] - 1e4).abs() < 1e-9);
    }

    #[test]
    fn fully_blanked_fue_gets_nothing() {
        let r = report(vec![1.0], vec![vec![0.5]], 3.0);
        let frame = FrameConfig::default();
        let plan = MutingPlan::from_rates(vec![1.0], &frame, 0);
        let t = score_throughput(&r, &plan, &frame, 10e6);
        assert_eq!(t.fue_kbps[0], 0.0);
    }

    #[test]
    fn fue_throughput_scales_with_blanked_fraction() {
        let r = report(vec![1.0], vec![vec![0.5]], 3.0);
        let frame = FrameConfig::default();
        let full = score_throughput(&r, &MutingPlan::silent(1, &frame), &frame, 10e6).fue_kbps[0];
        let plan = MutingPlan::from_rates(vec![0.3], &frame, 0);
        let muted = score_throughput(&r, &plan, &frame, 10e6).fue_kbps[0];
        assert!((muted - 0.7 * full).abs() < 1e-9);
        assert!((full - 1e4 * 2.0).abs() < 1e-9);
    }

    #[test]
    fn aligned_blanking_protects_two_tenths() {
        let frame = FrameConfig::default();
        let mut plan = MutingPlan::silent(2, &frame);
        plan.patterns = vec![quantize_pattern(0.2, &frame, 0); 2];
        assert_eq!(protected_fraction(&plan, &[0, 1], &frame), 0.2);
        // Misaligned patterns protect nothing.
        plan.patterns[1] = quantize_pattern(0.2, &frame, 5);
        assert_eq!(protected_fraction(&plan, &[0, 1], &frame), 0.0);
    }

    #[test]
    fn mue_throughput_matches_beta_formula() {
        // Signal 5, aggressor 9, noise 1, blanked 2/10 of the frame.
        let r = report(vec![5.0], vec![vec![9.0]], 1.0);
        let frame = FrameConfig::default();
        let plan = MutingPlan::from_rates(vec![0.2], &frame, 0);
        let t = score_throughput(&r, &plan, &frame, 10e6);
        let beta = 0.2;
        let expect = 10e6 * (beta * (1.0f64 + 5.0).log2() + (1.0 - beta) * (1.0f64 + 0.5).log2()) / 1e3;
        assert!((t.mue_kbps[0] - expect).abs() < 1e-9);
    }

    #[test]
    fn outage_definition() {
        let g = vec![2.0; 10];
        assert_eq!(score_outage(&g, 1.0, &[]), 0.0);
        let mut g = vec![2.0; 10];
        g[0] = 0.5;
        g[3] = 0.2;
        g[7] = 0.9;
        assert!((score_outage(&g, 1.0, &[]) - 0.3).abs() < 1e-15);
        let mut excl = vec![false; 10];
        excl[3] = true;
        assert!((score_outage(&g, 1.0, &excl) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn fixed_rate_leaves_outage_where_proposed_does_not() {
        // Victim needs 5/9 of the frame blanked.
        let r = report(vec![5.0], vec![vec![9.0]], 1.0);
        let cfg = ScenarioConfig::default();
        let analysis = analyze_report(r, &cfg);
        let proposed = plan_for(&Scheme::proposed(), &analysis, &cfg);
        let fixed = plan_for(&Scheme::fixed(0.1), &analysis, &cfg);
        let g0 = analysis.report.gamma0;
        assert_eq!(
            score_outage(&post_muting_gamma(&analysis.report, &proposed), g0, &[]),
            0.0
        );
        assert_eq!(score_outage(&post_muting_gamma(&analysis.report, &fixed), g0, &[]), 1.0);
        assert_eq!(proposed.patterns[0].popcount(), 6);
    }

    #[test]
    fn summary_statistics() {
        let s = MetricSummary::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.stddev - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(s.n, 4);
        assert_eq!(MetricSummary::from_values(&[7.0]).stddev, 0.0);
    }

    #[test]
    fn small_experiment_is_deterministic_across_worker_counts() {
        let cfg = ScenarioConfig {
            num_runs: 6,
            num_steps: 3,
            ..Default::default()
        };
        let a = run_experiment(&cfg, &Scheme::defaults(), 1).unwrap();
        let b = run_experiment(&cfg, &Scheme::defaults(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs_completed, 6);
        assert_eq!(a.schemes.len(), 5);
        assert_eq!(a.schemes[0].steps.len(), 4);
        for t in &a.schemes {
            for s in &t.steps {
                assert!(s.mue_throughput_kbps.mean >= 0.0);
                assert!(s.fue_throughput_kbps.mean >= 0.0);
                assert!((0.0..=1.0).contains(&s.outage.mean));
            }
        }
        let docs = a.csv_documents();
        assert_eq!(docs.len(), 5);
        assert!(docs
            .iter()
            .all(|(_, body)| body.starts_with("scheme,step,mean,stddev,n\n")));
    }

    #[test]
    fn no_femto_tier() {
        let cfg = ScenarioConfig {
            num_runs: 20,
            num_steps: 2,
            num_henbs: 0,
            ..Default::default()
        };
        let rep = run_experiment(&cfg, &[Scheme::none()], 1).unwrap();
        let t = &rep.schemes[0];
        for s in &t.steps {
            assert_eq!(s.muted_rate.mean, 0.0);
            assert_eq!(s.outage.mean, s.infeasible.mean);
        }
    }

    #[test]
    fn empty_scheme_list_rejected() {
        assert!(matches!(
            run_experiment(&ScenarioConfig::default(), &[], 1),
            Err(HarnessError::NoSchemes)
        ));
    }
}
