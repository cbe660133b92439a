use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{add_random_traversal, run_episode, EnvConfig, EpisodeOptions, EpisodeResult, Planner, SearchEnv, SearchMode};
use crate::error::{Error, SearchError};
use crate::graph::{NodeId, SceneGraph};
use crate::metrics::{quantile, BeliefSource};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchConfig {
    pub runs_per_graph: usize,
    /// The artifact class changes every this many runs.
    pub rotate_every: usize,
    pub modes: Vec<SearchMode>,
    pub env: EnvConfig,
    pub episode: EpisodeOptions,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            runs_per_graph: 10,
            rotate_every: 10,
            modes: vec![SearchMode::Single, SearchMode::Multi],
            env: EnvConfig::default(),
            episode: EpisodeOptions::default(),
            bootstrap_resamples: 2000,
            seed: 0,
        }
    }
}

/// One planner's episode together with where it ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub graph_id: String,
    pub run: usize,
    pub mode: SearchMode,
    pub alpha: String,
    pub start: NodeId,
    #[serde(flatten)]
    pub result: EpisodeResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: SearchMode,
    /// Paired runs (one episode per planner each).
    pub runs: usize,
    pub baseline_mean_cost: f64,
    pub bsg_mean_cost: f64,
    /// `(baseline − bsg) / baseline` in percent, from the mean costs.
    pub reduction_pct: f64,
    /// 95% paired-bootstrap interval of the reduction, percent.
    pub reduction_ci: [f64; 2],
    /// 95% paired-bootstrap interval of mean(baseline − bsg).
    pub mean_difference: f64,
    pub difference_ci: [f64; 2],
    pub baseline_success_rate: f64,
    pub bsg_success_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub graphs: usize,
    /// (graph, run) pairs skipped because no valid artifact/start existed.
    pub skipped_runs: usize,
    pub modes: Vec<ModeReport>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeRecord>,
}

impl BatchReport {
    pub fn mode(&self, mode: SearchMode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }

    /// One JSON object per line, ordered by (mode, graph, run, planner).
    pub fn episodes_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.episodes {
            out.push_str(&serde_json::to_string(e).expect("episode serializes"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    /// Plain-text summary table.
    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<7} {:>5} {:>10} {:>10} {:>9} {:>19}\n",
            "mode", "runs", "baseline", "bsg", "reduc%", "95% CI"
        );
        for m in &self.modes {
            out.push_str(&format!(
                "{:<7} {:>5} {:>10.3} {:>10.3} {:>9.2} [{:>7.2}, {:>7.2}]\n",
                m.mode.to_string(),
                m.runs,
                m.baseline_mean_cost,
                m.bsg_mean_cost,
                m.reduction_pct,
                m.reduction_ci[0],
                m.reduction_ci[1]
            ));
        }
        out
    }
}

/// `(base − other) / base` in percent; 0 when `base` is 0.
pub fn percentage_reduction(base: f64, other: f64) -> f64 {
    if base == 0.0 {
        0.0
    } else {
        100.0 * (base - other) / base
    }
}

/// Percentile intervals (2.5%, 97.5%) for the mean difference and the
/// percentage reduction, resampling run pairs with replacement.
pub fn paired_bootstrap(base: &[f64], other: &[f64], resamples: usize, seed: u64) -> ([f64; 2], [f64; 2]) {
    assert_eq!(base.len(), other.len(), "paired samples");
    let n = base.len();
    if n == 0 || resamples == 0 {
        return ([0.0; 2], [0.0; 2]);
    }
    let mut rng = rng::derive(seed, "bootstrap");
    let mut diffs = Vec::with_capacity(resamples);
    let mut reds = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let (mut sb, mut so) = (0.0, 0.0);
        for _ in 0..n {
            let i = rng.gen_range(0..n);
            sb += base[i];
            so += other[i];
        }
        diffs.push((sb - so) / n as f64);
        reds.push(percentage_reduction(sb, so));
    }
    diffs.sort_by(f64::total_cmp);
    reds.sort_by(f64::total_cmp);
    let ci = |v: &[f64]| [quantile(v, 0.025), quantile(v, 0.975)];
    (ci(&diffs), ci(&reds))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Classes present in `g` that leave at least one room free of them, in catalog order.
fn candidate_artifacts(g: &SceneGraph) -> Result<Vec<usize>, SearchError> {
    let rooms = g.room_ids();
    let hists = rooms
        .iter()
        .map(|r| g.node_histogram(r, false))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..g.catalog().len())
        .filter(|&i| hists.iter().any(|h| h.get(i) > 0) && hists.iter().any(|h| h.get(i) == 0))
        .collect())
}

/// Runs both planners on randomized environments built from `graphs`.
///
/// Per graph: traversal edges and costs are drawn once. Per run: a fresh
/// hidden-object draw and a random start room without the artifact. The
/// artifact cycles through the graph's classes every `rotate_every` runs,
/// starting from a random offset.
pub fn batch_eval(
    graphs: &[(String, SceneGraph)],
    source: &dyn BeliefSource,
    config: &BatchConfig,
) -> Result<BatchReport, Error> {
    if graphs.is_empty() {
        return Err(SearchError::EmptySplit.into());
    }
    config.env.check()?;
    if config.rotate_every == 0 {
        return Err(SearchError::InvalidEnv("rotate_every must be positive".into()).into());
    }
    let mut episodes = Vec::new();
    let mut skipped = 0;
    let mut modes = Vec::new();
    for &mode in &config.modes {
        let (mut base_costs, mut bsg_costs) = (Vec::new(), Vec::new());
        let (mut base_ok, mut bsg_ok) = (0usize, 0usize);
        for (graph_id, gt) in graphs {
            let env_graph = add_random_traversal(gt, &config.env, rng::derive_seed(config.seed, graph_id))?;
            let classes = candidate_artifacts(gt)?;
            if classes.is_empty() {
                if mode == config.modes[0] {
                    skipped += config.runs_per_graph;
                }
                continue;
            }
            let mut graph_rng = rng::derive(config.seed, &format!("{graph_id}/artifacts"));
            let offset = graph_rng.gen_range(0..classes.len());
            for run in 0..config.runs_per_graph {
                let alpha_idx = classes[(offset + run / config.rotate_every) % classes.len()];
                let alpha = gt.catalog().label(alpha_idx).unwrap_or_default().to_owned();
                let mut run_rng = rng::derive(config.seed, &format!("{graph_id}/run-{run}"));
                let starts: Vec<NodeId> = gt
                    .room_ids()
                    .into_iter()
                    .filter(|r| gt.node_histogram(r, false).map_or(false, |h| h.get(alpha_idx) == 0))
                    .collect();
                let start = starts.choose(&mut run_rng).expect("candidate classes leave a free room").clone();
                let hide_seed = run_rng.gen();
                let env = SearchEnv::new(env_graph.clone(), &alpha, start.clone(), mode, config.env.hidden_fraction, hide_seed)?;
                let base = run_episode(&env, Planner::Baseline, &config.episode)?;
                let bsg = run_episode(&env, Planner::Bsg(source), &config.episode)?;
                base_costs.push(base.cost);
                bsg_costs.push(bsg.cost);
                base_ok += usize::from(base.success);
                bsg_ok += usize::from(bsg.success);
                for result in [base, bsg] {
                    episodes.push(EpisodeRecord {
                        graph_id: graph_id.clone(),
                        run,
                        mode,
                        alpha: alpha.clone(),
                        start: start.clone(),
                        result,
                    });
                }
            }
        }
        let runs = base_costs.len();
        let (diff_ci, red_ci) = paired_bootstrap(
            &base_costs,
            &bsg_costs,
            config.bootstrap_resamples,
            rng::derive_seed(config.seed, &format!("bootstrap-{mode}")),
        );
        let (bm, sm) = (mean(&base_costs), mean(&bsg_costs));
        let rate = |k: usize| if runs == 0 { 0.0 } else { k as f64 / runs as f64 };
        modes.push(ModeReport {
            mode,
            runs,
            baseline_mean_cost: bm,
            bsg_mean_cost: sm,
            reduction_pct: percentage_reduction(bm, sm),
            reduction_ci: red_ci,
            mean_difference: bm - sm,
            difference_ci: diff_ci,
            baseline_success_rate: rate(base_ok),
            bsg_success_rate: rate(bsg_ok),
        });
    }
    Ok(BatchReport {
        graphs: graphs.len(),
        skipped_runs: skipped,
        modes,
        episodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_formula() {
        assert_eq!(percentage_reduction(10.0, 6.0), 40.0);
        assert_eq!(percentage_reduction(0.0, 0.0), 0.0);
    }

    #[test]
    fn bootstrap_of_identical_costs_is_zero() {
        let c = [3.0, 5.0, 8.0, 1.0];
        let (d, r) = paired_bootstrap(&c, &c, 500, 1);
        assert_eq!(d, [0.0, 0.0]);
        assert_eq!(r, [0.0, 0.0]);
    }

    #[test]
    fn bootstrap_interval_brackets_constant_shift() {
        let base: Vec<f64> = (0..50).map(|i| 10.0 + (i % 7) as f64).collect();
        let other: Vec<f64> = base.iter().map(|b| b - 2.0).collect();
        let (d, _) = paired_bootstrap(&base, &other, 300, 2);
        assert!((d[0] - 2.0).abs() < 1e-12 && (d[1] - 2.0).abs() < 1e-12);
    }
}
