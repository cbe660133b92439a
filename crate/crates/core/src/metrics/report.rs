use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{
    class_error_stats, correlation_frobenius, describe, energy_distance_1d, wasserstein_1d, CorrelationComparison,
    ErrorStats, MetricSummary,
};
use crate::ceci::{predict_histograms, CeciModel};
use crate::dataset::DatasetSample;
use crate::error::{Error, MetricError};
use crate::graph::{Layer, NodeId, SceneGraph};

/// Anything that produces per-node count predictions for a partial graph.
pub trait BeliefSource {
    /// Predicted counts for every building and room node of `partial`.
    /// `truth` is only consulted by oracle sources.
    fn histograms(&self, partial: &SceneGraph, truth: &SceneGraph) -> Result<BTreeMap<NodeId, Vec<f64>>, Error>;
}

impl BeliefSource for CeciModel {
    fn histograms(&self, partial: &SceneGraph, _truth: &SceneGraph) -> Result<BTreeMap<NodeId, Vec<f64>>, Error> {
        Ok(predict_histograms(self, partial, partial.catalog())?)
    }
}

/// Returns the ground-truth counts; every metric is zero against it.
#[derive(Clone, Copy, Debug, Default)]
pub struct OracleBeliefs;

impl BeliefSource for OracleBeliefs {
    fn histograms(&self, _partial: &SceneGraph, truth: &SceneGraph) -> Result<BTreeMap<NodeId, Vec<f64>>, Error> {
        truth
            .masked_ids()
            .into_iter()
            .map(|id| Ok((id.clone(), truth.node_histogram(&id, false)?.to_f64())))
            .collect()
    }
}

/// Predicts the mean training histogram of the node's layer, ignoring the input.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanBeliefs {
    pub building: Vec<f64>,
    pub room: Vec<f64>,
}

impl MeanBeliefs {
    pub fn fit(samples: &[DatasetSample]) -> Result<Self, Error> {
        let first = samples.first().ok_or(MetricError::TooFewSamples { need: 1, got: 0 })?;
        let n = first.ground_truth.catalog().len();
        let mut building = vec![0.0; n];
        let mut room = vec![0.0; n];
        let mut rooms = 0usize;
        for s in samples {
            let g = &s.ground_truth;
            for id in g.masked_ids() {
                let h = g.node_histogram(&id, false)?.to_f64();
                let target = if g.node(&id).map(|n| n.layer) == Some(Layer::Building) {
                    &mut building
                } else {
                    rooms += 1;
                    &mut room
                };
                for (t, v) in target.iter_mut().zip(h) {
                    *t += v;
                }
            }
        }
        building.iter_mut().for_each(|v| *v /= samples.len() as f64);
        room.iter_mut().for_each(|v| *v /= rooms.max(1) as f64);
        Ok(Self { building, room })
    }
}

impl BeliefSource for MeanBeliefs {
    fn histograms(&self, partial: &SceneGraph, _truth: &SceneGraph) -> Result<BTreeMap<NodeId, Vec<f64>>, Error> {
        Ok(partial
            .masked_ids()
            .into_iter()
            .map(|id| {
                let v = if partial.node(&id).map(|n| n.layer) == Some(Layer::Building) {
                    self.building.clone()
                } else {
                    self.room.clone()
                };
                (id, v)
            })
            .collect())
    }
}

/// Which masked nodes feed the distance and error statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// Building and room nodes together.
    #[default]
    Pooled,
    Rooms,
    Buildings,
}

impl Grouping {
    fn includes(self, layer: Layer) -> bool {
        match self {
            Grouping::Pooled => true,
            Grouping::Rooms => layer == Layer::Room,
            Grouping::Buildings => layer == Layer::Building,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassErrorRow {
    pub class: String,
    #[serde(flatten)]
    pub stats: ErrorStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub grouping: Grouping,
    /// Node comparisons that entered the statistics.
    pub nodes: usize,
    /// Nodes where exactly one side had no objects, so no distance is defined.
    pub skipped_degenerate: usize,
    pub wasserstein: MetricSummary,
    pub energy: MetricSummary,
    /// Frobenius distance between room-level correlation matrices.
    pub frobenius: f64,
    pub flagged_predicted: Vec<String>,
    pub flagged_truth: Vec<String>,
    pub per_class: Vec<ClassErrorRow>,
    #[serde(skip)]
    pub correlation: CorrelationComparison,
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter().map(|x| x / total).collect()
    } else {
        vec![0.0; v.len()]
    }
}

fn predicted_row<'a>(preds: &'a BTreeMap<NodeId, Vec<f64>>, id: &NodeId, n: usize) -> Result<&'a [f64], MetricError> {
    let row = preds
        .get(id)
        .ok_or_else(|| MetricError::Misaligned(format!("no prediction for node {id}")))?;
    if row.len() != n {
        return Err(MetricError::Misaligned(format!("prediction for {id} has {} classes, expected {n}", row.len())));
    }
    Ok(row)
}

/// Scores `source` on every partial of `samples` against its ground truth.
pub fn evaluate(source: &dyn BeliefSource, samples: &[DatasetSample], grouping: Grouping) -> Result<MetricReport, Error> {
    let first = samples.first().ok_or(MetricError::TooFewSamples { need: 1, got: 0 })?;
    let catalog = first.ground_truth.catalog_arc();
    let n = catalog.len();
    let mut w = Vec::new();
    let mut e = Vec::new();
    let mut skipped = 0usize;
    let (mut pred_nodes, mut true_nodes) = (Vec::new(), Vec::new());
    let (mut pred_rooms, mut true_rooms) = (Vec::new(), Vec::new());
    for s in samples {
        let gt = &s.ground_truth;
        if gt.catalog().labels() != catalog.labels() {
            return Err(MetricError::Misaligned(format!("{} uses a different catalog", s.source_id)).into());
        }
        for partial in &s.partials {
            let preds = source.histograms(partial, gt)?;
            for id in gt.masked_ids() {
                let layer = gt.node(&id).map(|n| n.layer).expect("masked id exists");
                let truth = gt.node_histogram(&id, false)?.to_f64();
                let pred = predicted_row(&preds, &id, n)?;
                if layer == Layer::Room {
                    pred_rooms.push(pred.to_vec());
                    true_rooms.push(truth.clone());
                }
                if !grouping.includes(layer) {
                    continue;
                }
                let (p, q) = (normalized(pred), normalized(&truth));
                let p_empty = p.iter().all(|x| *x == 0.0);
                let q_empty = q.iter().all(|x| *x == 0.0);
                if p_empty != q_empty {
                    skipped += 1;
                } else {
                    w.push(wasserstein_1d(&p, &q)?);
                    e.push(energy_distance_1d(&p, &q)?);
                }
                pred_nodes.push(pred.to_vec());
                true_nodes.push(truth);
            }
        }
    }
    let correlation = correlation_frobenius(&pred_rooms, &true_rooms)?;
    let label = |i: &usize| catalog.label(*i).unwrap_or_default().to_owned();
    let per_class = class_error_stats(&pred_nodes, &true_nodes)?
        .into_iter()
        .enumerate()
        .map(|(i, stats)| ClassErrorRow {
            class: label(&i),
            stats,
        })
        .collect();
    Ok(MetricReport {
        grouping,
        nodes: pred_nodes.len(),
        skipped_degenerate: skipped,
        wasserstein: describe(&w)?,
        energy: describe(&e)?,
        frobenius: correlation.frobenius,
        flagged_predicted: correlation.flagged_predicted.iter().map(label).collect(),
        flagged_truth: correlation.flagged_truth.iter().map(label).collect(),
        per_class,
        correlation,
    })
}

impl MetricReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("report serializes");
        out.push(b'\n');
        out
    }

    pub fn per_class_csv(&self) -> String {
        let mut out = String::from("class,mean,min,q1,median,q3,max\n");
        for r in &self.per_class {
            let s = &r.stats;
            let _ = writeln!(out, "{},{},{},{},{},{},{}", r.class, s.mean, s.min, s.q1, s.median, s.q3, s.max);
        }
        out
    }

    /// Correlation matrix as CSV with a header row of labels.
    pub fn correlation_csv(&self, predicted: bool) -> String {
        let m = if predicted {
            &self.correlation.predicted
        } else {
            &self.correlation.truth
        };
        let labels: Vec<&str> = self.per_class.iter().map(|r| r.class.as_str()).collect();
        let mut out = format!("class,{}\n", labels.join(","));
        for (i, row) in m.outer_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{},{}", labels[i], cells.join(","));
        }
        out
    }

    /// Self-contained SVG box plot of per-class count errors.
    pub fn box_plot_svg(&self) -> String {
        let rows = &self.per_class;
        let lo = rows.iter().map(|r| r.stats.min).fold(0.0f64, f64::min).floor() - 0.5;
        let hi = rows.iter().map(|r| r.stats.max).fold(0.0f64, f64::max).ceil() + 0.5;
        let (slot, top, plot_h, left) = (22.0, 20.0, 300.0, 50.0);
        let width = left + slot * rows.len() as f64 + 20.0;
        let height = top + plot_h + 130.0;
        let y = |v: f64| top + (hi - v) / (hi - lo) * plot_h;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
        );
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{z}" x2="{x2}" y2="{z}" stroke="#999" stroke-dasharray="3,3"/>"##,
            z = y(0.0),
            x2 = width - 20.0
        );
        for tick in [lo + 0.5, 0.0, hi - 0.5] {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#,
                left - 6.0,
                y(tick) + 3.0
            );
        }
        for (i, r) in rows.iter().enumerate() {
            let st = &r.stats;
            let cx = left + slot * (i as f64 + 0.5);
            let (x0, bw) = (cx - slot * 0.3, slot * 0.6);
            let _ = writeln!(
                s,
                r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
                y(st.max),
                y(st.min)
            );
            let _ = writeln!(
                s,
                r##"<rect x="{x0}" y="{}" width="{bw}" height="{}" fill="#9ecae1" stroke="black"/>"##,
                y(st.q3),
                (y(st.q1) - y(st.q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x0}" y1="{m}" x2="{}" y2="{m}" stroke="black" stroke-width="2"/>"#,
                x0 + bw,
                m = y(st.median)
            );
            let ly = top + plot_h + 8.0;
            let _ = writeln!(
                s,
                r#"<text x="{cx}" y="{ly}" transform="rotate(60 {cx} {ly})">{}</text>"#,
                xml_escape(&r.class)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One line of a predicted-vs-true histogram dump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub source_id: String,
    pub partial: usize,
    pub node: NodeId,
    pub class: String,
    pub predicted_count: f64,
    pub true_count: f64,
    pub predicted_p: f64,
    pub true_p: f64,
}

/// Histogram and distribution pairs for every masked node of the first
/// `max_partials` partials of `sample`.
pub fn comparison_rows(
    source: &dyn BeliefSource,
    sample: &DatasetSample,
    max_partials: usize,
) -> Result<Vec<ComparisonRow>, Error> {
    let gt = &sample.ground_truth;
    let catalog = gt.catalog();
    let mut out = Vec::new();
    for (k, partial) in sample.partials.iter().take(max_partials).enumerate() {
        let preds = source.histograms(partial, gt)?;
        for id in gt.masked_ids() {
            let truth = gt.node_histogram(&id, false)?.to_f64();
            let pred = predicted_row(&preds, &id, catalog.len())?;
            let (pp, tp) = (normalized(pred), normalized(&truth));
            for (i, label) in catalog.labels().iter().enumerate() {
                out.push(ComparisonRow {
                    source_id: sample.source_id.clone(),
                    partial: k,
                    node: id.clone(),
                    class: label.clone(),
                    predicted_count: pred[i],
                    true_count: truth[i],
                    predicted_p: pp[i],
                    true_p: tp[i],
                });
            }
        }
    }
    Ok(out)
}
