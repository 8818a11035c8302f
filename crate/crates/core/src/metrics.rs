//! Error statistics against synthetic ground truth: instance matching,
//! population mean / std-dev / RMSE and the CSV report.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_distance, GeoPoint};
use crate::mask::FeatureClass;
use crate::osw::{ParsedWorkspace, CAPTURE_TAG, WIDTH_TAG};
use crate::pipeline::CaptureResult;
use crate::session::{FrameId, GroundTruth};

/// Predictions farther than this from every truth of their class stay unmatched.
pub const DEFAULT_MATCH_GATE_M: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no samples")]
    EmptyInput,
    #[error("{predicted} predictions vs {truth} truths")]
    LengthMismatch { predicted: usize, truth: usize },
}

/// Population statistics of absolute errors, so `rmse² = mean² + std_dev²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std_dev: f64,
    pub rmse: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Result<Self, MetricsError> {
        if errors.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let n = errors.len() as f64;
        let mean = errors.iter().sum::<f64>() / n;
        let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        let ms = errors.iter().map(|e| e * e).sum::<f64>() / n;
        Ok(Self {
            mean,
            std_dev: var.sqrt(),
            rmse: ms.sqrt(),
            n: errors.len(),
        })
    }

    /// `|rmse² − (mean² + std²)|`.
    pub fn identity_residual(&self) -> f64 {
        (self.rmse.powi(2) - (self.mean.powi(2) + self.std_dev.powi(2))).abs()
    }
}

/// Statistics of pairwise ground distances between matched points.
pub fn localization_errors(
    predicted: &[GeoPoint],
    truth: &[GeoPoint],
) -> Result<ErrorStats, MetricsError> {
    if predicted.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let e: Vec<f64> = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| haversine_distance(p, t))
        .collect();
    ErrorStats::from_errors(&e)
}

/// Statistics of `|measured − truth|`.
pub fn width_errors(measured: &[f64], truth: &[f64]) -> Result<ErrorStats, MetricsError> {
    if measured.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            predicted: measured.len(),
            truth: truth.len(),
        });
    }
    let e: Vec<f64> = measured
        .iter()
        .zip(truth)
        .map(|(m, t)| (m - t).abs())
        .collect();
    ErrorStats::from_errors(&e)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// `(predicted index, truth index, distance m)`, by increasing distance.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_predicted: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
}

/// Greedy nearest-neighbour matching within class: candidate pairs inside
/// `gate_m` are taken shortest first, each side used at most once.
pub fn match_instances(
    predicted: &[(FeatureClass, GeoPoint)],
    truth: &[(FeatureClass, GeoPoint)],
    gate_m: f64,
) -> Matching {
    let mut candidates = Vec::new();
    for (i, (pc, p)) in predicted.iter().enumerate() {
        for (j, (tc, t)) in truth.iter().enumerate() {
            if pc == tc {
                let d = haversine_distance(p, t);
                if d <= gate_m {
                    candidates.push((i, j, d));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut m = Matching::default();
    for (i, j, d) in candidates {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            m.pairs.push((i, j, d));
        }
    }
    m.unmatched_predicted = (0..predicted.len()).filter(|&i| !used_p[i]).collect();
    m.unmatched_truth = (0..truth.len()).filter(|&j| !used_t[j]).collect();
    m
}

/// One predicted feature, from pipeline output or from a workspace export.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub capture_id: Option<FrameId>,
    pub class: FeatureClass,
    pub location: GeoPoint,
    pub width_m: Option<f64>,
}

pub fn predictions_from_results(results: &[CaptureResult]) -> Vec<Prediction> {
    results
        .iter()
        .flat_map(|r| r.detections.values().flatten())
        .map(|i| Prediction {
            capture_id: Some(i.capture_id),
            class: i.class,
            location: i.location,
            width_m: i.width_m,
        })
        .collect()
}

pub fn predictions_from_export(ws: &ParsedWorkspace) -> Vec<Prediction> {
    ws.nodes
        .values()
        .map(|n| Prediction {
            capture_id: n.tags.get(CAPTURE_TAG).and_then(|c| c.parse().ok()),
            class: n.class,
            location: n.location,
            width_m: n.tags.get(WIDTH_TAG).and_then(|w| w.parse().ok()),
        })
        .collect()
}

/// Error of one matched object prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectError {
    pub capture_id: Option<FrameId>,
    pub class: FeatureClass,
    pub truth_id: u32,
    pub error_m: f64,
    /// Ground distance from the true device position to the object, when known.
    pub range_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub objects: Vec<ObjectError>,
    pub unmatched_predictions: usize,
    /// `(measured, truth)` sidewalk widths.
    pub widths: Vec<(f64, f64)>,
}

impl Evaluation {
    pub fn object_errors(&self, filter: impl Fn(&ObjectError) -> bool) -> Vec<f64> {
        self.objects
            .iter()
            .filter(|o| filter(o))
            .map(|o| o.error_m)
            .collect()
    }

    pub fn per_class(&self) -> BTreeMap<FeatureClass, ErrorStats> {
        let mut by: BTreeMap<FeatureClass, Vec<f64>> = BTreeMap::new();
        for o in &self.objects {
            by.entry(o.class).or_default().push(o.error_m);
        }
        by.into_iter()
            .filter_map(|(c, e)| ErrorStats::from_errors(&e).ok().map(|s| (c, s)))
            .collect()
    }

    pub fn all_objects(&self) -> Option<ErrorStats> {
        ErrorStats::from_errors(&self.object_errors(|_| true)).ok()
    }

    pub fn width(&self) -> Option<ErrorStats> {
        let (m, t): (Vec<f64>, Vec<f64>) = self.widths.iter().copied().unzip();
        width_errors(&m, &t).ok()
    }

    /// Rows of the CSV report: one per class, all objects, sidewalk width.
    pub fn rows(&self) -> Vec<(String, ErrorStats)> {
        let mut rows: Vec<(String, ErrorStats)> = self
            .per_class()
            .into_iter()
            .map(|(c, s)| (c.name().to_string(), s))
            .collect();
        if let Some(s) = self.all_objects() {
            rows.push(("all_objects".into(), s));
        }
        if let Some(s) = self.width() {
            rows.push(("sidewalk_width".into(), s));
        }
        rows
    }
}

/// Matches point predictions to truth capture by capture and collects the
/// sidewalk width errors.
pub fn evaluate(truth: &GroundTruth, predictions: &[Prediction], gate_m: f64) -> Evaluation {
    let truth_pts: Vec<(FeatureClass, GeoPoint)> = truth
        .objects
        .iter()
        .map(|o| (o.class, o.location))
        .collect();
    let mut groups: BTreeMap<Option<FrameId>, Vec<&Prediction>> = BTreeMap::new();
    for p in predictions {
        groups.entry(p.capture_id).or_default().push(p);
    }
    let mut eval = Evaluation::default();
    for (capture, preds) in groups {
        let points: Vec<&Prediction> = preds
            .iter()
            .copied()
            .filter(|p| p.class != FeatureClass::Sidewalk)
            .collect();
        let query: Vec<(FeatureClass, GeoPoint)> =
            points.iter().map(|p| (p.class, p.location)).collect();
        let m = match_instances(&query, &truth_pts, gate_m);
        eval.unmatched_predictions += m.unmatched_predicted.len();
        let camera = capture.and_then(|c| truth.camera_positions.get(&c));
        for (i, j, d) in m.pairs {
            let t = &truth.objects[j];
            eval.objects.push(ObjectError {
                capture_id: capture,
                class: points[i].class,
                truth_id: t.id,
                error_m: d,
                range_m: camera.map(|c| haversine_distance(c, &t.location)),
            });
        }
        if let Some(w) = truth.sidewalk_width_m {
            eval.widths.extend(
                preds
                    .iter()
                    .filter(|p| p.class == FeatureClass::Sidewalk)
                    .filter_map(|p| p.width_m)
                    .map(|m| (m, w)),
            );
        }
    }
    eval
}

/// CSV with header `class,mean_m,std_m,rmse_m,n`.
pub fn write_csv<W: Write>(rows: &[(String, ErrorStats)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "mean_m", "std_m", "rmse_m", "n"])?;
    for (label, s) in rows {
        w.write_record([
            label.clone(),
            format!("{:.6}", s.mean),
            format!("{:.6}", s.std_dev),
            format!("{:.6}", s.rmse),
            s.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{spherical_destination, PlanarDelta};
    use crate::mask::FeatureClass::*;
    use proptest::prelude::*;

    fn near(p: &GeoPoint, north: f64, east: f64) -> GeoPoint {
        spherical_destination(&p.as_fix(0.0), &PlanarDelta::new(north, east))
    }

    #[test]
    fn one_two_three() {
        let s = ErrorStats::from_errors(&[1.0, 2.0, 3.0]).unwrap();
        // hand computation: var = (1 + 0 + 1) / 3, ms = 14 / 3
        assert!((s.mean - 2.0).abs() < 1e-12);
        assert!((s.std_dev - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.rmse - (14.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.std_dev - 0.8165).abs() < 1e-4 && (s.rmse - 2.1602).abs() < 1e-4);
        assert_eq!(ErrorStats::from_errors(&[0.0; 4]).unwrap().rmse, 0.0);
        assert_eq!(ErrorStats::from_errors(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn widths() {
        let s = width_errors(&[2.1, 1.9], &[2.0, 2.0]).unwrap();
        assert!((s.mean - 0.1).abs() < 1e-12 && s.std_dev < 1e-12 && (s.rmse - 0.1).abs() < 1e-12);
        assert_eq!(width_errors(&[2.0], &[2.0]).unwrap().rmse, 0.0);
        assert!(matches!(
            width_errors(&[1.0], &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        let o = GeoPoint::new(0.0, 0.0).unwrap();
        assert!(matches!(
            localization_errors(&[o], &[]),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn matching_gate_and_competition() {
        let t = GeoPoint::new(47.0, -122.0).unwrap();
        let m = match_instances(&[(Pole, near(&t, 0.5, 0.0))], &[(Pole, t)], 10.0);
        assert_eq!(m.pairs.len(), 1);
        let m = match_instances(&[(Pole, near(&t, 50.0, 0.0))], &[(Pole, t)], 10.0);
        assert_eq!(m.unmatched_predicted, vec![0]);
        let m = match_instances(&[(TrafficSign, t)], &[(Pole, t)], 10.0);
        assert!(m.pairs.is_empty());

        let preds = [(Pole, near(&t, 2.0, 0.0)), (Pole, near(&t, 0.0, 1.0))];
        let m = match_instances(&preds, &[(Pole, t)], 10.0);
        assert_eq!(
            m.pairs.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(),
            vec![(1, 0)]
        );
        assert_eq!(m.unmatched_predicted, vec![0]);
    }

    /// Exhaustive search over all one-to-one assignments of 3 predictions.
    fn brute_force_best(
        preds: &[(FeatureClass, GeoPoint)],
        truth: &[(FeatureClass, GeoPoint)],
        gate: f64,
    ) -> (usize, f64) {
        let mut best = (0usize, f64::INFINITY);
        let n = truth.len();
        let choices = n + 1; // n = unmatched
        let total = choices.pow(preds.len() as u32);
        for code in 0..total {
            let mut c = code;
            let mut used = vec![false; n];
            let (mut count, mut cost, mut ok) = (0, 0.0, true);
            for p in preds {
                let j = c % choices;
                c /= choices;
                if j == n {
                    continue;
                }
                let d = haversine_distance(&p.1, &truth[j].1);
                if used[j] || p.0 != truth[j].0 || d > gate {
                    ok = false;
                    break;
                }
                used[j] = true;
                count += 1;
                cost += d;
            }
            if ok && (count > best.0 || (count == best.0 && cost < best.1)) {
                best = (count, cost);
            }
        }
        best
    }

    #[test]
    fn two_near_one_truth_agrees_with_brute_force() {
        let t = GeoPoint::new(47.0, -122.0).unwrap();
        let truth = [(Pole, t), (Pole, near(&t, 30.0, 0.0))];
        let preds = [
            (Pole, near(&t, 1.0, 0.0)),
            (Pole, near(&t, 0.2, 0.0)),
            (Pole, near(&t, 29.0, 0.5)),
        ];
        let m = match_instances(&preds, &truth, 10.0);
        let greedy_cost: f64 = m.pairs.iter().map(|p| p.2).sum();
        let (count, cost) = brute_force_best(&preds, &truth, 10.0);
        assert_eq!(m.pairs.len(), count);
        assert!((greedy_cost - cost).abs() < 1e-9);
        assert_eq!(m.unmatched_predicted, vec![0]);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![(
            "pole".to_string(),
            ErrorStats::from_errors(&[1.0, 2.0, 3.0]).unwrap(),
        )];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "class,mean_m,std_m,rmse_m,n\npole,2.000000,0.816497,2.160247,3\n"
        );
    }

    proptest! {
        #[test]
        fn rmse_identity(errors in prop::collection::vec(0.0f64..100.0, 1..200)) {
            let s = ErrorStats::from_errors(&errors).unwrap();
            prop_assert!(s.identity_residual() < 1e-9 * (1.0 + s.rmse * s.rmse));
        }

        #[test]
        fn stats_are_order_independent(mut errors in prop::collection::vec(0.0f64..10.0, 1..50)) {
            let a = ErrorStats::from_errors(&errors).unwrap();
            errors.reverse();
            let b = ErrorStats::from_errors(&errors).unwrap();
            prop_assert!((a.rmse - b.rmse).abs() < 1e-12 && (a.mean - b.mean).abs() < 1e-12);
        }
    }
}
