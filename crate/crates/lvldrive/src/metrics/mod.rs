//! Open-loop planning metrics, distance-binned grounding mIoU, and the
//! serialized metrics report.

mod text;

pub use text::{bleu4, cider, rouge_l, tokenize};

use serde::{Deserialize, Serialize};

use crate::codec::{parse_object_answer, WaypointList};
use crate::geom::{bev_iou, drivable_contains, BevBox, Polyline2D};

/// Default ego footprint (meters): a mid-size sedan.
pub const DEFAULT_EGO_FOOTPRINT: (f64, f64) = (4.08, 1.73);

/// One open-loop planning sample: six predicted waypoints (absent when the
/// prediction text failed to parse), six ground-truth waypoints, the agent
/// boxes at each step, and the drivable-lane set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanningSample {
    pub pred: Option<WaypointList>,
    pub gt: WaypointList,
    pub agents_per_step: [Vec<BevBox>; 6],
    pub lanes: Vec<Polyline2D>,
    pub ego_footprint: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct HorizonValues {
    pub at_1s: f64,
    pub at_2s: f64,
    pub at_3s: f64,
    pub avg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct L2Result {
    pub l2: HorizonValues,
    /// Samples excluded because their prediction did not parse.
    pub excluded: usize,
}

/// Waypoint indices (0-based) for the 1 s / 2 s / 3 s horizons at 0.5 s
/// spacing.
const HORIZON_STEPS: [usize; 3] = [1, 3, 5];

/// Mean BEV displacement between predicted and ground-truth waypoints.
pub fn l2_displacement(samples: &[PlanningSample]) -> L2Result {
    let mut per_step_sum = [0.0f64; 6];
    let mut included = 0usize;
    let mut excluded = 0usize;
    for s in samples {
        let Some(pred) = &s.pred else {
            excluded += 1;
            continue;
        };
        included += 1;
        for k in 0..6 {
            let dx = pred.0[k][0] - s.gt.0[k][0];
            let dy = pred.0[k][1] - s.gt.0[k][1];
            per_step_sum[k] += (dx * dx + dy * dy).sqrt();
        }
    }
    if included == 0 {
        return L2Result { l2: HorizonValues::default(), excluded };
    }
    let per_step: Vec<f64> = per_step_sum.iter().map(|v| v / included as f64).collect();
    L2Result {
        l2: HorizonValues {
            at_1s: per_step[HORIZON_STEPS[0]],
            at_2s: per_step[HORIZON_STEPS[1]],
            at_3s: per_step[HORIZON_STEPS[2]],
            avg: per_step.iter().sum::<f64>() / 6.0,
        },
        excluded,
    }
}

/// Per-step violation flags for one sample. The propagation rule makes
/// flags monotone: a violation at step k flags all steps >= k.
pub fn collision_flags(sample: &PlanningSample) -> [bool; 6] {
    let Some(pred) = &sample.pred else {
        return [true; 6];
    };
    let (len, wid) = sample.ego_footprint;
    let mut flags = [false; 6];
    let mut prev_point = [0.0f64, 0.0];
    let mut prev_heading = 0.0f64;
    let mut flagged = false;
    for k in 0..6 {
        let p = pred.0[k];
        let dx = p[0] - prev_point[0];
        let dy = p[1] - prev_point[1];
        let heading = if dx.hypot(dy) > 1e-9 {
            dy.atan2(dx)
        } else {
            prev_heading
        };
        let ego = BevBox { x: p[0], y: p[1], length: len, width: wid, yaw: heading };
        if !flagged {
            for agent in &sample.agents_per_step[k] {
                if let Ok(iou) = bev_iou(&ego, agent) {
                    if iou > 0.0 {
                        flagged = true;
                        break;
                    }
                }
            }
        }
        flags[k] = flagged;
        prev_point = p;
        prev_heading = heading;
    }
    flags
}

pub fn intersection_flags(sample: &PlanningSample, margin: f64) -> [bool; 6] {
    let Some(pred) = &sample.pred else {
        return [true; 6];
    };
    let mut flags = [false; 6];
    let mut flagged = false;
    for k in 0..6 {
        if !flagged && !drivable_contains(&sample.lanes, pred.0[k], margin) {
            flagged = true;
        }
        flags[k] = flagged;
    }
    flags
}

fn rate_from_flags(all_flags: &[[bool; 6]]) -> HorizonValues {
    let n = all_flags.len().max(1) as f64;
    let mut per_step = [0.0f64; 6];
    for flags in all_flags {
        for k in 0..6 {
            if flags[k] {
                per_step[k] += 1.0;
            }
        }
    }
    for v in per_step.iter_mut() {
        *v = 100.0 * *v / n;
    }
    HorizonValues {
        at_1s: per_step[HORIZON_STEPS[0]],
        at_2s: per_step[HORIZON_STEPS[1]],
        at_3s: per_step[HORIZON_STEPS[2]],
        avg: per_step.iter().sum::<f64>() / 6.0,
    }
}

/// Collision rate (%) per horizon. Unparseable predictions count as
/// colliding at every step.
pub fn collision_rate(samples: &[PlanningSample]) -> HorizonValues {
    let flags: Vec<[bool; 6]> = samples.iter().map(collision_flags).collect();
    rate_from_flags(&flags)
}

/// Intersection rate (%) per horizon: fraction of samples whose trajectory
/// leaves the drivable area by each step.
pub fn intersection_rate(samples: &[PlanningSample], margin: f64) -> HorizonValues {
    let flags: Vec<[bool; 6]> = samples
        .iter()
        .map(|s| intersection_flags(s, margin))
        .collect();
    rate_from_flags(&flags)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundingSample {
    pub predicted_text: String,
    pub gt: BevBox,
    pub gt_distance: f64,
}

pub const GROUNDING_BIN_EDGES: [f64; 3] = [15.0, 30.0, 45.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundingResult {
    /// Mean IoU per distance bin [0,15), [15,30), [30,45), [45,inf);
    /// `None` for empty bins.
    pub bins: [Option<f64>; 4],
    /// Mean of the non-empty bin means.
    pub miou: f64,
    pub parse_failures: usize,
}

pub fn grounding_miou(samples: &[GroundingSample]) -> GroundingResult {
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    let mut parse_failures = 0usize;
    for s in samples {
        let iou = match parse_object_answer(&s.predicted_text) {
            Ok(obj) => bev_iou(&obj.bev_box(), &s.gt).unwrap_or(0.0),
            Err(_) => {
                parse_failures += 1;
                0.0
            }
        };
        let bin = match s.gt_distance {
            d if d < GROUNDING_BIN_EDGES[0] => 0,
            d if d < GROUNDING_BIN_EDGES[1] => 1,
            d if d < GROUNDING_BIN_EDGES[2] => 2,
            _ => 3,
        };
        sums[bin] += iou;
        counts[bin] += 1;
    }
    let mut bins = [None; 4];
    let mut total = 0.0;
    let mut non_empty = 0usize;
    for i in 0..4 {
        if counts[i] > 0 {
            let mean = sums[i] / counts[i] as f64;
            bins[i] = Some(mean);
            total += mean;
            non_empty += 1;
        } else {
            log::warn!("grounding bin {i} is empty; excluded from the mean");
        }
    }
    GroundingResult {
        bins,
        miou: if non_empty > 0 { total / non_empty as f64 } else { 0.0 },
        parse_failures,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct TextScores {
    pub bleu4: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

/// Aggregated metric outputs, serialized for pipelines.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l2: Option<L2Result>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub collision_rate: Option<HorizonValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intersection_rate: Option<HorizonValues>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grounding: Option<GroundingResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<TextScores>,
}

impl MetricsReport {
    /// Aligned plain-text table of whatever sections are present.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let row = |name: &str, h: &HorizonValues| {
            format!(
                "{name:<20} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
                h.at_1s, h.at_2s, h.at_3s, h.avg
            )
        };
        if self.l2.is_some() || self.collision_rate.is_some() || self.intersection_rate.is_some()
        {
            out.push_str(&format!(
                "{:<20} {:>8} {:>8} {:>8} {:>8}\n",
                "metric", "1s", "2s", "3s", "avg"
            ));
        }
        if let Some(l2) = &self.l2 {
            out.push_str(&row("L2 (m)", &l2.l2));
            if l2.excluded > 0 {
                out.push_str(&format!("  ({} samples excluded from L2)\n", l2.excluded));
            }
        }
        if let Some(cr) = &self.collision_rate {
            out.push_str(&row("Collision Rate (%)", cr));
        }
        if let Some(ir) = &self.intersection_rate {
            out.push_str(&row("Intersection Rate (%)", ir));
        }
        if let Some(g) = &self.grounding {
            out.push_str("grounding IoU per bin [0-15, 15-30, 30-45, 45+):\n");
            for (i, b) in g.bins.iter().enumerate() {
                match b {
                    Some(v) => out.push_str(&format!("  bin {i}: {v:.4}\n")),
                    None => out.push_str(&format!("  bin {i}: (empty)\n")),
                }
            }
            out.push_str(&format!("grounding mIoU: {:.4}\n", g.miou));
            if g.parse_failures > 0 {
                out.push_str(&format!("  ({} unparseable predictions)\n", g.parse_failures));
            }
        }
        if let Some(t) = &self.text {
            out.push_str(&format!(
                "BLEU-4: {:.4}  ROUGE-L: {:.4}  CIDEr: {:.4}\n",
                t.bleu4, t.rouge_l, t.cider
            ));
        }
        out
    }
}
