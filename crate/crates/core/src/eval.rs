//! ROC curves, AUC and low-FPR operating points.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{format_score, ScoreTable};
use crate::store::Membership;

/// Default low-FPR operating points.
pub const DEFAULT_FPR_TARGETS: [f64; 3] = [0.01, 0.05, 0.1];

/// One ROC vertex. `threshold` reproduces the vertex under the strict rule
/// `score > threshold → seen`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub fpr_target: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub num_seen: usize,
    pub num_unseen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub roc: Vec<RocPoint>,
    pub auc: f64,
    pub tpr_at: Vec<OperatingPoint>,
    pub counts: ClassCounts,
    /// Threshold maximizing `tpr - fpr` (Youden's J); highest threshold on ties.
    pub youden_threshold: f64,
}

/// Scores split by class; rejects unknown labels and single-class tables.
fn split(table: &ScoreTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut seen = Vec::new();
    let mut unseen = Vec::new();
    for r in table.rows() {
        match r.membership {
            Membership::Seen => seen.push(r.score),
            Membership::Unseen => unseen.push(r.score),
            Membership::Unknown => {
                return Err(Error::Evaluation(format!(
                    "row {:?} has unknown membership; evaluation needs ground truth",
                    r.id
                )))
            }
        }
    }
    if seen.is_empty() || unseen.is_empty() {
        return Err(Error::Evaluation(format!(
            "need both classes, got {} seen and {} unseen",
            seen.len(),
            unseen.len()
        )));
    }
    Ok((seen, unseen))
}

/// ROC vertices from (0,0) to (1,1), one per distinct score.
pub fn roc_curve(table: &ScoreTable) -> Result<Vec<RocPoint>> {
    let (seen, unseen) = split(table)?;
    let (pos, neg) = (seen.len() as f64, unseen.len() as f64);
    let mut scored: Vec<(f64, bool)> = seen
        .iter()
        .map(|&s| (s, true))
        .chain(unseen.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut roc = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: scored[0].0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let score = scored[i].0;
        while i < scored.len() && scored[i].0 == score {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let threshold = match scored.get(i) {
            Some(&(next, _)) => next,
            None => score.next_down(),
        };
        roc.push(RocPoint {
            fpr: fp as f64 / neg,
            tpr: tp as f64 / pos,
            threshold,
        });
    }
    Ok(roc)
}

/// Mann–Whitney AUC with half credit for ties.
pub fn auc(table: &ScoreTable) -> Result<f64> {
    let (seen, unseen) = split(table)?;
    let mut scored: Vec<(f64, bool)> = seen
        .iter()
        .map(|&s| (s, true))
        .chain(unseen.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Twice the U statistic, kept integral so the result is one exact division.
    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < scored.len() {
        let score = scored[i].0;
        let (mut pos_here, mut neg_here) = (0u128, 0u128);
        while i < scored.len() && scored[i].0 == score {
            if scored[i].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            i += 1;
        }
        twice_u += pos_here * (2 * neg_below + neg_here);
        neg_below += neg_here;
    }
    let denom = 2 * seen.len() as u128 * unseen.len() as u128;
    Ok(twice_u as f64 / denom as f64)
}

/// Trapezoidal area under a ROC polyline.
pub fn trapezoid_area(roc: &[RocPoint]) -> f64 {
    roc.windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

fn tpr_at(roc: &[RocPoint], fpr_target: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&fpr_target) {
        return Err(Error::Evaluation(format!("FPR target {fpr_target} outside [0, 1]")));
    }
    Ok(roc
        .iter()
        .filter(|p| p.fpr <= fpr_target)
        .map(|p| p.tpr)
        .fold(0.0, f64::max))
}

/// Highest TPR over thresholds with FPR ≤ `fpr_target`; no interpolation.
pub fn tpr_at_fpr(table: &ScoreTable, fpr_target: f64) -> Result<f64> {
    tpr_at(&roc_curve(table)?, fpr_target)
}

fn youden(roc: &[RocPoint]) -> f64 {
    let mut best = roc[0];
    for p in roc {
        if p.tpr - p.fpr > best.tpr - best.fpr {
            best = *p;
        }
    }
    best.threshold
}

/// Full evaluation of a score table.
pub fn evaluate(table: &ScoreTable, fpr_targets: &[f64]) -> Result<EvalReport> {
    let roc = roc_curve(table)?;
    let (seen, unseen) = split(table)?;
    let tpr_at = fpr_targets
        .iter()
        .map(|&t| {
            Ok(OperatingPoint {
                fpr_target: t,
                tpr: tpr_at(&roc, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        auc: auc(table)?,
        youden_threshold: youden(&roc),
        tpr_at,
        counts: ClassCounts {
            num_seen: seen.len(),
            num_unseen: unseen.len(),
        },
        roc,
    })
}

impl EvalReport {
    /// Checks the ROC invariants: starts at (0,0), ends at (1,1), monotone.
    pub fn validate(&self) -> Result<()> {
        let (Some(first), Some(last)) = (self.roc.first(), self.roc.last()) else {
            return Err(Error::Evaluation("report has an empty ROC curve".into()));
        };
        if (first.fpr, first.tpr) != (0.0, 0.0) || (last.fpr, last.tpr) != (1.0, 1.0) {
            return Err(Error::Evaluation("ROC curve must run from (0,0) to (1,1)".into()));
        }
        if self.roc.windows(2).any(|w| w[1].fpr < w[0].fpr || w[1].tpr < w[0].tpr) {
            return Err(Error::Evaluation("ROC curve is not monotone".into()));
        }
        if !(0.0..=1.0).contains(&self.auc) {
            return Err(Error::Evaluation(format!("AUC {} outside [0, 1]", self.auc)));
        }
        Ok(())
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.roc {
            out.push_str(&format!(
                "{},{},{}\n",
                format_score(p.fpr),
                format_score(p.tpr),
                format_score(p.threshold)
            ));
        }
        out
    }

    /// Reads `report.json` from a directory written by [`emit_report`].
    pub fn read(dir: impl AsRef<Path>) -> Result<EvalReport> {
        let path = dir.as_ref().join("report.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Writes `report.json` and `roc.csv` into `dir` (created if missing).
/// Invalid reports are refused before anything is written.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    report.validate()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join("report.json");
    fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = dir.join("roc.csv");
    fs::write(&csv, report.roc_csv()).map_err(|e| Error::io(&csv, e))
}
