use crate::error::{Result, VadError};

/// One operating point: frames scoring at or above `threshold` are called speech.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fp_rate: f64,
    pub tp_rate: f64,
}

/// Staircase ROC ordered by decreasing threshold, from (0, 0) to (1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

pub fn roc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(VadError::Dimension(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(VadError::NonFinite("roc scores".into()));
    }
    let pos = labels.iter().filter(|&&y| y != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(VadError::SingleClass(format!(
            "roc needs both classes ({pos} speech, {neg} non-speech frames)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fp_rate: 0.0,
        tp_rate: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let prev = *points.last().expect("nonempty");
        let p = RocPoint {
            threshold: t,
            fp_rate: fp as f64 / neg as f64,
            tp_rate: tp as f64 / pos as f64,
        };
        auc += (p.fp_rate - prev.fp_rate) * (p.tp_rate + prev.tp_rate) / 2.0;
        points.push(p);
    }
    Ok(RocCurve { points, auc })
}
