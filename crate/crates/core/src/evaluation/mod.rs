//! Saliency evaluation metrics and the behavioral studies.

mod stats;
mod studies;

pub use stats::{mean, pearson, variance, welch_t_test, TTest};
pub use studies::{
    bias_distance, center_and_depth_bias, initial_move_direction, inter_observer_test, observer_similarities,
    saccade_summary,
    viewing_direction_dependence, BiasReport, DependenceParams, DependenceReport, InterObserverReport, MoveDirection,
    PoseFdm, SaccadeSummary,
};

use serde::{Deserialize, Serialize};

use crate::attention::{plcc, restrict};
use crate::{Error, Result};

/// Correlation coefficient of ground truth and prediction on the domain.
pub fn metric_cc(g: &[f64], r: &[f64], domain: Option<&[u32]>) -> Result<f64> {
    plcc(g, r, domain)
}

/// KL divergence of the prediction from the ground truth, both floored at
/// `eps_floor` and normalized on the domain. Natural log.
pub fn metric_kl(g: &[f64], r: &[f64], domain: Option<&[u32]>, eps_floor: f64) -> Result<f64> {
    if g.len() != r.len() {
        return Err(Error::LengthMismatch(g.len(), r.len()));
    }
    if !(eps_floor > 0.0) {
        return Err(Error::invalid("KL floor must be positive"));
    }
    let (mut gd, mut rd) = restrict(g, r, domain)?;
    for v in gd.iter_mut().chain(rd.iter_mut()) {
        *v = v.max(eps_floor);
    }
    let (sg, sr): (f64, f64) = (gd.iter().sum(), rd.iter().sum());
    let kl: f64 = gd
        .iter()
        .zip(&rd)
        .map(|(a, b)| {
            let (p, q) = (a / sg, b / sr);
            p * (p / q).ln()
        })
        .sum();
    Ok(kl.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeVariant {
    /// Mean absolute difference after scaling both maps to unit mean.
    #[default]
    UnitMean,
    /// Mean absolute difference after min-max scaling both maps to [0, 1].
    MinMax,
}

/// Saliency error: mean absolute difference of the normalized maps.
pub fn metric_se(g: &[f64], r: &[f64], domain: Option<&[u32]>, variant: SeVariant) -> Result<f64> {
    if g.len() != r.len() {
        return Err(Error::LengthMismatch(g.len(), r.len()));
    }
    let (gd, rd) = restrict(g, r, domain)?;
    let n = gd.len() as f64;
    let (gn, rn) = match variant {
        SeVariant::UnitMean => {
            let mg = gd.iter().sum::<f64>() / n;
            if !(mg > 0.0) {
                return Err(Error::ZeroVariance("ground truth is zero on the domain"));
            }
            let mr = rd.iter().sum::<f64>() / n;
            let rs = if mr > 0.0 { 1.0 / mr } else { 0.0 };
            (
                gd.iter().map(|x| x / mg).collect::<Vec<_>>(),
                rd.iter().map(|x| x * rs).collect::<Vec<_>>(),
            )
        }
        SeVariant::MinMax => {
            let mm = |v: &[f64]| {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let span = hi - lo;
                v.iter()
                    .map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 })
                    .collect::<Vec<_>>()
            };
            if !gd.iter().any(|&x| x != 0.0) {
                return Err(Error::ZeroVariance("ground truth is zero on the domain"));
            }
            (mm(&gd), mm(&rd))
        }
    };
    Ok(gn.iter().zip(&rn).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScore {
    pub pose_id: String,
    pub cc: f64,
    pub se: f64,
    pub kl: f64,
    /// Subjects that visited this pose.
    pub visitors: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Cc,
    Se,
    Kl,
}

impl ViewScore {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Cc => self.cc,
            Metric::Se => self.se,
            Metric::Kl => self.kl,
        }
    }
}

/// Visitor-weighted mean of one metric over views.
pub fn weighted_eval(scores: &[ViewScore], metric: Metric) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("view scores"));
    }
    if scores.iter().any(|s| s.visitors == 0) {
        return Err(Error::invalid("every view needs at least one visitor"));
    }
    let total: f64 = scores.iter().map(|s| s.visitors as f64).sum();
    Ok(scores.iter().map(|s| s.visitors as f64 * s.get(metric)).sum::<f64>() / total)
}

/// Scores one view on `domain`.
pub fn score_view(
    pose_id: &str,
    g: &[f64],
    r: &[f64],
    domain: Option<&[u32]>,
    visitors: usize,
    eps_floor: f64,
    se: SeVariant,
) -> Result<ViewScore> {
    Ok(ViewScore {
        pose_id: pose_id.to_string(),
        cc: metric_cc(g, r, domain)?,
        se: metric_se(g, r, domain, se)?,
        kl: metric_kl(g, r, domain, eps_floor)?,
        visitors,
    })
}
