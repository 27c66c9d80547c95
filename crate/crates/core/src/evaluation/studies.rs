//! Behavioral analyses over fixations and head motion.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::stats::{mean, pearson, welch_t_test};
use crate::attention::plcc;
use crate::fixation::{saccade_amplitude, FixationPoint};
use crate::gaze::{head_orientation, rotation_matrix, PoseSample};
use crate::{par, Error, Result, Vec3};

/// Mean Euclidean distance from the points to `anchor`.
pub fn bias_distance(points: &[Vec3], anchor: &Vec3) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Empty("points"));
    }
    Ok(points.iter().map(|p| (p - anchor).norm()).sum::<f64>() / points.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BiasReport {
    /// Fixations to the visible-set center.
    pub fixation_to_center: f64,
    /// Visible vertices to the visible-set center.
    pub visible_to_center: f64,
    /// Fixations to the head.
    pub fixation_to_head: f64,
    /// Visible vertices to the head.
    pub visible_to_head: f64,
}

impl BiasReport {
    pub fn center_biased(&self) -> bool {
        self.fixation_to_center < self.visible_to_center
    }

    pub fn depth_biased(&self) -> bool {
        self.fixation_to_head < self.visible_to_head
    }
}

pub fn center_and_depth_bias(fixations: &[Vec3], visible: &[Vec3], center: &Vec3, head: &Vec3) -> Result<BiasReport> {
    Ok(BiasReport {
        fixation_to_center: bias_distance(fixations, center)?,
        visible_to_center: bias_distance(visible, center)?,
        fixation_to_head: bias_distance(fixations, head)?,
        visible_to_head: bias_distance(visible, head)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterObserverReport {
    pub same_mean: f64,
    pub cross_mean: f64,
    pub same_count: usize,
    pub cross_count: usize,
    pub t: f64,
    pub p: f64,
}

/// Compares same-mesh with cross-mesh similarity scores.
pub fn inter_observer_test(same: &[f64], cross: &[f64]) -> Result<InterObserverReport> {
    let t = welch_t_test(same, cross)?;
    Ok(InterObserverReport {
        same_mean: mean(same),
        cross_mean: mean(cross),
        same_count: same.len(),
        cross_count: cross.len(),
        t: t.t,
        p: t.p,
    })
}

/// Pairwise similarities of per-subject maps, `groups[mesh][subject]`:
/// every pair within a mesh, and every pair across two meshes. Maps of
/// different meshes are compared vertex by vertex, so meshes must share a
/// vertex order.
pub fn observer_similarities(groups: &[Vec<Vec<f64>>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut same = Vec::new();
    let mut cross = Vec::new();
    for (m, g) in groups.iter().enumerate() {
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                same.push(plcc(&g[i], &g[j], None)?);
            }
            for other in &groups[m + 1..] {
                for b in other {
                    cross.push(plcc(&g[i], b, None)?);
                }
            }
        }
    }
    Ok((same, cross))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaccadeSummary {
    pub count: usize,
    pub mean_deg: f64,
    pub median_deg: f64,
}

/// Amplitudes between consecutive fixations of one recording.
pub fn saccade_summary(fixations: &[FixationPoint]) -> Result<SaccadeSummary> {
    let mut amps: Vec<f64> = fixations
        .windows(2)
        .filter_map(|w| saccade_amplitude(&w[0], &w[1]).ok())
        .collect();
    if amps.is_empty() {
        return Err(Error::Insufficient("need two fixations for a saccade".into()));
    }
    amps.sort_by(f64::total_cmp);
    let n = amps.len();
    let median = if n % 2 == 1 {
        amps[n / 2]
    } else {
        0.5 * (amps[n / 2 - 1] + amps[n / 2])
    };
    Ok(SaccadeSummary {
        count: n,
        mean_deg: mean(&amps),
        median_deg: median,
    })
}

/// A fixation density map tagged with the head pose it was seen from.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseFdm {
    pub position: Vec3,
    /// Euler degrees.
    pub orientation: Vec3,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceParams {
    /// Pairs whose viewing directions differ by more are ignored.
    pub max_angle_deg: f64,
    pub repetitions: usize,
    /// Fraction of poses drawn (without replacement) per repetition.
    pub subset_fraction: f64,
    pub min_poses: usize,
    /// Keep only poses whose head height is within `tolerance` of `height`.
    pub head_height: Option<(f64, f64)>,
    pub seed: u64,
}

impl Default for DependenceParams {
    fn default() -> Self {
        Self {
            max_angle_deg: 90.0,
            repetitions: 100,
            subset_fraction: 0.8,
            min_poses: 10,
            head_height: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    /// Mean over repetitions of corr(similarity, angle difference).
    pub signed: f64,
    pub magnitude: f64,
    /// Correlation over every eligible pair.
    pub full: f64,
    pub per_repetition: Vec<f64>,
    pub poses: usize,
    pub pairs: usize,
}

/// How strongly map similarity depends on the angle between viewing
/// directions.
pub fn viewing_direction_dependence(fdms: &[PoseFdm], params: &DependenceParams) -> Result<DependenceReport> {
    let kept: Vec<&PoseFdm> = fdms
        .iter()
        .filter(|f| match params.head_height {
            Some((h, tol)) => (f.position.y - h).abs() <= tol,
            None => true,
        })
        .collect();
    let n = kept.len();
    if n < params.min_poses.max(3) {
        return Err(Error::Insufficient(format!(
            "viewing-direction dependence needs {} poses, got {n}",
            params.min_poses.max(3)
        )));
    }
    if params.repetitions == 0 || !(params.subset_fraction > 0.0 && params.subset_fraction <= 1.0) {
        return Err(Error::invalid("bad resampling settings"));
    }
    let dirs: Vec<Vec3> = kept.iter().map(|f| head_orientation(&f.orientation)).collect();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let angle = dirs[i].dot(&dirs[j]).clamp(-1.0, 1.0).acos().to_degrees();
            if angle <= params.max_angle_deg + 1e-9 {
                let sim = plcc(&kept[i].values, &kept[j].values, None)?;
                pairs.push((i, j, sim, angle));
            }
        }
    }
    let corr = |ps: &[&(usize, usize, f64, f64)]| -> Result<f64> {
        let s: Vec<f64> = ps.iter().map(|p| p.2).collect();
        let a: Vec<f64> = ps.iter().map(|p| p.3).collect();
        if s.len() < 3 {
            return Err(Error::Insufficient("fewer than three pose pairs".into()));
        }
        pearson(&s, &a)
    };
    let full = corr(&pairs.iter().collect::<Vec<_>>())?;
    let k = ((params.subset_fraction * n as f64).round() as usize).clamp(3, n);
    let per_repetition = par::map_range(params.repetitions, |rep| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(rep as u64);
        let mut chosen = vec![false; n];
        for i in sample(&mut rng, n, k) {
            chosen[i] = true;
        }
        let subset: Vec<_> = pairs.iter().filter(|p| chosen[p.0] && chosen[p.1]).collect();
        corr(&subset)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let signed = mean(&per_repetition);
    Ok(DependenceReport {
        signed,
        magnitude: signed.abs(),
        full,
        per_repetition,
        poses: n,
        pairs: pairs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveDirection {
    Left,
    Right,
    None,
}

/// Side of the first head displacement larger than `gate` meters, relative
/// to the initial viewing direction.
pub fn initial_move_direction(samples: &[PoseSample], gate: f64) -> Result<MoveDirection> {
    if samples.len() < 2 {
        return Err(Error::Insufficient("need two samples".into()));
    }
    let p0 = samples[0].position;
    let right = rotation_matrix(&Vec3::new(0.0, 90.0, 0.0)) * head_orientation(&samples[0].orientation);
    let Some(first) = samples.iter().find(|s| (s.position - p0).norm() > gate) else {
        return Ok(MoveDirection::None);
    };
    let lateral = (first.position - p0).dot(&right);
    Ok(if lateral > 0.0 {
        MoveDirection::Right
    } else if lateral < 0.0 {
        MoveDirection::Left
    } else {
        MoveDirection::None
    })
}
