//! Fixation/saccade classification, fixation clustering and AOI centers.

use crate::gaze::IntersectionRecord;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Fixation,
    Saccade,
    Miss,
}

/// A recording sample with its head pose and (optional) mesh hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackedSample {
    pub index: usize,
    pub t: f64,
    pub head_position: Vec3,
    /// Euler degrees.
    pub head_orientation: Vec3,
    pub hit: Option<IntersectionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub sample: TrackedSample,
    pub label: Label,
}

impl LabeledSample {
    fn point(&self) -> Vec3 {
        self.sample
            .hit
            .expect("fixation samples always carry a hit")
            .point
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationParams {
    /// Distance-adaptive threshold factor: a step is a fixation step when
    /// its displacement is at most `h * D`.
    pub h: f64,
    /// Seconds.
    pub min_duration: f64,
    pub sample_rate_hz: f64,
    /// Spatial interval for grouping, meters.
    pub cluster_interval: f64,
    /// Random-walk affinity scale; defaults to the cluster interval.
    pub sigma_rw: Option<f64>,
    pub damping: f64,
    /// Density radius; defaults to half the cluster interval.
    pub rho_radius: Option<f64>,
}

impl Default for FixationParams {
    fn default() -> Self {
        Self {
            h: 0.0075,
            min_duration: 0.1,
            sample_rate_hz: 120.0,
            cluster_interval: 0.03,
            sigma_rw: None,
            damping: 0.85,
            rho_radius: None,
        }
    }
}

impl FixationParams {
    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate_hz
    }

    pub fn random_walk(&self) -> RandomWalkParams {
        RandomWalkParams {
            sigma: self.sigma_rw.unwrap_or(self.cluster_interval),
            damping: self.damping,
            rho_radius: self.rho_radius.unwrap_or(self.cluster_interval / 2.0),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::invalid("h must be positive"));
        }
        if !(self.sample_rate_hz > 0.0) || !(self.min_duration >= 0.0) || !(self.cluster_interval > 0.0) {
            return Err(Error::invalid("fixation parameters must be positive"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::invalid("random-walk damping must lie in [0, 1)"));
        }
        Ok(())
    }
}

// Small slack so 12 samples at 120 Hz count as 100 ms.
const DURATION_SLACK: f64 = 1e-9;

/// Duration of a time-contiguous run of samples.
fn run_duration(first_t: f64, last_t: f64, period: f64) -> f64 {
    last_t - first_t + period
}

/// Distance-adaptive I-VT. `samples[k].index` must equal `k`.
///
/// Sample `k` is a fixation when `|I_k - I_{k-1}| <= h * D_k`. The first hit
/// after a miss (or the stream start) takes the verdict of its successor's
/// step. Fixation runs shorter than `min_duration` become saccades.
pub fn classify_ivt(samples: &[TrackedSample], params: &FixationParams) -> Result<Vec<LabeledSample>> {
    params.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("intersection stream"));
    }
    for (k, s) in samples.iter().enumerate() {
        if s.index != k {
            return Err(Error::invalid(format!("sample at position {k} has index {}", s.index)));
        }
        if k > 0 && !(s.t > samples[k - 1].t) {
            return Err(Error::NonMonotonicTime(k));
        }
    }
    let step_is_fixation = |k: usize| -> bool {
        let cur = samples[k].hit.expect("caller checked");
        let prev = samples[k - 1].hit.expect("caller checked");
        (cur.point - prev.point).norm() <= params.h * cur.distance
    };
    let mut labels: Vec<Label> = (0..samples.len())
        .map(|k| {
            if samples[k].hit.is_none() {
                return Label::Miss;
            }
            let fixation = if k > 0 && samples[k - 1].hit.is_some() {
                step_is_fixation(k)
            } else if k + 1 < samples.len() && samples[k + 1].hit.is_some() {
                step_is_fixation(k + 1)
            } else {
                false
            };
            if fixation {
                Label::Fixation
            } else {
                Label::Saccade
            }
        })
        .collect();

    let period = 1.0 / params.sample_rate_hz;
    let mut k = 0;
    while k < labels.len() {
        if labels[k] != Label::Fixation {
            k += 1;
            continue;
        }
        let start = k;
        while k < labels.len() && labels[k] == Label::Fixation {
            k += 1;
        }
        let d = run_duration(samples[start].t, samples[k - 1].t, period);
        if d + DURATION_SLACK < params.min_duration {
            labels[start..k].fill(Label::Saccade);
        }
    }
    Ok(samples
        .iter()
        .zip(labels)
        .map(|(&sample, label)| LabeledSample { sample, label })
        .collect())
}

/// Temporally contiguous group of fixation samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationCluster {
    pub members: Vec<LabeledSample>,
}

impl FixationCluster {
    pub fn centroid(&self) -> Vec3 {
        self.members.iter().map(|m| m.point()).sum::<Vec3>() / self.members.len() as f64
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.members.iter().map(|m| m.point()).collect()
    }

    /// Member closest to the temporal midpoint (lowest index on ties).
    pub fn representative(&self) -> &LabeledSample {
        let first = self.members.first().expect("non-empty cluster").sample.t;
        let last = self.members.last().expect("non-empty cluster").sample.t;
        let mid = (first + last) / 2.0;
        self.members
            .iter()
            .min_by(|a, b| {
                (a.sample.t - mid)
                    .abs()
                    .total_cmp(&(b.sample.t - mid).abs())
                    .then(a.sample.index.cmp(&b.sample.index))
            })
            .expect("non-empty cluster")
    }

    /// Sum over index-contiguous member runs of `last - first + period`.
    pub fn duration(&self, period: f64) -> f64 {
        let mut total = 0.0;
        let mut start = 0;
        for i in 1..=self.members.len() {
            let breaks = i == self.members.len()
                || self.members[i].sample.index != self.members[i - 1].sample.index + 1;
            if breaks {
                total += run_duration(self.members[start].sample.t, self.members[i - 1].sample.t, period);
                start = i;
            }
        }
        total
    }
}

/// Greedy temporal grouping: a fixation joins the open cluster while it lies
/// within `interval` of the cluster's running centroid.
pub fn group_clusters(fixations: &[LabeledSample], interval: f64) -> Result<Vec<FixationCluster>> {
    if !(interval > 0.0) {
        return Err(Error::invalid("cluster interval must be positive"));
    }
    let mut clusters: Vec<FixationCluster> = Vec::new();
    let mut sum = Vec3::zeros();
    for s in fixations {
        if s.label != Label::Fixation || s.sample.hit.is_none() {
            return Err(Error::invalid("group_clusters expects fixation samples only"));
        }
        let p = s.point();
        let joins = clusters
            .last()
            .map(|c| (p - sum / c.members.len() as f64).norm() <= interval)
            .unwrap_or(false);
        if joins {
            clusters.last_mut().expect("checked").members.push(*s);
            sum += p;
        } else {
            clusters.push(FixationCluster { members: vec![*s] });
            sum = p;
        }
    }
    Ok(clusters)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomWalkParams {
    pub sigma: f64,
    pub damping: f64,
    pub rho_radius: f64,
}

const RW_TOLERANCE: f64 = 1e-9;
const RW_MAX_ITER: usize = 1000;

/// Damped random walk over cluster members.
///
/// Transitions follow `exp(-|x_i - x_j| / sigma)` (no self loops), row
/// normalized; restarts follow the local fixation density (members within
/// `rho_radius`). Returns the stationary vector and the iteration count.
pub fn stationary_distribution(points: &[Vec3], params: &RandomWalkParams) -> (Vec<f64>, usize) {
    let n = points.len();
    if n == 1 {
        return (vec![1.0], 0);
    }
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut rows[i * n..(i + 1) * n];
        for j in 0..n {
            if i != j {
                row[j] = (-(points[i] - points[j]).norm() / params.sigma).exp();
            }
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|w| *w /= total);
        } else {
            // all affinities underflowed: spread evenly over the other members
            for (j, w) in row.iter_mut().enumerate() {
                *w = if j == i { 0.0 } else { 1.0 / (n - 1) as f64 };
            }
        }
    }
    let r2 = params.rho_radius * params.rho_radius;
    let mut rho: Vec<f64> = (0..n)
        .map(|i| points.iter().filter(|q| (*q - points[i]).norm_squared() <= r2).count() as f64)
        .collect();
    let rho_sum: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|r| *r /= rho_sum);

    let mut pi = vec![1.0 / n as f64; n];
    let mut iterations = 0;
    for it in 1..=RW_MAX_ITER {
        let mut next: Vec<f64> = rho.iter().map(|r| (1.0 - params.damping) * r).collect();
        for i in 0..n {
            let w = params.damping * pi[i];
            for j in 0..n {
                next[j] += w * rows[i * n + j];
            }
        }
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        iterations = it;
        if change < RW_TOLERANCE {
            break;
        }
    }
    (pi, iterations)
}

/// A cluster collapsed to its random-walk center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationPoint {
    pub position: Vec3,
    pub head_position: Vec3,
    /// Euler degrees.
    pub head_orientation: Vec3,
    /// Seconds.
    pub duration: f64,
    /// Member count.
    pub weight: usize,
    /// Sample index of the chosen center.
    pub center_sample: usize,
    pub t_start: f64,
}

/// Picks the member with the largest stationary probability (lowest sample
/// index on ties) as the AOI center.
pub fn cluster_center_random_walk(
    cluster: &FixationCluster,
    params: &RandomWalkParams,
    sample_period: f64,
) -> Result<FixationPoint> {
    if cluster.members.is_empty() {
        return Err(Error::Empty("fixation cluster"));
    }
    let points = cluster.positions();
    let (pi, _) = stationary_distribution(&points, params);
    let best = (0..pi.len())
        .max_by(|&a, &b| {
            pi[a].total_cmp(&pi[b]).then(
                cluster.members[b]
                    .sample
                    .index
                    .cmp(&cluster.members[a].sample.index),
            )
        })
        .expect("non-empty");
    let rep = cluster.representative();
    Ok(FixationPoint {
        position: points[best],
        head_position: rep.sample.head_position,
        head_orientation: rep.sample.head_orientation,
        duration: cluster.duration(sample_period),
        weight: cluster.members.len(),
        center_sample: cluster.members[best].sample.index,
        t_start: cluster.members[0].sample.t,
    })
}

/// Angle in degrees between two consecutive fixations, seen from the head
/// position of the later one.
pub fn saccade_amplitude(a: &FixationPoint, b: &FixationPoint) -> Result<f64> {
    let eye = b.head_position;
    let da = a.position - eye;
    let db = b.position - eye;
    let (na, nb) = (da.norm(), db.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok((da.dot(&db) / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees())
}

/// Everything extracted from one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationOutcome {
    pub labels: Vec<LabeledSample>,
    pub clusters: Vec<FixationCluster>,
    pub fixations: Vec<FixationPoint>,
}

impl FixationOutcome {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| l.label == label).count()
    }
}

/// Classification, grouping and centering for one recording. Clusters whose
/// duration falls below the minimum are relabeled as saccades, so every
/// sample ends up in exactly one of: a cluster, the saccades, the misses.
pub fn extract_fixations(samples: &[TrackedSample], params: &FixationParams) -> Result<FixationOutcome> {
    let mut labels = classify_ivt(samples, params)?;
    let fixation_samples: Vec<LabeledSample> = labels
        .iter()
        .filter(|l| l.label == Label::Fixation)
        .copied()
        .collect();
    let period = params.sample_period();
    let rw = params.random_walk();
    let mut clusters = Vec::new();
    let mut fixations = Vec::new();
    for cluster in group_clusters(&fixation_samples, params.cluster_interval)? {
        if cluster.duration(period) + DURATION_SLACK < params.min_duration {
            for m in &cluster.members {
                labels[m.sample.index].label = Label::Saccade;
            }
            continue;
        }
        fixations.push(cluster_center_random_walk(&cluster, &rw, period)?);
        clusters.push(cluster);
    }
    Ok(FixationOutcome {
        labels,
        clusters,
        fixations,
    })
}
