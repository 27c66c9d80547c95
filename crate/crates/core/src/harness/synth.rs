//! Synthetic head-and-gaze recordings with planted gaze targets.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gaze::{eye_offset_for_target, euler_from_direction, head_orientation, screen_axes, validate_recording, GazeParams, PoseSample};
use crate::mesh::{Mesh, MeshIndex};
use crate::visibility::{visible_points, Camera, ViewPose, VisibilityParams};
use crate::{Error, Result, Vec3};

/// Lag-one correlation of the angular gaze noise.
const NOISE_CORRELATION: f64 = 0.95;
/// Poses per trajectory used to check target visibility.
const VISIBILITY_CHECKS: usize = 9;
/// Automatic targets must face every check pose at least this much
/// (cosine), keeping them off the silhouette.
const MIN_FACING: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub mesh_id: String,
    /// Orbit center; the mesh bounding-box center when `None`.
    pub center: Option<Vec3>,
    /// Distance from the head to the orbit center, meters.
    pub radius: f64,
    /// Head height, meters.
    pub height: f64,
    /// Azimuth of the first sample; 0 is on the -Z side of the center.
    pub start_deg: f64,
    /// Azimuth swept over the recording.
    pub span_deg: f64,
    /// Planted target vertices; chosen automatically when empty.
    pub targets: Vec<u32>,
    pub target_count: usize,
    /// Seconds spent on each target before moving to the next.
    pub segment_duration: f64,
    /// Standard deviation of the angular gaze noise, degrees.
    pub noise_deg: f64,
    pub duration: f64,
    pub rate_hz: f64,
    pub subjects: usize,
    /// Start azimuth offset between consecutive subjects.
    pub subject_spread_deg: f64,
    pub seed: u64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            mesh_id: "mesh".into(),
            center: None,
            radius: 1.5,
            height: 1.6,
            start_deg: 0.0,
            span_deg: 60.0,
            targets: Vec::new(),
            target_count: 3,
            segment_duration: 1.0,
            noise_deg: 0.0,
            duration: 10.0,
            rate_hz: 120.0,
            subjects: 1,
            subject_spread_deg: 0.0,
            seed: 0,
        }
    }
}

fn scenario_err(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl SyntheticScenario {
    /// Same `key = value` format as the run configuration.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        let mut center = [None; 3];
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| scenario_err(format!("line {}: expected key = value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || -> Result<f64> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| scenario_err(format!("{k}: not a number: {v}")))
            };
            let int = || -> Result<u64> { v.parse().map_err(|_| scenario_err(format!("{k}: not an integer: {v}"))) };
            match k {
                "mesh_id" => s.mesh_id = v.to_string(),
                "center_x" => center[0] = Some(num()?),
                "center_y" => center[1] = Some(num()?),
                "center_z" => center[2] = Some(num()?),
                "radius" => s.radius = num()?,
                "height" => s.height = num()?,
                "start_deg" => s.start_deg = num()?,
                "span_deg" => s.span_deg = num()?,
                "targets" => {
                    s.targets = if v == "auto" {
                        Vec::new()
                    } else {
                        v.split(',')
                            .map(|t| t.trim().parse().map_err(|_| scenario_err(format!("targets: bad id {t}"))))
                            .collect::<Result<_>>()?
                    }
                }
                "target_count" => s.target_count = int()? as usize,
                "segment_duration" => s.segment_duration = num()?,
                "noise_deg" => s.noise_deg = num()?,
                "duration" => s.duration = num()?,
                "rate_hz" => s.rate_hz = num()?,
                "subjects" => s.subjects = int()? as usize,
                "subject_spread_deg" => s.subject_spread_deg = num()?,
                "seed" => s.seed = int()?,
                _ => return Err(scenario_err(format!("unknown key: {k}"))),
            }
        }
        s.center = match center {
            [None, None, None] => None,
            [Some(x), Some(y), Some(z)] => Some(Vec3::new(x, y, z)),
            _ => return Err(scenario_err("center needs all of center_x, center_y, center_z")),
        };
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.rate_hz).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.duration > 0.0 && self.rate_hz > 0.0 && self.segment_duration > 0.0) {
            return Err(scenario_err("radius, duration, rate and segment duration must be positive"));
        }
        if !(self.noise_deg >= 0.0) {
            return Err(scenario_err("noise must be non-negative"));
        }
        if self.subjects == 0 {
            return Err(scenario_err("need at least one subject"));
        }
        if self.targets.is_empty() && self.target_count == 0 {
            return Err(scenario_err("need at least one target"));
        }
        if self.sample_count() < 2 {
            return Err(scenario_err("recording too short"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub subject: String,
    pub samples: Vec<PoseSample>,
    /// Planted target of each sample.
    pub target_of_sample: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub center: Vec3,
    pub targets: Vec<u32>,
    pub recordings: Vec<SyntheticRecording>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFile {
    pub mesh_id: String,
    pub center: [f64; 3],
    pub targets: Vec<TargetEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub vertex_id: u32,
    pub position: [f64; 3],
}

impl SynthOutput {
    pub fn target_file(&self, mesh: &Mesh, mesh_id: &str) -> TargetFile {
        TargetFile {
            mesh_id: mesh_id.to_string(),
            center: self.center.into(),
            targets: self
                .targets
                .iter()
                .map(|&v| TargetEntry {
                    vertex_id: v,
                    position: mesh.vertices()[v as usize].into(),
                })
                .collect(),
        }
    }
}

struct Trajectory {
    positions: Vec<Vec3>,
    orientations: Vec<Vec3>,
}

fn trajectory(s: &SyntheticScenario, center: &Vec3, subject: usize) -> Result<Trajectory> {
    let dy = s.height - center.y;
    if dy.abs() >= s.radius {
        return Err(scenario_err("head height is out of reach of the orbit radius"));
    }
    let r_h = (s.radius * s.radius - dy * dy).sqrt();
    let n = s.sample_count();
    let start = s.start_deg + subject as f64 * s.subject_spread_deg;
    let mut positions = Vec::with_capacity(n);
    let mut orientations = Vec::with_capacity(n);
    for k in 0..n {
        let theta = (start + s.span_deg * k as f64 / (n - 1) as f64).to_radians();
        let p = Vec3::new(center.x + r_h * theta.sin(), s.height, center.z - r_h * theta.cos());
        orientations.push(euler_from_direction(&(center - p)));
        positions.push(p);
    }
    Ok(Trajectory {
        positions,
        orientations,
    })
}

/// Generates recordings whose sight-lines pass through the planted targets,
/// perturbed by correlated angular noise.
pub fn generate(
    mesh: &Mesh,
    scenario: &SyntheticScenario,
    gaze: &GazeParams,
    camera: &Camera,
    visibility: &VisibilityParams,
    min_target_spacing: f64,
) -> Result<SynthOutput> {
    scenario.validate()?;
    let (lo, hi) = mesh.bounding_box();
    let center = scenario.center.unwrap_or((lo + hi) / 2.0);
    let trajectories: Vec<Trajectory> = (0..scenario.subjects)
        .map(|s| trajectory(scenario, &center, s))
        .collect::<Result<_>>()?;
    for t in &trajectories {
        if t.positions.iter().any(|p| (0..3).all(|a| p[a] >= lo[a] && p[a] <= hi[a])) {
            return Err(scenario_err("trajectory enters the mesh bounding box"));
        }
    }

    // visibility at a few poses along every trajectory
    let mut seen = vec![0usize; mesh.vertex_count()];
    let mut facing_ok = vec![0usize; mesh.vertex_count()];
    let mut check_poses = Vec::new();
    for t in &trajectories {
        let n = t.positions.len();
        for c in 0..VISIBILITY_CHECKS {
            let k = c * (n - 1) / (VISIBILITY_CHECKS - 1);
            let pose = ViewPose {
                position: t.positions[k],
                orientation: t.orientations[k],
                camera: *camera,
            };
            for id in visible_points(mesh, &pose, visibility)?.ids {
                let i = id as usize;
                seen[i] += 1;
                let to_eye = pose.position - mesh.vertices()[i];
                if mesh.normals()[i].dot(&to_eye) >= MIN_FACING * to_eye.norm() {
                    facing_ok[i] += 1;
                }
            }
            check_poses.push(pose.position);
        }
    }
    let checks = check_poses.len();
    let index = MeshIndex::new(mesh);
    let reachable = |v: u32| {
        let tp = mesh.vertices()[v as usize];
        check_poses.iter().all(|p| {
            let d = tp - p;
            let dist = d.norm();
            index
                .bvh
                .intersect(p, &(d / dist))
                .is_some_and(|h| (h.t - dist).abs() < 1e-9)
        })
    };

    let targets = if scenario.targets.is_empty() {
        let mut candidates: Vec<u32> = (0..mesh.vertex_count() as u32)
            .filter(|&v| facing_ok[v as usize] == checks)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        candidates.shuffle(&mut rng);
        let mut chosen: Vec<u32> = Vec::new();
        for v in candidates {
            let p = mesh.vertices()[v as usize];
            if chosen
                .iter()
                .all(|&c| (mesh.vertices()[c as usize] - p).norm() >= min_target_spacing)
                && reachable(v)
            {
                chosen.push(v);
                if chosen.len() == scenario.target_count {
                    break;
                }
            }
        }
        if chosen.len() < scenario.target_count {
            return Err(scenario_err(format!(
                "only {} vertices qualify as targets, wanted {}",
                chosen.len(),
                scenario.target_count
            )));
        }
        chosen
    } else {
        for &v in &scenario.targets {
            if v as usize >= mesh.vertex_count() {
                return Err(scenario_err(format!("target {v} is not a mesh vertex")));
            }
            if seen[v as usize] == 0 {
                return Err(scenario_err(format!("target {v} is never visible along the trajectory")));
            }
        }
        scenario.targets.clone()
    };

    let sigma = scenario.noise_deg.to_radians();
    let innovation = (1.0 - NOISE_CORRELATION * NOISE_CORRELATION).sqrt();
    let mut recordings = Vec::with_capacity(trajectories.len());
    for (subject, traj) in trajectories.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(subject as u64 + 1);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let mut noise = [sigma * draw(), sigma * draw()];
        let mut samples = Vec::with_capacity(traj.positions.len());
        let mut target_of_sample = Vec::with_capacity(traj.positions.len());
        for (k, (p, o)) in traj.positions.iter().zip(&traj.orientations).enumerate() {
            let t = k as f64 / scenario.rate_hz;
            if k > 0 {
                for e in &mut noise {
                    *e = NOISE_CORRELATION * *e + innovation * sigma * draw();
                }
            }
            let seg = (t / scenario.segment_duration + 1e-9).floor() as usize;
            let target = targets[seg % targets.len()];
            let tp = mesh.vertices()[target as usize];
            let forward = head_orientation(o);
            let aim = if sigma > 0.0 {
                let (ax, ay) = screen_axes(&forward)?;
                let d = tp - p;
                let dist = d.norm();
                p + (d / dist + ax * noise[0].tan() + ay * noise[1].tan()) * dist
            } else {
                tp
            };
            let eye_offset = eye_offset_for_target(p, &forward, gaze.d_screen, &aim)?;
            if eye_offset.norm() > gaze.max_eye_offset {
                return Err(scenario_err(format!(
                    "target {target} needs an eye offset of {:.3} m at t = {t:.3} s",
                    eye_offset.norm()
                )));
            }
            samples.push(PoseSample {
                t,
                position: *p,
                orientation: *o,
                eye_offset,
            });
            target_of_sample.push(target);
        }
        validate_recording(&samples, gaze)?;
        recordings.push(SyntheticRecording {
            subject: format!("s{:02}", subject + 1),
            samples,
            target_of_sample,
        });
    }
    Ok(SynthOutput {
        center,
        targets,
        recordings,
    })
}
