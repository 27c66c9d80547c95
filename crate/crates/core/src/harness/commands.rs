use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io;
use super::synth::{generate, SynthOutput, SyntheticScenario};
use crate::attention::{bucket_poses, build_ground_truth, splat_fdm, SubjectFixations};
use crate::evaluation::{
    center_and_depth_bias, initial_move_direction, inter_observer_test, observer_similarities, saccade_summary,
    score_view, viewing_direction_dependence, weighted_eval, BiasReport, DependenceReport, InterObserverReport,
    Metric, MoveDirection, PoseFdm, SaccadeSummary, ViewScore,
};
use crate::fixation::{extract_fixations, FixationOutcome, Label, TrackedSample};
use crate::gaze::{trace_recording, PoseSample};
use crate::mesh::{load_mesh, Mesh, MeshFormat, MeshIndex};
use crate::saliency::{baseline_curvature_saliency, default_scales, saliency_map, CurvatureParams};
use crate::visibility::{visible_points, ViewPose};
use crate::{Error, Result, Vec3, VERSION};

pub const FIXATION_SUFFIX: &str = ".fixations.csv";

/// Loads a mesh (OBJ or ASCII PLY) and applies the configured placement.
pub fn load_scene_mesh(path: &Path, cfg: &RunConfig) -> Result<Mesh> {
    load_mesh(path, MeshFormat::from_path(path)?, &cfg.placement())
}

/// Mesh id: the file name without extension.
pub fn mesh_id(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string()
}

/// Gaze tracing followed by fixation extraction for one recording.
pub fn process_recording(samples: &[PoseSample], index: &MeshIndex, cfg: &RunConfig) -> Result<FixationOutcome> {
    let hits = trace_recording(samples, index, &cfg.gaze())?;
    let tracked: Vec<TrackedSample> = samples
        .iter()
        .zip(hits)
        .enumerate()
        .map(|(index, (s, hit))| TrackedSample {
            index,
            t: s.t,
            head_position: s.position,
            head_orientation: s.orientation,
            hit,
        })
        .collect();
    extract_fixations(&tracked, &cfg.fixation())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSummary {
    pub subject: String,
    pub samples: usize,
    pub fixation_samples: usize,
    pub saccade_samples: usize,
    pub miss_samples: usize,
    pub fixations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSummary {
    pub version: String,
    pub mesh_id: String,
    pub subjects: Vec<SubjectSummary>,
    pub total_fixations: usize,
    pub mean_fixations_per_subject: f64,
}

/// Turns every `*.csv` recording in `recordings` into
/// `<out>/<mesh_id>/<subject>.fixations.csv` plus a `summary.json`.
pub fn cmd_process(mesh_path: &Path, recordings: &Path, out: &Path, cfg: &RunConfig) -> Result<ProcessSummary> {
    let mesh = load_scene_mesh(mesh_path, cfg)?;
    let id = mesh_id(mesh_path);
    let index = MeshIndex::new(&mesh);
    let files = io::list_files(recordings, ".csv")?;
    if files.is_empty() {
        return Err(Error::Empty("recordings directory"));
    }
    let dir = out.join(&id);
    let mut subjects = Vec::new();
    for file in files {
        let subject = io::stem(&file, ".csv");
        let samples = io::read_recording(&file)?;
        let outcome = process_recording(&samples, &index, cfg)?;
        if outcome.fixations.is_empty() {
            log::warn!("{subject}: no fixations on {id}");
        }
        io::write_fixations(&dir.join(format!("{subject}{FIXATION_SUFFIX}")), &outcome.fixations)?;
        subjects.push(SubjectSummary {
            subject,
            samples: samples.len(),
            fixation_samples: outcome.count(Label::Fixation),
            saccade_samples: outcome.count(Label::Saccade),
            miss_samples: outcome.count(Label::Miss),
            fixations: outcome.fixations.len(),
        });
    }
    let total: usize = subjects.iter().map(|s| s.fixations).sum();
    let summary = ProcessSummary {
        version: VERSION.to_string(),
        mesh_id: id,
        total_fixations: total,
        mean_fixations_per_subject: total as f64 / subjects.len() as f64,
        subjects,
    };
    io::write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Reads every `<subject>.fixations.csv` in `dir`.
pub fn read_subjects(dir: &Path) -> Result<Vec<SubjectFixations>> {
    io::list_files(dir, FIXATION_SUFFIX)?
        .into_iter()
        .map(|p| {
            Ok(SubjectFixations {
                subject: io::stem(&p, FIXATION_SUFFIX),
                fixations: io::read_fixations(&p)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub pose_id: String,
    pub position: [f64; 3],
    pub orientation: [f64; 3],
    #[serde(default)]
    pub visitors: usize,
    #[serde(default)]
    pub fixations: usize,
    #[serde(default)]
    pub visible: usize,
}

impl PoseEntry {
    pub fn view_pose(&self, cfg: &RunConfig) -> ViewPose {
        ViewPose {
            position: self.position.into(),
            orientation: self.orientation.into(),
            camera: cfg.camera(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosesFile {
    pub version: String,
    pub mesh_id: String,
    pub vertex_count: usize,
    pub poses: Vec<PoseEntry>,
}

pub const POSES_FILE: &str = "poses.json";

/// Per-subject and pooled fixation density maps, plus one ground-truth map
/// and visibility field per pose bucket under `<out>/gt`.
pub fn cmd_fdm(mesh_path: &Path, fixations: &Path, out: &Path, cfg: &RunConfig) -> Result<PosesFile> {
    let mesh = load_scene_mesh(mesh_path, cfg)?;
    let id = mesh_id(mesh_path);
    let subjects = read_subjects(fixations)?;
    if subjects.is_empty() {
        return Err(Error::Empty("fixation directory"));
    }
    let splat = cfg.splat();
    let mut pooled = vec![0.0; mesh.vertex_count()];
    for s in &subjects {
        let map = splat_fdm(&mesh, &s.fixations, &splat)?;
        for (p, v) in pooled.iter_mut().zip(&map.values) {
            *p += v;
        }
        io::write_values(&out.join("subjects").join(format!("{}.csv", s.subject)), &map.values)?;
    }
    io::write_values(&out.join("pooled.csv"), &pooled)?;
    io::write_colored_ply(&out.join("pooled.ply"), &mesh, &pooled)?;

    let gt_dir = out.join("gt");
    let mut poses = Vec::new();
    for bucket in bucket_poses(&subjects, &cfg.buckets()) {
        let mut pose = bucket.pose;
        pose.camera = cfg.camera();
        let vs = visible_points(&mesh, &pose, &cfg.visibility())?;
        let gt = build_ground_truth(&mesh, &subjects, &bucket.key, &vs, &cfg.buckets(), &splat)?;
        io::write_values(&gt_dir.join(format!("{}.csv", gt.pose_id)), &gt.map.values)?;
        io::write_visibility(&gt_dir.join(format!("{}.visibility.csv", gt.pose_id)), &vs.mask)?;
        poses.push(PoseEntry {
            pose_id: gt.pose_id,
            position: pose.position.into(),
            orientation: pose.orientation.into(),
            visitors: gt.visitors,
            fixations: bucket.members.len(),
            visible: vs.len(),
        });
    }
    let file = PosesFile {
        version: VERSION.to_string(),
        mesh_id: id,
        vertex_count: mesh.vertex_count(),
        poses,
    };
    io::write_json(&gt_dir.join(POSES_FILE), &file)?;
    Ok(file)
}

/// A pose given on the command line: `px,py,pz,ox,oy,oz`.
pub fn parse_pose(text: &str) -> Result<PoseEntry> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("bad pose: {text}")))?;
    if v.len() != 6 || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("pose needs six finite numbers: {text}")));
    }
    Ok(PoseEntry {
        pose_id: String::new(),
        position: [v[0], v[1], v[2]],
        orientation: [v[3], v[4], v[5]],
        visitors: 0,
        fixations: 0,
        visible: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMeta {
    pub version: String,
    pub pose_id: String,
    pub pose_hash: String,
    pub position: [f64; 3],
    pub orientation: [f64; 3],
    pub visible: usize,
    pub empty: bool,
    pub subsampled: bool,
    pub isolated: usize,
    pub config: BTreeMap<String, String>,
}

fn config_map(cfg: &RunConfig) -> BTreeMap<String, String> {
    cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Saliency per pose: `<id>.csv` (`vertex_id,S,U,C`), `<id>.ply` and
/// `<id>.meta.json`. Poses without an id are named by their hash.
pub fn cmd_saliency(mesh_path: &Path, poses: &[PoseEntry], out: &Path, cfg: &RunConfig) -> Result<Vec<SaliencyMeta>> {
    if poses.is_empty() {
        return Err(Error::Empty("pose list"));
    }
    let mesh = load_scene_mesh(mesh_path, cfg)?;
    let params = cfg.saliency();
    let mut metas = Vec::new();
    for entry in poses {
        let pose = entry.view_pose(cfg);
        let map = saliency_map(&mesh, &pose, &params)?;
        let id = if entry.pose_id.is_empty() {
            map.pose_id.clone()
        } else {
            entry.pose_id.clone()
        };
        if map.empty {
            log::warn!("pose {id}: no visible vertices");
        }
        io::write_saliency(&out.join(format!("{id}.csv")), &map)?;
        io::write_colored_ply(&out.join(format!("{id}.ply")), &mesh, &map.s)?;
        let meta = SaliencyMeta {
            version: VERSION.to_string(),
            pose_id: id.clone(),
            pose_hash: map.pose_id.clone(),
            position: entry.position,
            orientation: entry.orientation,
            visible: map.visible.len(),
            empty: map.empty,
            subsampled: map.subsampled,
            isolated: map.isolated,
            config: config_map(cfg),
        };
        io::write_json(&out.join(format!("{id}.meta.json")), &meta)?;
        metas.push(meta);
    }
    Ok(metas)
}

/// Curvature baseline as `baseline.csv`/`baseline.ply`, and as one
/// `<id>.csv` per pose when poses are given.
pub fn cmd_baseline(mesh_path: &Path, poses: &[PoseEntry], out: &Path, cfg: &RunConfig) -> Result<Vec<f64>> {
    let mesh = load_scene_mesh(mesh_path, cfg)?;
    let params = CurvatureParams {
        scales: default_scales(&mesh, cfg.baseline_eps_rel),
        ..cfg.curvature()
    };
    let values = baseline_curvature_saliency(&mesh, &params)?;
    io::write_values(&out.join("baseline.csv"), &values)?;
    io::write_colored_ply(&out.join("baseline.ply"), &mesh, &values)?;
    for p in poses {
        let id = if p.pose_id.is_empty() {
            p.view_pose(cfg).hash_id()
        } else {
            p.pose_id.clone()
        };
        io::write_values(&out.join(format!("{id}.csv")), &values)?;
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub cc: f64,
    pub se: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub pose_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub views: Vec<ViewScore>,
    pub skipped: Vec<Skipped>,
    pub aggregate: Option<Aggregate>,
}

/// Scores predictions against ground truth per pose on the visible set and
/// aggregates with visitor weights. The prediction directory must hold
/// exactly one `<pose_id>.csv` per ground-truth pose.
pub fn cmd_evaluate(gt_dir: &Path, pred_dir: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    let poses: PosesFile = io::read_json(&gt_dir.join(POSES_FILE))?;
    let n = poses.vertex_count;
    let expected: Vec<&str> = poses.poses.iter().map(|p| p.pose_id.as_str()).collect();
    let found: Vec<String> = io::list_files(pred_dir, ".csv")?
        .iter()
        .map(|p| io::stem(p, ".csv"))
        .filter(|s| !s.ends_with(".visibility"))
        .collect();
    let missing: Vec<&str> = expected.iter().copied().filter(|e| !found.iter().any(|f| f == e)).collect();
    let extra: Vec<&String> = found
        .iter()
        .filter(|f| f.as_str() != "baseline" && !expected.contains(&f.as_str()))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::PoseMismatch(format!("missing {missing:?}, unexpected {extra:?}")));
    }
    let mut views = Vec::new();
    let mut skipped = Vec::new();
    for p in &poses.poses {
        let g = io::read_values(&gt_dir.join(format!("{}.csv", p.pose_id)), n)?;
        let mask = io::read_visibility(&gt_dir.join(format!("{}.visibility.csv", p.pose_id)), n)?;
        let r = io::read_values(&pred_dir.join(format!("{}.csv", p.pose_id)), n)?;
        let domain: Vec<u32> = (0..n as u32).filter(|&i| mask[i as usize]).collect();
        match score_view(&p.pose_id, &g, &r, Some(&domain), p.visitors.max(1), cfg.eps_floor, cfg.se_variant) {
            Ok(v) => views.push(v),
            Err(e) => {
                log::warn!("pose {}: skipped ({e})", p.pose_id);
                skipped.push(Skipped {
                    pose_id: p.pose_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    let aggregate = if views.is_empty() {
        None
    } else {
        Some(Aggregate {
            cc: weighted_eval(&views, Metric::Cc)?,
            se: weighted_eval(&views, Metric::Se)?,
            kl: weighted_eval(&views, Metric::Kl)?,
        })
    };
    Ok(EvalReport {
        version: VERSION.to_string(),
        views,
        skipped,
        aggregate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseBias {
    pub pose_id: String,
    pub fixations: usize,
    pub report: BiasReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshAnalysis {
    pub mesh_id: String,
    pub subjects: usize,
    pub fixations: usize,
    pub bias: Vec<PoseBias>,
    /// Share of poses where fixations sit closer to the visible center than
    /// the visible vertices do.
    pub center_bias_share: Option<f64>,
    pub depth_bias_share: Option<f64>,
    pub saccades: Option<SaccadeSummary>,
    pub dependence: Option<DependenceReport>,
    pub first_moves: BTreeMap<String, usize>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub version: String,
    pub meshes: Vec<MeshAnalysis>,
    pub inter_observer: Option<InterObserverReport>,
    pub notes: Vec<String>,
}

fn find_mesh(mesh_dir: &Path, id: &str) -> Result<PathBuf> {
    for ext in ["ply", "obj"] {
        let p = mesh_dir.join(format!("{id}.{ext}"));
        if p.is_file() {
            return Ok(p);
        }
    }
    Err(Error::Insufficient(format!("no mesh file for {id} in {}", mesh_dir.display())))
}

fn share(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (mut yes, mut n) = (0usize, 0usize);
    for f in flags {
        n += 1;
        yes += f as usize;
    }
    (n > 0).then(|| yes as f64 / n as f64)
}

/// Runs the behavioral studies over `<fixation_root>/<mesh_id>/` for every
/// mesh id found, with meshes taken from `mesh_dir`. Head recordings under
/// `<recordings_root>/<mesh_id>/` feed the first-move study when given.
/// Writes `analysis.json`, `dependence.csv` and `bias.csv` into `out`.
pub fn cmd_analyze(
    fixation_root: &Path,
    mesh_dir: &Path,
    recordings_root: Option<&Path>,
    out: &Path,
    cfg: &RunConfig,
) -> Result<AnalysisReport> {
    let mut ids: Vec<String> = std::fs::read_dir(fixation_root)
        .map_err(|e| Error::io(fixation_root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter_map(|p| p.file_name().and_then(|n| n.to_str()).map(String::from))
        .collect();
    ids.sort();
    let mut meshes = Vec::new();
    let mut groups: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    let splat = cfg.splat();
    for id in ids {
        let subjects = read_subjects(&fixation_root.join(&id))?;
        let total: usize = subjects.iter().map(|s| s.fixations.len()).sum();
        if total == 0 {
            continue;
        }
        let mesh = load_scene_mesh(&find_mesh(mesh_dir, &id)?, cfg)?;
        let mut notes = Vec::new();

        let mut fdms = Vec::new();
        for s in &subjects {
            fdms.push(splat_fdm(&mesh, &s.fixations, &splat)?.values);
        }
        groups.push((mesh.vertex_count(), fdms));

        let mut bias = Vec::new();
        let mut pose_fdms = Vec::new();
        for bucket in bucket_poses(&subjects, &cfg.buckets()) {
            let mut pose = bucket.pose;
            pose.camera = cfg.camera();
            let vs = visible_points(&mesh, &pose, &cfg.visibility())?;
            let fixes: Vec<_> = bucket
                .members
                .iter()
                .map(|&(s, f)| subjects[s].fixations[f])
                .collect();
            if let Some(center) = vs.center {
                let visible: Vec<Vec3> = vs.ids.iter().map(|&i| mesh.vertices()[i as usize]).collect();
                let points: Vec<Vec3> = fixes.iter().map(|f| f.position).collect();
                bias.push(PoseBias {
                    pose_id: bucket.key.id(),
                    fixations: fixes.len(),
                    report: center_and_depth_bias(&points, &visible, &center, &pose.position)?,
                });
            }
            pose_fdms.push(PoseFdm {
                position: pose.position,
                orientation: pose.orientation,
                values: splat_fdm(&mesh, &fixes, &splat)?.values,
            });
        }
        let dependence = match viewing_direction_dependence(&pose_fdms, &cfg.dependence()) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("viewing-direction dependence: {e}"));
                None
            }
        };

        let mut amplitudes = Vec::new();
        for s in &subjects {
            if let Ok(sum) = saccade_summary(&s.fixations) {
                amplitudes.push(sum);
            }
        }
        let saccades = if amplitudes.is_empty() {
            notes.push("saccade amplitude: fewer than two fixations per subject".into());
            None
        } else {
            let count: usize = amplitudes.iter().map(|a| a.count).sum();
            Some(SaccadeSummary {
                count,
                mean_deg: amplitudes.iter().map(|a| a.mean_deg * a.count as f64).sum::<f64>() / count as f64,
                median_deg: {
                    let mut m: Vec<f64> = amplitudes.iter().map(|a| a.median_deg).collect();
                    m.sort_by(f64::total_cmp);
                    m[m.len() / 2]
                },
            })
        };

        let mut first_moves = BTreeMap::new();
        if let Some(root) = recordings_root {
            let dir = root.join(&id);
            if dir.is_dir() {
                for f in io::list_files(&dir, ".csv")? {
                    let rec = io::read_recording(&f)?;
                    let dir = match initial_move_direction(&rec, cfg.move_gate) {
                        Ok(MoveDirection::Left) => "left",
                        Ok(MoveDirection::Right) => "right",
                        Ok(MoveDirection::None) => "none",
                        Err(_) => "none",
                    };
                    *first_moves.entry(dir.to_string()).or_insert(0) += 1;
                }
            }
        }

        meshes.push(MeshAnalysis {
            mesh_id: id,
            subjects: subjects.len(),
            fixations: total,
            center_bias_share: share(bias.iter().map(|b| b.report.center_biased())),
            depth_bias_share: share(bias.iter().map(|b| b.report.depth_biased())),
            bias,
            saccades,
            dependence,
            first_moves,
            notes,
        });
    }
    if meshes.is_empty() {
        return Err(Error::Insufficient(format!("no fixations under {}", fixation_root.display())));
    }

    let mut notes = Vec::new();
    // cross-mesh comparison needs a shared vertex order
    let n0 = groups[0].0;
    let aligned: Vec<Vec<Vec<f64>>> = if groups.iter().all(|g| g.0 == n0) {
        groups.into_iter().map(|g| g.1).collect()
    } else {
        notes.push("inter-observer: meshes differ in vertex count, cross-mesh pairs unavailable".into());
        Vec::new()
    };
    let inter_observer = match observer_similarities(&aligned).and_then(|(s, c)| inter_observer_test(&s, &c)) {
        Ok(r) if !aligned.is_empty() => Some(r),
        Ok(_) => None,
        Err(e) => {
            notes.push(format!("inter-observer: {e}"));
            None
        }
    };

    let report = AnalysisReport {
        version: VERSION.to_string(),
        meshes,
        inter_observer,
        notes,
    };
    io::write_json(&out.join("analysis.json"), &report)?;
    write_tables(&report, out)?;
    Ok(report)
}

fn write_tables(report: &AnalysisReport, out: &Path) -> Result<()> {
    let mut dep = String::from("mesh_id,signed,magnitude,poses,pairs\n");
    let mut bias = String::from("mesh_id,pose_id,fixations,fixation_to_center,visible_to_center,fixation_to_head,visible_to_head\n");
    for m in &report.meshes {
        if let Some(d) = &m.dependence {
            dep.push_str(&format!("{},{},{},{},{}\n", m.mesh_id, d.signed, d.magnitude, d.poses, d.pairs));
        }
        for b in &m.bias {
            let r = &b.report;
            bias.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.mesh_id,
                b.pose_id,
                b.fixations,
                r.fixation_to_center,
                r.visible_to_center,
                r.fixation_to_head,
                r.visible_to_head
            ));
        }
    }
    io::write_atomic(&out.join("dependence.csv"), dep.as_bytes())?;
    io::write_atomic(&out.join("bias.csv"), bias.as_bytes())
}

/// Generates recordings for `scenario` on the mesh, writing one
/// `<subject>.csv` per subject and `targets.json` into `out`.
pub fn cmd_synth(scenario: &SyntheticScenario, mesh_path: &Path, out: &Path, cfg: &RunConfig) -> Result<SynthOutput> {
    let mesh = load_scene_mesh(mesh_path, cfg)?;
    let output = generate(
        &mesh,
        scenario,
        &cfg.gaze(),
        &cfg.camera(),
        &cfg.visibility(),
        4.0 * cfg.cluster_interval,
    )?;
    for r in &output.recordings {
        io::write_recording(&out.join(format!("{}.csv", r.subject)), &r.samples)?;
    }
    io::write_json(&out.join("targets.json"), &output.target_file(&mesh, &scenario.mesh_id))?;
    Ok(output)
}
