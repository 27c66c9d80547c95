//! Flat `key = value` run configuration.

use std::path::Path;

use crate::attention::{BucketParams, SplatParams};
use crate::evaluation::{DependenceParams, SeVariant};
use crate::fixation::FixationParams;
use crate::gaze::GazeParams;
use crate::mesh::Placement;
use crate::saliency::{BiasForm, CurvatureParams, SaliencyParams, UniquenessParams};
use crate::visibility::{Camera, VisibilityParams};
use crate::{Error, Result, Vec3};

/// Every tunable of the pipeline. `None` fields are derived from others.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub h: f64,
    pub min_fixation_duration: f64,
    pub sample_rate_hz: f64,
    pub cluster_interval: f64,
    pub sigma_rw: Option<f64>,
    pub rw_damping: f64,
    pub rho_radius: Option<f64>,
    pub sigma_fdm: f64,
    pub splat_cutoff_sigmas: Option<f64>,
    pub sigma_c: f64,
    pub bias_squared: bool,
    pub fpfh_radius_rel: f64,
    pub uniqueness_exact_limit: usize,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub raster_width: u32,
    pub raster_height: u32,
    pub near_plane: f64,
    pub depth_tolerance_rel: f64,
    pub slope_bias_pixels: f64,
    pub d_screen: f64,
    pub max_eye_offset: f64,
    pub bucket_position: f64,
    pub bucket_angle_deg: f64,
    pub eps_b: f64,
    pub eps_floor: f64,
    pub se_variant: SeVariant,
    pub seed: u64,
    pub mesh_translate: Vec3,
    pub mesh_scale: f64,
    pub mesh_yaw_deg: f64,
    pub dependence_max_angle_deg: f64,
    pub dependence_repetitions: usize,
    pub dependence_subset_fraction: f64,
    pub dependence_min_poses: usize,
    pub dependence_head_height: Option<f64>,
    pub dependence_head_tolerance: f64,
    pub move_gate: f64,
    pub baseline_eps_rel: f64,
    pub baseline_guard: f64,
    pub baseline_range_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let fx = FixationParams::default();
        let cam = Camera::default();
        let vis = VisibilityParams::default();
        let gaze = GazeParams::default();
        let dep = DependenceParams::default();
        let sal = SaliencyParams::default();
        let curv = CurvatureParams::default();
        Self {
            h: fx.h,
            min_fixation_duration: fx.min_duration,
            sample_rate_hz: fx.sample_rate_hz,
            cluster_interval: fx.cluster_interval,
            sigma_rw: fx.sigma_rw,
            rw_damping: fx.damping,
            rho_radius: fx.rho_radius,
            sigma_fdm: SplatParams::default().sigma,
            splat_cutoff_sigmas: SplatParams::default().cutoff_sigmas,
            sigma_c: sal.sigma_c,
            bias_squared: sal.bias == BiasForm::Squared,
            fpfh_radius_rel: sal.fpfh_radius_rel,
            uniqueness_exact_limit: sal.uniqueness.exact_limit,
            hfov_deg: cam.hfov_deg,
            vfov_deg: cam.vfov_deg,
            raster_width: cam.width,
            raster_height: cam.height,
            near_plane: cam.near,
            depth_tolerance_rel: vis.depth_tolerance_rel,
            slope_bias_pixels: vis.slope_bias_pixels,
            d_screen: gaze.d_screen,
            max_eye_offset: gaze.max_eye_offset,
            bucket_position: BucketParams::default().position,
            bucket_angle_deg: BucketParams::default().angle_deg,
            eps_b: sal.uniqueness.eps_b,
            eps_floor: 1e-12,
            se_variant: SeVariant::UnitMean,
            seed: 0,
            mesh_translate: Vec3::zeros(),
            mesh_scale: 1.0,
            mesh_yaw_deg: 0.0,
            dependence_max_angle_deg: dep.max_angle_deg,
            dependence_repetitions: dep.repetitions,
            dependence_subset_fraction: dep.subset_fraction,
            dependence_min_poses: dep.min_poses,
            dependence_head_height: Some(1.6),
            dependence_head_tolerance: 0.25,
            move_gate: 0.15,
            baseline_eps_rel: 0.003,
            baseline_guard: curv.guard,
            baseline_range_floor: curv.range_floor,
        }
    }
}

fn opt(v: Option<f64>, none: &str) -> String {
    v.map_or(none.to_string(), |x| x.to_string())
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::Config(format!("{key}: not a number: {v}")))?;
    if !x.is_finite() {
        return Err(Error::Config(format!("{key}: must be finite")));
    }
    Ok(x)
}

fn parse_opt(key: &str, v: &str, none: &str) -> Result<Option<f64>> {
    if v == none {
        Ok(None)
    } else {
        parse_f64(key, v).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: not a non-negative integer: {v}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v}"))),
    }
}

impl RunConfig {
    /// Keys and values in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let se = match self.se_variant {
            SeVariant::UnitMean => "unit-mean",
            SeVariant::MinMax => "min-max",
        };
        vec![
            ("h", self.h.to_string()),
            ("min_fixation_duration", self.min_fixation_duration.to_string()),
            ("sample_rate_hz", self.sample_rate_hz.to_string()),
            ("cluster_interval", self.cluster_interval.to_string()),
            ("sigma_rw", opt(self.sigma_rw, "auto")),
            ("rw_damping", self.rw_damping.to_string()),
            ("rho_radius", opt(self.rho_radius, "auto")),
            ("sigma_fdm", self.sigma_fdm.to_string()),
            ("splat_cutoff_sigmas", opt(self.splat_cutoff_sigmas, "none")),
            ("sigma_c", self.sigma_c.to_string()),
            ("bias_squared", self.bias_squared.to_string()),
            ("fpfh_radius_rel", self.fpfh_radius_rel.to_string()),
            ("uniqueness_exact_limit", self.uniqueness_exact_limit.to_string()),
            ("hfov_deg", self.hfov_deg.to_string()),
            ("vfov_deg", self.vfov_deg.to_string()),
            ("raster_width", self.raster_width.to_string()),
            ("raster_height", self.raster_height.to_string()),
            ("near_plane", self.near_plane.to_string()),
            ("depth_tolerance_rel", self.depth_tolerance_rel.to_string()),
            ("slope_bias_pixels", self.slope_bias_pixels.to_string()),
            ("d_screen", self.d_screen.to_string()),
            ("max_eye_offset", self.max_eye_offset.to_string()),
            ("bucket_position", self.bucket_position.to_string()),
            ("bucket_angle_deg", self.bucket_angle_deg.to_string()),
            ("eps_b", self.eps_b.to_string()),
            ("eps_floor", self.eps_floor.to_string()),
            ("se_variant", se.to_string()),
            ("seed", self.seed.to_string()),
            ("mesh_translate_x", self.mesh_translate.x.to_string()),
            ("mesh_translate_y", self.mesh_translate.y.to_string()),
            ("mesh_translate_z", self.mesh_translate.z.to_string()),
            ("mesh_scale", self.mesh_scale.to_string()),
            ("mesh_yaw_deg", self.mesh_yaw_deg.to_string()),
            ("dependence_max_angle_deg", self.dependence_max_angle_deg.to_string()),
            ("dependence_repetitions", self.dependence_repetitions.to_string()),
            ("dependence_subset_fraction", self.dependence_subset_fraction.to_string()),
            ("dependence_min_poses", self.dependence_min_poses.to_string()),
            ("dependence_head_height", opt(self.dependence_head_height, "none")),
            ("dependence_head_tolerance", self.dependence_head_tolerance.to_string()),
            ("move_gate", self.move_gate.to_string()),
            ("baseline_eps_rel", self.baseline_eps_rel.to_string()),
            ("baseline_guard", self.baseline_guard.to_string()),
            ("baseline_range_floor", self.baseline_range_floor.to_string()),
        ]
    }

    /// Sets one key from its text form. Unknown keys are an error.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let f = |v: &str| parse_f64(key, v);
        match key {
            "h" => self.h = f(v)?,
            "min_fixation_duration" => self.min_fixation_duration = f(v)?,
            "sample_rate_hz" => self.sample_rate_hz = f(v)?,
            "cluster_interval" => self.cluster_interval = f(v)?,
            "sigma_rw" => self.sigma_rw = parse_opt(key, v, "auto")?,
            "rw_damping" => self.rw_damping = f(v)?,
            "rho_radius" => self.rho_radius = parse_opt(key, v, "auto")?,
            "sigma_fdm" => self.sigma_fdm = f(v)?,
            "splat_cutoff_sigmas" => self.splat_cutoff_sigmas = parse_opt(key, v, "none")?,
            "sigma_c" => self.sigma_c = f(v)?,
            "bias_squared" => self.bias_squared = parse_bool(key, v)?,
            "fpfh_radius_rel" => self.fpfh_radius_rel = f(v)?,
            "uniqueness_exact_limit" => self.uniqueness_exact_limit = parse_int(key, v)?,
            "hfov_deg" => self.hfov_deg = f(v)?,
            "vfov_deg" => self.vfov_deg = f(v)?,
            "raster_width" => self.raster_width = parse_int(key, v)?,
            "raster_height" => self.raster_height = parse_int(key, v)?,
            "near_plane" => self.near_plane = f(v)?,
            "depth_tolerance_rel" => self.depth_tolerance_rel = f(v)?,
            "slope_bias_pixels" => self.slope_bias_pixels = f(v)?,
            "d_screen" => self.d_screen = f(v)?,
            "max_eye_offset" => self.max_eye_offset = f(v)?,
            "bucket_position" => self.bucket_position = f(v)?,
            "bucket_angle_deg" => self.bucket_angle_deg = f(v)?,
            "eps_b" => self.eps_b = f(v)?,
            "eps_floor" => self.eps_floor = f(v)?,
            "se_variant" => {
                self.se_variant = match v {
                    "unit-mean" => SeVariant::UnitMean,
                    "min-max" => SeVariant::MinMax,
                    _ => return Err(Error::Config(format!("se_variant: unknown variant {v}"))),
                }
            }
            "seed" => self.seed = parse_int(key, v)?,
            "mesh_translate_x" => self.mesh_translate.x = f(v)?,
            "mesh_translate_y" => self.mesh_translate.y = f(v)?,
            "mesh_translate_z" => self.mesh_translate.z = f(v)?,
            "mesh_scale" => self.mesh_scale = f(v)?,
            "mesh_yaw_deg" => self.mesh_yaw_deg = f(v)?,
            "dependence_max_angle_deg" => self.dependence_max_angle_deg = f(v)?,
            "dependence_repetitions" => self.dependence_repetitions = parse_int(key, v)?,
            "dependence_subset_fraction" => self.dependence_subset_fraction = f(v)?,
            "dependence_min_poses" => self.dependence_min_poses = parse_int(key, v)?,
            "dependence_head_height" => self.dependence_head_height = parse_opt(key, v, "none")?,
            "dependence_head_tolerance" => self.dependence_head_tolerance = f(v)?,
            "move_gate" => self.move_gate = f(v)?,
            "baseline_eps_rel" => self.baseline_eps_rel = f(v)?,
            "baseline_guard" => self.baseline_guard = f(v)?,
            "baseline_range_floor" => self.baseline_range_floor = f(v)?,
            _ => return Err(Error::Config(format!("unknown key: {key}"))),
        }
        Ok(())
    }

    /// Parses the file format: one `key = value` per line, `#` comments,
    /// blank lines ignored. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("h", self.h),
            ("sample_rate_hz", self.sample_rate_hz),
            ("cluster_interval", self.cluster_interval),
            ("sigma_fdm", self.sigma_fdm),
            ("sigma_c", self.sigma_c),
            ("fpfh_radius_rel", self.fpfh_radius_rel),
            ("near_plane", self.near_plane),
            ("depth_tolerance_rel", self.depth_tolerance_rel),
            ("d_screen", self.d_screen),
            ("max_eye_offset", self.max_eye_offset),
            ("bucket_position", self.bucket_position),
            ("bucket_angle_deg", self.bucket_angle_deg),
            ("eps_b", self.eps_b),
            ("eps_floor", self.eps_floor),
            ("mesh_scale", self.mesh_scale),
            ("dependence_max_angle_deg", self.dependence_max_angle_deg),
            ("dependence_subset_fraction", self.dependence_subset_fraction),
            ("move_gate", self.move_gate),
            ("baseline_eps_rel", self.baseline_eps_rel),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        for (k, v) in [
            ("sigma_rw", self.sigma_rw),
            ("rho_radius", self.rho_radius),
            ("splat_cutoff_sigmas", self.splat_cutoff_sigmas),
        ] {
            if v.is_some_and(|x| !(x > 0.0)) {
                return Err(Error::Config(format!("{k} must be positive")));
            }
        }
        if self.min_fixation_duration < 0.0 || self.slope_bias_pixels < 0.0 || self.baseline_guard < 0.0 {
            return Err(Error::Config("durations and biases must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.rw_damping) {
            return Err(Error::Config("rw_damping must lie in [0, 1)".into()));
        }
        if self.uniqueness_exact_limit == 0 || self.dependence_repetitions == 0 {
            return Err(Error::Config("counts must be positive".into()));
        }
        self.camera().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn fixation(&self) -> FixationParams {
        FixationParams {
            h: self.h,
            min_duration: self.min_fixation_duration,
            sample_rate_hz: self.sample_rate_hz,
            cluster_interval: self.cluster_interval,
            sigma_rw: self.sigma_rw,
            damping: self.rw_damping,
            rho_radius: self.rho_radius,
        }
    }

    pub fn gaze(&self) -> GazeParams {
        GazeParams {
            d_screen: self.d_screen,
            max_eye_offset: self.max_eye_offset,
        }
    }

    pub fn camera(&self) -> Camera {
        Camera {
            hfov_deg: self.hfov_deg,
            vfov_deg: self.vfov_deg,
            width: self.raster_width,
            height: self.raster_height,
            near: self.near_plane,
        }
    }

    pub fn visibility(&self) -> VisibilityParams {
        VisibilityParams {
            depth_tolerance_rel: self.depth_tolerance_rel,
            slope_bias_pixels: self.slope_bias_pixels,
        }
    }

    pub fn splat(&self) -> SplatParams {
        SplatParams {
            sigma: self.sigma_fdm,
            cutoff_sigmas: self.splat_cutoff_sigmas,
        }
    }

    pub fn buckets(&self) -> BucketParams {
        BucketParams {
            position: self.bucket_position,
            angle_deg: self.bucket_angle_deg,
        }
    }

    pub fn saliency(&self) -> SaliencyParams {
        SaliencyParams {
            fpfh_radius_rel: self.fpfh_radius_rel,
            sigma_c: self.sigma_c,
            bias: if self.bias_squared {
                BiasForm::Squared
            } else {
                BiasForm::Linear
            },
            uniqueness: UniquenessParams {
                eps_b: self.eps_b,
                exact_limit: self.uniqueness_exact_limit,
                seed: self.seed,
            },
            visibility: self.visibility(),
        }
    }

    pub fn dependence(&self) -> DependenceParams {
        DependenceParams {
            max_angle_deg: self.dependence_max_angle_deg,
            repetitions: self.dependence_repetitions,
            subset_fraction: self.dependence_subset_fraction,
            min_poses: self.dependence_min_poses,
            head_height: self
                .dependence_head_height
                .map(|h| (h, self.dependence_head_tolerance)),
            seed: self.seed,
        }
    }

    pub fn placement(&self) -> Placement {
        Placement {
            scale: self.mesh_scale,
            yaw_deg: self.mesh_yaw_deg,
            translation: self.mesh_translate,
        }
    }

    pub fn curvature(&self) -> CurvatureParams {
        CurvatureParams {
            scales: Vec::new(),
            guard: self.baseline_guard,
            range_floor: self.baseline_range_floor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(RunConfig::parse("").unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let c = RunConfig::parse("# test\nh = 0.01  # tighter\n\nsigma_rw = 0.02\nse_variant = min-max\n").unwrap();
        assert_eq!(c.h, 0.01);
        assert_eq!(c.sigma_rw, Some(0.02));
        assert_eq!(c.se_variant, SeVariant::MinMax);
        assert_eq!(c.fixation().random_walk().sigma, 0.02);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("bogus = 1"), Err(Error::Config(_))));
        assert!(RunConfig::parse("h = abc").is_err());
        assert!(RunConfig::parse("h = -1").is_err());
        assert!(RunConfig::parse("h").is_err());
        assert!(RunConfig::parse("raster_width = 10").is_err());
        assert!(RunConfig::parse("bias_squared = yes").is_err());
        assert!(RunConfig::parse("h = inf").is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(
            h in 1e-6f64..1.0,
            sigma in proptest::option::of(1e-4f64..1.0),
            cutoff in proptest::option::of(0.5f64..10.0),
            seed in any::<u64>(),
            width in 64u32..4096,
            squared in any::<bool>(),
            tx in -10.0f64..10.0,
        ) {
            let c = RunConfig {
                h,
                sigma_rw: sigma,
                splat_cutoff_sigmas: cutoff,
                seed,
                raster_width: width,
                bias_squared: squared,
                mesh_translate: Vec3::new(tx, 0.0, 0.0),
                ..Default::default()
            };
            prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
