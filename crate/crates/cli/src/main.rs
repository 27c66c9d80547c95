use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sixdof_saliency::harness::{self, io, PoseEntry, PosesFile, RunConfig, SyntheticScenario};

#[derive(Debug, Parser)]
#[command(name = "sixdof", version, about = "6DoF mesh saliency toolkit")]
struct Cli {
    /// error, warn, info, debug or trace
    #[arg(long, default_value = "warn", global = true)]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key=value config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set sigma_fdm=0.05`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("override must look like key=value: {kv}");
            };
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct fixations from head+eye recordings
    Process {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        recordings: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fixation density maps and per-pose ground truth
    Fdm {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        fixations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Viewpoint-dependent saliency maps
    Saliency {
        #[arg(long)]
        mesh: PathBuf,
        /// poses.json written by `fdm`
        #[arg(long, conflicts_with = "pose")]
        poses: Option<PathBuf>,
        /// px,py,pz,ox,oy,oz (degrees); may be repeated
        #[arg(long, allow_hyphen_values = true)]
        pose: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Multi-scale curvature baseline
    Baseline {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        poses: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions against ground truth
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Report path; printed to stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Behavioral studies over processed fixations
    Analyze {
        #[arg(long)]
        fixations: PathBuf,
        #[arg(long)]
        meshes: PathBuf,
        #[arg(long)]
        recordings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate synthetic recordings with planted targets
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn read_poses(path: &Path) -> Result<Vec<PoseEntry>> {
    let file: PosesFile = io::read_json(path)?;
    Ok(file.poses)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Process { mesh, recordings, out, common } => {
            let cfg = common.config()?;
            ensure_dir(&out)?;
            let summary = harness::cmd_process(&mesh, &recordings, &out, &cfg)?;
            println!(
                "{}: {} subjects, {} fixations",
                summary.mesh_id,
                summary.subjects.len(),
                summary.total_fixations
            );
        }
        Command::Fdm { mesh, fixations, out, common } => {
            let cfg = common.config()?;
            ensure_dir(&out)?;
            let poses = harness::cmd_fdm(&mesh, &fixations, &out, &cfg)?;
            println!("{}: {} pose buckets", poses.mesh_id, poses.poses.len());
        }
        Command::Saliency { mesh, poses, pose, out, common } => {
            let cfg = common.config()?;
            let entries = match poses {
                Some(path) => read_poses(&path)?,
                None => pose
                    .iter()
                    .map(|p| harness::parse_pose(p))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            };
            if entries.is_empty() {
                bail!("give --poses or at least one --pose");
            }
            ensure_dir(&out)?;
            let metas = harness::cmd_saliency(&mesh, &entries, &out, &cfg)?;
            for m in metas {
                println!("{}\t{}\t{} visible", m.pose_id, m.pose_hash, m.visible);
            }
        }
        Command::Baseline { mesh, poses, out, common } => {
            let cfg = common.config()?;
            let entries = match poses {
                Some(path) => read_poses(&path)?,
                None => Vec::new(),
            };
            ensure_dir(&out)?;
            let values = harness::cmd_baseline(&mesh, &entries, &out, &cfg)?;
            println!("baseline: {} vertices", values.len());
        }
        Command::Evaluate { gt, pred, out, common } => {
            let cfg = common.config()?;
            let report = harness::cmd_evaluate(&gt, &pred, &cfg)?;
            match out {
                Some(path) => {
                    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                        ensure_dir(parent)?;
                    }
                    io::write_json(&path, &report)?;
                    if let Some(a) = &report.aggregate {
                        println!("CC {:.4}  SE {:.4}  KL {:.4}", a.cc, a.se, a.kl);
                    }
                }
                None => print!("{}", io::to_json(&report)?),
            }
        }
        Command::Analyze { fixations, meshes, recordings, out, common } => {
            let cfg = common.config()?;
            ensure_dir(&out)?;
            let report = harness::cmd_analyze(&fixations, &meshes, recordings.as_deref(), &out, &cfg)?;
            println!("{} meshes analyzed", report.meshes.len());
        }
        Command::Synth { scenario, mesh, out, common } => {
            let cfg = common.config()?;
            let scenario = SyntheticScenario::load(&scenario)?;
            ensure_dir(&out)?;
            let output = harness::cmd_synth(&scenario, &mesh, &out, &cfg)?;
            println!(
                "{} recordings, targets {:?}",
                output.recordings.len(),
                output.targets
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    if let Err(err) = run(cli.command) {
        eprintln!("sixdof: {err:#}");
        std::process::exit(1);
    }
}
