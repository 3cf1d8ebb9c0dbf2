//! Command-line front end.
//!
//! Every subcommand reads an optional JSON run config (`--config`), applies
//! command-line flags on top, and writes its outputs atomically. Exit codes:
//! 0 success, 1 usage, 2 data, 3 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::error::Error;
use crate::experiment::{
    evaluate_geo, gaps_by_method, parse_gap_csv, reconstruct_all, write_gap_csv, MetricsReport,
    METRICS_FORMAT_VERSION,
};
use crate::export::{export_geojson, export_kml, NamedPath};
use crate::geo::{parse_trajectory_log, write_trajectory_log, GeoPoint, Trajectory, CSV_HEADER};
use crate::neural::ModelFile;
use crate::recon::{fit_gap_model, Method, ReconConfig};
use crate::simgen::{
    corrupt, gen_scenario, NoiseConfig, OutageWindow, ScenarioConfig, ScenarioKind, SpeedSegment,
};
use crate::similarity::{evaluate_pairs, parse_pair_labels, SimilarityConfig};

pub const CONFIG_FORMAT_VERSION: u32 = 1;
pub const SEED_ENV: &str = "GAPFILL_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: Error },
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::File { source, .. } | CliError::Lib(source) if source.is_numeric() => EXIT_NUMERIC,
            _ => EXIT_DATA,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

trait InFile<T> {
    fn in_file(self, path: &Path) -> CliResult<T>;
}

impl<T> InFile<T> for crate::Result<T> {
    fn in_file(self, path: &Path) -> CliResult<T> {
        self.map_err(|source| CliError::File {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Scenario fields a config file may override on top of the kind's preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub kind: Option<ScenarioKind>,
    pub duration: Option<f64>,
    pub rate: Option<f64>,
    pub speed_profile: Option<Vec<SpeedSegment>>,
    pub noise: Option<NoiseConfig>,
    pub outage: Option<OutageWindow>,
    pub origin: Option<GeoPoint>,
    pub initial_heading: Option<f64>,
}

/// JSON run config shared by all subcommands. Sections a command does not use
/// are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Written into every seeded component: scenario noise, training and
    /// sketch hashing.
    pub seed: Option<u64>,
    pub scenario: ScenarioOverrides,
    pub recon: ReconConfig,
    pub similarity: SimilarityConfig,
    pub methods: Option<Vec<Method>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: CONFIG_FORMAT_VERSION,
            seed: None,
            scenario: ScenarioOverrides::default(),
            recon: ReconConfig::default(),
            similarity: SimilarityConfig::default(),
            methods: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> crate::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|source| Error::Json {
            context: "run config".into(),
            source,
        })?;
        if cfg.version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "config version {} (expected {CONFIG_FORMAT_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gapfill",
    version,
    about = "Fill GNSS outages in vehicle tracks and compare trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run config; flags take precedence over its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every random component. Falls back to the config file, then
    /// to the GAPFILL_SEED environment variable, then to 0.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a drive and write its measured (and optionally true) track.
    Generate {
        #[command(flatten)]
        common: Common,
        /// straight, right_angle_turn or curve.
        #[arg(long)]
        kind: Option<ScenarioKind>,
        #[arg(long, value_name = "SECONDS")]
        duration: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        outage_start: Option<f64>,
        #[arg(long, value_name = "SECONDS")]
        outage_length: Option<f64>,
        /// Disable all sensor and GNSS noise.
        #[arg(long)]
        noise_free: bool,
        /// Measured track CSV.
        #[arg(long, short)]
        out: PathBuf,
        /// Ground-truth track CSV.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
    /// Train the gap model on the valid spans of one or more tracks.
    Train {
        #[command(flatten)]
        common: Common,
        /// Track CSV files or directories of them.
        #[arg(long = "input", short, required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        hidden: Option<usize>,
        /// Model JSON.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Reconstruct every outage of a track; writes `<method>.csv` per method.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Needed by the neural methods.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, short)]
        input: PathBuf,
        /// Comma-separated method names; all six by default.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Score reconstructions against the ground-truth track.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        truth: PathBuf,
        /// Directory of `<method>.csv` files from `reconstruct`.
        #[arg(long)]
        recon_dir: PathBuf,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Metrics JSON.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Score labeled trajectory pairs by sketch cosine and classify them.
    Similarity {
        #[command(flatten)]
        common: Common,
        /// Directory of track CSVs; the file stem is the trajectory id.
        #[arg(long)]
        dir: PathBuf,
        /// `id_a,id_b,linked` CSV.
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_name = "METRES")]
        cell_size: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Metrics JSON with the similarity report.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Write tracks and reconstructions as KML and/or GeoJSON lines.
    Export {
        /// Track or gap CSV files, or directories of them.
        #[arg(long = "input", short, required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        kml: Option<PathBuf>,
        #[arg(long)]
        geojson: Option<PathBuf>,
    },
}

/// Runs the command line and returns the process exit code. `argv[0]` is
/// the program name.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Generate {
            common,
            kind,
            duration,
            outage_start,
            outage_length,
            noise_free,
            out,
            truth_out,
        } => {
            let cfg = load_config(&common)?;
            let seed = resolve_seed(&common, &cfg)?;
            let sc = scenario_config(
                &cfg.scenario,
                kind,
                seed,
                duration,
                outage_start,
                outage_length,
                noise_free,
            )?;
            let truth = gen_scenario(&sc)?.truth;
            let measured = corrupt(&truth, &sc)?;
            write_atomic(&out, write_trajectory_log(&measured).as_bytes())?;
            if let Some(p) = truth_out {
                write_atomic(&p, write_trajectory_log(&truth).as_bytes())?;
            }
            println!(
                "generated {} samples ({:?}, seed {seed})",
                measured.len(),
                sc.kind
            );
            Ok(())
        }
        Command::Train {
            common,
            inputs,
            epochs,
            learning_rate,
            hidden,
            out,
        } => {
            let cfg = load_config(&common)?;
            let mut recon = cfg.recon.clone();
            recon.train.seed = resolve_seed(&common, &cfg)?;
            if let Some(e) = epochs {
                recon.train.epochs = e;
            }
            if let Some(lr) = learning_rate {
                recon.train.learning_rate = lr;
            }
            if let Some(h) = hidden {
                recon.hidden = h;
            }
            recon.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let files = collect_csvs(&inputs)?;
            let trajs = files
                .iter()
                .map(|p| read_track(p))
                .collect::<CliResult<Vec<_>>>()?;
            let (model, losses) = fit_gap_model(&trajs, &recon)?;
            let file = ModelFile::new(model, Some(recon.train.clone()), losses.clone());
            write_atomic(&out, file.to_json()?.as_bytes())?;
            println!(
                "trained on {} track(s), final loss {:.6}",
                trajs.len(),
                losses.last().copied().unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Reconstruct {
            common,
            model,
            input,
            methods,
            out_dir,
        } => {
            let cfg = load_config(&common)?;
            let methods = methods
                .or(cfg.methods.clone())
                .unwrap_or_else(|| Method::ALL.to_vec());
            cfg.recon.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let model = match model {
                Some(p) => Some(ModelFile::from_json(&read_text(&p)?).in_file(&p)?.model),
                None if methods.iter().any(|m| m.needs_model()) => {
                    return Err(CliError::Usage(
                        "--model is required for the neural methods".into(),
                    ));
                }
                None => None,
            };
            let traj = read_track(&input)?;
            let gaps = reconstruct_all(&traj, model.as_ref(), &methods, &cfg.recon).in_file(&input)?;
            let by_method = gaps_by_method(&gaps, &traj)?;
            for (m, pts) in &by_method {
                write_atomic(&out_dir.join(format!("{m}.csv")), write_gap_csv(pts).as_bytes())?;
            }
            println!(
                "reconstructed {} gap(s) with {} method(s)",
                gaps.len() / methods.len().max(1),
                by_method.len()
            );
            Ok(())
        }
        Command::Evaluate {
            common,
            truth,
            recon_dir,
            methods,
            out,
        } => {
            let cfg = load_config(&common)?;
            let methods = methods.or(cfg.methods.clone());
            let truth_traj = read_track(&truth)?;
            let mut recons = std::collections::BTreeMap::new();
            for m in Method::ALL {
                let path = recon_dir.join(format!("{m}.csv"));
                let wanted = methods.as_ref().is_some_and(|ms| ms.contains(&m));
                if !path.exists() {
                    if wanted {
                        return Err(CliError::File {
                            path,
                            source: Error::InvalidInput(format!("no reconstruction for method {m}")),
                        });
                    }
                    continue;
                }
                if methods.is_none() || wanted {
                    recons.insert(m, parse_gap_csv(&read_text(&path)?).in_file(&path)?);
                }
            }
            if recons.is_empty() {
                return Err(CliError::File {
                    path: recon_dir,
                    source: Error::InvalidInput("no `<method>.csv` reconstructions found".into()),
                });
            }
            let report = evaluate_geo(&recons, &truth_traj).in_file(&truth)?;
            write_atomic(&out, report.to_json()?.as_bytes())?;
            for (m, mm) in &report.methods {
                println!("{:<12} rmse {:.3} m", m.as_str(), mm.rmse);
            }
            Ok(())
        }
        Command::Similarity {
            common,
            dir,
            pairs,
            cell_size,
            width,
            threshold,
            out,
        } => {
            let cfg = load_config(&common)?;
            let mut sim = cfg.similarity;
            sim.seed = resolve_seed(&common, &cfg)?;
            if let Some(c) = cell_size {
                sim.cell_size = c;
            }
            if let Some(w) = width {
                sim.width = w;
            }
            if threshold.is_some() {
                sim.threshold = threshold;
            }
            let files = collect_csvs(std::slice::from_ref(&dir))?;
            let trajs = files
                .iter()
                .map(|p| Ok(read_track(p)?.with_id(file_stem(p))))
                .collect::<CliResult<Vec<_>>>()?;
            let labels = parse_pair_labels(&read_text(&pairs)?).in_file(&pairs)?;
            let report = evaluate_pairs(&trajs, &labels, &sim).in_file(&pairs)?;
            let cm = report.confusion;
            println!(
                "threshold {:.4}: tp {} fp {} tn {} fn {} tnr {}",
                report.threshold,
                cm.tp,
                cm.fp,
                cm.tn,
                cm.fn_,
                report.tnr.map_or("undefined".into(), |v| format!("{v:.4}"))
            );
            let metrics = MetricsReport {
                version: METRICS_FORMAT_VERSION,
                segments: Vec::new(),
                methods: Default::default(),
                similarity: Some(report),
            };
            write_atomic(&out, metrics.to_json()?.as_bytes())?;
            Ok(())
        }
        Command::Export { inputs, kml, geojson } => {
            if kml.is_none() && geojson.is_none() {
                return Err(CliError::Usage("export needs --kml and/or --geojson".into()));
            }
            let files = collect_csvs(&inputs)?;
            let paths = files
                .iter()
                .map(|p| read_path(p))
                .collect::<CliResult<Vec<_>>>()?;
            if let Some(p) = kml {
                write_atomic(&p, export_kml(&paths)?.as_bytes())?;
            }
            if let Some(p) = geojson {
                write_atomic(&p, export_geojson(&paths)?.as_bytes())?;
            }
            println!("exported {} path(s)", paths.len());
            Ok(())
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    match &common.config {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = read_text(p)?;
            RunConfig::from_json(&text).map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))
        }
    }
}

/// Flag, then config file, then `GAPFILL_SEED`, then 0.
fn resolve_seed(common: &Common, cfg: &RunConfig) -> CliResult<u64> {
    if let Some(s) = common.seed.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn scenario_config(
    file: &ScenarioOverrides,
    kind: Option<ScenarioKind>,
    seed: u64,
    duration: Option<f64>,
    outage_start: Option<f64>,
    outage_length: Option<f64>,
    noise_free: bool,
) -> CliResult<ScenarioConfig> {
    let kind = kind.or(file.kind).unwrap_or(ScenarioKind::Straight);
    let mut sc = ScenarioConfig::preset(kind, seed);
    let f = file.clone();
    if let Some(d) = f.duration {
        sc.duration = d;
    }
    if let Some(r) = f.rate {
        sc.rate = r;
    }
    if let Some(p) = f.speed_profile {
        sc.speed_profile = p;
    }
    if let Some(n) = f.noise {
        sc.noise = n;
    }
    if f.outage.is_some() {
        sc.outage = f.outage;
    }
    if let Some(o) = f.origin {
        sc.origin = o;
    }
    if let Some(h) = f.initial_heading {
        sc.initial_heading = h;
    }
    if let Some(d) = duration {
        sc.duration = d;
        // Keep the preset outage centred when only the duration changes.
        if f.outage.is_none() {
            if let Some(o) = sc.outage.as_mut() {
                o.start = d / 2.0 - o.length / 2.0;
            }
        }
    }
    if outage_start.is_some() || outage_length.is_some() {
        let base = sc.outage.unwrap_or(OutageWindow {
            start: sc.duration / 2.0 - crate::simgen::DEFAULT_OUTAGE_S / 2.0,
            length: crate::simgen::DEFAULT_OUTAGE_S,
        });
        sc.outage = Some(OutageWindow {
            start: outage_start.unwrap_or(base.start),
            length: outage_length.unwrap_or(base.length),
        });
    }
    if noise_free {
        sc.noise = NoiseConfig::none();
    }
    sc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(sc)
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

fn read_track(path: &Path) -> CliResult<Trajectory> {
    let parsed = parse_trajectory_log(&read_text(path)?).in_file(path)?;
    if parsed.trimmed() {
        eprintln!(
            "warning: {}: dropped {} leading and {} trailing rows without a bracketing fix",
            path.display(),
            parsed.trimmed_leading,
            parsed.trimmed_trailing
        );
    }
    Ok(parsed.trajectory.with_id(file_stem(path)))
}

/// A track CSV becomes its valid fixes; a gap CSV its points.
fn read_path(path: &Path) -> CliResult<NamedPath> {
    let text = read_text(path)?;
    let name = file_stem(path);
    if text.lines().next().map(str::trim) == Some(CSV_HEADER) {
        let traj = parse_trajectory_log(&text).in_file(path)?.trajectory;
        let points = traj.points().iter().filter_map(|p| p.geo).collect();
        Ok(NamedPath::new(name, "track", points))
    } else {
        let points = parse_gap_csv(&text)
            .in_file(path)?
            .into_iter()
            .map(|p| p.geo)
            .collect();
        let method = name
            .parse::<Method>()
            .map(|m| m.to_string())
            .unwrap_or_else(|_| "gap".into());
        Ok(NamedPath::new(name, method, points))
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Files as given, plus the `*.csv` files of any directory, sorted by name.
fn collect_csvs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.is_file() && q.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            if found.is_empty() {
                return Err(CliError::File {
                    path: p.clone(),
                    source: Error::InvalidInput("directory has no .csv files".into()),
                });
            }
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> crate::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_precedence_flag_over_file_over_default() {
        let file = ScenarioOverrides {
            kind: Some(ScenarioKind::Curve),
            duration: Some(200.0),
            ..Default::default()
        };
        let sc = scenario_config(&file, None, 5, None, None, None, false).unwrap();
        assert_eq!((sc.kind, sc.duration, sc.seed), (ScenarioKind::Curve, 200.0, 5));
        let sc = scenario_config(
            &file,
            Some(ScenarioKind::Straight),
            5,
            Some(120.0),
            None,
            Some(10.0),
            false,
        )
        .unwrap();
        assert_eq!((sc.kind, sc.duration), (ScenarioKind::Straight, 120.0));
        assert_eq!(sc.outage.unwrap().length, 10.0);
        let sc = scenario_config(&ScenarioOverrides::default(), None, 0, None, None, None, true).unwrap();
        assert_eq!(sc.kind, ScenarioKind::Straight);
        assert_eq!(sc.noise, NoiseConfig::none());
    }

    #[test]
    fn config_version_is_checked() {
        assert!(RunConfig::from_json(r#"{"version": 1, "seed": 3}"#).is_ok());
        assert!(RunConfig::from_json(r#"{"version": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"version": 1, "bogus": 0}"#).is_err());
        let text = serde_json::to_string(&RunConfig::default()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::Lib(Error::InvalidInput("x".into())).exit_code(),
            EXIT_DATA
        );
        assert_eq!(
            CliError::Lib(Error::Divergence { epoch: 3 }).exit_code(),
            EXIT_NUMERIC
        );
        let e = CliError::File {
            path: "a.csv".into(),
            source: Error::IllConditioned { jitter: 1e-3 },
        };
        assert_eq!(e.exit_code(), EXIT_NUMERIC);
        assert!(e.to_string().starts_with("a.csv: "));
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("out.txt");
        write_atomic(&p, b"first version").unwrap();
        write_atomic(&p, b"2nd").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "2nd");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
