//! Run manifests, presets and CSV output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::arq_sim::{measure_complexity, run_sweep, ThroughputStats};
use crate::config::{ReceiverKind, SystemConfig};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "ecn0_db,eta,ci_halfwidth,frames,mean_rounds";

pub const PRESETS: [&str; 6] = [
    "fig2-fullload",
    "fig2-halfload",
    "fig2-quarterload",
    "fig3-fullload",
    "fig3-halfload",
    "fig3-quarterload",
];

/// SNR grid, either listed or as an inclusive `start..=stop` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GridSpec {
    Points { points: Vec<f64> },
    Range { start: f64, stop: f64, step: f64 },
}

impl GridSpec {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            GridSpec::Points { points } => {
                if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
                    return Err(Error::config("grid.points", "need at least one finite point"));
                }
                Ok(points.clone())
            }
            GridSpec::Range { start, stop, step } => {
                if !(*step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                    return Err(Error::config("grid", "need finite start <= stop and step > 0"));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

/// Contents of a config file. Exactly one of `preset` and `system` is given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub system: Option<SystemConfig>,
    pub seed: Option<u64>,
    pub frames: Option<u64>,
    pub receivers: Option<Vec<String>>,
    pub grid: Option<GridSpec>,
    pub out_dir: Option<PathBuf>,
    pub name: Option<String>,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub name: String,
    pub build: String,
    pub seed: u64,
    pub frames: u64,
    pub receivers: Vec<ReceiverKind>,
    pub grid: Vec<f64>,
    pub out_dir: PathBuf,
    pub system: SystemConfig,
}

impl RunManifest {
    pub fn output_path(&self, kind: ReceiverKind) -> PathBuf {
        self.out_dir.join(format!("{}-{}.csv", self.name, kind))
    }
}

pub fn build_id() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// System parameters and default grid of a named preset.
pub fn preset(name: &str) -> Result<(SystemConfig, Vec<f64>)> {
    let (fig, load) = name
        .split_once('-')
        .ok_or_else(|| Error::config("preset", format!("unknown preset `{name}`")))?;
    let rx = match fig {
        "fig2" => 2,
        "fig3" => 1,
        _ => return Err(Error::config("preset", format!("unknown preset `{name}`"))),
    };
    let codes = match load {
        "fullload" => 16,
        "halfload" => 8,
        "quarterload" => 4,
        _ => return Err(Error::config("preset", format!("unknown preset `{name}`"))),
    };
    let cfg = SystemConfig::baseline(rx, codes);
    let grid = preset_grid(rx, codes);
    Ok((cfg, grid))
}

fn preset_grid(rx: usize, codes: usize) -> Vec<f64> {
    let (start, stop) = match (rx, codes) {
        (2, 16) => (-4.0, 12.0),
        (2, 8) => (-6.0, 10.0),
        (2, _) => (-8.0, 8.0),
        (_, 16) => (0.0, 20.0),
        (_, 8) => (-4.0, 14.0),
        _ => (-6.0, 12.0),
    };
    let n = ((stop - start) / 0.5) as usize;
    (0..=n).map(|i| start + 0.5 * i as f64).collect()
}

fn parse_receivers(list: &[String]) -> Result<Vec<ReceiverKind>> {
    if list.is_empty() {
        return Err(Error::config("receivers", "need at least one receiver"));
    }
    let mut out: Vec<ReceiverKind> = Vec::new();
    for s in list {
        let k: ReceiverKind = s.parse()?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    Ok(out)
}

/// Command-line overrides; each one takes precedence over the config file.
#[derive(Debug, Clone, Default, Parser)]
#[command(name = "cpcdma-harq", version, about = "Throughput sweeps of chip-level and symbol-level Chase combining")]
pub struct Args {
    /// TOML run description
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named parameter set (fig2-fullload, fig3-halfload, ...)
    #[arg(long)]
    pub preset: Option<String>,
    /// Receiver to simulate; repeat for several
    #[arg(long = "receiver", value_name = "chip|symbol|mfb")]
    pub receivers: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frames per SNR point
    #[arg(long)]
    pub frames: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated Ec/N0 points in dB
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub snr: Option<Vec<f64>>,
}

pub fn read_config_file(path: &Path) -> Result<ConfigFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| {
        let key = e.span().map(|s| text[s].to_string()).unwrap_or_default();
        Error::config(key, e.message().to_string())
    })
}

/// Reads and validates a config file with no command-line overrides.
pub fn parse_config(path: &Path) -> Result<RunManifest> {
    resolve(&Args {
        config: Some(path.to_path_buf()),
        ..Args::default()
    })
}

/// Merges preset, config file and flags, in increasing precedence.
pub fn resolve(args: &Args) -> Result<RunManifest> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => ConfigFile::default(),
    };
    let preset_name = args.preset.clone().or(file.preset.clone());
    let (system, default_grid, default_name) = match (&preset_name, file.system) {
        (Some(_), Some(_)) if args.preset.is_none() => {
            return Err(Error::config("preset", "give either `preset` or `[system]`, not both"));
        }
        (Some(name), _) => {
            let (cfg, grid) = preset(name)?;
            (cfg, Some(grid), name.clone())
        }
        (None, Some(cfg)) => {
            let name = args
                .config
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "run".into());
            (cfg, None, name)
        }
        (None, None) => return Err(Error::config("preset", "no preset and no `[system]` table given")),
    };
    system.validate()?;
    let grid = match (&args.snr, &file.grid, default_grid) {
        (Some(points), _, _) => GridSpec::Points { points: points.clone() }.resolve()?,
        (None, Some(g), _) => g.resolve()?,
        (None, None, Some(g)) => g,
        (None, None, None) => return Err(Error::config("grid", "no SNR grid given")),
    };
    let receivers = if !args.receivers.is_empty() {
        parse_receivers(&args.receivers)?
    } else if let Some(list) = &file.receivers {
        parse_receivers(list)?
    } else {
        vec![ReceiverKind::Chip, ReceiverKind::Symbol]
    };
    let frames = args.frames.or(file.frames).unwrap_or(2000);
    if frames == 0 {
        return Err(Error::config("frames", "must be at least 1"));
    }
    Ok(RunManifest {
        name: file.name.unwrap_or(default_name),
        build: build_id(),
        seed: args.seed.or(file.seed).unwrap_or(1),
        frames,
        receivers,
        grid,
        out_dir: args.out.clone().or(file.out_dir).unwrap_or_else(|| PathBuf::from(".")),
        system,
    })
}

/// Writes one sweep as CSV: `#` metadata lines, the header, one row per SNR point.
pub fn write_csv<W: Write>(
    mut w: W,
    manifest: &RunManifest,
    kind: ReceiverKind,
    stats: &[ThroughputStats],
) -> Result<()> {
    let io = |e| Error::io("csv output", e);
    let report = measure_complexity(&manifest.system, kind)?;
    let echo = toml::to_string(manifest).map_err(|e| Error::config("manifest", e.to_string()))?;
    let mut meta = String::new();
    meta.push_str(&format!("# build = \"{}\"\n", manifest.build));
    meta.push_str(&format!("# receiver = \"{kind}\"\n"));
    for line in echo.lines().filter(|l| !l.starts_with("build =")) {
        meta.push_str(format!("# {line}").trim_end());
        meta.push('\n');
    }
    meta.push_str(&format!("# complexity.additions = {}\n", report.additions));
    meta.push_str(&format!("# complexity.state_reals = {}\n", report.state_reals));
    w.write_all(meta.as_bytes()).map_err(io)?;
    writeln!(w, "{CSV_HEADER}").map_err(io)?;
    for s in stats {
        writeln!(
            w,
            "{},{:.6},{:.6},{},{:.6}",
            s.ecn0_db,
            s.eta(),
            s.ci_halfwidth(),
            s.frames,
            s.mean_rounds()
        )
        .map_err(io)?;
    }
    Ok(())
}

fn write_one(manifest: &RunManifest, kind: ReceiverKind, stats: &[ThroughputStats]) -> Result<PathBuf> {
    let path = manifest.output_path(kind);
    let mut buf = Vec::new();
    write_csv(&mut buf, manifest, kind, stats)?;
    let written = fs::File::create(&path).and_then(|mut f| f.write_all(&buf).and_then(|_| f.sync_all()));
    if let Err(e) = written {
        let _ = fs::remove_file(&path);
        return Err(Error::io(&path, e));
    }
    Ok(path)
}

/// Runs every receiver of the manifest and writes its CSV. Already written
/// files of this run are removed if a later step fails.
pub fn run(manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&manifest.out_dir).map_err(|e| Error::io(&manifest.out_dir, e))?;
    let mut written = Vec::new();
    for &kind in &manifest.receivers {
        let result = run_sweep(&manifest.system, kind, &manifest.grid, manifest.frames, manifest.seed)
            .and_then(|stats| write_one(manifest, kind, &stats));
        match result {
            Ok(p) => {
                eprintln!("wrote {}", p.display());
                written.push(p);
            }
            Err(e) => {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
        }
    }
    Ok(written)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } => 2,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in PRESETS {
            let m = resolve(&Args {
                preset: Some(name.into()),
                ..Args::default()
            })
            .unwrap();
            assert_eq!(m.system.tx_antennas, 2);
            assert!(m.grid.windows(2).all(|w| (w[1] - w[0] - 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn fig2_fullload_parameters() {
        let (c, _) = preset("fig2-fullload").unwrap();
        assert_eq!(
            (c.tx_antennas, c.rx_antennas, c.spreading_factor, c.codes, c.max_rounds),
            (2, 2, 16, 16, 3)
        );
        assert_eq!((c.taps, c.cp_len, c.bits_per_symbol, c.turbo_iterations), (10, 10, 2, 3));
    }

    fn system_toml(codes: usize, cp: usize) -> String {
        format!(
            "[system]\ntx_antennas = 2\nrx_antennas = 2\nspreading_factor = 16\ncodes = {codes}\n\
             bits_per_symbol = 2\nmax_rounds = 3\ntaps = 10\ncp_len = {cp}\nsymbols_per_antenna = 256\n\
             generators = [35, 23]\ninterleaver_seed = 1\nturbo_iterations = 3\n\
             [grid]\nstart = 0.0\nstop = 2.0\nstep = 1.0\n"
        )
    }

    fn resolve_text(text: &str) -> Result<RunManifest> {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        fs::write(&p, text).unwrap();
        parse_config(&p)
    }

    #[test]
    fn config_file_round_trip() {
        let m = resolve_text(&system_toml(8, 10)).unwrap();
        assert_eq!(m.name, "exp");
        assert_eq!(m.grid, vec![0.0, 1.0, 2.0]);
        assert_eq!(m.system.codes, 8);
    }

    #[test]
    fn too_many_codes_is_a_config_error() {
        let err = resolve_text(&system_toml(17, 10)).unwrap_err();
        assert!(err.to_string().contains("C <= N violated"), "{err}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn short_cp_is_a_config_error() {
        let err = resolve_text(&system_toml(16, 5)).unwrap_err();
        assert!(err.to_string().contains("CP shorter than channel"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = resolve_text(&format!("colour = 3\n{}", system_toml(16, 10))).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        let err = resolve_text(&system_toml(16, 10).replace("taps = 10", "taps = 10\nspeed = 2")).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("exp.toml");
        fs::write(&p, format!("seed = 4\nframes = 10\nreceivers = [\"mfb\"]\n{}", system_toml(8, 10))).unwrap();
        let m = resolve(&Args {
            config: Some(p),
            seed: Some(9),
            snr: Some(vec![-1.0, 3.0]),
            ..Args::default()
        })
        .unwrap();
        assert_eq!((m.seed, m.frames), (9, 10));
        assert_eq!(m.receivers, vec![ReceiverKind::Mfb]);
        assert_eq!(m.grid, vec![-1.0, 3.0]);
    }

    #[test]
    fn chip_complexity_metadata() {
        let (cfg, _) = preset("fig2-fullload").unwrap();
        let r = measure_complexity(&cfg, ReceiverKind::Chip).unwrap();
        assert_eq!(cfg.chips(), 256);
        assert_eq!(r.additions, 2 * 256 * 2 * 2 * 3);
        let mut big = cfg.clone();
        big.symbols_per_antenna = 2048;
        let r = measure_complexity(&big, ReceiverKind::Chip).unwrap();
        assert_eq!(r.additions, 49152);
    }
}
