//! Experiment runner: parse a config, execute one scenario, emit CSV plus
//! the resolved config echo and optional SVG plot / channel dump.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use hybrid_precoding::channel::{self, ChannelParams};
use hybrid_precoding::config::{config_hash, parse_config_file, resolved_text, SystemConfig};
use hybrid_precoding::evaluation::{run_experiment, ExperimentResult, Scenario};
use hybrid_precoding::plot::{render_svg, Curve};

#[derive(Parser, Debug)]
#[command(
    name = "hybrid-precoding",
    about = "Hybrid precoder design experiments for distributed-subarray MIMO-OFDM"
)]
struct Cli {
    /// Experiment configuration file (flat key = value format).
    #[arg(long)]
    config: PathBuf,

    /// Which sweep to run.
    #[arg(long, default_value = "snr_sweep")]
    scenario: String,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (falls back to the config's out_dir, then ".").
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also render an SVG of mean spectral efficiency vs SNR.
    #[arg(long)]
    plot: bool,

    /// Also dump the trial-0 channel matrices as text.
    #[arg(long)]
    dump_channels: bool,
}

fn plot_curves(result: &ExperimentResult) -> Vec<Curve> {
    let mut curves: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for agg in result.aggregates() {
        let mut label = agg.method.clone();
        if agg.method.starts_with("hybrid") {
            label.push_str(&format!(" B={}", agg.bits));
            if agg.xi < 1.0 {
                label.push_str(&format!(" xi={}", agg.xi));
            }
        }
        match curves.iter_mut().find(|(l, _)| *l == label) {
            Some((_, pts)) => pts.push((agg.snr_db, agg.mean_se)),
            None => curves.push((label, vec![(agg.snr_db, agg.mean_se)])),
        }
    }
    curves
        .into_iter()
        .map(|(label, mut points)| {
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Curve { label, points }
        })
        .collect()
}

fn dump_channels(cfg: &SystemConfig, out_dir: &Path) -> hybrid_precoding::Result<()> {
    let params = ChannelParams {
        m_t: cfg.m_t,
        n_t_sub: cfg.n_t_sub,
        n_r: cfg.n_r,
        n_clusters: cfg.n_cl,
        n_rays: cfg.n_ray,
        angular_spread: cfg.angular_spread_deg.to_radians(),
        spacing_over_wavelength: cfg.d_e_over_lambda,
        n_subcarriers: cfg.k,
    };
    let set = channel::generate(&params, cfg.seed, 0, 0, config_hash(cfg))?;
    let mut file = fs::File::create(out_dir.join("channels.txt"))?;
    channel::dump_channels(&set, &mut file)?;
    Ok(())
}

fn run(cli: Cli) -> hybrid_precoding::Result<()> {
    let mut cfg = parse_config_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let scenario: Scenario = cli.scenario.parse()?;
    let out_dir = cli
        .out
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;

    let result = run_experiment(&cfg, scenario)?;

    let mut csv = fs::File::create(out_dir.join("results.csv"))?;
    result.write_csv(&mut csv)?;
    fs::write(out_dir.join("config_resolved.cfg"), resolved_text(&cfg))?;

    if cli.dump_channels {
        dump_channels(&cfg, &out_dir)?;
    }

    if cli.plot {
        // Plotting never gates the numeric run.
        let svg = render_svg(
            &format!("Spectral efficiency vs SNR ({scenario})"),
            "SNR [dB]",
            "Spectral efficiency [bits/s/Hz]",
            &plot_curves(&result),
        );
        if let Err(e) = fs::write(out_dir.join(format!("{scenario}.svg")), svg) {
            eprintln!("warning: plot not written: {e}");
        }
    }

    let hybrid_rows = result
        .records
        .iter()
        .filter(|r| r.method.starts_with("hybrid"))
        .count();
    eprintln!(
        "{}: {} records ({} hybrid) -> {}",
        scenario,
        result.records.len(),
        hybrid_rows,
        out_dir.join("results.csv").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
