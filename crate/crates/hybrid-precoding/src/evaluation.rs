//! Spectral-efficiency evaluation and seeded Monte Carlo experiments.
//!
//! The rate of a precoder set `F[k]` under Gaussian signaling with transmit
//! covariance `(P / n_s) I` and an unconstrained digital receiver is the
//! per-subcarrier average of
//!
//! ```text
//! log2 det(I + P / (n_s sigma_z^2) H[k] F[k] F[k]^H H[k]^H)
//! ```
//!
//! evaluated through the singular values of `H[k] F[k]`; the optimal combiner
//! is absorbed by the log-det and never materialized.

use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::altmin::{hybrid_precode, AltMinParams};
use crate::admm::{admm_solve, build_real_system, AdmmParams};
use crate::channel::{self, ChannelParams, ChannelSet, CsiModel};
use crate::config::{config_hash, SystemConfig};
use crate::error::{Error, Result};
use crate::rf::{assemble_rf, PhaseResolution, RfMatrix, RfPhases};
use crate::seeding::{substream, Domain};
use crate::target::build_target;
use crate::{random_complex_matrix, CMat, RVec};

/// Average mutual information in bits/s/Hz of arbitrary per-subcarrier
/// precoders with `||F[k]||_F^2 = budget`.
pub fn mutual_information(
    channels: &ChannelSet,
    precoders: &[CMat],
    budget: f64,
    n_s: usize,
    noise_var: f64,
) -> Result<f64> {
    if precoders.len() != channels.n_subcarriers() {
        return Err(Error::InvalidDimension(format!(
            "{} precoders for {} subcarriers",
            precoders.len(),
            channels.n_subcarriers()
        )));
    }
    if noise_var <= 0.0 {
        return Err(Error::Domain("noise variance must be positive".into()));
    }
    let coeff = budget / (n_s as f64 * noise_var);
    let mut total = 0.0;
    for (h, f) in channels.matrices.iter().zip(precoders) {
        let power = f.norm_squared();
        if (power - budget).abs() > 1e-6 * budget.max(1.0) {
            return Err(Error::Contract(format!(
                "precoder power {power} violates the budget {budget}"
            )));
        }
        let effective = h * f;
        total += effective
            .svd(false, false)
            .singular_values
            .iter()
            .map(|&s| (1.0 + coeff * s * s).log2())
            .sum::<f64>();
    }
    Ok(total / channels.n_subcarriers() as f64)
}

/// Spectral efficiency of a hybrid precoder on a (true) channel.
pub fn spectral_efficiency(
    channels: &ChannelSet,
    rf: &RfMatrix,
    basebands: &[CMat],
    budget: f64,
    n_s: usize,
    noise_var: f64,
) -> Result<f64> {
    let precoders: Vec<CMat> = basebands.iter().map(|bb| rf.as_matrix() * bb).collect();
    mutual_information(channels, &precoders, budget, n_s, noise_var)
}

/// Experiment flavor selecting which configured lists are swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// SNR sweep at the configured bit resolutions, perfect CSI.
    SnrSweep,
    /// Same sweep; conventionally run with `bits = 1,2,3,4,inf`.
    BitsSweep,
    /// CSI accuracy sweep over the `xi` list and the antenna grid.
    CsiSweep,
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr_sweep" => Ok(Scenario::SnrSweep),
            "bits_sweep" => Ok(Scenario::BitsSweep),
            "csi_sweep" => Ok(Scenario::CsiSweep),
            other => Err(Error::Config(format!(
                "invalid scenario '{other}' (snr_sweep | bits_sweep | csi_sweep)"
            ))),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Scenario::SnrSweep => "snr_sweep",
            Scenario::BitsSweep => "bits_sweep",
            Scenario::CsiSweep => "csi_sweep",
        };
        write!(f, "{name}")
    }
}

/// One measurement row.
#[derive(Debug, Clone)]
pub struct Record {
    pub method: String,
    pub snr_db: f64,
    pub trial: usize,
    pub bits: PhaseResolution,
    pub xi: f64,
    pub se_bits_per_hz: f64,
    /// Final matrix-approximation objective (0 for the digital baseline).
    pub objective: f64,
    pub outer_iters: usize,
    pub inner_iters_mean: f64,
}

/// Mean and standard error of one curve point.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub method: String,
    pub bits: PhaseResolution,
    pub xi: f64,
    pub snr_db: f64,
    pub mean_se: f64,
    pub std_err: f64,
    pub trials: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub records: Vec<Record>,
}

impl ExperimentResult {
    /// CSV with the fixed header
    /// `method,snr_db,trial,bits,xi,se_bits_per_hz,objective,outer_iters,inner_iters_mean`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "method,snr_db,trial,bits,xi,se_bits_per_hz,objective,outer_iters,inner_iters_mean"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.method,
                r.snr_db,
                r.trial,
                r.bits,
                r.xi,
                r.se_bits_per_hz,
                r.objective,
                r.outer_iters,
                r.inner_iters_mean
            )?;
        }
        Ok(())
    }

    /// Per-(method, bits, xi, snr) means and standard errors, in first-seen
    /// order of the curves.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, PhaseResolution, f64, f64)> = Vec::new();
        let mut sums: Vec<(f64, f64, usize)> = Vec::new();
        for r in &self.records {
            let key = (r.method.clone(), r.bits, r.xi, r.snr_db);
            let idx = match order.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    order.push(key);
                    sums.push((0.0, 0.0, 0));
                    order.len() - 1
                }
            };
            sums[idx].0 += r.se_bits_per_hz;
            sums[idx].1 += r.se_bits_per_hz * r.se_bits_per_hz;
            sums[idx].2 += 1;
        }
        order
            .into_iter()
            .zip(sums)
            .map(|((method, bits, xi, snr_db), (s, s2, n))| {
                let mean = s / n as f64;
                let var = (s2 / n as f64 - mean * mean).max(0.0);
                let std_err = if n > 1 {
                    (var / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                Aggregate {
                    method,
                    bits,
                    xi,
                    snr_db,
                    mean_se: mean,
                    std_err,
                    trials: n,
                }
            })
            .collect()
    }
}

fn method_tag(base: &str, multi_antenna: bool, n_t_sub: usize, n_r: usize) -> String {
    if multi_antenna {
        format!("{base}_t{n_t_sub}r{n_r}")
    } else {
        base.to_string()
    }
}

struct TrialJob<'a> {
    cfg: &'a SystemConfig,
    antenna_idx: usize,
    n_t_sub: usize,
    n_r: usize,
    trial: usize,
    xis: &'a [f64],
    bits: &'a [PhaseResolution],
    multi_antenna: bool,
    hash: u64,
}

fn run_trial(job: &TrialJob) -> Result<Vec<Record>> {
    let cfg = job.cfg;
    let chan_params = ChannelParams {
        m_t: cfg.m_t,
        n_t_sub: job.n_t_sub,
        n_r: job.n_r,
        n_clusters: cfg.n_cl,
        n_rays: cfg.n_ray,
        angular_spread: cfg.angular_spread_deg.to_radians(),
        spacing_over_wavelength: cfg.d_e_over_lambda,
        n_subcarriers: cfg.k,
    };
    let true_channel = channel::generate(
        &chan_params,
        cfg.seed,
        job.antenna_idx as u64,
        job.trial as u64,
        job.hash,
    )?;

    let mut records = Vec::new();
    let digital_tag = method_tag("digital", job.multi_antenna, job.n_t_sub, job.n_r);
    let hybrid_tag = method_tag("hybrid", job.multi_antenna, job.n_t_sub, job.n_r);

    // Fully-digital upper baseline: designed and evaluated on the true
    // channel, once per SNR point.
    for &snr_db in &cfg.snr_grid_db {
        let noise_var = cfg.p / 10f64.powf(snr_db / 10.0);
        let noise_scale = noise_var * cfg.n_s as f64 / cfg.p;
        let target = build_target(&true_channel, cfg.n_s, cfg.p, noise_scale)?;
        let se = mutual_information(&true_channel, &target.precoders, cfg.p, cfg.n_s, noise_var)?;
        records.push(Record {
            method: digital_tag.clone(),
            snr_db,
            trial: job.trial,
            bits: PhaseResolution::Infinite,
            xi: 1.0,
            se_bits_per_hz: se,
            objective: 0.0,
            outer_iters: 0,
            inner_iters_mean: 0.0,
        });
    }

    for (xi_idx, &xi) in job.xis.iter().enumerate() {
        // One CSI realization per (antenna config, trial, xi), shared by the
        // whole SNR grid; the design runs on the corrupted channel, the
        // evaluation on the true one.
        let mut csi_rng = substream(
            cfg.seed,
            Domain::Csi,
            [job.antenna_idx as u64, job.trial as u64, xi_idx as u64],
        );
        let design_channel = CsiModel::new(xi)?.corrupt(&true_channel, &mut csi_rng);
        for &snr_db in &cfg.snr_grid_db {
            let noise_var = cfg.p / 10f64.powf(snr_db / 10.0);
            let noise_scale = noise_var * cfg.n_s as f64 / cfg.p;
            let target = build_target(&design_channel, cfg.n_s, cfg.p, noise_scale)?;
            for &bits in job.bits {
                let params = AltMinParams {
                    admm: AdmmParams {
                        rho: cfg.rho,
                        eps_primal: cfg.eps_primal,
                        eps_dual: cfg.eps_dual,
                        max_iters: cfg.admm_max_iters,
                        stagnation_window: cfg.admm_stagnation_window,
                        x_update: cfg.admm_x_update,
                    },
                    resolution: bits,
                    outer_tol: cfg.outer_tol,
                    outer_max_iters: cfg.outer_max_iters,
                    quantize_in_loop: cfg.quantize_in_loop,
                };
                let hp = hybrid_precode(&target, cfg.m_t, job.n_t_sub, &params)?;
                let se = spectral_efficiency(
                    &true_channel,
                    &hp.rf,
                    &hp.basebands,
                    cfg.p,
                    cfg.n_s,
                    noise_var,
                )?;
                records.push(Record {
                    method: hybrid_tag.clone(),
                    snr_db,
                    trial: job.trial,
                    bits,
                    xi,
                    se_bits_per_hz: se,
                    objective: hp.objective(),
                    outer_iters: hp.outer_iterations,
                    inner_iters_mean: hp.mean_inner_iterations,
                });
            }
        }
    }
    Ok(records)
}

/// Run the full Monte Carlo experiment for one scenario.
///
/// Trials are independent jobs over derived RNG substreams; the records are
/// reduced in job order, so the output is byte-identical no matter how the
/// jobs are scheduled.
pub fn run_experiment(cfg: &SystemConfig, scenario: Scenario) -> Result<ExperimentResult> {
    let antennas: Vec<(usize, usize)> = match scenario {
        Scenario::CsiSweep => cfg.antenna_grid.clone(),
        _ => vec![(cfg.n_t_sub, cfg.n_r)],
    };
    let xis: Vec<f64> = match scenario {
        Scenario::CsiSweep => cfg.xi.clone(),
        _ => vec![1.0],
    };
    let multi_antenna = antennas.len() > 1;
    let hash = config_hash(cfg);

    let mut jobs = Vec::new();
    for (antenna_idx, &(n_t_sub, n_r)) in antennas.iter().enumerate() {
        for trial in 0..cfg.trials {
            jobs.push((antenna_idx, n_t_sub, n_r, trial));
        }
    }
    let per_job: Vec<Result<Vec<Record>>> = jobs
        .par_iter()
        .map(|&(antenna_idx, n_t_sub, n_r, trial)| {
            run_trial(&TrialJob {
                cfg,
                antenna_idx,
                n_t_sub,
                n_r,
                trial,
                xis: &xis,
                bits: &cfg.bits,
                multi_antenna,
                hash,
            })
        })
        .collect();

    let mut records = Vec::new();
    for job in per_job {
        records.extend(job?);
    }
    Ok(ExperimentResult { scenario, records })
}

/// One probe measurement: median per-iteration solve time.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub m_t: usize,
    pub n_s: usize,
    pub seconds_per_iteration: f64,
}

/// Time the ADMM inner iteration across a grid of `(m_t, n_s)` pairs at a
/// fixed subarray size. Tolerances are zeroed so every run executes exactly
/// `iters` iterations; the median over `repeats` runs is reported.
pub fn complexity_probe(
    grid: &[(usize, usize)],
    n_t_sub: usize,
    iters: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<ProbeRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &(m_t, n_s) in grid {
        let mut rng = substream(seed, Domain::Test, [m_t as u64, n_s as u64, 0]);
        let phases = RfPhases {
            phases: (0..m_t)
                .map(|_| {
                    RVec::from_fn(n_t_sub, |_, _| {
                        use rand::Rng;
                        rng.random::<f64>() * std::f64::consts::TAU
                    })
                })
                .collect(),
            resolution: PhaseResolution::Infinite,
        };
        let rf = assemble_rf(&phases);
        let budget = n_s as f64;
        let mut f_opt = random_complex_matrix(&mut rng, m_t * n_t_sub, n_s);
        let scale = nalgebra::Complex::new((budget / f_opt.norm_squared()).sqrt(), 0.0);
        f_opt *= scale;
        let system = build_real_system(&rf, &f_opt, budget)?;
        let params = AdmmParams {
            eps_primal: 0.0,
            eps_dual: 0.0,
            max_iters: iters,
            stagnation_window: 0,
            ..AdmmParams::default()
        };
        // Warmup run, then timed repeats.
        admm_solve(&system, &params, None)?;
        let mut samples = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let start = Instant::now();
            let report = admm_solve(&system, &params, None)?;
            let elapsed = start.elapsed().as_secs_f64();
            assert_eq!(report.iterations, iters);
            samples.push(elapsed / iters as f64);
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(ProbeRow {
            m_t,
            n_s,
            seconds_per_iteration: samples[samples.len() / 2],
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::generate;
    use crate::seeding::{substream, Domain};
    use nalgebra::Complex;

    fn test_rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        substream(0xE7A1, Domain::Test, [tag, 0, 0])
    }

    fn tiny_config() -> SystemConfig {
        crate::config::parse_config(
            "m_t = 2\nn_t_sub = 4\nn_r = 4\nk = 2\nn_s = 2\ntrials = 2\nsnr_grid_db = -5,5\n",
        )
        .unwrap()
    }

    fn channel_for(cfg: &SystemConfig, trial: u64) -> ChannelSet {
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
        generate(&params, cfg.seed, 0, trial, 0).unwrap()
    }

    #[test]
    fn zero_channel_zero_rate() {
        let channels = ChannelSet {
            matrices: vec![CMat::zeros(2, 4); 3],
            n_t_sub: 2,
            seed: 0,
            config_hash: 0,
        };
        let mut rng = test_rng(1);
        let mut f = random_complex_matrix(&mut rng, 4, 2);
        let scale = Complex::new((2.0 / f.norm_squared()).sqrt(), 0.0);
        f *= scale;
        let se = mutual_information(&channels, &vec![f; 3], 2.0, 2, 1.0).unwrap();
        assert_eq!(se, 0.0);
    }

    #[test]
    fn scalar_channel_one_bit() {
        // K = 1, n_r = n_s = 1, h = 1, P = 1, sigma^2 = 1: log2(1 + 1) = 1.
        let channels = ChannelSet {
            matrices: vec![CMat::from_element(1, 1, Complex::new(1.0, 0.0))],
            n_t_sub: 1,
            seed: 0,
            config_hash: 0,
        };
        let f = CMat::from_element(1, 1, Complex::new(1.0, 0.0));
        let se = mutual_information(&channels, &[f], 1.0, 1, 1.0).unwrap();
        assert!((se - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_precondition_enforced() {
        let channels = ChannelSet {
            matrices: vec![CMat::identity(2, 2)],
            n_t_sub: 2,
            seed: 0,
            config_hash: 0,
        };
        let f = CMat::identity(2, 2) * Complex::new(5.0, 0.0);
        assert!(matches!(
            mutual_information(&channels, &[f], 1.0, 2, 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn hybrid_rate_never_beats_digital_target() {
        let cfg = tiny_config();
        for trial in 0..20 {
            let channels = channel_for(&cfg, trial);
            let noise_var = 1.0;
            let noise_scale = noise_var * cfg.n_s as f64 / cfg.p;
            let target = build_target(&channels, cfg.n_s, cfg.p, noise_scale).unwrap();
            let digital =
                mutual_information(&channels, &target.precoders, cfg.p, cfg.n_s, noise_var)
                    .unwrap();
            let hp = hybrid_precode(&target, cfg.m_t, cfg.n_t_sub, &AltMinParams::default())
                .unwrap();
            let hybrid =
                spectral_efficiency(&channels, &hp.rf, &hp.basebands, cfg.p, cfg.n_s, noise_var)
                    .unwrap();
            assert!(
                hybrid <= digital + 1e-9,
                "trial {trial}: hybrid {hybrid} > digital {digital}"
            );
        }
    }

    #[test]
    fn digital_rate_monotone_in_snr() {
        let cfg = tiny_config();
        let channels = channel_for(&cfg, 0);
        let mut last = 0.0;
        for snr_db in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            let noise_var = cfg.p / 10f64.powf(snr_db / 10.0);
            let noise_scale = noise_var * cfg.n_s as f64 / cfg.p;
            let target = build_target(&channels, cfg.n_s, cfg.p, noise_scale).unwrap();
            let se = mutual_information(&channels, &target.precoders, cfg.p, cfg.n_s, noise_var)
                .unwrap();
            assert!(se >= last - 1e-12, "SE {se} dropped below {last}");
            last = se;
        }
    }

    #[test]
    fn experiment_row_count_matches_contract() {
        let cfg = tiny_config();
        let result = run_experiment(&cfg, Scenario::SnrSweep).unwrap();
        // |snr| x trials x (digital + hybrid per bits/xi variant).
        assert_eq!(result.records.len(), 2 * 2 * 2);
        let digital_rows = result.records.iter().filter(|r| r.method == "digital");
        assert_eq!(digital_rows.count(), 4);
    }

    #[test]
    fn experiment_is_deterministic() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg, Scenario::SnrSweep).unwrap();
        let b = run_experiment(&cfg, Scenario::SnrSweep).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        a.write_csv(&mut csv_a).unwrap();
        b.write_csv(&mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn perfect_csi_sweep_matches_snr_sweep() {
        let mut cfg = tiny_config();
        cfg.xi = vec![1.0];
        let snr = run_experiment(&cfg, Scenario::SnrSweep).unwrap();
        let csi = run_experiment(&cfg, Scenario::CsiSweep).unwrap();
        let pick = |r: &ExperimentResult| -> Vec<(String, f64, usize, f64)> {
            r.records
                .iter()
                .map(|x| (x.method.clone(), x.snr_db, x.trial, x.se_bits_per_hz))
                .collect()
        };
        assert_eq!(pick(&snr), pick(&csi));
    }

    #[test]
    fn csi_sweep_covers_antenna_grid() {
        let mut cfg = tiny_config();
        cfg.antenna_grid = vec![(2, 4), (4, 8)];
        cfg.xi = vec![0.9, 1.0];
        cfg.trials = 1;
        let result = run_experiment(&cfg, Scenario::CsiSweep).unwrap();
        // Per antenna config: digital rows (2 snr) + hybrid rows (2 xi x 2 snr).
        assert_eq!(result.records.len(), 2 * (2 + 4));
        assert!(result.records.iter().any(|r| r.method == "hybrid_t2r4"));
        assert!(result.records.iter().any(|r| r.method == "digital_t4r8"));
    }

    #[test]
    fn aggregates_group_by_curve() {
        let cfg = tiny_config();
        let result = run_experiment(&cfg, Scenario::SnrSweep).unwrap();
        let agg = result.aggregates();
        // Two methods x two SNR points.
        assert_eq!(agg.len(), 4);
        for a in &agg {
            assert_eq!(a.trials, cfg.trials);
            assert!(a.mean_se >= 0.0);
        }
    }

    #[test]
    fn records_report_nonnegative_se() {
        let cfg = tiny_config();
        let result = run_experiment(&cfg, Scenario::BitsSweep).unwrap();
        for r in &result.records {
            assert!(r.se_bits_per_hz >= 0.0);
            assert!(r.se_bits_per_hz.is_finite());
        }
    }

    #[test]
    fn probe_runs_on_smallest_config() {
        let rows = complexity_probe(&[(1, 1)], 2, 50, 3, 42).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].seconds_per_iteration > 0.0);
    }

    #[test]
    fn probe_timing_is_stable() {
        // Coefficient of variation across repeated measurements stays small.
        let mut medians = Vec::new();
        for _ in 0..6 {
            let rows = complexity_probe(&[(4, 2)], 8, 2500, 5, 7).unwrap();
            medians.push(rows[0].seconds_per_iteration);
        }
        let mean = medians.iter().sum::<f64>() / medians.len() as f64;
        let var = medians.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>()
            / medians.len() as f64;
        let cov = var.sqrt() / mean;
        assert!(cov < 0.3, "coefficient of variation {cov}");
    }

    #[test]
    fn rejects_unknown_scenario() {
        assert!(matches!(
            "warp_sweep".parse::<Scenario>(),
            Err(Error::Config(_))
        ));
        assert_eq!(
            "csi_sweep".parse::<Scenario>().unwrap(),
            Scenario::CsiSweep
        );
    }

    #[test]
    fn doubling_m_t_scales_iteration_cost_quadratically() {
        // The x-update applies the lifted operator every iteration, so the
        // per-iteration cost grows ~4x when m_t doubles (quadratic, with
        // slack for fixed overheads).
        let rows = complexity_probe(&[(4, 2), (8, 2)], 8, 3000, 5, 11).unwrap();
        let ratio = rows[1].seconds_per_iteration / rows[0].seconds_per_iteration;
        assert!(
            (2.8..=5.7).contains(&ratio),
            "doubling ratio {ratio} out of range"
        );
    }
}
