//! Geometric cluster/ray channel model for distributed transmit subarrays.
//!
//! Each of the `m_t` subarrays sees an independent set of `n_cl` scattering
//! clusters with `n_ray` rays each. The frequency response on subcarrier `k`
//! of subarray `m` is
//!
//! ```text
//! H_m[k] = gamma * sum_i sum_l alpha_il * a_r(aoa_il) a_t(aod_il)^H * e^{-j 2 pi i k / K}
//! ```
//!
//! with `gamma = sqrt(n_t_sub * n_r / (n_cl * n_ray))`, cluster index `i`
//! starting at 1, and unit-norm array response vectors on both ends. The
//! full channel is the horizontal concatenation over subarrays.

use std::f64::consts::TAU;
use std::io::Write;

use nalgebra::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{substream, Domain};
use crate::{standard_complex, CMat, CVec};

/// Uniform-linear-array response vector.
///
/// Entry `n` (0-based) equals `exp(j 2 pi (d_e / lambda) n sin(angle)) / sqrt(N)`,
/// so the vector always has unit 2-norm.
pub fn array_response(n_antennas: usize, spacing_over_wavelength: f64, angle: f64) -> Result<CVec> {
    if n_antennas == 0 {
        return Err(Error::InvalidDimension(
            "array response needs at least one antenna".into(),
        ));
    }
    let scale = 1.0 / (n_antennas as f64).sqrt();
    let step = TAU * spacing_over_wavelength * angle.sin();
    Ok(CVec::from_fn(n_antennas, |n, _| {
        Complex::from_polar(scale, step * n as f64)
    }))
}

/// Cluster/ray draw for a single subarray: `n_cl x n_ray` complex gains,
/// departure angles and arrival angles (radians in `[0, 2 pi)`).
#[derive(Debug, Clone)]
pub struct ClusterRayParams {
    pub gains: Vec<Vec<Complex<f64>>>,
    pub aods: Vec<Vec<f64>>,
    pub aoas: Vec<Vec<f64>>,
    /// Cluster mean angles, kept for spread checks: `(aod_mean, aoa_mean)`.
    pub cluster_means: Vec<(f64, f64)>,
}

impl ClusterRayParams {
    pub fn n_clusters(&self) -> usize {
        self.gains.len()
    }

    pub fn n_rays(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(TAU);
    if t >= TAU {
        t = 0.0;
    }
    t
}

/// Zero-mean Laplacian draw by inverse CDF from one uniform variate.
/// The tail is capped only by the float granularity of the uniform draw,
/// i.e. |offset| <= scale * 53 ln 2 ~ 36.8 * scale.
fn laplacian<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.random();
    let t = u - 0.5;
    let tail = (1.0 - 2.0 * t.abs()).max(f64::MIN_POSITIVE);
    -scale * t.signum() * tail.ln()
}

/// Draw the cluster/ray parameters of one subarray: cluster means uniform on
/// `[0, 2 pi)` for departure and arrival independently, ray offsets Laplacian
/// with the given angular spread (radians), gains unit-variance circular
/// Gaussian.
pub fn sample_cluster_params<R: Rng + ?Sized>(
    rng: &mut R,
    n_clusters: usize,
    n_rays: usize,
    angular_spread: f64,
) -> Result<ClusterRayParams> {
    if n_clusters == 0 || n_rays == 0 {
        return Err(Error::InvalidDimension(
            "need at least one cluster and one ray".into(),
        ));
    }
    if angular_spread <= 0.0 {
        return Err(Error::Domain("angular spread must be positive".into()));
    }
    let mut gains = Vec::with_capacity(n_clusters);
    let mut aods = Vec::with_capacity(n_clusters);
    let mut aoas = Vec::with_capacity(n_clusters);
    let mut cluster_means = Vec::with_capacity(n_clusters);
    for _ in 0..n_clusters {
        let aod_mean = rng.random::<f64>() * TAU;
        let aoa_mean = rng.random::<f64>() * TAU;
        cluster_means.push((aod_mean, aoa_mean));
        let mut g = Vec::with_capacity(n_rays);
        let mut d = Vec::with_capacity(n_rays);
        let mut a = Vec::with_capacity(n_rays);
        for _ in 0..n_rays {
            g.push(standard_complex(rng));
            d.push(wrap_angle(aod_mean + laplacian(rng, angular_spread)));
            a.push(wrap_angle(aoa_mean + laplacian(rng, angular_spread)));
        }
        gains.push(g);
        aods.push(d);
        aoas.push(a);
    }
    Ok(ClusterRayParams {
        gains,
        aods,
        aoas,
        cluster_means,
    })
}

/// Frequency response of one subarray on one subcarrier.
pub fn subarray_channel(
    params: &ClusterRayParams,
    n_r: usize,
    n_t_sub: usize,
    spacing_over_wavelength: f64,
    subcarrier: usize,
    n_subcarriers: usize,
) -> Result<CMat> {
    if subcarrier >= n_subcarriers {
        return Err(Error::InvalidDimension(format!(
            "subcarrier index {subcarrier} out of range (K = {n_subcarriers})"
        )));
    }
    let n_cl = params.n_clusters();
    let n_ray = params.n_rays();
    let gamma = ((n_t_sub * n_r) as f64 / (n_cl * n_ray) as f64).sqrt();
    let mut h = CMat::zeros(n_r, n_t_sub);
    for (ci, ((gains, aods), aoas)) in params
        .gains
        .iter()
        .zip(&params.aods)
        .zip(&params.aoas)
        .enumerate()
    {
        // Cluster i (1-based) carries delay tap i.
        let tap = (ci + 1) as f64;
        let phase = -TAU * tap * subcarrier as f64 / n_subcarriers as f64;
        let delay = Complex::from_polar(1.0, phase);
        for ((&alpha, &aod), &aoa) in gains.iter().zip(aods).zip(aoas) {
            let a_r = array_response(n_r, spacing_over_wavelength, aoa)?;
            let a_t = array_response(n_t_sub, spacing_over_wavelength, aod)?;
            let w = alpha * delay;
            for c in 0..n_t_sub {
                let tc = a_t[c].conj() * w;
                for r in 0..n_r {
                    h[(r, c)] += a_r[r] * tc;
                }
            }
        }
    }
    Ok(h * Complex::new(gamma, 0.0))
}

/// All `K` per-subcarrier channel matrices plus provenance.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `matrices[k]` is `n_r x (m_t * n_t_sub)`.
    pub matrices: Vec<CMat>,
    pub n_t_sub: usize,
    pub seed: u64,
    pub config_hash: u64,
}

impl ChannelSet {
    pub fn n_subcarriers(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_r(&self) -> usize {
        self.matrices.first().map_or(0, CMat::nrows)
    }

    pub fn n_t_total(&self) -> usize {
        self.matrices.first().map_or(0, CMat::ncols)
    }

    pub fn m_t(&self) -> usize {
        self.n_t_total() / self.n_t_sub
    }
}

/// Concatenate per-subarray channels into the full per-subcarrier matrices.
/// `per_subarray[m][k]` holds subarray `m` on subcarrier `k`.
pub fn assemble_channel(
    per_subarray: &[Vec<CMat>],
    seed: u64,
    config_hash: u64,
) -> Result<ChannelSet> {
    let m_t = per_subarray.len();
    if m_t == 0 {
        return Err(Error::InvalidDimension("no subarrays given".into()));
    }
    let n_sub = per_subarray[0].len();
    let n_r = per_subarray[0]
        .first()
        .ok_or_else(|| Error::InvalidDimension("no subcarriers given".into()))?
        .nrows();
    let n_t_sub = per_subarray[0][0].ncols();
    for (m, blocks) in per_subarray.iter().enumerate() {
        if blocks.len() != n_sub {
            return Err(Error::InvalidDimension(format!(
                "subarray {m} has {} subcarriers, expected {n_sub}",
                blocks.len()
            )));
        }
        for (k, b) in blocks.iter().enumerate() {
            if b.nrows() != n_r || b.ncols() != n_t_sub {
                return Err(Error::InvalidDimension(format!(
                    "subarray {m} subcarrier {k} is {}x{}, expected {n_r}x{n_t_sub}",
                    b.nrows(),
                    b.ncols()
                )));
            }
        }
    }
    let mut matrices = Vec::with_capacity(n_sub);
    for k in 0..n_sub {
        let mut h = CMat::zeros(n_r, m_t * n_t_sub);
        for (m, blocks) in per_subarray.iter().enumerate() {
            h.view_mut((0, m * n_t_sub), (n_r, n_t_sub))
                .copy_from(&blocks[k]);
        }
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite channel entry on subcarrier {k}"
            )));
        }
        matrices.push(h);
    }
    Ok(ChannelSet {
        matrices,
        n_t_sub,
        seed,
        config_hash,
    })
}

/// Dimensions and statistics needed to realize a channel set.
#[derive(Debug, Clone, Copy)]
pub struct ChannelParams {
    pub m_t: usize,
    pub n_t_sub: usize,
    pub n_r: usize,
    pub n_clusters: usize,
    pub n_rays: usize,
    pub angular_spread: f64,
    pub spacing_over_wavelength: f64,
    pub n_subcarriers: usize,
}

/// Realize one full channel set. Subarray `m` of trial `t` under antenna
/// configuration `a` draws from the `(Channel, [a, t, m])` substream, so
/// trials are reproducible independently of each other.
pub fn generate(
    params: &ChannelParams,
    master_seed: u64,
    antenna_cfg: u64,
    trial: u64,
    config_hash: u64,
) -> Result<ChannelSet> {
    let mut per_subarray = Vec::with_capacity(params.m_t);
    for m in 0..params.m_t {
        let mut rng = substream(master_seed, Domain::Channel, [antenna_cfg, trial, m as u64]);
        let draw = sample_cluster_params(
            &mut rng,
            params.n_clusters,
            params.n_rays,
            params.angular_spread,
        )?;
        let blocks = (0..params.n_subcarriers)
            .map(|k| {
                subarray_channel(
                    &draw,
                    params.n_r,
                    params.n_t_sub,
                    params.spacing_over_wavelength,
                    k,
                    params.n_subcarriers,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        per_subarray.push(blocks);
    }
    assemble_channel(&per_subarray, master_seed, config_hash)
}

/// Imperfect-CSI corruption: `H_hat[k] = xi H[k] + sqrt(1 - xi^2) E[k]` with
/// a fresh i.i.d. unit-variance circular Gaussian `E[k]` per subcarrier.
#[derive(Debug, Clone, Copy)]
pub struct CsiModel {
    xi: f64,
}

impl CsiModel {
    pub fn new(xi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&xi) {
            return Err(Error::Domain(format!(
                "CSI accuracy xi = {xi} outside [0, 1]"
            )));
        }
        Ok(Self { xi })
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn corrupt<R: Rng + ?Sized>(&self, channels: &ChannelSet, rng: &mut R) -> ChannelSet {
        let xi = Complex::new(self.xi, 0.0);
        let err_scale = Complex::new((1.0 - self.xi * self.xi).sqrt(), 0.0);
        let matrices = channels
            .matrices
            .iter()
            .map(|h| {
                let e = crate::random_complex_matrix(rng, h.nrows(), h.ncols());
                h * xi + e * err_scale
            })
            .collect();
        ChannelSet {
            matrices,
            ..*channels
        }
    }
}

/// Convenience wrapper over [`CsiModel`].
pub fn corrupt_csi<R: Rng + ?Sized>(
    channels: &ChannelSet,
    xi: f64,
    rng: &mut R,
) -> Result<ChannelSet> {
    Ok(CsiModel::new(xi)?.corrupt(channels, rng))
}

/// Plain-text dump: one header, then each `(subarray, subcarrier)` block as
/// row-major `re,im` pairs.
pub fn dump_channels<W: Write>(set: &ChannelSet, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "# channel dump seed={} config_hash={:016x} m_t={} n_t_sub={} n_r={} k={}",
        set.seed,
        set.config_hash,
        set.m_t(),
        set.n_t_sub,
        set.n_r(),
        set.n_subcarriers()
    )?;
    for k in 0..set.n_subcarriers() {
        let h = &set.matrices[k];
        for m in 0..set.m_t() {
            writeln!(
                out,
                "# subarray={} subcarrier={} rows={} cols={}",
                m + 1,
                k,
                h.nrows(),
                set.n_t_sub
            )?;
            for r in 0..h.nrows() {
                let mut row = String::new();
                for c in 0..set.n_t_sub {
                    let z = h[(r, m * set.n_t_sub + c)];
                    if c > 0 {
                        row.push(' ');
                    }
                    row.push_str(&format!("{},{}", z.re, z.im));
                }
                writeln!(out, "{row}")?;
            }
        }
    }
    Ok(())
}
