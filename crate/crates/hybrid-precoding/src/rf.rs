//! Analog RF precoder: closed-form phase updates, B-bit quantization, and
//! block-diagonal matrix assembly.
//!
//! The RF precoder is `blkdiag{f_1, ..., f_{m_t}}` with one length-`n_t_sub`
//! phase-shifter column per subarray; every nonzero entry has modulus
//! `1 / sqrt(n_t_sub)`, which makes `F_RF^H F_RF = I` and hence
//! `||F_RF F_BB||_F = ||F_BB||_F` for any baseband matrix.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::target::PrecoderTarget;
use crate::{CMat, RVec};

/// Phase-shifter resolution: `Bits(b)` restricts phases to the uniform grid
/// `{2 pi q / 2^b}`, `Infinite` leaves them continuous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseResolution {
    Infinite,
    Bits(u32),
}

impl PhaseResolution {
    pub fn is_finite(&self) -> bool {
        matches!(self, PhaseResolution::Bits(_))
    }
}

impl fmt::Display for PhaseResolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhaseResolution::Infinite => write!(f, "inf"),
            PhaseResolution::Bits(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for PhaseResolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" => Ok(PhaseResolution::Infinite),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::Config(format!("invalid resolution '{other}'")))?;
                if bits == 0 {
                    return Err(Error::Config("resolution must be >= 1 bit".into()));
                }
                if bits > 53 {
                    return Err(Error::Config(format!(
                        "resolution of {bits} bits exceeds the f64 phase grid; use 'inf'"
                    )));
                }
                Ok(PhaseResolution::Bits(bits))
            }
        }
    }
}

/// Per-subarray phase-shifter settings, radians in `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct RfPhases {
    /// One length-`n_t_sub` vector per subarray.
    pub phases: Vec<RVec>,
    pub resolution: PhaseResolution,
}

impl RfPhases {
    /// All-zero phases (every shifter at `1 / sqrt(n_t_sub)`).
    pub fn zeros(m_t: usize, n_t_sub: usize, resolution: PhaseResolution) -> Self {
        Self {
            phases: vec![RVec::zeros(n_t_sub); m_t],
            resolution,
        }
    }

    pub fn m_t(&self) -> usize {
        self.phases.len()
    }

    pub fn n_t_sub(&self) -> usize {
        self.phases.first().map_or(0, RVec::len)
    }
}

fn wrap(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Closed-form continuous phase update.
///
/// Element `(i, l)` of the RF matrix (with `l` the subarray owning antenna
/// `i`) gets the angle of `sum_k row_i(F_opt[k]) row_l(F_BB[k])^H`. A zero
/// accumulated sum leaves the phase at 0; the count of such elements is
/// returned alongside the phases.
pub fn optimal_phases(
    targets: &PrecoderTarget,
    basebands: &[CMat],
    m_t: usize,
    n_t_sub: usize,
) -> Result<(RfPhases, usize)> {
    let n_s = targets.n_streams();
    if basebands.len() != targets.n_subcarriers() {
        return Err(Error::InvalidDimension(format!(
            "{} baseband matrices for {} subcarriers",
            basebands.len(),
            targets.n_subcarriers()
        )));
    }
    if targets.n_t_total() != m_t * n_t_sub {
        return Err(Error::InvalidDimension(format!(
            "target has {} rows, expected {m_t} x {n_t_sub}",
            targets.n_t_total()
        )));
    }
    for bb in basebands {
        if bb.nrows() != m_t || bb.ncols() != n_s {
            return Err(Error::InvalidDimension(format!(
                "baseband block is {}x{}, expected {m_t}x{n_s}",
                bb.nrows(),
                bb.ncols()
            )));
        }
    }
    let mut phases = RfPhases::zeros(m_t, n_t_sub, PhaseResolution::Infinite);
    let mut zero_sums = 0usize;
    for l in 0..m_t {
        for j in 0..n_t_sub {
            let i = l * n_t_sub + j;
            let mut acc = Complex::new(0.0, 0.0);
            for (f_opt, f_bb) in targets.precoders.iter().zip(basebands) {
                for s in 0..n_s {
                    acc += f_opt[(i, s)] * f_bb[(l, s)].conj();
                }
            }
            if acc == Complex::new(0.0, 0.0) {
                zero_sums += 1;
                phases.phases[l][j] = 0.0;
            } else {
                phases.phases[l][j] = wrap(acc.arg());
            }
        }
    }
    Ok((phases, zero_sums))
}

/// Quantize one phase to the nearest grid point under wrapped (circular)
/// distance. Exact midpoints round to the smaller grid index; infinite
/// resolution only wraps into `[0, 2 pi)`.
pub fn quantize_phase(theta: f64, resolution: PhaseResolution) -> f64 {
    let t = wrap(theta);
    match resolution {
        PhaseResolution::Infinite => t,
        PhaseResolution::Bits(b) => {
            let levels = 1u64 << b;
            let step = TAU / levels as f64;
            let x = t / step;
            let lower = x.floor();
            let frac = x - lower;
            let q = if frac < 0.5 {
                lower as u64
            } else if frac > 0.5 {
                lower as u64 + 1
            } else {
                // Tie: the two candidates are `lower` and `lower + 1`
                // (mod levels); keep the smaller index.
                (lower as u64).min((lower as u64 + 1) % levels)
            };
            (q % levels) as f64 * step
        }
    }
}

/// Quantize a full phase set, tagging it with the new resolution.
pub fn quantize(phases: &RfPhases, resolution: PhaseResolution) -> RfPhases {
    RfPhases {
        phases: phases
            .phases
            .iter()
            .map(|v| v.map(|t| quantize_phase(t, resolution)))
            .collect(),
        resolution,
    }
}

/// Materialized block-diagonal RF precoding matrix.
#[derive(Debug, Clone)]
pub struct RfMatrix {
    matrix: CMat,
    m_t: usize,
    n_t_sub: usize,
}

impl RfMatrix {
    /// Validate an externally supplied matrix against the block-diagonal
    /// constant-modulus structure.
    pub fn from_matrix(matrix: CMat, n_t_sub: usize) -> Result<Self> {
        if n_t_sub == 0 || !matrix.nrows().is_multiple_of(n_t_sub) {
            return Err(Error::RfStructure(format!(
                "{} rows not divisible into subarrays of {n_t_sub}",
                matrix.nrows()
            )));
        }
        let m_t = matrix.nrows() / n_t_sub;
        if matrix.ncols() != m_t {
            return Err(Error::RfStructure(format!(
                "expected {m_t} columns, found {}",
                matrix.ncols()
            )));
        }
        let modulus = 1.0 / (n_t_sub as f64).sqrt();
        for i in 0..matrix.nrows() {
            let owner = i / n_t_sub;
            for l in 0..m_t {
                let z = matrix[(i, l)];
                if l == owner {
                    if (z.norm() - modulus).abs() > 1e-9 {
                        return Err(Error::RfStructure(format!(
                            "entry ({i}, {l}) has modulus {}, expected {modulus}",
                            z.norm()
                        )));
                    }
                } else if z != Complex::new(0.0, 0.0) {
                    return Err(Error::RfStructure(format!(
                        "entry ({i}, {l}) outside the block diagonal is nonzero"
                    )));
                }
            }
        }
        Ok(Self {
            matrix,
            m_t,
            n_t_sub,
        })
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn m_t(&self) -> usize {
        self.m_t
    }

    pub fn n_t_sub(&self) -> usize {
        self.n_t_sub
    }

    pub fn n_t_total(&self) -> usize {
        self.m_t * self.n_t_sub
    }
}

/// Materialize the phases as the block-diagonal RF matrix.
pub fn assemble_rf(phases: &RfPhases) -> RfMatrix {
    let m_t = phases.m_t();
    let n_t_sub = phases.n_t_sub();
    let modulus = 1.0 / (n_t_sub as f64).sqrt();
    let mut matrix = CMat::zeros(m_t * n_t_sub, m_t);
    for (l, col) in phases.phases.iter().enumerate() {
        for j in 0..n_t_sub {
            matrix[(l * n_t_sub + j, l)] = Complex::from_polar(modulus, col[j]);
        }
    }
    RfMatrix {
        matrix,
        m_t,
        n_t_sub,
    }
}
