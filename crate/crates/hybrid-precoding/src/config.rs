//! Flat key-value experiment configuration.
//!
//! The file format is one `key = value` pair per line, `#` starting a
//! comment. Lists are comma-separated; antenna pairs use `TxR` syntax
//! (`8x8,16x16`). Only the five dimensional keys are required; everything
//! else defaults to the standard simulation constants (5 clusters, 10 rays,
//! 10 degree spread, half-wavelength spacing, `p = n_s`, `rho = 1`,
//! `1e-6` solver tolerances).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::admm::XUpdateRule;
use crate::error::{Error, Result};
use crate::rf::PhaseResolution;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Number of transmit subarrays (one RF chain each).
    pub m_t: usize,
    /// Antennas per subarray.
    pub n_t_sub: usize,
    /// Receive antennas.
    pub n_r: usize,
    /// Data streams.
    pub n_s: usize,
    /// OFDM subcarriers.
    pub k: usize,
    pub n_cl: usize,
    pub n_ray: usize,
    pub angular_spread_deg: f64,
    pub d_e_over_lambda: f64,
    /// Per-subcarrier transmit power budget.
    pub p: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub bits: Vec<PhaseResolution>,
    pub xi: Vec<f64>,
    /// `(n_t_sub, n_r)` pairs swept by the CSI scenario.
    pub antenna_grid: Vec<(usize, usize)>,
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub admm_max_iters: usize,
    pub admm_stagnation_window: usize,
    pub admm_x_update: XUpdateRule,
    pub quantize_in_loop: bool,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub seed: u64,
    pub out_dir: Option<String>,
}

impl SystemConfig {
    pub fn n_t_total(&self) -> usize {
        self.m_t * self.n_t_sub
    }
}

const KNOWN_KEYS: &[&str] = &[
    "m_t",
    "n_t_sub",
    "n_r",
    "n_s",
    "k",
    "n_cl",
    "n_ray",
    "angular_spread_deg",
    "d_e_over_lambda",
    "p",
    "snr_grid_db",
    "trials",
    "bits",
    "xi",
    "antenna_grid",
    "rho",
    "eps_primal",
    "eps_dual",
    "admm_max_iters",
    "admm_stagnation_window",
    "admm_x_update",
    "quantize_in_loop",
    "outer_tol",
    "outer_max_iters",
    "seed",
    "out_dir",
];

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.trim().parse().map_err(|_| {
        Error::Config(format!(
            "line {line}: invalid value '{value}' for key '{key}'"
        ))
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_scalar(key, item, line))
        .collect()
}

fn parse_antenna_grid(value: &str, line: usize) -> Result<Vec<(usize, usize)>> {
    value
        .split(',')
        .map(|pair| {
            let mut it = pair.trim().split('x');
            let a = it.next().unwrap_or("");
            let b = it.next().ok_or_else(|| {
                Error::Config(format!(
                    "line {line}: antenna_grid entry '{pair}' is not of the form NxM"
                ))
            })?;
            if it.next().is_some() {
                return Err(Error::Config(format!(
                    "line {line}: antenna_grid entry '{pair}' is not of the form NxM"
                )));
            }
            Ok((
                parse_scalar("antenna_grid", a, line)?,
                parse_scalar("antenna_grid", b, line)?,
            ))
        })
        .collect()
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool> {
    match value.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(Error::Config(format!(
            "line {line}: invalid value '{other}' for key '{key}' (true/false)"
        ))),
    }
}

/// Parse configuration text, fill defaults and validate invariants.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    let mut seen: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {line_no}: expected 'key = value', got '{line}'"))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "line {line_no}: unknown key '{key}'"
            )));
        }
        if let Some((first_line, _)) = seen.get(&key) {
            return Err(Error::Config(format!(
                "line {line_no}: duplicate key '{key}' (first set on line {first_line})"
            )));
        }
        seen.insert(key, (line_no, value));
    }

    fn require_usize(seen: &mut BTreeMap<String, (usize, String)>, key: &str) -> Result<usize> {
        match seen.remove(key) {
            Some((line, v)) => parse_scalar(key, &v, line),
            None => Err(Error::Config(format!("missing required key '{key}'"))),
        }
    }
    let m_t = require_usize(&mut seen, "m_t")?;
    let n_t_sub = require_usize(&mut seen, "n_t_sub")?;
    let n_r = require_usize(&mut seen, "n_r")?;
    let n_s = require_usize(&mut seen, "n_s")?;
    let k = require_usize(&mut seen, "k")?;

    macro_rules! optional {
        ($key:literal, $default:expr, $parser:expr) => {
            match seen.remove($key) {
                Some((line, v)) => $parser($key, &v, line)?,
                None => $default,
            }
        };
    }

    let n_cl = optional!("n_cl", 5, parse_scalar::<usize>);
    let n_ray = optional!("n_ray", 10, parse_scalar::<usize>);
    let angular_spread_deg = optional!("angular_spread_deg", 10.0, parse_scalar::<f64>);
    let d_e_over_lambda = optional!("d_e_over_lambda", 0.5, parse_scalar::<f64>);
    let p = optional!("p", n_s as f64, parse_scalar::<f64>);
    let snr_grid_db = optional!(
        "snr_grid_db",
        vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        parse_list::<f64>
    );
    let trials = optional!("trials", 100, parse_scalar::<usize>);
    let bits = optional!(
        "bits",
        vec![PhaseResolution::Infinite],
        parse_list::<PhaseResolution>
    );
    let xi = optional!("xi", vec![1.0], parse_list::<f64>);
    let antenna_grid = match seen.remove("antenna_grid") {
        Some((line, v)) => parse_antenna_grid(&v, line)?,
        None => vec![(n_t_sub, n_r)],
    };
    let rho = optional!("rho", 1.0, parse_scalar::<f64>);
    let eps_primal = optional!("eps_primal", 1e-6, parse_scalar::<f64>);
    let eps_dual = optional!("eps_dual", 1e-6, parse_scalar::<f64>);
    let admm_max_iters = optional!("admm_max_iters", 10_000, parse_scalar::<usize>);
    let admm_stagnation_window = optional!("admm_stagnation_window", 200, parse_scalar::<usize>);
    let admm_x_update = match seen.remove("admm_x_update") {
        Some((line, v)) => match v.trim() {
            "derived" => XUpdateRule::Derived,
            "verbatim" => XUpdateRule::Verbatim,
            other => {
                return Err(Error::Config(format!(
                    "line {line}: admm_x_update must be 'derived' or 'verbatim', got '{other}'"
                )))
            }
        },
        None => XUpdateRule::Derived,
    };
    let quantize_in_loop = optional!("quantize_in_loop", true, parse_bool);
    let outer_tol = optional!("outer_tol", 1e-4, parse_scalar::<f64>);
    let outer_max_iters = optional!("outer_max_iters", 50, parse_scalar::<usize>);
    let seed = optional!("seed", 0, parse_scalar::<u64>);
    let out_dir = seen.remove("out_dir").map(|(_, v)| v);

    let config = SystemConfig {
        m_t,
        n_t_sub,
        n_r,
        n_s,
        k,
        n_cl,
        n_ray,
        angular_spread_deg,
        d_e_over_lambda,
        p,
        snr_grid_db,
        trials,
        bits,
        xi,
        antenna_grid,
        rho,
        eps_primal,
        eps_dual,
        admm_max_iters,
        admm_stagnation_window,
        admm_x_update,
        quantize_in_loop,
        outer_tol,
        outer_max_iters,
        seed,
        out_dir,
    };
    validate(&config)?;
    Ok(config)
}

pub fn parse_config_file(path: &Path) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

fn validate(c: &SystemConfig) -> Result<()> {
    let fail = |msg: String| Err(Error::Config(msg));
    for (name, value) in [
        ("angular_spread_deg", c.angular_spread_deg),
        ("d_e_over_lambda", c.d_e_over_lambda),
        ("p", c.p),
        ("rho", c.rho),
        ("eps_primal", c.eps_primal),
        ("eps_dual", c.eps_dual),
        ("outer_tol", c.outer_tol),
    ] {
        if !value.is_finite() {
            return fail(format!("{name}: must be finite"));
        }
    }
    if c.snr_grid_db.iter().any(|v| !v.is_finite()) {
        return fail("snr_grid_db: entries must be finite".into());
    }
    if c.n_s == 0 {
        return fail("n_s: need at least one stream".into());
    }
    if c.n_s > c.m_t {
        return fail(format!(
            "n_s: streams exceed RF chains ({} > {})",
            c.n_s, c.m_t
        ));
    }
    if c.n_s > c.n_r {
        return fail(format!(
            "n_s: streams exceed receive antennas ({} > {})",
            c.n_s, c.n_r
        ));
    }
    if c.n_t_sub == 0 {
        return fail("n_t_sub: need at least one antenna per subarray".into());
    }
    if c.k == 0 {
        return fail("k: need at least one subcarrier".into());
    }
    if c.n_cl == 0 || c.n_ray == 0 {
        return fail("n_cl/n_ray: need at least one cluster and ray".into());
    }
    if c.angular_spread_deg <= 0.0 {
        return fail("angular_spread_deg: must be positive".into());
    }
    if c.d_e_over_lambda <= 0.0 {
        return fail("d_e_over_lambda: must be positive".into());
    }
    if c.p <= 0.0 {
        return fail("p: power budget must be positive".into());
    }
    if c.trials == 0 {
        return fail("trials: need at least one trial".into());
    }
    if c.snr_grid_db.is_empty() {
        return fail("snr_grid_db: empty grid".into());
    }
    if c.bits.is_empty() {
        return fail("bits: empty list".into());
    }
    if c.xi.is_empty() {
        return fail("xi: empty list".into());
    }
    for &x in &c.xi {
        if !(0.0..=1.0).contains(&x) {
            return fail(format!("xi: value {x} outside [0, 1]"));
        }
    }
    if c.antenna_grid.is_empty() {
        return fail("antenna_grid: empty list".into());
    }
    for &(nts, nr) in &c.antenna_grid {
        if nts == 0 {
            return fail("antenna_grid: zero-antenna subarray".into());
        }
        if c.n_s > nr {
            return fail(format!(
                "antenna_grid: streams exceed receive antennas ({} > {nr})",
                c.n_s
            ));
        }
    }
    if c.rho <= 0.0 {
        return fail("rho: must be positive".into());
    }
    if c.eps_primal <= 0.0 || c.eps_dual <= 0.0 {
        return fail("eps_primal/eps_dual: tolerances must be positive".into());
    }
    if c.outer_tol <= 0.0 {
        return fail("outer_tol: must be positive".into());
    }
    if c.admm_max_iters == 0 || c.outer_max_iters == 0 {
        return fail("admm_max_iters/outer_max_iters: must be at least 1".into());
    }
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Canonical echo of a resolved configuration. Parsing the output yields an
/// equal `SystemConfig`.
pub fn resolved_text(c: &SystemConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# resolved configuration");
    let _ = writeln!(s, "m_t = {}", c.m_t);
    let _ = writeln!(s, "n_t_sub = {}", c.n_t_sub);
    let _ = writeln!(s, "n_r = {}", c.n_r);
    let _ = writeln!(s, "n_s = {}", c.n_s);
    let _ = writeln!(s, "k = {}", c.k);
    let _ = writeln!(s, "n_cl = {}", c.n_cl);
    let _ = writeln!(s, "n_ray = {}", c.n_ray);
    let _ = writeln!(s, "angular_spread_deg = {}", c.angular_spread_deg);
    let _ = writeln!(s, "d_e_over_lambda = {}", c.d_e_over_lambda);
    let _ = writeln!(s, "p = {}", c.p);
    let _ = writeln!(s, "snr_grid_db = {}", join(&c.snr_grid_db));
    let _ = writeln!(s, "trials = {}", c.trials);
    let _ = writeln!(s, "bits = {}", join(&c.bits));
    let _ = writeln!(s, "xi = {}", join(&c.xi));
    let antenna = c
        .antenna_grid
        .iter()
        .map(|(a, b)| format!("{a}x{b}"))
        .collect::<Vec<_>>()
        .join(",");
    let _ = writeln!(s, "antenna_grid = {antenna}");
    let _ = writeln!(s, "rho = {}", c.rho);
    let _ = writeln!(s, "eps_primal = {}", c.eps_primal);
    let _ = writeln!(s, "eps_dual = {}", c.eps_dual);
    let _ = writeln!(s, "admm_max_iters = {}", c.admm_max_iters);
    let _ = writeln!(s, "admm_stagnation_window = {}", c.admm_stagnation_window);
    let _ = writeln!(
        s,
        "admm_x_update = {}",
        match c.admm_x_update {
            XUpdateRule::Derived => "derived",
            XUpdateRule::Verbatim => "verbatim",
        }
    );
    let _ = writeln!(s, "quantize_in_loop = {}", c.quantize_in_loop);
    let _ = writeln!(s, "outer_tol = {}", c.outer_tol);
    let _ = writeln!(s, "outer_max_iters = {}", c.outer_max_iters);
    let _ = writeln!(s, "seed = {}", c.seed);
    if let Some(dir) = &c.out_dir {
        let _ = writeln!(s, "out_dir = {dir}");
    }
    s
}

/// FNV-1a hash of the canonical configuration text; stamped into channel
/// dumps so a dump can be traced back to its exact setup.
pub fn config_hash(c: &SystemConfig) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in resolved_text(c).bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}
