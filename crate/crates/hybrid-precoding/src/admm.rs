//! Sphere-constrained least squares via scaled ADMM in the real domain.
//!
//! With the RF precoder fixed, each subcarrier's baseband design is
//!
//! ```text
//! min ||F_opt - F_RF F_BB||_F^2   s.t.  ||F_BB||_F^2 = P
//! ```
//!
//! which vectorizes to `min ||A x - b||^2` on the complex sphere with
//! `A = I kron F_RF`. Lifting to real variables `xbar = [Re x; Im x]` with
//! `A1 = [Re A, -Im A]`, `A2 = [Im A, Re A]` gives a smooth objective
//! `g(xbar) = ||A1 xbar - Re b||^2 + ||A2 xbar - Im b||^2` over the real
//! sphere of radius `sqrt(c)`, split by scaled ADMM into a linear x-update,
//! a sphere projection, and a running dual update.
//!
//! Because the lifted operator satisfies `A1' A1 + A2' A2 = I` (the RF matrix
//! is semi-unitary), the subproblem also has a closed-form global optimum,
//! exposed as [`sphere_ls_oracle`] and used for verification throughout the
//! test suite.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::rf::RfMatrix;
use crate::{CMat, CVec, RMat, RVec};

/// Real lift of one per-subcarrier baseband subproblem.
#[derive(Debug, Clone)]
pub struct RealLiftedSystem {
    /// `[Re A, -Im A]`, size `(n_s * n_t_total) x (2 m_t n_s)`.
    pub a1: RMat,
    /// `[Im A, Re A]`, same size.
    pub a2: RMat,
    pub b_re: RVec,
    pub b_im: RVec,
    /// Squared sphere radius `c` (the power budget).
    pub radius_sq: f64,
    sol_rows: usize,
    sol_cols: usize,
}

impl RealLiftedSystem {
    /// Lift a raw complex system `min ||A x - b||^2, ||x||^2 = c`, where the
    /// solution de-vectorizes to a `sol_rows x sol_cols` matrix.
    pub fn from_complex_parts(
        a: &CMat,
        b: &CVec,
        radius_sq: f64,
        sol_rows: usize,
        sol_cols: usize,
    ) -> Result<Self> {
        if a.ncols() != sol_rows * sol_cols {
            return Err(Error::InvalidDimension(format!(
                "operator has {} columns, solution shape is {sol_rows}x{sol_cols}",
                a.ncols()
            )));
        }
        if b.len() != a.nrows() {
            return Err(Error::InvalidDimension(format!(
                "rhs length {} does not match {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if radius_sq <= 0.0 {
            return Err(Error::Domain("sphere radius must be positive".into()));
        }
        let (m, n) = (a.nrows(), a.ncols());
        let mut a1 = RMat::zeros(m, 2 * n);
        let mut a2 = RMat::zeros(m, 2 * n);
        for j in 0..n {
            for i in 0..m {
                let z = a[(i, j)];
                a1[(i, j)] = z.re;
                a1[(i, n + j)] = -z.im;
                a2[(i, j)] = z.im;
                a2[(i, n + j)] = z.re;
            }
        }
        Ok(Self {
            a1,
            a2,
            b_re: b.map(|z| z.re),
            b_im: b.map(|z| z.im),
            radius_sq,
            sol_rows,
            sol_cols,
        })
    }

    /// Real lift of `[Re x; Im x]` for a complex matrix in column-major order.
    pub fn vectorize(f: &CMat) -> RVec {
        let n = f.len();
        let mut out = RVec::zeros(2 * n);
        for (i, z) in f.iter().enumerate() {
            out[i] = z.re;
            out[n + i] = z.im;
        }
        out
    }

    /// Reassemble the complex solution matrix from a lifted vector.
    pub fn devectorize(&self, xbar: &RVec) -> CMat {
        let n = self.sol_rows * self.sol_cols;
        CMat::from_fn(self.sol_rows, self.sol_cols, |r, c| {
            let i = c * self.sol_rows + r;
            Complex::new(xbar[i], xbar[n + i])
        })
    }

    /// The smooth part `g(xbar)` of the split objective.
    pub fn objective(&self, xbar: &RVec) -> f64 {
        (&self.a1 * xbar - &self.b_re).norm_squared()
            + (&self.a2 * xbar - &self.b_im).norm_squared()
    }

    /// `A1' b_re + A2' b_im`, the lift of `A^H b`.
    pub fn linear_term(&self) -> RVec {
        self.a1.tr_mul(&self.b_re) + self.a2.tr_mul(&self.b_im)
    }

    /// Frobenius defect of the Gram identity `A1' A1 + A2' A2 = I`.
    pub fn gram_defect(&self) -> f64 {
        let n = self.a1.ncols();
        let gram = self.a1.tr_mul(&self.a1) + self.a2.tr_mul(&self.a2);
        (gram - RMat::identity(n, n)).norm()
    }

    pub fn dim(&self) -> usize {
        self.a1.ncols()
    }
}

/// Build the lifted system for a fixed RF precoder and target precoder.
pub fn build_real_system(rf: &RfMatrix, f_opt: &CMat, budget: f64) -> Result<RealLiftedSystem> {
    // Revalidate the structural invariant; downstream algebra relies on it.
    RfMatrix::from_matrix(rf.as_matrix().clone(), rf.n_t_sub())?;
    let n_t_total = rf.n_t_total();
    let m_t = rf.m_t();
    if f_opt.nrows() != n_t_total {
        return Err(Error::InvalidDimension(format!(
            "target has {} rows, RF matrix drives {n_t_total} antennas",
            f_opt.nrows()
        )));
    }
    let n_s = f_opt.ncols();
    // A = I_{n_s} kron F_RF, materialized block by block.
    let mut a = CMat::zeros(n_s * n_t_total, n_s * m_t);
    for s in 0..n_s {
        a.view_mut((s * n_t_total, s * m_t), (n_t_total, m_t))
            .copy_from(rf.as_matrix());
    }
    let b = CVec::from_column_slice(f_opt.as_slice());
    RealLiftedSystem::from_complex_parts(&a, &b, budget, m_t, n_s)
}

/// Which linear term the x-update uses: the one derived from the proximal
/// step, `rho (y - nu)`, or the published recursion's `rho (y - x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XUpdateRule {
    Derived,
    Verbatim,
}

/// Solver controls.
#[derive(Debug, Clone)]
pub struct AdmmParams {
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iters: usize,
    /// Iterations without objective improvement before giving up (0 = never).
    /// Catches the cycling regime of the nonconvex projection step, where
    /// residuals never meet the tolerances.
    pub stagnation_window: usize,
    pub x_update: XUpdateRule,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            max_iters: 10_000,
            stagnation_window: 200,
            x_update: XUpdateRule::Derived,
        }
    }
}

/// Iterate snapshot: lifted primal pair, scaled dual and residuals.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: RVec,
    pub y: RVec,
    pub dual: RVec,
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Warm-start point: feasible `y` and scaled dual.
#[derive(Debug, Clone)]
pub struct AdmmWarmStart {
    pub y: RVec,
    pub dual: RVec,
}

/// Solve outcome.
#[derive(Debug, Clone)]
pub struct AdmmReport {
    /// Feasible solution, de-vectorized. The last iterate when converged,
    /// otherwise the best feasible iterate seen.
    pub solution: CMat,
    pub iterations: usize,
    /// `||A x - b||^2` at the returned solution.
    pub objective: f64,
    pub converged: bool,
    /// Final iterate triple and residuals, regardless of solution quality;
    /// feeds warm starts.
    pub state: AdmmState,
}

/// Run scaled ADMM on a lifted sphere-constrained system.
///
/// Per iteration: `x <- (2 A1' b_re + 2 A2' b_im + rho (y - nu)) / (2 + rho)`,
/// `y <- sqrt(c) (x + nu) / ||x + nu||`, `nu <- nu + x - y`, until both the
/// primal residual `||x - y||` and dual residual `rho ||y_{i+1} - y_i||`
/// drop below their tolerances.
///
/// Without a warm start, `y` begins at the sphere point aligned with
/// `A^H b` (the best descent direction; the first canonical basis vector if
/// that is zero) and the dual at zero.
pub fn admm_solve(
    system: &RealLiftedSystem,
    params: &AdmmParams,
    warm: Option<&AdmmWarmStart>,
) -> Result<AdmmReport> {
    if params.rho <= 0.0 {
        return Err(Error::Domain("rho must be positive".into()));
    }
    if params.max_iters == 0 {
        return Err(Error::Domain("max_iters must be at least 1".into()));
    }
    let n = system.dim();
    let radius = system.radius_sq.sqrt();
    let q = system.linear_term();
    let q_norm = q.norm();

    let (mut y, mut nu) = match warm {
        Some(w) => {
            if w.y.len() != n || w.dual.len() != n {
                return Err(Error::InvalidDimension(
                    "warm start dimension mismatch".into(),
                ));
            }
            (w.y.clone(), w.dual.clone())
        }
        None => {
            let y0 = if q_norm > 0.0 {
                &q * (radius / q_norm)
            } else {
                let mut e = RVec::zeros(n);
                e[0] = radius;
                e
            };
            (y0, RVec::zeros(n))
        }
    };

    // On the sphere, g(y) = c - 2 q.y + ||b||^2; tracking q.y is enough to
    // rank iterates without extra matrix products.
    let mut best_score = f64::NEG_INFINITY;
    let mut best_y = y.clone();
    let mut since_improvement = 0usize;

    // Ring buffer of recent y iterates. When the projection step admits no
    // fixed point (possible for small rho on poorly representable targets)
    // the iteration settles into a short cycle: y revisits an earlier value
    // while the window also contains a distant one, and the primal residual
    // stays large. The spread requirement separates a genuine cycle from the
    // convergent radial phase, where y is pinned and only x and the dual
    // still move. Disabled together with the stagnation window.
    const CYCLE_MEMORY: usize = 4;
    let detect_bailout = params.stagnation_window > 0;
    let mut recent: Vec<RVec> = Vec::with_capacity(CYCLE_MEMORY);
    let mut cycle_hits = 0usize;

    // Work buffers; the loop itself allocates nothing so the per-iteration
    // cost is dominated by the two transposed matrix-vector products.
    let mut x = y.clone();
    let mut numerator = RVec::zeros(n);
    let mut diff = RVec::zeros(n);
    let mut v = RVec::zeros(n);
    let mut y_new = RVec::zeros(n);
    let mut converged = false;
    let mut iterations = 0usize;
    let (mut r_primal, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let denom = 2.0 + params.rho;

    for _ in 0..params.max_iters {
        numerator.gemv_tr(2.0, &system.a1, &system.b_re, 0.0);
        numerator.gemv_tr(2.0, &system.a2, &system.b_im, 1.0);
        diff.copy_from(&y);
        match params.x_update {
            XUpdateRule::Derived => diff -= &nu,
            XUpdateRule::Verbatim => diff -= &x,
        }
        numerator.axpy(params.rho, &diff, 1.0);
        x.copy_from(&numerator);
        x.unscale_mut(denom);

        v.copy_from(&x);
        v += &nu;
        let v_norm = v.norm();
        if v_norm == 0.0 {
            return Err(Error::DegenerateProjection);
        }
        y_new.copy_from(&v);
        y_new.scale_mut(radius / v_norm);

        r_primal = x.metric_distance(&y_new);
        r_dual = params.rho * y_new.metric_distance(&y);
        diff.copy_from(&x);
        diff -= &y_new;
        nu += &diff;
        iterations += 1;

        let score = q.dot(&y_new);
        if score > best_score {
            let significant = score > best_score + 1e-12 * (1.0 + best_score.abs());
            best_score = score;
            best_y.copy_from(&y_new);
            if significant {
                since_improvement = 0;
            } else {
                since_improvement += 1;
            }
        } else {
            since_improvement += 1;
        }

        if detect_bailout {
            let mut min_d = f64::INFINITY;
            let mut max_d = 0.0f64;
            for old in &recent {
                let d = y_new.metric_distance(old);
                min_d = min_d.min(d);
                max_d = max_d.max(d);
            }
            let cycling = min_d < 1e-9 * radius
                && max_d > 0.1 * radius
                && r_primal > 100.0 * params.eps_primal;
            cycle_hits = if cycling { cycle_hits + 1 } else { 0 };
            if recent.len() == CYCLE_MEMORY {
                let mut oldest = recent.remove(0);
                oldest.copy_from(&y);
                recent.push(oldest);
            } else {
                recent.push(y.clone());
            }
        }

        std::mem::swap(&mut y, &mut y_new);

        if r_primal < params.eps_primal && r_dual < params.eps_dual {
            converged = true;
            break;
        }
        if detect_bailout {
            if cycle_hits >= 3 {
                break;
            }
            if since_improvement >= params.stagnation_window {
                break;
            }
        }
    }

    let solution_y = if converged { &y } else { &best_y };
    let objective = system.objective(solution_y);
    let solution = system.devectorize(solution_y);
    Ok(AdmmReport {
        solution,
        iterations,
        objective,
        converged,
        state: AdmmState {
            x,
            y,
            dual: nu,
            iteration: iterations,
            primal_residual: r_primal,
            dual_residual: r_dual,
        },
    })
}

/// Closed-form global optimum of the lifted subproblem.
#[derive(Debug, Clone)]
pub struct SphereLsSolution {
    pub matrix: CMat,
    pub objective: f64,
    /// Set when `A^H b = 0`: every sphere point is optimal and a canonical
    /// one is returned.
    pub degenerate: bool,
}

/// Exact minimizer `sqrt(c) A^H b / ||A^H b||` of `||A x - b||^2` on the
/// sphere, valid because `A^H A = I`: expanding the square leaves
/// `c - 2 Re<A^H b, x> + ||b||^2`, minimized by alignment with `A^H b`.
pub fn sphere_ls_oracle(system: &RealLiftedSystem) -> Result<SphereLsSolution> {
    let defect = system.gram_defect();
    if defect > 1e-8 {
        return Err(Error::Contract(format!(
            "Gram identity violated (defect {defect:.3e}); oracle inapplicable"
        )));
    }
    let q = system.linear_term();
    let q_norm = q.norm();
    let b_norm = (system.b_re.norm_squared() + system.b_im.norm_squared()).sqrt();
    let radius = system.radius_sq.sqrt();
    if q_norm <= 1e-12 * b_norm.max(1.0) {
        let mut e = RVec::zeros(system.dim());
        e[0] = radius;
        return Ok(SphereLsSolution {
            matrix: system.devectorize(&e),
            objective: system.objective(&e),
            degenerate: true,
        });
    }
    let xbar = &q * (radius / q_norm);
    Ok(SphereLsSolution {
        matrix: system.devectorize(&xbar),
        objective: system.objective(&xbar),
        degenerate: false,
    })
}
