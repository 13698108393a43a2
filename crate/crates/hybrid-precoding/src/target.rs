//! Per-subcarrier optimal fully-digital precoders.
//!
//! For each subcarrier the target is `F_opt[k] = V[k] diag(sqrt(p))`, where
//! `V[k]` holds the right singular vectors of the `n_s` largest singular
//! values of `H[k]` and `p` is the water-filling allocation over those
//! streams under the per-subcarrier power budget.

use nalgebra::Complex;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::{CMat, RVec};

/// Dominant right singular basis.
///
/// Returns `(V, sigma)` with `V` of size `ncols x n_streams`, `V^H V = I`,
/// and `sigma` the `n_streams` largest singular values in descending order.
/// Zero singular values pass through when `n_streams` exceeds the rank.
pub fn svd_basis(h: &CMat, n_streams: usize) -> Result<(CMat, RVec)> {
    let max_streams = h.nrows().min(h.ncols());
    if n_streams == 0 || n_streams > max_streams {
        return Err(Error::InvalidDimension(format!(
            "n_streams = {n_streams} outside 1..={max_streams} for a {}x{} matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    let svd = h.clone().svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let v = v_t.rows(0, n_streams).adjoint();
    let sigma = RVec::from_iterator(n_streams, svd.singular_values.iter().take(n_streams).copied());
    Ok((v, sigma))
}

/// Water-filling power allocation.
///
/// Maximizes `sum_i log2(1 + p_i sigma_i^2 / noise_scale)` subject to
/// `sum_i p_i = budget`, `p_i >= 0`. Solved exactly by enumerating active
/// sets: with `n_i = noise_scale / sigma_i^2` sorted ascending, the water
/// level for the `m` strongest streams is `mu_m = (budget + sum n_i) / m`,
/// and the optimum is the largest `m` with `mu_m > n_m`.
pub fn water_filling(singular_values: &[f64], budget: f64, noise_scale: f64) -> Result<Vec<f64>> {
    if budget <= 0.0 {
        return Err(Error::Domain("power budget must be positive".into()));
    }
    if noise_scale <= 0.0 {
        return Err(Error::Domain("noise scale must be positive".into()));
    }
    for w in singular_values.windows(2) {
        if w[0] < w[1] {
            return Err(Error::Contract(
                "singular values must be in descending order".into(),
            ));
        }
    }
    if singular_values.iter().any(|&s| s < 0.0) {
        return Err(Error::Contract("singular values must be nonnegative".into()));
    }
    let n_pos = singular_values.iter().filter(|&&s| s > 0.0).count();
    if n_pos == 0 {
        return Err(Error::DegenerateChannel);
    }
    // Inverse gains, ascending because the singular values descend.
    let inv: Vec<f64> = singular_values[..n_pos]
        .iter()
        .map(|&s| noise_scale / (s * s))
        .collect();
    let mut best_m = 1;
    let mut best_mu = budget + inv[0];
    let mut running = inv[0];
    for m in 2..=n_pos {
        running += inv[m - 1];
        let mu = (budget + running) / m as f64;
        if mu > inv[m - 1] {
            best_m = m;
            best_mu = mu;
        }
    }
    let mut powers = vec![0.0; singular_values.len()];
    for (i, p) in powers.iter_mut().take(best_m).enumerate() {
        *p = best_mu - inv[i];
    }
    Ok(powers)
}

/// Per-subcarrier targets: precoder, dominant spectrum and allocated powers.
#[derive(Debug, Clone)]
pub struct PrecoderTarget {
    /// `precoders[k]` is `n_t_total x n_s` with `||.||_F^2 = budget`.
    pub precoders: Vec<CMat>,
    /// Top `n_s` singular values per subcarrier, descending.
    pub singular_values: Vec<RVec>,
    /// Water-filled powers per subcarrier, summing to `budget`.
    pub powers: Vec<RVec>,
    pub budget: f64,
}

impl PrecoderTarget {
    pub fn n_subcarriers(&self) -> usize {
        self.precoders.len()
    }

    pub fn n_streams(&self) -> usize {
        self.precoders.first().map_or(0, CMat::ncols)
    }

    pub fn n_t_total(&self) -> usize {
        self.precoders.first().map_or(0, CMat::nrows)
    }
}

/// Build the full target from a channel set.
///
/// `noise_scale` is the per-stream noise term of the water-filling objective;
/// under the transmit covariance `(budget / n_s) I` the consistent choice is
/// `noise_var * n_s / budget`.
pub fn build_target(
    channels: &ChannelSet,
    n_streams: usize,
    budget: f64,
    noise_scale: f64,
) -> Result<PrecoderTarget> {
    let mut precoders = Vec::with_capacity(channels.n_subcarriers());
    let mut all_sigma = Vec::with_capacity(channels.n_subcarriers());
    let mut all_powers = Vec::with_capacity(channels.n_subcarriers());
    for h in &channels.matrices {
        let (v, sigma) = svd_basis(h, n_streams)?;
        let powers = water_filling(sigma.as_slice(), budget, noise_scale)?;
        let mut f = v;
        for (j, &p) in powers.iter().enumerate() {
            let scale = Complex::new(p.sqrt(), 0.0);
            f.column_mut(j).iter_mut().for_each(|z| *z *= scale);
        }
        precoders.push(f);
        all_sigma.push(sigma);
        all_powers.push(RVec::from_vec(powers));
    }
    Ok(PrecoderTarget {
        precoders,
        singular_values: all_sigma,
        powers: all_powers,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate, ChannelParams};
    use crate::seeding::{substream, Domain};
    use crate::random_complex_matrix;
    use rand::Rng;

    fn test_rng(tag: u64) -> rand_chacha::ChaCha8Rng {
        substream(0xBEEF, Domain::Test, [tag, 0, 0])
    }

    #[test]
    fn svd_identity() {
        let h = CMat::identity(4, 4);
        let (v, sigma) = svd_basis(&h, 2).unwrap();
        assert!((sigma[0] - 1.0).abs() < 1e-12);
        assert!((sigma[1] - 1.0).abs() < 1e-12);
        let g = v.adjoint() * &v;
        assert!((g - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn svd_diagonal() {
        let mut h = CMat::zeros(3, 3);
        h[(0, 0)] = Complex::new(3.0, 0.0);
        h[(1, 1)] = Complex::new(2.0, 0.0);
        h[(2, 2)] = Complex::new(1.0, 0.0);
        let (v, sigma) = svd_basis(&h, 2).unwrap();
        assert!((sigma[0] - 3.0).abs() < 1e-12);
        assert!((sigma[1] - 2.0).abs() < 1e-12);
        // Columns are the first two standard basis vectors up to phase.
        for j in 0..2 {
            assert!((v[(j, j)].norm() - 1.0).abs() < 1e-12);
            assert!((v.column(j).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_matches_gram_eigenbasis() {
        // Independent oracle: eigendecomposition of H^H H. The dominant
        // subspaces must agree even though individual vectors may differ by
        // phase.
        let mut rng = test_rng(1);
        let h = random_complex_matrix(&mut rng, 8, 32);
        let n_s = 2;
        let (v, sigma) = svd_basis(&h, n_s).unwrap();

        let gram = h.adjoint() * &h;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut w = CMat::zeros(32, n_s);
        for (j, &i) in idx.iter().take(n_s).enumerate() {
            w.set_column(j, &eig.eigenvectors.column(i));
        }
        for j in 0..n_s {
            let lambda = eig.eigenvalues[idx[j]];
            assert!((lambda.max(0.0).sqrt() - sigma[j]).abs() < 1e-8);
        }
        // Subspace distance via projector difference.
        let pv = &v * v.adjoint();
        let pw = &w * w.adjoint();
        assert!((pv - pw).norm() < 1e-8);
    }

    #[test]
    fn svd_consistency_with_full_decomposition() {
        let mut rng = test_rng(2);
        let h = random_complex_matrix(&mut rng, 6, 10);
        let svd = h.clone().svd(true, true);
        let u = svd.u.unwrap();
        let v_t = svd.v_t.unwrap();
        let mut s = CMat::zeros(u.ncols(), v_t.nrows());
        for i in 0..svd.singular_values.len() {
            s[(i, i)] = Complex::new(svd.singular_values[i], 0.0);
        }
        let v = v_t.adjoint();
        assert!((&h * v - u * s).norm() < 1e-8);
    }

    #[test]
    fn svd_rejects_bad_stream_count() {
        let h = CMat::identity(4, 4);
        assert!(svd_basis(&h, 0).is_err());
        assert!(svd_basis(&h, 5).is_err());
    }

    #[test]
    fn water_filling_symmetric() {
        let p = water_filling(&[1.0, 1.0], 2.0, 1.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn water_filling_skips_zero_streams() {
        let p = water_filling(&[1.0, 0.0], 2.0, 1.0).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn water_filling_matches_grid_oracle() {
        // Two streams: exhaustive 1e6-point grid over p0 maximizing the sum
        // rate.
        let sigma = [2.0, 1.0];
        let budget = 2.0;
        let noise = 1.0;
        let rate = |p0: f64| {
            let p1 = budget - p0;
            (1.0 + p0 * sigma[0] * sigma[0] / noise).log2()
                + (1.0 + p1 * sigma[1] * sigma[1] / noise).log2()
        };
        let n = 1_000_000;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let p0 = budget * i as f64 / n as f64;
            let r = rate(p0);
            if r > best.1 {
                best = (p0, r);
            }
        }
        let p = water_filling(&sigma, budget, noise).unwrap();
        assert!((p[0] - best.0).abs() < 1e-5, "{} vs oracle {}", p[0], best.0);
        assert!((p[0] + p[1] - budget).abs() < 1e-12);
    }

    #[test]
    fn water_filling_kkt() {
        let mut rng = test_rng(3);
        for _ in 0..100 {
            let n = 1 + (rng.random::<u32>() % 6) as usize;
            let mut sigma: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
            sigma.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let budget = 0.5 + rng.random::<f64>() * 4.0;
            let noise = 0.1 + rng.random::<f64>();
            let p = water_filling(&sigma, budget, noise).unwrap();
            let total: f64 = p.iter().sum();
            assert!((total - budget).abs() < 1e-9);
            // Recover the water level from any active stream and check the
            // complementary slackness conditions.
            let mu = p
                .iter()
                .zip(&sigma)
                .filter(|(&pi, _)| pi > 0.0)
                .map(|(&pi, &s)| pi + noise / (s * s))
                .next()
                .unwrap();
            for (&pi, &s) in p.iter().zip(&sigma) {
                if s == 0.0 {
                    assert_eq!(pi, 0.0);
                } else if pi > 0.0 {
                    assert!((mu - noise / (s * s) - pi).abs() < 1e-9);
                } else {
                    assert!(mu <= noise / (s * s) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn water_filling_degenerate_channel() {
        assert!(matches!(
            water_filling(&[0.0, 0.0], 1.0, 1.0),
            Err(Error::DegenerateChannel)
        ));
    }

    fn channel_set(tag: u64) -> ChannelSet {
        let params = ChannelParams {
            m_t: 2,
            n_t_sub: 4,
            n_r: 4,
            n_clusters: 3,
            n_rays: 2,
            angular_spread: 10f64.to_radians(),
            spacing_over_wavelength: 0.5,
            n_subcarriers: 3,
        };
        generate(&params, tag, 0, 0, 0).unwrap()
    }

    #[test]
    fn target_identity_channel_single_stream() {
        let set = ChannelSet {
            matrices: vec![CMat::identity(4, 4)],
            n_t_sub: 4,
            seed: 0,
            config_hash: 0,
        };
        let t = build_target(&set, 1, 1.0, 1.0).unwrap();
        let f = &t.precoders[0];
        assert!((f.norm() - 1.0).abs() < 1e-12);
        assert_eq!(f.ncols(), 1);
    }

    #[test]
    fn target_invariants() {
        let set = channel_set(4);
        let budget = 2.0;
        let t = build_target(&set, 2, budget, 0.5).unwrap();
        for k in 0..t.n_subcarriers() {
            let f = &t.precoders[k];
            assert!((f.norm_squared() - budget).abs() < 1e-9);
            assert!((t.powers[k].iter().sum::<f64>() - budget).abs() < 1e-9);
            // Columns stay mutually orthogonal: V orthonormal times diagonal.
            let g = f.adjoint() * f;
            for i in 0..2 {
                for j in 0..2 {
                    if i != j {
                        assert!(g[(i, j)].norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn target_beats_random_precoders() {
        // Rate oracle: F_opt must dominate random precoders of equal power.
        let set = channel_set(5);
        let budget = 2.0;
        let n_s = 2;
        let noise_var = 1.0;
        let noise_scale = noise_var * n_s as f64 / budget;
        let t = build_target(&set, n_s, budget, noise_scale).unwrap();
        let h = &set.matrices[0];
        let rate = |f: &CMat| {
            let g = h * f;
            let coeff = budget / (n_s as f64 * noise_var);
            g.svd(false, false)
                .singular_values
                .iter()
                .map(|&s| (1.0 + coeff * s * s).log2())
                .sum::<f64>()
        };
        let opt_rate = rate(&t.precoders[0]);
        let mut rng = test_rng(6);
        for _ in 0..1000 {
            let mut f = random_complex_matrix(&mut rng, h.ncols(), n_s);
            let scale = Complex::new((budget / f.norm_squared()).sqrt(), 0.0);
            f *= scale;
            assert!(rate(&f) <= opt_rate + 1e-9);
        }
    }

    #[test]
    fn target_propagates_degenerate_channel() {
        let set = ChannelSet {
            matrices: vec![CMat::zeros(4, 4)],
            n_t_sub: 4,
            seed: 0,
            config_hash: 0,
        };
        assert!(matches!(
            build_target(&set, 2, 2.0, 1.0),
            Err(Error::DegenerateChannel)
        ));
    }

    #[test]
    fn water_level_unique_across_ties() {
        // Tied singular values: any orthonormal basis works; powers split evenly.
        let p = water_filling(&[2.0, 2.0, 2.0], 3.0, 1.0).unwrap();
        for &pi in &p {
            assert!((pi - 1.0).abs() < 1e-12);
        }
    }
}
