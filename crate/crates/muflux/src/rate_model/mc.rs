//! Monte Carlo estimate of the coincidence rate by ray tracing.
//!
//! Entry points are sampled uniformly on the top face and directions
//! uniformly over the aperture box; a ray is kept only when its straight
//! continuation exits the bottom face. The geometric acceptance therefore
//! re-derives the effective area from the ray-box intersection instead of
//! the closed-form shrunk sides, which makes this an independent oracle for
//! the quadrature path.
//!
//! Sampling is chunked with one counter-seeded stream per chunk and the
//! partial sums are reduced in chunk order, so results are bit-identical for
//! a fixed seed regardless of how many workers participate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::atmosphere::{corrected_intensity, transformed_zenith_unchecked, AtmosphereModel};
use crate::error::{Error, Result};
use crate::geometry::DetectorGeometry;

use super::{QuadratureConfig, RateIntegrand, RatePrediction};

const CHUNK: u64 = 1 << 16;

/// True when the ray entering the top face at `(x, y)` with direction
/// tangents `(tan theta, tan phi, -1)` also crosses the bottom face.
fn ray_exits_bottom(geom: &DetectorGeometry, x: f64, y: f64, theta: f64, phi: f64) -> bool {
    let exit_x = x + geom.gap_cm() * theta.tan();
    let exit_y = y + geom.gap_cm() * phi.tan();
    (0.0..=geom.length_cm()).contains(&exit_x) && (0.0..=geom.width_cm()).contains(&exit_y)
}

/// Monte Carlo rate estimate with `n_samples` rays; returns the mean and its
/// standard error. Deterministic for a fixed `(seed, n_samples)` pair. Only
/// the horizon cut and angular weight of `cfg` are used.
pub fn mc_rate(
    geom: &DetectorGeometry,
    theta_zenith_rad: f64,
    model: &AtmosphereModel,
    cfg: &QuadratureConfig,
    n_samples: u64,
    seed: u64,
) -> Result<RatePrediction> {
    cfg.validate()?;
    super::validate_tilt(theta_zenith_rad)?;
    if n_samples == 0 {
        return Err(Error::domain("n_samples must be at least 1"));
    }

    let integrand = RateIntegrand::new(geom, theta_zenith_rad, model, cfg);
    let half_alpha = geom.aperture_alpha_rad() / 2.0;
    let half_beta = geom.aperture_beta_rad() / 2.0;
    let (length, width) = (geom.length_cm(), geom.width_cm());

    let n_chunks = n_samples.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk + 1);
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(n_samples);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in lo..hi {
                let theta = -half_alpha + rng.random::<f64>() * (2.0 * half_alpha);
                let phi = -half_beta + rng.random::<f64>() * (2.0 * half_beta);
                let x = rng.random::<f64>() * length;
                let y = rng.random::<f64>() * width;
                if !ray_exits_bottom(geom, x, y, theta, phi) {
                    continue;
                }
                let zenith = transformed_zenith_unchecked(theta_zenith_rad, theta, phi);
                if zenith.abs() > integrand.max_zenith_rad {
                    continue;
                }
                let g = corrected_intensity(zenith, model) * integrand.weight_value(theta, phi);
                sum += g;
                sum_sq += g * g;
            }
            (sum, sum_sq)
        })
        .collect();

    let (sum, sum_sq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, q), &(ps, pq)| (s + ps, q + pq));

    let n = n_samples as f64;
    let volume = 2.0 * half_alpha * 2.0 * half_beta * length * width;
    let mean = sum / n;
    let rate = volume * mean;
    let std_error = if n_samples > 1 {
        let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
        volume * (var / n).sqrt()
    } else {
        0.0
    };
    Ok(RatePrediction {
        rate_cpm: rate,
        numerical_error_cpm: std_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::presets;
    use crate::rate_model::total_rate;

    #[test]
    fn deterministic_for_fixed_seed() {
        let geom = presets::reference_telescope();
        let model = AtmosphereModel::default();
        let cfg = QuadratureConfig::default();
        let a = mc_rate(&geom, 0.4, &model, &cfg, 50_000, 7).unwrap();
        let b = mc_rate(&geom, 0.4, &model, &cfg, 50_000, 7).unwrap();
        assert_eq!(a, b);
        let c = mc_rate(&geom, 0.4, &model, &cfg, 50_000, 8).unwrap();
        assert_ne!(a.rate_cpm, c.rate_cpm);
    }

    #[test]
    fn result_does_not_depend_on_worker_count() {
        let geom = presets::reference_chip().as_detector();
        let model = AtmosphereModel::default();
        let cfg = QuadratureConfig::default();
        // enough samples for several chunks
        let n = 3 * (1 << 16) + 1234;
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_rate(&geom, 0.9, &model, &cfg, n, 21).unwrap())
        };
        let single = run(1);
        let several = run(4);
        assert_eq!(single, several);
    }

    #[test]
    fn zero_intensity_estimates_exactly_zero() {
        let geom = presets::reference_chip().as_detector();
        let model = AtmosphereModel::new(6400.0, 10.0, 0.0).unwrap();
        let p = mc_rate(&geom, 0.0, &model, &QuadratureConfig::default(), 10_000, 1).unwrap();
        assert_eq!(p.rate_cpm, 0.0);
        assert_eq!(p.numerical_error_cpm, 0.0);
    }

    #[test]
    fn zero_samples_is_a_domain_error() {
        let geom = presets::reference_telescope();
        let err = mc_rate(
            &geom,
            0.0,
            &AtmosphereModel::default(),
            &QuadratureConfig::default(),
            0,
            1,
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn agrees_with_quadrature_at_spot_angles() {
        let model = AtmosphereModel::default();
        let cfg = QuadratureConfig::default();
        for geom in [
            presets::reference_telescope(),
            presets::reference_chip().as_detector(),
        ] {
            for tilt in [0.0, 0.8, std::f64::consts::FRAC_PI_2] {
                let quad = total_rate(&geom, tilt, &model, &cfg).unwrap();
                let mc = mc_rate(&geom, tilt, &model, &cfg, 200_000, 11).unwrap();
                let diff = (quad.rate_cpm - mc.rate_cpm).abs();
                assert!(
                    diff <= 3.0 * mc.numerical_error_cpm,
                    "tilt={tilt}: quad={} mc={} +- {}",
                    quad.rate_cpm,
                    mc.rate_cpm,
                    mc.numerical_error_cpm
                );
            }
        }
    }

    #[test]
    fn binned_acceptance_reproduces_effective_area() {
        // For fixed direction bins, the accepted fraction of uniformly
        // sampled entry points times the face area must match the shrunk
        // sides formula within binomial error.
        let geom = presets::reference_chip().as_detector();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 20_000_u32;
        for (theta, phi) in [
            (0.0, 0.0),
            (0.5, 0.2),
            (1.0, -0.7),
            (-1.3, 0.4),
            (1.47, 1.47),
            (1.55, 0.0),
        ] {
            let mut hits = 0u32;
            for _ in 0..trials {
                let x = rng.random::<f64>() * geom.length_cm();
                let y = rng.random::<f64>() * geom.width_cm();
                if ray_exits_bottom(&geom, x, y, theta, phi) {
                    hits += 1;
                }
            }
            let frac = hits as f64 / trials as f64;
            let expected = geom.effective_area_cm2(theta, phi) / geom.face_area_cm2();
            let sigma = (expected * (1.0 - expected) / trials as f64)
                .sqrt()
                .max(1e-4);
            assert!(
                (frac - expected).abs() <= 4.0 * sigma,
                "theta={theta} phi={phi}: frac={frac} expected={expected}"
            );
        }
    }
}
