//! Zenith-dependent muon intensity.
//!
//! The naive sea-level law `I(theta) = I0 cos^2(theta)` ignores that a muon
//! arriving at large zenith angle crosses far more air than a vertical one.
//! On a spherical planet of radius `r` with an atmosphere shell of thickness
//! `a`, the slant path is
//!
//! `p(theta) = -r cos(theta) + sqrt(a^2 + 2 a r + (r cos theta)^2)`
//!
//! and the corrected intensity scales as `I0 (a / p)^2`, which stays finite
//! (and small) at the horizon instead of vanishing.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Spherical-shell atmosphere plus the vertical flux normalization.
/// Distances in km; intensity in cm^-2 sr^-1 min^-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereModel {
    earth_radius_km: f64,
    atmosphere_km: f64,
    vertical_intensity: f64,
}

impl AtmosphereModel {
    pub fn new(earth_radius_km: f64, atmosphere_km: f64, vertical_intensity: f64) -> Result<Self> {
        if earth_radius_km <= 0.0 || !earth_radius_km.is_finite() {
            return Err(Error::domain(format!(
                "earth radius must be positive, got {earth_radius_km}"
            )));
        }
        if atmosphere_km <= 0.0 || !atmosphere_km.is_finite() {
            return Err(Error::domain(format!(
                "atmosphere thickness must be positive, got {atmosphere_km}"
            )));
        }
        if earth_radius_km <= atmosphere_km {
            return Err(Error::domain(format!(
                "earth radius ({earth_radius_km} km) must exceed atmosphere thickness ({atmosphere_km} km)"
            )));
        }
        if vertical_intensity < 0.0 || !vertical_intensity.is_finite() {
            return Err(Error::domain(format!(
                "vertical intensity must be non-negative, got {vertical_intensity}"
            )));
        }
        Ok(Self {
            earth_radius_km,
            atmosphere_km,
            vertical_intensity,
        })
    }

    /// Same atmosphere with a different vertical intensity.
    pub fn with_vertical_intensity(&self, vertical_intensity: f64) -> Result<Self> {
        Self::new(self.earth_radius_km, self.atmosphere_km, vertical_intensity)
    }

    pub fn earth_radius_km(&self) -> f64 {
        self.earth_radius_km
    }

    pub fn atmosphere_km(&self) -> f64 {
        self.atmosphere_km
    }

    pub fn vertical_intensity(&self) -> f64 {
        self.vertical_intensity
    }
}

impl Default for AtmosphereModel {
    /// 6400 km planet, 10 km atmosphere, I0 = 0.420 cm^-2 sr^-1 min^-1.
    fn default() -> Self {
        Self {
            earth_radius_km: 6400.0,
            atmosphere_km: 10.0,
            vertical_intensity: 0.420,
        }
    }
}

/// Slant atmosphere thickness crossed at zenith angle `theta` in [0, pi/2].
/// Ranges from `a` straight up to `sqrt(a^2 + 2 a r)` at the horizon.
pub fn path_length_km(theta_rad: f64, model: &AtmosphereModel) -> Result<f64> {
    if !theta_rad.is_finite() || !(0.0..=FRAC_PI_2).contains(&theta_rad) {
        return Err(Error::domain(format!(
            "zenith angle must lie in [0, pi/2], got {theta_rad}"
        )));
    }
    Ok(slant_path(theta_rad.cos(), model))
}

fn slant_path(cos_theta: f64, model: &AtmosphereModel) -> f64 {
    let r = model.earth_radius_km;
    let a = model.atmosphere_km;
    let rc = r * cos_theta;
    -rc + (a * a + 2.0 * a * r + rc * rc).sqrt()
}

/// Curvature-corrected intensity `I0 (a / p(theta))^2`. Uses |cos theta|, so
/// any finite angle is accepted and the result is even in `theta`.
pub fn corrected_intensity(theta_rad: f64, model: &AtmosphereModel) -> f64 {
    let p = slant_path(theta_rad.cos().abs(), model);
    let ratio = model.atmosphere_km / p;
    model.vertical_intensity * ratio * ratio
}

/// The plain `I0 cos^2(theta)` law.
pub fn naive_intensity(theta_rad: f64, vertical_intensity: f64) -> f64 {
    let c = theta_rad.cos();
    vertical_intensity * c * c
}

/// Zenith angle of a local detector direction once the detector is tilted.
///
/// The sky is rotated by `theta_zenith` relative to the device; a direction
/// at `(theta, phi)` in the device frame then sits at global zenith
///
/// `theta_mod = asin( sin(theta_zenith + theta) * cos(phi / 2) )`.
///
/// The arcsine argument is bounded by construction, so any finite inputs are
/// accepted; `theta_zenith` must lie in [0, pi/2].
pub fn transformed_zenith(theta_zenith_rad: f64, theta_rad: f64, phi_rad: f64) -> Result<f64> {
    if !theta_zenith_rad.is_finite() || !(0.0..=FRAC_PI_2).contains(&theta_zenith_rad) {
        return Err(Error::domain(format!(
            "detector tilt must lie in [0, pi/2], got {theta_zenith_rad}"
        )));
    }
    Ok(transformed_zenith_unchecked(
        theta_zenith_rad,
        theta_rad,
        phi_rad,
    ))
}

#[inline]
pub(crate) fn transformed_zenith_unchecked(
    theta_zenith_rad: f64,
    theta_rad: f64,
    phi_rad: f64,
) -> f64 {
    ((theta_zenith_rad + theta_rad).sin() * (phi_rad / 2.0).cos()).asin()
}
