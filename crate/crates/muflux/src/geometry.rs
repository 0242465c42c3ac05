//! Detector geometries: two-scintillator coincidence telescopes and solid
//! rectangular bodies (chips), with their aperture angles and the
//! inclination-dependent effective area.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// How the sensitive volume is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    /// Two stacked sensitive faces separated by a gap; trajectories must
    /// cross both, which limits the aperture to `2 atan(side / gap)`.
    Telescope,
    /// One solid cuboid; any trajectory crossing top and bottom face counts,
    /// so both apertures are exactly pi.
    SolidBody,
}

/// A rectangular coincidence detector: face `length x width`, sensitive
/// planes separated vertically by `gap` (the substrate thickness for a
/// solid chip). Aperture angles are derived at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorGeometry {
    length_cm: f64,
    width_cm: f64,
    gap_cm: f64,
    aperture_alpha_rad: f64,
    aperture_beta_rad: f64,
    kind: DetectorKind,
}

/// A qubit-chip-like solid cuboid, specified in millimetres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipGeometry {
    pub side_a_mm: f64,
    pub side_b_mm: f64,
    pub thickness_mm: f64,
}

/// Aperture angles of a two-face telescope:
/// `alpha = 2 atan(L/h)` along the length side, `beta = 2 atan(W/h)` along
/// the width side. All dimensions must be strictly positive.
pub fn aperture_angles(length_cm: f64, width_cm: f64, gap_cm: f64) -> Result<(f64, f64)> {
    for (name, v) in [("length", length_cm), ("width", width_cm), ("gap", gap_cm)] {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::domain(format!(
                "{name} must be strictly positive, got {v}"
            )));
        }
    }
    Ok((
        2.0 * (length_cm / gap_cm).atan(),
        2.0 * (width_cm / gap_cm).atan(),
    ))
}

impl DetectorGeometry {
    /// Two stacked faces with a strictly positive gap.
    pub fn telescope(length_cm: f64, width_cm: f64, gap_cm: f64) -> Result<Self> {
        let (alpha, beta) = aperture_angles(length_cm, width_cm, gap_cm)?;
        Ok(Self {
            length_cm,
            width_cm,
            gap_cm,
            aperture_alpha_rad: alpha,
            aperture_beta_rad: beta,
            kind: DetectorKind::Telescope,
        })
    }

    /// A solid cuboid. Both apertures are pi by convention, independent of
    /// the aspect ratio; `gap_cm` is the body thickness and may be zero
    /// (degenerate thin-sheet limit).
    pub fn solid_body(length_cm: f64, width_cm: f64, gap_cm: f64) -> Result<Self> {
        for (name, v) in [("length", length_cm), ("width", width_cm)] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::domain(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        if gap_cm < 0.0 || !gap_cm.is_finite() {
            return Err(Error::domain(format!(
                "thickness must be non-negative, got {gap_cm}"
            )));
        }
        Ok(Self {
            length_cm,
            width_cm,
            gap_cm,
            aperture_alpha_rad: PI,
            aperture_beta_rad: PI,
            kind: DetectorKind::SolidBody,
        })
    }

    pub fn length_cm(&self) -> f64 {
        self.length_cm
    }

    pub fn width_cm(&self) -> f64 {
        self.width_cm
    }

    pub fn gap_cm(&self) -> f64 {
        self.gap_cm
    }

    pub fn aperture_alpha_rad(&self) -> f64 {
        self.aperture_alpha_rad
    }

    pub fn aperture_beta_rad(&self) -> f64 {
        self.aperture_beta_rad
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    /// Full face area `L * W` in cm^2.
    pub fn face_area_cm2(&self) -> f64 {
        self.length_cm * self.width_cm
    }

    /// Same detector with length/width (and hence the two apertures)
    /// exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            length_cm: self.width_cm,
            width_cm: self.length_cm,
            aperture_alpha_rad: self.aperture_beta_rad,
            aperture_beta_rad: self.aperture_alpha_rad,
            ..*self
        }
    }

    /// Effective area seen by a trajectory inclined by `theta` in the length
    /// plane and `phi` in the width plane (both measured from the face
    /// normal):
    ///
    /// `A'(theta, phi) = max(0, L - h|tan theta|) * max(0, W - h|tan phi|)`
    ///
    /// Angles outside the aperture return 0 (no through-path exists), never
    /// an error. The clamp keeps the solid-body case (aperture = pi) finite
    /// near +-90 degrees.
    pub fn effective_area_cm2(&self, theta_rad: f64, phi_rad: f64) -> f64 {
        if theta_rad.abs() > self.aperture_alpha_rad / 2.0
            || phi_rad.abs() > self.aperture_beta_rad / 2.0
        {
            return 0.0;
        }
        self.effective_length_cm(theta_rad) * self.effective_width_cm(phi_rad)
    }

    pub(crate) fn effective_length_cm(&self, theta_rad: f64) -> f64 {
        shrunk_side(self.length_cm, self.gap_cm, theta_rad)
    }

    pub(crate) fn effective_width_cm(&self, phi_rad: f64) -> f64 {
        shrunk_side(self.width_cm, self.gap_cm, phi_rad)
    }
}

/// `max(0, side - gap |tan angle|)`, with the gap = 0 and |angle| >= 90 deg
/// cases handled explicitly so no 0 * inf NaN can appear.
fn shrunk_side(side_cm: f64, gap_cm: f64, angle_rad: f64) -> f64 {
    if gap_cm == 0.0 {
        return side_cm;
    }
    if angle_rad.abs() >= std::f64::consts::FRAC_PI_2 {
        return 0.0;
    }
    (side_cm - gap_cm * angle_rad.tan().abs()).max(0.0)
}

impl ChipGeometry {
    pub fn new(side_a_mm: f64, side_b_mm: f64, thickness_mm: f64) -> Result<Self> {
        for (name, v) in [
            ("side_a", side_a_mm),
            ("side_b", side_b_mm),
            ("thickness", thickness_mm),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::domain(format!(
                    "chip {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(Self {
            side_a_mm,
            side_b_mm,
            thickness_mm,
        })
    }

    /// View the chip as a solid-body detector (mm converted to cm, both
    /// apertures pi).
    pub fn as_detector(&self) -> DetectorGeometry {
        DetectorGeometry::solid_body(
            self.side_a_mm / 10.0,
            self.side_b_mm / 10.0,
            self.thickness_mm / 10.0,
        )
        .expect("chip invariants imply valid solid body")
    }
}

/// Reference instances used throughout tests and CLI presets.
pub mod presets {
    use super::{ChipGeometry, DetectorGeometry};

    /// The portable two-scintillator telescope: 24.7 cm x 2.7 cm faces,
    /// 1.7 cm gap.
    pub fn reference_telescope() -> DetectorGeometry {
        DetectorGeometry::telescope(24.7, 2.7, 1.7).expect("static dimensions are valid")
    }

    /// A typical 5 mm x 5 mm x 0.5 mm silicon chip.
    pub fn reference_chip() -> ChipGeometry {
        ChipGeometry::new(5.0, 5.0, 0.5).expect("static dimensions are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn aperture_angles_reference_telescope() {
        let (alpha, beta) = aperture_angles(24.7, 2.7, 1.7).unwrap();
        assert!(close(alpha.to_degrees(), 172.125_549_7, 1e-5), "{alpha}");
        assert!(close(beta.to_degrees(), 115.608_532_1, 1e-5), "{beta}");
    }

    #[test]
    fn aperture_angles_unit_cube() {
        let (alpha, beta) = aperture_angles(1.0, 1.0, 1.0).unwrap();
        assert!(close(alpha.to_degrees(), 90.0, 1e-12));
        assert!(close(beta.to_degrees(), 90.0, 1e-12));
    }

    #[test]
    fn aperture_angle_wide_limit_approaches_pi() {
        let (alpha, _) = aperture_angles(1e12, 1.0, 1.0).unwrap();
        assert!(alpha < PI);
        assert!(close(alpha, PI, 1e-9));
    }

    #[test]
    fn aperture_angles_reject_non_positive_dimensions() {
        assert!(aperture_angles(0.0, 1.0, 1.0).is_err());
        assert!(aperture_angles(1.0, -2.0, 1.0).is_err());
        assert!(aperture_angles(1.0, 1.0, 0.0).is_err());
        assert!(aperture_angles(f64::NAN, 1.0, 1.0).is_err());
    }

    #[test]
    fn effective_area_reference_values() {
        let g = presets::reference_telescope();
        assert!(close(g.effective_area_cm2(0.0, 0.0), 66.69, 1e-12));
        // 45 degrees in the length plane: L' = 24.7 - 1.7 = 23.0
        let a45 = g.effective_area_cm2(std::f64::consts::FRAC_PI_4, 0.0);
        assert!(close(a45, 62.1, 1e-9), "{a45}");
        // At the aperture edge the shrunk side vanishes.
        assert_eq!(g.effective_area_cm2(0.0, g.aperture_beta_rad() / 2.0), 0.0);
        assert_eq!(g.effective_area_cm2(g.aperture_alpha_rad() / 2.0, 0.0), 0.0);
    }

    #[test]
    fn effective_area_outside_aperture_is_zero() {
        let g = presets::reference_telescope();
        assert_eq!(
            g.effective_area_cm2(g.aperture_alpha_rad() / 2.0 + 0.01, 0.0),
            0.0
        );
        assert_eq!(
            g.effective_area_cm2(0.0, -g.aperture_beta_rad() / 2.0 - 0.01),
            0.0
        );
    }

    #[test]
    fn effective_area_even_and_non_increasing() {
        let g = presets::reference_telescope();
        let half_a = g.aperture_alpha_rad() / 2.0;
        let half_b = g.aperture_beta_rad() / 2.0;
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let t = half_a * i as f64 / 40.0;
            let p = half_b * (i % 7) as f64 / 7.0;
            let a = g.effective_area_cm2(t, p);
            assert_eq!(a, g.effective_area_cm2(-t, p));
            assert_eq!(a, g.effective_area_cm2(t, -p));
            // monotone along the theta axis at phi = 0
            let along = g.effective_area_cm2(t, 0.0);
            assert!(along <= prev + 1e-12);
            prev = along;
        }
        assert_eq!(g.effective_area_cm2(0.0, 0.0), g.face_area_cm2());
    }

    #[test]
    fn solid_body_clamps_to_zero_near_grazing() {
        let g = presets::reference_chip().as_detector();
        assert_eq!(g.aperture_alpha_rad(), PI);
        assert_eq!(g.aperture_beta_rad(), PI);
        // within the pi aperture but beyond the through-path limit
        assert_eq!(g.effective_area_cm2(1.56, 0.0), 0.0);
        assert_eq!(g.effective_area_cm2(std::f64::consts::FRAC_PI_2, 0.0), 0.0);
    }

    #[test]
    fn chip_as_detector_converts_units() {
        let chip = presets::reference_chip();
        let g = chip.as_detector();
        assert_eq!(g.length_cm(), 0.5);
        assert_eq!(g.width_cm(), 0.5);
        assert_eq!(g.gap_cm(), 0.05);
        assert_eq!(g.kind(), DetectorKind::SolidBody);

        // apertures stay pi regardless of aspect ratio
        let thick = ChipGeometry::new(10.0, 10.0, 10.0).unwrap().as_detector();
        assert_eq!(thick.aperture_alpha_rad(), PI);
        assert_eq!(thick.aperture_beta_rad(), PI);
    }

    #[test]
    fn zero_thickness_solid_body_has_constant_area() {
        let g = DetectorGeometry::solid_body(0.5, 0.5, 0.0).unwrap();
        for i in 0..20 {
            let t = -1.5 + 0.15 * i as f64;
            assert_eq!(g.effective_area_cm2(t, -t / 2.0), 0.25);
        }
    }

    #[test]
    fn chip_rejects_non_positive_fields() {
        assert!(ChipGeometry::new(0.0, 5.0, 0.5).is_err());
        assert!(ChipGeometry::new(5.0, 5.0, -0.5).is_err());
    }

    #[test]
    fn swapped_exchanges_sides_and_apertures() {
        let g = presets::reference_telescope();
        let s = g.swapped();
        assert_eq!(s.length_cm(), g.width_cm());
        assert_eq!(s.width_cm(), g.length_cm());
        assert_eq!(s.aperture_alpha_rad(), g.aperture_beta_rad());
        assert_eq!(s.aperture_beta_rad(), g.aperture_alpha_rad());
    }
}
