//! Underground screening analysis: surface-to-depth rate ratios, meter
//! water equivalent conversion, and chip impact-rate predictions.
//!
//! Screening factors are purely data-driven ratios; no depth-attenuation
//! curve is fit through the measured sites. Rock overburden is reported as
//! a water-equivalent band because the conversion depends on the (usually
//! unknown) rock composition.

use crate::counting::{CorrectedRate, Rate};
use crate::error::{Error, Result};

/// Lower end of the rock-to-water-equivalent conversion band, m.w.e. per m.
pub const ROCK_MWE_PER_M_LOW: f64 = 2.4;
/// Upper end of the conversion band.
pub const ROCK_MWE_PER_M_HIGH: f64 = 3.0;

/// Default surface muon rate density on a horizontal chip, CPM per cm^2.
pub const SURFACE_RATE_DENSITY_CPM_PER_CM2: f64 = 0.54;
/// Round-number alternative often quoted for sea level (1 CPM per cm^2).
/// The two presets disagree by almost 2x; callers choose explicitly.
pub const SURFACE_RATE_DENSITY_ROUND_CPM_PER_CM2: f64 = 1.0;

/// One measured site: depth, per-site rock conversion, and the
/// accidental-corrected coincidence rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMeasurement {
    name: String,
    depth_m: f64,
    rock_mwe_per_m: f64,
    coincidence: CorrectedRate,
}

impl SiteMeasurement {
    pub fn new(
        name: impl Into<String>,
        depth_m: f64,
        rock_mwe_per_m: f64,
        coincidence: CorrectedRate,
    ) -> Result<Self> {
        if depth_m < 0.0 || !depth_m.is_finite() {
            return Err(Error::domain(format!(
                "depth must be non-negative, got {depth_m} m"
            )));
        }
        if !(2.0..=3.5).contains(&rock_mwe_per_m) {
            return Err(Error::domain(format!(
                "rock conversion {rock_mwe_per_m} m.w.e./m is outside the sanity band [2.0, 3.5]"
            )));
        }
        if coincidence.rate.cpm < 0.0 || !coincidence.rate.cpm.is_finite() {
            return Err(Error::domain(format!(
                "coincidence rate must be non-negative, got {}",
                coincidence.rate.cpm
            )));
        }
        Ok(Self {
            name: name.into(),
            depth_m,
            rock_mwe_per_m,
            coincidence,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn depth_m(&self) -> f64 {
        self.depth_m
    }

    pub fn rock_mwe_per_m(&self) -> f64 {
        self.rock_mwe_per_m
    }

    pub fn coincidence(&self) -> &CorrectedRate {
        &self.coincidence
    }
}

/// Ratio of the surface rate to an underground rate, with the uncertainty
/// from first-order ratio propagation.
pub fn screening_factor(surface: &Rate, depth: &Rate) -> Result<Rate> {
    if depth.cpm <= 0.0 || depth.cpm.is_nan() {
        return Err(Error::domain(format!(
            "depth rate must be strictly positive to form a screening factor, got {}",
            depth.cpm
        )));
    }
    let factor = surface.cpm / depth.cpm;
    // written to stay finite when the surface rate is zero
    let from_surface = surface.sigma_cpm / depth.cpm;
    let from_depth = surface.cpm * depth.sigma_cpm / (depth.cpm * depth.cpm);
    Ok(Rate::new(factor, from_surface.hypot(from_depth)))
}

/// Depth in meter water equivalent: `depth_m * conversion`.
pub fn mwe_depth(depth_m: f64, mwe_per_m: f64) -> f64 {
    depth_m * mwe_per_m
}

/// Predicted muon impact rate on a chip of a given area behind a screening
/// factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChipExposure {
    pub area_cm2: f64,
    pub surface_rate_density_cpm_per_cm2: f64,
    pub predicted_rate_cpm: f64,
    pub predicted_rate_hz: f64,
}

/// `predicted = area * surface_rate_density / screening`, also expressed
/// in hertz.
pub fn chip_impact_rate(
    area_cm2: f64,
    surface_rate_density_cpm_per_cm2: f64,
    screening: f64,
) -> Result<ChipExposure> {
    for (name, v) in [
        ("area", area_cm2),
        ("surface rate density", surface_rate_density_cpm_per_cm2),
        ("screening factor", screening),
    ] {
        if v <= 0.0 || !v.is_finite() {
            return Err(Error::domain(format!(
                "{name} must be strictly positive, got {v}"
            )));
        }
    }
    let predicted_rate_cpm = area_cm2 * surface_rate_density_cpm_per_cm2 / screening;
    Ok(ChipExposure {
        area_cm2,
        surface_rate_density_cpm_per_cm2,
        predicted_rate_cpm,
        predicted_rate_hz: predicted_rate_cpm / 60.0,
    })
}

/// Per-site entry of a [`DepthReport`], sorted by depth.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteReport {
    pub name: String,
    pub depth_m: f64,
    pub mwe_nominal: f64,
    pub mwe_low: f64,
    pub mwe_high: f64,
    pub rate: Rate,
    pub accidental_dominated: bool,
    pub screening: Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthReport {
    pub sites: Vec<SiteReport>,
}

/// Screening factors for every site against the unique surface reference
/// (the one site at depth 0). The water-equivalent band uses the
/// [`ROCK_MWE_PER_M_LOW`]..[`ROCK_MWE_PER_M_HIGH`] endpoints; the nominal
/// value uses the per-site conversion.
pub fn depth_report(sites: &[SiteMeasurement]) -> Result<DepthReport> {
    let mut surfaces = sites.iter().filter(|s| s.depth_m == 0.0);
    let reference = surfaces
        .next()
        .ok_or_else(|| Error::Config("no surface reference site (depth 0) provided".into()))?;
    if surfaces.next().is_some() {
        return Err(Error::Config(
            "more than one surface site (depth 0) provided; exactly one is required".into(),
        ));
    }
    let surface_rate = reference.coincidence.rate;

    let mut reports = sites
        .iter()
        .map(|s| {
            let screening = screening_factor(&surface_rate, &s.coincidence.rate)?;
            Ok(SiteReport {
                name: s.name.clone(),
                depth_m: s.depth_m,
                mwe_nominal: mwe_depth(s.depth_m, s.rock_mwe_per_m),
                mwe_low: mwe_depth(s.depth_m, ROCK_MWE_PER_M_LOW),
                mwe_high: mwe_depth(s.depth_m, ROCK_MWE_PER_M_HIGH),
                rate: s.coincidence.rate,
                accidental_dominated: s.coincidence.accidental_dominated,
                screening,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| {
        a.depth_m
            .partial_cmp(&b.depth_m)
            .expect("depths are finite")
            .then_with(|| a.name.cmp(&b.name))
    });
    Ok(DepthReport { sites: reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::corrected_coincidence;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn site(name: &str, depth: f64, cpm: f64) -> SiteMeasurement {
        let corrected = CorrectedRate {
            rate: Rate::new(cpm, 0.05),
            accidental_dominated: false,
        };
        SiteMeasurement::new(name, depth, 2.7, corrected).unwrap()
    }

    #[test]
    fn screening_reference_sites() {
        let surface = Rate::exact(40.0);
        let deep = screening_factor(&surface, &Rate::exact(1.4)).unwrap();
        assert!(close(deep.cpm, 28.571_428_6, 1e-6));
        assert!(close(deep.cpm, 28.6, 0.05));
        let deeper = screening_factor(&surface, &Rate::exact(1.1)).unwrap();
        assert!(close(deeper.cpm, 36.363_636_4, 1e-6));
        assert!(close(deeper.cpm, 36.4, 0.05));
        let shallow = screening_factor(&surface, &Rate::exact(20.0)).unwrap();
        assert_eq!(shallow.cpm, 2.0);
    }

    #[test]
    fn screening_identity_and_transitivity() {
        let x = Rate::new(17.3, 0.2);
        assert_eq!(screening_factor(&x, &x).unwrap().cpm, 1.0);

        let a = Rate::exact(40.0);
        let b = Rate::exact(5.0);
        let c = Rate::exact(0.8);
        let ab = screening_factor(&a, &b).unwrap().cpm;
        let bc = screening_factor(&b, &c).unwrap().cpm;
        let ac = screening_factor(&a, &c).unwrap().cpm;
        assert!(close(ab * bc, ac, 1e-12 * ac));
    }

    #[test]
    fn screening_error_propagation() {
        let s = Rate::new(40.0, 0.18);
        let d = Rate::new(1.4, 0.03);
        let f = screening_factor(&s, &d).unwrap();
        let expected = (40.0 / 1.4) * ((0.18_f64 / 40.0).powi(2) + (0.03_f64 / 1.4).powi(2)).sqrt();
        assert!(close(f.sigma_cpm, expected, 1e-12));
    }

    #[test]
    fn screening_rejects_zero_depth_rate() {
        assert!(screening_factor(&Rate::exact(40.0), &Rate::exact(0.0)).is_err());
    }

    #[test]
    fn mwe_depth_examples() {
        assert_eq!(mwe_depth(100.0, 2.7), 270.0);
        assert_eq!(mwe_depth(0.0, 2.4), 0.0);
        assert!(close(mwe_depth(6.0, 2.4), 14.4, 1e-12));
    }

    #[test]
    fn chip_impact_reference_chain() {
        let e = chip_impact_rate(1.0, SURFACE_RATE_DENSITY_CPM_PER_CM2, 30.0).unwrap();
        assert!(close(e.predicted_rate_cpm, 0.018, 1e-15));
        assert!(close(e.predicted_rate_hz, 0.3e-3, 1e-18));

        let surface = chip_impact_rate(1.0, SURFACE_RATE_DENSITY_CPM_PER_CM2, 1.0).unwrap();
        assert_eq!(surface.predicted_rate_cpm, 0.54);
        assert!(close(surface.predicted_rate_hz, 9.0e-3, 1e-15));
    }

    #[test]
    fn chip_impact_linear_in_area() {
        let one = chip_impact_rate(1.0, 0.7, 12.0).unwrap();
        let two = chip_impact_rate(2.0, 0.7, 12.0).unwrap();
        assert!(close(
            two.predicted_rate_cpm,
            2.0 * one.predicted_rate_cpm,
            1e-15
        ));
    }

    #[test]
    fn chip_impact_rejects_non_positive_inputs() {
        assert!(chip_impact_rate(0.0, 0.54, 30.0).is_err());
        assert!(chip_impact_rate(1.0, -0.5, 30.0).is_err());
        assert!(chip_impact_rate(1.0, 0.54, 0.0).is_err());
    }

    #[test]
    fn depth_report_reference_sites() {
        let sites = vec![
            site("tunnel", 120.0, 1.1),
            site("surface", 0.0, 40.0),
            site("subway", 100.0, 1.4),
            site("basement", 6.0, 20.0),
        ];
        let report = depth_report(&sites).unwrap();
        let names: Vec<&str> = report.sites.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["surface", "basement", "subway", "tunnel"]);
        let factors: Vec<f64> = report.sites.iter().map(|s| s.screening.cpm).collect();
        assert_eq!(factors[0], 1.0);
        assert!(close(factors[1], 2.0, 1e-12));
        assert!(close(factors[2], 28.571_428_6, 1e-6));
        assert!(close(factors[3], 36.363_636_4, 1e-6));
        // m.w.e. band for the 100 m site
        assert!(close(report.sites[2].mwe_low, 240.0, 1e-12));
        assert!(close(report.sites[2].mwe_high, 300.0, 1e-12));
        assert!(close(report.sites[2].mwe_nominal, 270.0, 1e-12));
    }

    #[test]
    fn depth_report_requires_exactly_one_surface() {
        let no_surface = vec![site("a", 5.0, 10.0)];
        assert!(matches!(depth_report(&no_surface), Err(Error::Config(_))));
        let two_surfaces = vec![site("a", 0.0, 40.0), site("b", 0.0, 39.0)];
        assert!(matches!(depth_report(&two_surfaces), Err(Error::Config(_))));
    }

    #[test]
    fn depth_report_single_surface_site() {
        let report = depth_report(&[site("surface", 0.0, 40.0)]).unwrap();
        assert_eq!(report.sites.len(), 1);
        assert_eq!(report.sites[0].screening.cpm, 1.0);
    }

    #[test]
    fn equal_rates_give_equal_factors_regardless_of_depth() {
        let sites = vec![
            site("surface", 0.0, 40.0),
            site("x", 50.0, 4.0),
            site("y", 90.0, 4.0),
        ];
        let report = depth_report(&sites).unwrap();
        assert_eq!(report.sites[1].screening.cpm, report.sites[2].screening.cpm);
    }

    #[test]
    fn depth_report_is_input_order_invariant() {
        let a = vec![site("surface", 0.0, 40.0), site("x", 50.0, 4.0)];
        let b = vec![site("x", 50.0, 4.0), site("surface", 0.0, 40.0)];
        assert_eq!(depth_report(&a).unwrap(), depth_report(&b).unwrap());
    }

    #[test]
    fn site_validation() {
        let ok = CorrectedRate {
            rate: Rate::exact(1.0),
            accidental_dominated: false,
        };
        assert!(SiteMeasurement::new("a", -1.0, 2.7, ok).is_err());
        assert!(SiteMeasurement::new("a", 1.0, 1.9, ok).is_err());
        assert!(SiteMeasurement::new("a", 1.0, 3.6, ok).is_err());
        let neg = CorrectedRate {
            rate: Rate::exact(-1.0),
            accidental_dominated: false,
        };
        assert!(SiteMeasurement::new("a", 1.0, 2.7, neg).is_err());
    }

    #[test]
    fn corrected_rates_flow_into_sites() {
        let corrected = corrected_coincidence(&Rate::new(1.4, 0.1), &Rate::new(0.73, 0.08));
        let s = SiteMeasurement::new("subway", 100.0, 2.5, corrected).unwrap();
        assert!(s.coincidence().accidental_dominated);
        assert!(close(s.coincidence().rate.cpm, 0.67, 1e-12));
    }
}
