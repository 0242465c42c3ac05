//! The run-configuration file: TOML with one section per module, plus the
//! built-in presets.

use serde::Deserialize;

use muflux::atmosphere::AtmosphereModel;
use muflux::counting::{
    accidental_rate, corrected_coincidence, CoincidenceSetup, Rate, RateMeasurement,
};
use muflux::geometry::{ChipGeometry, DetectorGeometry};
use muflux::rate_model::{AngularWeight, QuadratureConfig, QuadratureScheme};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// The 24.7 x 2.7 x 1.7 cm two-scintillator telescope, tau = 20 +- 2 us.
    PaperTelescope,
    /// The 5 x 5 x 0.5 mm solid chip, tau = 20 +- 2 us.
    PaperChip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub geometry: Option<GeometrySection>,
    pub atmosphere: Option<AtmosphereSection>,
    pub quadrature: Option<QuadratureSection>,
    pub coincidence: Option<CoincidenceSection>,
    #[serde(default, rename = "site")]
    pub sites: Vec<SiteSection>,
    pub output_format: Option<String>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub length_cm: Option<f64>,
    pub width_cm: Option<f64>,
    pub gap_cm: Option<f64>,
    pub chip: Option<ChipSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipSection {
    pub side_a_mm: f64,
    pub side_b_mm: f64,
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtmosphereSection {
    pub earth_radius_km: Option<f64>,
    pub atmosphere_km: Option<f64>,
    pub i0_per_cm2_sr_min: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub scheme: Option<String>,
    pub target_rel_tol: Option<f64>,
    pub max_subdivisions: Option<u32>,
    pub horizon_cut_deg: Option<f64>,
    pub angular_weight: Option<String>,
    pub panels_per_dim: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoincidenceSection {
    pub tau_us: Option<f64>,
    pub tau_sigma_us: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSection {
    pub name: String,
    pub depth_m: f64,
    #[serde(default = "default_rock_conversion")]
    pub rock_mwe_per_m: f64,
    pub counts: u64,
    pub live_time_min: f64,
    pub n1_cpm: Option<f64>,
    pub n2_cpm: Option<f64>,
    #[serde(default)]
    pub n1_sigma_cpm: f64,
    #[serde(default)]
    pub n2_sigma_cpm: f64,
}

fn default_rock_conversion() -> f64 {
    0.5 * (muflux::attenuation::ROCK_MWE_PER_M_LOW + muflux::attenuation::ROCK_MWE_PER_M_HIGH)
}

pub fn load_config(path: &std::path::Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
}

impl Preset {
    pub fn geometry(self) -> DetectorGeometry {
        match self {
            Preset::PaperTelescope => muflux::geometry::presets::reference_telescope(),
            Preset::PaperChip => muflux::geometry::presets::reference_chip().as_detector(),
        }
    }
}

/// Geometry from preset (wins) or config file.
pub fn resolve_geometry(
    preset: Option<Preset>,
    config: &FileConfig,
) -> Result<DetectorGeometry, CliError> {
    if let Some(p) = preset {
        return Ok(p.geometry());
    }
    let section = config.geometry.as_ref().ok_or_else(|| {
        CliError::Config(
            "no geometry: pass --preset or a config file with a [geometry] section".into(),
        )
    })?;
    match (
        &section.chip,
        section.length_cm,
        section.width_cm,
        section.gap_cm,
    ) {
        (Some(chip), None, None, None) => {
            let chip = ChipGeometry::new(chip.side_a_mm, chip.side_b_mm, chip.thickness_mm)?;
            Ok(chip.as_detector())
        }
        (None, Some(l), Some(w), Some(h)) => Ok(DetectorGeometry::telescope(l, w, h)?),
        _ => Err(CliError::Config(
            "geometry must be either {length_cm, width_cm, gap_cm} or a [geometry.chip] table"
                .into(),
        )),
    }
}

pub fn resolve_atmosphere(
    i0_flag: Option<f64>,
    config: &FileConfig,
) -> Result<AtmosphereModel, CliError> {
    let defaults = AtmosphereModel::default();
    let section = config.atmosphere.as_ref();
    let r = section
        .and_then(|s| s.earth_radius_km)
        .unwrap_or(defaults.earth_radius_km());
    let a = section
        .and_then(|s| s.atmosphere_km)
        .unwrap_or(defaults.atmosphere_km());
    let i0 = i0_flag
        .or(section.and_then(|s| s.i0_per_cm2_sr_min))
        .unwrap_or(defaults.vertical_intensity());
    Ok(AtmosphereModel::new(r, a, i0)?)
}

pub fn resolve_quadrature(
    config: &FileConfig,
    rel_tol: Option<f64>,
    horizon_cut_deg: Option<f64>,
    weight: Option<String>,
    scheme: Option<String>,
) -> Result<QuadratureConfig, CliError> {
    let mut cfg = QuadratureConfig::default();
    if let Some(s) = config.quadrature.as_ref() {
        if let Some(v) = &s.scheme {
            cfg.scheme = parse_scheme(v)?;
        }
        if let Some(v) = s.target_rel_tol {
            cfg.target_rel_tol = v;
        }
        if let Some(v) = s.max_subdivisions {
            cfg.max_subdivisions = v;
        }
        if let Some(v) = s.horizon_cut_deg {
            cfg.horizon_cut_deg = v;
        }
        if let Some(v) = &s.angular_weight {
            cfg.angular_weight = parse_weight(v)?;
        }
        if let Some(v) = s.panels_per_dim {
            cfg.panels_per_dim = v;
        }
    }
    if let Some(v) = rel_tol {
        cfg.target_rel_tol = v;
    }
    if let Some(v) = horizon_cut_deg {
        cfg.horizon_cut_deg = v;
    }
    if let Some(v) = weight {
        cfg.angular_weight = parse_weight(&v)?;
    }
    if let Some(v) = scheme {
        cfg.scheme = parse_scheme(&v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_weight(s: &str) -> Result<AngularWeight, CliError> {
    match s {
        "solid-angle" => Ok(AngularWeight::SolidAngle),
        "abs-sin" => Ok(AngularWeight::AbsSin),
        "cos" => Ok(AngularWeight::Cos),
        other => Err(CliError::Config(format!(
            "unknown angular weight {other:?} (expected solid-angle, abs-sin or cos)"
        ))),
    }
}

fn parse_scheme(s: &str) -> Result<QuadratureScheme, CliError> {
    match s {
        "gauss-legendre" => Ok(QuadratureScheme::GaussLegendreComposite),
        "adaptive-simpson" => Ok(QuadratureScheme::AdaptiveSimpson),
        other => Err(CliError::Config(format!(
            "unknown quadrature scheme {other:?} (expected gauss-legendre or adaptive-simpson)"
        ))),
    }
}

pub fn resolve_coincidence(
    tau_us: Option<f64>,
    tau_sigma_us: Option<f64>,
    config: &FileConfig,
) -> Result<CoincidenceSetup, CliError> {
    let section = config.coincidence.as_ref();
    let reference = CoincidenceSetup::reference();
    let tau = tau_us
        .or(section.and_then(|s| s.tau_us))
        .unwrap_or(reference.tau_us);
    let sigma = tau_sigma_us
        .or(section.and_then(|s| s.tau_sigma_us))
        .unwrap_or(reference.tau_sigma_us);
    Ok(CoincidenceSetup::new(tau, sigma)?)
}

/// Build the accidental-corrected site list from the config sections.
pub fn resolve_sites(
    config: &FileConfig,
    setup: &CoincidenceSetup,
) -> Result<Vec<muflux::attenuation::SiteMeasurement>, CliError> {
    if config.sites.is_empty() {
        return Err(CliError::Config(
            "no sites: the config file needs at least one [[site]] section".into(),
        ));
    }
    config
        .sites
        .iter()
        .map(|s| {
            let raw = RateMeasurement::new(s.counts, s.live_time_min)?.rate();
            let corrected = match (s.n1_cpm, s.n2_cpm) {
                (Some(n1), Some(n2)) => {
                    let accidental = accidental_rate(
                        &Rate::new(n1, s.n1_sigma_cpm),
                        &Rate::new(n2, s.n2_sigma_cpm),
                        setup,
                    )?;
                    corrected_coincidence(&raw, &accidental)
                }
                (None, None) => corrected_coincidence(&raw, &Rate::exact(0.0)),
                _ => {
                    return Err(CliError::Config(format!(
                        "site {:?}: provide both n1_cpm and n2_cpm or neither",
                        s.name
                    )))
                }
            };
            Ok(muflux::attenuation::SiteMeasurement::new(
                s.name.clone(),
                s.depth_m,
                s.rock_mwe_per_m,
                corrected,
            )?)
        })
        .collect()
}
