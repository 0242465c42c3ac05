//! Machine-readable output shapes. Field order is fixed by the struct
//! definitions, so identical inputs serialize byte-identically. Each shape
//! has a JSON schema under `schemas/` at the repository root.

use serde::Serialize;

use muflux::attenuation::DepthReport;
use muflux::counting::{Rate, RateMeasurement};
use muflux::ingest::{format_timestamp, RateSummary};

#[derive(Debug, Serialize)]
pub struct AccidentalsOut {
    pub accidental_cpm: f64,
    pub sigma_cpm: f64,
}

#[derive(Debug, Serialize)]
pub struct FitOut {
    pub i0_per_cm2_sr_min: f64,
    pub i0_sigma: f64,
    pub chi2: f64,
    pub ndf: usize,
    pub points_used: usize,
}

#[derive(Debug, Serialize)]
pub struct ChannelOut {
    pub counts: u64,
    pub live_time_min: f64,
    pub rate_cpm: f64,
    pub sigma_cpm: f64,
    pub zero_count: bool,
}

impl From<&RateMeasurement> for ChannelOut {
    fn from(m: &RateMeasurement) -> Self {
        Self {
            counts: m.counts(),
            live_time_min: m.live_time_min(),
            rate_cpm: m.rate_cpm(),
            sigma_cpm: m.sigma_cpm(),
            zero_count: m.is_zero_count(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CorrectionOut {
    pub accidental_cpm: f64,
    pub accidental_sigma_cpm: f64,
    pub corrected_cpm: f64,
    pub corrected_sigma_cpm: f64,
    pub accidental_dominated: bool,
}

#[derive(Debug, Serialize)]
pub struct SummaryOut {
    pub window_start: String,
    pub window_end: String,
    pub records: usize,
    pub partial: bool,
    pub ch1: ChannelOut,
    pub ch2: ChannelOut,
    pub coincidence: ChannelOut,
    pub mean_temperature_c: Option<f64>,
    pub mean_humidity_pct: Option<f64>,
    pub mean_pressure_hpa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionOut>,
}

impl SummaryOut {
    pub fn new(s: &RateSummary, correction: Option<CorrectionOut>) -> Self {
        Self {
            window_start: format_timestamp(&s.window_start),
            window_end: format_timestamp(&s.window_end),
            records: s.records,
            partial: s.partial,
            ch1: ChannelOut::from(&s.ch1),
            ch2: ChannelOut::from(&s.ch2),
            coincidence: ChannelOut::from(&s.coincidence),
            mean_temperature_c: s.mean_temperature_c,
            mean_humidity_pct: s.mean_humidity_pct,
            mean_pressure_hpa: s.mean_pressure_hpa,
            correction,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SiteOut {
    pub name: String,
    pub depth_m: f64,
    pub mwe_low: f64,
    pub mwe_nominal: f64,
    pub mwe_high: f64,
    pub rate_cpm: f64,
    pub rate_sigma_cpm: f64,
    pub accidental_dominated: bool,
    pub screening_factor: f64,
    pub screening_sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct DepthReportOut {
    pub sites: Vec<SiteOut>,
}

impl From<&DepthReport> for DepthReportOut {
    fn from(report: &DepthReport) -> Self {
        Self {
            sites: report
                .sites
                .iter()
                .map(|s| SiteOut {
                    name: s.name.clone(),
                    depth_m: s.depth_m,
                    mwe_low: s.mwe_low,
                    mwe_nominal: s.mwe_nominal,
                    mwe_high: s.mwe_high,
                    rate_cpm: s.rate.cpm,
                    rate_sigma_cpm: s.rate.sigma_cpm,
                    accidental_dominated: s.accidental_dominated,
                    screening_factor: s.screening.cpm,
                    screening_sigma: s.screening.sigma_cpm,
                })
                .collect(),
        }
    }
}

pub fn depth_report_csv(report: &DepthReport) -> String {
    let mut out = String::from(
        "name,depth_m,mwe_low,mwe_nominal,mwe_high,rate_cpm,rate_sigma_cpm,accidental_dominated,screening_factor,screening_sigma\n",
    );
    for s in &report.sites {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            s.name,
            s.depth_m,
            s.mwe_low,
            s.mwe_nominal,
            s.mwe_high,
            s.rate.cpm,
            s.rate.sigma_cpm,
            s.accidental_dominated,
            s.screening.cpm,
            s.screening.sigma_cpm
        ));
    }
    out
}

#[derive(Debug, Serialize)]
pub struct McPointOut {
    pub angle_deg: f64,
    pub quadrature_cpm: f64,
    pub quadrature_error_cpm: f64,
    pub mc_cpm: f64,
    pub mc_standard_error_cpm: f64,
    pub z_score: f64,
    pub within_two_sigma: bool,
}

#[derive(Debug, Serialize)]
pub struct McCheckOut {
    pub samples: u64,
    pub seed: u64,
    pub points: Vec<McPointOut>,
    pub all_within_two_sigma: bool,
}

pub fn accidentals_out(rate: &Rate) -> AccidentalsOut {
    AccidentalsOut {
        accidental_cpm: rate.cpm,
        sigma_cpm: rate.sigma_cpm,
    }
}
