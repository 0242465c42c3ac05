//! Coincidence-counting statistics: rates with Poisson uncertainties,
//! accidental-coincidence prediction via `N_a = 2 tau N1 N2`, and the
//! subtraction of accidentals from a raw coincidence rate.

use crate::error::{Error, Result};

/// Exact conversion factor between the resolving-time unit (microseconds)
/// and the rate unit (minutes).
pub const MICROSECONDS_PER_MINUTE: f64 = 6.0e7;

/// Accidentals are flagged as dominating once they reach this fraction of
/// the raw coincidence rate: the point where the correction becomes
/// comparable to the reading itself.
pub const ACCIDENTAL_DOMINANCE_RATIO: f64 = 0.5;

/// A rate with a one-sigma uncertainty, both in counts per minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub cpm: f64,
    pub sigma_cpm: f64,
}

impl Rate {
    pub fn new(cpm: f64, sigma_cpm: f64) -> Self {
        Self { cpm, sigma_cpm }
    }

    /// A rate known without uncertainty.
    pub fn exact(cpm: f64) -> Self {
        Self {
            cpm,
            sigma_cpm: 0.0,
        }
    }
}

/// A raw count total over a live time. Rate and Poisson sigma are derived:
/// `rate = counts / T`, `sigma = sqrt(counts) / T`. A zero-count measurement
/// has sigma 0 by convention and is flagged via [`RateMeasurement::is_zero_count`]
/// so downstream fits can exclude it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMeasurement {
    counts: u64,
    live_time_min: f64,
}

impl RateMeasurement {
    pub fn new(counts: u64, live_time_min: f64) -> Result<Self> {
        if live_time_min <= 0.0 || !live_time_min.is_finite() {
            return Err(Error::domain(format!(
                "live time must be strictly positive, got {live_time_min} min"
            )));
        }
        Ok(Self {
            counts,
            live_time_min,
        })
    }

    pub fn counts(&self) -> u64 {
        self.counts
    }

    pub fn live_time_min(&self) -> f64 {
        self.live_time_min
    }

    pub fn rate_cpm(&self) -> f64 {
        self.counts as f64 / self.live_time_min
    }

    pub fn sigma_cpm(&self) -> f64 {
        (self.counts as f64).sqrt() / self.live_time_min
    }

    pub fn is_zero_count(&self) -> bool {
        self.counts == 0
    }

    pub fn rate(&self) -> Rate {
        Rate::new(self.rate_cpm(), self.sigma_cpm())
    }
}

/// The coincidence circuit resolving time, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceSetup {
    pub tau_us: f64,
    pub tau_sigma_us: f64,
}

impl CoincidenceSetup {
    pub fn new(tau_us: f64, tau_sigma_us: f64) -> Result<Self> {
        if tau_us <= 0.0 || !tau_us.is_finite() {
            return Err(Error::domain(format!(
                "resolving time must be strictly positive, got {tau_us} us"
            )));
        }
        if tau_sigma_us < 0.0 || !tau_sigma_us.is_finite() {
            return Err(Error::domain(format!(
                "resolving time sigma must be non-negative, got {tau_sigma_us} us"
            )));
        }
        Ok(Self {
            tau_us,
            tau_sigma_us,
        })
    }

    /// The 20 +- 2 us window of the reference counter.
    pub fn reference() -> Self {
        Self {
            tau_us: 20.0,
            tau_sigma_us: 2.0,
        }
    }
}

/// Accidental coincidence rate `N_a = 2 tau N1 N2`, with first-order error
/// propagation over the independent uncertainties of `tau`, `N1` and `N2`.
pub fn accidental_rate(n1: &Rate, n2: &Rate, setup: &CoincidenceSetup) -> Result<Rate> {
    CoincidenceSetup::new(setup.tau_us, setup.tau_sigma_us)?;
    for (name, r) in [("N1", n1), ("N2", n2)] {
        if r.cpm < 0.0 || !r.cpm.is_finite() || r.sigma_cpm < 0.0 || r.sigma_cpm.is_nan() {
            return Err(Error::domain(format!(
                "{name} must be a non-negative rate, got {} +- {}",
                r.cpm, r.sigma_cpm
            )));
        }
    }
    let tau_min = setup.tau_us / MICROSECONDS_PER_MINUTE;
    let tau_sigma_min = setup.tau_sigma_us / MICROSECONDS_PER_MINUTE;
    let rate = 2.0 * tau_min * n1.cpm * n2.cpm;
    let from_tau = 2.0 * n1.cpm * n2.cpm * tau_sigma_min;
    let from_n1 = 2.0 * tau_min * n2.cpm * n1.sigma_cpm;
    let from_n2 = 2.0 * tau_min * n1.cpm * n2.sigma_cpm;
    let sigma = (from_tau * from_tau + from_n1 * from_n1 + from_n2 * from_n2).sqrt();
    Ok(Rate::new(rate, sigma))
}

/// A coincidence rate after accidental subtraction. `accidental_dominated`
/// marks results where the subtraction was comparable to or larger than the
/// reading (see [`ACCIDENTAL_DOMINANCE_RATIO`]); such points should usually
/// be excluded from fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedRate {
    pub rate: Rate,
    pub accidental_dominated: bool,
}

/// Subtract the accidental rate from a raw coincidence rate, clamping at
/// zero, with errors combined in quadrature.
pub fn corrected_coincidence(raw: &Rate, accidental: &Rate) -> CorrectedRate {
    let cpm = (raw.cpm - accidental.cpm).max(0.0);
    let sigma = raw.sigma_cpm.hypot(accidental.sigma_cpm);
    CorrectedRate {
        rate: Rate::new(cpm, sigma),
        accidental_dominated: accidental.cpm >= ACCIDENTAL_DOMINANCE_RATIO * raw.cpm,
    }
}
