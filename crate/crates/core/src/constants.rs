//! Physical constants and instrument defaults.

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default wavelength-meter resolution, Hz.
pub const WLM_RESOLUTION_HZ: f64 = 10e6;

/// Environment variable that overrides [`WLM_RESOLUTION_HZ`].
pub const PRECISION_ENV: &str = "CAVCHAR_PRECISION";

/// PZT voltage that displaces the input mirror by one free spectral range.
pub const PZT_VOLTS_PER_FSR: f64 = 770.0;

/// Rb-87 D2 line (5S1/2 F=2 to 5P3/2 F'=3).
pub const RB87_D2_WAVELENGTH_M: f64 = 780.241_209_686e-9;
/// Natural linewidth 2γ/2π of the Rb-87 D2 line, Hz.
pub const RB87_D2_LINEWIDTH_HZ: f64 = 6.065e6;
pub const RB87_D2_LINEWIDTH_SIGMA_HZ: f64 = 0.009e6;

/// Reads the WLM resolution override from the environment, if set and valid.
pub fn wlm_resolution_from_env() -> Option<f64> {
    std::env::var(PRECISION_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
}
