//! Physical parameters of a reflective ghost imager and the quantities derived from them.
//!
//! A [`Scenario`] holds every SI input. [`derive_geometry`] computes the far-field,
//! turbulence and brightness quantities once, into an immutable [`DerivedGeometry`]
//! that the analytic model and the simulator both consume.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold for the far-field "much less than one" conditions.
pub const FAR_FIELD_LIMIT: f64 = 0.1;
/// Minimum Ω_B·T₀ for the classical (broadband-detector) sources.
pub const CLASSICAL_BANDWIDTH_RATIO: f64 = 100.0;
/// Maximum Ω_B·T₀ for the SPDC source.
pub const SPDC_BANDWIDTH_RATIO: f64 = 0.01;
/// Minimum ratio of integration time to the relevant correlation time.
pub const INTEGRATION_RATIO: f64 = 10.0;
/// Logamplitude variance above which the weak-turbulence model is flagged.
pub const WEAK_TURBULENCE_SIGMA2: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Pseudothermal,
    Spdc,
    Computational,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [
        SourceKind::Pseudothermal,
        SourceKind::Spdc,
        SourceKind::Computational,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceKind::Pseudothermal => "pseudothermal",
            SourceKind::Spdc => "spdc",
            SourceKind::Computational => "computational",
        }
    }

    /// True for sources whose statistics can be reproduced with classical random fields.
    pub fn is_classical(self) -> bool {
        !matches!(self, SourceKind::Spdc)
    }
}

impl std::fmt::Display for SourceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// The three statistically independent propagation paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Path3 {
    /// Source to CCD.
    Reference,
    /// Source to target.
    Signal,
    /// Target to bucket detector.
    Target,
}

impl Path3 {
    pub fn label(self) -> &'static str {
        match self {
            Path3::Reference => "R",
            Path3::Signal => "S",
            Path3::Target => "T",
        }
    }
}

/// All physical inputs, SI units throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// λ₀ (m)
    pub wavelength: f64,
    /// a₀, source e⁻² intensity radius (m)
    pub source_radius: f64,
    /// ρ₀, source coherence length (m)
    pub coherence_length: f64,
    /// T₀, source coherence time (s)
    pub coherence_time: f64,
    /// P (photons/s)
    pub photon_flux: f64,
    /// L (m)
    pub path_length: f64,
    /// C²ₙ on the reference path (m^-2/3)
    pub cn2_reference: f64,
    /// C²ₙ on the signal path (m^-2/3)
    pub cn2_signal: f64,
    /// C²ₙ on the target-return path (m^-2/3)
    pub cn2_target: f64,
    /// η
    pub quantum_efficiency: f64,
    /// Ω_B (rad/s)
    pub detector_bandwidth: f64,
    /// Ω_N (rad/s)
    pub notch_bandwidth: f64,
    /// A_p (m²)
    pub pixel_area: f64,
    /// A_b (m²)
    pub bucket_area: f64,
    /// T_I (s)
    pub integration_time: f64,
    pub source_kind: SourceKind,
}

/// Turbulence state of one path.
///
/// Zero C²ₙ is its own variant so downstream formulas take the exact vacuum limit
/// instead of dividing by a huge coherence length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathTurbulence {
    Vacuum,
    Turbulent {
        /// ρ_m (m)
        coherence_length: f64,
        /// σ_m², Rytov logamplitude variance
        logamp_variance: f64,
    },
}

impl PathTurbulence {
    pub fn new(k0: f64, cn2: f64, length: f64) -> Result<Self> {
        match turbulence_coherence_length(k0, cn2, length)? {
            None => Ok(PathTurbulence::Vacuum),
            Some(rho) => Ok(PathTurbulence::Turbulent {
                coherence_length: rho,
                logamp_variance: rytov_logamp_variance(k0, cn2, length)?,
            }),
        }
    }

    /// ρ_m⁻², zero for vacuum.
    pub fn inverse_coherence_area(&self) -> f64 {
        match *self {
            PathTurbulence::Vacuum => 0.0,
            PathTurbulence::Turbulent {
                coherence_length, ..
            } => coherence_length.powi(-2),
        }
    }

    pub fn coherence_length(&self) -> f64 {
        match *self {
            PathTurbulence::Vacuum => f64::INFINITY,
            PathTurbulence::Turbulent {
                coherence_length, ..
            } => coherence_length,
        }
    }

    pub fn logamp_variance(&self) -> f64 {
        match *self {
            PathTurbulence::Vacuum => 0.0,
            PathTurbulence::Turbulent {
                logamp_variance, ..
            } => logamp_variance,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, PathTurbulence::Vacuum)
    }
}

/// Quantities computed once from a [`Scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedGeometry {
    /// k₀ = 2π/λ₀
    pub wavenumber: f64,
    /// ρ_L = 2L/(k₀a₀), on-target coherence length
    pub rho_l: f64,
    /// a_L = 2L/(k₀ρ₀), on-target intensity radius
    pub a_l: f64,
    pub reference: PathTurbulence,
    pub signal: PathTurbulence,
    pub target: PathTurbulence,
    /// α, resolution-degradation factor with both source-side paths
    pub alpha: f64,
    /// α̃, computational-imager factor (no reference path)
    pub alpha_tilde: f64,
    /// β = A_b/(πa₀²)
    pub beta: f64,
    /// 𝓘 = P T₀ ρ₀²/a₀², photons per spatiotemporal mode
    pub brightness: f64,
    /// 𝓘_Ω = P ρ₀²/(a₀² Ω_B), photons per spatial mode per detector temporal mode
    pub brightness_omega: f64,
}

impl DerivedGeometry {
    pub fn path(&self, path: Path3) -> &PathTurbulence {
        match path {
            Path3::Reference => &self.reference,
            Path3::Signal => &self.signal,
            Path3::Target => &self.target,
        }
    }

    /// Resolution factor appropriate to the source kind.
    pub fn alpha_for(&self, kind: SourceKind) -> f64 {
        match kind {
            SourceKind::Computational => self.alpha_tilde,
            _ => self.alpha,
        }
    }

    /// Σσ² over the paths that carry turbulence for this source kind.
    pub fn total_logamp_variance(&self, kind: SourceKind) -> f64 {
        let reference = match kind {
            SourceKind::Computational => 0.0,
            _ => self.reference.logamp_variance(),
        };
        reference + self.signal.logamp_variance() + self.target.logamp_variance()
    }
}

/// ρ_m = (1.09 k₀² C²ₙ L)^(-3/5); `None` encodes a vacuum path.
pub fn turbulence_coherence_length(k0: f64, cn2: f64, length: f64) -> Result<Option<f64>> {
    check_nonnegative("wavenumber", k0)?;
    check_nonnegative("cn2", cn2)?;
    check_nonnegative("path_length", length)?;
    if cn2 == 0.0 {
        return Ok(None);
    }
    if k0 == 0.0 || length == 0.0 {
        return Err(Error::domain(
            "turbulence_coherence_length",
            "wavenumber and path length must be positive when C²ₙ > 0",
        ));
    }
    Ok(Some((1.09 * k0 * k0 * cn2 * length).powf(-0.6)))
}

/// Inverse of [`turbulence_coherence_length`]: the C²ₙ giving coherence length ρ_m.
pub fn cn2_for_coherence_length(k0: f64, length: f64, coherence_length: f64) -> Result<f64> {
    check_positive("wavenumber", k0)?;
    check_positive("path_length", length)?;
    check_positive("coherence_length", coherence_length)?;
    Ok(coherence_length.powf(-5.0 / 3.0) / (1.09 * k0 * k0 * length))
}

/// σ² = 0.124 C²ₙ k₀^(7/6) L^(11/6).
pub fn rytov_logamp_variance(k0: f64, cn2: f64, length: f64) -> Result<f64> {
    check_nonnegative("wavenumber", k0)?;
    check_nonnegative("cn2", cn2)?;
    check_nonnegative("path_length", length)?;
    Ok(0.124 * cn2 * k0.powf(7.0 / 6.0) * length.powf(11.0 / 6.0))
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        return Err(Error::domain(name, format!("must be non-negative, got {v}")));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::domain(name, format!("must be finite and positive, got {v}")));
    }
    Ok(())
}

impl Scenario {
    /// Domain checks only: positivity, η range, notch below detector bandwidth.
    pub fn validate_parameters(&self) -> Result<()> {
        check_positive("wavelength", self.wavelength)?;
        check_positive("source_radius", self.source_radius)?;
        check_positive("coherence_length", self.coherence_length)?;
        check_positive("coherence_time", self.coherence_time)?;
        check_positive("photon_flux", self.photon_flux)?;
        check_positive("path_length", self.path_length)?;
        check_nonnegative("cn2_reference", self.cn2_reference)?;
        check_nonnegative("cn2_signal", self.cn2_signal)?;
        check_nonnegative("cn2_target", self.cn2_target)?;
        for (name, v) in [
            ("cn2_reference", self.cn2_reference),
            ("cn2_signal", self.cn2_signal),
            ("cn2_target", self.cn2_target),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(name, "must be finite"));
            }
        }
        if !(self.quantum_efficiency > 0.0 && self.quantum_efficiency <= 1.0) {
            return Err(Error::domain(
                "quantum_efficiency",
                format!("must lie in (0, 1], got {}", self.quantum_efficiency),
            ));
        }
        check_positive("detector_bandwidth", self.detector_bandwidth)?;
        check_positive("notch_bandwidth", self.notch_bandwidth)?;
        if self.notch_bandwidth >= self.detector_bandwidth {
            return Err(Error::domain(
                "notch_bandwidth",
                "must be smaller than detector_bandwidth",
            ));
        }
        check_positive("pixel_area", self.pixel_area)?;
        check_positive("bucket_area", self.bucket_area)?;
        check_positive("integration_time", self.integration_time)?;
        Ok(())
    }

    /// Full validation: domain checks plus the detector-bandwidth and integration-time regimes
    /// that the source kind requires.
    pub fn validate(&self) -> Result<()> {
        self.validate_parameters()?;
        let wbt0 = self.detector_bandwidth * self.coherence_time;
        match self.source_kind {
            SourceKind::Pseudothermal | SourceKind::Computational => {
                if wbt0 < CLASSICAL_BANDWIDTH_RATIO {
                    return Err(Error::domain(
                        "detector_bandwidth",
                        format!(
                            "{} source needs Ω_B·T₀ ≥ {CLASSICAL_BANDWIDTH_RATIO}, got {wbt0:.4e}",
                            self.source_kind
                        ),
                    ));
                }
                let ratio = self.integration_time / self.coherence_time;
                if ratio < INTEGRATION_RATIO {
                    return Err(Error::domain(
                        "integration_time",
                        format!("needs T_I/T₀ ≥ {INTEGRATION_RATIO}, got {ratio:.4e}"),
                    ));
                }
            }
            SourceKind::Spdc => {
                if wbt0 > SPDC_BANDWIDTH_RATIO {
                    return Err(Error::domain(
                        "detector_bandwidth",
                        format!("spdc source needs Ω_B·T₀ ≤ {SPDC_BANDWIDTH_RATIO}, got {wbt0:.4e}"),
                    ));
                }
                let ratio = self.integration_time * self.detector_bandwidth;
                if ratio < INTEGRATION_RATIO {
                    return Err(Error::domain(
                        "integration_time",
                        format!("needs Ω_B·T_I ≥ {INTEGRATION_RATIO}, got {ratio:.4e}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn cn2(&self, path: Path3) -> f64 {
        match path {
            Path3::Reference => self.cn2_reference,
            Path3::Signal => self.cn2_signal,
            Path3::Target => self.cn2_target,
        }
    }

    pub fn with_integration_time(&self, t: f64) -> Scenario {
        Scenario {
            integration_time: t,
            ..self.clone()
        }
    }

    pub fn with_turbulence(&self, reference: f64, signal: f64, target: f64) -> Scenario {
        Scenario {
            cn2_reference: reference,
            cn2_signal: signal,
            cn2_target: target,
            ..self.clone()
        }
    }

    pub fn from_json_str(s: &str) -> Result<Scenario> {
        let scenario: Scenario = serde_json::from_str(s)?;
        scenario.validate_parameters()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Scenario::from_json_str(&text)
    }

    /// Parameter set used for the published SNR comparison.
    ///
    /// λ₀ = 1.5 µm, ρ₀ = 0.15/π mm, a₀ = 3 cm, A_b = πa₀², η = 0.9, A_p = 0.1ρ_L²,
    /// L = 1 km, C²ₙ = 10⁻¹⁴ on all paths. The detector bandwidth is not stated
    /// (only products with it matter); 10⁹ rad/s is used. T₀ = 10³/Ω_B for the
    /// classical sources and 10⁻³/Ω_B for SPDC; the photon flux follows from 𝓘_Ω.
    pub fn paper_preset(kind: SourceKind, brightness_omega: f64) -> Scenario {
        let wavelength = 1.5e-6;
        let source_radius = 0.03;
        let coherence_length = 0.15e-3 / PI;
        let path_length = 1.0e3;
        let detector_bandwidth = 1.0e9;
        let rho_l = wavelength * path_length / (PI * source_radius);
        let coherence_time = match kind {
            SourceKind::Spdc => 1.0e-3 / detector_bandwidth,
            _ => 1.0e3 / detector_bandwidth,
        };
        let photon_flux = brightness_omega * detector_bandwidth * source_radius.powi(2)
            / coherence_length.powi(2);
        Scenario {
            wavelength,
            source_radius,
            coherence_length,
            coherence_time,
            photon_flux,
            path_length,
            cn2_reference: 1.0e-14,
            cn2_signal: 1.0e-14,
            cn2_target: 1.0e-14,
            quantum_efficiency: 0.9,
            detector_bandwidth,
            notch_bandwidth: 1.0e-3 * detector_bandwidth,
            pixel_area: 0.1 * rho_l * rho_l,
            bucket_area: PI * source_radius * source_radius,
            integration_time: 1.0e6 / detector_bandwidth,
            source_kind: kind,
        }
    }
}

/// Derive every cached quantity. Pure and deterministic.
pub fn derive_geometry(s: &Scenario) -> Result<DerivedGeometry> {
    s.validate_parameters()?;
    let k0 = s.wavenumber();
    let two_l_over_k = 2.0 * s.path_length / k0;
    let rho_l = two_l_over_k / s.source_radius;
    let a_l = two_l_over_k / s.coherence_length;
    let reference = PathTurbulence::new(k0, s.cn2_reference, s.path_length)?;
    let signal = PathTurbulence::new(k0, s.cn2_signal, s.path_length)?;
    let target = PathTurbulence::new(k0, s.cn2_target, s.path_length)?;
    let a0_sq_half = 0.5 * s.source_radius * s.source_radius;
    let alpha = 1.0
        + a0_sq_half * (signal.inverse_coherence_area() + reference.inverse_coherence_area());
    let alpha_tilde = 1.0 + a0_sq_half * signal.inverse_coherence_area();
    let beta = s.bucket_area / (PI * s.source_radius * s.source_radius);
    let coherence_ratio = (s.coherence_length / s.source_radius).powi(2);
    let brightness = s.photon_flux * s.coherence_time * coherence_ratio;
    let brightness_omega = s.photon_flux * coherence_ratio / s.detector_bandwidth;
    Ok(DerivedGeometry {
        wavenumber: k0,
        rho_l,
        a_l,
        reference,
        signal,
        target,
        alpha,
        alpha_tilde,
        beta,
        brightness,
        brightness_omega,
    })
}

/// One named entry in a validation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
    /// limit − value for upper-bound checks; negative when failing.
    pub margin: f64,
    /// Informational checks never fail a report.
    pub warning_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldReport {
    pub checks: Vec<Check>,
}

impl FarFieldReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || c.warning_only)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn upper_bound_check(name: &str, value: f64, limit: f64, warning_only: bool) -> Check {
    Check {
        name: name.to_string(),
        value,
        limit,
        pass: value <= limit,
        margin: limit - value,
        warning_only,
    }
}

/// Far-field coherence-propagation conditions and weak-turbulence warnings. Never errors.
pub fn validate_far_field(s: &Scenario) -> FarFieldReport {
    let k0 = s.wavenumber();
    let l2 = 2.0 * s.path_length;
    let pseudothermal = k0 * s.source_radius * s.coherence_length / l2;
    let spdc = k0 * s.source_radius * s.source_radius / l2;
    let mut checks = match s.source_kind {
        SourceKind::Spdc => vec![upper_bound_check(
            "far_field_spdc",
            spdc,
            FAR_FIELD_LIMIT,
            false,
        )],
        _ => vec![upper_bound_check(
            "far_field_pseudothermal",
            pseudothermal,
            FAR_FIELD_LIMIT,
            false,
        )],
    };
    for path in [Path3::Reference, Path3::Signal, Path3::Target] {
        let Ok(turb) = PathTurbulence::new(k0, s.cn2(path), s.path_length) else {
            continue;
        };
        if let PathTurbulence::Turbulent {
            coherence_length,
            logamp_variance,
        } = turb
        {
            // ρ_m ≥ a₀ expressed as an upper bound on a₀/ρ_m.
            checks.push(upper_bound_check(
                &format!("turbulence_{}_source_over_coherence", path.label()),
                s.source_radius / coherence_length,
                1.0,
                true,
            ));
            checks.push(upper_bound_check(
                &format!("turbulence_{}_logamp_variance", path.label()),
                logamp_variance,
                WEAK_TURBULENCE_SIGMA2,
                true,
            ));
        }
    }
    FarFieldReport { checks }
}
