//! SNR of the ac-coupled ghost imagers with its noise budget and asymptotes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::scenario::{DerivedGeometry, Scenario, SourceKind};

use super::image::{spdc_bracket, TargetSummary, RESOLVED_CELLS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymptotes {
    pub saturation: f64,
    pub high_brightness: f64,
    pub low_brightness: f64,
}

/// Noise terms are reported with their integration-time and source-specific scalings applied,
/// so `total = numerator / (source + path + detect + mix)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrBreakdown {
    pub source_kind: SourceKind,
    pub total: f64,
    pub numerator: f64,
    pub source: f64,
    pub path: f64,
    pub detect: f64,
    pub mix: f64,
    pub asymptotes: Asymptotes,
    pub warnings: Vec<Warning>,
}

impl SnrBreakdown {
    pub fn denominator(&self) -> f64 {
        self.source + self.path + self.detect + self.mix
    }
}

struct Terms {
    source: f64,
    path: f64,
    detect: f64,
    mix: f64,
}

fn check_inputs(scenario: &Scenario, gamma: f64) -> Result<()> {
    let t_i = scenario.integration_time;
    if !(t_i > 0.0 && t_i.is_finite()) {
        return Err(Error::domain("integration_time", format!("must be > 0, got {t_i}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain("gamma", format!("must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

/// Unscaled Δ² terms for the classical/quantum imagers.
fn raw_terms(geom: &DerivedGeometry, t: &TargetSummary, s: &Scenario, gamma: f64) -> Terms {
    let tp = t.local_reflectivity;
    let rho2 = geom.rho_l * geom.rho_l;
    let inv_beta = 1.0 / geom.beta;
    let eta = s.quantum_efficiency;
    let bright = geom.brightness;
    let subtense = s.path_length * s.path_length / s.bucket_area;
    let sr = geom.reference.logamp_variance();
    let ss = geom.signal.logamp_variance();
    let st = geom.target.logamp_variance();
    let e_all = (4.0 * (sr + ss + st)).exp();
    Terms {
        source: t.squared_cross_section * (1.0 + inv_beta) * e_all / ((2.0 * PI).sqrt() * rho2),
        path: tp * tp * (e_all * (gamma + 1.0) - 1.0),
        detect: tp * rho2 * PI.sqrt() / (16.0 * 2f64.sqrt() * s.pixel_area * eta * eta * bright * bright)
            * subtense,
        mix: tp / (eta * bright) * subtense * (4.0 * sr).exp()
            + PI * rho2 * tp * tp / (s.pixel_area * eta * bright) * (4.0 / 3.0 + inv_beta) * (4.0 * (ss + st)).exp(),
    }
}

fn validity_warnings(geom: &DerivedGeometry, t: &TargetSummary) -> Vec<Warning> {
    let mut w = Vec::new();
    let cells = t.squared_cross_section / (geom.rho_l * geom.rho_l);
    if cells < RESOLVED_CELLS {
        w.push(Warning::new(
            "few_resolution_cells",
            format!("A'_T/ρ_L² = {cells:.3} is below {RESOLVED_CELLS}"),
        ));
    }
    if geom.beta < 1.0 {
        w.push(Warning::new(
            "small_bucket",
            format!("β = {:.3} is below 1", geom.beta),
        ));
    }
    w
}

/// Total SNR and its scaled noise terms at the scenario's T_I.
pub fn snr(
    geom: &DerivedGeometry,
    target: &TargetSummary,
    scenario: &Scenario,
    gamma: f64,
) -> Result<SnrBreakdown> {
    check_inputs(scenario, gamma)?;
    let kind = scenario.source_kind;
    let t_i = scenario.integration_time;
    let t0 = scenario.coherence_time;
    let omega_b = scenario.detector_bandwidth;
    let tp = target.local_reflectivity;
    let raw = raw_terms(geom, target, scenario, gamma);
    let (numerator, source, path, detect, mix) = match kind {
        SourceKind::Pseudothermal => (
            tp * tp,
            t0 / t_i * raw.source,
            raw.path,
            omega_b * t0 * t0 / t_i * raw.detect,
            t0 / t_i * raw.mix,
        ),
        SourceKind::Spdc => {
            let q = spdc_bracket(geom.brightness);
            let excess = q - 1.0;
            (
                tp * tp * q * q,
                4.0 / (omega_b * t_i) * raw.source,
                raw.path * q * q,
                t0 * 4.0 * 2f64.sqrt() / t_i * raw.detect * q,
                t0 / t_i * raw.mix * (2.0 / 3f64.sqrt() + excess),
            )
        }
        SourceKind::Computational => {
            // Normalized by (T_I/T₀)e^{-4(σ_S²+σ_T²)}; no reference-path turbulence or detection.
            let e_st = (4.0 * (geom.signal.logamp_variance() + geom.target.logamp_variance())).exp();
            let rho2 = geom.rho_l * geom.rho_l;
            let subtense = scenario.path_length * scenario.path_length / scenario.bucket_area;
            (
                tp * tp,
                t0 / t_i * target.squared_cross_section * (1.0 + 1.0 / geom.beta) * e_st
                    / ((2.0 * PI).sqrt() * rho2),
                tp * tp * (e_st * (gamma + 1.0) - 1.0),
                0.0,
                t0 / t_i * tp / (scenario.quantum_efficiency * geom.brightness) * subtense * e_st,
            )
        }
    };
    let denominator = source + path + detect + mix;
    if !(denominator > 0.0) {
        return Err(Error::Internal(format!(
            "SNR denominator must be positive, got {denominator}"
        )));
    }
    Ok(SnrBreakdown {
        source_kind: kind,
        total: numerator / denominator,
        numerator,
        source,
        path,
        detect,
        mix,
        asymptotes: snr_asymptotes(geom, target, scenario, gamma)?,
        warnings: validity_warnings(geom, target),
    })
}

/// Saturation, high-brightness and low-brightness limits.
pub fn snr_asymptotes(
    geom: &DerivedGeometry,
    target: &TargetSummary,
    scenario: &Scenario,
    gamma: f64,
) -> Result<Asymptotes> {
    check_inputs(scenario, gamma)?;
    let kind = scenario.source_kind;
    let e_neg = (-4.0 * geom.total_logamp_variance(kind)).exp();
    let saturation = e_neg / ((gamma + 1.0) - e_neg);
    let tp = target.local_reflectivity;
    let rho2 = geom.rho_l * geom.rho_l;
    let t_i = scenario.integration_time;
    let t0 = scenario.coherence_time;
    let omega_b = scenario.detector_bandwidth;
    let eta = scenario.quantum_efficiency;
    let bright = geom.brightness;
    let subtense = scenario.bucket_area / (scenario.path_length * scenario.path_length);
    let source_area = target.squared_cross_section * (1.0 + 1.0 / geom.beta);
    let high_brightness = match kind {
        SourceKind::Spdc => omega_b * t_i * (PI / 8.0).sqrt() * rho2 * e_neg / source_area * tp * tp,
        _ => t_i / t0 * (2.0 * PI).sqrt() * rho2 * e_neg / source_area * tp * tp,
    };
    let low_brightness = match kind {
        SourceKind::Pseudothermal => {
            t_i / t0 * 16.0 * 2f64.sqrt() / PI.sqrt() * scenario.pixel_area * eta * eta * bright * bright
                / (omega_b * t0 * rho2)
                * tp
                * subtense
        }
        SourceKind::Spdc => t_i / t0 * scenario.pixel_area * eta * eta * bright / (PI * rho2) * tp * subtense,
        SourceKind::Computational => t_i / t0 * eta * bright * tp * subtense,
    };
    Ok(Asymptotes {
        saturation,
        high_brightness,
        low_brightness,
    })
}

/// Integration time at which the SNR reaches `fraction`·SNR_sat.
///
/// Every term except Δ²Path scales as 1/T_I, so the crossing is closed-form.
pub fn saturation_crossing(
    geom: &DerivedGeometry,
    target: &TargetSummary,
    scenario: &Scenario,
    gamma: f64,
    fraction: f64,
) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain("fraction", format!("must lie in (0, 1), got {fraction}")));
    }
    let b = snr(geom, target, scenario, gamma)?;
    let rate = (b.source + b.detect + b.mix) * scenario.integration_time;
    if !(b.path > 0.0) {
        return Err(Error::Estimation("Δ²Path vanishes; SNR never saturates".into()));
    }
    Ok(rate * fraction / (b.path * (1.0 - fraction)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::speckle::speckle_averaging_gamma;
    use crate::scenario::derive_geometry;
    use approx::assert_relative_eq;

    fn setup(kind: SourceKind, brightness_omega: f64) -> (Scenario, DerivedGeometry, TargetSummary, f64) {
        let s = Scenario::paper_preset(kind, brightness_omega);
        let g = derive_geometry(&s).unwrap();
        let gamma = speckle_averaging_gamma(g.beta).unwrap().value;
        (s, g, TargetSummary::uniform(50.0).unwrap(), gamma)
    }

    #[test]
    fn vacuum_saturation_beta_one_and_two() {
        for kind in SourceKind::ALL {
            let s = Scenario::paper_preset(kind, 1e4).with_turbulence(0.0, 0.0, 0.0);
            let g = derive_geometry(&s).unwrap();
            let gamma = speckle_averaging_gamma(1.0).unwrap().value;
            let t = TargetSummary::uniform(50.0).unwrap();
            let a = snr_asymptotes(&g, &t, &s, gamma).unwrap();
            assert!((a.saturation - 3.26).abs() / 3.26 < 0.01, "{kind}: {}", a.saturation);
            let long = s.with_integration_time(1e6);
            let b = snr(&g, &t, &long, gamma).unwrap();
            assert_relative_eq!(b.total, a.saturation, max_relative = 1e-3);
        }
        let gamma2 = speckle_averaging_gamma(2.0).unwrap().value;
        let s = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0).with_turbulence(0.0, 0.0, 0.0);
        let g = derive_geometry(&s).unwrap();
        let a = snr_asymptotes(&g, &TargetSummary::uniform(50.0).unwrap(), &s, gamma2).unwrap();
        assert!((a.saturation - 5.54).abs() / 5.54 < 0.01);
    }

    #[test]
    fn classical_and_quantum_share_saturation() {
        let (sc, gc, t, gamma) = setup(SourceKind::Pseudothermal, 1.0);
        let (sq, gq, _, _) = setup(SourceKind::Spdc, 1.0);
        let a = snr_asymptotes(&gc, &t, &sc, gamma).unwrap();
        let b = snr_asymptotes(&gq, &t, &sq, gamma).unwrap();
        assert_eq!(a.saturation, b.saturation);
    }

    #[test]
    fn terms_sum_to_total() {
        for kind in SourceKind::ALL {
            let (s, g, t, gamma) = setup(kind, 10.0);
            let b = snr(&g, &t, &s, gamma).unwrap();
            assert!(b.source >= 0.0 && b.path >= 0.0 && b.detect >= 0.0 && b.mix >= 0.0);
            assert_relative_eq!(b.total, b.numerator / b.denominator(), max_relative = 1e-15);
            assert!(b.total <= b.asymptotes.saturation * (1.0 + 1e-12));
        }
    }

    #[test]
    fn computational_matches_unnormalized_form() {
        let (s, g, t, gamma) = setup(SourceKind::Computational, 3.0);
        let b = snr(&g, &t, &s, gamma).unwrap();
        let ratio = s.integration_time / s.coherence_time;
        let e = (-4.0 * (g.signal.logamp_variance() + g.target.logamp_variance())).exp();
        let num = ratio * e;
        let den = t.squared_cross_section * (1.0 + 1.0 / g.beta) / ((2.0 * PI).sqrt() * g.rho_l.powi(2))
            + ratio * ((gamma + 1.0) - e)
            + 1.0 / (s.quantum_efficiency * g.brightness) * s.path_length.powi(2) / s.bucket_area;
        assert_relative_eq!(b.total, num / den, max_relative = 1e-12);
    }

    #[test]
    fn computational_low_brightness_limit() {
        let s = Scenario::paper_preset(SourceKind::Computational, 1e-9).with_turbulence(0.0, 0.0, 0.0);
        let g = derive_geometry(&s).unwrap();
        let gamma = speckle_averaging_gamma(g.beta).unwrap().value;
        let t = TargetSummary::uniform(50.0).unwrap();
        let b = snr(&g, &t, &s, gamma).unwrap();
        assert_relative_eq!(b.total, b.asymptotes.low_brightness, max_relative = 1e-4);
    }

    #[test]
    fn high_brightness_ratio() {
        let (sc, gc, t, gamma) = setup(SourceKind::Pseudothermal, 1e6);
        let (sq, gq, _, _) = setup(SourceKind::Spdc, 1e6);
        let c = snr_asymptotes(&gc, &t, &sc, gamma).unwrap().high_brightness;
        let q = snr_asymptotes(&gq, &t, &sq, gamma).unwrap().high_brightness;
        // by hand: (Ω_B T_I √(π/8)) / ((T_I/T₀_C) √(2π)) = Ω_B T₀_C / 4
        assert_relative_eq!(q / c, 1e3 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn low_brightness_scaling() {
        let ratio = |kind: SourceKind| {
            let (s1, g1, t, gamma) = setup(kind, 1e-3);
            let (s2, g2, _, _) = setup(kind, 2e-3);
            snr_asymptotes(&g2, &t, &s2, gamma).unwrap().low_brightness
                / snr_asymptotes(&g1, &t, &s1, gamma).unwrap().low_brightness
        };
        assert_relative_eq!(ratio(SourceKind::Pseudothermal), 4.0, max_relative = 1e-12);
        assert_relative_eq!(ratio(SourceKind::Spdc), 2.0, max_relative = 1e-12);
        assert_relative_eq!(ratio(SourceKind::Computational), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn monotone_in_integration_time() {
        for kind in SourceKind::ALL {
            let (s, g, t, gamma) = setup(kind, 1.0);
            let mut prev = 0.0;
            for i in 0..=60 {
                let t_i = 10f64.powf(-6.0 + 0.1 * i as f64);
                let b = snr(&g, &t, &s.with_integration_time(t_i), gamma).unwrap();
                assert!(b.total >= prev);
                prev = b.total;
            }
        }
    }

    #[test]
    fn saturation_symmetric_in_paths() {
        let base = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0);
        let t = TargetSummary::uniform(50.0).unwrap();
        let gamma = speckle_averaging_gamma(1.0).unwrap().value;
        let sat = |r, s, tt| {
            let sc = base.with_turbulence(r, s, tt);
            snr_asymptotes(&derive_geometry(&sc).unwrap(), &t, &sc, gamma).unwrap().saturation
        };
        let a = sat(1e-14, 3e-15, 0.0);
        assert_relative_eq!(a, sat(0.0, 1e-14, 3e-15), max_relative = 1e-13);
        assert_relative_eq!(a, sat(3e-15, 0.0, 1e-14), max_relative = 1e-13);
    }

    #[test]
    fn crossing_reaches_fraction() {
        let (s, g, t, gamma) = setup(SourceKind::Spdc, 1e4);
        let t_x = saturation_crossing(&g, &t, &s, gamma, 0.9).unwrap();
        let b = snr(&g, &t, &s.with_integration_time(t_x), gamma).unwrap();
        assert_relative_eq!(b.total, 0.9 * b.asymptotes.saturation, max_relative = 1e-10);
    }

    #[test]
    fn guards_and_errors() {
        let (s, g, _, gamma) = setup(SourceKind::Pseudothermal, 1.0);
        let small = TargetSummary::uniform(g.rho_l * g.rho_l).unwrap();
        let b = snr(&g, &small, &s, gamma).unwrap();
        assert!(b.warnings.iter().any(|w| w.code == "few_resolution_cells"));
        let mut bad = s.clone();
        bad.integration_time = 0.0;
        assert!(snr(&g, &small, &bad, gamma).is_err());
    }
}
