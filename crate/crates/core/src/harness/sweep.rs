//! Closed-form SNR sweeps and the checks on the published curves.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use crate::analytic::{saturation_crossing, snr, snr_asymptotes, speckle_averaging_gamma, SnrBreakdown, TargetSummary};
use crate::error::{Error, Result};
use crate::scenario::{derive_geometry, Scenario, SourceKind};

use super::config::{ExperimentConfig, SweepSpec, SweepVariable};
use super::report::{CheckResult, ColumnDoc, RunReport};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// In `SourceKind::ALL` order.
    pub curves: Vec<SnrBreakdown>,
}

impl SweepRow {
    pub fn get(&self, kind: SourceKind) -> &SnrBreakdown {
        self.curves.iter().find(|c| c.source_kind == kind).expect("all kinds present")
    }
}

fn flux_for(brightness_omega: f64, s: &Scenario) -> f64 {
    brightness_omega * s.detector_bandwidth * s.source_radius.powi(2) / s.coherence_length.powi(2)
}

/// Scenario of one curve at one sweep value.
pub fn sweep_scenario(spec: &SweepSpec, base: Option<&Scenario>, kind: SourceKind, x: f64) -> Scenario {
    let mut s = match base {
        Some(b) => Scenario {
            source_kind: kind,
            ..b.clone()
        },
        None => Scenario::paper_preset(kind, spec.brightness_omega),
    };
    s.integration_time = spec.omega_ti / s.detector_bandwidth;
    match spec.variable {
        SweepVariable::OmegaTi => s.integration_time = x / s.detector_bandwidth,
        SweepVariable::Beta => s.bucket_area = x * PI * s.source_radius.powi(2),
        SweepVariable::BrightnessOmega => s.photon_flux = flux_for(x, &s),
        SweepVariable::Cn2 => s = s.with_turbulence(x, x, x),
    }
    s
}

fn breakdown(s: &Scenario, target: &TargetSummary) -> Result<SnrBreakdown> {
    let geom = derive_geometry(s)?;
    let gamma = speckle_averaging_gamma(geom.beta)?.value;
    snr(&geom, target, s, gamma)
}

pub fn sweep(spec: &SweepSpec, base: Option<&Scenario>) -> Result<Vec<SweepRow>> {
    if spec.variable == SweepVariable::Cn2 && spec.start < 0.0 {
        return Err(Error::Config("C²ₙ sweep must be non-negative".into()));
    }
    let target = TargetSummary::uniform(spec.target_area)?;
    spec.values()?
        .into_iter()
        .map(|x| {
            let curves = SourceKind::ALL
                .iter()
                .map(|&k| breakdown(&sweep_scenario(spec, base, k, x), &target))
                .collect::<Result<_>>()?;
            Ok(SweepRow { value: x, curves })
        })
        .collect()
}

const TERMS: [(&str, &str); 9] = [
    ("snr", "total SNR"),
    ("numerator", "signal term (𝒯²-scaled)"),
    ("source", "Δ²Source, integration-time scaled"),
    ("path", "Δ²Path (saturation term)"),
    ("detect", "Δ²Detect, integration-time scaled"),
    ("mix", "Δ²Mix, integration-time scaled"),
    ("sat", "saturation asymptote"),
    ("high", "high-brightness asymptote"),
    ("low", "low-brightness asymptote"),
];

pub fn sweep_columns(spec: &SweepSpec) -> Vec<ColumnDoc> {
    let (name, unit) = match spec.variable {
        SweepVariable::OmegaTi => ("omega_b_t_i", "1"),
        SweepVariable::Beta => ("beta", "1"),
        SweepVariable::BrightnessOmega => ("brightness_omega", "photons/mode"),
        SweepVariable::Cn2 => ("cn2", "m^-2/3"),
    };
    let mut cols = vec![ColumnDoc::new(SWEEP_FILE, name, unit, "swept value")];
    for k in SourceKind::ALL {
        for (term, what) in TERMS {
            cols.push(ColumnDoc::new(SWEEP_FILE, &format!("{}_{term}", k.name()), "1", &format!("{k}: {what}")));
        }
    }
    cols
}

fn row_values(b: &SnrBreakdown) -> [f64; 9] {
    [
        b.total,
        b.numerator,
        b.source,
        b.path,
        b.detect,
        b.mix,
        b.asymptotes.saturation,
        b.asymptotes.high_brightness,
        b.asymptotes.low_brightness,
    ]
}

pub fn write_sweep_csv(path: &Path, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(sweep_columns(spec).iter().map(|c| c.column.as_str()))?;
    for r in rows {
        let mut rec = vec![r.value.to_string()];
        for b in &r.curves {
            rec.extend(row_values(b).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Saturation anchors, Γ limits, preset geometry and the figure orderings.
pub fn paper_checks() -> Result<Vec<CheckResult>> {
    let mut checks = Vec::new();
    let area = TargetSummary::uniform(50.0)?;

    for (beta, expected, name) in [(1.0, 3.26, "analytic.saturation_beta1"), (2.0, 5.54, "analytic.saturation_beta2")] {
        let mut s = Scenario::paper_preset(SourceKind::Pseudothermal, 1e4).with_turbulence(0.0, 0.0, 0.0);
        s.bucket_area = beta * PI * s.source_radius.powi(2);
        let g = derive_geometry(&s)?;
        let gamma = speckle_averaging_gamma(g.beta)?.value;
        let a = snr_asymptotes(&g, &area, &s, gamma)?;
        checks.push(CheckResult::relative(name, a.saturation, expected, 0.01));
    }
    for k in SourceKind::ALL {
        let s = Scenario::paper_preset(k, 1e4)
            .with_turbulence(0.0, 0.0, 0.0)
            .with_integration_time(1e13 / 1e9);
        let b = breakdown(&s, &area)?;
        checks.push(CheckResult::relative(format!("analytic.vacuum_supremum.{k}"), b.total, 3.26, 0.01));
    }

    let small = speckle_averaging_gamma(1e-4)?.value;
    checks.push(CheckResult::within("analytic.gamma_small_beta", small, 0.995, 0.005));
    let large = speckle_averaging_gamma(100.0)?.value;
    checks.push(CheckResult::within("analytic.gamma_large_beta", 2.0 * 100.0 * large, 1.0, 0.05));

    let g = derive_geometry(&Scenario::paper_preset(SourceKind::Pseudothermal, 1.0))?;
    checks.push(CheckResult::relative("analytic.rho_l", g.rho_l, 0.05 / PI, 1e-12));
    checks.push(CheckResult::relative("analytic.a_l", g.a_l, 10.0, 1e-12));

    // orderings on the rows where every curve has T_I ≥ 10 T₀
    let spec = SweepSpec::default();
    let rows = sweep(&spec, None)?;
    let violations = rows
        .iter()
        .filter(|r| {
            SourceKind::ALL
                .iter()
                .all(|&k| r.value / 1e9 >= 10.0 * Scenario::paper_preset(k, 1.0).coherence_time)
        })
        .filter(|r| {
            let c = r.get(SourceKind::Pseudothermal).total;
            let q = r.get(SourceKind::Spdc).total;
            let comp = r.get(SourceKind::Computational).total;
            let slack = 1e-12 * comp.abs();
            comp + slack < c || c + slack < q
        })
        .count();
    checks.push(CheckResult::at_most("analytic.ordering_brightness1", violations as f64, 0.0));

    let crossing = |k: SourceKind| -> Result<f64> {
        let s = Scenario::paper_preset(k, 1e4);
        let g = derive_geometry(&s)?;
        let gamma = speckle_averaging_gamma(g.beta)?.value;
        Ok(saturation_crossing(&g, &area, &s, gamma, 0.9)? * s.detector_bandwidth)
    };
    let q = crossing(SourceKind::Spdc)?;
    let others = crossing(SourceKind::Pseudothermal)?.min(crossing(SourceKind::Computational)?);
    checks.push(
        CheckResult::at_most("analytic.spdc_saturates_first", q / others, 1.0)
            .with_note(format!("Ω_BT_I at 0.9·SNR_sat: spdc {q:.3e}, earliest classical {others:.3e}")),
    );
    Ok(checks)
}

pub fn run_analytic_sweep(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let t = Instant::now();
    let mut report = RunReport::new("analytic-sweep", serde_json::to_value(config)?);
    let spec = &config.sweep;
    let base = spec.use_config_scenario.then_some(&config.scenario);
    let rows = sweep(spec, base)?;
    report.geometry = Some(derive_geometry(&sweep_scenario(spec, base, SourceKind::Pseudothermal, spec.values()?[0]))?);
    for c in paper_checks()? {
        report.push(c);
    }
    for r in &rows {
        for b in &r.curves {
            report.warnings.extend(b.warnings.iter().cloned());
        }
    }
    report.warnings.dedup();
    report.csv_schema = sweep_columns(spec);
    if let Some(dir) = &config.out_dir {
        let path = dir.join(SWEEP_FILE);
        write_sweep_csv(&path, spec, &rows)?;
        report.artifacts.push(path);
    }
    report.record("rows", rows.len() as f64);
    report.timings.insert("sweep".into(), t.elapsed().as_secs_f64());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_variables_move_the_right_parameter() {
        let mut spec = SweepSpec {
            variable: SweepVariable::Beta,
            start: 0.5,
            stop: 2.0,
            points: 4,
            log: false,
            ..SweepSpec::default()
        };
        let s = sweep_scenario(&spec, None, SourceKind::Spdc, 2.0);
        assert!((s.bucket_area / (PI * s.source_radius.powi(2)) - 2.0).abs() < 1e-12);
        assert_eq!(sweep(&spec, None).unwrap().len(), 4);
        spec.variable = SweepVariable::BrightnessOmega;
        let s = sweep_scenario(&spec, None, SourceKind::Pseudothermal, 7.0);
        let g = derive_geometry(&s).unwrap();
        assert!((g.brightness_omega / 7.0 - 1.0).abs() < 1e-12);
        spec.variable = SweepVariable::Cn2;
        spec.start = -1.0;
        assert!(sweep(&spec, None).is_err());
    }

    #[test]
    fn paper_checks_pass() {
        for c in paper_checks().unwrap() {
            assert!(c.pass, "{}", c.line());
        }
    }
}
