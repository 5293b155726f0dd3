//! Mean ghost image, resolution and contrast.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Warning};
use crate::grid::RealGrid;
use crate::scenario::{DerivedGeometry, Scenario, SourceKind};

/// Targets with fewer resolution cells than this are not "completely resolved".
pub const RESOLVED_CELLS: f64 = 30.0;

/// Kernel mass that must fall inside the grid.
pub const KERNEL_MASS_MIN: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    /// A_T = ∫𝒯 dρ (m²)
    pub cross_section: f64,
    /// A'_T = ∫𝒯² dρ (m²)
    pub squared_cross_section: f64,
    /// 𝒯(ρ_p)
    pub local_reflectivity: f64,
}

impl TargetSummary {
    pub fn new(cross_section: f64, squared_cross_section: f64, local_reflectivity: f64) -> Result<Self> {
        if !(cross_section >= 0.0 && cross_section.is_finite()) {
            return Err(Error::domain("cross_section", format!("must be ≥ 0, got {cross_section}")));
        }
        if !(squared_cross_section >= 0.0 && squared_cross_section <= cross_section * (1.0 + 1e-12)) {
            return Err(Error::domain(
                "squared_cross_section",
                format!("need 0 ≤ A'_T ≤ A_T, got {squared_cross_section} vs {cross_section}"),
            ));
        }
        if !(0.0..=1.0).contains(&local_reflectivity) {
            return Err(Error::domain(
                "local_reflectivity",
                format!("must lie in [0, 1], got {local_reflectivity}"),
            ));
        }
        Ok(TargetSummary {
            cross_section,
            squared_cross_section,
            local_reflectivity,
        })
    }

    /// Uniform 𝒯 = 1 patch of the given area, evaluated inside it.
    pub fn uniform(area: f64) -> Result<Self> {
        TargetSummary::new(area, area, 1.0)
    }

    /// Integrate a reflectivity map; 𝒯(ρ_p) is read at flat index `pixel`.
    pub fn from_grid(target: &RealGrid, pixel: usize) -> Result<Self> {
        if target.data.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
            return Err(Error::domain("reflectivity", "values must lie in [0, 1]"));
        }
        let local = *target
            .data
            .get(pixel)
            .ok_or_else(|| Error::Config(format!("pixel {pixel} outside target grid")))?;
        let da = target.spec.cell_area();
        let a_t = target.data.iter().sum::<f64>() * da;
        let a_tp = target.data.iter().map(|t| t * t).sum::<f64>() * da;
        TargetSummary::new(a_t, a_tp.min(a_t), local)
    }
}

/// e⁻¹ radius of the point-spread function, ρ_L√α (α̃ for the computational imager).
pub fn predicted_resolution(geom: &DerivedGeometry, kind: SourceKind) -> f64 {
    geom.rho_l * geom.alpha_for(kind).sqrt()
}

/// 1 + 1/(4√π𝓘), the SPDC excess-correlation bracket.
pub fn spdc_bracket(brightness: f64) -> f64 {
    1.0 + 1.0 / (4.0 * PI.sqrt() * brightness)
}

/// Scale of the image-bearing term relative to the pseudothermal one.
fn image_term_scale(kind: SourceKind, scenario: &Scenario, geom: &DerivedGeometry) -> f64 {
    match kind {
        SourceKind::Spdc => {
            0.25 * scenario.detector_bandwidth * scenario.coherence_time * spdc_bracket(geom.brightness)
        }
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastPrediction {
    pub value: f64,
    /// (√π/16)(Ω_B/P)(a_L²/A_T), reported for SPDC at 𝓘 ≤ 0.01.
    pub low_brightness: Option<f64>,
    pub warnings: Vec<Warning>,
}

pub fn predicted_contrast(
    geom: &DerivedGeometry,
    target: &TargetSummary,
    kind: SourceKind,
    scenario: &Scenario,
) -> Result<ContrastPrediction> {
    let a_t = target.cross_section;
    if !(a_t > 0.0) {
        return Err(Error::domain("cross_section", format!("A_T must be > 0, got {a_t}")));
    }
    let cell = PI * geom.rho_l * geom.rho_l;
    let mut warnings = Vec::new();
    if a_t < RESOLVED_CELLS * cell {
        warnings.push(Warning::new(
            "target_not_resolved",
            format!(
                "A_T = {a_t:.3e} m² is under {RESOLVED_CELLS}·πρ_L² = {:.3e} m²",
                RESOLVED_CELLS * cell
            ),
        ));
    }
    let value = cell / a_t * image_term_scale(kind, scenario, geom);
    let low_brightness = (kind == SourceKind::Spdc && geom.brightness <= 0.01).then(|| {
        PI.sqrt() / 16.0 * scenario.detector_bandwidth / scenario.photon_flux * geom.a_l * geom.a_l / a_t
    });
    Ok(ContrastPrediction {
        value,
        low_brightness,
        warnings,
    })
}

/// ⟨C(ρ_p)⟩ = C₀ + C₁(ρ_p) in photocount units (q = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanImage {
    pub image: RealGrid,
    /// C₀
    pub background: f64,
    /// η²A_pA_b/L² (2P/πa_L²)², common to C₀ and C₁
    pub prefactor: f64,
    /// Fraction of the continuous PSF mass captured on the grid.
    pub kernel_mass: f64,
}

impl MeanImage {
    /// C₁ alone.
    pub fn image_term(&self) -> Vec<f64> {
        self.image.data.iter().map(|c| c - self.background).collect()
    }
}

/// Mean correlator output over the CCD coordinates of `target`.
///
/// The Gaussian blur is a separable direct sum; the sampled kernel is not renormalized, so
/// discretization and truncation errors stay visible.
pub fn predicted_mean_image(
    geom: &DerivedGeometry,
    target: &RealGrid,
    kind: SourceKind,
    scenario: &Scenario,
) -> Result<MeanImage> {
    if target.data.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::domain("reflectivity", "values must lie in [0, 1]"));
    }
    let spec = target.spec;
    let w = predicted_resolution(geom, kind);
    if spec.pitch > w / 4.0 {
        return Err(Error::Sampling {
            pitch: spec.pitch,
            limit: w / 4.0,
        });
    }
    let n = spec.n;
    let dx = spec.pitch;

    // 1-D kernel samples e^{-x²/w²}Δx out to the grid size.
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            let x = d as f64 * dx;
            (-(x * x) / (w * w)).exp() * dx
        })
        .collect();
    let half = n / 2;
    let in_grid_1d: f64 = (0..n).map(|i| kernel[i.abs_diff(half)]).sum();
    let kernel_mass = in_grid_1d * in_grid_1d / (PI * w * w);
    if kernel_mass < KERNEL_MASS_MIN {
        return Err(Error::Config(format!(
            "grid captures only {kernel_mass:.5} of the point-spread function"
        )));
    }

    let field = match kind {
        SourceKind::Spdc => target.point_reflected(),
        _ => target.clone(),
    };
    let a_t = target.integral();
    let alpha = geom.alpha_for(kind);
    let prefactor = scenario.quantum_efficiency.powi(2) * scenario.pixel_area * scenario.bucket_area
        / scenario.path_length.powi(2)
        * (2.0 * scenario.photon_flux / (PI * geom.a_l * geom.a_l)).powi(2);
    let background = prefactor * a_t;
    let scale = prefactor / alpha * image_term_scale(kind, scenario, geom);

    let cutoff = ((7.0 * w / dx).ceil() as usize).min(n - 1);
    let blurred = separable_blur(&field.data, n, &kernel[..=cutoff]);
    let mut image = RealGrid::zeros(spec);
    for (out, b) in image.data.iter_mut().zip(&blurred) {
        *out = background + scale * b;
    }
    Ok(MeanImage {
        image,
        background,
        prefactor,
        kernel_mass,
    })
}

fn separable_blur(data: &[f64], n: usize, kernel: &[f64]) -> Vec<f64> {
    let r = kernel.len() - 1;
    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        let row = &data[i * n..(i + 1) * n];
        if row.iter().all(|&v| v == 0.0) {
            continue;
        }
        for j in 0..n {
            let lo = j.saturating_sub(r);
            let hi = (j + r).min(n - 1);
            let mut s = 0.0;
            for (jj, &v) in row.iter().enumerate().take(hi + 1).skip(lo) {
                s += v * kernel[jj.abs_diff(j)];
            }
            rows[i * n + j] = s;
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(n - 1);
        for ii in lo..=hi {
            let k = kernel[ii.abs_diff(i)];
            let src = &rows[ii * n..(ii + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += k * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, Plane};
    use crate::scenario::derive_geometry;
    use approx::assert_relative_eq;

    fn vacuum(kind: SourceKind) -> (Scenario, DerivedGeometry) {
        let s = Scenario::paper_preset(kind, 1.0).with_turbulence(0.0, 0.0, 0.0);
        let g = derive_geometry(&s).unwrap();
        (s, g)
    }

    fn grid_for(g: &DerivedGeometry, n: usize) -> GridSpec {
        GridSpec::new(n, g.rho_l / 5.0, Plane::Detector).unwrap()
    }

    #[test]
    fn resolution_without_turbulence_is_rho_l() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let expect = s.wavelength * s.path_length / (PI * s.source_radius);
        assert_relative_eq!(predicted_resolution(&g, SourceKind::Pseudothermal), expect, max_relative = 1e-14);
    }

    #[test]
    fn resolution_with_preset_turbulence() {
        let s = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0);
        let g = derive_geometry(&s).unwrap();
        // √α, computed by hand
        assert_relative_eq!(
            predicted_resolution(&g, SourceKind::Pseudothermal) / g.rho_l,
            1.492_228_742_065_807_f64.sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn computational_resolution_ignores_reference_path() {
        let s = Scenario::paper_preset(SourceKind::Computational, 1.0);
        let a = derive_geometry(&s.with_turbulence(0.0, 1e-14, 1e-14)).unwrap();
        let b = derive_geometry(&s.with_turbulence(5e-14, 1e-14, 1e-14)).unwrap();
        assert_eq!(
            predicted_resolution(&a, SourceKind::Computational),
            predicted_resolution(&b, SourceKind::Computational)
        );
    }

    #[test]
    fn contrast_values() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let cell = PI * g.rho_l * g.rho_l;
        let c = predicted_contrast(&g, &TargetSummary::uniform(cell).unwrap(), SourceKind::Pseudothermal, &s)
            .unwrap();
        assert_relative_eq!(c.value, 1.0, max_relative = 1e-14);
        assert_eq!(c.warnings.len(), 1);
        let c = predicted_contrast(&g, &TargetSummary::uniform(50.0).unwrap(), SourceKind::Pseudothermal, &s)
            .unwrap();
        assert_relative_eq!(c.value, 1.591_549_430_918_953_4e-5, max_relative = 1e-12);
        assert!(c.warnings.is_empty());
        let comp =
            predicted_contrast(&g, &TargetSummary::uniform(50.0).unwrap(), SourceKind::Computational, &s).unwrap();
        assert_eq!(comp.value, c.value);
        assert!(predicted_contrast(&g, &TargetSummary::uniform(0.0).unwrap(), SourceKind::Pseudothermal, &s).is_err());
    }

    #[test]
    fn spdc_contrast_limits() {
        let t = TargetSummary::uniform(50.0).unwrap();
        let bright = Scenario::paper_preset(SourceKind::Spdc, 1e9);
        let g = derive_geometry(&bright).unwrap();
        let q = predicted_contrast(&g, &t, SourceKind::Spdc, &bright).unwrap();
        let c = PI * g.rho_l * g.rho_l / 50.0;
        let omega_t0 = bright.detector_bandwidth * bright.coherence_time;
        assert_relative_eq!(q.value / c, omega_t0 / 4.0, max_relative = 1e-4);
        assert!(q.low_brightness.is_none());

        let dim = Scenario::paper_preset(SourceKind::Spdc, 1.0);
        let g = derive_geometry(&dim).unwrap();
        let q = predicted_contrast(&g, &t, SourceKind::Spdc, &dim).unwrap();
        let approx = q.low_brightness.unwrap();
        assert_relative_eq!(q.value, approx, max_relative = 0.01);
    }

    #[test]
    fn empty_target_gives_empty_image() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let t = RealGrid::zeros(grid_for(&g, 64));
        let m = predicted_mean_image(&g, &t, SourceKind::Pseudothermal, &s).unwrap();
        assert!(m.image.data.iter().all(|&v| v == 0.0));
        assert_eq!(m.background, 0.0);
    }

    #[test]
    fn uniform_disc_interior_ratio() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let spec = grid_for(&g, 256);
        let radius = 20.0 * g.rho_l;
        let t = RealGrid::from_fn(spec, |x, y| if x * x + y * y <= radius * radius { 1.0 } else { 0.0 });
        let m = predicted_mean_image(&g, &t, SourceKind::Pseudothermal, &s).unwrap();
        let centre = spec.index_of(0.0, 0.0).unwrap();
        let a_t = t.integral();
        assert_relative_eq!(
            m.image.data[centre] / m.background,
            1.0 + PI * g.rho_l * g.rho_l / a_t,
            max_relative = 1e-6
        );
    }

    #[test]
    fn kernel_normalization() {
        let s = Scenario::paper_preset(SourceKind::Pseudothermal, 1.0);
        let g = derive_geometry(&s).unwrap();
        let spec = GridSpec::new(128, g.rho_l / 4.0, Plane::Detector).unwrap();
        let t = RealGrid::from_fn(spec, |_, _| 1.0);
        let m = predicted_mean_image(&g, &t, SourceKind::Pseudothermal, &s).unwrap();
        let centre = spec.index_of(0.0, 0.0).unwrap();
        let c1 = m.image.data[centre] - m.background;
        let expect = PI * g.rho_l * g.rho_l * g.alpha * m.prefactor / g.alpha;
        assert_relative_eq!(c1, expect, max_relative = 1e-3);
        assert!(m.kernel_mass >= KERNEL_MASS_MIN);
    }

    #[test]
    fn spdc_image_is_point_reflected() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let spec = grid_for(&g, 64);
        let r = g.rho_l;
        let t = RealGrid::from_fn(spec, |x, y| {
            let a = (x - 3.0 * r).powi(2) + (y - 2.0 * r).powi(2) < r * r;
            let b = (x + 4.0 * r).powi(2) + (y + 1.0 * r).powi(2) < 0.5 * r * r;
            if a { 1.0 } else if b { 0.5 } else { 0.0 }
        });
        let sq = Scenario::paper_preset(SourceKind::Spdc, 1.0).with_turbulence(0.0, 0.0, 0.0);
        let gq = derive_geometry(&sq).unwrap();
        let c = predicted_mean_image(&g, &t, SourceKind::Pseudothermal, &s).unwrap();
        let q = predicted_mean_image(&gq, &t, SourceKind::Spdc, &sq).unwrap();
        let c1 = RealGrid { spec, data: c.image_term() };
        let q1 = q.image_term();
        let mirrored = c1.point_reflected();
        let scale = q1[spec.index_of(-3.0 * r, -2.0 * r).unwrap()] / mirrored.data[spec.index_of(-3.0 * r, -2.0 * r).unwrap()];
        // row/column 0 have no mirror partner on an even grid
        for (k, (a, b)) in q1.iter().zip(&mirrored.data).enumerate() {
            if k < spec.n || k % spec.n == 0 {
                continue;
            }
            assert!((a - scale * b).abs() <= 1e-9 * scale * c1.data.iter().cloned().fold(0.0, f64::max));
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let (s, g) = vacuum(SourceKind::Pseudothermal);
        let spec = GridSpec::new(64, g.rho_l / 2.0, Plane::Detector).unwrap();
        let t = RealGrid::zeros(spec);
        assert!(matches!(
            predicted_mean_image(&g, &t, SourceKind::Pseudothermal, &s),
            Err(Error::Sampling { .. })
        ));
    }

    #[test]
    fn target_summary_invariants() {
        let spec = GridSpec::new(16, 0.1, Plane::Target).unwrap();
        let t = RealGrid::from_fn(spec, |x, _| if x > 0.0 { 0.5 } else { 0.0 });
        let s = TargetSummary::from_grid(&t, spec.index_of(0.3, 0.0).unwrap()).unwrap();
        assert!(s.squared_cross_section <= s.cross_section);
        assert_eq!(s.local_reflectivity, 0.5);
        assert!(TargetSummary::new(1.0, 2.0, 0.5).is_err());
    }
}
