//! Kinetic, potential and total energies of densities, with the scaling
//! identities and the hydrogenic benchmark.

pub mod trial;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measures::{dist, trapezoid, Measure, NucleiConfig, RadialDensity};
use crate::optim::{minimize, SearchConfig};
use crate::tolerances::{COINCIDENCE_EPS, EPSILON_FLOOR, RADIAL_INTERVALS, RADIAL_R_MAX};

use trial::{HydrogenicMixture, MolecularTrial, TrialEnergy};

/// Parameters of `F_ε = εT + bC − U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub epsilon: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub n_electrons: usize,
}

impl EnergyParams {
    pub fn new(epsilon: f64, b: f64, n_electrons: usize) -> Result<Self> {
        let p = Self {
            epsilon,
            b,
            n_electrons,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.b >= 0.0) || !self.b.is_finite() {
            return Err(invalid(format!("b must be nonnegative, got {}", self.b)));
        }
        if self.n_electrons == 0 {
            return Err(invalid("need at least one electron"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub kinetic: f64,
    pub correlation: f64,
    pub potential: f64,
    pub f_eps: f64,
    pub g_eps: f64,
}

/// `∫|∇√ρ|²` from the radial mass density.
///
/// With `u = √(m/(4πr²))`, `T = ∫ 4πr² u'(r)² dr`; `u(0)` comes from the
/// even quadratic through the first two interior nodes, derivatives are
/// second-order (centered inside, one-sided at the ends).
pub fn kinetic(rho: &RadialDensity) -> Result<f64> {
    if !(rho.total_mass() > 0.0) {
        return Err(invalid("kinetic energy of a zero-mass density"));
    }
    let r = rho.radii();
    let m = rho.mass_density();
    if m.iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidDensity("negative mass density".into()));
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let n = r.len();
    let mut u: Vec<f64> = (0..n)
        .map(|j| if j == 0 { 0.0 } else { (m[j] / (four_pi * r[j] * r[j])).sqrt() })
        .collect();
    let slope = (u[2] - u[1]) / (r[2] * r[2] - r[1] * r[1]);
    u[0] = u[1] - slope * r[1] * r[1];

    let mut du = vec![0.0; n];
    for j in 1..n - 1 {
        let (h1, h2) = (r[j] - r[j - 1], r[j + 1] - r[j]);
        du[j] = -h2 / (h1 * (h1 + h2)) * u[j - 1] + (h2 - h1) / (h1 * h2) * u[j]
            + h1 / (h2 * (h1 + h2)) * u[j + 1];
    }
    let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
    du[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1]
        - h1 / (h2 * (h1 + h2)) * u[2];
    let (h1, h2) = (r[n - 1] - r[n - 2], r[n - 2] - r[n - 3]);
    du[n - 1] = (2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[n - 1] - (h1 + h2) / (h1 * h2) * u[n - 2]
        + h1 / (h2 * (h1 + h2)) * u[n - 3];

    let integrand: Vec<f64> = (0..n).map(|j| four_pi * r[j] * r[j] * du[j] * du[j]).collect();
    Ok(trapezoid(r, &integrand))
}

/// `∫ dρ(x)/|x − X|` for a radial density, by Newton's theorem.
pub fn radial_potential_at(rho: &RadialDensity, x: &crate::measures::Point3) -> f64 {
    let big_r = dist(&rho.center(), x);
    let r = rho.radii();
    let m = rho.mass_density();
    let integrand: Vec<f64> = (0..r.len())
        .map(|j| {
            let d = r[j].max(big_r);
            if d > 0.0 {
                m[j] / d
            } else {
                0.0
            }
        })
        .collect();
    trapezoid(r, &integrand)
}

/// `U₀(ρ) = ∫ dρ/|x − c|` about the density's own center.
pub fn u0(rho: &RadialDensity) -> f64 {
    radial_potential_at(rho, &rho.center())
}

/// `U(ρ) = Σ_k Z_k ∫ dρ(x)/|x − X_k|`; infinite when an atom sits on a nucleus.
pub fn potential(rho: &Measure, nuclei: &NucleiConfig) -> f64 {
    let xs = nuclei.positions();
    let zs = nuclei.charges();
    match rho {
        Measure::Radial(r) => xs.iter().zip(zs).map(|(x, z)| z * radial_potential_at(r, x)).sum(),
        Measure::Discrete(d) => {
            let mut u = 0.0;
            for (x, z) in xs.iter().zip(zs) {
                for (p, w) in d.points().iter().zip(d.weights()) {
                    if *w == 0.0 {
                        continue;
                    }
                    let dd = dist(p, x);
                    if dd < COINCIDENCE_EPS {
                        return f64::INFINITY;
                    }
                    u += z * w / dd;
                }
            }
            u
        }
    }
}

/// Assembles `F_ε` and `G_ε = εF_ε` from a supplied correlation value.
pub fn f_eps(
    rho: &RadialDensity,
    nuclei: &NucleiConfig,
    params: &EnergyParams,
    correlation: f64,
) -> Result<EnergyReport> {
    params.validate()?;
    if !(correlation >= 0.0) {
        return Err(invalid(format!("correlation must be nonnegative, got {correlation}")));
    }
    let t = kinetic(rho)?;
    let u = potential(&Measure::Radial(rho.clone()), nuclei);
    let bc = if params.b == 0.0 { 0.0 } else { params.b * correlation };
    let f = params.epsilon * t + bc - u;
    Ok(EnergyReport {
        kinetic: t,
        correlation,
        potential: u,
        f_eps: f,
        g_eps: params.epsilon * f,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    pub direct: f64,
    pub rescaled: f64,
    pub difference: f64,
    pub tolerance: f64,
}

/// Compares `G_ε(ρ)` with `T(ρ^ε) + bC(ρ^ε) − Σ Z_k ∫ρ^ε/|x − X_k/ε|`.
///
/// Both sides are evaluated on the grid; the tolerance is 1% of the summed
/// magnitudes of the terms.
pub fn rescale_identity_check(
    rho: &RadialDensity,
    nuclei: &NucleiConfig,
    params: &EnergyParams,
    correlation: &dyn Fn(&RadialDensity) -> Result<f64>,
) -> Result<RescaleReport> {
    params.validate()?;
    let eps = params.epsilon;
    let c = if params.b == 0.0 { 0.0 } else { correlation(rho)? };
    let direct = f_eps(rho, nuclei, params, c)?;

    let rho_e = rho.scaled(eps)?;
    let nuclei_e = nuclei.scaled(eps)?;
    let t_e = kinetic(&rho_e)?;
    let c_e = if params.b == 0.0 { 0.0 } else { correlation(&rho_e)? };
    let u_e = potential(&Measure::Radial(rho_e), &nuclei_e);
    let rescaled = t_e + params.b * c_e - u_e;

    let scale = eps * eps * direct.kinetic + eps * params.b * c + eps * direct.potential;
    let report = RescaleReport {
        direct: direct.g_eps,
        rescaled,
        difference: (direct.g_eps - rescaled).abs(),
        tolerance: 1e-2 * scale,
    };
    if report.difference > report.tolerance {
        return Err(Error::InvariantViolation(format!(
            "rescaling identity off by {} (tolerance {})",
            report.difference, report.tolerance
        )));
    }
    Ok(report)
}

/// Ground energy `−Z²/4` and normalized density `Z³e^{−Zr}/(8π)` on the default grid.
pub fn hydrogen_exact(z: f64) -> Result<(f64, RadialDensity)> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(invalid(format!("charge must be positive, got {z}")));
    }
    let density = RadialDensity::from_fn(RADIAL_R_MAX, RADIAL_INTERVALS, [0.0; 3], |r| {
        0.5 * z * z * z * r * r * (-z * r).exp()
    })?;
    Ok((-z * z / 4.0, density))
}

/// Shape of the per-nucleus trial densities used by the direct minimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialFamily {
    /// Hydrogenic components per nucleus.
    pub components: usize,
    pub search: SearchConfig,
}

impl Default for TrialFamily {
    fn default() -> Self {
        Self {
            components: 1,
            search: SearchConfig::default(),
        }
    }
}

/// Best molecular trial found by direct search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFit {
    pub trial: MolecularTrial,
    pub energy: TrialEnergy,
    pub stagnated: bool,
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn decode_trial(p: &[f64], nuclei: &NucleiConfig, k: usize) -> Result<MolecularTrial> {
    let m = nuclei.len();
    let mut pos = 0;
    let masses = if m == 1 {
        vec![1.0]
    } else {
        let mut logits = p[..m - 1].to_vec();
        logits.push(0.0);
        pos = m - 1;
        softmax(&logits)
    };
    let mut clusters = Vec::with_capacity(m);
    for alpha in masses {
        let mut logits = p[pos..pos + k - 1].to_vec();
        logits.push(0.0);
        pos += k - 1;
        let weights: Vec<f64> = softmax(&logits).iter().map(|w| w * alpha).collect();
        let exponents: Vec<f64> = p[pos..pos + k].iter().map(|v| v.clamp(-30.0, 30.0).exp()).collect();
        pos += k;
        clusters.push(HydrogenicMixture::new(weights, exponents)?);
    }
    MolecularTrial::new(nuclei.clone(), clusters)
}

/// Minimizes `T + bC − U` over probability trials made of one hydrogenic
/// mixture per nucleus, with free masses, weights and exponents.
pub fn minimize_trial(nuclei: &NucleiConfig, b: f64, family: &TrialFamily) -> Result<TrialFit> {
    if family.components == 0 {
        return Err(invalid("trial family needs at least one component"));
    }
    let m = nuclei.len();
    let k = family.components;
    let mut bounds = vec![(-3.0, 3.0); m - 1];
    for z in nuclei.charges() {
        bounds.extend(std::iter::repeat_n((-3.0, 3.0), k - 1));
        bounds.extend(std::iter::repeat_n(((0.2 * z).ln(), (3.0 * z).ln()), k));
    }
    let objective = |p: &[f64]| -> f64 {
        decode_trial(p, nuclei, k)
            .and_then(|t| t.energy(b))
            .map(|e| e.value)
            .unwrap_or(f64::INFINITY)
    };
    let best = minimize(&objective, &bounds, &family.search);
    let trial = decode_trial(&best.x, nuclei, k)?;
    let energy = trial.energy(b)?;
    Ok(TrialFit {
        trial,
        energy,
        stagnated: best.stagnated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonInteractingResult {
    pub epsilon: f64,
    pub value: f64,
    /// Mass attached to each nucleus.
    pub mass_fractions: Vec<f64>,
    /// Per-nucleus mixtures in the original (unscaled) frame.
    pub clusters: Vec<HydrogenicMixture>,
    /// Mean radius of each cluster in the original frame.
    pub spreads: Vec<f64>,
    pub stagnated: bool,
}

impl NonInteractingResult {
    /// Radial density of the cluster on nucleus `k`, on the default grid.
    pub fn density(&self, k: usize, nuclei: &NucleiConfig) -> Result<RadialDensity> {
        let c = self
            .clusters
            .get(k)
            .ok_or_else(|| invalid(format!("no cluster {k}")))?;
        let scale = 10.0 * c.mean_radius().max(1e-12);
        c.to_radial(scale, RADIAL_INTERVALS, nuclei.positions()[k])
    }
}

/// Runs the direct search for `ε²T − εU + εbC` and reports the result in the
/// original frame; `b = 0` gives the non-interacting problem.
pub(crate) fn minimize_scaled(
    nuclei: &NucleiConfig,
    epsilon: f64,
    b: f64,
    family: &TrialFamily,
) -> Result<NonInteractingResult> {
    if !(epsilon >= EPSILON_FLOOR) || !epsilon.is_finite() {
        return Err(invalid(format!(
            "epsilon {epsilon} below the floor {EPSILON_FLOOR}"
        )));
    }
    let fit = minimize_trial(&nuclei.scaled(epsilon)?, b, family)?;
    let clusters: Vec<HydrogenicMixture> = fit.trial.clusters.iter().map(|c| c.scaled(1.0 / epsilon)).collect();
    Ok(NonInteractingResult {
        epsilon,
        value: fit.energy.value,
        mass_fractions: fit.trial.masses(),
        spreads: clusters.iter().map(|c| c.mean_radius()).collect(),
        clusters,
        stagnated: fit.stagnated,
    })
}

/// Direct minimization of `ε²T − εU` over per-nucleus hydrogenic trials.
pub fn minimize_noninteracting(
    nuclei: &NucleiConfig,
    epsilon: f64,
    family: &TrialFamily,
) -> Result<NonInteractingResult> {
    minimize_scaled(nuclei, epsilon, 0.0, family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmot::comotion_cost_n2;

    fn hydrogen() -> RadialDensity {
        hydrogen_exact(1.0).unwrap().1
    }

    #[test]
    fn hydrogen_terms() {
        let h = hydrogen();
        assert!((h.total_mass() - 1.0).abs() < 1e-6);
        let t = kinetic(&h).unwrap();
        let u = u0(&h);
        assert!((t - 0.25).abs() < 1e-4, "{t}");
        assert!((u - 0.5).abs() < 1e-4, "{u}");
        assert!((t - u + 0.25).abs() < 1e-3);
        let (e2, d2) = hydrogen_exact(2.0).unwrap();
        assert_eq!(e2, -1.0);
        assert!((kinetic(&d2).unwrap() - 2.0 * u0(&d2) - e2).abs() < 1e-3);
    }

    #[test]
    fn kinetic_on_nonuniform_grid() {
        let radii: Vec<f64> = (0..=3000).map(|j| 40.0 * (j as f64 / 3000.0).powi(2)).collect();
        let m: Vec<f64> = radii.iter().map(|r| 0.5 * r * r * (-r).exp()).collect();
        let h = RadialDensity::new(radii, m, [0.0; 3]).unwrap();
        assert!((kinetic(&h).unwrap() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn scaling_of_terms() {
        let h = hydrogen();
        let (t, u) = (kinetic(&h).unwrap(), u0(&h));
        for s in [0.5, 2.0, 4.0] {
            let hs = h.scaled(s).unwrap();
            assert!((kinetic(&hs).unwrap() / t - s * s).abs() < 5e-3 * s * s);
            assert!((u0(&hs) / u - s).abs() < 5e-3 * s);
        }
    }

    #[test]
    fn potential_cases() {
        let h = Measure::Radial(hydrogen());
        let one = NucleiConfig::single(1.0).unwrap();
        assert!((potential(&h, &one) - 0.5).abs() < 1e-4);
        let far = NucleiConfig::new(vec![[100.0, 0.0, 0.0]], vec![2.0]).unwrap();
        assert!((potential(&h, &far) - 0.02).abs() < 2e-4);
        let atom = Measure::Discrete(crate::DiscreteMeasure::dirac([0.0; 3], 1.0).unwrap());
        assert_eq!(potential(&atom, &one), f64::INFINITY);
    }

    #[test]
    fn off_center_potential_matches_closed_form() {
        let h = hydrogen();
        let mix = HydrogenicMixture::single(1.0, 1.0).unwrap();
        for d in [0.3, 1.0, 2.5, 7.0] {
            let v = radial_potential_at(&h, &[0.0, d, 0.0]);
            assert!((v - mix.potential_at(d)).abs() < 1e-4, "{d}: {v}");
        }
    }

    #[test]
    fn report_identities() {
        let h = hydrogen();
        let one = NucleiConfig::single(1.0).unwrap();
        let p = EnergyParams::new(1.0, 0.0, 1).unwrap();
        let r = f_eps(&h, &one, &p, 0.0).unwrap();
        assert!((r.f_eps + 0.25).abs() < 1e-3);
        let p = EnergyParams::new(0.3, 0.5, 2).unwrap();
        let r = f_eps(&h, &one, &p, 0.2).unwrap();
        assert!((r.g_eps - 0.3 * r.f_eps).abs() < 1e-12);
        assert!(EnergyParams::new(0.0, 0.5, 2).is_err());
    }

    #[test]
    fn rescaling_identity() {
        let h = hydrogen();
        let corr = |r: &RadialDensity| comotion_cost_n2(r).map(|c| c.cost);
        let one = NucleiConfig::single(1.0).unwrap();
        for eps in [1.0, 0.5] {
            let p = EnergyParams::new(eps, 0.0, 2).unwrap();
            rescale_identity_check(&h, &one, &p, &corr).unwrap();
        }
        let two = NucleiConfig::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let p = EnergyParams::new(0.25, 0.5, 2).unwrap();
        let rep = rescale_identity_check(&h, &two, &p, &corr).unwrap();
        assert!(rep.difference <= rep.tolerance);
    }

    #[test]
    fn single_nucleus_noninteracting() {
        let one = NucleiConfig::single(1.0).unwrap();
        let r = minimize_noninteracting(&one, 0.01, &TrialFamily::default()).unwrap();
        assert!((r.value + 0.25).abs() < 1e-6, "{r:?}");
        assert!((r.spreads[0] - 0.03).abs() < 1e-4);
    }
}
