//! Antipodal co-motion for two-marginal transport of radial densities.
//!
//! A radial shell at radius `r` is paired with the diametrically opposite
//! shell at `a(r)`, where `F(a(r)) = ‖ρ‖ − F(r)` for the radial CDF `F`. The
//! map is measure preserving and an involution, so its cost is always an
//! upper bound for the transport cost.

use gauss_quad::GaussLegendre;

use super::{Method, MmotResult, TransportPlan};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, RadialDensity};

/// Piecewise-linear inverse of a nondecreasing tabulated CDF.
pub(crate) fn inverse_cdf(radii: &[f64], cdf: &[f64], t: f64) -> f64 {
    let last = cdf.len() - 1;
    if t <= 0.0 {
        return 0.0;
    }
    if t >= cdf[last] {
        return radii[last];
    }
    // first node with cdf ≥ t
    let j = cdf.partition_point(|&v| v < t);
    let (f0, f1) = (cdf[j - 1], cdf[j]);
    if f1 <= f0 {
        return radii[j];
    }
    radii[j - 1] + (t - f0) / (f1 - f0) * (radii[j] - radii[j - 1])
}

/// `∫₀^m dt / (R(t) + R(m − t))` for a quantile function `R` of a radial
/// measure of mass `m`, by Gauss–Legendre on the symmetric half interval.
pub fn comotion_quantile_cost(mass: f64, quantile: &dyn Fn(f64) -> f64, nodes: usize) -> f64 {
    if mass <= 0.0 {
        return 0.0;
    }
    let q = GaussLegendre::new(nodes.max(2).try_into().expect("nonzero node count"));
    2.0 * q.integrate(0.0, 0.5 * mass, |t| 1.0 / (quantile(t) + quantile(mass - t)))
}

/// Co-motion cost of a radial density (1-homogeneous in the mass).
pub fn comotion_cost_n2(rho: &RadialDensity) -> Result<MmotResult> {
    let radii = rho.radii();
    let m = rho.mass_density();
    let cdf = rho.cdf();
    let mass = *cdf.last().expect("nonempty grid");
    if !(mass > 0.0) {
        return Err(Error::SingularDensity("radial density carries no mass".into()));
    }
    let partner: Vec<f64> = cdf.iter().map(|&f| inverse_cdf(radii, &cdf, mass - f)).collect();
    if partner[0] <= 0.0 {
        return Err(Error::SingularDensity("all mass sits at the center".into()));
    }
    let integrand: Vec<f64> = (0..radii.len())
        .map(|j| m[j] / (radii[j] + partner[j]))
        .collect();
    let cost = crate::measures::trapezoid(radii, &integrand);

    let last = radii.len() - 1;
    let plan = TransportPlan::from_entries(
        2,
        (0..radii.len()).filter(|&j| m[j] > 0.0).map(|j| {
            let lo = radii[j.saturating_sub(1)];
            let hi = radii[(j + 1).min(last)];
            let k = radii
                .partition_point(|&r| r < partner[j])
                .min(last);
            (vec![j, k], 0.5 * (hi - lo) * m[j])
        }),
    );
    Ok(MmotResult {
        cost,
        plan,
        method: Method::Comotion,
        gap_estimate: 0.0,
    })
}

/// Equal-mass quantile bins of a radial density, each split between the two
/// points `center ± r e_z` at the bin's median radius. The exact LP on this
/// cloud is a coarse check of the co-motion cost.
pub fn radial_line_surrogate(rho: &RadialDensity, nodes: usize) -> Result<DiscreteMeasure> {
    let cdf = rho.cdf();
    let mass = *cdf.last().expect("nonempty grid");
    if !(mass > 0.0) || nodes == 0 {
        return Err(Error::SingularDensity("nothing to discretize".into()));
    }
    let c = rho.center();
    let w = mass / nodes as f64;
    let mut points = Vec::with_capacity(2 * nodes);
    for i in 0..nodes {
        let r = inverse_cdf(rho.radii(), &cdf, (i as f64 + 0.5) * w);
        points.push([c[0], c[1], c[2] + r]);
        points.push([c[0], c[1], c[2] - r]);
    }
    DiscreteMeasure::new(points, vec![0.5 * w; 2 * nodes])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RadialDensity;

    fn hydrogen() -> RadialDensity {
        RadialDensity::from_fn(40.0, 4000, [0.0; 3], |r| r * r * (-r).exp() / 2.0).unwrap()
    }

    #[test]
    fn thin_shell() {
        let (r0, w) = (2.0, 0.01);
        let shell = RadialDensity::from_fn(10.0, 20_000, [0.0; 3], |r| {
            let x = (r - r0) / w;
            (-0.5 * x * x).exp() / (w * (2.0 * std::f64::consts::PI).sqrt())
        })
        .unwrap();
        let c = comotion_cost_n2(&shell).unwrap().cost;
        assert!((c - 0.25).abs() < 1e-4, "{c}");
    }

    #[test]
    fn grid_and_quantile_forms_agree() {
        let h = hydrogen();
        let c = comotion_cost_n2(&h).unwrap().cost;
        let cdf = h.cdf();
        let q = |t: f64| inverse_cdf(h.radii(), &cdf, t);
        let cq = comotion_quantile_cost(h.total_mass(), &q, 400);
        assert!((c - cq).abs() < 1e-5, "{c} vs {cq}");
    }

    #[test]
    fn homogeneous_in_mass() {
        let h = hydrogen();
        let c = comotion_cost_n2(&h).unwrap().cost;
        let c3 = comotion_cost_n2(&h.times(0.3).unwrap()).unwrap().cost;
        assert!((c3 - 0.3 * c).abs() < 1e-12);
    }

    #[test]
    fn scaling() {
        let h = hydrogen();
        let c = comotion_cost_n2(&h).unwrap().cost;
        let c2 = comotion_cost_n2(&h.scaled(2.0).unwrap()).unwrap().cost;
        assert!((c2 - 2.0 * c).abs() < 1e-6, "{c2} vs {}", 2.0 * c);
    }

    #[test]
    fn exact_lp_on_line_surrogate() {
        let h = hydrogen();
        let c = comotion_cost_n2(&h).unwrap().cost;
        let lp = crate::mmot::mmot_exact(&radial_line_surrogate(&h, 40).unwrap(), 2).unwrap().cost;
        assert!((lp - c).abs() < 0.01 * c, "{lp} vs {c}");
    }

    #[test]
    fn empty_density_is_singular() {
        let z = RadialDensity::from_fn(1.0, 10, [0.0; 3], |_| 0.0).unwrap();
        assert!(matches!(comotion_cost_n2(&z), Err(Error::SingularDensity(_))));
    }
}
