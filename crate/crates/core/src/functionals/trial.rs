//! Analytic trial densities: mixtures of hydrogenic profiles around each nucleus.
//!
//! A component of mass `w` and exponent `a` has density `w a³ e^{−a r}/(8π)`,
//! so `U₀ = w a/2` and, alone, `T = w a²/4`. Mixtures get their kinetic energy
//! by quadrature. Molecular trials place one mixture on each nucleus; their
//! energies are upper bounds: the kinetic term by subadditivity of `T` and the
//! correlation term by an explicit N = 2 plan.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{self, LpOutcome, LpProblem};
use crate::measures::{dist, NucleiConfig, Point3, RadialDensity};
use crate::mmot::{comotion_quantile_cost, inverse_cdf};

/// Gauss–Legendre nodes used for quantile integrals.
pub const QUANTILE_NODES: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydrogenicMixture {
    pub weights: Vec<f64>,
    pub exponents: Vec<f64>,
}

impl HydrogenicMixture {
    pub fn new(weights: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != exponents.len() {
            return Err(invalid("mixture needs matching nonempty weights and exponents"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("mixture weights must be finite and nonnegative"));
        }
        if exponents.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(invalid("mixture exponents must be finite and positive"));
        }
        Ok(Self { weights, exponents })
    }

    pub fn single(mass: f64, exponent: f64) -> Result<Self> {
        Self::new(vec![mass], vec![exponent])
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights
            .iter()
            .zip(&self.exponents)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, a)| (*w, *a))
    }

    /// `∫ ρ(x)/|x| dx` about the mixture center.
    pub fn u0(&self) -> f64 {
        self.terms().map(|(w, a)| w * a / 2.0).sum()
    }

    /// `∫ ρ(x)/|x − X| dx` for a point `X` at distance `d` from the center.
    pub fn potential_at(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return self.u0();
        }
        self.terms()
            .map(|(w, a)| {
                let ad = a * d;
                // 1/d − e^{−ad}(1/d + a/2), expanded near 0 to avoid cancellation
                if ad < 1e-4 {
                    w * a * (0.5 - ad * ad / 12.0)
                } else {
                    w * (1.0 / d - (-ad).exp() * (1.0 / d + a / 2.0))
                }
            })
            .sum()
    }

    /// Mass inside the ball of radius `r`.
    pub fn cdf(&self, r: f64) -> f64 {
        self.terms()
            .map(|(w, a)| {
                let x = a * r;
                w * (1.0 - (-x).exp() * (1.0 + x + 0.5 * x * x))
            })
            .sum()
    }

    /// Radial mass density `4πr²ρ(r)`.
    pub fn mass_density(&self, r: f64) -> f64 {
        self.terms().map(|(w, a)| 0.5 * w * a * a * a * r * r * (-a * r).exp()).sum()
    }

    fn exponent_range(&self) -> (f64, f64) {
        let lo = self.terms().map(|(_, a)| a).fold(f64::INFINITY, f64::min);
        let hi = self.terms().map(|(_, a)| a).fold(0.0, f64::max);
        (lo, hi)
    }

    /// `∫|∇√ρ|²`; closed form for one component, log-grid quadrature otherwise.
    pub fn kinetic(&self) -> f64 {
        let terms: Vec<(f64, f64)> = self.terms().collect();
        match terms.len() {
            0 => 0.0,
            1 => terms[0].0 * terms[0].1 * terms[0].1 / 4.0,
            _ => {
                let (amin, amax) = self.exponent_range();
                let (x0, x1) = ((1e-7 / amax).ln(), (80.0 / amin).ln());
                let panels = 160;
                let q = GaussLegendre::new(8.try_into().expect("nonzero"));
                let h = (x1 - x0) / panels as f64;
                let logc: Vec<f64> = terms.iter().map(|(w, a)| (w * a.powi(3) / (8.0 * PI)).ln()).collect();
                let integrand = |x: f64| {
                    let r = x.exp();
                    let t: Vec<f64> = terms.iter().zip(&logc).map(|((_, a), c)| c - a * r).collect();
                    let mx = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let (mut s0, mut s1) = (0.0, 0.0);
                    for ((_, a), ti) in terms.iter().zip(&t) {
                        let e = (ti - mx).exp();
                        s0 += e;
                        s1 += a * e;
                    }
                    // π r² (ρ')²/ρ, times dr/dx = r
                    PI * r * r * r * mx.exp() * s1 * s1 / s0
                };
                (0..panels)
                    .map(|k| q.integrate(x0 + k as f64 * h, x0 + (k + 1) as f64 * h, integrand))
                    .sum()
            }
        }
    }

    /// Push-forward under `x ↦ x/s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            weights: self.weights.clone(),
            exponents: self.exponents.iter().map(|a| a * s).collect(),
        }
    }

    /// Mass-weighted mean radius.
    pub fn mean_radius(&self) -> f64 {
        let m = self.mass();
        if m <= 0.0 {
            return 0.0;
        }
        self.terms().map(|(w, a)| 3.0 * w / a).sum::<f64>() / m
    }

    pub fn quantiles(&self) -> QuantileTable {
        let (amin, amax) = self.exponent_range();
        let n = 3000;
        let (x0, x1) = ((1e-6 / amax).ln(), (80.0 / amin).ln());
        let mut r = vec![0.0];
        let mut f = vec![0.0];
        for k in 0..=n {
            let rk = (x0 + (x1 - x0) * k as f64 / n as f64).exp();
            r.push(rk);
            f.push(self.cdf(rk));
        }
        QuantileTable {
            r,
            f,
            mass: self.mass(),
        }
    }

    pub fn to_radial(&self, r_max: f64, intervals: usize, center: Point3) -> Result<RadialDensity> {
        RadialDensity::from_fn(r_max, intervals, center, |r| self.mass_density(r))
    }
}

/// Tabulated radial CDF with piecewise-linear inversion.
#[derive(Debug, Clone)]
pub struct QuantileTable {
    r: Vec<f64>,
    f: Vec<f64>,
    mass: f64,
}

impl QuantileTable {
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn quantile(&self, t: f64) -> f64 {
        inverse_cdf(&self.r, &self.f, t)
    }

    /// Co-motion cost of the portion made of the innermost mass `inner` and
    /// the outermost mass `m − inner`.
    pub fn portion_cost(&self, m: f64, inner: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        let inner = inner.clamp(0.0, m);
        let shift = self.mass - m;
        let q = |t: f64| {
            if t < inner {
                self.quantile(t)
            } else {
                self.quantile(t + shift)
            }
        };
        comotion_quantile_cost(m, &q, QUANTILE_NODES)
    }
}

/// Average of `1/|x − y|` for `x`, `y` uniform on spheres of radii `r`, `s`
/// whose centers are `d > 0` apart.
pub fn shell_pair_kernel(r: f64, s: f64, d: f64) -> f64 {
    if r <= 0.0 {
        return 1.0 / d.max(s);
    }
    // distance from x to the second center ranges over [lo, hi] with
    // density t/(2rd); the inner average is 1/max(t, s)
    let lo = (d - r).abs();
    let hi = d + r;
    let integral = if s <= lo {
        hi - lo
    } else if s >= hi {
        (hi * hi - lo * lo) / (2.0 * s)
    } else {
        (s * s - lo * lo) / (2.0 * s) + (hi - s)
    };
    integral / (2.0 * r * d)
}

/// One hydrogenic mixture per nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MolecularTrial {
    pub nuclei: NucleiConfig,
    pub clusters: Vec<HydrogenicMixture>,
}

/// Terms of `T + bC − U` for a molecular trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialEnergy {
    pub kinetic: f64,
    pub correlation: f64,
    pub potential: f64,
    pub value: f64,
}

impl MolecularTrial {
    pub fn new(nuclei: NucleiConfig, clusters: Vec<HydrogenicMixture>) -> Result<Self> {
        if nuclei.len() != clusters.len() {
            return Err(invalid("one mixture per nucleus required"));
        }
        let mass: f64 = clusters.iter().map(|c| c.mass()).sum();
        if mass > 1.0 + crate::tolerances::TOL_MASS {
            return Err(invalid(format!("trial mass {mass} exceeds 1")));
        }
        Ok(Self { nuclei, clusters })
    }

    pub fn masses(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.mass()).collect()
    }

    pub fn kinetic(&self) -> f64 {
        self.clusters.iter().map(|c| c.kinetic()).sum()
    }

    pub fn potential(&self) -> f64 {
        let x = self.nuclei.positions();
        let z = self.nuclei.charges();
        let mut u = 0.0;
        for k in 0..x.len() {
            for (j, c) in self.clusters.iter().enumerate() {
                u += z[k] * c.potential_at(dist(&x[k], &x[j]));
            }
        }
        u
    }

    /// Cost of an explicit two-marginal plan: a heavy cluster (more than half
    /// of the total mass) keeps its outermost excess paired by co-motion, and
    /// everything else is paired across clusters with product couplings whose
    /// cluster-level masses solve a small transport problem.
    pub fn correlation_n2(&self) -> Result<f64> {
        let masses = self.masses();
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Ok(0.0);
        }
        let m = masses.len();
        let tables: Vec<QuantileTable> = self.clusters.iter().map(|c| c.quantiles()).collect();
        let heavy = (0..m).find(|&k| masses[k] > 0.5 * total + 1e-15);
        let mut local = 0.0;
        // remaining mass per cluster, taken from the inside out
        let mut beta = masses.clone();
        if let Some(h) = heavy {
            let excess = 2.0 * masses[h] - total;
            local = tables[h].portion_cost(excess, 0.0);
            beta[h] = total - masses[h];
        }
        let active: Vec<usize> = (0..m).filter(|&k| beta[k] > 1e-15).collect();
        if active.len() < 2 {
            return Ok(local);
        }
        let gl = GaussLegendre::new(16.try_into().expect("nonzero"));
        let nodes = |k: usize| -> Vec<(f64, f64)> {
            let b = beta[k];
            gl.iter()
                .map(|(x, w)| {
                    let t = 0.5 * b * (x + 1.0);
                    (tables[k].quantile(t), 0.5 * w)
                })
                .collect()
        };
        let node_sets: Vec<Vec<(f64, f64)>> = (0..m).map(nodes).collect();
        let x = self.nuclei.positions();
        let mut pairs = Vec::new();
        for (ia, &k) in active.iter().enumerate() {
            for &l in &active[ia + 1..] {
                let d = dist(&x[k], &x[l]);
                let mut e = 0.0;
                for &(r, wr) in &node_sets[k] {
                    for &(s, ws) in &node_sets[l] {
                        e += wr * ws * shell_pair_kernel(r, s, d);
                    }
                }
                pairs.push((k, l, e));
            }
        }
        let cross = if active.len() == 2 {
            2.0 * beta[active[0]].min(beta[active[1]]) * pairs[0].2
        } else {
            let row: Vec<usize> = {
                let mut row = vec![usize::MAX; m];
                for (i, &k) in active.iter().enumerate() {
                    row[k] = i;
                }
                row
            };
            let problem = LpProblem {
                n_rows: active.len(),
                columns: pairs.iter().map(|&(k, l, _)| vec![(row[k], 1.0), (row[l], 1.0)]).collect(),
                costs: pairs.iter().map(|&(_, _, e)| 2.0 * e).collect(),
                rhs: active.iter().map(|&k| beta[k]).collect(),
            };
            match lp::solve(&problem)? {
                LpOutcome::Optimal(s) => s.objective,
                LpOutcome::Infeasible => {
                    return Err(Error::InvariantViolation(
                        "cluster pairing infeasible despite no heavy cluster".into(),
                    ))
                }
            }
        };
        Ok(local + cross)
    }

    pub fn energy(&self, b: f64) -> Result<TrialEnergy> {
        let kinetic = self.kinetic();
        let potential = self.potential();
        let correlation = if b > 0.0 { self.correlation_n2()? } else { 0.0 };
        Ok(TrialEnergy {
            kinetic,
            correlation,
            potential,
            value: kinetic + b * correlation - potential,
        })
    }
}
