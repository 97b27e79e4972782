//! The dissociation limit `G(ρ) = Σ_k g_b(Z_k, α_k)`: electron allocation
//! over nuclei, the H₂ and heteronuclear case studies, and direct small-ε
//! minimization for comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::trial::{HydrogenicMixture, MolecularTrial};
use crate::functionals::{minimize_scaled, EnergyParams, TrialFamily};
use crate::gb::GbTable;
use crate::measures::{dist, DiscreteMeasure, NucleiConfig};
use crate::mmot::mmot_exact;
use crate::tolerances::{GB_NUM_TOL, TOL_MARGINAL, TOL_MASS};

/// Fraction of the electrons attached to each nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassAllocation {
    pub alphas: Vec<f64>,
}

impl MassAllocation {
    pub fn new(alphas: Vec<f64>, n: usize) -> Result<Self> {
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("allocations must lie in [0, 1]"));
        }
        let total: f64 = alphas.iter().sum();
        if total > 1.0 + TOL_MASS {
            return Err(invalid(format!("allocations sum to {total} > 1")));
        }
        if n == 2 && alphas.iter().filter(|a| **a > 0.5 + 1e-12).count() > 1 {
            return Err(invalid("with two electrons at most one nucleus can hold more than half"));
        }
        Ok(Self { alphas })
    }

    pub fn total(&self) -> f64 {
        self.alphas.iter().sum()
    }
}

fn check_tables(tables: &[GbTable]) -> Result<()> {
    let first = tables.first().ok_or_else(|| invalid("no tables"))?;
    if tables.iter().any(|t| t.b != first.b || t.n != first.n) {
        return Err(invalid("tables disagree on b or N"));
    }
    Ok(())
}

/// `Σ_k g_b(Z_k, α_k)` by piecewise-linear interpolation in one table per nucleus.
pub fn gamma_value(allocation: &MassAllocation, tables: &[GbTable]) -> Result<f64> {
    check_tables(tables)?;
    if tables.len() != allocation.alphas.len() {
        return Err(invalid(format!(
            "{} tables for {} nuclei",
            tables.len(),
            allocation.alphas.len()
        )));
    }
    allocation
        .alphas
        .iter()
        .zip(tables)
        .map(|(a, t)| t.value_at(*a))
        .sum()
}

/// Minimizes `Σ g_b(Z_k, α_k)` over `{α ≥ 0, Σα = 1}`.
///
/// Each table is convex and piecewise linear, so the minimum is reached by
/// filling the cheapest remaining segment first. Equal slopes go to the lower
/// nucleus index.
pub fn optimal_allocation(tables: &[GbTable]) -> Result<(MassAllocation, f64)> {
    check_tables(tables)?;
    for t in tables {
        t.validate()?;
    }
    let n = tables[0].n;
    if tables.len() == 1 {
        let alloc = MassAllocation::new(vec![1.0], n)?;
        let v = gamma_value(&alloc, tables)?;
        return Ok((alloc, v));
    }
    if tables.iter().any(|t| t.alphas[0] != 0.0) {
        return Err(invalid("tables must start at alpha = 0"));
    }
    let capacity: f64 = tables.iter().map(|t| t.alphas[t.alphas.len() - 1]).sum();
    if capacity < 1.0 - 1e-12 {
        return Err(invalid("tables cannot hold a unit of mass"));
    }
    let slope = |t: &GbTable, j: usize| (t.values[j + 1] - t.values[j]) / (t.alphas[j + 1] - t.alphas[j]);
    let mut next = vec![0usize; tables.len()];
    let mut alphas = vec![0.0; tables.len()];
    let mut left = 1.0;
    while left > 1e-15 {
        let mut pick: Option<(usize, f64)> = None;
        for (k, t) in tables.iter().enumerate() {
            if next[k] + 1 < t.alphas.len() {
                let s = slope(t, next[k]);
                if pick.is_none_or(|(_, best)| s < best - 1e-12) {
                    pick = Some((k, s));
                }
            }
        }
        let Some((k, _)) = pick else { break };
        let t = &tables[k];
        let len = t.alphas[next[k] + 1] - t.alphas[next[k]];
        let take = len.min(left);
        // whole segments land exactly on table nodes
        alphas[k] = if take == len { t.alphas[next[k] + 1] } else { alphas[k] + take };
        left -= take;
        next[k] += 1;
    }
    // exact unit total: absorb rounding into the last filled entry
    if let Some(k) = (0..alphas.len()).rev().find(|&k| alphas[k] > 0.0) {
        let others: f64 = (0..alphas.len()).filter(|&j| j != k).map(|j| alphas[j]).sum();
        alphas[k] = (1.0 - others).clamp(0.0, 1.0);
    }
    let alloc = MassAllocation::new(alphas, n)?;
    let v = gamma_value(&alloc, tables)?;
    Ok((alloc, v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H2Report {
    pub b: f64,
    pub allocation: MassAllocation,
    /// Minimum of `G`.
    pub gamma_min: f64,
    /// `4·g_b(1, ½)`, the physical limit energy.
    pub limit_energy: f64,
    pub hydrogen_reference: f64,
    pub difference: f64,
    /// `(ε, 2ε/|X₁ − X₂|)`, reported and never added to any energy.
    pub nuclear_terms: Vec<(f64, f64)>,
}

/// The H₂ bond dissociation: two unit charges, two electrons.
pub fn h2_study(b: f64, tables: &[GbTable], separation: f64, epsilons: &[f64]) -> Result<H2Report> {
    if tables.len() != 2 || tables.iter().any(|t| t.z != 1.0 || t.n != 2 || t.b != b) {
        return Err(invalid("H2 needs two Z = 1, N = 2 tables at the given b"));
    }
    if !(separation > 0.0) {
        return Err(invalid("nuclear separation must be positive"));
    }
    let (allocation, gamma_min) = optimal_allocation(tables)?;
    let limit_energy = 4.0 * tables[0].value_at(0.5)?;
    let hydrogen_reference = 2.0 * -0.25;
    Ok(H2Report {
        b,
        allocation,
        gamma_min,
        limit_energy,
        hydrogen_reference,
        difference: limit_energy - hydrogen_reference,
        nuclear_terms: epsilons.iter().map(|&e| (e, 2.0 * e / separation)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionStatus {
    Satisfied,
    Violated,
    /// The two sides differ by less than the solver tolerance.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteronuclearReport {
    pub z1: f64,
    pub z2: f64,
    pub b: f64,
    /// `g_b(Z₁, 1)`, an upper bound from the solver.
    pub gb_full: f64,
    /// `−(Z₁² + Z₂²)/8`, the value of the even split.
    pub even_split: f64,
    pub status: CriterionStatus,
    /// Mass on the heavier nucleus at the minimum.
    pub alpha_star: f64,
    pub value: f64,
    /// Without correlation all mass goes to the larger charge.
    pub alpha_uncorrelated: f64,
}

/// Whether the heavier nucleus gives up part of the second electron.
///
/// The comparison uses the table value at `α = 1`, which is an upper bound,
/// so a satisfied criterion is reported only beyond the solver tolerance.
pub fn heteronuclear_study(z1: f64, z2: f64, b: f64, tables: &[GbTable]) -> Result<HeteronuclearReport> {
    if !(z1 >= z2 && z2 > 0.0) {
        return Err(invalid(format!("need Z1 ≥ Z2 > 0, got {z1}, {z2}")));
    }
    if tables.len() != 2 || tables[0].z != z1 || tables[1].z != z2 || tables.iter().any(|t| t.n != 2) {
        return Err(invalid("need N = 2 tables for (Z1, Z2) in that order"));
    }
    let gb_full = tables[0].value_at(1.0)?;
    let even_split = -(z1 * z1 + z2 * z2) / 8.0;
    let margin = gb_full - even_split;
    let status = if margin > GB_NUM_TOL {
        CriterionStatus::Satisfied
    } else if margin < -GB_NUM_TOL {
        CriterionStatus::Violated
    } else {
        CriterionStatus::Inconclusive
    };
    let (alloc, value) = optimal_allocation(tables)?;
    Ok(HeteronuclearReport {
        z1,
        z2,
        b,
        gb_full,
        even_split,
        status,
        alpha_star: alloc.alphas[0],
        value,
        alpha_uncorrelated: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LimitBound {
    ClosedForm {
        value: f64,
        /// Table value at the same allocation, when tables were supplied.
        gamma_value: Option<f64>,
    },
    NotApplicable,
}

/// `−Σ α_k Z_k²/4`, valid when every `α_k ≤ 1/N`.
pub fn gamma_limit_lower_bound(
    allocation: &MassAllocation,
    charges: &[f64],
    n: usize,
    tables: Option<&[GbTable]>,
) -> Result<LimitBound> {
    if charges.len() != allocation.alphas.len() {
        return Err(invalid("one charge per allocation entry"));
    }
    if allocation.alphas.iter().any(|a| *a > 1.0 / n as f64 + 1e-12) {
        return Ok(LimitBound::NotApplicable);
    }
    let value: f64 = -allocation
        .alphas
        .iter()
        .zip(charges)
        .map(|(a, z)| a * z * z / 4.0)
        .sum::<f64>();
    let gamma = match tables {
        Some(t) => {
            let g = gamma_value(allocation, t)?;
            if (g - value).abs() > GB_NUM_TOL {
                return Err(Error::InvariantViolation(format!(
                    "table value {g} disagrees with the closed form {value}"
                )));
            }
            Some(g)
        }
        None => None,
    };
    Ok(LimitBound::ClosedForm {
        value,
        gamma_value: gamma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GepsReport {
    pub epsilon: f64,
    pub value: f64,
    pub mass_fractions: Vec<f64>,
    /// Mean radius of each nucleus' component in the original frame.
    pub spreads: Vec<f64>,
    /// `ε Σ Z_i Z_j / |X_i − X_j|`, kept out of `value`.
    pub nuclear_repulsion: f64,
    /// Correlation of the optimal trial and the exact LP on its coarse
    /// discretization, both in the rescaled frame.
    pub correlation: f64,
    pub correlation_lp: f64,
    pub stagnated: bool,
}

/// Exact two-marginal LP on a coarse point cloud of a molecular trial: each
/// component is cut into `shells` equal-mass quantile bins, each bin split
/// between the two points at its median radius along the first axis.
pub fn correlation_lp_check(trial: &MolecularTrial, shells: usize) -> Result<f64> {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (c, x) in trial.clusters.iter().zip(trial.nuclei.positions()) {
        let mass = c.mass();
        if mass <= 0.0 {
            continue;
        }
        let table = c.quantiles();
        let w = mass / shells as f64;
        for i in 0..shells {
            let r = table.quantile((i as f64 + 0.5) * w);
            for s in [-1.0, 1.0] {
                points.push([x[0] + s * r, x[1], x[2]]);
                weights.push(0.5 * w);
            }
        }
    }
    let cloud = DiscreteMeasure::new(points, weights)?;
    Ok(mmot_exact(&cloud, 2)?.cost)
}

fn nuclear_repulsion(nuclei: &NucleiConfig, epsilon: f64) -> f64 {
    let (x, z) = (nuclei.positions(), nuclei.charges());
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            s += z[i] * z[j] / dist(&x[i], &x[j]);
        }
    }
    epsilon * s
}

/// Direct minimization of `G_ε` over per-nucleus hydrogenic mixtures with
/// free masses and scales, one run per `ε`.
pub fn minimize_geps_direct(
    nuclei: &NucleiConfig,
    params: &EnergyParams,
    family: &TrialFamily,
    epsilons: &[f64],
) -> Result<Vec<GepsReport>> {
    params.validate()?;
    if params.n_electrons != 2 {
        return Err(invalid("direct minimization is implemented for N = 2"));
    }
    epsilons
        .par_iter()
        .map(|&eps| {
            let fit = minimize_scaled(nuclei, eps, params.b, family)?;
            let scaled: Vec<HydrogenicMixture> = fit.clusters.iter().map(|c| c.scaled(eps)).collect();
            let trial = MolecularTrial::new(nuclei.scaled(eps)?, scaled)?;
            Ok(GepsReport {
                epsilon: eps,
                value: fit.value,
                mass_fractions: fit.mass_fractions,
                spreads: fit.spreads,
                nuclear_repulsion: nuclear_repulsion(nuclei, eps),
                correlation: trial.correlation_n2()?,
                correlation_lp: correlation_lp_check(&trial, 4)?,
                stagnated: fit.stagnated,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMass {
    /// Indices of the points in the cluster.
    pub points: Vec<usize>,
    pub mass: f64,
    /// Plan mass with both electrons inside the cluster.
    pub within: f64,
    pub expected: f64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StayLocalReport {
    pub delta: f64,
    pub cost: f64,
    pub clusters: Vec<ClusterMass>,
    pub all_match: bool,
}

/// Single-linkage clusters at distance `2δ`.
fn clusters_of(rho: &DiscreteMeasure, delta: f64) -> Vec<Vec<usize>> {
    let pts = rho.points();
    let mut label: Vec<usize> = (0..pts.len()).collect();
    fn root(l: &mut [usize], mut i: usize) -> usize {
        while l[i] != i {
            l[i] = l[l[i]];
            i = l[i];
        }
        i
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if dist(&pts[i], &pts[j]) <= 2.0 * delta {
                let (a, b) = (root(&mut label, i), root(&mut label, j));
                label[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut roots: Vec<usize> = Vec::new();
    for i in 0..pts.len() {
        let r = root(&mut label, i);
        match roots.iter().position(|&x| x == r) {
            Some(g) => groups[g].push(i),
            None => {
                roots.push(r);
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Plan mass inside each cluster for an optimal two-marginal plan, against
/// `0` for clusters of mass at most ½ and `2α − 1` above.
pub fn staylocal_check(rho: &DiscreteMeasure, delta: f64, n: usize) -> Result<StayLocalReport> {
    if n != 2 {
        return Err(invalid("the within-cluster dichotomy is stated for N = 2"));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    let groups = clusters_of(rho, delta);
    let pts = rho.points();
    let mut sep = f64::INFINITY;
    for (a, ga) in groups.iter().enumerate() {
        for gb in &groups[a + 1..] {
            for &i in ga {
                for &j in gb {
                    sep = sep.min(dist(&pts[i], &pts[j]));
                }
            }
        }
    }
    if sep < 4.0 * delta {
        return Err(Error::ConfigurationRejected(format!(
            "clusters are {sep} apart, less than 4δ = {}",
            4.0 * delta
        )));
    }
    let plan = mmot_exact(rho, 2)?;
    let mut cluster_of = vec![0; pts.len()];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            cluster_of[i] = g;
        }
    }
    let mut within = vec![0.0; groups.len()];
    for (t, w) in &plan.plan.entries {
        if cluster_of[t[0]] == cluster_of[t[1]] {
            within[cluster_of[t[0]]] += w;
        }
    }
    let clusters: Vec<ClusterMass> = groups
        .into_iter()
        .zip(within)
        .map(|(members, within)| {
            let mass: f64 = members.iter().map(|&i| rho.weights()[i]).sum();
            let expected = if mass > 0.5 { 2.0 * mass - 1.0 } else { 0.0 };
            ClusterMass {
                points: members,
                mass,
                within,
                expected,
                matches: (within - expected).abs() <= TOL_MARGINAL,
            }
        })
        .collect();
    Ok(StayLocalReport {
        delta,
        cost: plan.cost,
        all_match: clusters.iter().all(|c| c.matches),
        clusters,
    })
}
