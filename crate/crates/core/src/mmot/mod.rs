//! Multi-marginal optimal transport with the Coulomb cost.

mod comotion;
mod entropic;

pub use comotion::{comotion_cost_n2, comotion_quantile_cost, radial_line_surrogate};
pub(crate) use comotion::inverse_cdf;
pub use entropic::{default_cost_cap, mmot_entropic};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lp::{self, LpOutcome, LpProblem};
use crate::measures::{dist, self_interaction, variance, DiscreteMeasure, Point3};
use crate::tolerances::{BOUNDS_SLACK, COINCIDENCE_EPS, LP_SIZE_CAP};

/// `Σ_{i<j} 1/|x_i − x_j|`, infinite on any coincidence.
pub fn coulomb_cost(points: &[Point3]) -> f64 {
    let mut c = 0.0;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = dist(&points[i], &points[j]);
            if d < COINCIDENCE_EPS {
                return f64::INFINITY;
            }
            c += 1.0 / d;
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactLp,
    Entropic,
    Comotion,
}

/// Sparse N-marginal coupling on support-index tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub n_marginals: usize,
    pub entries: Vec<(Vec<usize>, f64)>,
}

impl TransportPlan {
    pub fn empty(n_marginals: usize) -> Self {
        Self {
            n_marginals,
            entries: Vec::new(),
        }
    }

    /// Builds a plan from possibly repeated tuples, summing and sorting.
    pub fn from_entries(n_marginals: usize, entries: impl IntoIterator<Item = (Vec<usize>, f64)>) -> Self {
        let mut map: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (t, w) in entries {
            *map.entry(t).or_insert(0.0) += w;
        }
        Self {
            n_marginals,
            entries: map.into_iter().filter(|(_, w)| *w > 0.0).collect(),
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    /// Marginal `i` as a vector over `n_points` support indices.
    pub fn marginal(&self, i: usize, n_points: usize) -> Vec<f64> {
        let mut m = vec![0.0; n_points];
        for (t, w) in &self.entries {
            m[t[i]] += w;
        }
        m
    }

    /// Largest L¹ deviation of any marginal from `weights`.
    pub fn marginal_violation(&self, weights: &[f64]) -> f64 {
        (0..self.n_marginals)
            .map(|i| {
                self.marginal(i, weights.len())
                    .iter()
                    .zip(weights)
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn cost(&self, points: &[Point3]) -> f64 {
        self.entries
            .iter()
            .map(|(t, w)| {
                let tuple: Vec<Point3> = t.iter().map(|&k| points[k]).collect();
                w * coulomb_cost(&tuple)
            })
            .sum()
    }

    /// Average over all permutations of the marginals.
    pub fn symmetrized(&self) -> Self {
        let perms = permutations(self.n_marginals);
        let f = 1.0 / perms.len() as f64;
        Self::from_entries(
            self.n_marginals,
            self.entries.iter().flat_map(|(t, w)| {
                perms
                    .iter()
                    .map(move |p| (p.iter().map(|&k| t[k]).collect(), w * f))
            }),
        )
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                cur.push(k);
                rec(cur, used, out);
                cur.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmotResult {
    pub cost: f64,
    pub plan: TransportPlan,
    pub method: Method,
    pub gap_estimate: f64,
}

impl MmotResult {
    pub(crate) fn infinite(n: usize, method: Method) -> Self {
        Self {
            cost: f64::INFINITY,
            plan: TransportPlan::empty(n),
            method,
            gap_estimate: 0.0,
        }
    }
}

/// Enumerates coincidence-free index tuples over `support`, in lexicographic order.
pub(crate) fn finite_tuples(points: &[Point3], support: &[usize], n: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let size = (support.len() as u128).saturating_pow(n as u32);
    if size > LP_SIZE_CAP {
        return Err(Error::SizeExceeded {
            size,
            cap: LP_SIZE_CAP,
        });
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    let s = support.len();
    if s == 0 {
        return Ok(out);
    }
    loop {
        let tuple: Vec<usize> = idx.iter().map(|&k| support[k]).collect();
        let pts: Vec<Point3> = tuple.iter().map(|&k| points[k]).collect();
        let c = coulomb_cost(&pts);
        if c.is_finite() {
            out.push((tuple, c));
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < s {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Result of the exact LP together with the marginal potentials.
pub(crate) struct ExactSolution {
    pub result: MmotResult,
    /// `Σ_i y_{i,x}` per support point: a subgradient of ρ ↦ C(ρ).
    pub potential: Vec<f64>,
}

pub(crate) fn exact_with_potentials(rho: &DiscreteMeasure, n: usize) -> Result<ExactSolution> {
    if n < 2 {
        return Err(invalid(format!("need at least two marginals, got {n}")));
    }
    let mass = rho.total_mass();
    if !(mass > 0.0) {
        return Err(invalid("transport of a zero-mass measure"));
    }
    let points = rho.points();
    let weights = rho.weights();
    let support = rho.support();
    let tuples = finite_tuples(points, &support, n)?;
    let row_of: BTreeMap<usize, usize> = support.iter().enumerate().map(|(r, &k)| (k, r)).collect();
    let s = support.len();
    let problem = LpProblem {
        n_rows: n * s,
        columns: tuples
            .iter()
            .map(|(t, _)| t.iter().enumerate().map(|(i, k)| (i * s + row_of[k], 1.0)).collect())
            .collect(),
        costs: tuples.iter().map(|(_, c)| *c).collect(),
        rhs: (0..n).flat_map(|_| support.iter().map(|&k| weights[k])).collect(),
    };
    let sol = match lp::solve(&problem)? {
        LpOutcome::Infeasible => {
            return Ok(ExactSolution {
                result: MmotResult::infinite(n, Method::ExactLp),
                potential: vec![f64::INFINITY; rho.len()],
            })
        }
        LpOutcome::Optimal(sol) => sol,
    };
    let plan = TransportPlan::from_entries(
        n,
        tuples
            .iter()
            .zip(&sol.x)
            .filter(|(_, &x)| x > 0.0)
            .map(|((t, _), &x)| (t.clone(), x)),
    );
    let mut potential = vec![0.0; rho.len()];
    for (r, &k) in support.iter().enumerate() {
        potential[k] = (0..n).map(|i| sol.duals[i * s + r]).sum();
    }
    Ok(ExactSolution {
        result: MmotResult {
            cost: sol.objective,
            plan,
            method: Method::ExactLp,
            gap_estimate: 0.0,
        },
        potential,
    })
}

/// Globally optimal Coulomb transport of `ρ` onto itself by linear programming.
///
/// Coincident tuples are left out of the variable set. A measure that cannot
/// be coupled without coincidences (a single atom, or one atom heavier than
/// the rest can absorb) has infinite cost.
pub fn mmot_exact(rho: &DiscreteMeasure, n: usize) -> Result<MmotResult> {
    exact_with_potentials(rho, n).map(|s| s.result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub n_marginals: usize,
    pub mass: f64,
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
}

/// Checks the variance lower bound and the self-interaction upper bound.
pub fn check_bounds(rho: &DiscreteMeasure, n: usize, cost: f64) -> Result<BoundsReport> {
    if n < 2 {
        return Err(invalid(format!("need at least two marginals, got {n}")));
    }
    let mass = rho.total_mass();
    let var = variance(rho)?;
    let nn = (n * (n - 1)) as f64;
    let lower = if var > 0.0 {
        nn * mass * mass / (4.0 * var.sqrt())
    } else {
        f64::INFINITY
    };
    let upper = nn / (2.0 * mass) * self_interaction(rho);
    let report = BoundsReport {
        n_marginals: n,
        mass,
        variance: var,
        lower,
        upper,
        cost,
    };
    let below = if lower.is_infinite() {
        cost < f64::INFINITY
    } else {
        cost < lower - BOUNDS_SLACK
    };
    if below {
        return Err(Error::InvariantViolation(format!(
            "cost {cost} below the variance bound {lower}"
        )));
    }
    if upper.is_finite() && cost > upper + BOUNDS_SLACK {
        return Err(Error::InvariantViolation(format!(
            "cost {cost} above the self-interaction bound {upper}"
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(d: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![[0.0; 3], [d, 0.0, 0.0]], vec![0.5, 0.5]).unwrap()
    }

    fn triangle() -> DiscreteMeasure {
        let h = 3f64.sqrt() / 2.0;
        DiscreteMeasure::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]],
            vec![1.0 / 3.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn cost_function() {
        assert_eq!(coulomb_cost(&[[0.0; 3], [2.0, 0.0, 0.0]]), 0.5);
        let h = 3f64.sqrt() / 2.0;
        let c = coulomb_cost(&[[0.0; 3], [1.0, 0.0, 0.0], [0.5, h, 0.0]]);
        assert!((c - 3.0).abs() < 1e-14);
        assert_eq!(coulomb_cost(&[[1.0; 3], [1.0; 3]]), f64::INFINITY);
    }

    #[test]
    fn two_point_exact() {
        let r = mmot_exact(&pair(2.0), 2).unwrap();
        assert_eq!(r.cost, 0.5);
        assert_eq!(r.gap_estimate, 0.0);
        assert_eq!(r.plan.entries, vec![(vec![0, 1], 0.5), (vec![1, 0], 0.5)]);
    }

    #[test]
    fn single_atom_is_infinite() {
        let r = mmot_exact(&DiscreteMeasure::dirac([0.0; 3], 1.0).unwrap(), 2).unwrap();
        assert_eq!(r.cost, f64::INFINITY);
        let b = check_bounds(&DiscreteMeasure::dirac([0.0; 3], 1.0).unwrap(), 2, r.cost).unwrap();
        assert_eq!(b.lower, f64::INFINITY);
    }

    #[test]
    fn heavy_atom_is_infinite() {
        let rho = DiscreteMeasure::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![0.7, 0.3]).unwrap();
        assert_eq!(mmot_exact(&rho, 2).unwrap().cost, f64::INFINITY);
    }

    #[test]
    fn triangle_three_marginals() {
        let r = mmot_exact(&triangle(), 3).unwrap();
        assert!((r.cost - 3.0).abs() < 1e-12);
        assert!(r.plan.marginal_violation(triangle().weights()) < 1e-12);
        for (t, _) in &r.plan.entries {
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
        }
    }

    #[test]
    fn tight_lower_bound_for_pair() {
        let b = check_bounds(&pair(2.0), 2, 0.5).unwrap();
        assert_eq!(b.variance, 1.0);
        assert_eq!(b.lower, 0.5);
        assert!(check_bounds(&pair(2.0), 2, 0.4).is_err());
    }

    #[test]
    fn size_cap() {
        let pts: Vec<Point3> = (0..101).map(|i| [i as f64, 0.0, 0.0]).collect();
        let rho = DiscreteMeasure::new(pts, vec![1.0 / 101.0; 101]).unwrap();
        assert!(matches!(mmot_exact(&rho, 3), Err(Error::SizeExceeded { .. })));
    }

    #[test]
    fn symmetrized_plan_keeps_cost() {
        let pts = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [1.0, 1.0, 1.0]];
        let rho = DiscreteMeasure::new(pts.clone(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = mmot_exact(&rho, 2).unwrap();
        let sym = r.plan.symmetrized();
        assert!((sym.cost(&pts) - r.cost).abs() < 1e-12);
        assert!(sym.marginal_violation(rho.weights()) < 1e-12);
    }
}
