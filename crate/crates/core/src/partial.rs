//! Fractional transport `C(ρ, m) = min{C(μ) : 0 ≤ μ ≤ ρ, ‖μ‖ = m}` and the
//! relaxed envelope built from it.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lp::{self, LpOutcome, LpProblem};
use crate::measures::{dist, norm, sub, DiscreteMeasure, Point3};
use crate::mmot::{finite_tuples, TransportPlan};
use crate::tolerances::{MERGE_DISTANCE, TOL_MASS};

/// Optimal sub-measure and plan of a fractional transport problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialResult {
    pub cost: f64,
    pub mu: DiscreteMeasure,
    pub plan: TransportPlan,
}

/// Joint LP over the sub-measure `μ` and its N-marginal plan.
pub fn partial_transport(rho: &DiscreteMeasure, m: f64, n: usize) -> Result<PartialResult> {
    if n < 2 {
        return Err(invalid(format!("need at least two marginals, got {n}")));
    }
    let mass = rho.total_mass();
    if !(m >= 0.0) || m > mass + TOL_MASS {
        return Err(invalid(format!("partial mass {m} outside [0, {mass}]")));
    }
    let m = m.min(mass);
    if m == 0.0 {
        return Ok(PartialResult {
            cost: 0.0,
            mu: DiscreteMeasure::new(rho.points().to_vec(), vec![0.0; rho.len()])?,
            plan: TransportPlan::empty(n),
        });
    }
    let support = rho.support();
    let s = support.len();
    let tuples = finite_tuples(rho.points(), &support, n)?;
    let mut local = vec![usize::MAX; rho.len()];
    for (r, &k) in support.iter().enumerate() {
        local[k] = r;
    }
    // rows: [coupling i·s + x] [mass n·s] [cap n·s + 1 + x]
    let mass_row = n * s;
    let cap_row = |x: usize| n * s + 1 + x;
    let mut columns: Vec<Vec<(usize, f64)>> = tuples
        .iter()
        .map(|(t, _)| t.iter().enumerate().map(|(i, &k)| (i * s + local[k], 1.0)).collect())
        .collect();
    let mut costs: Vec<f64> = tuples.iter().map(|(_, c)| *c).collect();
    let mu_offset = columns.len();
    for x in 0..s {
        let mut col: Vec<(usize, f64)> = (0..n).map(|i| (i * s + x, -1.0)).collect();
        col.push((mass_row, 1.0));
        col.push((cap_row(x), 1.0));
        columns.push(col);
        costs.push(0.0);
    }
    for x in 0..s {
        columns.push(vec![(cap_row(x), 1.0)]);
        costs.push(0.0);
    }
    let mut rhs = vec![0.0; n * s];
    rhs.push(m);
    rhs.extend(support.iter().map(|&k| rho.weights()[k]));
    let problem = LpProblem {
        n_rows: n * s + 1 + s,
        columns,
        costs,
        rhs,
    };
    match lp::solve(&problem)? {
        LpOutcome::Infeasible => Ok(PartialResult {
            cost: f64::INFINITY,
            mu: DiscreteMeasure::new(rho.points().to_vec(), vec![0.0; rho.len()])?,
            plan: TransportPlan::empty(n),
        }),
        LpOutcome::Optimal(sol) => {
            let mut mu_w = vec![0.0; rho.len()];
            for (x, &k) in support.iter().enumerate() {
                mu_w[k] = sol.x[mu_offset + x].min(rho.weights()[k]);
            }
            let plan = TransportPlan::from_entries(
                n,
                tuples
                    .iter()
                    .zip(&sol.x)
                    .filter(|(_, &x)| x > 0.0)
                    .map(|((t, _), &x)| (t.clone(), x)),
            );
            Ok(PartialResult {
                cost: sol.objective,
                mu: DiscreteMeasure::new(rho.points().to_vec(), mu_w)?,
                plan,
            })
        }
    }
}

pub fn partial_cost(rho: &DiscreteMeasure, m: f64, n: usize) -> Result<f64> {
    partial_transport(rho, m, n).map(|r| r.cost)
}

fn check_subprobability(rho: &DiscreteMeasure) -> Result<f64> {
    let mass = rho.total_mass();
    if mass > 1.0 + TOL_MASS {
        return Err(invalid(format!("mass {mass} exceeds 1")));
    }
    Ok(mass)
}

/// Mass of the sub-measure entering the envelope formula for N marginals.
pub fn envelope_mass(mass: f64, n: usize) -> f64 {
    let nf = n as f64;
    (nf / (nf - 1.0) * (mass - 1.0 / nf).max(0.0)).min(mass)
}

/// Envelope for two marginals: `C(ρ, max(0, 2‖ρ‖ − 1))`.
pub fn relaxed_envelope_n2(rho: &DiscreteMeasure) -> Result<f64> {
    relaxed_envelope_upper(rho, 2)
}

/// `C(ρ, (N/(N−1))·max(0, ‖ρ‖ − 1/N))`: exact envelope for N = 2, an upper
/// bound for it when N ≥ 3.
pub fn relaxed_envelope_upper(rho: &DiscreteMeasure, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("need at least two marginals, got {n}")));
    }
    let mass = check_subprobability(rho)?;
    partial_cost(rho, envelope_mass(mass, n), n)
}

/// `ρ + Σ_k τ_{n ξ_k}(ρ − μ)`: copies of the excess pushed far away.
///
/// The number of marginals is `directions.len() + 1`.
pub fn translated_copies(
    rho: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    n: usize,
    directions: &[Point3],
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(invalid("translation index must be positive"));
    }
    if directions.is_empty() {
        return Err(invalid("need at least one direction"));
    }
    for (i, d) in directions.iter().enumerate() {
        if norm(d) < MERGE_DISTANCE {
            return Err(invalid(format!("direction {i} is zero")));
        }
        for (j, e) in directions.iter().enumerate().skip(i + 1) {
            if dist(d, e) < MERGE_DISTANCE {
                return Err(invalid(format!("directions {i} and {j} coincide")));
            }
        }
    }
    let nu = excess(rho, mu)?;
    let support = nu.support();
    let nu = DiscreteMeasure::new(
        support.iter().map(|&k| nu.points()[k]).collect(),
        support.iter().map(|&k| nu.weights()[k]).collect(),
    )?;
    let mass = rho.total_mass() + directions.len() as f64 * nu.total_mass();
    if mass > 1.0 + TOL_MASS {
        return Err(invalid(format!("translated copies would carry mass {mass} > 1")));
    }
    let mut out = rho.clone();
    for d in directions {
        let shift = [d[0] * n as f64, d[1] * n as f64, d[2] * n as f64];
        out = out.plus(&nu.translated(&shift))?;
    }
    DiscreteMeasure::new(out.points().to_vec(), out.weights().to_vec())
}

/// `ρ − μ`, requiring `0 ≤ μ ≤ ρ` on the support of `ρ`.
pub fn excess(rho: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    let mut w = rho.weights().to_vec();
    for (p, &wm) in mu.points().iter().zip(mu.weights()) {
        if wm == 0.0 {
            continue;
        }
        let k = rho
            .points()
            .iter()
            .position(|q| dist(p, q) < MERGE_DISTANCE)
            .ok_or_else(|| invalid("μ charges a point outside the support of ρ"))?;
        w[k] -= wm;
        if w[k] < -TOL_MASS {
            return Err(invalid("μ exceeds ρ"));
        }
        w[k] = w[k].max(0.0);
    }
    DiscreteMeasure::new(rho.points().to_vec(), w)
}

/// Axis-aligned directions, longer than the diameter of `ρ`, one per extra marginal.
pub fn default_directions(rho: &DiscreteMeasure, n_marginals: usize) -> Vec<Point3> {
    let len = rho.diameter() + 1.0;
    (0..n_marginals.saturating_sub(1))
        .map(|k| {
            let mut v = [0.0; 3];
            v[k % 3] = if (k / 3) % 2 == 0 { len } else { -len } * (1 + k / 6) as f64;
            v
        })
        .collect()
}

/// Constant `K` of the excess estimate `C(ρ_n) − C(μ) ≲ K/n`, namely
/// `N Σ_{i<j} ‖ν‖/|ξ_i − ξ_j|` with `ξ_1 = 0`.
pub fn copies_excess_constant(nu_mass: f64, directions: &[Point3]) -> f64 {
    let mut xi = vec![[0.0; 3]];
    xi.extend_from_slice(directions);
    let nm = xi.len() as f64;
    let mut k = 0.0;
    for i in 0..xi.len() {
        for j in i + 1..xi.len() {
            k += nu_mass / norm(&sub(&xi[i], &xi[j]));
        }
    }
    nm * k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mmot::mmot_exact;

    fn lopsided(scale: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![[0.0; 3], [2.0, 0.0, 0.0]], vec![0.6 * scale, 0.4 * scale]).unwrap()
    }

    #[test]
    fn zero_mass_is_free() {
        assert_eq!(partial_cost(&lopsided(1.0), 0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn balanced_submeasure() {
        let r = partial_transport(&lopsided(1.0), 0.2, 2).unwrap();
        assert!((r.cost - 0.1).abs() < 1e-12);
        assert!((r.mu.weights()[0] - 0.1).abs() < 1e-12);
        assert!((r.mu.weights()[1] - 0.1).abs() < 1e-12);
        for (t, _) in &r.plan.entries {
            assert_ne!(t[0], t[1]);
        }
    }

    #[test]
    fn full_mass_is_transport() {
        let rho = DiscreteMeasure::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]],
            vec![0.3, 0.3, 0.4],
        )
        .unwrap();
        let full = partial_cost(&rho, 1.0, 2).unwrap();
        assert!((full - mmot_exact(&rho, 2).unwrap().cost).abs() < 1e-12);
        assert!(partial_cost(&rho, 1.1, 2).is_err());
        assert!(partial_cost(&rho, -0.1, 2).is_err());
    }

    #[test]
    fn envelopes() {
        // a probability with an atom above one half has infinite cost and envelope
        assert_eq!(relaxed_envelope_n2(&lopsided(1.0)).unwrap(), f64::INFINITY);
        // the mass-0.6 version needs a sub-measure of mass 0.2
        assert!((relaxed_envelope_n2(&lopsided(0.6)).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(relaxed_envelope_n2(&lopsided(0.5)).unwrap(), 0.0);
        assert_eq!(relaxed_envelope_upper(&lopsided(0.3), 3).unwrap(), 0.0);
        assert!((envelope_mass(0.6, 3) - 0.4).abs() < 1e-15);
        let rho = lopsided(0.8);
        assert_eq!(relaxed_envelope_upper(&rho, 2).unwrap(), relaxed_envelope_n2(&rho).unwrap());
    }

    #[test]
    fn copies_of_nothing() {
        let rho = lopsided(0.6);
        let c = translated_copies(&rho, &rho, 10, &default_directions(&rho, 2)).unwrap();
        assert_eq!(c, rho);
    }

    #[test]
    fn copies_approach_envelope() {
        let rho = lopsided(0.6);
        let r = partial_transport(&rho, 0.2, 2).unwrap();
        let dirs = default_directions(&rho, 2);
        let nu = excess(&rho, &r.mu).unwrap();
        let k = copies_excess_constant(nu.total_mass(), &dirs);
        let mut prev = f64::INFINITY;
        for n in [10, 20, 40] {
            let rn = translated_copies(&rho, &r.mu, n, &dirs).unwrap();
            assert!((rn.total_mass() - 1.0).abs() < 1e-12);
            let excess = mmot_exact(&rn, 2).unwrap().cost - 0.1;
            assert!(excess > 0.0 && excess < prev);
            assert!(excess <= 1.2 * k / n as f64, "{excess} vs {}", k / n as f64);
            prev = excess;
        }
    }

    #[test]
    fn rejects_bad_copies() {
        let rho = lopsided(0.6);
        let too_big = DiscreteMeasure::dirac([0.0; 3], 0.5).unwrap();
        assert!(translated_copies(&rho, &too_big, 10, &[[3.0, 0.0, 0.0]]).is_err());
        assert!(translated_copies(&rho, &rho, 10, &[[0.0; 3]]).is_err());
        let heavy = lopsided(1.0);
        let small = DiscreteMeasure::dirac([0.0; 3], 0.1).unwrap();
        assert!(translated_copies(&heavy, &small, 10, &[[3.0, 0.0, 0.0]]).is_err());
    }
}
