//! Log-domain multi-marginal Sinkhorn scaling.

use super::{finite_tuples, Method, MmotResult, TransportPlan};
use crate::error::{invalid, Error, Result};
use crate::measures::{dist, DiscreteMeasure};
use crate::tolerances::{ENTROPIC_CAP_FACTOR, SINKHORN_MAX_ITER, TOL_MARGINAL};

/// Default cap: a large multiple of the largest finite pair cost on the support.
pub fn default_cost_cap(rho: &DiscreteMeasure) -> f64 {
    ENTROPIC_CAP_FACTOR * max_pair_cost(rho)
}

fn max_pair_cost(rho: &DiscreteMeasure) -> f64 {
    let s = rho.support();
    let p = rho.points();
    let mut c: f64 = 0.0;
    for (a, &i) in s.iter().enumerate() {
        for &j in &s[a + 1..] {
            c = c.max(1.0 / dist(&p[i], &p[j]));
        }
    }
    c
}

fn logsumexp_update(acc: &mut (f64, f64), v: f64) {
    // acc = (max, Σ exp(· − max))
    if v > acc.0 {
        acc.1 = acc.1 * (acc.0 - v).exp() + 1.0;
        acc.0 = v;
    } else {
        acc.1 += (v - acc.0).exp();
    }
}

/// Entropically regularized transport with coincident tuples excluded and
/// remaining tuple costs capped at `cost_cap`.
///
/// The reported cost is the capped transport cost of the final plan; the gap
/// estimate is `reg·s·N·ln s` plus the mass on capped tuples times the cap.
pub fn mmot_entropic(rho: &DiscreteMeasure, n: usize, reg: f64, cost_cap: f64) -> Result<MmotResult> {
    if n < 2 {
        return Err(invalid(format!("need at least two marginals, got {n}")));
    }
    if !(reg > 0.0) || !reg.is_finite() {
        return Err(invalid(format!("regularization must be positive, got {reg}")));
    }
    if !(cost_cap >= max_pair_cost(rho)) {
        return Err(invalid(format!(
            "cost cap {cost_cap} below the largest pair cost {}",
            max_pair_cost(rho)
        )));
    }
    if !(rho.total_mass() > 0.0) {
        return Err(invalid("transport of a zero-mass measure"));
    }
    let support = rho.support();
    let s = support.len();
    let tuples = finite_tuples(rho.points(), &support, n)?;
    if tuples.is_empty() {
        return Ok(MmotResult::infinite(n, Method::Entropic));
    }
    let mut local = vec![usize::MAX; rho.len()];
    for (r, &k) in support.iter().enumerate() {
        local[k] = r;
    }
    let idx: Vec<Vec<usize>> = tuples.iter().map(|(t, _)| t.iter().map(|&k| local[k]).collect()).collect();
    let cost: Vec<f64> = tuples.iter().map(|(_, c)| c.min(cost_cap)).collect();
    let log_w: Vec<f64> = support.iter().map(|&k| rho.weights()[k].ln()).collect();
    let target: Vec<f64> = support.iter().map(|&k| rho.weights()[k]).collect();
    let mut phi = vec![vec![0.0; s]; n];

    let log_p = |phi: &Vec<Vec<f64>>, t: usize| -> f64 {
        let sum: f64 = idx[t].iter().enumerate().map(|(i, &x)| phi[i][x]).sum();
        (sum - cost[t]) / reg
    };

    let plan_of = |phi: &Vec<Vec<f64>>| -> Vec<f64> { (0..idx.len()).map(|t| log_p(phi, t).exp()).collect() };

    let violation_of = |p: &[f64]| -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let mut m = vec![0.0; s];
            for (t, w) in p.iter().enumerate() {
                m[idx[t][i]] += w;
            }
            let v: f64 = m.iter().zip(&target).map(|(a, b)| (a - b).abs()).sum();
            worst = worst.max(v);
        }
        worst
    };

    let finish = |p: &[f64]| -> MmotResult {
        let transport: f64 = p.iter().zip(&cost).map(|(w, c)| w * c).sum();
        let leaked: f64 = p
            .iter()
            .zip(&tuples)
            .filter(|(_, (_, c))| *c > cost_cap)
            .map(|(w, _)| w)
            .sum();
        let plan = TransportPlan::from_entries(
            n,
            tuples.iter().zip(p).filter(|(_, &w)| w > 0.0).map(|((t, _), &w)| (t.clone(), w)),
        );
        MmotResult {
            cost: transport,
            plan,
            method: Method::Entropic,
            gap_estimate: reg * s as f64 * n as f64 * (s as f64).ln() + leaked * cost_cap,
        }
    };

    let mut violation = f64::INFINITY;
    for _ in 0..SINKHORN_MAX_ITER {
        for i in 0..n {
            let mut acc = vec![(f64::NEG_INFINITY, 0.0); s];
            for t in 0..idx.len() {
                logsumexp_update(&mut acc[idx[t][i]], log_p(&phi, t));
            }
            for x in 0..s {
                let (mx, sum) = acc[x];
                if mx.is_finite() {
                    phi[i][x] += reg * (log_w[x] - (mx + sum.ln()));
                }
            }
        }
        let p = plan_of(&phi);
        violation = violation_of(&p);
        if violation < TOL_MARGINAL {
            return Ok(finish(&p));
        }
    }
    Err(Error::IterationLimit {
        iterations: SINKHORN_MAX_ITER,
        violation,
        last: Box::new(finish(&plan_of(&phi))),
    })
}
