//! Seeded multi-start Nelder–Mead.
//!
//! Each restart draws its starting point from a ChaCha stream selected by the
//! restart index, so results do not depend on thread scheduling.

use argmin::core::{CostFunction, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iters: u64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iters: 2000,
            seed: crate::tolerances::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// The best restart hit the iteration limit instead of converging.
    pub stagnated: bool,
}

struct Objective<'a, F> {
    f: &'a F,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Objective<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> Result<f64, argmin::core::Error> {
        let v = (self.f)(p);
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

fn run_one<F: Fn(&[f64]) -> f64>(f: &F, x0: Vec<f64>, step: &[f64], max_iters: u64) -> SearchResult {
    let mut simplex = vec![x0.clone()];
    for (i, s) in step.iter().enumerate() {
        let mut v = x0.clone();
        v[i] += s;
        simplex.push(v);
    }
    let fallback = || SearchResult {
        value: f(&x0),
        x: x0.clone(),
        stagnated: true,
    };
    let Ok(solver) = NelderMead::new(simplex).with_sd_tolerance(1e-12) else {
        return fallback();
    };
    let Ok(res) = Executor::new(Objective { f }, solver)
        .configure(|st| st.max_iters(max_iters))
        .run()
    else {
        return fallback();
    };
    let state = res.state();
    let stagnated = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::MaxItersReached)
    );
    match state.get_best_param() {
        Some(x) => SearchResult {
            x: x.clone(),
            value: state.get_best_cost(),
            stagnated,
        },
        None => fallback(),
    }
}

/// Minimizes `f` from `config.restarts` random starts inside `bounds`.
///
/// `bounds` only shape the starting points; the search itself is
/// unconstrained. Ties between restarts go to the lowest index.
pub fn minimize<F>(f: &F, bounds: &[(f64, f64)], config: &SearchConfig) -> SearchResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let step: Vec<f64> = bounds.iter().map(|(lo, hi)| 0.1 * (hi - lo)).collect();
    let runs: Vec<SearchResult> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let x0: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            run_one(f, x0, &step, config.max_iters)
        })
        .collect();
    runs.into_iter()
        .reduce(|best, r| if r.value < best.value { r } else { best })
        .expect("at least one restart")
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
