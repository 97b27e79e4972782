//! The one-nucleus energy `g_b(Z, α)` with fractional mass and fractional
//! correlation, its ball-constrained variant, and tabulation.
//!
//! For N = 2 the value is `inf_{‖ρ‖=α} T(ρ) + bC(ρ, 2α−1) − Z U₀(ρ)`. Because
//! `T` scales quadratically and the other terms linearly under dilations,
//! the scale can be optimized in closed form:
//! `g_b = −¼ sup (Z U₀ − bC(ρ, 2α−1))₊² / T`, leaving only shape parameters.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functionals::trial::{HydrogenicMixture, QuantileTable};
use crate::functionals::{kinetic, u0};
use crate::measures::{trapezoid, DiscreteMeasure, Point3, RadialDensity};
use crate::mmot::exact_with_potentials;
use crate::optim::{golden_section, minimize, SearchConfig};
use crate::partial::partial_cost;
use crate::tolerances::{CONV_TOL, GB_NUM_TOL, RADIAL_INTERVALS, RADIAL_R_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbMethod {
    AnalyticSmallAlpha,
    SolvedN2,
    SolvedBall,
}

impl GbMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            GbMethod::AnalyticSmallAlpha => "analytic_small_alpha",
            GbMethod::SolvedN2 => "solved_n2",
            GbMethod::SolvedBall => "solved_ball",
        }
    }
}

/// `−Z²α/4` when `α ≤ 1/N`.
pub fn gb_analytic(z: f64, alpha: f64, n: usize) -> Option<f64> {
    (n >= 1 && alpha <= 1.0 / n as f64 + 1e-12).then(|| -z * z * alpha / 4.0)
}

/// Search settings for the N = 2 solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbSearch {
    /// Hydrogenic components in the shape family (1 to 3).
    pub components: usize,
    pub search: SearchConfig,
    /// Grid points for the inner-portion scan before golden refinement.
    pub portion_grid: usize,
    /// Radial nodes of the line surrogate used for the LP cross-check.
    pub lp_check_nodes: Option<usize>,
}

impl Default for GbSearch {
    fn default() -> Self {
        Self {
            components: 3,
            search: SearchConfig::default(),
            portion_grid: 5,
            lp_check_nodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpCrossCheck {
    pub nodes: usize,
    pub comotion: f64,
    pub lp: f64,
    pub relative_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbN2Result {
    pub z: f64,
    pub b: f64,
    pub alpha: f64,
    pub value: f64,
    pub method: GbMethod,
    /// Optimal trial, already dilated to its best scale.
    pub shape: HydrogenicMixture,
    /// `C(ρ, 2α − 1)` of the optimal trial (co-motion upper bound).
    pub partial_cost_used: f64,
    /// Innermost mass kept in the correlated portion.
    pub inner_portion: f64,
    pub lower_bound: f64,
    pub stagnated: bool,
    pub lp_check: Option<LpCrossCheck>,
}

impl GbN2Result {
    pub fn density(&self) -> Result<RadialDensity> {
        let amin = self.shape.exponents.iter().cloned().fold(f64::INFINITY, f64::min);
        let r_max = RADIAL_R_MAX.max(40.0 / amin);
        self.shape.to_radial(r_max, RADIAL_INTERVALS, [0.0; 3])
    }
}

struct ShapeEval {
    kinetic: f64,
    u0: f64,
    cost: f64,
    inner: f64,
}

fn best_portion(table: &QuantileTable, m: f64, grid: usize) -> (f64, f64) {
    if m <= 0.0 {
        return (0.0, 0.0);
    }
    let grid = grid.max(2);
    let h = m / (grid - 1) as f64;
    let (k, _) = (0..grid)
        .map(|k| (k, table.portion_cost(m, k as f64 * h)))
        .fold((0, f64::INFINITY), |acc, (k, c)| if c < acc.1 { (k, c) } else { acc });
    let lo = (k as f64 - 1.0).max(0.0) * h;
    let hi = ((k + 1) as f64 * h).min(m);
    let (x, c) = golden_section(|q| table.portion_cost(m, q), lo, hi, 1e-3 * m);
    let at_edge = table.portion_cost(m, k as f64 * h);
    if at_edge <= c {
        (k as f64 * h, at_edge)
    } else {
        (x, c)
    }
}

fn evaluate_shape(mix: &HydrogenicMixture, m: f64, grid: usize) -> ShapeEval {
    let table = mix.quantiles();
    let (inner, cost) = best_portion(&table, m, grid);
    ShapeEval {
        kinetic: mix.kinetic(),
        u0: mix.u0(),
        cost,
        inner,
    }
}

fn ratio_value(z: f64, b: f64, e: &ShapeEval) -> f64 {
    let num = (z * e.u0 - b * e.cost).max(0.0);
    -num * num / (4.0 * e.kinetic)
}

fn decode_shape(p: &[f64], alpha: f64, k: usize) -> Result<HydrogenicMixture> {
    let mut logits: Vec<f64> = p[..k - 1].to_vec();
    logits.push(0.0);
    let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    let weights = e.iter().map(|v| alpha * v / s).collect();
    let mut exponents = vec![1.0];
    exponents.extend(p[k - 1..].iter().map(|v| v.clamp(-12.0, 12.0).exp()));
    HydrogenicMixture::new(weights, exponents)
}

/// Upper bound for `g_b(Z, α)` with two marginals, by direct search over
/// hydrogenic mixtures of mass `α`.
pub fn gb_solve_n2(z: f64, b: f64, alpha: f64, search: &GbSearch) -> Result<GbN2Result> {
    if !(z > 0.0) || !(b >= 0.0) || !z.is_finite() || !b.is_finite() {
        return Err(invalid(format!("need Z > 0 and b ≥ 0, got Z = {z}, b = {b}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(1..=3).contains(&search.components) {
        return Err(invalid("shape family supports one to three components"));
    }
    let lower_bound = -z * z * alpha / 4.0;
    if let Some(v) = gb_analytic(z, alpha, 2) {
        return Ok(GbN2Result {
            z,
            b,
            alpha,
            value: v,
            method: GbMethod::AnalyticSmallAlpha,
            shape: HydrogenicMixture::single(alpha, z)?,
            partial_cost_used: 0.0,
            inner_portion: 0.0,
            lower_bound,
            stagnated: false,
            lp_check: None,
        });
    }
    let m = 2.0 * alpha - 1.0;
    let k = search.components;
    let (shape, stagnated) = if k == 1 {
        (HydrogenicMixture::single(alpha, 1.0)?, false)
    } else {
        let mut bounds = vec![(-3.0, 3.0); k - 1];
        bounds.extend(std::iter::repeat_n(((0.05f64).ln(), (3.0f64).ln()), k - 1));
        let objective = |p: &[f64]| -> f64 {
            match decode_shape(p, alpha, k) {
                Ok(mix) => ratio_value(z, b, &evaluate_shape(&mix, m, search.portion_grid)),
                Err(_) => f64::INFINITY,
            }
        };
        let best = minimize(&objective, &bounds, &search.search);
        (decode_shape(&best.x, alpha, k)?, best.stagnated)
    };
    let eval = evaluate_shape(&shape, m, search.portion_grid);
    let value = ratio_value(z, b, &eval);
    let num = (z * eval.u0 - b * eval.cost).max(0.0);
    // optimal dilation; a vanishing numerator sends the density to infinity
    let lambda = (num / (2.0 * eval.kinetic)).max(1e-6);
    let shape = shape.scaled(lambda);
    if value < lower_bound - GB_NUM_TOL {
        return Err(Error::InvariantViolation(format!(
            "g_b({z}, {alpha}) = {value} below the bound {lower_bound}"
        )));
    }
    let lp_check = match search.lp_check_nodes {
        Some(nodes) => Some(lp_cross_check(&shape, m, eval.cost * lambda, nodes)?),
        None => None,
    };
    Ok(GbN2Result {
        z,
        b,
        alpha,
        value,
        method: GbMethod::SolvedN2,
        shape,
        partial_cost_used: eval.cost * lambda,
        inner_portion: eval.inner,
        lower_bound,
        stagnated,
        lp_check,
    })
}

/// Symmetric two-sided line discretization of a radial mixture: equal-mass
/// quantile bins, each split between `±r e_z`.
pub fn line_surrogate(mix: &HydrogenicMixture, nodes: usize) -> Result<DiscreteMeasure> {
    let table = mix.quantiles();
    let mass = mix.mass();
    let w = mass / nodes as f64;
    let mut points = Vec::with_capacity(2 * nodes);
    let mut weights = Vec::with_capacity(2 * nodes);
    for i in 0..nodes {
        let r = table.quantile((i as f64 + 0.5) * w);
        points.push([0.0, 0.0, r]);
        points.push([0.0, 0.0, -r]);
        weights.push(0.5 * w);
        weights.push(0.5 * w);
    }
    DiscreteMeasure::new(points, weights)
}

fn lp_cross_check(mix: &HydrogenicMixture, m: f64, comotion: f64, nodes: usize) -> Result<LpCrossCheck> {
    let surrogate = line_surrogate(mix, nodes)?;
    let lp = partial_cost(&surrogate, m.min(surrogate.total_mass()), 2)?;
    Ok(LpCrossCheck {
        nodes,
        comotion,
        lp,
        relative_difference: (lp - comotion).abs() / comotion.abs().max(1e-300),
    })
}

/// Fixed radial shells for the ball-constrained solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub radii: Vec<f64>,
}

impl BallGrid {
    /// Geometric inner shells plus two shells well outside the ball.
    pub fn default_for(big_r: f64, n: usize) -> Self {
        let inner = if n == 2 { 12 } else { 2 };
        let (r0, r1) = (0.3f64, 6.0f64);
        let mut radii: Vec<f64> = (0..inner)
            .map(|i| r0 * (r1 / r0).powf(i as f64 / (inner - 1) as f64))
            .collect();
        radii.push(2.0 * big_r.max(r1));
        radii.push(4.0 * big_r.max(r1));
        radii.sort_by(f64::total_cmp);
        radii.dedup();
        Self { radii }
    }

    fn points(&self, n: usize) -> Vec<Point3> {
        let mut pts = Vec::new();
        for &r in &self.radii {
            if n == 2 {
                pts.push([0.0, 0.0, r]);
                pts.push([0.0, 0.0, -r]);
            } else {
                for k in 0..3 {
                    let t = 2.0 * PI * k as f64 / 3.0;
                    pts.push([r * t.cos(), r * t.sin(), 0.0]);
                }
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallResult {
    pub z: f64,
    pub b: f64,
    pub alpha: f64,
    pub ball_radius: f64,
    pub n_marginals: usize,
    pub value: f64,
    pub radii: Vec<f64>,
    pub shell_weights: Vec<f64>,
    pub iterations: usize,
}

/// Smooth radial shells: `m_i(r) ∝ r² exp(−(r − r_i)²/(2σ_i²))`, unit mass.
struct ShellBasis {
    grid: Vec<f64>,
    shells: Vec<Vec<f64>>,
    u0: Vec<f64>,
}

impl ShellBasis {
    fn new(radii: &[f64]) -> Result<Self> {
        let k = radii.len();
        let widths: Vec<f64> = (0..k)
            .map(|i| {
                let gap = if i + 1 < k { radii[i + 1] - radii[i] } else { radii[i] - radii[i.saturating_sub(1)] };
                let prev = if i > 0 { radii[i] - radii[i - 1] } else { radii[0] };
                0.6 * gap.max(prev).max(1e-3) + 0.15 * radii[i]
            })
            .collect();
        let r_max = (0..k).map(|i| radii[i] + 8.0 * widths[i]).fold(0.0, f64::max);
        // quadratic grading keeps inner shells resolved when far shells are present
        let j = 4000;
        let grid: Vec<f64> = (0..=j).map(|i| r_max * (i as f64 / j as f64).powi(2)).collect();
        let mut shells = Vec::with_capacity(k);
        let mut u0s = Vec::with_capacity(k);
        for i in 0..k {
            let raw: Vec<f64> = grid
                .iter()
                .map(|&r| {
                    let x = (r - radii[i]) / widths[i];
                    r * r * (-0.5 * x * x).exp()
                })
                .collect();
            let mass = trapezoid(&grid, &raw);
            let m: Vec<f64> = raw.iter().map(|v| v / mass).collect();
            let d = RadialDensity::new_unbounded(grid.clone(), m.clone(), [0.0; 3])?;
            u0s.push(u0(&d));
            shells.push(m);
        }
        Ok(Self {
            grid,
            shells,
            u0: u0s,
        })
    }

    fn density(&self, w: &[f64]) -> Result<RadialDensity> {
        let m: Vec<f64> = (0..self.grid.len())
            .map(|j| w.iter().zip(&self.shells).map(|(wi, s)| wi * s[j]).sum::<f64>() + 1e-300)
            .collect();
        let mut m = m;
        m[0] = 0.0;
        RadialDensity::new_unbounded(self.grid.clone(), m, [0.0; 3])
    }

    fn kinetic(&self, w: &[f64]) -> Result<f64> {
        kinetic(&self.density(w)?)
    }
}

/// Euclidean projection onto the simplex of total mass `s`.
fn project_simplex(v: &[f64], s: f64) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - s) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projection onto `{w ≥ 0, Σw = 1, Σ_{inside} w ≤ α}`.
fn project_ball(v: &[f64], inside: &[bool], alpha: f64) -> Vec<f64> {
    let w = project_simplex(v, 1.0);
    let inner: f64 = w.iter().zip(inside).filter(|(_, &i)| i).map(|(x, _)| x).sum();
    if inner <= alpha + 1e-15 {
        return w;
    }
    let vin: Vec<f64> = v.iter().zip(inside).filter(|(_, &i)| i).map(|(x, _)| *x).collect();
    let vout: Vec<f64> = v.iter().zip(inside).filter(|(_, &i)| !i).map(|(x, _)| *x).collect();
    let pin = project_simplex(&vin, alpha);
    let pout = project_simplex(&vout, 1.0 - alpha);
    let (mut a, mut b) = (pin.into_iter(), pout.into_iter());
    inside
        .iter()
        .map(|&i| if i { a.next().unwrap_or(0.0) } else { b.next().unwrap_or(0.0) })
        .collect()
}

const BALL_ITERATIONS: usize = 200;

/// Ball-constrained problem `inf {T + bC − Z U₀ : ‖ρ‖ = 1, ρ(B_R) ≤ α}` over
/// weights on fixed shells. The correlation is the exact LP on a point cloud
/// (antipodal pairs for N = 2, triangles for N = 3), kinetic and potential
/// terms use smooth shells at the same radii. The objective is convex in the
/// weights; each round solves the LP for the current weights and takes a
/// backtracking projected step along the gradient built from its potentials.
pub fn gb_solve_ball(z: f64, b: f64, alpha: f64, big_r: f64, n: usize, grid: &BallGrid) -> Result<BallResult> {
    if !(z > 0.0) || !(b >= 0.0) {
        return Err(invalid(format!("need Z > 0 and b ≥ 0, got Z = {z}, b = {b}")));
    }
    if !(0.0..=1.0).contains(&alpha) || !(big_r > 0.0) {
        return Err(invalid(format!("need α ∈ [0, 1] and R > 0, got α = {alpha}, R = {big_r}")));
    }
    let per_shell = match n {
        2 => 2,
        3 => 3,
        _ => return Err(invalid(format!("ball solver supports N = 2 or 3, got {n}"))),
    };
    let cap = if n == 2 { 40 } else { 12 };
    let n_points = per_shell * grid.radii.len();
    if n_points > cap {
        return Err(Error::SizeExceeded {
            size: n_points as u128,
            cap: cap as u128,
        });
    }
    if grid.radii.is_empty() || grid.radii.windows(2).any(|w| !(w[1] > w[0])) || grid.radii[0] <= 0.0 {
        return Err(invalid("shell radii must be positive and strictly increasing"));
    }
    let k = grid.radii.len();
    let inside: Vec<bool> = grid.radii.iter().map(|&r| r < big_r).collect();
    let basis = ShellBasis::new(&grid.radii)?;
    let points = grid.points(n);

    let energy = |w: &[f64]| -> Result<(f64, Vec<f64>)> {
        let t = basis.kinetic(w)?;
        let u: f64 = w.iter().zip(&basis.u0).map(|(a, b)| a * b).sum();
        let pw: Vec<f64> = w.iter().flat_map(|&x| std::iter::repeat_n(x / per_shell as f64, per_shell)).collect();
        let cloud = DiscreteMeasure::new_unbounded(points.clone(), pw)?;
        let (c, pot) = if b > 0.0 {
            let sol = exact_cloud(&cloud, n)?;
            (sol.0, sol.1)
        } else {
            (0.0, vec![0.0; n_points])
        };
        // gradient: finite differences for T, closed form for U, LP potentials for C
        let mut grad = vec![0.0; k];
        let h = 1e-6;
        for i in 0..k {
            let mut wp = w.to_vec();
            wp[i] += h;
            let tp = basis.kinetic(&wp)?;
            let cshell: f64 = pot[i * per_shell..(i + 1) * per_shell].iter().sum::<f64>() / per_shell as f64;
            grad[i] = (tp - t) / h + b * cshell - z * basis.u0[i];
        }
        Ok((t + b * c - z * u, grad))
    };

    let mut w = project_ball(&vec![1.0 / k as f64; k], &inside, alpha);
    let (mut value, mut grad) = energy(&w)?;
    let mut step = 0.05;
    let mut iterations = 0;
    while iterations < BALL_ITERATIONS && step > 1e-10 {
        iterations += 1;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-12);
        let trial = project_ball(
            &w.iter().zip(&grad).map(|(x, g)| x - step * g / gnorm).collect::<Vec<_>>(),
            &inside,
            alpha,
        );
        let (v, g) = energy(&trial)?;
        if v < value {
            w = trial;
            value = v;
            grad = g;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    Ok(BallResult {
        z,
        b,
        alpha,
        ball_radius: big_r,
        n_marginals: n,
        value,
        radii: grid.radii.clone(),
        shell_weights: w,
        iterations,
    })
}

/// Exact LP on every point of the cloud (zero weights included) so that each
/// point receives a potential.
fn exact_cloud(cloud: &DiscreteMeasure, n: usize) -> Result<(f64, Vec<f64>)> {
    let positive: Vec<f64> = cloud.weights().iter().map(|w| w.max(1e-14)).collect();
    let padded = DiscreteMeasure::new_unbounded(cloud.points().to_vec(), positive)?;
    let sol = exact_with_potentials(&padded, n)?;
    Ok((sol.result.cost, sol.potential))
}

/// Tabulated `α ↦ g_b(Z, α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbTable {
    #[serde(rename = "Z")]
    pub z: f64,
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub methods: Vec<GbMethod>,
    /// Solver outputs before the monotone and convex repair.
    pub raw_values: Vec<f64>,
}

impl GbTable {
    /// Checks monotonicity, discrete convexity, bounds and the analytic branch.
    pub fn validate(&self) -> Result<()> {
        let n = self.alphas.len();
        if n == 0 || self.values.len() != n || self.methods.len() != n {
            return Err(invalid("table columns differ in length"));
        }
        let mut bad = Vec::new();
        for i in 0..n {
            let a = self.alphas[i];
            let v = self.values[i];
            let lower = -self.z * self.z * a / 4.0;
            if v < lower - GB_NUM_TOL || v > 1e-12 {
                bad.push(i);
            }
            if let Some(exact) = gb_analytic(self.z, a, self.n) {
                if (v - exact).abs() > GB_NUM_TOL {
                    bad.push(i);
                }
            }
            if i > 0 && v > self.values[i - 1] + 1e-12 {
                bad.push(i);
            }
            if i > 0 && i + 1 < n {
                let (a0, a2) = (self.alphas[i - 1], self.alphas[i + 1]);
                let lam = (a - a0) / (a2 - a0);
                let chord = (1.0 - lam) * self.values[i - 1] + lam * self.values[i + 1];
                if v > chord + 0.5 * CONV_TOL {
                    bad.push(i);
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            bad.sort_unstable();
            bad.dedup();
            Err(Error::TableInvalid {
                indices: bad,
                reason: "monotonicity, convexity or bounds violated".into(),
            })
        }
    }

    /// Piecewise-linear interpolation; convexity and monotonicity carry over.
    pub fn value_at(&self, alpha: f64) -> Result<f64> {
        let a = &self.alphas;
        let last = a.len() - 1;
        if alpha < a[0] - 1e-12 || alpha > a[last] + 1e-12 {
            return Err(invalid(format!(
                "alpha {alpha} outside the table range [{}, {}]",
                a[0], a[last]
            )));
        }
        let alpha = alpha.clamp(a[0], a[last]);
        let j = a.partition_point(|&x| x < alpha).clamp(1, last.max(1));
        if last == 0 {
            return Ok(self.values[0]);
        }
        let t = (alpha - a[j - 1]) / (a[j] - a[j - 1]);
        Ok(self.values[j - 1] * (1.0 - t) + self.values[j] * t)
    }

    pub fn argmin(&self) -> (f64, f64) {
        let i = (0..self.values.len())
            .fold(0, |best, i| if self.values[i] < self.values[best] { i } else { best });
        (self.alphas[i], self.values[i])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,value,method\n");
        for i in 0..self.alphas.len() {
            s.push_str(&format!("{},{},{}\n", self.alphas[i], self.values[i], self.methods[i].as_str()));
        }
        s
    }
}

/// Options for [`gb_tabulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulateOptions {
    pub search: GbSearch,
    /// Ball radii whose supremum defines entries for N ≥ 3.
    pub ball_radii: Vec<f64>,
}

impl Default for TabulateOptions {
    fn default() -> Self {
        Self {
            search: GbSearch::default(),
            ball_radii: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

/// Greatest convex minorant evaluated at the nodes.
fn lower_convex_hull(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = vec![0.0; x.len()];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        for i in a..=b {
            let t = (x[i] - x[a]) / (x[b] - x[a]);
            out[i] = y[a] * (1.0 - t) + y[b] * t;
        }
    }
    if hull.len() == 1 {
        out[hull[0]] = y[hull[0]];
    }
    out
}

fn table_entry(z: f64, b: f64, n: usize, alpha: f64, opts: &TabulateOptions, index: usize) -> Result<(f64, GbMethod)> {
    if let Some(v) = gb_analytic(z, alpha, n) {
        return Ok((v, GbMethod::AnalyticSmallAlpha));
    }
    if n == 2 {
        let mut search = opts.search;
        search.search.seed = search.search.seed.wrapping_add(index as u64);
        return gb_solve_n2(z, b, alpha, &search).map(|r| (r.value, GbMethod::SolvedN2));
    }
    let mut best = f64::NEG_INFINITY;
    for &r in &opts.ball_radii {
        let v = gb_solve_ball(z, b, alpha, r, n, &BallGrid::default_for(r, n))?.value;
        best = best.max(v);
    }
    Ok((best, GbMethod::SolvedBall))
}

/// Fills a table and repairs small violations of monotonicity and convexity.
///
/// Every entry is an upper bound for a nonincreasing convex function, so the
/// running minimum and then the greatest convex minorant of the entries are
/// still upper bounds. Entries moved by more than `CONV_TOL` are reported.
pub fn gb_tabulate(z: f64, b: f64, n: usize, alphas: &[f64], opts: &TabulateOptions) -> Result<GbTable> {
    if alphas.is_empty() {
        return Err(invalid("empty alpha grid"));
    }
    if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) || alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("alphas must be strictly increasing within [0, 1]"));
    }
    if n < 2 {
        return Err(invalid(format!("need N ≥ 2, got {n}")));
    }
    let entries: Vec<Result<(f64, GbMethod)>> = alphas
        .par_iter()
        .enumerate()
        .map(|(i, &a)| table_entry(z, b, n, a, opts, i))
        .collect();
    let mut raw = Vec::with_capacity(alphas.len());
    let mut methods = Vec::with_capacity(alphas.len());
    for e in entries {
        let (v, m) = e?;
        raw.push(v);
        methods.push(m);
    }
    let mut values: Vec<f64> = raw.iter().map(|v| v.min(0.0)).collect();
    for i in 1..values.len() {
        values[i] = values[i].min(values[i - 1]);
    }
    let values = lower_convex_hull(alphas, &values);
    let moved: Vec<usize> = (0..values.len()).filter(|&i| (values[i] - raw[i]).abs() > CONV_TOL).collect();
    if !moved.is_empty() {
        return Err(Error::TableInvalid {
            indices: moved,
            reason: format!("repair moved entries by more than {CONV_TOL}"),
        });
    }
    let table = GbTable {
        z,
        b,
        n,
        alphas: alphas.to_vec(),
        values,
        methods,
        raw_values: raw,
    };
    table.validate()?;
    Ok(table)
}

/// Cache file name for a table.
pub fn cache_path(dir: &Path, z: f64, b: f64, n: usize, opts: &TabulateOptions, alphas: &[f64]) -> PathBuf {
    let first = alphas.first().copied().unwrap_or(0.0);
    let last = alphas.last().copied().unwrap_or(0.0);
    dir.join(format!(
        "gb_Z{z}_b{b}_N{n}_K{}_r{}_it{}_seed{}_{}x[{first},{last}].json",
        opts.search.components,
        opts.search.search.restarts,
        opts.search.search.max_iters,
        opts.search.search.seed,
        alphas.len()
    ))
}

/// [`gb_tabulate`] through a JSON cache in `dir`.
pub fn gb_tabulate_cached(dir: &Path, z: f64, b: f64, n: usize, alphas: &[f64], opts: &TabulateOptions) -> Result<GbTable> {
    let path = cache_path(dir, z, b, n, opts, alphas);
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(t) = serde_json::from_str::<GbTable>(&text) {
            if t.alphas == alphas && t.validate().is_ok() {
                return Ok(t);
            }
        }
    }
    let table = gb_tabulate(z, b, n, alphas, opts)?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(&table)?)?;
    std::fs::rename(&tmp, &path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> GbSearch {
        GbSearch {
            components: 2,
            search: SearchConfig {
                restarts: 4,
                max_iters: 300,
                seed: 42,
            },
            ..GbSearch::default()
        }
    }

    #[test]
    fn analytic_branch() {
        assert_eq!(gb_analytic(1.0, 0.3, 2), Some(-0.075));
        assert_eq!(gb_analytic(1.0, 0.0, 2), Some(0.0));
        assert_eq!(gb_analytic(2.0, 0.25, 4), Some(-0.25));
        assert_eq!(gb_analytic(1.0, 0.6, 2), None);
        let r = gb_solve_n2(1.0, 0.5, 0.5, &quick()).unwrap();
        assert_eq!(r.method, GbMethod::AnalyticSmallAlpha);
        assert!((r.value + 0.125).abs() < 1e-12);
    }

    #[test]
    fn strictly_above_hydrogen_for_full_mass() {
        let r = gb_solve_n2(1.0, 0.5, 1.0, &quick()).unwrap();
        assert!(r.value > -0.25 + 3.0 * GB_NUM_TOL, "{r:?}");
        assert!(r.value < -0.125);
        // b → 0 recovers the hydrogen energy
        let r0 = gb_solve_n2(1.0, 1e-6, 1.0, &quick()).unwrap();
        assert!((r0.value + 0.25).abs() < 1e-4, "{}", r0.value);
    }

    #[test]
    fn single_component_exact_ratio() {
        // one hydrogenic component: the value is −¼(U₀ − bC)²/T with closed-form T, U₀
        let s = GbSearch {
            components: 1,
            ..quick()
        };
        let r = gb_solve_n2(1.0, 0.5, 1.0, &s).unwrap();
        let h = HydrogenicMixture::single(1.0, 1.0).unwrap();
        let c = h.quantiles().portion_cost(1.0, 0.0);
        let expected = -(0.5 - 0.5 * c).powi(2);
        assert!((r.value - expected).abs() < 1e-9);
    }

    #[test]
    fn surrogate_lp_matches_comotion() {
        let mix = HydrogenicMixture::single(1.0, 1.0).unwrap();
        let com = mix.quantiles().portion_cost(1.0, 0.0);
        let chk = lp_cross_check(&mix, 1.0, com, 60).unwrap();
        assert!(chk.relative_difference < 0.03, "{chk:?}");
    }

    #[test]
    fn projections() {
        let p = project_simplex(&[0.5, 0.8, -1.0], 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|x| *x >= 0.0));
        let q = project_ball(&[0.6, 0.6, 0.1], &[true, true, false], 0.5);
        assert!((q[0] + q[1] - 0.5).abs() < 1e-12 && (q[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn convex_hull_repair() {
        let x = [0.0, 0.5, 1.0];
        let y = [0.0, -0.1, -0.3];
        let h = lower_convex_hull(&x, &y);
        assert!((h[1] + 0.15).abs() < 1e-15);
        assert_eq!(h[0], 0.0);
    }

    #[test]
    fn table_on_analytic_range() {
        let alphas: Vec<f64> = (0..=5).map(|i| i as f64 * 0.1).collect();
        let t = gb_tabulate(1.0, 0.5, 2, &alphas, &TabulateOptions::default()).unwrap();
        for (a, v) in t.alphas.iter().zip(&t.values) {
            assert!((v + a / 4.0).abs() < 1e-15);
        }
        assert!(t.methods.iter().all(|m| *m == GbMethod::AnalyticSmallAlpha));
        assert!((t.value_at(0.25).unwrap() + 0.0625).abs() < 1e-15);
        assert!(t.value_at(0.7).is_err());
        assert!(t.to_csv().starts_with("alpha,value,method\n0,0,analytic_small_alpha"));
    }

    #[test]
    fn ball_solver_basics() {
        let grid = BallGrid::default_for(1.0, 2);
        let free = gb_solve_ball(1.0, 0.5, 1.0, 1.0, 2, &grid).unwrap();
        assert!(free.value < 0.0 && free.value > -0.25);
        let half = gb_solve_ball(1.0, 0.5, 0.5, 1.0, 2, &grid).unwrap();
        assert!(half.value >= free.value - 1e-9);
        let big = BallGrid {
            radii: (1..=21).map(|i| i as f64).collect(),
        };
        assert!(matches!(gb_solve_ball(1.0, 0.5, 1.0, 1.0, 2, &big), Err(Error::SizeExceeded { .. })));
        let tri = gb_solve_ball(1.0, 0.5, 1.0, 1.0, 3, &BallGrid::default_for(1.0, 3)).unwrap();
        assert!(tri.value.is_finite());
    }
}
