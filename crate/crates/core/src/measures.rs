//! Discrete and radial (sub)probability measures.
//!
//! A [`DiscreteMeasure`] is a weighted point cloud in R³; a [`RadialDensity`]
//! stores the radial mass density `m(r) = 4πr²ρ(r)` of a spherically
//! symmetric density around a center. Both enforce the subprobability
//! constraint at construction.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tolerances::{MERGE_DISTANCE, RADIAL_INTERVALS, RADIAL_R_MAX, TOL_MASS};

pub type Point3 = [f64; 3];

pub fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: &Point3, b: &Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: &Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: &Point3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn dist(a: &Point3, b: &Point3) -> f64 {
    norm(&sub(a, b))
}

fn check_point(p: &Point3, what: &str) -> Result<()> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has a non-finite coordinate")))
    }
}

/// Weighted point cloud representing a subprobability on R³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscreteRepr", into = "DiscreteRepr")]
pub struct DiscreteMeasure {
    points: Vec<Point3>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DiscreteRepr {
    points: Vec<Point3>,
    weights: Vec<f64>,
}

impl TryFrom<DiscreteRepr> for DiscreteMeasure {
    type Error = Error;
    fn try_from(r: DiscreteRepr) -> Result<Self> {
        DiscreteMeasure::new(r.points, r.weights)
    }
}

impl From<DiscreteMeasure> for DiscreteRepr {
    fn from(m: DiscreteMeasure) -> Self {
        DiscreteRepr {
            points: m.points,
            weights: m.weights,
        }
    }
}

impl DiscreteMeasure {
    /// Builds a measure, merging points closer than [`MERGE_DISTANCE`].
    pub fn new(points: Vec<Point3>, weights: Vec<f64>) -> Result<Self> {
        let m = Self::new_unbounded(points, weights)?;
        let mass = m.total_mass();
        if mass > 1.0 + TOL_MASS {
            return Err(invalid(format!("total mass {mass} exceeds 1")));
        }
        Ok(m)
    }

    /// Same as [`DiscreteMeasure::new`] without the subprobability cap.
    ///
    /// Used for intermediate objects such as unnormalized sums; the public
    /// solvers still validate their inputs.
    pub(crate) fn new_unbounded(points: Vec<Point3>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let mut merged_points: Vec<Point3> = Vec::with_capacity(points.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(points.len());
        for (i, (p, w)) in points.into_iter().zip(weights).enumerate() {
            check_point(&p, &format!("point {i}"))?;
            if !w.is_finite() || w < 0.0 {
                return Err(invalid(format!("weight {i} is {w}")));
            }
            match merged_points
                .iter()
                .position(|q| dist(q, &p) < MERGE_DISTANCE)
            {
                Some(j) => merged_weights[j] += w,
                None => {
                    merged_points.push(p);
                    merged_weights.push(w);
                }
            }
        }
        Ok(Self {
            points: merged_points,
            weights: merged_weights,
        })
    }

    pub fn empty() -> Self {
        Self {
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub fn dirac(point: Point3, weight: f64) -> Result<Self> {
        Self::new(vec![point], vec![weight])
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of points carrying positive weight.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// Largest distance between two support points.
    pub fn diameter(&self) -> f64 {
        let s = self.support();
        let mut d: f64 = 0.0;
        for (a, &i) in s.iter().enumerate() {
            for &j in &s[a + 1..] {
                d = d.max(dist(&self.points[i], &self.points[j]));
            }
        }
        d
    }

    /// Push-forward under `x ↦ x / s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid(format!("scale factor must be positive, got {s}")));
        }
        Ok(Self {
            points: self.points.iter().map(|p| scale(p, 1.0 / s)).collect(),
            weights: self.weights.clone(),
        })
    }

    pub fn translated(&self, shift: &Point3) -> Self {
        Self {
            points: self.points.iter().map(|p| add(p, shift)).collect(),
            weights: self.weights.clone(),
        }
    }

    /// Multiplies every weight by `t`.
    pub fn times(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(invalid(format!("mass factor must be nonnegative, got {t}")));
        }
        Self::new(
            self.points.clone(),
            self.weights.iter().map(|w| w * t).collect(),
        )
    }

    /// Sum of two measures; coincident points are merged.
    pub(crate) fn plus(&self, other: &Self) -> Result<Self> {
        let mut p = self.points.clone();
        p.extend_from_slice(&other.points);
        let mut w = self.weights.clone();
        w.extend_from_slice(&other.weights);
        Self::new_unbounded(p, w)
    }

    pub fn mean(&self) -> Option<Point3> {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return None;
        }
        let mut m = [0.0; 3];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for k in 0..3 {
                m[k] += w * p[k];
            }
        }
        Some(scale(&m, 1.0 / mass))
    }
}

/// Radially symmetric density stored as its radial mass density on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDensity {
    radii: Vec<f64>,
    mass_density: Vec<f64>,
    center: Point3,
}

impl RadialDensity {
    /// Builds a density on an arbitrary strictly increasing grid starting at 0.
    pub fn new(radii: Vec<f64>, mass_density: Vec<f64>, center: Point3) -> Result<Self> {
        let d = Self::new_unbounded(radii, mass_density, center)?;
        let mass = d.total_mass();
        if mass > 1.0 + TOL_MASS {
            return Err(Error::InvalidDensity(format!("total mass {mass} exceeds 1")));
        }
        Ok(d)
    }

    /// Validates everything except the unit-mass cap. Resampled densities
    /// carry quadrature drift which is reported rather than renormalized.
    pub(crate) fn new_unbounded(
        radii: Vec<f64>,
        mass_density: Vec<f64>,
        center: Point3,
    ) -> Result<Self> {
        check_point(&center, "center")?;
        if radii.len() < 3 || radii.len() != mass_density.len() {
            return Err(Error::InvalidDensity(format!(
                "grid of {} radii with {} density values",
                radii.len(),
                mass_density.len()
            )));
        }
        if radii[0] != 0.0 {
            return Err(Error::InvalidDensity("grid must start at r = 0".into()));
        }
        if radii.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidDensity("radii must be strictly increasing".into()));
        }
        if let Some(j) = mass_density.iter().position(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDensity(format!(
                "mass density at node {j} is {}",
                mass_density[j]
            )));
        }
        if mass_density[0] != 0.0 {
            return Err(Error::InvalidDensity(
                "radial mass density must vanish at r = 0".into(),
            ));
        }
        Ok(Self {
            radii,
            mass_density,
            center,
        })
    }

    /// Uniform grid of `intervals` steps on `[0, r_max]`.
    pub fn uniform(
        r_max: f64,
        intervals: usize,
        mass_density: Vec<f64>,
        center: Point3,
    ) -> Result<Self> {
        Self::new(uniform_grid(r_max, intervals)?, mass_density, center)
    }

    /// Samples `m(r)` on a uniform grid.
    pub fn from_fn(
        r_max: f64,
        intervals: usize,
        center: Point3,
        m: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let radii = uniform_grid(r_max, intervals)?;
        let mut values: Vec<f64> = radii.iter().map(|&r| m(r)).collect();
        values[0] = 0.0;
        Self::new(radii, values, center)
    }

    /// Samples a point density `ρ(r)` (per unit volume) on the default grid.
    pub fn from_density_fn(center: Point3, rho: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(RADIAL_R_MAX, RADIAL_INTERVALS, center, |r| {
            4.0 * std::f64::consts::PI * r * r * rho(r)
        })
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn mass_density(&self) -> &[f64] {
        &self.mass_density
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().expect("grid has at least three nodes")
    }

    /// Number of grid intervals.
    pub fn intervals(&self) -> usize {
        self.radii.len() - 1
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.r_max() / self.intervals() as f64;
        self.radii
            .iter()
            .enumerate()
            .all(|(j, &r)| (r - j as f64 * h).abs() <= 1e-12 * self.r_max().max(1.0))
    }

    pub fn total_mass(&self) -> f64 {
        trapezoid(&self.radii, &self.mass_density)
    }

    /// Linear interpolation of `m`, zero beyond the grid.
    pub fn interpolate(&self, r: f64) -> f64 {
        interp_linear(&self.radii, &self.mass_density, r)
    }

    /// Push-forward under `x ↦ x / s`: `m^s(r) = s·m(s·r)` resampled on the
    /// same grid, center mapped to `center / s`. No renormalization.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(invalid(format!("scale factor must be positive, got {s}")));
        }
        let values = self
            .radii
            .iter()
            .map(|&r| s * self.interpolate(s * r))
            .collect();
        Self::new_unbounded(self.radii.clone(), values, scale(&self.center, 1.0 / s))
    }

    pub fn with_center(&self, center: Point3) -> Self {
        Self {
            center,
            ..self.clone()
        }
    }

    /// Multiplies the density by `t`.
    pub fn times(&self, t: f64) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(invalid(format!("mass factor must be nonnegative, got {t}")));
        }
        Self::new(
            self.radii.clone(),
            self.mass_density.iter().map(|m| m * t).collect(),
            self.center,
        )
    }

    /// Cumulative mass at each grid node (trapezoid rule).
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.radii.len());
        let mut acc = 0.0;
        out.push(0.0);
        for j in 1..self.radii.len() {
            acc += 0.5
                * (self.radii[j] - self.radii[j - 1])
                * (self.mass_density[j] + self.mass_density[j - 1]);
            out.push(acc);
        }
        out
    }
}

pub(crate) fn uniform_grid(r_max: f64, intervals: usize) -> Result<Vec<f64>> {
    if !(r_max > 0.0) || !r_max.is_finite() || intervals < 2 {
        return Err(Error::InvalidDensity(format!(
            "bad uniform grid: r_max = {r_max}, intervals = {intervals}"
        )));
    }
    let h = r_max / intervals as f64;
    Ok((0..=intervals).map(|j| j as f64 * h).collect())
}

/// Composite trapezoid rule on a (possibly nonuniform) grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub(crate) fn interp_linear(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    if t < x[0] || t > x[n - 1] {
        return 0.0;
    }
    let j = match x.binary_search_by(|v| v.partial_cmp(&t).expect("finite grid")) {
        Ok(j) => return y[j],
        Err(j) => j,
    };
    let (x0, x1) = (x[j - 1], x[j]);
    let w = (t - x0) / (x1 - x0);
    y[j - 1] * (1.0 - w) + y[j] * w
}

/// Positions and charges of fixed nuclei.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NucleiRepr", into = "NucleiRepr")]
pub struct NucleiConfig {
    positions: Vec<Point3>,
    charges: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NucleiRepr {
    positions: Vec<Point3>,
    charges: Vec<f64>,
}

impl TryFrom<NucleiRepr> for NucleiConfig {
    type Error = Error;
    fn try_from(r: NucleiRepr) -> Result<Self> {
        NucleiConfig::new(r.positions, r.charges)
    }
}

impl From<NucleiConfig> for NucleiRepr {
    fn from(n: NucleiConfig) -> Self {
        NucleiRepr {
            positions: n.positions,
            charges: n.charges,
        }
    }
}

impl NucleiConfig {
    pub fn new(positions: Vec<Point3>, charges: Vec<f64>) -> Result<Self> {
        if positions.is_empty() || positions.len() != charges.len() {
            return Err(invalid(format!(
                "{} nuclei positions with {} charges",
                positions.len(),
                charges.len()
            )));
        }
        for (k, (p, z)) in positions.iter().zip(&charges).enumerate() {
            check_point(p, &format!("nucleus {k}"))?;
            if !(*z > 0.0) || !z.is_finite() {
                return Err(invalid(format!("charge of nucleus {k} is {z}")));
            }
        }
        for i in 0..positions.len() {
            for j in i + 1..positions.len() {
                if dist(&positions[i], &positions[j]) < MERGE_DISTANCE {
                    return Err(invalid(format!("nuclei {i} and {j} coincide")));
                }
            }
        }
        Ok(Self { positions, charges })
    }

    /// One nucleus of charge `z` at the origin.
    pub fn single(z: f64) -> Result<Self> {
        Self::new(vec![[0.0; 3]], vec![z])
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn charges(&self) -> &[f64] {
        &self.charges
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Nuclei at `X_k / s`, as seen by a density pushed forward by `x ↦ x / s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(invalid(format!("scale factor must be positive, got {s}")));
        }
        Ok(Self {
            positions: self.positions.iter().map(|p| scale(p, 1.0 / s)).collect(),
            charges: self.charges.clone(),
        })
    }

    pub fn max_charge(&self) -> f64 {
        self.charges.iter().cloned().fold(f64::MIN, f64::max)
    }

    pub fn min_separation(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                d = d.min(dist(&self.positions[i], &self.positions[j]));
            }
        }
        d
    }
}

/// Either kind of measure, tagged by `"type"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Measure {
    Discrete(DiscreteMeasure),
    Radial(#[serde(with = "radial_json")] RadialDensity),
}

impl Measure {
    pub fn total_mass(&self) -> f64 {
        total_mass(self)
    }
}

mod radial_json {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct RadialRepr {
        r_max: f64,
        #[serde(rename = "J")]
        intervals: usize,
        mass_density: Vec<f64>,
        center: Point3,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radii: Option<Vec<f64>>,
    }

    pub fn serialize<S: Serializer>(d: &RadialDensity, s: S) -> std::result::Result<S::Ok, S::Error> {
        RadialRepr {
            r_max: d.r_max(),
            intervals: d.intervals(),
            mass_density: d.mass_density.clone(),
            center: d.center,
            radii: (!d.is_uniform()).then(|| d.radii.clone()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<RadialDensity, D::Error> {
        let r = RadialRepr::deserialize(de)?;
        let radii = match r.radii {
            Some(radii) => radii,
            None => uniform_grid(r.r_max, r.intervals).map_err(serde::de::Error::custom)?,
        };
        RadialDensity::new(radii, r.mass_density, r.center).map_err(serde::de::Error::custom)
    }
}

/// Total mass `‖ρ‖`: weight sum or trapezoid integral of `m`.
pub fn total_mass(measure: &Measure) -> f64 {
    match measure {
        Measure::Discrete(d) => d.total_mass(),
        Measure::Radial(r) => r.total_mass(),
    }
}

pub fn scale_measure(measure: &Measure, s: f64) -> Result<Measure> {
    Ok(match measure {
        Measure::Discrete(d) => Measure::Discrete(d.scaled(s)?),
        Measure::Radial(r) => Measure::Radial(r.scaled(s)?),
    })
}

/// Split of a discrete measure into atoms at the nuclei and a diffuse rest.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDecomposition {
    /// `(k, α_k)` for every nucleus, including those with zero mass.
    pub atomic_part: Vec<(usize, f64)>,
    pub diffuse_part: DiscreteMeasure,
}

/// Assigns each point within `radius_tol` of a nucleus to that nucleus.
pub fn decompose_atoms(
    rho: &DiscreteMeasure,
    nuclei: &NucleiConfig,
    radius_tol: f64,
) -> Result<AtomicDecomposition> {
    if !(radius_tol >= 0.0) {
        return Err(invalid(format!("radius_tol must be nonnegative, got {radius_tol}")));
    }
    let mut alphas = vec![0.0; nuclei.len()];
    let mut rest_points = Vec::new();
    let mut rest_weights = Vec::new();
    for (i, (p, &w)) in rho.points().iter().zip(rho.weights()).enumerate() {
        let mut owner: Option<usize> = None;
        for (k, x) in nuclei.positions().iter().enumerate() {
            // radius_tol = 0 still has to catch exact placements
            if dist(p, x) <= radius_tol.max(MERGE_DISTANCE) {
                if let Some(first) = owner {
                    return Err(Error::AmbiguousAssignment {
                        point: i,
                        first,
                        second: k,
                    });
                }
                owner = Some(k);
            }
        }
        match owner {
            Some(k) => alphas[k] += w,
            None => {
                rest_points.push(*p);
                rest_weights.push(w);
            }
        }
    }
    Ok(AtomicDecomposition {
        atomic_part: alphas.into_iter().enumerate().collect(),
        diffuse_part: DiscreteMeasure::new_unbounded(rest_points, rest_weights)?,
    })
}

/// Variance `E|x − E x|²` of the normalized measure.
pub fn variance(rho: &DiscreteMeasure) -> Result<f64> {
    let mass = rho.total_mass();
    let mean = rho
        .mean()
        .ok_or_else(|| invalid("variance of a zero-mass measure"))?;
    let v: f64 = rho
        .points()
        .iter()
        .zip(rho.weights())
        .map(|(p, w)| {
            let d = dist(p, &mean);
            w * d * d
        })
        .sum();
    Ok((v / mass).max(0.0))
}

/// `Σ_{i,j} w_i w_j / |x_i − x_j|` over all ordered pairs, diagonal included.
/// Any positive atom makes the diagonal term, hence the result, infinite.
pub fn self_interaction(rho: &DiscreteMeasure) -> f64 {
    if rho.weights().iter().any(|&w| w > 0.0) {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Off-diagonal part `Σ_{i≠j} w_i w_j / |x_i − x_j|`.
pub fn self_interaction_offdiagonal(rho: &DiscreteMeasure) -> f64 {
    let (p, w) = (rho.points(), rho.weights());
    let mut acc = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            if i != j {
                acc += w[i] * w[j] / dist(&p[i], &p[j]);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(d: f64) -> DiscreteMeasure {
        DiscreteMeasure::new(vec![[0.0; 3], [d, 0.0, 0.0]], vec![0.5, 0.5]).unwrap()
    }

    fn hydrogen() -> RadialDensity {
        RadialDensity::from_fn(40.0, 4000, [0.0; 3], |r| r * r * (-r).exp() / 2.0).unwrap()
    }

    #[test]
    fn masses() {
        assert_eq!(two_point(2.0).total_mass(), 1.0);
        assert_eq!(DiscreteMeasure::empty().total_mass(), 0.0);
        assert!((hydrogen().total_mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn trapezoid_of_exponential_matches_euler_maclaurin() {
        // m(r) = e^{-r} has m'(0) = -1, so the trapezoid rule overshoots by h²/12.
        let x = uniform_grid(40.0, 4000).unwrap();
        let y: Vec<f64> = x.iter().map(|r| (-r).exp()).collect();
        let h: f64 = 0.01;
        let expected = 1.0 + h * h / 12.0;
        assert!((trapezoid(&x, &y) - expected).abs() < 1e-9);
        // and it is not a valid radial mass density
        assert!(RadialDensity::uniform(40.0, 4000, y, [0.0; 3]).is_err());
    }

    #[test]
    fn duplicates_merge_and_overweight_rejected() {
        let m = DiscreteMeasure::new(vec![[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]], vec![0.25, 0.5]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weights(), &[0.75]);
        assert!(DiscreteMeasure::new(vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![0.6, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![[0.0; 3]], vec![-0.1]).is_err());
    }

    #[test]
    fn scaling_discrete() {
        let m = two_point(2.0);
        assert_eq!(m.scaled(1.0).unwrap(), m);
        let half = m.scaled(2.0).unwrap();
        assert_eq!(dist(&half.points()[0], &half.points()[1]), 1.0);
        assert_eq!(half.weights(), m.weights());
        assert!(m.scaled(0.0).is_err());
        assert!(m.scaled(-1.0).is_err());
    }

    #[test]
    fn scaling_radial_preserves_mass() {
        let h = hydrogen();
        let s2 = h.scaled(2.0).unwrap();
        assert!((s2.total_mass() - 1.0).abs() < 1e-6);
        let back = s2.scaled(0.5).unwrap();
        let max_diff = back
            .mass_density()
            .iter()
            .zip(h.mass_density())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_diff < 1e-4, "{max_diff}");
    }

    #[test]
    fn decomposition() {
        let nuclei = NucleiConfig::new(vec![[0.0; 3], [5.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let rho = DiscreteMeasure::new(vec![[0.0; 3], [5.0, 0.0, 0.0]], vec![0.4, 0.6]).unwrap();
        let d = decompose_atoms(&rho, &nuclei, 0.0).unwrap();
        assert_eq!(d.atomic_part, vec![(0, 0.4), (1, 0.6)]);
        assert!(d.diffuse_part.is_empty());

        let far = DiscreteMeasure::new(vec![[1.0, 1.0, 0.0], [2.0, 2.0, 2.0]], vec![0.5, 0.5]).unwrap();
        let d = decompose_atoms(&far, &nuclei, 0.0).unwrap();
        assert_eq!(d.atomic_part, vec![(0, 0.0), (1, 0.0)]);
        assert_eq!(d.diffuse_part.total_mass(), 1.0);

        let mixed = DiscreteMeasure::new(vec![[0.0; 3], [0.0, 40.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let d = decompose_atoms(&mixed, &nuclei, 0.0).unwrap();
        assert_eq!(d.atomic_part[0], (0, 0.5));
        assert_eq!(d.diffuse_part.weights(), &[0.5]);

        let mid = DiscreteMeasure::dirac([2.5, 0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            decompose_atoms(&mid, &nuclei, 3.0),
            Err(Error::AmbiguousAssignment { .. })
        ));
    }

    #[test]
    fn variance_values() {
        assert_eq!(variance(&DiscreteMeasure::dirac([1.0, 2.0, 3.0], 1.0).unwrap()).unwrap(), 0.0);
        assert!((variance(&two_point(3.0)).unwrap() - 2.25).abs() < 1e-14);
        let moved = two_point(3.0).translated(&[10.0, -4.0, 2.0]);
        assert!((variance(&moved).unwrap() - 2.25).abs() < 1e-12);
        assert!(variance(&DiscreteMeasure::empty()).is_err());
    }

    #[test]
    fn self_interaction_values() {
        assert_eq!(self_interaction(&two_point(2.0)), f64::INFINITY);
        assert!((self_interaction_offdiagonal(&two_point(2.0)) - 0.25).abs() < 1e-15);
        assert_eq!(self_interaction(&DiscreteMeasure::empty()), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let m = Measure::Discrete(two_point(2.0));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"discrete\""));
        assert_eq!(serde_json::from_str::<Measure>(&s).unwrap(), m);

        let r = Measure::Radial(RadialDensity::from_fn(10.0, 50, [0.0; 3], |r| r * r * (-r).exp() / 2.0).unwrap());
        let s = serde_json::to_string(&r).unwrap();
        assert!(s.contains("\"J\":50"));
        assert!(!s.contains("radii"));
        assert_eq!(serde_json::from_str::<Measure>(&s).unwrap(), r);

        let bad = r#"{"type":"discrete","points":[[0,0,0]],"weights":[1.5]}"#;
        assert!(serde_json::from_str::<Measure>(bad).is_err());
    }
}
