//! Dense-inverse revised simplex for equality-form linear programs.
//!
//! Solves `min cᵀx  s.t.  Ax = b, x ≥ 0` with sparse columns. Phase I starts
//! from an all-artificial basis; phase II keeps artificials out of the basis
//! except for those stuck at zero on redundant rows. Pricing is Dantzig with
//! lowest-index ties, switching to Bland's rule after a run of degenerate
//! pivots, so results are deterministic and cycling is avoided.

use crate::error::{Error, Result};

/// Sparse column: `(row, value)` pairs.
pub type Column = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub n_rows: usize,
    pub columns: Vec<Column>,
    pub costs: Vec<f64>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Row duals `y = c_B B⁻¹` in the orientation of the original rows.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
}

const REFACTOR_EVERY: usize = 100;
const DEGENERATE_STREAK: usize = 50;
const PIVOT_TOL: f64 = 1e-9;

struct Simplex<'a> {
    p: &'a LpProblem,
    signs: Vec<f64>,
    rhs: Vec<f64>,
    /// basis[i] = variable basic in row i; indices ≥ n are artificials.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: Vec<Vec<f64>>,
    xb: Vec<f64>,
    pivots_since_refactor: usize,
    iterations: usize,
}

impl<'a> Simplex<'a> {
    fn n(&self) -> usize {
        self.p.columns.len()
    }

    fn m(&self) -> usize {
        self.p.n_rows
    }

    /// Column of variable `j` after row sign normalization, as a dense-free iterator.
    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        if j < self.n() {
            self.p.columns[j]
                .iter()
                .map(|&(i, v)| (i, v * self.signs[i]))
                .collect()
        } else {
            vec![(j - self.n(), 1.0)]
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m();
        let mut b = vec![vec![0.0; m]; m];
        for (k, &j) in self.basis.iter().enumerate() {
            for (i, v) in self.column(j) {
                b[i][k] = v;
            }
        }
        // Gauss-Jordan on [B | I]
        let mut inv = vec![vec![0.0; m]; m];
        for (i, row) in inv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for c in 0..m {
            let piv = (c..m)
                .max_by(|&a, &bb| b[a][c].abs().total_cmp(&b[bb][c].abs()))
                .expect("nonempty");
            if b[piv][c].abs() < 1e-13 {
                return Err(Error::Lp("singular basis during refactorization".into()));
            }
            b.swap(c, piv);
            inv.swap(c, piv);
            let d = b[c][c];
            for v in b[c].iter_mut() {
                *v /= d;
            }
            for v in inv[c].iter_mut() {
                *v /= d;
            }
            let (src_b, src_i) = (b[c].clone(), inv[c].clone());
            for r in 0..m {
                if r != c && b[r][c] != 0.0 {
                    let f = b[r][c];
                    for k in 0..m {
                        b[r][k] -= f * src_b[k];
                        inv[r][k] -= f * src_i[k];
                    }
                }
            }
        }
        // inv = B⁻¹ with rows indexed by basis position
        self.binv = inv;
        self.xb = (0..m)
            .map(|i| {
                let v: f64 = (0..m).map(|k| self.binv[i][k] * self.rhs[k]).sum();
                if v.abs() < 1e-14 {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn duals(&self, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
        let m = self.m();
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = cost(self.basis[i]);
            if cb != 0.0 {
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += cb * self.binv[i][k];
                }
            }
        }
        y
    }

    fn run_phase(&mut self, cost: &dyn Fn(usize) -> f64, phase_two: bool) -> Result<()> {
        let n = self.n();
        let m = self.m();
        let cmax = (0..n).map(|j| cost(j).abs()).fold(1.0, f64::max);
        let dtol = 1e-11 * cmax;
        let mut degenerate = 0usize;
        let max_iter = 50 * (n + m) + 10_000;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Lp(format!("no convergence after {max_iter} pivots")));
            }
            let y = self.duals(cost);
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.in_basis[j] {
                    continue;
                }
                let d = cost(j)
                    - self.p.columns[j]
                        .iter()
                        .map(|&(i, v)| y[i] * v * self.signs[i])
                        .sum::<f64>();
                if d < -dtol {
                    match entering {
                        None => entering = Some((j, d)),
                        Some((_, best)) if !bland && d < best => entering = Some((j, d)),
                        _ => {}
                    }
                    if bland {
                        break;
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(());
            };
            let mut w = vec![0.0; m];
            for (i, v) in self.column(q) {
                for (r, wr) in w.iter_mut().enumerate() {
                    *wr += self.binv[r][i] * v;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                let artificial_stuck = phase_two && self.basis[r] >= n;
                let ratio = if artificial_stuck && w[r].abs() > PIVOT_TOL {
                    0.0
                } else if w[r] > PIVOT_TOL {
                    self.xb[r].max(0.0) / w[r]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        if ratio < lratio - 1e-12 {
                            true
                        } else if ratio <= lratio + 1e-12 {
                            if bland {
                                self.basis[r] < self.basis[lr]
                            } else {
                                w[r].abs() > w[lr].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, theta)) = leave else {
                return Err(Error::Lp("objective unbounded below".into()));
            };
            degenerate = if theta <= 1e-14 { degenerate + 1 } else { 0 };

            for (x, wi) in self.xb.iter_mut().zip(&w) {
                *x -= theta * wi;
            }
            self.xb[r] = theta;
            let piv = w[r];
            let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
            for (i, &f) in w.iter().enumerate() {
                if i != r && f != 0.0 {
                    for (k, pk) in pivot_row.iter().enumerate() {
                        self.binv[i][k] -= f * pk;
                    }
                }
            }
            self.binv[r] = pivot_row;
            self.in_basis[self.basis[r]] = false;
            self.basis[r] = q;
            self.in_basis[q] = true;
            self.iterations += 1;
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            } else {
                for v in self.xb.iter_mut() {
                    if v.abs() < 1e-14 {
                        *v = 0.0;
                    }
                }
            }
        }
    }
}

/// Solves the program; `Infeasible` when phase I cannot drive artificials to zero.
pub fn solve(p: &LpProblem) -> Result<LpOutcome> {
    let m = p.n_rows;
    let n = p.columns.len();
    if p.costs.len() != n || p.rhs.len() != m {
        return Err(Error::Lp("dimension mismatch".into()));
    }
    if p.columns.iter().flatten().any(|&(i, v)| i >= m || !v.is_finite())
        || p.costs.iter().chain(&p.rhs).any(|v| !v.is_finite())
    {
        return Err(Error::Lp("malformed problem data".into()));
    }
    let signs: Vec<f64> = p.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let rhs: Vec<f64> = p.rhs.iter().zip(&signs).map(|(b, s)| b * s).collect();
    let mut s = Simplex {
        p,
        signs,
        rhs,
        basis: (n..n + m).collect(),
        in_basis: vec![false; n + m],
        binv: Vec::new(),
        xb: Vec::new(),
        pivots_since_refactor: 0,
        iterations: 0,
    };
    for j in n..n + m {
        s.in_basis[j] = true;
    }
    s.refactor()?;

    let phase1 = |j: usize| if j >= n { 1.0 } else { 0.0 };
    s.run_phase(&phase1, false)?;
    s.refactor()?;
    let infeasibility: f64 = (0..m).filter(|&i| s.basis[i] >= n).map(|i| s.xb[i]).sum();
    let scale = s.rhs.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if infeasibility > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible);
    }
    for i in 0..m {
        if s.basis[i] >= n {
            s.xb[i] = 0.0;
        }
    }

    let phase2 = |j: usize| if j >= n { 0.0 } else { p.costs[j] };
    s.run_phase(&phase2, true)?;
    s.refactor()?;

    let mut x = vec![0.0; n];
    for i in 0..m {
        if s.basis[i] < n {
            x[s.basis[i]] = s.xb[i].max(0.0);
        }
    }
    let y = s.duals(&phase2);
    let duals = y.iter().zip(&s.signs).map(|(v, sg)| v * sg).collect();
    let objective = x.iter().zip(&p.costs).map(|(a, c)| a * c).sum();
    Ok(LpOutcome::Optimal(LpSolution {
        x,
        duals,
        objective,
        iterations: s.iterations,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(p: &LpProblem) -> LpSolution {
        match solve(p).unwrap() {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible => panic!("unexpectedly infeasible"),
        }
    }

    #[test]
    fn small_program() {
        // min -x - 2y  s.t. x + y + s1 = 4, x + 3y + s2 = 6
        let p = LpProblem {
            n_rows: 2,
            columns: vec![
                vec![(0, 1.0), (1, 1.0)],
                vec![(0, 1.0), (1, 3.0)],
                vec![(0, 1.0)],
                vec![(1, 1.0)],
            ],
            costs: vec![-1.0, -2.0, 0.0, 0.0],
            rhs: vec![4.0, 6.0],
        };
        let s = optimal(&p);
        assert!((s.objective + 5.0).abs() < 1e-12);
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        // strong duality
        let dual_obj: f64 = s.duals.iter().zip(&p.rhs).map(|(y, b)| y * b).sum();
        assert!((dual_obj - s.objective).abs() < 1e-10);
    }

    #[test]
    fn infeasible_detected() {
        // x = 1 and x = 2
        let p = LpProblem {
            n_rows: 2,
            columns: vec![vec![(0, 1.0), (1, 1.0)]],
            costs: vec![1.0],
            rhs: vec![1.0, 2.0],
        };
        assert!(matches!(solve(&p).unwrap(), LpOutcome::Infeasible));
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        // 2x2 transport with one redundant marginal row; second row negated.
        let p = LpProblem {
            n_rows: 4,
            columns: vec![
                vec![(0, 1.0), (2, 1.0)],
                vec![(0, 1.0), (3, -1.0)],
                vec![(1, 1.0), (2, 1.0)],
                vec![(1, 1.0), (3, -1.0)],
            ],
            costs: vec![3.0, 1.0, 1.0, 3.0],
            rhs: vec![0.5, 0.5, 0.5, -0.5],
        };
        let s = optimal(&p);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[1] - 0.5).abs() < 1e-12 && (s.x[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn assignment_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k = 4;
            let c: Vec<f64> = (0..k * k).map(|_| rng.gen_range(0.0..10.0)).collect();
            let mut columns = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    columns.push(vec![(i, 1.0), (k + j, 1.0)]);
                }
            }
            let p = LpProblem {
                n_rows: 2 * k,
                columns,
                costs: c.clone(),
                rhs: vec![1.0; 2 * k],
            };
            let s = optimal(&p);
            // Birkhoff: optimum is attained at a permutation
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..k).collect();
            permutations(&mut perm, 0, &mut |pm| {
                let v: f64 = (0..k).map(|i| c[i * k + pm[i]]).sum();
                best = best.min(v);
            });
            assert!((s.objective - best).abs() < 1e-9, "{} vs {best}", s.objective);
        }
    }

    fn permutations(p: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            permutations(p, i + 1, f);
            p.swap(i, j);
        }
    }
}
