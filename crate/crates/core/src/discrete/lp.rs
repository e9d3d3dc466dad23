//! Minimum total time over a set of constant-flow configurations:
//! `min Σ t_j` subject to `Σ t_j·a_j = b`, `t ≥ 0`.
//!
//! Two-phase revised simplex that refactors the basis from the original data
//! at every pivot, pricing by most negative reduced cost and falling back to
//! Bland's rule on degenerate stalls. The final basis is certified through
//! its dual.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

const PIVOT_TOLERANCE: f64 = 1e-11;
const PRICE_TOLERANCE: f64 = 1e-12;
/// Pivots smaller than this fraction of the entering column are refused.
const RELATIVE_PIVOT: f64 = 1e-7;
/// Infeasibility a ratio-test step may tolerate on the scaled rows.
const PRIMAL_SLACK: f64 = 1e-11;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;
const GAP_TOLERANCE: f64 = 1e-10;
/// Reduced costs of the refined basis may dip this far below zero.
const DUAL_TOLERANCE: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;
const REFINEMENT_STEPS: usize = 3;
/// Negative basic values beyond this fraction of the largest are pivoted out.
const REPAIR_TOLERANCE: f64 = 1e-14;
const CLEANUP_ROUNDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpProblem {
    /// Sink-flow vector of each configuration.
    pub columns: Vec<Vec<f64>>,
    /// Volume to deliver to each sink.
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub t_opt: f64,
    /// Time assigned to each column.
    pub weights: Vec<f64>,
    /// Dual price of each row (zero for rows dropped as trivially satisfied).
    pub duals: Vec<f64>,
    pub duality_gap: f64,
}

pub fn solve_min_time_lp(p: &LpProblem) -> Result<LpSolution> {
    let rows = p.rhs.len();
    if let Some(j) = p.columns.iter().position(|c| c.len() != rows) {
        return Err(Error::Domain(format!(
            "column {j} has {} entries, expected {rows}",
            p.columns[j].len()
        )));
    }
    if p.rhs.iter().any(|&b| !b.is_finite() || b < 0.0)
        || p.columns.iter().flatten().any(|&a| !a.is_finite() || a < 0.0)
    {
        return Err(Error::Domain(
            "entries and right-hand side must be finite and non-negative".into(),
        ));
    }

    // A row with zero demand forbids every column that feeds it.
    let active_rows: Vec<usize> = (0..rows).filter(|&i| p.rhs[i] > 0.0).collect();
    let cols: Vec<usize> = (0..p.columns.len())
        .filter(|&j| (0..rows).all(|i| p.rhs[i] > 0.0 || p.columns[j][i] == 0.0))
        .collect();
    for &i in &active_rows {
        if !cols.iter().any(|&j| p.columns[j][i] > 0.0) {
            return Err(Error::Infeasible(format!(
                "no configuration delivers to row {i}"
            )));
        }
    }

    let mut weights = vec![0.0; p.columns.len()];
    let mut duals = vec![0.0; rows];
    if active_rows.is_empty() {
        return Ok(LpSolution {
            t_opt: 0.0,
            weights,
            duals,
            duality_gap: 0.0,
        });
    }

    // Row equilibration.
    let row_scale: Vec<f64> = active_rows
        .iter()
        .map(|&i| {
            cols.iter()
                .map(|&j| p.columns[j][i])
                .fold(0.0, f64::max)
        })
        .collect();
    let m = active_rows.len();
    let nc = cols.len();
    let a = DMatrix::from_fn(m, nc, |r, c| p.columns[cols[c]][active_rows[r]] / row_scale[r]);
    let b = DVector::from_fn(m, |r, _| p.rhs[active_rows[r]] / row_scale[r]);

    let (basis, kept_rows) = simplex(&a, &b)?;

    // Refine on the original scaled data.
    let a_kept = a.select_rows(kept_rows.iter());
    let b_kept = b.select_rows(kept_rows.iter());
    let bmat = a_kept.select_columns(basis.iter());
    let x_b = refined_solve(&bmat, &b_kept)?;
    let y = refined_solve(&bmat.transpose(), &DVector::from_element(basis.len(), 1.0))?;

    let x_scale = x_b.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    if x_b.iter().any(|&v| v < -1e-9 * x_scale) {
        return Err(Error::NumericFailure(
            "refined basic solution is not primal feasible".into(),
        ));
    }
    for (c, col) in cols.iter().enumerate().take(nc) {
        let reduced = -dot2(a_kept.column(c).iter().zip(y.iter()).map(|(&a, &y)| (a, y)).chain([(1.0, -1.0)]));
        if reduced < -DUAL_TOLERANCE {
            return Err(Error::NumericFailure(format!(
                "reduced cost {reduced:e} of column {} violates dual feasibility",
                col
            )));
        }
    }

    for (pos, &c) in basis.iter().enumerate() {
        weights[cols[c]] = x_b[pos].max(0.0);
    }
    let t_opt = dot2(weights.iter().map(|&w| (w, 1.0)));
    let dual_obj = dot2(b_kept.iter().zip(y.iter()).map(|(&b, &y)| (b, y)));
    let duality_gap = (t_opt - dual_obj).abs();
    if duality_gap > GAP_TOLERANCE * t_opt.max(1.0) {
        return Err(Error::NumericFailure(format!(
            "duality gap {duality_gap:e} exceeds tolerance"
        )));
    }
    for (pos, &r) in kept_rows.iter().enumerate() {
        duals[active_rows[r]] = y[pos] / row_scale[r];
    }
    Ok(LpSolution {
        t_opt,
        weights,
        duals,
        duality_gap,
    })
}

/// Solves `m·x = rhs`, then refines `x` against residuals accumulated in
/// doubled precision.
fn refined_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| Error::NumericFailure("singular optimal basis".into()))?;
    for _ in 0..REFINEMENT_STEPS {
        let residual = DVector::from_fn(rhs.len(), |i, _| {
            dot2(
                m.row(i)
                    .iter()
                    .zip(x.iter())
                    .map(|(&a, &v)| (-a, v))
                    .chain([(rhs[i], 1.0)]),
            )
        });
        let Some(dx) = lu.solve(&residual) else { break };
        x += dx;
    }
    Ok(x)
}

/// Dot product with error-free transformations, about as accurate as if
/// computed in twice the working precision.
fn dot2(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (a, b) in terms {
        let prod = a * b;
        let prod_err = a.mul_add(b, -prod);
        let next = sum + prod;
        let z = next - sum;
        err += (sum - (next - z)) + (prod - z) + prod_err;
        sum = next;
    }
    sum + err
}

type Lu = nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Basis column: a structural column or the artificial of a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Column(usize),
    Artificial(usize),
}

struct Revised<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    rows: Vec<usize>,
    basis: Vec<Var>,
}

impl Revised<'_> {
    fn column(&self, v: Var) -> DVector<f64> {
        match v {
            Var::Column(c) => DVector::from_fn(self.rows.len(), |i, _| self.a[(self.rows[i], c)]),
            Var::Artificial(r) => {
                DVector::from_fn(self.rows.len(), |i, _| if self.rows[i] == r { 1.0 } else { 0.0 })
            }
        }
    }

    /// LU factors of the basis matrix and of its transpose.
    fn basis_matrix(&self) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &v) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.column(v));
        }
        bmat
    }

    fn factor(&self) -> Result<(Lu, Lu)> {
        let bmat = self.basis_matrix();
        let lu = bmat.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::NumericFailure("singular simplex basis".into()));
        }
        Ok((lu, bmat.transpose().lu()))
    }

    fn rhs(&self) -> DVector<f64> {
        DVector::from_fn(self.rows.len(), |i, _| self.b[self.rows[i]])
    }

    /// Pivots until no column with negative reduced cost remains. Artificials
    /// cost 1 in phase one and may not enter in phase two.
    fn optimize(&mut self, phase_one: bool) -> Result<()> {
        let n = self.a.ncols();
        let cost = |v: Var| match (v, phase_one) {
            (Var::Column(_), true) | (Var::Artificial(_), false) => 0.0,
            _ => 1.0,
        };
        let mut degenerate_run = 0usize;
        for _ in 0..MAX_PIVOTS {
            let (lu, lut) = self.factor()?;
            let mut x = lu.solve(&self.rhs()).expect("invertible basis");
            x.iter_mut().for_each(|v| *v = v.max(0.0));
            let c_b = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|&v| cost(v)));
            let y = lut.solve(&c_b).expect("invertible basis");

            let bland = degenerate_run > BLAND_AFTER;
            let mut entering: Option<(usize, f64)> = None;
            for c in 0..n {
                if self.basis.contains(&Var::Column(c)) {
                    continue;
                }
                let reduced = cost(Var::Column(c))
                    - self.rows.iter().enumerate().map(|(i, &r)| y[i] * self.a[(r, c)]).sum::<f64>();
                if reduced < -PRICE_TOLERANCE && entering.is_none_or(|(_, best)| reduced < best) {
                    entering = Some((c, reduced));
                    if bland {
                        break;
                    }
                }
            }
            let Some((c, _)) = entering else {
                return Ok(());
            };

            let w = lu.solve(&self.column(Var::Column(c))).expect("invertible basis");
            // Harris ratio test: bound the step with a small primal slack,
            // then take the largest pivot that stays within it.
            let w_scale = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let pivot_floor = PIVOT_TOLERANCE.max(RELATIVE_PIVOT * w_scale);
            let eligible: Vec<usize> = (0..w.len()).filter(|&k| w[k] > pivot_floor).collect();
            let theta = eligible
                .iter()
                .map(|&k| (x[k] + PRIMAL_SLACK) / w[k])
                .fold(f64::INFINITY, f64::min);
            let leave = eligible
                .into_iter()
                .filter(|&k| x[k] / w[k] <= theta)
                .max_by(|&i, &j| {
                    if bland {
                        self.basis[j].cmp(&self.basis[i])
                    } else {
                        w[i].total_cmp(&w[j])
                    }
                })
                .map(|k| (k, x[k] / w[k]));
            let Some((k, step)) = leave else {
                return Err(Error::LpUnbounded);
            };
            if step <= 1e-14 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.basis[k] = Var::Column(c);
        }
        Err(Error::NumericFailure("simplex pivot limit reached".into()))
    }

    /// Dual simplex pivots from an optimal but slightly infeasible basis, as
    /// left behind by tolerant ratio tests on degenerate problems. Returns
    /// whether the basis changed.
    fn restore_feasibility(&mut self) -> Result<bool> {
        let n = self.a.ncols();
        let mut changed = false;
        for _ in 0..MAX_PIVOTS {
            let x = refined_solve(&self.basis_matrix(), &self.rhs())?;
            let x_scale = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let Some(k) = (0..x.len())
                .filter(|&k| x[k] < -REPAIR_TOLERANCE * x_scale)
                .min_by(|&i, &j| x[i].total_cmp(&x[j]))
            else {
                return Ok(changed);
            };
            let (_, lut) = self.factor()?;
            let mut unit = DVector::zeros(self.basis.len());
            unit[k] = 1.0;
            let row = lut.solve(&unit).expect("invertible basis");
            let y = lut
                .solve(&DVector::from_element(self.basis.len(), 1.0))
                .expect("invertible basis");
            let along = |c: usize, v: &DVector<f64>| -> f64 {
                self.rows.iter().enumerate().map(|(i, &r)| v[i] * self.a[(r, c)]).sum()
            };
            let candidates: Vec<(usize, f64, f64)> = (0..n)
                .filter(|&c| !self.basis.contains(&Var::Column(c)))
                .map(|c| (c, along(c, &row), (1.0 - along(c, &y)).max(0.0)))
                .collect();
            let alpha_scale = candidates.iter().fold(0.0f64, |acc, t| acc.max(t.1.abs()));
            let floor = PIVOT_TOLERANCE.max(RELATIVE_PIVOT * alpha_scale);
            let theta = candidates
                .iter()
                .filter(|t| t.1 < -floor)
                .map(|t| (t.2 + PRICE_TOLERANCE) / -t.1)
                .fold(f64::INFINITY, f64::min);
            let Some(&(c, _, _)) = candidates
                .iter()
                .filter(|t| t.1 < -floor && t.2 / -t.1 <= theta)
                .max_by(|a, b| (-a.1).total_cmp(&-b.1))
            else {
                return Err(Error::NumericFailure(format!(
                    "cannot restore primal feasibility (basic value {:e})",
                    x[k]
                )));
            };
            self.basis[k] = Var::Column(c);
            changed = true;
        }
        Err(Error::NumericFailure("simplex pivot limit reached".into()))
    }

    /// Swaps artificials left at zero for structural columns, dropping rows
    /// that turn out to be redundant.
    fn expel_artificials(&mut self) -> Result<()> {
        let n = self.a.ncols();
        while let Some(k) = self.basis.iter().position(|v| matches!(v, Var::Artificial(_))) {
            let (_, lut) = self.factor()?;
            let mut unit = DVector::zeros(self.basis.len());
            unit[k] = 1.0;
            let row = lut.solve(&unit).expect("invertible basis");
            let candidate = (0..n)
                .filter(|&c| !self.basis.contains(&Var::Column(c)))
                .map(|c| {
                    let coef: f64 =
                        self.rows.iter().enumerate().map(|(i, &r)| row[i] * self.a[(r, c)]).sum();
                    (c, coef.abs())
                })
                .filter(|&(_, coef)| coef > PIVOT_TOLERANCE)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match candidate {
                Some((c, _)) => self.basis[k] = Var::Column(c),
                None => {
                    let Var::Artificial(r) = self.basis.remove(k) else {
                        unreachable!()
                    };
                    self.rows.retain(|&x| x != r);
                }
            }
        }
        Ok(())
    }
}

/// Runs both phases; returns the optimal basic columns and the rows that
/// survive removal of redundant constraints.
fn simplex(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(Vec<usize>, Vec<usize>)> {
    let m = a.nrows();
    let mut lp = Revised {
        a,
        b,
        rows: (0..m).collect(),
        basis: (0..m).map(Var::Artificial).collect(),
    };
    lp.optimize(true)?;

    let (lu, _) = lp.factor()?;
    let x = lu.solve(&lp.rhs()).expect("invertible basis");
    let infeasibility: f64 = lp
        .basis
        .iter()
        .zip(x.iter())
        .filter(|(v, _)| matches!(v, Var::Artificial(_)))
        .map(|(_, &v)| v.max(0.0))
        .sum();
    let b_scale = b.iter().fold(0.0f64, |acc, v| acc.max(*v)).max(1.0);
    if infeasibility > 1e-9 * b_scale {
        return Err(Error::Infeasible(format!(
            "demands cannot be met by any combination (residual {infeasibility:e})"
        )));
    }

    lp.expel_artificials()?;
    lp.optimize(false)?;
    for _ in 0..CLEANUP_ROUNDS {
        if !lp.restore_feasibility()? {
            break;
        }
        lp.optimize(false)?;
    }
    let basis = lp
        .basis
        .iter()
        .map(|&v| match v {
            Var::Column(c) => c,
            Var::Artificial(_) => unreachable!("artificials were expelled"),
        })
        .collect();
    Ok((basis, lp.rows))
}
