//! Dense two-phase primal simplex with Bland's rule.
//!
//! Problems here are tiny (a few dozen rows), so the tableau is dense and
//! reduced costs are recomputed every pivot. The solver is generic over the
//! scalar so the same code runs in `f64` and in exact rationals.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

pub trait LpScalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact conversion for rationals; identity for floats.
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Pivot-size threshold: |v| above this counts as nonzero.
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    /// Tolerance used to accept phase-one residuals as zero.
    fn feasible_residual(&self) -> bool;
}

const F64_PIVOT_EPS: f64 = 1e-10;
const F64_FEAS_EPS: f64 = 1e-8;

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_pos(&self) -> bool {
        *self > F64_PIVOT_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -F64_PIVOT_EPS
    }
    fn feasible_residual(&self) -> bool {
        self.abs() <= F64_FEAS_EPS
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        BigRational::from_integer(BigInt::from(1))
    }
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite coefficient")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn feasible_residual(&self) -> bool {
        self.is_zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

/// `maximize objective · v` subject to `rows` and `v >= 0`.
#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<Row<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Infeasible,
    Unbounded,
    Optimal { value: T, point: Vec<T> },
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![T::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) {
        debug_assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> LpOutcome<T> {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau<T> {
    /// m rows of `cols + 1` entries; the last entry is the right-hand side.
    rows: Vec<Vec<T>>,
    basis: Vec<usize>,
    cols: usize,
    structural: usize,
    first_artificial: usize,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars;
        // normalise to rhs >= 0
        let normalized: Vec<(Vec<T>, Relation, T)> = lp
            .rows
            .iter()
            .map(|r| {
                if r.rhs < T::zero() {
                    let rel = match r.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (
                        r.coeffs.iter().map(|c| -c.clone()).collect(),
                        rel,
                        -r.rhs.clone(),
                    )
                } else {
                    (r.coeffs.clone(), r.relation, r.rhs.clone())
                }
            })
            .collect();

        let slack_count = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Eq)
            .count();
        let artificial_count = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Le)
            .count();
        let first_artificial = n + slack_count;
        let cols = first_artificial + artificial_count;

        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let mut next_slack = n;
        let mut next_art = first_artificial;
        for (coeffs, rel, rhs) in normalized {
            let mut row = coeffs;
            row.resize(cols + 1, T::zero());
            match rel {
                Relation::Le => {
                    row[next_slack] = T::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -T::one();
                    next_slack += 1;
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = T::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            row[cols] = rhs;
            rows.push(row);
        }
        Tableau {
            rows,
            basis,
            cols,
            structural: n,
            first_artificial,
        }
    }

    fn solve(mut self, objective: &[T]) -> LpOutcome<T> {
        if self.first_artificial < self.cols {
            let mut phase_one = vec![T::zero(); self.cols];
            for c in phase_one.iter_mut().skip(self.first_artificial) {
                *c = -T::one();
            }
            // phase one is bounded below by zero
            self.optimize(&phase_one, self.cols);
            let residual = self
                .basis
                .iter()
                .zip(&self.rows)
                .filter(|(b, _)| **b >= self.first_artificial)
                .fold(T::zero(), |acc, (_, row)| acc + row[self.cols].clone());
            if !residual.feasible_residual() {
                return LpOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }

        let mut cost = objective.to_vec();
        cost.resize(self.cols, T::zero());
        if !self.optimize(&cost, self.first_artificial) {
            return LpOutcome::Unbounded;
        }
        let mut point = vec![T::zero(); self.structural];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.structural {
                point[b] = row[self.cols].clone();
            }
        }
        let value = objective
            .iter()
            .zip(&point)
            .fold(T::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
        LpOutcome::Optimal { value, point }
    }

    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] >= self.first_artificial {
                let entering = (0..self.first_artificial)
                    .find(|&j| self.rows[i][j].is_pos() || self.rows[i][j].is_neg());
                match entering {
                    Some(j) => self.pivot(i, j),
                    None => {
                        // redundant constraint
                        self.rows.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    /// Maximizes `cost` over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[T], allowed: usize) -> bool {
        loop {
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut reduced = cost[j].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if row[j].is_pos() || row[j].is_neg() {
                        reduced = reduced - cost[b].clone() * row[j].clone();
                    }
                }
                if reduced.is_pos() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return true;
            };

            let mut leave: Option<(usize, T)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[j].is_pos() {
                    continue;
                }
                let ratio = row[self.cols].clone() / row[j].clone();
                let better = match &leave {
                    None => true,
                    Some((k, best)) => {
                        ratio < *best || (!(ratio > *best) && self.basis[i] < self.basis[*k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((i, _)) = leave else {
                return false;
            };
            self.pivot(i, j);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let pivot = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        self.rows[r][c] = T::one();
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let factor = row[c].clone();
            if !(factor.is_pos() || factor.is_neg()) {
                row[c] = T::zero();
                continue;
            }
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - factor.clone() * p.clone();
            }
            row[c] = T::zero();
        }
        self.basis[r] = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::<f64>::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        match lp.solve() {
            LpOutcome::Optimal { value, point } => {
                assert!((value - 36.0).abs() < 1e-9);
                assert!((point[0] - 2.0).abs() < 1e-9 && (point[1] - 6.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ge_and_eq_rows_need_phase_one() {
        // max -x - y, x + y >= 2, x - y = 1 -> (1.5, 0.5)
        let mut lp = LinearProgram::<BigRational>::new(2);
        lp.objective = vec![rat(-1, 1), rat(-1, 1)];
        lp.add_row(vec![rat(1, 1), rat(1, 1)], Relation::Ge, rat(2, 1));
        lp.add_row(vec![rat(1, 1), rat(-1, 1)], Relation::Eq, rat(1, 1));
        match lp.solve() {
            LpOutcome::Optimal { value, point } => {
                assert_eq!(value, rat(-2, 1));
                assert_eq!(point, vec![rat(3, 2), rat(1, 2)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::<f64>::new(1);
        lp.add_row(vec![1.0], Relation::Le, 1.0);
        lp.add_row(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::<f64>::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x <= -3  (x >= 3), max -x
        let mut lp = LinearProgram::<f64>::new(1);
        lp.objective = vec![-1.0];
        lp.add_row(vec![-1.0], Relation::Le, -3.0);
        match lp.solve() {
            LpOutcome::Optimal { point, .. } => assert!((point[0] - 3.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::<f64>::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_row(vec![1.0, 1.0], Relation::Eq, 1.0);
        lp.add_row(vec![2.0, 2.0], Relation::Eq, 2.0);
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let mut lp = LinearProgram::<BigRational>::new(4);
        lp.objective = vec![rat(3, 4), rat(-20, 1), rat(1, 2), rat(-6, 1)];
        lp.add_row(
            vec![rat(1, 4), rat(-8, 1), rat(-1, 1), rat(9, 1)],
            Relation::Le,
            rat(0, 1),
        );
        lp.add_row(
            vec![rat(1, 2), rat(-12, 1), rat(-1, 2), rat(3, 1)],
            Relation::Le,
            rat(0, 1),
        );
        lp.add_row(
            vec![rat(0, 1), rat(0, 1), rat(1, 1), rat(0, 1)],
            Relation::Le,
            rat(1, 1),
        );
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, rat(5, 4)),
            other => panic!("{other:?}"),
        }
    }
}
