//! Small dense linear programs: `maximize c·x  s.t.  A·x ≤ g,  lo ≤ x ≤ hi`.
//!
//! A two-phase tableau simplex. Pricing is Dantzig's largest coefficient
//! until a run of degenerate pivots appears, after which Bland's rule takes
//! over so the method cannot cycle.

use crate::error::{Error, Result};

/// Feasibility tolerance promised for optimal solutions.
pub const TAU_LP: f64 = 1e-8;

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    matrix: Vec<Vec<f64>>,
    bounds: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Option<Vec<f64>>,
    pub value: Option<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        Self {
            status,
            x: None,
            value: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LinearProgram {
    /// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
    pub fn new(
        objective: Vec<f64>,
        matrix: Vec<Vec<f64>>,
        bounds: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::MalformedLp(format!(
                "{n} objective coefficients but {} lower and {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if matrix.len() != bounds.len() {
            return Err(Error::MalformedLp(format!(
                "{} constraint rows but {} right-hand sides",
                matrix.len(),
                bounds.len()
            )));
        }
        if let Some((i, row)) = matrix.iter().enumerate().find(|(_, row)| row.len() != n) {
            return Err(Error::MalformedLp(format!("row {i} has {} columns, expected {n}", row.len())));
        }
        for j in 0..n {
            if !lower[j].is_finite() || upper[j].is_nan() || lower[j] > upper[j] {
                return Err(Error::MalformedLp(format!(
                    "variable {j} has bounds [{}, {}]",
                    lower[j], upper[j]
                )));
            }
        }
        if objective.iter().chain(bounds.iter()).chain(matrix.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::MalformedLp("non-finite coefficient".into()));
        }
        Ok(Self {
            objective,
            matrix,
            bounds,
            lower,
            upper,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.matrix.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let rows = self.matrix.iter().zip(&self.bounds).map(|(row, g)| dot(row, x) - g);
        let lo = self.lower.iter().zip(x).map(|(l, v)| l - v);
        let hi = self.upper.iter().zip(x).map(|(h, v)| v - h);
        rows.chain(lo).chain(hi).fold(0.0, f64::max)
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }
}

/// Incremental construction with sparse rows.
#[derive(Debug, Clone)]
pub struct LpBuilder {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    matrix: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

impl LpBuilder {
    /// `n` variables, each initially bounded to `[0, ∞)`.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            matrix: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn maximize(mut self, var: usize, coeff: f64) -> Self {
        self.objective[var] = coeff;
        self
    }

    pub fn bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.lower[var] = lo;
        self.upper[var] = hi;
        self
    }

    /// Adds `Σ coeff·x[var] ≤ rhs`; repeated variables accumulate.
    pub fn le(&mut self, terms: &[(usize, f64)], rhs: f64) -> &mut Self {
        let mut row = vec![0.0; self.objective.len()];
        for &(var, coeff) in terms {
            row[var] += coeff;
        }
        self.matrix.push(row);
        self.bounds.push(rhs);
        self
    }

    pub fn build(self) -> Result<LinearProgram> {
        LinearProgram::new(self.objective, self.matrix, self.bounds, self.lower, self.upper)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Reduced costs `c_B B⁻¹ A_j − c_j`; last entry is the objective value.
    reduced: Vec<f64>,
    cols: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn price(&mut self, cost: &[f64]) {
        let mut reduced: Vec<f64> = cost.iter().map(|c| -c).collect();
        reduced.push(0.0);
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (r, v) in reduced.iter_mut().zip(row) {
                    *r += cb * v;
                }
            }
        }
        self.reduced = reduced;
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let p = self.rows[pr][pc];
        for v in self.rows[pr].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[pr].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == pr {
                continue;
            }
            let f = row[pc];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.reduced[pc];
        if f != 0.0 {
            for (v, pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn run(&mut self, allowed: usize) -> Outcome {
        let mut streak = 0usize;
        loop {
            let bland = streak >= DEGENERATE_STREAK;
            let entering = if bland {
                (0..allowed).find(|&j| self.reduced[j] < -COST_EPS)
            } else {
                (0..allowed)
                    .filter(|&j| self.reduced[j] < -COST_EPS)
                    .min_by(|&a, &b| self.reduced[a].total_cmp(&self.reduced[b]))
            };
            let Some(pc) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let coef = self.rows[i][pc];
                if coef > PIVOT_EPS {
                    let ratio = self.rhs(i) / coef;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-13 || (ratio <= lr + 1e-13 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((pr, ratio)) = leave else {
                return Outcome::Unbounded;
            };
            streak = if ratio.abs() <= 1e-13 { streak + 1 } else { 0 };
            self.pivot(pr, pc);
        }
    }
}

/// Solves the program. Infeasibility and unboundedness are reported through
/// [`LpSolution::status`].
pub fn solve(lp: &LinearProgram) -> LpSolution {
    let n = lp.num_vars();

    // Shift to y = x − lo ≥ 0 and turn finite upper bounds into rows.
    let mut rows: Vec<(Vec<f64>, f64)> = lp
        .matrix
        .iter()
        .zip(&lp.bounds)
        .map(|(row, g)| (row.clone(), g - dot(row, &lp.lower)))
        .collect();
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push((row, lp.upper[j] - lp.lower[j]));
        }
    }
    let m = rows.len();
    let needs_art: Vec<bool> = rows.iter().map(|(_, rhs)| *rhs < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let slack0 = n;
    let art0 = n + m;
    let cols = n + m + n_art;

    let mut tab_rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut next_art = art0;
    for (i, (row, rhs)) in rows.into_iter().enumerate() {
        let mut t = vec![0.0; cols + 1];
        let sign = if needs_art[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            t[j] = sign * row[j];
        }
        t[slack0 + i] = sign;
        t[cols] = sign * rhs;
        if needs_art[i] {
            t[next_art] = 1.0;
            basis.push(next_art);
            next_art += 1;
        } else {
            basis.push(slack0 + i);
        }
        tab_rows.push(t);
    }
    let mut tab = Tableau {
        rows: tab_rows,
        basis,
        reduced: Vec::new(),
        cols,
    };

    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(art0) {
            *c = -1.0;
        }
        tab.price(&cost);
        // Phase one is bounded below by zero.
        let _ = tab.run(cols);
        if tab.reduced[cols] < -1e-9 {
            return LpSolution::without_point(LpStatus::Infeasible);
        }
        // Drive remaining artificial variables out of the basis.
        for i in 0..m {
            if tab.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    tab.price(&cost);
    if let Outcome::Unbounded = tab.run(art0) {
        return LpSolution::without_point(LpStatus::Unbounded);
    }

    let mut x = lp.lower.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] += tab.rhs(i).max(0.0);
        }
    }
    for j in 0..n {
        x[j] = x[j].clamp(lp.lower[j], lp.upper[j]);
    }
    let value = lp.value_at(&x);
    LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        value: Some(value),
    }
}
