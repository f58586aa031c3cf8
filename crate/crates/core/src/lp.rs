//! Small dense linear programs solved exactly.
//!
//! Two-phase tableau simplex with Bland's rule, so it terminates on the
//! degenerate programs that potential synthesis produces. All variables are
//! non-negative; the objective is minimized.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint<S> {
    pub coeffs: Vec<S>,
    pub relation: Relation,
    pub rhs: S,
}

#[derive(Clone, Debug)]
pub struct LinearProgram<S> {
    n_vars: usize,
    objective: Vec<S>,
    constraints: Vec<Constraint<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome<S> {
    Optimal { x: Vec<S>, value: S },
    Infeasible,
    Unbounded,
}

impl<S: Scalar> LpOutcome<S> {
    pub fn optimal(self) -> Option<(Vec<S>, S)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

impl<S: Scalar> LinearProgram<S> {
    /// Minimize `objective · x` over `x >= 0`.
    pub fn minimize(objective: Vec<S>) -> Self {
        LinearProgram {
            n_vars: objective.len(),
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn constrain(&mut self, coeffs: Vec<S>, relation: Relation, rhs: S) -> &mut Self {
        assert_eq!(coeffs.len(), self.n_vars, "constraint width");
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn constraints(&self) -> &[Constraint<S>] {
        &self.constraints
    }

    pub fn objective(&self) -> &[S] {
        &self.objective
    }

    pub fn solve(&self) -> LpOutcome<S> {
        Tableau::build(self).run(&self.objective)
    }
}

struct Tableau<S> {
    // rows[i] = coefficients over all columns followed by the rhs
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
    n_struct: usize,
    n_cols: usize,
    artificial_from: usize,
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let n = lp.n_vars;
        // Normalize to non-negative right-hand sides.
        let norm: Vec<(Vec<S>, Relation, S)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < S::zero() {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v.clone()).collect(), flipped, -c.rhs.clone())
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let n_slack = norm.iter().filter(|c| c.1 != Relation::Eq).count();
        let n_art = norm.iter().filter(|c| c.1 != Relation::Le).count();
        let artificial_from = n + n_slack;
        let n_cols = artificial_from + n_art;
        let mut rows = Vec::with_capacity(norm.len());
        let mut basis = Vec::with_capacity(norm.len());
        let (mut s_idx, mut a_idx) = (n, artificial_from);
        for (coeffs, rel, rhs) in norm {
            let mut row = vec![S::zero(); n_cols + 1];
            row[..n].clone_from_slice(&coeffs);
            match rel {
                Relation::Le => {
                    row[s_idx] = S::one();
                    basis.push(s_idx);
                    s_idx += 1;
                }
                Relation::Ge => {
                    row[s_idx] = -S::one();
                    s_idx += 1;
                    row[a_idx] = S::one();
                    basis.push(a_idx);
                    a_idx += 1;
                }
                Relation::Eq => {
                    row[a_idx] = S::one();
                    basis.push(a_idx);
                    a_idx += 1;
                }
            }
            row[n_cols] = rhs;
            rows.push(row);
        }
        Tableau {
            rows,
            basis,
            n_struct: n,
            n_cols,
            artificial_from,
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
        }
        self.basis[r] = col;
    }

    /// Minimizes `cost · columns` over the allowed columns. Returns false if
    /// unbounded.
    fn optimize(&mut self, cost: &[S], allowed: usize) -> bool {
        loop {
            // Reduced cost of column j: c_j - c_B · column_j.
            let entering = (0..allowed).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut red = cost[j].clone();
                for (row, &b) in self.rows.iter().zip(&self.basis) {
                    if !row[j].is_zero() && !cost[b].is_zero() {
                        red -= cost[b].clone() * row[j].clone();
                    }
                }
                red < S::zero()
            });
            let Some(col) = entering else { return true };
            let mut leave: Option<(usize, S)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] > S::zero() {
                    let ratio = row[self.n_cols].clone() / row[col].clone();
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, col);
        }
    }

    fn value(&self, cost: &[S]) -> S {
        self.rows
            .iter()
            .zip(&self.basis)
            .fold(S::zero(), |acc, (row, &b)| acc + cost[b].clone() * row[self.n_cols].clone())
    }

    fn run(mut self, objective: &[S]) -> LpOutcome<S> {
        if self.artificial_from < self.n_cols {
            let mut phase1 = vec![S::zero(); self.n_cols];
            for c in phase1.iter_mut().skip(self.artificial_from) {
                *c = S::one();
            }
            self.optimize(&phase1, self.n_cols);
            if self.value(&phase1) > S::zero() {
                return LpOutcome::Infeasible;
            }
            // Drive zero-valued artificials out of the basis; drop rows that
            // turn out to be redundant.
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] >= self.artificial_from {
                    match (0..self.artificial_from).find(|&j| !self.rows[r][j].is_zero()) {
                        Some(col) => self.pivot(r, col),
                        None => {
                            self.rows.remove(r);
                            self.basis.remove(r);
                            continue;
                        }
                    }
                }
                r += 1;
            }
        }
        let mut cost = vec![S::zero(); self.n_cols];
        cost[..self.n_struct].clone_from_slice(objective);
        if !self.optimize(&cost, self.artificial_from) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![S::zero(); self.n_struct];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.n_struct {
                x[b] = row[self.n_cols].clone();
            }
        }
        let value = objective
            .iter()
            .zip(&x)
            .fold(S::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
        LpOutcome::Optimal { x, value }
    }
}
