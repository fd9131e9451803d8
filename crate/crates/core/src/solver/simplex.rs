//! Dense bounded dual simplex over `[A -I] (x, s) = 0` with every structural variable boxed.

use nalgebra::DMatrix;

use crate::milp::{Problem, Sense};

const PRIMAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum State {
    Basic(usize),
    Lower,
    Upper,
}

/// Constraint data shared by every LP of one branch-and-bound run.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub n: usize,
    pub m: usize,
    /// Row-major m × n.
    pub a: Vec<f64>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    pub cost: Vec<f64>,
}

impl LpData {
    pub fn from_problem(p: &Problem) -> Self {
        let n = p.variables.len();
        let m = p.constraints.len();
        let mut a = vec![0.0; m * n];
        let mut row_lo = Vec::with_capacity(m);
        let mut row_hi = Vec::with_capacity(m);
        for (i, c) in p.constraints.iter().enumerate() {
            for (v, coef) in &c.terms {
                a[i * n + v.0] += coef;
            }
            let (lo, hi) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            row_lo.push(lo);
            row_hi.push(hi);
        }
        let mut cost = vec![0.0; n];
        for (v, c) in &p.objective {
            cost[v.0] += c;
        }
        LpData {
            n,
            m,
            a,
            row_lo,
            row_hi,
            cost,
        }
    }

    /// Column `j` of `[A -I]`.
    fn column(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            for i in 0..self.m {
                out[i] = self.a[i * self.n + j];
            }
        } else {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[j - self.n] = -1.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    m: usize,
    cols: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    pub iterations: u64,
}

/// Basis snapshot used to restart a node without replaying its ancestors.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    basis: Vec<usize>,
    state: Vec<State>,
}

impl Tableau {
    /// Slack basis with every structural at the bound its cost prefers, which is dual feasible.
    pub fn cold(data: &LpData, lo: &[f64], hi: &[f64]) -> Self {
        let (m, n) = (data.m, data.n);
        let cols = n + m;
        let mut t = vec![0.0; m * cols];
        for i in 0..m {
            for j in 0..n {
                t[i * cols + j] = -data.a[i * n + j];
            }
            t[i * cols + n + i] = 1.0;
        }
        let mut cost = data.cost.clone();
        cost.extend(std::iter::repeat(0.0).take(m));
        let mut all_lo = lo.to_vec();
        all_lo.extend_from_slice(&data.row_lo);
        let mut all_hi = hi.to_vec();
        all_hi.extend_from_slice(&data.row_hi);
        let mut state = Vec::with_capacity(cols);
        for j in 0..n {
            state.push(if data.cost[j] >= 0.0 { State::Lower } else { State::Upper });
        }
        for i in 0..m {
            state.push(State::Basic(i));
        }
        let mut tab = Tableau {
            m,
            cols,
            t,
            basis: (n..cols).collect(),
            state,
            lo: all_lo,
            hi: all_hi,
            x: vec![0.0; cols],
            d: cost.clone(),
            cost,
            iterations: 0,
        };
        tab.place_nonbasic();
        tab.recompute_basic();
        tab
    }

    /// Rebuild the tableau for `basis` under new structural bounds.
    /// Returns `None` when the basis is singular or cannot be made dual feasible.
    pub fn from_basis(data: &LpData, lo: &[f64], hi: &[f64], b: &Basis) -> Option<Self> {
        let mut tab = Tableau::cold(data, lo, hi);
        tab.basis = b.basis.clone();
        tab.state = b.state.clone();
        if !tab.refactor(data) {
            return None;
        }
        for j in 0..tab.cols {
            let wrong = match tab.state[j] {
                State::Lower => tab.d[j] < -1e-9,
                State::Upper => tab.d[j] > 1e-9,
                State::Basic(_) => false,
            };
            if wrong && tab.lo[j] != tab.hi[j] {
                let flipped = if tab.state[j] == State::Lower { State::Upper } else { State::Lower };
                let target = if flipped == State::Lower { tab.lo[j] } else { tab.hi[j] };
                if !target.is_finite() {
                    return None;
                }
                tab.state[j] = flipped;
            }
        }
        tab.place_nonbasic();
        tab.recompute_basic();
        Some(tab)
    }

    pub fn snapshot(&self) -> Basis {
        Basis {
            basis: self.basis.clone(),
            state: self.state.clone(),
        }
    }

    /// Change the bounds of structural `j`, keeping a nonbasic variable at the same side.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        match self.state[j] {
            State::Lower => self.x[j] = lo,
            State::Upper => self.x[j] = hi,
            State::Basic(_) => return,
        }
        self.recompute_basic();
    }

    pub fn values(&self, n: usize) -> Vec<f64> {
        self.x[..n].to_vec()
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    fn place_nonbasic(&mut self) {
        for j in 0..self.cols {
            match self.state[j] {
                State::Lower => self.x[j] = self.lo[j],
                State::Upper => self.x[j] = self.hi[j],
                State::Basic(_) => {}
            }
        }
    }

    fn recompute_basic(&mut self) {
        let cols = self.cols;
        for i in 0..self.m {
            let row = &self.t[i * cols..(i + 1) * cols];
            let mut s = 0.0;
            for j in 0..cols {
                if !matches!(self.state[j], State::Basic(_)) && row[j] != 0.0 {
                    s -= row[j] * self.x[j];
                }
            }
            self.x[self.basis[i]] = s;
        }
    }

    /// Recompute `B^-1 [A -I]` and reduced costs from the current basis.
    fn refactor(&mut self, data: &LpData) -> bool {
        let m = self.m;
        if m == 0 {
            self.d = self.cost.clone();
            return true;
        }
        let mut col = vec![0.0; m];
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            data.column(j, &mut col);
            for i in 0..m {
                bmat[(i, k)] = col[i];
            }
        }
        let lu = bmat.lu();
        let mut rhs = DMatrix::<f64>::zeros(m, self.cols);
        for j in 0..self.cols {
            data.column(j, &mut col);
            for i in 0..m {
                rhs[(i, j)] = col[i];
            }
        }
        let Some(sol) = lu.solve(&rhs) else {
            return false;
        };
        if sol.iter().any(|v| !v.is_finite()) {
            return false;
        }
        for i in 0..m {
            for j in 0..self.cols {
                self.t[i * self.cols + j] = sol[(i, j)];
            }
        }
        for (k, &j) in self.basis.iter().enumerate() {
            self.state[j] = State::Basic(k);
        }
        for j in 0..self.cols {
            let mut dj = self.cost[j];
            if !matches!(self.state[j], State::Basic(_)) {
                for i in 0..m {
                    dj -= self.cost[self.basis[i]] * self.t[i * self.cols + j];
                }
            } else {
                dj = 0.0;
            }
            self.d[j] = dj;
        }
        true
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.t[r * cols + q];
        for j in 0..cols {
            self.t[r * cols + j] /= piv;
        }
        self.t[r * cols + q] = 1.0;
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for row in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = row[q];
            if f != 0.0 {
                for j in 0..cols {
                    row[j] -= f * prow[j];
                }
                row[q] = 0.0;
            }
        }
        let f = self.d[q];
        if f != 0.0 {
            for j in 0..cols {
                self.d[j] -= f * prow[j];
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.state[q] = State::Basic(r);
    }

    /// Run dual simplex iterations until primal feasibility or a certificate of infeasibility.
    pub fn solve(&mut self, data: &LpData, max_iter: usize) -> LpStatus {
        let bland_after = 10 * self.m.max(1);
        let mut local = 0usize;
        loop {
            if local >= max_iter {
                return LpStatus::IterationLimit;
            }
            let bland = local >= bland_after;
            // leaving row
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let b = self.basis[i];
                let xb = self.x[b];
                let inf = if xb < self.lo[b] - PRIMAL_TOL {
                    self.lo[b] - xb
                } else if xb > self.hi[b] + PRIMAL_TOL {
                    xb - self.hi[b]
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((r, best)) => {
                        if bland {
                            b < self.basis[r]
                        } else {
                            inf > best
                        }
                    }
                };
                if better {
                    leave = Some((i, inf));
                }
            }
            let Some((r, _)) = leave else {
                return LpStatus::Optimal;
            };
            let b = self.basis[r];
            let increase = self.x[b] < self.lo[b];
            // entering column by the dual ratio test
            let cols = self.cols;
            let row = &self.t[r * cols..(r + 1) * cols];
            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..cols {
                let st = self.state[j];
                if matches!(st, State::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let alpha = row[j];
                let ok = match (st, increase) {
                    (State::Lower, true) => alpha < -PIVOT_TOL,
                    (State::Upper, true) => alpha > PIVOT_TOL,
                    (State::Lower, false) => alpha > PIVOT_TOL,
                    (State::Upper, false) => alpha < -PIVOT_TOL,
                    _ => false,
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = match enter {
                    None => true,
                    Some((_, best, best_alpha)) => {
                        if ratio < best - 1e-12 {
                            true
                        } else if ratio <= best + 1e-12 {
                            !bland && alpha.abs() > best_alpha
                        } else {
                            false
                        }
                    }
                };
                if better {
                    enter = Some((j, ratio, alpha.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return LpStatus::Infeasible;
            };
            self.pivot(r, q);
            self.state[b] = if increase { State::Lower } else { State::Upper };
            self.x[b] = if increase { self.lo[b] } else { self.hi[b] };
            local += 1;
            self.iterations += 1;
            if local % REFACTOR_EVERY == 0 && !self.refactor(data) {
                return LpStatus::IterationLimit;
            }
            self.recompute_basic();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Problem, VarKind};

    fn lp(p: &Problem) -> (LpStatus, f64, Vec<f64>) {
        let data = LpData::from_problem(p);
        let lo: Vec<f64> = p.variables.iter().map(|v| v.lower).collect();
        let hi: Vec<f64> = p.variables.iter().map(|v| v.upper).collect();
        let mut t = Tableau::cold(&data, &lo, &hi);
        let s = t.solve(&data, 10_000);
        (s, t.objective(), t.values(data.n))
    }

    #[test]
    fn small_maximization() {
        // max 3x + 2y st x + y <= 4, x + 3y <= 6, x <= 3
        let mut p = Problem::new("t");
        let x = p.add_var("x", VarKind::Continuous, 0.0, 3.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 100.0);
        p.objective = vec![(x, -3.0), (y, -2.0)];
        p.add_row("a", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        p.add_row("b", vec![(x, 1.0), (y, 3.0)], Sense::Le, 6.0);
        let (s, obj, v) = lp(&p);
        assert_eq!(s, LpStatus::Optimal);
        assert!((obj + 11.0).abs() < 1e-9);
        assert!((v[0] - 3.0).abs() < 1e-9 && (v[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", VarKind::Continuous, 0.0, 1.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 1.0);
        p.add_row("a", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        assert_eq!(lp(&p).0, LpStatus::Infeasible);
    }

    #[test]
    fn equality_rows() {
        // min x + y st x - y = 1, x + y >= 3
        let mut p = Problem::new("t");
        let x = p.add_var("x", VarKind::Continuous, -10.0, 10.0);
        let y = p.add_var("y", VarKind::Continuous, -10.0, 10.0);
        p.objective = vec![(x, 1.0), (y, 1.0)];
        p.add_row("e", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 1.0);
        p.add_row("g", vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0);
        let (s, obj, v) = lp(&p);
        assert_eq!(s, LpStatus::Optimal);
        assert!((obj - 3.0).abs() < 1e-9);
        assert!((v[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn warm_restart_after_bound_change() {
        let mut p = Problem::new("t");
        let x = p.add_var("x", VarKind::Continuous, 0.0, 10.0);
        let y = p.add_var("y", VarKind::Continuous, 0.0, 10.0);
        p.objective = vec![(x, -1.0), (y, -1.0)];
        p.add_row("a", vec![(x, 2.0), (y, 1.0)], Sense::Le, 7.0);
        p.add_row("b", vec![(x, 1.0), (y, 2.0)], Sense::Le, 7.0);
        let data = LpData::from_problem(&p);
        let mut t = Tableau::cold(&data, &[0.0, 0.0], &[10.0, 10.0]);
        assert_eq!(t.solve(&data, 100), LpStatus::Optimal);
        let snap = t.snapshot();
        let mut w = Tableau::from_basis(&data, &[0.0, 0.0], &[2.0, 10.0], &snap).unwrap();
        assert_eq!(w.solve(&data, 100), LpStatus::Optimal);
        let mut c = Tableau::cold(&data, &[0.0, 0.0], &[2.0, 10.0]);
        assert_eq!(c.solve(&data, 100), LpStatus::Optimal);
        assert!((w.objective() - c.objective()).abs() < 1e-9);
        t.set_bounds(0, 0.0, 2.0);
        assert_eq!(t.solve(&data, 100), LpStatus::Optimal);
        assert!((t.objective() - c.objective()).abs() < 1e-9);
    }
}
