//! Bounded-variable two-phase revised simplex.
//!
//! Inequality rows receive slack variables; rows whose slack cannot start
//! feasible (and all equality rows) receive a phase-1 artificial instead of
//! being split into inequality pairs. Pricing is Dantzig's rule with a
//! switch to Bland's rule after a stall, which restores the termination
//! guarantee on degenerate instances.

use super::lu::{BasisEngine, SparseCols};
use super::{
    BasisGuess, LpError, LpProblem, LpSolution, Sense, Status, FEASIBILITY_TOL, PIVOT_TOL,
    TINY_PIVOT,
};

const DUAL_TOL: f64 = 1e-9;
const STALL_LIMIT: usize = 200;
const REFRESH_INTERVAL: usize = 100;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable parked at zero.
    FreeZero,
}

struct Worker {
    num_rows: usize,
    num_cols: usize,
    num_structural: usize,
    first_artificial: usize,
    cols: SparseCols,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    x_basic: Vec<f64>,
    engine: BasisEngine,
    rhs: Vec<f64>,
    /// Slack variable index per row; `usize::MAX` for equality rows.
    slack_of_row: Vec<usize>,
    // scratch, length num_rows
    duals: Vec<f64>,
    direction: Vec<f64>,
    iterations: usize,
    bland: bool,
    stall: usize,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Progress,
}

pub(super) fn solve(p: &LpProblem, hint: Option<&[BasisGuess]>) -> Result<LpSolution, LpError> {
    let mut w = Worker::build(p);

    // A usable hint starts the solve primal-feasible and skips phase 1.
    let warm_started = match hint {
        Some(h) => {
            let ok = w.try_hint(h);
            if !ok {
                w = Worker::build(p);
            }
            ok
        }
        None => false,
    };

    if warm_started {
        for j in w.first_artificial..w.num_cols {
            w.lower[j] = 0.0;
            w.upper[j] = 0.0;
        }
    } else {
        w.refactorize()?;
    }

    // Phase 1: minimize the sum of artificials when any were needed.
    if !warm_started && w.first_artificial < w.num_cols {
        let mut cost = vec![0.0; w.num_cols];
        for c in cost.iter_mut().skip(w.first_artificial) {
            *c = 1.0;
        }
        w.cost = cost;
        match w.run_phase()? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded => {
                return Err(LpError::Numerical(
                    "phase 1 reported unbounded; its objective is bounded below".into(),
                ));
            }
        }
        let infeas: f64 = w
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= w.first_artificial)
            .map(|(r, _)| w.x_basic[r].abs())
            .sum();
        if infeas > FEASIBILITY_TOL * (1.0 + w.rhs_scale()) {
            return Ok(LpSolution {
                status: Status::Infeasible,
                primal: Vec::new(),
                objective_value: f64::NAN,
                iterations: w.iterations,
            });
        }
        // Pin artificials at zero for phase 2.
        for j in w.first_artificial..w.num_cols {
            w.lower[j] = 0.0;
            w.upper[j] = 0.0;
            if !matches!(w.state[j], VarState::Basic(_)) {
                w.state[j] = VarState::AtLower;
            }
        }
        for (r, &j) in w.basis.iter().enumerate() {
            if j >= w.first_artificial {
                w.x_basic[r] = 0.0;
            }
        }
    }

    // Phase 2: the real objective.
    let mut cost = vec![0.0; w.num_cols];
    cost[..w.num_structural].copy_from_slice(p.objective_slice());
    w.cost = cost;
    w.bland = false;
    w.stall = 0;
    match w.run_phase()? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return Ok(LpSolution {
                status: Status::Unbounded,
                primal: Vec::new(),
                objective_value: f64::NAN,
                iterations: w.iterations,
            });
        }
    }

    // Remove accumulated drift before extracting the solution.
    w.refactorize()?;
    let mut primal = vec![0.0; w.num_structural];
    for (j, v) in primal.iter_mut().enumerate() {
        *v = w.value_of(j);
    }
    let objective_value = primal
        .iter()
        .zip(p.objective_slice())
        .map(|(x, c)| x * c)
        .sum();
    Ok(LpSolution {
        status: Status::Optimal,
        primal,
        objective_value,
        iterations: w.iterations,
    })
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Worker {
    fn build(p: &LpProblem) -> Worker {
        let m = p.rows.len();
        let n_struct = p.num_vars();

        let mut lower = p.lower_slice().to_vec();
        let mut upper = p.upper_slice().to_vec();

        // Initial values of structural variables: the finite bound nearest
        // zero, or zero for free variables.
        let mut state: Vec<VarState> = (0..n_struct)
            .map(|j| {
                if lower[j].is_finite() {
                    VarState::AtLower
                } else if upper[j].is_finite() {
                    VarState::AtUpper
                } else {
                    VarState::FreeZero
                }
            })
            .collect();

        // Row activities at the initial point.
        let mut activity = vec![0.0; m];
        for (i, row) in p.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, a) in &row.coefs {
                let v = match state[j] {
                    VarState::AtLower => lower[j],
                    VarState::AtUpper => upper[j],
                    _ => 0.0,
                };
                acc += a * v;
            }
            activity[i] = acc;
        }

        // Assemble columns: structurals, then slacks, then artificials.
        // Duplicate entries within a row are summed.
        let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coefs {
                col_entries[j].push((i, a));
            }
        }
        for entries in col_entries.iter_mut() {
            entries.sort_by_key(|&(i, _)| i);
            entries.dedup_by(|later, first| {
                if later.0 == first.0 {
                    first.1 += later.1;
                    true
                } else {
                    false
                }
            });
            entries.retain(|&(_, a)| a != 0.0);
        }

        let mut basis = vec![usize::MAX; m];
        let mut x_basic = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        let mut slack_of_row = vec![usize::MAX; m];
        let mut slack_cols: Vec<(usize, f64)> = Vec::new(); // (row, coef)
        let mut artificial_rows: Vec<(usize, f64)> = Vec::new(); // (row, coef)

        for (i, row) in p.rows.iter().enumerate() {
            rhs[i] = row.rhs;
            let resid = row.rhs - activity[i];
            match row.sense {
                Sense::Le => {
                    slack_cols.push((i, 1.0));
                    slack_of_row[i] = n_struct + slack_cols.len() - 1;
                    if resid >= 0.0 {
                        basis[i] = slack_of_row[i];
                        x_basic[i] = resid;
                    }
                }
                Sense::Ge => {
                    slack_cols.push((i, -1.0));
                    slack_of_row[i] = n_struct + slack_cols.len() - 1;
                    if resid <= 0.0 {
                        basis[i] = slack_of_row[i];
                        x_basic[i] = -resid;
                    }
                }
                Sense::Eq => {}
            }
            if basis[i] == usize::MAX {
                artificial_rows.push((i, if resid >= 0.0 { 1.0 } else { -1.0 }));
            }
        }

        let num_slacks = slack_cols.len();
        let first_artificial = n_struct + num_slacks;
        let num_cols = first_artificial + artificial_rows.len();

        // Slack states: nonbasic slacks start at their lower bound 0.
        for (k, &(row, _)) in slack_cols.iter().enumerate() {
            let j = n_struct + k;
            if basis[row] == j {
                state.push(VarState::Basic(row));
            } else {
                state.push(VarState::AtLower);
            }
        }
        for (k, &(row, coef)) in artificial_rows.iter().enumerate() {
            let j = first_artificial + k;
            basis[row] = j;
            let resid = rhs[row] - activity[row];
            x_basic[row] = resid / coef;
            state.push(VarState::Basic(row));
        }
        lower.extend(std::iter::repeat_n(0.0, num_cols - n_struct));
        upper.extend(std::iter::repeat_n(f64::INFINITY, num_cols - n_struct));

        // Flatten to CSC.
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for entries in &col_entries {
            for &(i, a) in entries {
                row_idx.push(i);
                values.push(a);
            }
            col_ptr.push(row_idx.len());
        }
        for &(i, coef) in &slack_cols {
            row_idx.push(i);
            values.push(coef);
            col_ptr.push(row_idx.len());
        }
        for &(i, coef) in &artificial_rows {
            row_idx.push(i);
            values.push(coef);
            col_ptr.push(row_idx.len());
        }
        let cols = SparseCols {
            col_ptr,
            row_idx,
            values,
        };

        Worker {
            num_rows: m,
            num_cols,
            num_structural: n_struct,
            first_artificial,
            cols,
            lower,
            upper,
            cost: vec![0.0; num_cols],
            state,
            basis,
            x_basic,
            engine: BasisEngine::new(m, REFRESH_INTERVAL),
            rhs,
            slack_of_row,
            duals: vec![0.0; m],
            direction: vec![0.0; m],
            iterations: 0,
            bland: false,
            stall: 0,
        }
    }

    fn rhs_scale(&self) -> f64 {
        self.rhs.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Installs a suggested basis if it is well-formed, nonsingular, and
    /// primal feasible at the default nonbasic point. Returns false (leaving
    /// the worker in an unspecified state) otherwise.
    fn try_hint(&mut self, hint: &[BasisGuess]) -> bool {
        if hint.len() != self.num_rows {
            return false;
        }
        let mut cols = Vec::with_capacity(self.num_rows);
        let mut seen = vec![false; self.num_cols];
        for &g in hint {
            let j = match g {
                BasisGuess::Structural(v) if v < self.num_structural => v,
                BasisGuess::Slack(row) if row < self.num_rows => {
                    let s = self.slack_of_row[row];
                    if s == usize::MAX {
                        return false;
                    }
                    s
                }
                _ => return false,
            };
            if seen[j] {
                return false;
            }
            seen[j] = true;
            cols.push(j);
        }
        // Default nonbasic states everywhere, then overwrite with the basis.
        for j in 0..self.num_cols {
            self.state[j] = if self.lower[j].is_finite() {
                VarState::AtLower
            } else if self.upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::FreeZero
            };
        }
        for (r, &j) in cols.iter().enumerate() {
            self.basis[r] = j;
            self.state[j] = VarState::Basic(r);
        }
        if self
            .engine
            .refactorize(&self.cols, &self.basis)
            .is_err()
        {
            return false;
        }
        self.recompute_basic_values();
        let scale = 1.0 + self.rhs_scale();
        for (r, &j) in self.basis.iter().enumerate() {
            let v = self.x_basic[r];
            if v < self.lower[j] - FEASIBILITY_TOL * scale
                || v > self.upper[j] + FEASIBILITY_TOL * scale
            {
                return false;
            }
        }
        true
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic(r) => self.x_basic[r],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::FreeZero => 0.0,
        }
    }

    fn refactorize(&mut self) -> Result<(), LpError> {
        self.engine
            .refactorize(&self.cols, &self.basis)
            .map_err(|_| LpError::Numerical("singular basis during refactorization".into()))?;
        self.recompute_basic_values();
        Ok(())
    }

    /// Recomputes basic values from the bounds of nonbasic variables.
    fn recompute_basic_values(&mut self) {
        let mut v = self.rhs.clone();
        for j in 0..self.num_cols {
            let val = match self.state[j] {
                VarState::Basic(_) => continue,
                VarState::AtLower => self.lower[j],
                VarState::AtUpper => self.upper[j],
                VarState::FreeZero => 0.0,
            };
            if val != 0.0 {
                let (rows, vals) = self.cols.col(j);
                for (&i, &a) in rows.iter().zip(vals) {
                    v[i] -= a * val;
                }
            }
        }
        self.engine.ftran(&mut v);
        self.x_basic.copy_from_slice(&v);
    }

    fn run_phase(&mut self) -> Result<PhaseEnd, LpError> {
        let max_iterations = 200 * (self.num_rows + self.num_cols) + 10_000;
        let mut tiny_pivot_retries = 0usize;
        loop {
            if self.iterations > max_iterations {
                return Err(LpError::Numerical(format!(
                    "iteration limit {max_iterations} exceeded"
                )));
            }
            match self.step(&mut tiny_pivot_retries)? {
                StepOutcome::Optimal => return Ok(PhaseEnd::Optimal),
                StepOutcome::Unbounded => return Ok(PhaseEnd::Unbounded),
                StepOutcome::Progress => {}
            }
        }
    }

    /// One pricing/ratio-test/pivot cycle.
    fn step(&mut self, tiny_pivot_retries: &mut usize) -> Result<StepOutcome, LpError> {
        // Duals: y = B^-T c_B.
        for (r, &j) in self.basis.iter().enumerate() {
            self.duals[r] = self.cost[j];
        }
        self.engine.btran(&mut self.duals);

        // Pricing.
        let mut entering = None; // (j, reduced cost, sigma)
        let mut best_score = DUAL_TOL;
        for j in 0..self.num_cols {
            let st = self.state[j];
            if matches!(st, VarState::Basic(_)) || self.lower[j] == self.upper[j] {
                continue;
            }
            let (rows, vals) = self.cols.col(j);
            let mut d = self.cost[j];
            for (&i, &a) in rows.iter().zip(vals) {
                d -= a * self.duals[i];
            }
            let (eligible, sigma) = match st {
                VarState::AtLower => (d < -DUAL_TOL, 1.0),
                VarState::AtUpper => (d > DUAL_TOL, -1.0),
                VarState::FreeZero => (d.abs() > DUAL_TOL, if d < 0.0 { 1.0 } else { -1.0 }),
                VarState::Basic(_) => unreachable!(),
            };
            if eligible {
                if self.bland {
                    entering = Some((j, d, sigma));
                    break;
                }
                let score = d.abs();
                if score > best_score {
                    best_score = score;
                    entering = Some((j, d, sigma));
                }
            }
        }
        let Some((q, _dq, sigma)) = entering else {
            return Ok(StepOutcome::Optimal);
        };

        // Direction: w = B^-1 a_q; basic values move by -sigma * w * t.
        let w = &mut self.direction;
        for x in w.iter_mut() {
            *x = 0.0;
        }
        {
            let (rows, vals) = self.cols.col(q);
            for (&i, &a) in rows.iter().zip(vals) {
                w[i] += a;
            }
        }
        self.engine.ftran(w);

        // Ratio test.
        let own_span = self.upper[q] - self.lower[q]; // may be inf
        let mut t_block = f64::INFINITY;
        let mut blocker: Option<(usize, f64)> = None; // (slot, |pivot|)
        for r in 0..self.num_rows {
            let rate = -sigma * self.direction[r];
            if rate.abs() <= PIVOT_TOL {
                continue;
            }
            let jb = self.basis[r];
            let ratio = if rate > 0.0 {
                if self.upper[jb].is_finite() {
                    (self.upper[jb] - self.x_basic[r]) / rate
                } else {
                    continue;
                }
            } else if self.lower[jb].is_finite() {
                (self.lower[jb] - self.x_basic[r]) / rate
            } else {
                continue;
            };
            let ratio = ratio.max(0.0);
            let replace = match blocker {
                None => ratio < t_block,
                Some((slot, piv)) => {
                    ratio < t_block - 1e-12
                        || (ratio < t_block + 1e-12
                            && (if self.bland {
                                self.basis[r] < self.basis[slot]
                            } else {
                                self.direction[r].abs() > piv
                            }))
                }
            };
            if replace {
                t_block = ratio.min(t_block);
                blocker = Some((r, self.direction[r].abs()));
            }
        }

        let t = t_block.min(own_span);
        if t.is_infinite() {
            return Ok(StepOutcome::Unbounded);
        }

        // Stall bookkeeping.
        if t <= 1e-12 {
            self.stall += 1;
            if self.stall > STALL_LIMIT {
                self.bland = true;
            }
        } else {
            self.stall = 0;
            self.bland = false;
        }

        if own_span <= t_block {
            // Bound flip, no basis change.
            for r in 0..self.num_rows {
                let rate = -sigma * self.direction[r];
                if rate != 0.0 {
                    self.x_basic[r] += rate * own_span;
                }
            }
            self.state[q] = match self.state[q] {
                VarState::AtLower => VarState::AtUpper,
                VarState::AtUpper => VarState::AtLower,
                other => other,
            };
            self.iterations += 1;
            return Ok(StepOutcome::Progress);
        }

        let (r_leave, _) = blocker.expect("finite blocking ratio requires a blocker");
        let piv = self.direction[r_leave];
        if piv.abs() < TINY_PIVOT {
            // Retry on fresh factors; give up if the tiny pivot persists.
            *tiny_pivot_retries += 1;
            if *tiny_pivot_retries > 5 {
                return Err(LpError::Numerical(format!(
                    "pivot magnitude {} below {TINY_PIVOT} persists",
                    piv.abs()
                )));
            }
            self.refactorize()?;
            return Ok(StepOutcome::Progress);
        }
        *tiny_pivot_retries = 0;

        // Apply the step.
        let jb = self.basis[r_leave];
        for r in 0..self.num_rows {
            let rate = -sigma * self.direction[r];
            if rate != 0.0 {
                self.x_basic[r] += rate * t;
            }
        }
        let entering_value = match self.state[q] {
            VarState::AtLower => self.lower[q] + t,
            VarState::AtUpper => self.upper[q] - t,
            VarState::FreeZero => sigma * t,
            VarState::Basic(_) => unreachable!(),
        };
        // Leaving variable lands on the bound that blocked.
        let rate_leave = -sigma * piv;
        self.state[jb] = if rate_leave > 0.0 {
            VarState::AtUpper
        } else {
            VarState::AtLower
        };
        self.basis[r_leave] = q;
        self.state[q] = VarState::Basic(r_leave);
        self.x_basic[r_leave] = entering_value;

        self.engine.push_eta(r_leave, &self.direction);
        self.iterations += 1;
        if self.engine.needs_refresh() {
            self.refactorize()?;
        }
        Ok(StepOutcome::Progress)
    }
}
