//! Basis handling for the revised simplex: sparse LU factorization of the
//! basis matrix plus a product-form eta file between refactorizations.
//!
//! The factorization is a left-looking Gilbert-Peierls elimination with
//! partial pivoting. Columns are eliminated in ascending-fill order (sorted
//! by nonzero count), which keeps fill-in small on the near-triangular bases
//! these allocation LPs produce.

/// Column-compressed storage of the full working matrix (structural
/// variables, slacks, artificials).
pub(crate) struct SparseCols {
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseCols {
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[j], self.col_ptr[j + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }
}

const UNPIVOTED: usize = usize::MAX;

/// LU factors of one basis. `pivot_row[s]` is the original row eliminated at
/// step `s`; `slot_of_step[s]` the basis slot whose column was consumed.
struct Factors {
    /// Per step: multipliers below the pivot, keyed by original row.
    l_cols: Vec<Vec<(usize, f64)>>,
    /// Per step: U entries at earlier steps.
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    pivot_row: Vec<usize>,
    row_step: Vec<usize>,
    slot_of_step: Vec<usize>,
}

/// One product-form update: the basis column entering at `slot`, expressed in
/// the pre-update basis (the FTRAN'd entering column).
struct Eta {
    slot: usize,
    pivot: f64,
    /// Entries at slots other than `slot`.
    entries: Vec<(usize, f64)>,
}

pub(crate) struct SingularBasis;

/// Basis factorization engine with scratch buffers; not reentrant.
pub(crate) struct BasisEngine {
    m: usize,
    factors: Factors,
    etas: Vec<Eta>,
    refresh_interval: usize,
    // scratch
    work: Vec<f64>,
    marker: Vec<bool>,
    touched: Vec<usize>,
    dfs_stack: Vec<(usize, usize)>,
    topo: Vec<usize>,
    on_stack: Vec<bool>,
}

impl BasisEngine {
    pub fn new(num_rows: usize, refresh_interval: usize) -> Self {
        BasisEngine {
            m: num_rows,
            factors: Factors {
                l_cols: Vec::new(),
                u_cols: Vec::new(),
                u_diag: Vec::new(),
                pivot_row: Vec::new(),
                row_step: Vec::new(),
                slot_of_step: Vec::new(),
            },
            etas: Vec::new(),
            refresh_interval,
            work: vec![0.0; num_rows],
            marker: vec![false; num_rows],
            touched: Vec::new(),
            dfs_stack: Vec::new(),
            topo: Vec::new(),
            on_stack: vec![false; num_rows],
        }
    }

    pub fn needs_refresh(&self) -> bool {
        self.etas.len() >= self.refresh_interval
    }

    /// Factorizes the basis given by `basis` (slot -> column index into
    /// `cols`) and clears the eta file.
    pub fn refactorize(&mut self, cols: &SparseCols, basis: &[usize]) -> Result<(), SingularBasis> {
        let m = self.m;
        debug_assert_eq!(basis.len(), m);
        self.etas.clear();

        let f = &mut self.factors;
        f.l_cols.clear();
        f.l_cols.resize(m, Vec::new());
        f.u_cols.clear();
        f.u_cols.resize(m, Vec::new());
        f.u_diag.clear();
        f.u_diag.resize(m, 0.0);
        f.pivot_row.clear();
        f.pivot_row.resize(m, UNPIVOTED);
        f.row_step.clear();
        f.row_step.resize(m, UNPIVOTED);
        f.slot_of_step.clear();
        f.slot_of_step.resize(m, 0);

        // Eliminate sparse columns first.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&slot| (cols.col_nnz(basis[slot]), slot));

        for (step, &slot) in order.iter().enumerate() {
            let (rows, vals) = cols.col(basis[slot]);

            // Scatter the column and collect the reach of its pattern over
            // the partial L, in topological order.
            self.topo.clear();
            for (&r, &v) in rows.iter().zip(vals) {
                self.work[r] += v;
                if !self.marker[r] {
                    self.marker[r] = true;
                    self.touched.push(r);
                }
                let s = f.row_step[r];
                if s != UNPIVOTED && !self.on_stack[s] {
                    Self::dfs_reach(
                        s,
                        &f.l_cols,
                        &f.row_step,
                        &mut self.on_stack,
                        &mut self.dfs_stack,
                        &mut self.topo,
                    );
                }
            }

            // Numeric elimination in dependency order (reverse of the
            // collected postorder).
            for idx in (0..self.topo.len()).rev() {
                let t = self.topo[idx];
                let alpha = self.work[f.pivot_row[t]];
                if alpha != 0.0 {
                    f.u_cols[step].push((t, alpha));
                    for &(r, lv) in &f.l_cols[t] {
                        if !self.marker[r] {
                            self.marker[r] = true;
                            self.touched.push(r);
                        }
                        self.work[r] -= lv * alpha;
                    }
                }
            }

            // Pivot: the largest-magnitude entry among unpivoted rows.
            let mut piv_row = UNPIVOTED;
            let mut piv_abs = 0.0;
            for &r in &self.touched {
                if f.row_step[r] == UNPIVOTED {
                    let a = self.work[r].abs();
                    if a > piv_abs {
                        piv_abs = a;
                        piv_row = r;
                    }
                }
            }
            if piv_row == UNPIVOTED || piv_abs < 1e-13 {
                for &r in &self.touched {
                    self.work[r] = 0.0;
                    self.marker[r] = false;
                }
                self.touched.clear();
                for &t in &self.topo {
                    self.on_stack[t] = false;
                }
                return Err(SingularBasis);
            }
            let piv_val = self.work[piv_row];
            f.u_diag[step] = piv_val;
            f.pivot_row[step] = piv_row;
            f.row_step[piv_row] = step;
            f.slot_of_step[step] = slot;
            for &r in &self.touched {
                if f.row_step[r] == UNPIVOTED {
                    let v = self.work[r];
                    if v != 0.0 {
                        f.l_cols[step].push((r, v / piv_val));
                    }
                }
            }

            // Reset scratch.
            for &r in &self.touched {
                self.work[r] = 0.0;
                self.marker[r] = false;
            }
            self.touched.clear();
            for &t in &self.topo {
                self.on_stack[t] = false;
            }
        }
        Ok(())
    }

    /// Iterative DFS appending finished nodes in postorder.
    fn dfs_reach(
        start: usize,
        l_cols: &[Vec<(usize, f64)>],
        row_step: &[usize],
        on_stack: &mut [bool],
        stack: &mut Vec<(usize, usize)>,
        topo: &mut Vec<usize>,
    ) {
        on_stack[start] = true;
        stack.push((start, 0));
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let edges = &l_cols[node];
            let mut advanced = false;
            while *next < edges.len() {
                let child_row = edges[*next].0;
                *next += 1;
                let child = row_step[child_row];
                if child != UNPIVOTED && !on_stack[child] {
                    on_stack[child] = true;
                    stack.push((child, 0));
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                topo.push(node);
                stack.pop();
            }
        }
    }

    /// Solves `B x = v`. Input is dense in row space; output is dense in
    /// slot space, written over the same buffer.
    pub fn ftran(&mut self, v: &mut [f64]) {
        let f = &self.factors;
        let m = self.m;
        // L solve.
        for s in 0..m {
            let alpha = v[f.pivot_row[s]];
            if alpha != 0.0 {
                for &(r, lv) in &f.l_cols[s] {
                    v[r] -= lv * alpha;
                }
            }
        }
        // U solve into slot space.
        let out = &mut self.work;
        for s in (0..m).rev() {
            let val = v[f.pivot_row[s]];
            if val != 0.0 {
                let xs = val / f.u_diag[s];
                out[f.slot_of_step[s]] = xs;
                for &(t, uv) in &f.u_cols[s] {
                    v[f.pivot_row[t]] -= uv * xs;
                }
            } else {
                out[f.slot_of_step[s]] = 0.0;
            }
        }
        v.copy_from_slice(out);
        for w in out.iter_mut() {
            *w = 0.0;
        }
        // Product-form updates, oldest first.
        for eta in &self.etas {
            let p = v[eta.slot];
            if p != 0.0 {
                let yr = p / eta.pivot;
                v[eta.slot] = yr;
                for &(i, wi) in &eta.entries {
                    v[i] -= wi * yr;
                }
            }
        }
    }

    /// Solves `B' y = c`. Input is dense in slot space; output is dense in
    /// row space, written over the same buffer.
    pub fn btran(&mut self, c: &mut [f64]) {
        let f = &self.factors;
        let m = self.m;
        // Eta transposes, newest first.
        for eta in self.etas.iter().rev() {
            let mut dot = 0.0;
            for &(i, wi) in &eta.entries {
                dot += wi * c[i];
            }
            c[eta.slot] = (c[eta.slot] - dot) / eta.pivot;
        }
        // U' solve (step space).
        let w = &mut self.work;
        for s in 0..m {
            let mut val = c[f.slot_of_step[s]];
            for &(t, uv) in &f.u_cols[s] {
                val -= uv * w[t];
            }
            w[s] = val / f.u_diag[s];
        }
        // L' solve into row space.
        for s in (0..m).rev() {
            let mut val = w[s];
            for &(r, lv) in &f.l_cols[s] {
                val -= lv * c[r];
            }
            c[f.pivot_row[s]] = val;
        }
        for x in w.iter_mut() {
            *x = 0.0;
        }
    }

    /// Records the basis change "column with FTRAN image `w` replaces the
    /// basic variable at `slot`".
    pub fn push_eta(&mut self, slot: usize, w: &[f64]) {
        let mut entries = Vec::new();
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 && i != slot {
                entries.push((i, wi));
            }
        }
        self.etas.push(Eta {
            slot,
            pivot: w[slot],
            entries,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols_from_dense(a: &[Vec<f64>]) -> SparseCols {
        let n = a[0].len();
        let mut col_ptr = vec![0usize];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for (i, row) in a.iter().enumerate() {
                if row[j] != 0.0 {
                    row_idx.push(i);
                    values.push(row[j]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        SparseCols {
            col_ptr,
            row_idx,
            values,
        }
    }

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let m = a.len();
        let mut aug: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        let mut perm: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let p = (k..m)
                .max_by(|&i, &j| {
                    aug[perm[i]][k]
                        .abs()
                        .partial_cmp(&aug[perm[j]][k].abs())
                        .unwrap()
                })
                .unwrap();
            perm.swap(k, p);
            for i in k + 1..m {
                let f = aug[perm[i]][k] / aug[perm[k]][k];
                for j in k..m {
                    let v = aug[perm[k]][j];
                    aug[perm[i]][j] -= f * v;
                }
                x[perm[i]] -= f * x[perm[k]];
            }
        }
        let mut out = vec![0.0; m];
        for k in (0..m).rev() {
            let mut v = x[perm[k]];
            for j in k + 1..m {
                v -= aug[perm[k]][j] * out[j];
            }
            out[k] = v / aug[perm[k]][k];
        }
        out
    }

    fn random_dense(m: usize, seed: &mut u64, density: f64) -> Vec<Vec<f64>> {
        let mut next = || {
            *seed ^= *seed << 13;
            *seed ^= *seed >> 7;
            *seed ^= *seed << 17;
            (*seed >> 11) as f64 / (1u64 << 53) as f64
        };
        loop {
            let mut a = vec![vec![0.0; m]; m];
            for (i, row) in a.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    if i == j || next() < density {
                        *v = next() * 4.0 - 2.0;
                    }
                }
            }
            // Keep diagonals away from zero so the instance is comfortably
            // nonsingular.
            let ok = (0..m).all(|i| a[i][i].abs() > 0.05);
            if ok {
                return a;
            }
        }
    }

    #[test]
    fn ftran_btran_match_dense_solver() {
        let mut seed = 0x9e3779b97f4a7c15u64;
        for m in [1usize, 2, 3, 5, 8, 13, 21] {
            let a = random_dense(m, &mut seed, 0.4);
            let cols = cols_from_dense(&a);
            let basis: Vec<usize> = (0..m).collect();
            let mut eng = BasisEngine::new(m, 64);
            eng.refactorize(&cols, &basis).ok().expect("nonsingular");

            let b: Vec<f64> = (0..m).map(|i| (i as f64) * 0.7 - 1.0).collect();
            let mut v = b.clone();
            eng.ftran(&mut v);
            let expect = dense_solve(&a, &b);
            for i in 0..m {
                assert!(
                    (v[i] - expect[i]).abs() < 1e-9,
                    "ftran m={m} i={i}: {} vs {}",
                    v[i],
                    expect[i]
                );
            }

            // B' y = c  <=>  y = solve(A', c)
            let mut c: Vec<f64> = (0..m).map(|i| 1.0 - 0.3 * i as f64).collect();
            let at: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| a[j][i]).collect())
                .collect();
            let expect_t = dense_solve(&at, &c);
            eng.btran(&mut c);
            for i in 0..m {
                assert!(
                    (c[i] - expect_t[i]).abs() < 1e-9,
                    "btran m={m} i={i}: {} vs {}",
                    c[i],
                    expect_t[i]
                );
            }
        }
    }

    #[test]
    fn eta_updates_track_basis_changes() {
        let mut seed = 42u64;
        let m = 9;
        let a = random_dense(m, &mut seed, 0.5);
        // Extra columns to pivot in.
        let extra = random_dense(m, &mut seed, 0.5);
        let mut all: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut r = a[i].clone();
                r.extend_from_slice(&extra[i]);
                r
            })
            .collect();
        let cols = cols_from_dense(&all);
        let mut basis: Vec<usize> = (0..m).collect();
        let mut eng = BasisEngine::new(m, 64);
        eng.refactorize(&cols, &basis).ok().expect("nonsingular");

        // Replace slots 2, 5, 7 by extra columns via eta updates.
        for (slot, col) in [(2usize, m + 1), (5, m + 4), (7, m + 8)] {
            let mut w = vec![0.0; m];
            let (rows, vals) = cols.col(col);
            for (&r, &v) in rows.iter().zip(vals) {
                w[r] = v;
            }
            eng.ftran(&mut w);
            eng.push_eta(slot, &w);
            basis[slot] = col;
        }

        // Current basis as a dense matrix.
        for i in 0..m {
            for (slot, &col) in basis.iter().enumerate() {
                all[i][slot] = {
                    let (rows, vals) = cols.col(col);
                    rows.iter()
                        .zip(vals)
                        .find(|(&r, _)| r == i)
                        .map(|(_, &v)| v)
                        .unwrap_or(0.0)
                };
            }
        }
        let bmat: Vec<Vec<f64>> = all.iter().map(|r| r[..m].to_vec()).collect();

        let b: Vec<f64> = (0..m).map(|i| 0.5 * i as f64 - 1.3).collect();
        let mut v = b.clone();
        eng.ftran(&mut v);
        let expect = dense_solve(&bmat, &b);
        for i in 0..m {
            assert!((v[i] - expect[i]).abs() < 1e-8, "eta ftran i={i}");
        }

        let mut c: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
        let bt: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| bmat[j][i]).collect())
            .collect();
        let expect_t = dense_solve(&bt, &c);
        eng.btran(&mut c);
        for i in 0..m {
            assert!((c[i] - expect_t[i]).abs() < 1e-8, "eta btran i={i}");
        }
    }
}
