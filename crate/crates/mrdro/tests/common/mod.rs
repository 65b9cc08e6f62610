//! Shared test oracles. These deliberately re-derive results by brute force
//! and never call into the solver paths they are used to check.
#![allow(dead_code)] // not every test target uses every oracle

use mrdro::lp::{LpProblem, Sense};

pub mod inner_sup;

pub mod oracle {
    use super::*;

    #[derive(Debug, PartialEq)]
    pub enum OracleResult {
        /// Optimal objective and the optimal vertex under the declared
        /// tie-break: among optimal vertices, the lexicographically greatest.
        Optimal { objective: f64, vertex: Vec<f64> },
        Infeasible,
    }

    /// Solves a small dense linear system in place; returns None if singular.
    fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| {
                a[perm[i]][k]
                    .abs()
                    .partial_cmp(&a[perm[j]][k].abs())
                    .unwrap()
            })?;
            if a[perm[p]][k].abs() < 1e-11 {
                return None;
            }
            perm.swap(k, p);
            for i in k + 1..n {
                let f = a[perm[i]][k] / a[perm[k]][k];
                if f != 0.0 {
                    for j in k..n {
                        let v = a[perm[k]][j];
                        a[perm[i]][j] -= f * v;
                    }
                    b[perm[i]] -= f * b[perm[k]];
                }
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut v = b[perm[k]];
            for j in k + 1..n {
                v -= a[perm[k]][j] * x[j];
            }
            x[k] = v / a[perm[k]][k];
        }
        Some(x)
    }

    fn lex_greater(a: &[f64], b: &[f64]) -> bool {
        for (x, y) in a.iter().zip(b) {
            if (x - y).abs() > 1e-9 {
                return x > y;
            }
        }
        false
    }

    /// Brute-force vertex enumeration for small LPs. Candidate vertices are
    /// intersections of `n` active constraints chosen from the rows (taken
    /// as equalities) and the finite variable bounds. Assumes the problem is
    /// bounded (the caller adds a box if needed); if feasible, a pointed
    /// polytope attains its minimum at one of these vertices.
    pub fn enumerate_vertices(p: &LpProblem) -> OracleResult {
        let n = p.num_vars();
        let m = p.num_constraints();

        // Active-set candidates: (normal vector, rhs).
        let mut cands: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..m {
            let (coefs, _, rhs) = row_of(p, i);
            cands.push((coefs, rhs));
        }
        for j in 0..n {
            let (lo, hi) = p.bounds(j);
            if lo.is_finite() {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                cands.push((e, lo));
            }
            if hi.is_finite() {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                cands.push((e, hi));
            }
        }

        let mut best: Option<(f64, Vec<f64>)> = None;
        let idx: Vec<usize> = (0..cands.len()).collect();
        for combo in combinations(&idx, n) {
            let a: Vec<Vec<f64>> = combo.iter().map(|&c| cands[c].0.clone()).collect();
            let b: Vec<f64> = combo.iter().map(|&c| cands[c].1).collect();
            let Some(x) = solve_dense(a, b) else {
                continue;
            };
            if !is_feasible(p, &x) {
                continue;
            }
            let obj: f64 = x
                .iter()
                .enumerate()
                .map(|(j, v)| v * p.objective_coef(j))
                .sum();
            best = match best {
                None => Some((obj, x)),
                Some((bo, bx)) => {
                    if obj < bo - 1e-9 {
                        Some((obj, x))
                    } else if obj < bo + 1e-9 && lex_greater(&x, &bx) {
                        Some((bo.min(obj), x))
                    } else {
                        Some((bo, bx))
                    }
                }
            };
        }
        match best {
            Some((objective, vertex)) => OracleResult::Optimal { objective, vertex },
            None => OracleResult::Infeasible,
        }
    }

    pub fn is_feasible(p: &LpProblem, x: &[f64]) -> bool {
        let tol = 1e-7;
        for j in 0..p.num_vars() {
            let (lo, hi) = p.bounds(j);
            if x[j] < lo - tol || x[j] > hi + tol {
                return false;
            }
        }
        for i in 0..p.num_constraints() {
            let (coefs, sense, rhs) = row_of(p, i);
            let act: f64 = coefs.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = 1.0 + rhs.abs();
            let ok = match sense {
                Sense::Le => act <= rhs + tol * scale,
                Sense::Ge => act >= rhs - tol * scale,
                Sense::Eq => (act - rhs).abs() <= tol * scale,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    /// Dense row view re-read from the text dump is fragile; instead the LP
    /// type exposes enough to rebuild rows for checking.
    fn row_of(p: &LpProblem, i: usize) -> (Vec<f64>, Sense, f64) {
        let (entries, sense, rhs) = p.row(i);
        let mut coefs = vec![0.0; p.num_vars()];
        for &(j, a) in entries {
            coefs[j] += a;
        }
        (coefs, sense, rhs)
    }

    fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(k);
        fn rec(items: &[usize], k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            let need = k - cur.len();
            for i in start..=items.len().saturating_sub(need) {
                cur.push(items[i]);
                rec(items, k, i + 1, cur, out);
                cur.pop();
            }
        }
        rec(items, k, 0, &mut cur, &mut out);
        out
    }
}

/// Deterministic xorshift stream for test instance generation.
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_f64(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize % n
    }
}
