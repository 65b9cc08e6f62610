//! Allocation models: the sample-average (SAA) LP, the distributionally
//! robust LP over a Wasserstein ball, and the worst-case expectation
//! evaluator for a frozen allocation.
//!
//! The robust model is built directly in its dual reformulation: variables
//! `x` (allocation), `lambda` (transport price), `s[i][k]` (per-sample,
//! per-region epigraph values), and `gamma[i][j][k]` (two support multipliers
//! per sample, loss piece, and region). The loss intercepts are affine in
//! `x`, so the joint problem stays a single linear program.

use std::time::Instant;

use thiserror::Error;

use crate::lp::{solve_lp, solve_lp_with_hint, BasisGuess, LpError, LpProblem, Sense, Status};
use crate::types::{AllocationSolution, ProblemConfig, ScenarioSet};

/// Which allocation model produced an LP.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Saa,
    Dro,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("scenario {scenario} region {region} value {value} outside support [0, {upper}]")]
    OutOfSupport {
        scenario: usize,
        region: usize,
        value: f64,
        upper: f64,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{kind:?} model solve ended with status {status:?}")]
    NotOptimal { kind: ModelKind, status: Status },
}

/// The two affine pieces of the per-region loss at a fixed allocation:
/// slope `cost_unmet` through `(x, 0)` rising to the right, and slope
/// `-cost_over` through `(x, 0)` rising to the left. Their pointwise max is
/// the newsvendor loss.
#[derive(Clone, Debug)]
pub struct LossPieces {
    /// Per region: `[(slope, intercept); 2]`.
    pieces: Vec<[(f64, f64); 2]>,
}

impl LossPieces {
    pub fn new(cfg: &ProblemConfig, allocation: &[f64]) -> LossPieces {
        let pieces = (0..cfg.num_regions)
            .map(|k| {
                let x = allocation[k];
                [
                    (cfg.cost_unmet[k], -cfg.cost_unmet[k] * x),
                    (-cfg.cost_over[k], cfg.cost_over[k] * x),
                ]
            })
            .collect();
        LossPieces { pieces }
    }

    /// Max over the affine pieces at demand `xi` in region `k`.
    pub fn eval(&self, region: usize, xi: f64) -> f64 {
        self.pieces[region]
            .iter()
            .map(|&(a, b)| a * xi + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn piece(&self, region: usize, j: usize) -> (f64, f64) {
        self.pieces[region][j]
    }
}

/// Box support per region: rows `xi <= upper` and `-xi <= 0`.
#[derive(Clone, Debug)]
pub struct SupportPolyhedron {
    upper: Vec<f64>,
}

impl SupportPolyhedron {
    pub fn from_box(support_upper: &[f64]) -> SupportPolyhedron {
        assert!(
            support_upper.iter().all(|u| *u > 0.0),
            "support upper bounds must be positive"
        );
        SupportPolyhedron {
            upper: support_upper.to_vec(),
        }
    }

    pub fn num_regions(&self) -> usize {
        self.upper.len()
    }

    pub fn upper(&self, region: usize) -> f64 {
        self.upper[region]
    }

    /// The two `(c, d)` rows of region `k`: `c * xi <= d`.
    pub fn rows(&self, region: usize) -> [(f64, f64); 2] {
        [(1.0, self.upper[region]), (-1.0, 0.0)]
    }

    pub fn contains(&self, region: usize, xi: f64) -> bool {
        xi >= 0.0 && xi <= self.upper[region]
    }
}

fn check_dims(scenarios: &ScenarioSet, cfg: &ProblemConfig) -> Result<(), ModelError> {
    if scenarios.num_regions() != cfg.num_regions {
        return Err(ModelError::Dimension(format!(
            "scenarios cover {} regions, config has {}",
            scenarios.num_regions(),
            cfg.num_regions
        )));
    }
    if scenarios.num_scenarios() == 0 {
        return Err(ModelError::Dimension("scenario set is empty".into()));
    }
    Ok(())
}

/// Builds the sample-average model: minimize the mean over scenarios of
/// unmet plus over-service penalties, subject to the shared budget.
///
/// Variables: `x` (K), then unmet slack `u[i][k]` and over slack `o[i][k]`.
pub fn build_saa_lp(scenarios: &ScenarioSet, cfg: &ProblemConfig) -> Result<LpProblem, ModelError> {
    check_dims(scenarios, cfg)?;
    let k_regions = cfg.num_regions;
    let n = scenarios.num_scenarios();
    let inv_n = 1.0 / n as f64;

    let u_var = |i: usize, k: usize| k_regions + i * k_regions + k;
    let o_var = |i: usize, k: usize| k_regions + n * k_regions + i * k_regions + k;

    let mut p = LpProblem::new(k_regions + 2 * n * k_regions);
    for i in 0..n {
        for k in 0..k_regions {
            p.set_objective(u_var(i, k), cfg.cost_unmet[k] * inv_n);
            p.set_objective(o_var(i, k), cfg.cost_over[k] * inv_n);
        }
    }
    for i in 0..n {
        for k in 0..k_regions {
            let xi = scenarios.get(i, k);
            // u >= xi - x  and  o >= x - xi
            p.add_constraint(&[(k, 1.0), (u_var(i, k), 1.0)], Sense::Ge, xi);
            p.add_constraint(&[(k, -1.0), (o_var(i, k), 1.0)], Sense::Ge, -xi);
        }
    }
    let budget_row: Vec<(usize, f64)> = (0..k_regions).map(|k| (k, 1.0)).collect();
    p.add_constraint(&budget_row, Sense::Le, cfg.budget);
    Ok(p)
}

/// Builds the robust model in its LP reformulation.
///
/// Variables in order: `x` (K), `lambda` (1), `s[i][k]` (N*K, free),
/// `gamma[i][j][k]` (N*J*K pairs, nonnegative). Rows in order: the N*J*K
/// epigraph rows, then 2*N*J*K dual-norm rows, then the budget row.
pub fn build_dro_lp(
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
    support: &SupportPolyhedron,
) -> Result<LpProblem, ModelError> {
    check_dims(scenarios, cfg)?;
    if support.num_regions() != cfg.num_regions {
        return Err(ModelError::Dimension(format!(
            "support covers {} regions, config has {}",
            support.num_regions(),
            cfg.num_regions
        )));
    }
    let k_regions = cfg.num_regions;
    let n = scenarios.num_scenarios();
    for i in 0..n {
        for k in 0..k_regions {
            let v = scenarios.get(i, k);
            if !support.contains(k, v) {
                return Err(ModelError::OutOfSupport {
                    scenario: i,
                    region: k,
                    value: v,
                    upper: support.upper(k),
                });
            }
        }
    }

    const J: usize = 2;
    let lambda = k_regions;
    let s_var = |i: usize, k: usize| k_regions + 1 + i * k_regions + k;
    let gamma_base = k_regions + 1 + n * k_regions;
    // Two support rows per (i, j, k): multiplier r = 0 pairs with
    // `xi <= upper`, r = 1 with `-xi <= 0`.
    let gamma_var =
        |i: usize, j: usize, k: usize, r: usize| gamma_base + ((i * J + j) * k_regions + k) * 2 + r;

    let num_vars = gamma_base + n * J * k_regions * 2;
    let mut p = LpProblem::new(num_vars);

    p.set_objective(lambda, cfg.wasserstein_radius);
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        for k in 0..k_regions {
            p.set_objective(s_var(i, k), inv_n);
            p.set_bounds(s_var(i, k), f64::NEG_INFINITY, f64::INFINITY);
        }
    }

    // Loss pieces in terms of x: slope on xi and coefficient on x_k.
    // Piece 0 (unmet): a = cu, intercept -cu * x_k.
    // Piece 1 (over):  a = -co, intercept +co * x_k.
    let piece = |j: usize, k: usize| -> (f64, f64) {
        if j == 0 {
            (cfg.cost_unmet[k], -cfg.cost_unmet[k])
        } else {
            (-cfg.cost_over[k], cfg.cost_over[k])
        }
    };

    // Epigraph rows: x-term + gamma' (d - C xi_hat) - s <= -a * xi_hat.
    for i in 0..n {
        for j in 0..J {
            for k in 0..k_regions {
                let (a, x_coef) = piece(j, k);
                let xi = scenarios.get(i, k);
                let up = support.upper(k);
                p.add_constraint(
                    &[
                        (k, x_coef),
                        (gamma_var(i, j, k, 0), up - xi),
                        (gamma_var(i, j, k, 1), xi),
                        (s_var(i, k), -1.0),
                    ],
                    Sense::Le,
                    -a * xi,
                );
            }
        }
    }
    // Dual-norm rows: |gamma_up - gamma_dn - a| <= lambda as two rows.
    for i in 0..n {
        for j in 0..J {
            for k in 0..k_regions {
                let (a, _) = piece(j, k);
                let g_up = gamma_var(i, j, k, 0);
                let g_dn = gamma_var(i, j, k, 1);
                p.add_constraint(&[(g_up, 1.0), (g_dn, -1.0), (lambda, -1.0)], Sense::Le, a);
                p.add_constraint(&[(g_up, -1.0), (g_dn, 1.0), (lambda, -1.0)], Sense::Le, -a);
            }
        }
    }
    let budget_row: Vec<(usize, f64)> = (0..k_regions).map(|k| (k, 1.0)).collect();
    p.add_constraint(&budget_row, Sense::Le, cfg.budget);
    Ok(p)
}

/// Solves a built model and extracts the allocation slice.
pub fn solve_allocation(
    p: &LpProblem,
    kind: ModelKind,
    num_regions: usize,
) -> Result<AllocationSolution, ModelError> {
    let _ = kind;
    solve_extracting(p, num_regions, None)
}

fn solve_extracting(
    p: &LpProblem,
    num_regions: usize,
    hint: Option<&[BasisGuess]>,
) -> Result<AllocationSolution, ModelError> {
    let started = Instant::now();
    let sol = match hint {
        Some(h) => solve_lp_with_hint(p, h)?,
        None => solve_lp(p)?,
    };
    let solve_time = started.elapsed().as_secs_f64();
    let allocation = if sol.status == Status::Optimal {
        sol.primal[..num_regions].to_vec()
    } else {
        Vec::new()
    };
    Ok(AllocationSolution {
        allocation,
        objective: sol.objective_value,
        status: sol.status,
        solve_time,
    })
}

/// Starting basis for the robust LP at allocation `x_start`: per sample and
/// region the epigraph variable sits on its dominant loss piece, the
/// transport price is pinned by the steepest loss slope, and every other row
/// keeps its slack. Primal feasible by construction, so the solver skips
/// phase 1.
pub fn dro_basis_hint(
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
    x_start: &[f64],
) -> Vec<BasisGuess> {
    const J: usize = 2;
    let k_regions = cfg.num_regions;
    let n = scenarios.num_scenarios();
    let lambda = k_regions;
    let s_var = |i: usize, k: usize| k_regions + 1 + i * k_regions + k;
    let epi_row = |i: usize, j: usize, k: usize| (i * J + j) * k_regions + k;
    let norm_rows = |i: usize, j: usize, k: usize| {
        let base = n * J * k_regions + 2 * ((i * J + j) * k_regions + k);
        (base, base + 1)
    };
    let num_rows = 3 * n * J * k_regions + 1;
    let mut hint: Vec<BasisGuess> = (0..num_rows).map(BasisGuess::Slack).collect();

    for i in 0..n {
        for k in 0..k_regions {
            let xi = scenarios.get(i, k);
            let unmet = cfg.cost_unmet[k] * (xi - x_start[k]);
            let over = cfg.cost_over[k] * (x_start[k] - xi);
            let host = if unmet >= over { 0 } else { 1 };
            hint[epi_row(i, host, k)] = BasisGuess::Structural(s_var(i, k));
        }
    }

    // Pin lambda where the steepest slope forces it.
    let mut best = (0usize, 0usize, 0.0f64); // (j, k, |a|)
    for k in 0..k_regions {
        if cfg.cost_unmet[k] > best.2 {
            best = (0, k, cfg.cost_unmet[k]);
        }
        if cfg.cost_over[k] > best.2 {
            best = (1, k, cfg.cost_over[k]);
        }
    }
    let (j_star, k_star, _) = best;
    let (dn1, dn2) = norm_rows(0, j_star, k_star);
    // Piece 0 has slope +cu (pin on the mirror row), piece 1 slope -co.
    let pin_row = if j_star == 0 { dn2 } else { dn1 };
    hint[pin_row] = BasisGuess::Structural(lambda);
    hint
}

/// Starting basis for the SAA LP at allocation `x_start`: each scenario
/// region activates whichever of its unmet/over variables is nonnegative
/// there. Primal feasible by construction.
pub fn saa_basis_hint(
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
    x_start: &[f64],
) -> Vec<BasisGuess> {
    let k_regions = cfg.num_regions;
    let n = scenarios.num_scenarios();
    let u_var = |i: usize, k: usize| k_regions + i * k_regions + k;
    let o_var = |i: usize, k: usize| k_regions + n * k_regions + i * k_regions + k;
    let num_rows = 2 * n * k_regions + 1;
    let mut hint: Vec<BasisGuess> = (0..num_rows).map(BasisGuess::Slack).collect();
    for i in 0..n {
        for k in 0..k_regions {
            let xi = scenarios.get(i, k);
            let unmet_row = 2 * (i * k_regions + k);
            let over_row = unmet_row + 1;
            if xi > x_start[k] {
                hint[unmet_row] = BasisGuess::Structural(u_var(i, k));
            } else if x_start[k] > xi {
                hint[over_row] = BasisGuess::Structural(o_var(i, k));
            }
        }
    }
    hint
}

/// Builds and solves the robust model with its warm-start basis.
pub fn solve_dro(
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
    support: &SupportPolyhedron,
) -> Result<AllocationSolution, ModelError> {
    let p = build_dro_lp(scenarios, cfg, support)?;
    let hint = dro_basis_hint(scenarios, cfg, &vec![0.0; cfg.num_regions]);
    solve_extracting(&p, cfg.num_regions, Some(&hint))
}

/// Builds and solves the sample-average model with its warm-start basis.
pub fn solve_saa(
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
) -> Result<AllocationSolution, ModelError> {
    let p = build_saa_lp(scenarios, cfg)?;
    let hint = saa_basis_hint(scenarios, cfg, &vec![0.0; cfg.num_regions]);
    solve_extracting(&p, cfg.num_regions, Some(&hint))
}

/// Worst-case expected loss of a fixed allocation over the ambiguity ball:
/// the robust LP with the allocation pinned through equality bounds.
pub fn worst_case_expectation(
    allocation: &[f64],
    scenarios: &ScenarioSet,
    cfg: &ProblemConfig,
    support: &SupportPolyhedron,
) -> Result<f64, ModelError> {
    if allocation.len() != cfg.num_regions {
        return Err(ModelError::Dimension(format!(
            "allocation has {} entries, config has {} regions",
            allocation.len(),
            cfg.num_regions
        )));
    }
    let mut p = build_dro_lp(scenarios, cfg, support)?;
    for (k, &x) in allocation.iter().enumerate() {
        p.set_bounds(k, x, x);
    }
    let hint = dro_basis_hint(scenarios, cfg, allocation);
    let sol = solve_lp_with_hint(&p, &hint)?;
    if sol.status != Status::Optimal {
        return Err(ModelError::NotOptimal {
            kind: ModelKind::Dro,
            status: sol.status,
        });
    }
    Ok(sol.objective_value)
}
