//! Exact one-region oracle for the worst-case expectation: for a
//! piecewise-linear loss and absolute-value transport cost, the per-sample
//! supremum over the support interval is attained at one of the candidate
//! points {0, sample, upper}; the outer minimization over the transport
//! price is a staged grid refined to step 1e-4.

pub fn worst_case_1d(
    x: f64,
    samples: &[f64],
    cost_unmet: f64,
    cost_over: f64,
    upper: f64,
    radius: f64,
) -> f64 {
    let loss = |xi: f64| cost_unmet * (xi - x).max(0.0) + cost_over * (x - xi).max(0.0);
    let objective = |lam: f64| -> f64 {
        let mut total = 0.0;
        for &s in samples {
            let mut best = f64::NEG_INFINITY;
            for cand in [0.0, s, upper] {
                best = best.max(loss(cand) - lam * (cand - s).abs());
            }
            total += best;
        }
        lam * radius + total / samples.len() as f64
    };

    // Beyond the steepest loss slope the objective grows linearly in the
    // price, so the minimizer lives below it.
    let mut lo = 0.0;
    let mut hi = cost_unmet.max(cost_over) + 1.0;
    let mut best = (lo, objective(lo));
    loop {
        let step = (hi - lo) / 1000.0;
        for i in 0..=1000 {
            let lam = lo + i as f64 * step;
            let v = objective(lam);
            if v < best.1 {
                best = (lam, v);
            }
        }
        if step <= 1e-4 {
            return best.1;
        }
        lo = (best.0 - step).max(0.0);
        hi = best.0 + step;
    }
}
