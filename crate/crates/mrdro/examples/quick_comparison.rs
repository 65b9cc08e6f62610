//! Small end-to-end demo: run a shortened out-of-sample comparison between
//! the fused robust model and the single-source baselines, then print the
//! summary table.
//!
//!     cargo run --release --example quick_comparison

use mrdro::experiments::{run_out_of_sample, ExperimentConfig};

fn main() {
    let mut cfg = ExperimentConfig::baseline();
    cfg.oos_events = 10; // keep the demo quick; the full study uses 100
    let trust = cfg.trust_star_matrix().expect("baseline trust is valid");
    let report = run_out_of_sample(&trust, &cfg).expect("baseline comparison solves");

    println!("{:10} {:>14} {:>12}", "method", "avg loss", "solver time");
    for row in &report.rows {
        println!(
            "{:10} {:>14.2} {:>11.2}s",
            row.method, row.avg_loss, row.total_time
        );
    }
}
