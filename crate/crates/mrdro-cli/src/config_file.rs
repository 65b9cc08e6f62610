//! Flat key-value configuration files with `[costs]`, `[errors]`, and
//! `[trust_star]` sections, plus the run manifest that makes every output
//! directory reproducible.
//!
//! An empty file resolves to the full baseline setup. Unknown keys are
//! rejected with their line number; scalar values broadcast across regions
//! where a per-region vector is expected.

use std::fmt::Write as _;
use std::path::Path;

use mrdro::experiments::ExperimentConfig;

#[derive(Debug)]
pub struct ConfigFileError {
    pub message: String,
}

impl std::fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigFileError {}

fn err(message: impl Into<String>) -> ConfigFileError {
    ConfigFileError {
        message: message.into(),
    }
}

struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigFileError> {
    let mut entries = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(format!("line {line_no}: unterminated section header")))?;
            section = name.trim().to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {line_no}: expected `key = value`")))?;
        entries.push(Entry {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
            line: line_no,
        });
    }
    Ok(entries)
}

fn parse_f64(e: &Entry) -> Result<f64, ConfigFileError> {
    e.value
        .parse()
        .map_err(|_| err(format!("line {}: `{}` is not a number", e.line, e.value)))
}

fn parse_usize(e: &Entry) -> Result<usize, ConfigFileError> {
    e.value
        .parse()
        .map_err(|_| err(format!("line {}: `{}` is not a count", e.line, e.value)))
}

fn parse_u32(e: &Entry) -> Result<u32, ConfigFileError> {
    e.value
        .parse()
        .map_err(|_| err(format!("line {}: `{}` is not an integer", e.line, e.value)))
}

fn parse_list_f64(e: &Entry) -> Result<Vec<f64>, ConfigFileError> {
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| err(format!("line {}: `{t}` is not a number", e.line)))
        })
        .collect()
}

fn parse_list_u64(e: &Entry) -> Result<Vec<u64>, ConfigFileError> {
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| err(format!("line {}: `{t}` is not a seed", e.line)))
        })
        .collect()
}

fn parse_list_usize(e: &Entry) -> Result<Vec<usize>, ConfigFileError> {
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| err(format!("line {}: `{t}` is not a count", e.line)))
        })
        .collect()
}

/// Broadcasts a scalar across regions or checks an explicit vector length.
fn per_region(e: &Entry, num_regions: usize) -> Result<Vec<f64>, ConfigFileError> {
    let values = parse_list_f64(e)?;
    if values.len() == 1 {
        Ok(vec![values[0]; num_regions])
    } else if values.len() == num_regions {
        Ok(values)
    } else {
        Err(err(format!(
            "line {}: expected 1 or {num_regions} values, got {}",
            e.line,
            values.len()
        )))
    }
}

/// Sweep lists for the sensitivity subcommand, resolved from the same file.
#[derive(Clone, Debug)]
pub struct SweepLists {
    pub budgets: Vec<f64>,
    pub event_counts: Vec<usize>,
    pub region_counts: Vec<usize>,
}

impl Default for SweepLists {
    fn default() -> Self {
        SweepLists {
            budgets: vec![1000.0, 400.0],
            event_counts: vec![10, 50],
            region_counts: vec![3, 5],
        }
    }
}

/// A fully resolved run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub sweeps: SweepLists,
}

/// Parses `text` into a validated configuration. Defaults are the baseline
/// setup; size keys apply before per-region vectors so scalars broadcast to
/// the final region count.
pub fn parse_config_text(text: &str) -> Result<RunConfig, ConfigFileError> {
    let entries = tokenize(text)?;

    let mut cfg = ExperimentConfig::baseline();
    let mut sweeps = SweepLists::default();

    // Structural sizes first.
    for e in &entries {
        if e.section.is_empty() && e.key == "num_regions" {
            cfg = cfg.with_regions(parse_usize(e)?);
        }
    }
    for e in &entries {
        if e.section.is_empty() && e.key == "num_sources" {
            cfg = cfg.with_sources(parse_usize(e)?);
        }
    }
    let k = cfg.problem.num_regions;
    let h = cfg.problem.num_sources;

    for e in &entries {
        match (e.section.as_str(), e.key.as_str()) {
            ("", "num_regions") | ("", "num_sources") => {}
            ("", "num_samples") => cfg.problem.num_samples = parse_usize(e)?,
            ("", "budget") => cfg.problem.budget = parse_f64(e)?,
            ("", "wasserstein_radius") => cfg.problem.wasserstein_radius = parse_f64(e)?,
            ("", "support_upper") => cfg.problem.support_upper = per_region(e, k)?,
            ("", "truth_lo") => cfg.truth_lo = parse_u32(e)?,
            ("", "truth_hi") => cfg.truth_hi = parse_u32(e)?,
            ("", "sigma_ratio") => cfg.sigma_ratio = parse_f64(e)?,
            ("", "events") => cfg.num_events = parse_usize(e)?,
            ("", "oos_events") => cfg.oos_events = parse_usize(e)?,
            ("", "step_size") => cfg.step_size = parse_f64(e)?,
            ("", "delta") => cfg.delta = parse_f64(e)?,
            ("", "initial_trust") => cfg.initial_trust = parse_f64(e)?,
            ("", "seeds") => cfg.seeds = parse_list_u64(e)?,
            ("", "sensitivity_budgets") => sweeps.budgets = parse_list_f64(e)?,
            ("", "sensitivity_events") => sweeps.event_counts = parse_list_usize(e)?,
            ("", "sensitivity_regions") => sweeps.region_counts = parse_list_usize(e)?,
            ("costs", "unmet") => cfg.problem.cost_unmet = per_region(e, k)?,
            ("costs", "over") => cfg.problem.cost_over = per_region(e, k)?,
            ("errors", key) | ("trust_star", key) => {
                let source = key
                    .strip_prefix("source_")
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|s| (1..=h).contains(s))
                    .ok_or_else(|| {
                        err(format!(
                            "line {}: unknown key `{key}` in [{}]; expected source_1..source_{h}",
                            e.line, e.section
                        ))
                    })?;
                let row = per_region(e, k)?;
                if e.section == "errors" {
                    cfg.relative_errors[source - 1] = row;
                } else {
                    cfg.trust_star[source - 1] = row;
                }
            }
            (section, key) => {
                let place = if section.is_empty() {
                    String::new()
                } else {
                    format!(" in [{section}]")
                };
                return Err(err(format!(
                    "line {}: unknown key `{key}`{place}",
                    e.line
                )));
            }
        }
    }

    cfg.validate().map_err(|e| err(e.to_string()))?;
    Ok(RunConfig {
        experiment: cfg,
        sweeps,
    })
}

/// Reads and parses a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders the fully resolved run description. The body is itself a valid
/// configuration file, so rerunning the same subcommand with the manifest
/// as `--config` reproduces the run.
pub fn render_manifest(run: &RunConfig, subcommand: &str, out_dir: &str) -> String {
    let cfg = &run.experiment;
    let mut s = String::new();
    let _ = writeln!(s, "# run manifest (tool version {})", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# subcommand = {subcommand}");
    let _ = writeln!(s, "# output_dir = {out_dir}");
    let _ = writeln!(
        s,
        "# reproduce with: mrdro {subcommand} --config <this file> --out <dir>"
    );
    let _ = writeln!(s, "num_regions = {}", cfg.problem.num_regions);
    let _ = writeln!(s, "num_sources = {}", cfg.problem.num_sources);
    let _ = writeln!(s, "num_samples = {}", cfg.problem.num_samples);
    let _ = writeln!(s, "budget = {}", cfg.problem.budget);
    let _ = writeln!(s, "wasserstein_radius = {}", cfg.problem.wasserstein_radius);
    let _ = writeln!(s, "support_upper = {}", join(&cfg.problem.support_upper));
    let _ = writeln!(s, "truth_lo = {}", cfg.truth_lo);
    let _ = writeln!(s, "truth_hi = {}", cfg.truth_hi);
    let _ = writeln!(s, "sigma_ratio = {}", cfg.sigma_ratio);
    let _ = writeln!(s, "events = {}", cfg.num_events);
    let _ = writeln!(s, "oos_events = {}", cfg.oos_events);
    let _ = writeln!(s, "step_size = {}", cfg.step_size);
    let _ = writeln!(s, "delta = {}", cfg.delta);
    let _ = writeln!(s, "initial_trust = {}", cfg.initial_trust);
    let _ = writeln!(s, "seeds = {}", join(&cfg.seeds));
    let _ = writeln!(s, "sensitivity_budgets = {}", join(&run.sweeps.budgets));
    let _ = writeln!(s, "sensitivity_events = {}", join(&run.sweeps.event_counts));
    let _ = writeln!(
        s,
        "sensitivity_regions = {}",
        join(&run.sweeps.region_counts)
    );
    let _ = writeln!(s, "\n[costs]");
    let _ = writeln!(s, "unmet = {}", join(&cfg.problem.cost_unmet));
    let _ = writeln!(s, "over = {}", join(&cfg.problem.cost_over));
    let _ = writeln!(s, "\n[errors]");
    for (hh, row) in cfg.relative_errors.iter().enumerate() {
        let _ = writeln!(s, "source_{} = {}", hh + 1, join(row));
    }
    let _ = writeln!(s, "\n[trust_star]");
    for (hh, row) in cfg.trust_star.iter().enumerate() {
        let _ = writeln!(s, "source_{} = {}", hh + 1, join(row));
    }
    s
}
