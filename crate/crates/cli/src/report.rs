//! Output documents: the fit summary JSON and the bench table.
//!
//! The summary schema is versioned (`svdmarg-summary-v1`) and its field
//! order is fixed, so downstream parsers can rely on the layout. Model
//! quantities are serialized with 17 significant digits, enough to
//! reconstruct every `f64` bit for bit. Timings are clock readings, not
//! model output; they carry three decimals, matching the human-readable
//! reports.

use svdmarg::{GridSpec, PosteriorSummary};

/// Wall-clock split of one fit, in seconds.
#[derive(Debug, Clone, Copy)]
pub struct Timings {
    /// Factorization and model construction.
    pub precompute: f64,
    /// Grid placement, integration, and summary assembly.
    pub integrate: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.precompute + self.integrate
    }
}

/// One row of the bench table. Optional fields depend on the arm: the
/// quadrature arm has `nodes` and `integrate`, the sampler arm has
/// `draws` and `sample`.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub arm: &'static str,
    pub nodes: Option<usize>,
    pub draws: Option<usize>,
    pub precompute: f64,
    pub integrate: Option<f64>,
    pub sample: Option<f64>,
    /// Largest absolute deviation from the 500-node reference summary.
    pub max_err: f64,
}

impl BenchRow {
    pub fn total(&self) -> f64 {
        self.precompute + self.integrate.unwrap_or(0.0) + self.sample.unwrap_or(0.0)
    }
}

/// A float with 17 significant digits, exact for round-tripping.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Seconds with three decimals.
fn secs(v: f64) -> String {
    format!("{v:.3}")
}

/// Renders the complete fit summary document.
pub fn summary_json(
    summary: &PosteriorSummary<f64>,
    grid: &GridSpec<f64>,
    gamma: f64,
    n: usize,
    timings: &Timings,
) -> String {
    let k = summary.mean_beta.len();
    let mut out = String::with_capacity(1024 + 32 * k * (k + 1));
    out.push_str("{\n");
    out.push_str("  \"schema\": \"svdmarg-summary-v1\",\n");
    out.push_str(&format!("  \"n\": {n},\n"));
    out.push_str(&format!("  \"k\": {k},\n"));
    out.push_str(&format!("  \"gamma\": {},\n", num(gamma)));
    out.push_str(&format!("  \"cov_mode\": \"{}\",\n", summary.cov_mode));
    out.push_str("  \"grid\": {\n");
    out.push_str(&format!("    \"sigma1_lo\": {},\n", num(grid.sigma1.0)));
    out.push_str(&format!("    \"sigma1_hi\": {},\n", num(grid.sigma1.1)));
    out.push_str(&format!("    \"sigma2_lo\": {},\n", num(grid.sigma2.0)));
    out.push_str(&format!("    \"sigma2_hi\": {},\n", num(grid.sigma2.1)));
    out.push_str(&format!("    \"nodes_per_axis\": {}\n", grid.nodes_per_axis));
    out.push_str("  },\n");
    out.push_str("  \"timings\": {\n");
    out.push_str(&format!("    \"precompute_s\": {},\n", secs(timings.precompute)));
    out.push_str(&format!("    \"integrate_s\": {},\n", secs(timings.integrate)));
    out.push_str(&format!("    \"total_s\": {}\n", secs(timings.total())));
    out.push_str("  },\n");
    out.push_str(&format!("  \"mean_sigma1\": {},\n", num(summary.mean_sigma1)));
    out.push_str(&format!("  \"mean_sigma2\": {},\n", num(summary.mean_sigma2)));
    out.push_str(&format!("  \"var_sigma1\": {},\n", num(summary.var_sigma1)));
    out.push_str(&format!("  \"var_sigma2\": {},\n", num(summary.var_sigma2)));
    let means: Vec<String> = summary.mean_beta.iter().map(|&v| num(v)).collect();
    out.push_str(&format!("  \"mean_beta\": [{}],\n", means.join(", ")));
    out.push_str("  \"cov_beta\": [\n");
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| num(summary.cov_beta[(i, j)])).collect();
        let comma = if i + 1 < k { "," } else { "" };
        out.push_str(&format!("    [{}]{comma}\n", row.join(", ")));
    }
    out.push_str("  ]\n");
    out.push_str("}\n");
    out
}

const BENCH_HEADER: [&str; 10] = [
    "n",
    "k",
    "arm",
    "nodes",
    "draws",
    "precompute_s",
    "integrate_s",
    "sample_s",
    "total_s",
    "max_err",
];

fn bench_fields(row: &BenchRow) -> [String; 10] {
    let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_secs = |v: Option<f64>| v.map(secs).unwrap_or_default();
    [
        row.n.to_string(),
        row.k.to_string(),
        row.arm.to_string(),
        opt_usize(row.nodes),
        opt_usize(row.draws),
        secs(row.precompute),
        opt_secs(row.integrate),
        opt_secs(row.sample),
        secs(row.total()),
        format!("{:.3e}", row.max_err),
    ]
}

/// Renders the bench rows as CSV, header included.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&BENCH_HEADER.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&bench_fields(row).join(","));
        out.push('\n');
    }
    out
}

/// Renders the bench rows as an aligned table for the terminal.
pub fn bench_table(rows: &[BenchRow]) -> String {
    let cells: Vec<[String; 10]> = rows.iter().map(bench_fields).collect();
    let mut widths: Vec<usize> = BENCH_HEADER.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.len());
        }
    }
    let render = |fields: &[String]| -> String {
        let padded: Vec<String> = fields
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        padded.join("  ")
    };
    let header: Vec<String> = BENCH_HEADER.iter().map(|s| s.to_string()).collect();
    let mut out = render(&header);
    out.push('\n');
    for row in &cells {
        out.push_str(&render(row));
        out.push('\n');
    }
    out
}
