//! The four subcommands behind the binary.
//!
//! Each command reads its inputs, drives the library pipeline, writes
//! its output files, and prints a one-line status to stderr; stdout
//! carries only machine-readable output (the summary JSON under
//! `--out -`, the bench table). Timings come from a monotonic clock and
//! are reported with three decimals.
//!
//! The bench arms integrate under the conditional-variance covariance
//! form (`CovMode::Paper`), which keeps the sweep linear in `k`
//! at the large benchmark sizes; the timed run and its 500-node
//! reference share one mode, one data set, and one integration
//! rectangle, so the error column isolates the node count alone.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;

use svdmarg::{
    draw_beta, generate_synthetic, moment_functionals, posterior_summary, quadrature, run_chain,
    svd, CovMode, GridSpec, Hyperparams, MarginalModel, PosteriorSummary, RegressionData,
    SamplerConfig,
};

use crate::csvio;
use crate::error::{io_err, CliError, Result};
use crate::opts::{BenchOpts, FitOpts, GenOpts, SampleOpts};
use crate::report::{self, BenchRow, Timings};

/// XOR offset separating the coefficient-draw RNG stream from the chain
/// stream when both derive from one user seed.
const BETA_STREAM_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Working-set estimate, in doubles, above which bench refuses a size.
/// The factorization keeps roughly X, U, V, and workspace alive at once.
const BENCH_GUIDANCE_DOUBLES: f64 = 4.5e8;

/// Reads X and y and validates their shapes.
fn read_data(x: &Path, y: &Path, transpose: bool) -> Result<RegressionData<f64>> {
    let x = csvio::read_matrix(x, transpose)?;
    let y = csvio::read_vector(y)?;
    Ok(RegressionData::new(x, y)?)
}

/// Factorizes and builds the marginal model, timed as the precompute
/// phase.
fn precompute(
    data: &RegressionData<f64>,
    hyper: &Hyperparams<f64>,
) -> Result<(MarginalModel<f64>, f64)> {
    let start = Instant::now();
    let basis = svd::factorize(data)?;
    let model = MarginalModel::new(basis, hyper)?;
    Ok((model, start.elapsed().as_secs_f64()))
}

/// Runs the integration phase on `grid` and assembles the summary.
fn integrate_phase(
    model: &MarginalModel<f64>,
    grid: &GridSpec<f64>,
    mode: CovMode,
) -> Result<(PosteriorSummary<f64>, f64)> {
    let start = Instant::now();
    let acc = quadrature::integrate(model, grid, &moment_functionals(model.k(), mode))?;
    let summary = posterior_summary(model, &acc, mode)?;
    Ok((summary, start.elapsed().as_secs_f64()))
}

pub fn cmd_fit(opts: &FitOpts) -> Result<()> {
    let data = read_data(&opts.x, &opts.y, opts.transpose)?;
    let hyper = Hyperparams {
        gamma: opts.gamma,
        grid_nodes: opts.nodes,
        ..Hyperparams::default()
    };
    let (model, pre_secs) = precompute(&data, &hyper)?;
    let start = Instant::now();
    let grid = quadrature::auto_bounds(&model, &hyper)?;
    let (summary, _) = integrate_phase(&model, &grid, opts.cov_mode)?;
    let timings = Timings {
        precompute: pre_secs,
        integrate: start.elapsed().as_secs_f64(),
    };
    let json = report::summary_json(&summary, &grid, opts.gamma, data.n(), &timings);
    let dest = write_text(&opts.out, &json)?;
    eprintln!(
        "fit: n={} k={} gamma={} nodes={} cov={} precompute {:.3} s integrate {:.3} s -> {dest}",
        data.n(),
        data.k(),
        opts.gamma,
        opts.nodes,
        summary.cov_mode,
        timings.precompute,
        timings.integrate,
    );
    Ok(())
}

pub fn cmd_gen(opts: &GenOpts) -> Result<()> {
    if opts.n == 0 || opts.k == 0 {
        return Err(CliError::Invalid(format!(
            "n and k must be at least 1, got n={} k={}",
            opts.n, opts.k
        )));
    }
    fs::create_dir_all(&opts.out_dir).map_err(|e| io_err(&opts.out_dir, e))?;
    let (data, beta_true) = generate_synthetic::<f64>(opts.n, opts.k, opts.seed);
    csvio::write_matrix(&opts.out_dir.join("X.csv"), &data.x)?;
    csvio::write_vector(&opts.out_dir.join("y.csv"), &data.y)?;
    csvio::write_vector(&opts.out_dir.join("beta_true.csv"), &beta_true)?;
    eprintln!(
        "gen: wrote X.csv y.csv beta_true.csv (n={}, k={}, seed={}) -> {}",
        opts.n,
        opts.k,
        opts.seed,
        opts.out_dir.display()
    );
    Ok(())
}

pub fn cmd_sample(opts: &SampleOpts) -> Result<()> {
    let data = read_data(&opts.x, &opts.y, opts.transpose)?;
    let hyper = Hyperparams {
        gamma: opts.gamma,
        ..Hyperparams::default()
    };
    let (model, pre_secs) = precompute(&data, &hyper)?;
    let config = SamplerConfig {
        draws: opts.draws,
        warmup: opts.warmup,
        seed: opts.seed,
        ..SamplerConfig::default()
    };
    let start = Instant::now();
    let chain = run_chain(&model, &config)?;
    let beta = draw_beta(&model, &chain, opts.seed ^ BETA_STREAM_OFFSET);
    let sample_secs = start.elapsed().as_secs_f64();
    csvio::write_chain(&opts.out, &chain.sigma, &beta)?;
    eprintln!(
        "sample: n={} k={} draws={} warmup={} accept {:.3} step {:.3} precompute {:.3} s \
         sample {:.3} s -> {}",
        data.n(),
        data.k(),
        opts.draws,
        opts.warmup,
        chain.accept_rate,
        chain.step_scale,
        pre_secs,
        sample_secs,
        opts.out.display()
    );
    Ok(())
}

pub fn cmd_bench(opts: &BenchOpts) -> Result<()> {
    let mut rows: Vec<BenchRow> = Vec::new();
    for &(n, k) in &opts.sizes {
        let doubles = 3.0 * n as f64 * k as f64 + (k as f64) * (k as f64);
        if doubles > BENCH_GUIDANCE_DOUBLES {
            return Err(CliError::Invalid(format!(
                "size {n}x{k} needs roughly {:.1} GB of working memory; pick sizes with \
                 3 n k + k^2 below {BENCH_GUIDANCE_DOUBLES:.0} doubles or run them on a \
                 larger machine",
                doubles * 8.0 / 1e9
            )));
        }
        let (data, _) = generate_synthetic::<f64>(n, k, opts.seed);
        let hyper = Hyperparams {
            grid_nodes: opts.nodes,
            ..Hyperparams::default()
        };
        let (model, pre_secs) = precompute(&data, &hyper)?;
        let start = Instant::now();
        let grid = quadrature::auto_bounds(&model, &hyper)?;
        let bounds_secs = start.elapsed().as_secs_f64();
        // Same bounds, reference resolution; node count is the only
        // difference the error column can see.
        let ref_grid = GridSpec {
            nodes_per_axis: 500,
            ..grid
        };
        let (reference, _) = integrate_phase(&model, &ref_grid, CovMode::Paper)?;

        if opts.arm.runs_trap() {
            let (summary, int_secs) = integrate_phase(&model, &grid, CovMode::Paper)?;
            rows.push(BenchRow {
                n,
                k,
                arm: "trap",
                nodes: Some(opts.nodes),
                draws: None,
                precompute: pre_secs,
                integrate: Some(bounds_secs + int_secs),
                sample: None,
                max_err: summary_dev(&summary, &reference),
            });
        }
        if opts.arm.runs_mcmc() {
            let config = SamplerConfig {
                draws: opts.draws,
                warmup: opts.warmup,
                seed: opts.seed,
                ..SamplerConfig::default()
            };
            let start = Instant::now();
            let chain = run_chain(&model, &config)?;
            let beta = draw_beta(&model, &chain, opts.seed ^ BETA_STREAM_OFFSET);
            let sample_secs = start.elapsed().as_secs_f64();
            rows.push(BenchRow {
                n,
                k,
                arm: "svd-mcmc",
                nodes: None,
                draws: Some(opts.draws),
                precompute: pre_secs,
                integrate: None,
                sample: Some(sample_secs),
                max_err: chain_dev(&chain.sigma, &beta, &reference),
            });
        }
    }

    fs::write(&opts.out, report::bench_csv(&rows)).map_err(|e| io_err(&opts.out, e))?;
    print!("{}", report::bench_table(&rows));
    eprintln!("bench: {} rows -> {}", rows.len(), opts.out.display());
    Ok(())
}

/// Largest absolute deviation across every summary moment.
fn summary_dev(a: &PosteriorSummary<f64>, b: &PosteriorSummary<f64>) -> f64 {
    let mut dev: f64 = 0.0;
    for (x, y) in [
        (a.mean_sigma1, b.mean_sigma1),
        (a.mean_sigma2, b.mean_sigma2),
        (a.var_sigma1, b.var_sigma1),
        (a.var_sigma2, b.var_sigma2),
    ] {
        dev = dev.max((x - y).abs());
    }
    for (x, y) in a.mean_beta.iter().zip(b.mean_beta.iter()) {
        dev = dev.max((x - y).abs());
    }
    for (x, y) in a.cov_beta.iter().zip(b.cov_beta.iter()) {
        dev = dev.max((x - y).abs());
    }
    dev
}

/// Largest absolute deviation of the sampler's first moments from the
/// reference summary.
fn chain_dev(sigma: &DMatrix<f64>, beta: &DMatrix<f64>, reference: &PosteriorSummary<f64>) -> f64 {
    let draws = sigma.nrows() as f64;
    let mut dev: f64 = 0.0;
    dev = dev.max((sigma.column(0).sum() / draws - reference.mean_sigma1).abs());
    dev = dev.max((sigma.column(1).sum() / draws - reference.mean_sigma2).abs());
    for j in 0..beta.ncols() {
        dev = dev.max((beta.column(j).sum() / draws - reference.mean_beta[j]).abs());
    }
    dev
}

/// Writes `text` to `path`, with `-` meaning stdout. Returns the label
/// used in status lines.
fn write_text(path: &Path, text: &str) -> Result<String> {
    if path.as_os_str() == "-" {
        print!("{text}");
        Ok("stdout".into())
    } else {
        fs::write(path, text).map_err(|e| io_err(path, e))?;
        Ok(path.display().to_string())
    }
}
