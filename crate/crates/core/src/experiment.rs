//! Seeded experiment runners behind the command line tool.
//!
//! Every runner validates its configuration before touching the output
//! directory, derives each random stream from the root seed and a component
//! name, and returns the summary lines it wants printed.

use std::fs;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::balance::{
    balance_energy_fast_with, balance_energy_naive_with, balance_gradient_fast_with,
    balance_gradient_naive_with, descend_balance, max_relative_deviation, relative_deviation, BalanceError,
    Kernel,
};
use crate::config::{ConfigError, Experiment, ExperimentConfig};
use crate::interpret::{
    blob_embeddings, edges_csv, init_adjacency, kmeans_fit, map_knowledge_to_neurons, threshold_graph,
    train_classifier, uniform_embeddings, EmbeddingSet, InterpretError,
};
use crate::io::{energy_trace_csv, fmt_f64, matrix_csv, parse_matrix_csv, write_file, ParseError};
use crate::matrix::SynapticMatrix;
use crate::plasticity::{balance_regularized_update, weight_stats, PlasticityError};
use crate::population::{build_trial_blocks, PlaceFieldPopulation, PopulationError, TrialBlockSet};
use crate::ripple::{
    entropy, event_seed, events_csv, generate_event, probabilities_csv, similarity_csv, sleep_bias,
    trajectories_csv, wake_sleep_csv, RippleBatch, RippleError,
};
use crate::seed::{component_rng, derive_indexed, rng_from_seed};

/// Range covered by the interpret prediction grid on both axes.
pub const GRID_RANGE: (f64, f64) = (-0.1, 1.1);

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: ParseError },
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {}: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("the energy experiment needs a matrix file (--matrix)")]
    MissingMatrix,
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error(transparent)]
    Ripple(#[from] RippleError),
    #[error(transparent)]
    Plasticity(#[from] PlasticityError),
    #[error(transparent)]
    Interpret(#[from] InterpretError),
}

impl ExperimentError {
    /// 2 for bad input or configuration, 1 for failures during a run.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Input { .. } | Self::Read { .. } | Self::MissingMatrix => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, ExperimentError>;

struct Emitter<'a> {
    dir: &'a Path,
    lines: Vec<String>,
}

impl<'a> Emitter<'a> {
    fn new(dir: &'a Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| ExperimentError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Self { dir, lines: Vec::new() })
    }

    fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        write_file(&path, contents).map_err(|source| ExperimentError::Write {
            path: path.clone(),
            source,
        })?;
        self.lines
            .push(format!("wrote {} ({} lines)", path.display(), contents.lines().count()));
        Ok(())
    }
}

fn validated(cfg: &ExperimentConfig, experiment: Experiment) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig {
        experiment,
        ..cfg.clone()
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Indices of the `top` most active neurons of each block template,
/// highest rate first, ties to the lowest index.
pub fn block_top_neurons(blocks: &TrialBlockSet, top: usize) -> Vec<Vec<usize>> {
    blocks
        .templates
        .iter()
        .map(|t| {
            let mut idx: Vec<usize> = (0..t.len()).collect();
            idx.sort_by(|&a, &b| t[b].total_cmp(&t[a]).then(a.cmp(&b)));
            idx.truncate(top.min(t.len()));
            idx
        })
        .collect()
}

/// Balance energy of the weights among each block's most active neurons.
pub fn block_energies(w: &SynapticMatrix, top: &[Vec<usize>], cfg: &ExperimentConfig) -> Vec<f64> {
    top.iter()
        .map(|idx| {
            let sub = SynapticMatrix::from_upper(idx.len(), |a, b| w.get(idx[a], idx[b]));
            cfg.kernel.energy(&sub, cfg.penalty)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub p_wake: Vec<f64>,
    pub p_sleep: Vec<f64>,
    pub entropy_wake: f64,
    pub entropy_sleep: f64,
    pub agreement: f64,
    pub weight_skewness: f64,
    pub lines: Vec<String>,
}

/// Place-field population, trial blocks, one ripple event at a time with
/// a plasticity update after each, then wake and sleep replay statistics.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulationReport> {
    let cfg = validated(cfg, Experiment::Simulate)?;
    let pop = PlaceFieldPopulation::sample_uniform(
        cfg.n_neurons,
        cfg.sigma_pf,
        cfg.noise_sigma,
        &mut component_rng(cfg.seed, "population"),
    )?;
    let blocks = build_trial_blocks(&pop, cfg.k_blocks, cfg.pos_lo, cfg.pos_hi)?;
    let plasticity = cfg.plasticity();
    let needs_energy = cfg.ripple.gamma_balance > 0.0 || cfg.ripple.alpha_manifold > 0.0;
    let top = block_top_neurons(&blocks, cfg.block_energy_top);

    let mut w = SynapticMatrix::zeros(cfg.n_neurons);
    let mut events = Vec::with_capacity(cfg.m_events);
    let zeros = vec![0.0; cfg.k_blocks];
    for m in 0..cfg.m_events {
        let energies = if needs_energy {
            block_energies(&w, &top, &cfg)
        } else {
            zeros.clone()
        };
        let mut rng = rng_from_seed(event_seed(cfg.seed, m));
        let event = generate_event(&blocks, &cfg.ripple, &energies, &mut rng)?;
        w = balance_regularized_update(&w, &event.spikes, event.selected_probability(), &plasticity)?;
        events.push(event);
    }
    let batch = RippleBatch::from_events(events, cfg.k_blocks);
    let p_sleep = sleep_bias(&batch.wake_histogram, cfg.gamma)?;
    let stats = weight_stats(&w, cfg.hist_bins)?;

    let mut em = Emitter::new(out)?;
    em.emit("blocks.csv", &blocks.blocks_csv())?;
    em.emit("templates.csv", &blocks.templates_csv())?;
    em.emit("trajectories.csv", &trajectories_csv(&batch.events))?;
    em.emit("similarity.csv", &similarity_csv(&batch.events))?;
    em.emit("probabilities.csv", &probabilities_csv(&batch.events))?;
    em.emit("events.csv", &events_csv(&batch.events))?;
    em.emit("wake_sleep.csv", &wake_sleep_csv(&batch.wake_histogram, &p_sleep))?;
    em.emit("weights.csv", &matrix_csv(w.as_dense()))?;
    em.emit("histogram.csv", &stats.histogram_csv())?;

    let report = SimulationReport {
        entropy_wake: entropy(&batch.wake_histogram),
        entropy_sleep: entropy(&p_sleep),
        agreement: batch.agreement_rate(),
        weight_skewness: stats.skewness,
        p_wake: batch.wake_histogram,
        p_sleep,
        lines: Vec::new(),
    };
    em.lines.push(format!(
        "agreement {} | entropy wake {} sleep {} | weight skewness {}",
        fmt_f64(report.agreement),
        fmt_f64(report.entropy_wake),
        fmt_f64(report.entropy_sleep),
        fmt_f64(report.weight_skewness)
    ));
    Ok(SimulationReport {
        lines: em.lines,
        ..report
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpretReport {
    pub final_test_accuracy: f64,
    pub balance_energy: Vec<f64>,
    pub adjacency_energy: Vec<f64>,
    pub edge_count: usize,
    pub lines: Vec<String>,
}

fn points_csv(header: &str, set: &EmbeddingSet, extra: impl Fn(usize) -> String) -> String {
    let mut out = format!("{header}\n");
    for (i, v) in set.vectors().iter().enumerate() {
        out.push_str(&format!("{i},{},{},{}\n", fmt_f64(v[0]), fmt_f64(v[1]), extra(i)));
    }
    out
}

/// Neuron embeddings, k-means groups, knowledge blobs around the group
/// centroids, a balance-relaxed adjacency, and a penalized classifier.
///
/// Knowledge ids number the training items first, then the test items.
pub fn run_interpret(cfg: &ExperimentConfig, out: &Path) -> Result<InterpretReport> {
    let cfg = validated(cfg, Experiment::Interpret)?;
    let seed = cfg.seed;
    let neurons = uniform_embeddings(cfg.interpret_neurons, 2, &mut component_rng(seed, "interpret-neurons"));
    let clusters = kmeans_fit(
        &neurons,
        cfg.clusters,
        cfg.kmeans_iters,
        &mut component_rng(seed, "interpret-kmeans"),
    )?;
    let train = blob_embeddings(
        &clusters.centroids,
        cfg.n_train,
        cfg.blob_spread,
        &mut component_rng(seed, "interpret-train"),
    )?;
    let test = blob_embeddings(
        &clusters.centroids,
        cfg.n_test,
        cfg.blob_spread,
        &mut component_rng(seed, "interpret-test"),
    )?;
    let knowledge = EmbeddingSet::new(train.vectors().iter().chain(test.vectors()).cloned().collect())?;
    let mapping = map_knowledge_to_neurons(&knowledge, &neurons)?;

    let w0 = init_adjacency(&neurons, &mut component_rng(seed, "interpret-adjacency"))?;
    let (w, adjacency_energy) = descend_balance(&w0, &cfg.descent())?;
    let run = train_classifier(
        &train,
        Some(&test),
        &cfg.training(),
        &mut component_rng(seed, "interpret-classifier"),
    )?;
    let edges = threshold_graph(&w, cfg.percentile)?;
    let grid = run
        .model
        .prediction_grid_csv(GRID_RANGE.0, GRID_RANGE.1, cfg.grid_resolution)?;

    let mut mapping_csv = String::from("knowledge_id,neuron_id,cluster\n");
    for (k, &j) in mapping.iter().enumerate() {
        mapping_csv.push_str(&format!("{k},{j},{}\n", clusters.assignments[j]));
    }
    let n_train = train.len();
    let labels: Vec<usize> = train
        .labels()
        .into_iter()
        .chain(test.labels())
        .flatten()
        .copied()
        .collect();

    let mut em = Emitter::new(out)?;
    em.emit(
        "neurons.csv",
        &points_csv("neuron_id,x,y,cluster", &neurons, |i| clusters.assignments[i].to_string()),
    )?;
    em.emit(
        "knowledge.csv",
        &points_csv("knowledge_id,x,y,label,split", &knowledge, |i| {
            format!("{},{}", labels[i], if i < n_train { "train" } else { "test" })
        }),
    )?;
    em.emit("mapping.csv", &mapping_csv)?;
    em.emit("adjacency_initial.csv", &matrix_csv(w0.as_dense()))?;
    em.emit("adjacency.csv", &matrix_csv(w.as_dense()))?;
    em.emit("adjacency_energy.csv", &energy_trace_csv(&adjacency_energy))?;
    em.emit("edges.csv", &edges_csv(&edges))?;
    em.emit("training.csv", &run.training_csv())?;
    em.emit("model.csv", &run.model.model_csv())?;
    em.emit("grid.csv", &grid)?;

    let final_test_accuracy = *run.test_accuracy.last().unwrap_or(&0.0);
    em.lines.push(format!(
        "test accuracy {} | classifier balance energy {} -> {} | adjacency energy {} -> {} | {} edges",
        fmt_f64(final_test_accuracy),
        fmt_f64(run.balance_energy[0]),
        fmt_f64(*run.balance_energy.last().expect("epochs >= 1")),
        fmt_f64(adjacency_energy[0]),
        fmt_f64(*adjacency_energy.last().expect("trace is never empty")),
        edges.len()
    ));
    Ok(InterpretReport {
        final_test_accuracy,
        balance_energy: run.balance_energy,
        adjacency_energy,
        edge_count: edges.len(),
        lines: em.lines,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchEntry {
    pub n: usize,
    pub naive_energy_seconds: f64,
    pub fast_energy_seconds: f64,
    pub energy_speedup: f64,
    pub naive_gradient_seconds: f64,
    pub fast_gradient_seconds: f64,
    pub gradient_speedup: f64,
    pub energy_relative_deviation: f64,
    pub gradient_max_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub runs: usize,
    pub statistic: &'static str,
    pub results: Vec<BenchEntry>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median wall time of `runs` calls.
pub fn time_median<T>(runs: usize, mut f: impl FnMut() -> T) -> f64 {
    let samples = (0..runs)
        .map(|_| {
            let start = Instant::now();
            black_box(f());
            start.elapsed().as_secs_f64()
        })
        .collect();
    median(samples)
}

/// One-nanosecond floor keeps ratios finite for tiny matrices.
fn ratio(slow: f64, fast: f64) -> f64 {
    slow.max(1e-9) / fast.max(1e-9)
}

pub fn bench_sizes(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let cfg = validated(cfg, Experiment::Bench)?;
    let p = cfg.penalty;
    let mut results = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let w = SynapticMatrix::random_uniform(n, &mut rng_from_seed(derive_indexed(cfg.seed, "bench", n as u64)));
        let naive_e = time_median(cfg.bench_runs, || balance_energy_naive_with(black_box(&w), p));
        let fast_e = time_median(cfg.bench_runs, || balance_energy_fast_with(black_box(&w), p));
        let naive_g = time_median(cfg.bench_runs, || balance_gradient_naive_with(black_box(&w), p));
        let fast_g = time_median(cfg.bench_runs, || balance_gradient_fast_with(black_box(&w), p));
        results.push(BenchEntry {
            n,
            naive_energy_seconds: naive_e,
            fast_energy_seconds: fast_e,
            energy_speedup: ratio(naive_e, fast_e),
            naive_gradient_seconds: naive_g,
            fast_gradient_seconds: fast_g,
            gradient_speedup: ratio(naive_g, fast_g),
            energy_relative_deviation: relative_deviation(
                balance_energy_naive_with(&w, p),
                balance_energy_fast_with(&w, p),
            ),
            gradient_max_relative_deviation: max_relative_deviation(
                &balance_gradient_naive_with(&w, p),
                &balance_gradient_fast_with(&w, p),
            ),
        });
    }
    Ok(BenchReport {
        seed: cfg.seed,
        runs: cfg.bench_runs,
        statistic: "median",
        results,
    })
}

/// Times both kernels and writes `bench.json`.
pub fn run_bench(cfg: &ExperimentConfig, out: &Path) -> Result<(BenchReport, Vec<String>)> {
    let report = bench_sizes(cfg)?;
    let json = serde_json::to_string_pretty(&report).expect("report is plain data") + "\n";
    let mut em = Emitter::new(out)?;
    em.emit("bench.json", &json)?;
    let mut lines = vec![json.trim_end().to_string()];
    lines.extend(em.lines);
    Ok((report, lines))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub naive: f64,
    pub fast: f64,
    pub relative_difference: f64,
    pub lines: Vec<String>,
}

/// Energy of a matrix file under both kernels, plus an optional gradient
/// file from the configured kernel.
pub fn run_energy(cfg: &ExperimentConfig, matrix: Option<&Path>, gradient_out: Option<&Path>) -> Result<EnergyReport> {
    let cfg = validated(cfg, Experiment::Energy)?;
    let path = matrix.ok_or(ExperimentError::MissingMatrix)?;
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let w = parse_matrix_csv(&text).map_err(|source| ExperimentError::Input {
        path: path.to_path_buf(),
        source,
    })?;
    let naive = balance_energy_naive_with(&w, cfg.penalty);
    let fast = balance_energy_fast_with(&w, cfg.penalty);
    let relative_difference = relative_deviation(naive, fast);
    let mut lines = vec![
        format!("naive energy: {}", fmt_f64(naive)),
        format!("fast energy: {}", fmt_f64(fast)),
        format!("relative difference: {}", fmt_f64(relative_difference)),
    ];
    if let Some(g) = gradient_out {
        let grad = match cfg.kernel {
            Kernel::Naive => balance_gradient_naive_with(&w, cfg.penalty),
            Kernel::Fast => balance_gradient_fast_with(&w, cfg.penalty),
        };
        let contents = matrix_csv(&grad);
        write_file(g, &contents).map_err(|source| ExperimentError::Write {
            path: g.to_path_buf(),
            source,
        })?;
        lines.push(format!("wrote {} ({} lines)", g.display(), grad.n()));
    }
    Ok(EnergyReport {
        naive,
        fast,
        relative_difference,
        lines,
    })
}
