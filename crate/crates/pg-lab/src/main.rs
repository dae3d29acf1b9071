//! Command-line front end. Exit codes: 0 success, 2 config error,
//! 3 numeric failure, 1 anything else.

use clap::{Parser, Subcommand};
use pg_lab::diagnostics::{
    critic_mse_vs_return, gradient_similarity_analysis, perturbation_delta_map,
    reference_gradient, cosine_similarity,
};
use pg_lab::algo::{Algorithm, PolicyMode};
use pg_lab::harness::{
    ablation_matrix, compare, load_agent, plot_run, run, AblationAxis, ConfigMap, CsvWriter,
    RunConfig,
};
use pg_lab::rng::stream_rng;
use pg_lab::search::SearchConfig;
use pg_lab::{Error, Result};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "pg-lab",
    about = "Desk-scale policy-gradient laboratory: PPO, DDPG, TD3 with a \
             gradient-free critic population search and diagnostics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent from a config file.
    Train {
        /// key=value config file; defaults apply for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override one config key, repeatable: --set seed=3
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Drop the unperturbed critic from the search selection set.
        #[arg(long)]
        exclude_original: bool,
        /// Reset the critic's Adam moments after an installed perturbation.
        #[arg(long)]
        reset_critic_optim: bool,
        /// Strict Monte-Carlo returns: no critic bootstrap for the rollout's
        /// trailing truncated episode.
        #[arg(long)]
        no_tail_bootstrap: bool,
    },
    /// Compare two method directories (single runs or dirs of seed runs).
    Compare {
        baseline_dir: PathBuf,
        candidate_dir: PathBuf,
        /// Fixed return threshold instead of the baseline peak rule.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Run an ablation sweep over one search hyperparameter.
    Ablate {
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values (steps for annealing, sizes for
        /// population_size, 1 for the single-scale axes).
        #[arg(long)]
        values: String,
        /// Comma-separated seeds (default 0..4).
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        /// Output root for the matrix (cells nest inside).
        #[arg(long, default_value = "runs/ablation")]
        output_dir: PathBuf,
        /// Parallel workers (each cell is single-threaded).
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Run a read-only analysis over a saved agent checkpoint.
    Diagnose {
        /// One of: grad-similarity, mse-vs-return, delta-map, grad-reference.
        #[arg(long)]
        analysis: String,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Episodes for mse-vs-return and delta-map.
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Comma-separated per-estimate sample sizes for grad-similarity.
        #[arg(long, default_value = "32,128,512,2048")]
        sample_sizes: String,
        #[arg(long, default_value_t = 30)]
        n_estimates: usize,
        /// Reference sample count for grad-reference.
        #[arg(long, default_value_t = 1_000_000)]
        reference_samples: usize,
        /// Output CSV (default: <checkpoint dir>/<analysis>_<step>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render SVG plots for a run directory (or a directory of runs).
    Plot { run_dir: PathBuf },
}

fn parse_u64_list(text: &str, what: &str) -> Result<Vec<u64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid {what} list entry '{part}'")))
        })
        .collect()
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    Ok(parse_u64_list(text, what)?.into_iter().map(|v| v as usize).collect())
}

fn build_map(config: Option<&PathBuf>, sets: &[String]) -> Result<ConfigMap> {
    let mut map = match config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::default(),
    };
    map.apply_sets(sets)?;
    Ok(map)
}

fn cmd_train(
    config: Option<PathBuf>,
    sets: Vec<String>,
    exclude_original: bool,
    reset_critic_optim: bool,
    no_tail_bootstrap: bool,
) -> Result<()> {
    let mut map = build_map(config.as_ref(), &sets)?;
    if exclude_original {
        map.set("search.include_original", "false");
    }
    if reset_critic_optim {
        map.set("search.reset_critic_optim", "true");
    }
    if no_tail_bootstrap {
        map.set("ppo.tail_bootstrap", "false");
    }
    let run_config = RunConfig::from_map(&map)?;
    let summary = run(&run_config)?;
    println!(
        "run finished: {} evals, final return {:.4}, best {:.4}, {} search events -> {}",
        summary.return_curve.len(),
        summary.final_return,
        summary.best_return,
        summary.search_records.len(),
        summary.output_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_diagnose(
    analysis: String,
    checkpoint: PathBuf,
    seed: u64,
    episodes: usize,
    sample_sizes: String,
    n_estimates: usize,
    reference_samples: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let (agent, meta) = load_agent(&checkpoint)?;
    let overrides = meta.env_overrides.clone();
    let env_name = meta.env_name.clone();
    let factory = move || pg_lab::envs::make_env(&env_name, &overrides);
    let run_dir = checkpoint
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let out_path = |name: &str| {
        out.clone()
            .unwrap_or_else(|| run_dir.join(format!("{name}_{}.csv", meta.step)))
    };
    let mut rng = stream_rng(seed, "diagnose");
    let mode = if agent.algorithm == Algorithm::Ppo {
        PolicyMode::Explore
    } else {
        PolicyMode::Greedy
    };

    match analysis.as_str() {
        "grad-similarity" => {
            let sizes = parse_usize_list(&sample_sizes, "sample size")?;
            let curve = gradient_similarity_analysis(
                &agent,
                &factory,
                &sizes,
                n_estimates,
                meta.step,
                &mut rng,
            )?;
            let path = out_path("grad_similarity");
            let mut csv = CsvWriter::create(
                path.clone(),
                "sample_size,mean_pairwise_cosine,std_pairwise_cosine,n_excluded,n_estimates,seed_streams",
            )?;
            for i in 0..curve.sample_sizes.len() {
                csv.row(&[
                    &curve.sample_sizes[i],
                    &curve.mean_pairwise_cosine[i],
                    &curve.std_pairwise_cosine[i],
                    &curve.n_excluded[i],
                    &curve.n_estimates,
                    &"independent",
                ])?;
            }
            println!("wrote {}", path.display());
        }
        "mse-vs-return" => {
            let value = critic_mse_vs_return(
                &agent.critics[0],
                &agent,
                &factory,
                episodes,
                meta.gamma,
                mode,
                &mut rng,
            )?;
            let path = out_path("mse_vs_return");
            let mut csv = CsvWriter::create(path.clone(), "checkpoint_step,normalized_mse,n_eval_episodes")?;
            csv.row(&[&meta.step, &value, &episodes])?;
            println!("normalized critic MSE: {value}");
            println!("wrote {}", path.display());
        }
        "delta-map" => {
            let deltas = perturbation_delta_map(
                &agent.critics[0],
                &SearchConfig::default(),
                &agent,
                &factory,
                episodes,
                mode,
                &mut rng,
            )?;
            let path = out_path("delta_map");
            let mut csv = CsvWriter::create(path.clone(), "episode,small_mean_abs_delta,large_mean_abs_delta")?;
            for (i, (s, l)) in deltas.small.iter().zip(&deltas.large).enumerate() {
                csv.row(&[&i, s, l])?;
            }
            println!("wrote {}", path.display());
        }
        "grad-reference" => {
            let reference = reference_gradient(&agent, &factory, reference_samples, &mut rng)?;
            let sizes = parse_usize_list(&sample_sizes, "sample size")?;
            let path = out_path("grad_reference");
            let mut csv = CsvWriter::create(
                path.clone(),
                "sample_size,estimate_index,cosine_to_reference",
            )?;
            for &k in &sizes {
                for estimate_index in 0..n_estimates {
                    let estimate = pg_lab::diagnostics::actor_gradient_estimate(
                        &agent, &factory, k, &mut rng,
                    )?;
                    let cos = cosine_similarity(&estimate, &reference)?;
                    csv.row(&[&k, &estimate_index, &cos])?;
                }
            }
            println!("wrote {}", path.display());
        }
        other => {
            return Err(Error::Config(format!(
                "unknown analysis '{other}' (grad-similarity, mse-vs-return, delta-map, grad-reference)"
            )))
        }
    }
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train {
            config,
            sets,
            exclude_original,
            reset_critic_optim,
            no_tail_bootstrap,
        } => cmd_train(config, sets, exclude_original, reset_critic_optim, no_tail_bootstrap),
        Command::Compare {
            baseline_dir,
            candidate_dir,
            threshold,
        } => {
            let comparison = compare(&baseline_dir, &candidate_dir, threshold)?;
            print!("{comparison}");
            Ok(())
        }
        Command::Ablate {
            axis,
            values,
            seeds,
            config,
            sets,
            output_dir,
            workers,
        } => {
            let axis: AblationAxis = axis.parse()?;
            let values = parse_u64_list(&values, "axis value")?;
            let seeds = parse_u64_list(&seeds, "seed")?;
            let map = build_map(config.as_ref(), &sets)?;
            let cells = ablation_matrix(&map, axis, &values, &seeds, &output_dir, workers)?;
            let mut failures = 0;
            for cell in &cells {
                match &cell.result {
                    Ok(summary) => println!(
                        "{}={} seed={} final={:.4}",
                        axis.name(),
                        cell.axis_value,
                        cell.seed,
                        summary.final_return
                    ),
                    Err(e) => {
                        failures += 1;
                        eprintln!(
                            "{}={} seed={} FAILED: {e}",
                            axis.name(),
                            cell.axis_value,
                            cell.seed
                        );
                    }
                }
            }
            if failures > 0 {
                return Err(Error::Numeric(format!("{failures} ablation cells failed")));
            }
            Ok(())
        }
        Command::Diagnose {
            analysis,
            checkpoint,
            seed,
            episodes,
            sample_sizes,
            n_estimates,
            reference_samples,
            out,
        } => cmd_diagnose(
            analysis,
            checkpoint,
            seed,
            episodes,
            sample_sizes,
            n_estimates,
            reference_samples,
            out,
        ),
        Command::Plot { run_dir } => {
            for path in plot_run(&run_dir)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() {
    if let Err(error) = real_main() {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}
