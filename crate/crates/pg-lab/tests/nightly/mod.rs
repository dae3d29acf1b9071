//! Statistical acceptance criteria (09-14).
//!
//! These train real agents over many seeds and check directional claims,
//! so they are `#[ignore]`d in normal CI and meant for a nightly job:
//!
//! ```text
//! cargo test --release -p pg-lab --test acceptance -- --ignored --nocapture
//! ```
//!
//! Two shared base experiments (10 seeds each of baseline PPO and
//! search-enabled PPO, on pendulum-swingup and on point-mass-2d) are
//! computed once per process and reloaded from disk on later invocations,
//! so a repeated nightly does not retrain. Pendulum carries the criteria
//! that name it; point-mass carries the env-free ones, because its
//! unimodal outcomes give directional comparisons far better power than
//! pendulum's occasionally-stuck runs.
//!
//! The experiment configs scale both perturbation scales by 100x relative
//! to the shipped defaults (keeping their 100x ratio): the default scales
//! are sized for networks whose value predictions span thousands, where a
//! large-scale perturbation moves predictions by a meaningful fraction of
//! the critic's residual error. On these toy tasks the same absolute
//! scales move predictions by ~0.02% of the value range, which turns
//! selection into a coin flip over target noise; the scaled values restore
//! the regime the search is designed for. Everything else stays at the
//! shipped defaults. Per-seed "final performance" is the mean of the last
//! three evaluation points.

use pg_lab::algo::PolicyMode;
use pg_lab::diagnostics::{
    critic_mse_vs_return, gradient_similarity_analysis, spearman_rank_correlation,
};
use pg_lab::harness::{load_agent, read_numeric_csv, run, ConfigMap, RunConfig, RunSummary};
use pg_lab::rng::stream_rng;
use pg_lab::search::{improvement_tally, SearchRecord};
use std::path::PathBuf;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];
const PEND_STEPS: u64 = 200_000;
const PM_STEPS: u64 = 150_000;
const EVAL_EVERY: u64 = 5_000;
const WORKERS: usize = 2;

/// Perturbation scales for the experiment configs (see module docs).
const SIGMA_MIN: &str = "0.0005";
const SIGMA_MAX: &str = "0.05";

fn out_root() -> PathBuf {
    std::env::temp_dir().join("pg-lab-acceptance-nightly")
}

fn run_map(env: &str, steps: u64, seed: u64, dir: &str, extra: &[(&str, &str)]) -> ConfigMap {
    let mut map = ConfigMap::default();
    map.set("algorithm", "ppo");
    map.set("env", env);
    map.set("total_steps", &steps.to_string());
    map.set("eval_every", &EVAL_EVERY.to_string());
    map.set("eval_episodes", "10");
    map.set("seed", &seed.to_string());
    map.set(
        "output_dir",
        &out_root().join(dir).join(format!("seed={seed}")).display().to_string(),
    );
    for (k, v) in extra {
        map.set(k, v);
    }
    map
}

fn search_extras<'a>(more: &[(&'a str, &'a str)]) -> Vec<(&'a str, &'a str)> {
    let mut extras = vec![
        ("search.enabled", "true"),
        ("search.sigma_min", SIGMA_MIN),
        ("search.sigma_max", SIGMA_MAX),
    ];
    extras.extend_from_slice(more);
    extras
}

/// Reload a finished run from its directory, or None when incomplete. A
/// run is complete when its eval curve reaches the final scheduled step
/// and all quarter-mark checkpoints exist.
fn load_finished(config: &RunConfig) -> Option<RunSummary> {
    let dir = &config.output_dir;
    let rows = read_numeric_csv(&dir.join("eval.csv"), "step,mean_return,std_return").ok()?;
    let curve: Vec<(u64, f64)> = rows.iter().map(|r| (r[0] as u64, r[1])).collect();
    let last_scheduled = config.total_steps / config.eval_every * config.eval_every;
    if curve.last().map(|&(s, _)| s) != Some(last_scheduled) {
        return None;
    }
    let mut checkpoint_steps = Vec::new();
    for fraction in [0.25, 0.5, 0.75, 1.0] {
        let mut step = (config.total_steps as f64 * fraction).round() as u64;
        // PPO checkpoints land on update boundaries.
        let spu = config.algo.ppo.samples_per_update as u64;
        step = step.div_ceil(spu) * spu;
        if !dir.join(format!("checkpoint_{step}.agent")).exists() {
            return None;
        }
        if checkpoint_steps.last() != Some(&step) {
            checkpoint_steps.push(step);
        }
    }
    let search_records = read_search_records(&dir.join("search.csv"))?;
    let final_return = curve.last().map(|&(_, r)| r).unwrap_or(f64::NEG_INFINITY);
    let best_return = curve.iter().map(|&(_, r)| r).fold(f64::NEG_INFINITY, f64::max);
    Some(RunSummary {
        seed: config.seed,
        return_curve: curve,
        final_return,
        best_return,
        search_records,
        output_dir: dir.clone(),
        checkpoint_steps,
    })
}

fn read_search_records(path: &std::path::Path) -> Option<Vec<SearchRecord>> {
    let text = std::fs::read_to_string(path).ok()?;
    let mut lines = text.lines();
    if lines.next() != Some("step,critic_index,winner_tag,original_mse,winner_mse") {
        return None;
    }
    let mut records = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        records.push(SearchRecord {
            step: cells[0].parse().ok()?,
            critic_index: cells[1].parse().ok()?,
            winner_tag: cells[2].parse().ok()?,
            original_mse: cells[3].parse().ok()?,
            winner_mse: cells[4].parse().ok()?,
            per_candidate_mse: Vec::new(),
        });
    }
    Some(records)
}

/// Run one config per seed on a small worker pool, reloading any run that
/// already finished on disk; panics on any failure.
fn run_seeds(configs: Vec<RunConfig>) -> Vec<RunSummary> {
    let queue = Mutex::new(configs.into_iter());
    let results = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..WORKERS {
            scope.spawn(|| loop {
                let next = queue.lock().unwrap().next();
                match next {
                    Some(config) => {
                        let summary = load_finished(&config)
                            .unwrap_or_else(|| run(&config).expect("nightly run failed"));
                        results.lock().unwrap().push(summary);
                    }
                    None => break,
                }
            });
        }
    });
    let mut summaries = results.into_inner().unwrap();
    summaries.sort_by_key(|s| s.seed);
    summaries
}

struct BaseExperiment {
    ppo: Vec<RunSummary>,
    search: Vec<RunSummary>,
    elapsed_secs: f64,
}

fn build_base(env: &str, steps: u64, ppo_dir: &str, search_dir: &str) -> BaseExperiment {
    let start = Instant::now();
    let ppo = run_seeds(
        SEEDS
            .iter()
            .map(|&seed| RunConfig::from_map(&run_map(env, steps, seed, ppo_dir, &[])).unwrap())
            .collect(),
    );
    let search = run_seeds(
        SEEDS
            .iter()
            .map(|&seed| {
                RunConfig::from_map(&run_map(env, steps, seed, search_dir, &search_extras(&[])))
                    .unwrap()
            })
            .collect(),
    );
    BaseExperiment {
        ppo,
        search,
        elapsed_secs: start.elapsed().as_secs_f64(),
    }
}

static PENDULUM: OnceLock<BaseExperiment> = OnceLock::new();
static POINT_MASS: OnceLock<BaseExperiment> = OnceLock::new();

fn pendulum_base() -> &'static BaseExperiment {
    PENDULUM
        .get_or_init(|| build_base("pendulum-swingup", PEND_STEPS, "pend-ppo", "pend-search"))
}

fn point_mass_base() -> &'static BaseExperiment {
    POINT_MASS.get_or_init(|| build_base("point-mass-2d", PM_STEPS, "pm-ppo", "pm-search"))
}

/// Mean of the last three evaluation points.
fn smoothed_final(summary: &RunSummary) -> f64 {
    let curve = &summary.return_curve;
    let tail = &curve[curve.len().saturating_sub(3)..];
    tail.iter().map(|&(_, r)| r).sum::<f64>() / tail.len() as f64
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn std_n(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

fn pooled_std(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb) = (std_n(a), std_n(b));
    ((sa * sa + sb * sb) / 2.0).sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// First eval step reaching `threshold`; None marks never-reached (the
/// run is excluded from step medians and counted separately).
fn steps_to(summary: &RunSummary, threshold: f64) -> Option<f64> {
    summary
        .return_curve
        .iter()
        .find(|&&(_, r)| r >= threshold)
        .map(|&(s, _)| s as f64)
}

// --- criterion 09 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_09_sample_efficiency_direction() {
    let base = pendulum_base();
    assert!(
        base.elapsed_secs <= 1800.0,
        "criterion 09 FAIL: base experiment took {:.0} s (> 30 min)",
        base.elapsed_secs
    );

    // Threshold: the baseline peak rule. Runs that never reach it carry a
    // not-reached marker and stay out of the medians (counts reported).
    let threshold = mean(&base.ppo.iter().map(|s| s.best_return).collect::<Vec<_>>());
    let mut ppo_steps: Vec<f64> =
        base.ppo.iter().filter_map(|s| steps_to(s, threshold)).collect();
    let mut search_steps: Vec<f64> =
        base.search.iter().filter_map(|s| steps_to(s, threshold)).collect();
    let (reached_ppo, reached_search) = (ppo_steps.len(), search_steps.len());
    assert!(
        reached_ppo > 0 && reached_search > 0,
        "criterion 09 FAIL: no runs reach the baseline peak {threshold:.2} \
         ({reached_ppo}/10 baseline, {reached_search}/10 search)"
    );
    let median_ppo = median(&mut ppo_steps);
    let median_search = median(&mut search_steps);
    assert!(
        median_search <= median_ppo,
        "criterion 09 FAIL: search-PPO median steps {median_search} > PPO {median_ppo} \
         (threshold {threshold:.2}; reached {reached_search}/10 vs {reached_ppo}/10)"
    );

    let finals_ppo: Vec<f64> = base.ppo.iter().map(smoothed_final).collect();
    let finals_search: Vec<f64> = base.search.iter().map(smoothed_final).collect();
    let slack = 0.5 * pooled_std(&finals_ppo, &finals_search);
    assert!(
        mean(&finals_search) >= mean(&finals_ppo) - slack,
        "criterion 09 FAIL: search-PPO final {:.2} below PPO {:.2} - 0.5 pooled std {:.2}",
        mean(&finals_search),
        mean(&finals_ppo),
        slack
    );
    println!(
        "acceptance 09 (sample efficiency: median steps {:.0} vs {:.0} to peak {:.1}, \
         reached {}/10 vs {}/10; final {:.1} vs {:.1}, slack {:.1}): PASS in {:.0} s",
        median_search,
        median_ppo,
        threshold,
        reached_search,
        reached_ppo,
        mean(&finals_search),
        mean(&finals_ppo),
        slack,
        base.elapsed_secs
    );
}

// --- criterion 10 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_10_critic_fit_direction() {
    let base = point_mass_base();
    // Checkpoints at 25%, 50% and 100% of training (quarter marks 0, 1, 3).
    let mark_indices = [0usize, 1, 3];
    let mut wins = 0;
    let mut report = String::new();
    for &mark in &mark_indices {
        let mut per_method = Vec::new();
        for summaries in [&base.ppo, &base.search] {
            let mut values = Vec::new();
            for summary in summaries.iter() {
                let step = summary.checkpoint_steps[mark];
                let path = summary.output_dir.join(format!("checkpoint_{step}.agent"));
                let (agent, meta) = load_agent(&path).unwrap();
                let overrides = meta.env_overrides.clone();
                let name = meta.env_name.clone();
                let factory = move || pg_lab::envs::make_env(&name, &overrides);
                let mut rng = stream_rng(summary.seed, "acceptance-10");
                let value = critic_mse_vs_return(
                    &agent.critics[0],
                    &agent,
                    &factory,
                    40,
                    0.99,
                    PolicyMode::Explore,
                    &mut rng,
                )
                .unwrap();
                values.push(value);
            }
            per_method.push(mean(&values));
        }
        let (ppo_mse, search_mse) = (per_method[0], per_method[1]);
        if search_mse <= ppo_mse {
            wins += 1;
        }
        report.push_str(&format!(" mark{}: {:.4} vs {:.4};", mark, search_mse, ppo_mse));
    }
    assert!(
        wins >= 2,
        "criterion 10 FAIL: search critic MSE lower in only {wins}/3 checkpoints ({report})"
    );
    println!(
        "acceptance 10 (critic fit: search <= baseline normalized MSE in {wins}/3 checkpoints;{report}): PASS"
    );
}

// --- criterion 11 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_11_win_pattern_shape() {
    let summaries = &pendulum_base().search;

    let mut small_dominant_seeds = 0;
    let mut early_shares = Vec::new();
    for summary in summaries {
        assert!(
            !summary.search_records.is_empty(),
            "criterion 11 FAIL: seed {} logged no searches",
            summary.seed
        );
        let tally = improvement_tally(&summary.search_records);
        let total_small = *tally.small_cumulative.last().unwrap();
        let total_large = *tally.large_cumulative.last().unwrap();
        if total_small > total_large {
            small_dominant_seeds += 1;
        }
        // Share of the seed's large-scale wins that landed in the first
        // half of its searches.
        if total_large > 0 {
            let half = summary.search_records.len() / 2;
            let first_half_large = if half == 0 {
                0
            } else {
                tally.large_cumulative[half - 1]
            };
            early_shares.push(first_half_large as f64 / total_large as f64);
        }
    }
    assert!(
        small_dominant_seeds >= 8,
        "criterion 11 FAIL: cumulative small > large in only {small_dominant_seeds}/10 seeds"
    );
    assert!(
        !early_shares.is_empty() && mean(&early_shares) > 0.5,
        "criterion 11 FAIL: large-scale wins do not concentrate early \
         (mean first-half share {:.3})",
        mean(&early_shares)
    );
    println!(
        "acceptance 11 (win pattern: small > large in {small_dominant_seeds}/10 seeds, \
         large first-half share {:.2}): PASS",
        mean(&early_shares)
    );
}

// --- criterion 12 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_12_population_size_shape() {
    let base = point_mass_base();
    let run_population = |population: &str, dir: &str| -> Vec<RunSummary> {
        run_seeds(
            SEEDS
                .iter()
                .map(|&seed| {
                    RunConfig::from_map(&run_map(
                        "point-mass-2d",
                        PM_STEPS,
                        seed,
                        dir,
                        &search_extras(&[("search.population_size", population)]),
                    ))
                    .unwrap()
                })
                .collect(),
        )
    };
    let pop4 = run_population("4", "pm-pop4");
    let pop20 = run_population("20", "pm-pop20");
    // The base search runs are exactly population 10.
    let finals4: Vec<f64> = pop4.iter().map(smoothed_final).collect();
    let finals10: Vec<f64> = base.search.iter().map(smoothed_final).collect();
    let finals20: Vec<f64> = pop20.iter().map(smoothed_final).collect();

    assert!(
        mean(&finals10) >= mean(&finals4),
        "criterion 12 FAIL: population 10 mean final {:.3} below population 4 {:.3}",
        mean(&finals10),
        mean(&finals4)
    );
    let delta = (mean(&finals20) - mean(&finals10)).abs();
    let noise = 0.5 * pooled_std(&finals10, &finals20);
    assert!(
        delta < noise,
        "criterion 12 FAIL: population 20 vs 10 differs by {delta:.3} \
         (> 0.5 pooled std {noise:.3})"
    );
    println!(
        "acceptance 12 (population sizes: finals {:.2} <= {:.2}, |20 - 10| = {delta:.2} < {noise:.2}): PASS",
        mean(&finals4),
        mean(&finals10)
    );
}

// --- criterion 13 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_13_matched_compute_baseline() {
    let base = point_mass_base();
    let matched = run_seeds(
        SEEDS
            .iter()
            .map(|&seed| {
                RunConfig::from_map(&run_map(
                    "point-mass-2d",
                    PM_STEPS,
                    seed,
                    "pm-matched",
                    &[("ppo.extra_critic_steps", "10")],
                ))
                .unwrap()
            })
            .collect(),
    );
    let finals_matched: Vec<f64> = matched.iter().map(smoothed_final).collect();
    let finals_search: Vec<f64> = base.search.iter().map(smoothed_final).collect();
    let slack = 0.5 * pooled_std(&finals_matched, &finals_search);
    assert!(
        mean(&finals_matched) <= mean(&finals_search) + slack,
        "criterion 13 FAIL: matched-compute PPO {:.3} beats search-PPO {:.3} beyond slack {:.3}",
        mean(&finals_matched),
        mean(&finals_search),
        slack
    );
    println!(
        "acceptance 13 (matched compute: {:.2} <= {:.2} + {:.2}): PASS",
        mean(&finals_matched),
        mean(&finals_search),
        slack
    );
}

// --- criterion 14 -----------------------------------------------------------

#[test]
#[ignore = "nightly statistical experiment (runs for minutes)"]
fn acceptance_14_gradient_similarity_trend() {
    // Point-mass checkpoints: every run trains cleanly, so mid-training
    // policies still carry a measurable true gradient (pendulum's stuck
    // runs have none, leaving their cosines at the noise floor at every
    // sample count). Widely spaced sample counts and many estimates keep
    // the per-point noise well below the curve's dynamic range.
    let base = point_mass_base();
    let sizes = [16usize, 128, 2048];
    let size_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    let n_estimates = 100;

    // Mean cosine curves at the 25% checkpoint, where training is far from
    // converged and the true gradient is largest relative to the estimator
    // noise (late checkpoints of a near-converged policy have almost no
    // gradient signal and the cosines sit at the noise floor).
    let curves = |summaries: &[RunSummary], label: &str| -> Vec<(f64, Vec<f64>)> {
        summaries
            .iter()
            .map(|summary| {
                let step = summary.checkpoint_steps[0];
                let path = summary.output_dir.join(format!("checkpoint_{step}.agent"));
                let (agent, meta) = load_agent(&path).unwrap();
                let overrides = meta.env_overrides.clone();
                let name = meta.env_name.clone();
                let factory = move || pg_lab::envs::make_env(&name, &overrides);
                let mut rng = stream_rng(summary.seed, label);
                let curve = gradient_similarity_analysis(
                    &agent,
                    &factory,
                    &sizes,
                    n_estimates,
                    step,
                    &mut rng,
                )
                .unwrap();
                let rho =
                    spearman_rank_correlation(&size_f, &curve.mean_pairwise_cosine).unwrap();
                (rho, curve.mean_pairwise_cosine)
            })
            .collect()
    };
    let ppo_curves = curves(&base.ppo, "acceptance-14-ppo");
    let search_curves = curves(&base.search, "acceptance-14-search");

    let rising_ppo = ppo_curves.iter().filter(|(rho, _)| *rho > 0.0).count();
    let rising_search = search_curves.iter().filter(|(rho, _)| *rho > 0.0).count();
    assert!(
        rising_ppo >= 8 && rising_search >= 8,
        "criterion 14 FAIL: positive Spearman in {rising_ppo}/10 (PPO) and \
         {rising_search}/10 (search) seeds"
    );

    // Training regime: the largest grid point (2048 = samples per update).
    let last = sizes.len() - 1;
    let search_higher = ppo_curves
        .iter()
        .zip(&search_curves)
        .filter(|((_, p), (_, s))| s[last] >= p[last])
        .count();
    assert!(
        search_higher >= 6,
        "criterion 14 FAIL: search-PPO cosine at k=2048 higher in only {search_higher}/10 seeds"
    );
    println!(
        "acceptance 14 (similarity trend: rising in {rising_ppo}/10 and {rising_search}/10; \
         search >= baseline at k=2048 in {search_higher}/10): PASS"
    );
}
