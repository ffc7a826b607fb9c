//! Pipeline stages and the subcommands built from them.
//!
//! Per-user stages (candidate construction, history counting, scoring) fan out over a
//! rayon pool sized by `workers`; results are collected in user order, so the worker
//! count never changes an output byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fairkg_core::candidates::{build_user_candidates, pool_history, user_history, CandidateConfig};
use fairkg_core::dataset::Dataset;
use fairkg_core::distribution::{PatternCounts, DEFAULT_SMOOTHING};
use fairkg_core::embed::{train_embeddings, EmbeddingTable};
use fairkg_core::graph::{EntityId, KnowledgeGraph};
use fairkg_core::metrics::{f1_at_k, group_split, ndcg_at_k, Group};
use fairkg_core::path::{pattern_of, DEFAULT_MAX_LEN};
use fairkg_core::report::{evaluate as evaluate_lists, FairnessReport, ReportConfig, ReportInput};
use fairkg_core::rerank::{
    fairness_contributions, ranked_lists, rerank as rerank_pool, score_candidates, CandidateSet,
    Evaluation, RerankOutcome, ScoredCandidates,
};
use fairkg_core::synth::generate_synthetic;
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::candidate_file::{format_candidates, load_candidates};
use crate::config::RunConfig;
use crate::error::{FairkgError, Result};
use crate::io::{
    format_embeddings, format_test, format_triples, load_dataset, load_embeddings, load_graph_file,
    read_text, sha256_file, Outputs,
};
use crate::output::*;

pub const TRIPLES_FILE: &str = "triples.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const STATS_FILE: &str = "stats.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.tsv";
pub const CANDIDATES_FILE: &str = "candidates.jsonl";

/// Input files of the subcommands; anything not given explicitly is read from the
/// output directory, where the previous stage wrote it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Inputs {
    pub triples: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub rerank: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Inputs {
    fn pick(given: &Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| dir.join(name))
    }

    pub fn triples(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.triples, dir, TRIPLES_FILE)
    }

    pub fn test(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.test, dir, TEST_FILE)
    }

    pub fn embeddings(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.embeddings, dir, EMBEDDINGS_FILE)
    }

    pub fn candidates(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.candidates, dir, CANDIDATES_FILE)
    }

    pub fn rerank(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.rerank, dir, RERANK_FILE)
    }

    pub fn report(&self, dir: &Path) -> PathBuf {
        Self::pick(&self.report, dir, REPORT_JSON)
    }
}

pub fn thread_pool(workers: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| FairkgError::Config(format!("cannot start {workers} workers: {e}")))
}

/// Top-N candidates with their best paths for every user, in user order.
pub fn build_candidate_sets(
    data: &Dataset,
    emb: &EmbeddingTable,
    cfg: &CandidateConfig,
    pool: &ThreadPool,
) -> Result<Vec<CandidateSet>> {
    let users: Vec<EntityId> = data.graph().users().collect();
    let sets = pool.install(|| {
        users
            .par_iter()
            .map(|&u| build_user_candidates(data, emb, u, cfg))
            .collect::<fairkg_core::Result<Vec<_>>>()
    })?;
    Ok(sets)
}

/// Scores `sets` against each user's training-path pattern distribution.
pub fn score_sets(
    g: &KnowledgeGraph,
    sets: &[CandidateSet],
    pool: &ThreadPool,
) -> Result<Vec<ScoredCandidates>> {
    let scored = pool.install(|| -> fairkg_core::Result<Vec<ScoredCandidates>> {
        let histories = sets
            .par_iter()
            .map(|s| user_history(g, s.user, DEFAULT_MAX_LEN).map(|(counts, _)| counts))
            .collect::<fairkg_core::Result<Vec<PatternCounts>>>()?;
        let history = pool_history(&histories, sets, DEFAULT_SMOOTHING)?;
        sets.par_iter()
            .zip(&history.distributions)
            .map(|(s, d)| score_candidates(s, d))
            .collect()
    })?;
    Ok(scored)
}

/// Active / inactive membership of `users`, split over all users of `data`.
pub fn user_groups(data: &Dataset, users: &[EntityId], ratio: f64) -> Result<Vec<Group>> {
    let split = group_split(data.purchase_counts(), ratio)?;
    users
        .iter()
        .map(|u| {
            split.group_of(u).ok_or_else(|| {
                FairkgError::Core(fairkg_core::Error::UnknownEntity(
                    data.graph().entity_name(*u).into(),
                ))
            })
        })
        .collect()
}

/// Everything produced by scoring and re-ranking one candidate pool.
#[derive(Debug, Clone)]
pub struct RerankRun {
    pub scored: Vec<ScoredCandidates>,
    pub groups: Vec<Group>,
    pub outcome: RerankOutcome,
}

pub fn rerank_sets(
    cfg: &RunConfig,
    data: &Dataset,
    sets: &[CandidateSet],
    pool: &ThreadPool,
    trace: bool,
) -> Result<RerankRun> {
    let scored = score_sets(data.graph(), sets, pool)?;
    let users: Vec<EntityId> = scored.iter().map(|s| s.user).collect();
    let groups = user_groups(data, &users, cfg.group_ratio)?;
    let outcome = rerank_pool(&scored, &groups, &cfg.fairness(), trace)?;
    Ok(RerankRun {
        scored,
        groups,
        outcome,
    })
}

const GENERATE_KEYS: &[&str] = &["users", "items", "skew", "max_purchases", "seed"];
const RERANK_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "k",
    "group_ratio",
    "constraint_mode",
    "epsilon",
    "lambda",
    "gamma",
    "seed",
    "max_iterations",
    "max_kicks",
];
const SWEEP_KEYS: &[&str] = &[
    "sweep_alpha",
    "sweep_beta",
    "k",
    "group_ratio",
    "constraint_mode",
    "epsilon",
    "lambda",
    "gamma",
    "seed",
    "max_iterations",
    "max_kicks",
];

/// The settings in `keys`, as embedded in a stage's outputs.
fn echo(cfg: &RunConfig, keys: &[&str]) -> serde_json::Value {
    let full = serde_json::to_value(cfg).expect("config serializes");
    keys.iter()
        .map(|k| (k.to_string(), full[*k].clone()))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn finite_bound(e: f64) -> Option<f64> {
    e.is_finite().then_some(e)
}

fn report_config(cfg: &RunConfig, alpha: f64, beta: f64, run: &RerankOutcome) -> ReportConfig {
    ReportConfig {
        alpha,
        beta,
        k: cfg.k,
        mode: cfg.constraint_mode,
        epsilon: run.epsilon.map(finite_bound),
        lambda: run.lambda,
        gamma: run.gamma,
        group_ratio: cfg.group_ratio,
        seed: cfg.seed,
    }
}

fn summary(eval: &Evaluation, epsilon: &[f64; 2]) -> SelectionSummary {
    SelectionSummary {
        objective: eval.objective,
        values: eval.values,
        feasible: eval.is_feasible(epsilon),
    }
}

/// The `rerank.json` record of a run.
pub fn rerank_file(
    cfg: &RunConfig,
    g: &KnowledgeGraph,
    run: &RerankRun,
    inputs: InputHashes,
) -> RerankFile {
    let out = &run.outcome;
    let names = |l: &[EntityId]| l.iter().map(|e| g.entity_name(*e).to_string()).collect();
    let (base, fair) = (&out.baseline_eval, &out.solve.evaluation);
    let users = run
        .scored
        .iter()
        .enumerate()
        .map(|(i, s)| UserLists {
            user: g.entity_name(s.user).into(),
            group: run.groups[i],
            baseline: names(&out.baseline_lists[i]),
            fair: names(&out.fair_lists[i]),
            baseline_quality: base.quality[i],
            fair_quality: fair.quality[i],
            baseline_sid: base.diversity[i],
            fair_sid: fair.diversity[i],
        })
        .collect();
    RerankFile {
        schema: ARTIFACT_SCHEMA,
        config: echo(cfg, RERANK_KEYS),
        inputs,
        resolved: report_config(cfg, cfg.alpha, cfg.beta, out),
        constraints: cfg.constraint_mode.constraint_names().map(String::from),
        baseline: summary(base, &out.epsilon),
        fair: SelectionSummary {
            feasible: out.solve.feasible,
            ..summary(fair, &out.epsilon)
        },
        iterations: out.solve.iterations,
        kicks: out.solve.kicks,
        users,
    }
}

/// Pattern usage over the recommended items, then each fair list with the best path of
/// every item.
pub fn explanations(g: &KnowledgeGraph, sets: &[CandidateSet], run: &RerankRun) -> String {
    let out = &run.outcome;
    let by_item: Vec<BTreeMap<EntityId, &fairkg_core::rerank::Candidate>> = sets
        .iter()
        .map(|s| s.candidates.iter().map(|c| (c.item, c)).collect())
        .collect();
    let mut usage: BTreeMap<String, [usize; 2]> = BTreeMap::new();
    for (which, lists) in [&out.baseline_lists, &out.fair_lists]
        .into_iter()
        .enumerate()
    {
        for (i, list) in lists.iter().enumerate() {
            for item in list {
                for p in &by_item[i][item].paths {
                    usage.entry(pattern_of(&p.path).describe(g)).or_default()[which] += 1;
                }
            }
        }
    }
    let mut text = String::from("# explanation paths per pattern over all recommended items\n");
    let _ = writeln!(text, "{:>10} {:>10}  pattern", "baseline", "fair");
    let mut rows: Vec<_> = usage.into_iter().collect();
    rows.sort_by(|a, b| {
        b.1[1]
            .cmp(&a.1[1])
            .then(b.1[0].cmp(&a.1[0]))
            .then(a.0.cmp(&b.0))
    });
    for (pattern, [b, f]) in rows {
        let _ = writeln!(text, "{b:>10} {f:>10}  {pattern}");
    }
    for (i, list) in out.fair_lists.iter().enumerate() {
        let group = match run.groups[i] {
            Group::Active => "active",
            Group::Inactive => "inactive",
        };
        let _ = writeln!(text, "\n{} ({group})", g.entity_name(run.scored[i].user));
        for (rank, item) in list.iter().enumerate() {
            let c = by_item[i][item];
            let best = c
                .paths
                .iter()
                .max_by(|a, b| a.score.total_cmp(&b.score).then(b.path.cmp(&a.path)))
                .expect("candidates carry paths");
            let _ = writeln!(
                text,
                "{:>3}. {}  [{} paths]  {}",
                rank + 1,
                g.entity_name(*item),
                c.paths.len(),
                best.path.describe(g)
            );
        }
    }
    text
}

fn hash_inputs(files: &[(&str, &Path)]) -> Result<InputHashes> {
    files
        .iter()
        .map(|(name, p)| Ok((name.to_string(), sha256_file(p)?)))
        .collect()
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| FairkgError::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = generate_synthetic(&cfg.synth())?;
    let mut out = Outputs::new(&cfg.out)?;
    out.add(TRIPLES_FILE, format_triples(data.graph()).as_bytes())?;
    out.add(TEST_FILE, format_test(&data).as_bytes())?;
    out.add_json(
        STATS_FILE,
        &serde_json::json!({ "config": echo(cfg, GENERATE_KEYS), "stats": data.stats() }),
    )?;
    out.commit()
}

pub fn train(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let g = load_graph_file(&inputs.triples(&cfg.out))?;
    let emb = train_embeddings(&g, &cfg.train())?;
    let mut out = Outputs::new(&cfg.out)?;
    out.add(EMBEDDINGS_FILE, format_embeddings(&emb, &g)?.as_bytes())?;
    out.commit()
}

pub fn paths(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let data = load_dataset(&inputs.triples(&cfg.out), None)?;
    let emb = load_embeddings(&inputs.embeddings(&cfg.out), data.graph())?;
    let pool = thread_pool(cfg.workers)?;
    let sets = build_candidate_sets(&data, &emb, &cfg.candidates(), &pool)?;
    let mut out = Outputs::new(&cfg.out)?;
    out.add(
        CANDIDATES_FILE,
        format_candidates(&sets, data.graph())?.as_bytes(),
    )?;
    out.commit()
}

pub fn rerank(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let triples = inputs.triples(&cfg.out);
    let candidates = inputs.candidates(&cfg.out);
    let data = load_dataset(&triples, None)?;
    let sets = load_candidates(&candidates, data.graph())?;
    let pool = thread_pool(cfg.workers)?;
    let run = rerank_sets(cfg, &data, &sets, &pool, true)?;
    let hashes = hash_inputs(&[("triples", &triples), ("candidates", &candidates)])?;
    let file = rerank_file(cfg, data.graph(), &run, hashes);

    let mut out = Outputs::new(&cfg.out)?;
    out.add_json(RERANK_FILE, &file)?;
    out.add(TRACE_FILE, trace_csv(&run.outcome.solve.trace).as_bytes())?;
    out.add(
        EXPLANATIONS_FILE,
        explanations(data.graph(), &sets, &run).as_bytes(),
    )?;
    out.commit()
}

fn ids(g: &KnowledgeGraph, names: &[String]) -> Result<Vec<EntityId>> {
    Ok(names
        .iter()
        .map(|n| g.require_entity(n))
        .collect::<fairkg_core::Result<_>>()?)
}

pub fn evaluate(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let rerank_path = inputs.rerank(&cfg.out);
    if !rerank_path.exists() {
        return Err(FairkgError::MissingRerank { path: rerank_path });
    }
    let rr: RerankFile = read_json(&rerank_path)?;
    let triples = inputs.triples(&cfg.out);
    let test = inputs.test(&cfg.out);
    let mut hashes = rr.inputs.clone();
    let triples_hash = sha256_file(&triples)?;
    if hashes.get("triples") != Some(&triples_hash) {
        return Err(FairkgError::Config(format!(
            "{} is not the triple file the re-ranking was computed on",
            triples.display()
        )));
    }
    hashes.extend(hash_inputs(&[("test", &test), ("rerank", &rerank_path)])?);
    let data = load_dataset(&triples, Some(&test))?;
    let g = data.graph();

    let k = rr.resolved.k;
    let groups: Vec<Group> = rr.users.iter().map(|u| u.group).collect();
    let mut held_out = Vec::with_capacity(rr.users.len());
    let mut base_lists = Vec::with_capacity(rr.users.len());
    let mut fair_lists = Vec::with_capacity(rr.users.len());
    for u in &rr.users {
        held_out.push(data.test_items(g.require_entity(&u.user)?));
        base_lists.push(ids(g, &u.baseline)?);
        fair_lists.push(ids(g, &u.fair)?);
    }
    let report = |label: &str, lists: &[Vec<EntityId>], s: &SelectionSummary, fair: bool| {
        let pick = |b: f64, f: f64| if fair { f } else { b };
        let quality: Vec<f64> = rr
            .users
            .iter()
            .map(|u| pick(u.baseline_quality, u.fair_quality))
            .collect();
        let sid: Vec<f64> = rr
            .users
            .iter()
            .map(|u| pick(u.baseline_sid, u.fair_sid))
            .collect();
        evaluate_lists(
            label,
            ReportInput {
                lists,
                groups: &groups,
                test: &held_out,
                proxy_quality: &quality,
                diversity: &sid,
                objective: s.objective,
                feasible: s.feasible,
            },
            rr.resolved.clone(),
        )
    };
    let baseline = report("baseline", &base_lists, &rr.baseline, false)?;
    let fair = report("fair", &fair_lists, &rr.fair, true)?;
    let users = rr
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| UserMetrics {
            user: u.user.clone(),
            group: u.group,
            baseline_ndcg: ndcg_at_k(&base_lists[i], &held_out[i], k),
            fair_ndcg: ndcg_at_k(&fair_lists[i], &held_out[i], k),
            baseline_f1: f1_at_k(&base_lists[i], &held_out[i], k),
            fair_f1: f1_at_k(&fair_lists[i], &held_out[i], k),
            baseline_sid: u.baseline_sid,
            fair_sid: u.fair_sid,
        })
        .collect();
    let file = ReportFile {
        schema: ARTIFACT_SCHEMA,
        config: rr.config.clone(),
        inputs: hashes,
        baseline,
        fair,
        users,
    };
    let mut out = Outputs::new(&cfg.out)?;
    out.add_json(REPORT_JSON, &file)?;
    out.add(REPORT_CSV, report_csv(&file).as_bytes())?;
    out.commit()
}

/// Reports for every `(α, β)` of the sweep lists from a single constrained selection.
///
/// The selection depends on neither α nor β, so it is solved once with the first α;
/// each α then re-derives λ, γ and the fairness contributions, and each β re-orders.
pub fn sweep_reports(
    cfg: &RunConfig,
    data: &Dataset,
    run: &RerankRun,
) -> Result<(FairnessReport, Vec<SweepRow>)> {
    let out = &run.outcome;
    let held_out: Vec<BTreeSet<EntityId>> =
        run.scored.iter().map(|s| data.test_items(s.user)).collect();
    let eval = |label: &str, lists: &[Vec<EntityId>], e: &Evaluation, feasible: bool, rc| {
        evaluate_lists(
            label,
            ReportInput {
                lists,
                groups: &run.groups,
                test: &held_out,
                proxy_quality: &e.quality,
                diversity: &e.diversity,
                objective: e.objective,
                feasible,
            },
            rc,
        )
    };
    let baseline = eval(
        "baseline",
        &out.baseline_lists,
        &out.baseline_eval,
        out.baseline_eval.is_feasible(&out.epsilon),
        report_config(cfg, cfg.alpha, 0.0, out),
    )?;
    let mut rows = Vec::new();
    for alpha in cfg.sweep_alphas() {
        let (lambda, contributions, gamma) =
            fairness_contributions(&run.scored, alpha, cfg.lambda, cfg.gamma)?;
        for beta in cfg.sweep_betas() {
            let lists = ranked_lists(
                &run.scored,
                &out.solve.selection,
                &contributions,
                beta,
                gamma,
            );
            let rc = ReportConfig {
                lambda,
                gamma,
                ..report_config(cfg, alpha, beta, out)
            };
            let label = format!("alpha={alpha} beta={beta}");
            let report = eval(
                &label,
                &lists,
                &out.solve.evaluation,
                out.solve.feasible,
                rc,
            )?;
            rows.push(SweepRow {
                alpha,
                beta,
                report,
            });
        }
    }
    Ok((baseline, rows))
}

pub fn sweep(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let triples = inputs.triples(&cfg.out);
    let test = inputs.test(&cfg.out);
    let candidates = inputs.candidates(&cfg.out);
    let data = load_dataset(&triples, Some(&test))?;
    let sets = load_candidates(&candidates, data.graph())?;
    let pool = thread_pool(cfg.workers)?;
    let run = rerank_sets(cfg, &data, &sets, &pool, false)?;
    let (baseline, rows) = sweep_reports(cfg, &data, &run)?;
    let resolved = RunConfig {
        sweep_alpha: Some(cfg.sweep_alphas()),
        sweep_beta: Some(cfg.sweep_betas()),
        ..cfg.clone()
    };
    let file = SweepFile {
        schema: ARTIFACT_SCHEMA,
        config: echo(&resolved, SWEEP_KEYS),
        inputs: hash_inputs(&[
            ("triples", &triples),
            ("test", &test),
            ("candidates", &candidates),
        ])?,
        baseline,
        rows,
    };
    let mut out = Outputs::new(&cfg.out)?;
    out.add_json(SWEEP_JSON, &file)?;
    out.add(SWEEP_CSV, sweep_csv(&file).as_bytes())?;
    out.commit()
}

pub fn report(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<PathBuf>> {
    let path = inputs.report(&cfg.out);
    if !path.exists() {
        return Err(FairkgError::Config(format!(
            "{} not found; run `fairkg evaluate` first",
            path.display()
        )));
    }
    let file: ReportFile = read_json(&path)?;
    let mut out = Outputs::new(&cfg.out)?;
    out.add(TABLE_FILE, table_text(&file).as_bytes())?;
    out.add(SID_CSV, sid_distribution_csv(&file).as_bytes())?;
    out.add(GINI_CSV, gini_curve_csv(&file).as_bytes())?;
    out.commit()
}
