//! Subcommand implementations and report plumbing.
//!
//! Every command prints one pretty JSON report to stdout with the shape
//! `{schema_version, command, seed, config, input_hash, result}`. Reports
//! carry no timestamps or absolute paths, so a rerun with the same inputs
//! and seed produces byte-identical output. The `simulate` command prints
//! its CSV table instead when no output file is given.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::Serialize;
use serde_json::{json, Value};

use negraph_core::data_io::{
    bundle_content_hash, combine_digests, file_sha256, load_bundle, load_checkpoint,
    load_embeddings, load_interactions, save_bundle, save_checkpoint, save_embeddings,
    save_interactions, Bundle, DataIoError, EdgeCheckpoint, EmbeddingKind,
};
use negraph_core::edge_model::{
    evaluate_edge_classifier, observed_edge_samples, train_edge_classifier, EdgeModelError,
    EdgeTrainConfig,
};
use negraph_core::graph::{ratio_stats, Graph, GraphError, LabelVector, NodeSplits};
use negraph_core::matrix::{FeatureMatrix, MatrixError};
use negraph_core::node_clf::{
    compare_origin_vs_ne, evaluate_sgc, train_sgc, ClassReport, NodeClfError, SgcConfig,
};
use negraph_core::propagate::{parameter_free_embedding, PropagateError};
use negraph_core::reco::{
    aggregate_embeddings, rank_and_evaluate, AggregateConfig, BipartiteGraph, RecoError,
    RecoPolicy,
};
use negraph_core::refine::{
    enhance, make_noisy_oracle, CandidateOrder, PairScorer, RefineConfig, RefineError,
};
use negraph_core::rng::substream;
use negraph_core::synth::{
    degrade_graph, generate_bipartite, generate_labeled_graph, DegradeConfig,
    SynthBipartiteConfig, SynthError, SynthGraphConfig,
};

use crate::{
    Command, ConvertCitationArgs, DegradeArgs, EmbeddingArg, PolicyArg, RecoArgs, RefineArgs,
    SimulateArgs, StatsArgs, SynthArgs, SynthKind, TrainClfArgs, TrainEdgeArgs,
};

/// Failures split by exit code: bad inputs versus diverging numerics.
#[derive(Debug)]
pub enum CliError {
    Data(String),
    Numeric(String),
}

impl From<DataIoError> for CliError {
    fn from(err: DataIoError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(err: GraphError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<PropagateError> for CliError {
    fn from(err: PropagateError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<RecoError> for CliError {
    fn from(err: RecoError) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<MatrixError> for CliError {
    fn from(err: MatrixError) -> Self {
        match err {
            MatrixError::NonFinite { .. } => CliError::Numeric(err.to_string()),
            MatrixError::DimensionMismatch { .. } => CliError::Data(err.to_string()),
        }
    }
}

impl From<EdgeModelError> for CliError {
    fn from(err: EdgeModelError) -> Self {
        match err {
            EdgeModelError::Diverged { .. } => CliError::Numeric(err.to_string()),
            EdgeModelError::Matrix(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<NodeClfError> for CliError {
    fn from(err: NodeClfError) -> Self {
        match err {
            NodeClfError::Diverged { .. } => CliError::Numeric(err.to_string()),
            NodeClfError::Matrix(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<RefineError> for CliError {
    fn from(err: RefineError) -> Self {
        match err {
            RefineError::NonFiniteScore { .. } => CliError::Numeric(err.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(err: SynthError) -> Self {
        match err {
            SynthError::Matrix(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Stats(args) => run_stats(args),
        Command::TrainEdge(args) => run_train_edge(args),
        Command::Refine(args) => run_refine(args),
        Command::TrainClf(args) => run_train_clf(args),
        Command::Degrade(args) => run_degrade(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Reco(args) => run_reco(args),
        Command::Synth(args) => run_synth(args),
        Command::ConvertCitation(args) => run_convert_citation(args),
    }
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    config: Value,
    input_hash: String,
    result: Value,
}

fn emit(command: &'static str, seed: u64, config: Value, input_hash: String, result: Value) {
    let report = Report {
        schema_version: 1,
        command,
        seed,
        config,
        input_hash,
        result,
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report is serializable")
    );
}

fn to_value<T: Serialize>(value: T) -> Value {
    serde_json::to_value(value).expect("report value is serializable")
}

/// Last path component, so reports never leak absolute paths.
fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| ".".to_string())
}

fn embedding_for(bundle: &Bundle, kind: EmbeddingKind) -> Result<FeatureMatrix, CliError> {
    Ok(match kind {
        EmbeddingKind::A2x => parameter_free_embedding(&bundle.graph, &bundle.features)?,
        EmbeddingKind::Raw => bundle.features.clone(),
    })
}

/// Global neighbor-quality counts, or null when some edge endpoint has no
/// known label to count against.
fn ratio_summary(g: &Graph, y: &LabelVector) -> Result<Value, CliError> {
    match ratio_stats(g, y) {
        Ok(stats) => Ok(json!({
            "positive": stats.global_positive,
            "negative": stats.global_negative,
            "ratio": stats.global_ratio,
        })),
        Err(GraphError::UnlabeledNode { .. }) => Ok(Value::Null),
        Err(err) => Err(err.into()),
    }
}

fn run_stats(args: StatsArgs) -> Result<(), CliError> {
    let input_hash = bundle_content_hash(&args.bundle)?;
    let bundle = load_bundle(&args.bundle)?;
    let g = &bundle.graph;
    let n = g.num_nodes();
    let undirected = g.undirected_non_self_edges().count();
    let ratios = match ratio_stats(g, &bundle.labels) {
        Ok(stats) => {
            let mean_node_ratio = stats.per_node_ratio.iter().sum::<f64>() / n as f64;
            json!({
                "positive": stats.global_positive,
                "negative": stats.global_negative,
                "ratio": stats.global_ratio,
                "mean_node_ratio": mean_node_ratio,
            })
        }
        Err(GraphError::UnlabeledNode { .. }) => Value::Null,
        Err(err) => return Err(err.into()),
    };
    let known = bundle.labels.known_mask().iter().filter(|&&k| k).count();
    let result = json!({
        "num_nodes": n,
        "num_classes": bundle.labels.num_classes(),
        "known_labels": known,
        "undirected_edges": undirected,
        "self_loops": g.self_loop_nodes().len(),
        "mean_degree": 2.0 * undirected as f64 / n as f64,
        "neighbor_quality": ratios,
    });
    emit("stats", 0, json!({}), input_hash, result);
    Ok(())
}

fn run_train_edge(args: TrainEdgeArgs) -> Result<(), CliError> {
    let input_hash = bundle_content_hash(&args.bundle)?;
    let bundle = load_bundle(&args.bundle)?;
    let kind = match args.embedding {
        EmbeddingArg::A2x => EmbeddingKind::A2x,
        EmbeddingArg::Raw => EmbeddingKind::Raw,
    };
    let embeddings = embedding_for(&bundle, kind)?;
    let y_train = bundle.labels.restricted_to(&bundle.splits.train)?;
    let cfg = EdgeTrainConfig {
        proj_dim: args.proj_dim,
        hidden: args.hidden.clone(),
        epochs: args.epochs,
        batch_size: args.batch_size,
        lr: args.lr,
        momentum: args.momentum,
        include_observed_negatives: !args.exclude_observed_negatives,
        balance_tol: 0.0,
        seed: args.seed,
    };
    let trained = train_edge_classifier(&embeddings, &bundle.graph, &y_train, &cfg)?;

    let y_val = bundle.labels.restricted_to(&bundle.splits.val)?;
    let val_samples = observed_edge_samples(&bundle.graph, &y_val);
    let val = if val_samples.is_empty() {
        Value::Null
    } else {
        to_value(evaluate_edge_classifier(
            &trained.params,
            &val_samples,
            &embeddings,
            args.threshold,
        )?)
    };

    let final_loss = trained.epoch_losses.last().copied();
    let epochs_run = trained.epoch_losses.len();
    save_checkpoint(&args.out, &EdgeCheckpoint::new(kind, trained.params))?;

    let config = json!({
        "embedding": kind,
        "proj_dim": args.proj_dim,
        "hidden": args.hidden,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "momentum": args.momentum,
        "include_observed_negatives": !args.exclude_observed_negatives,
        "threshold": args.threshold,
    });
    let result = json!({
        "checkpoint": file_label(&args.out),
        "num_positive": trained.num_positive,
        "num_negative": trained.num_negative,
        "epochs_run": epochs_run,
        "final_loss": final_loss,
        "val": val,
    });
    emit("train-edge", args.seed, config, input_hash, result);
    Ok(())
}

fn parse_rates(text: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Data(format!(
            "oracle rates must be \"p,q\", got {text:?}"
        )));
    }
    let parse = |part: &str| -> Result<f64, CliError> {
        part.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Data(format!("bad oracle rate {part:?}")))
    };
    Ok((parse(parts[0])?, parse(parts[1])?))
}

fn run_refine(args: RefineArgs) -> Result<(), CliError> {
    let bundle_hash = bundle_content_hash(&args.bundle)?;
    let bundle = load_bundle(&args.bundle)?;
    let cfg = RefineConfig {
        do_filter: !args.add_only,
        do_add: !args.filter_only,
        n_max: args.n_max,
        threshold: args.threshold,
        candidate_order: CandidateOrder::default(),
    };

    let (scorer, embeddings, scorer_echo, input_hash): (Box<dyn PairScorer>, _, _, _) =
        if let Some(ck_path) = &args.checkpoint {
            let ck_hash = file_sha256(ck_path)?;
            let checkpoint = load_checkpoint(ck_path)?;
            let embeddings = embedding_for(&bundle, checkpoint.embedding)?;
            let echo = json!({
                "checkpoint": file_label(ck_path),
                "embedding": checkpoint.embedding,
            });
            let hash = combine_digests(&[
                ("bundle".to_string(), bundle_hash),
                ("checkpoint".to_string(), ck_hash),
            ]);
            (Box::new(checkpoint.params), embeddings, echo, hash)
        } else {
            let spec = args.oracle.as_deref().unwrap_or_default();
            let (p, q) = parse_rates(spec)?;
            let oracle = make_noisy_oracle(&bundle.labels, p, q, args.seed)?;
            let echo = json!({"oracle": {"p": p, "q": q}});
            (Box::new(oracle), bundle.features.clone(), echo, bundle_hash)
        };

    let enhanced = enhance(&bundle.graph, scorer.as_ref(), &embeddings, &cfg)?;
    let before: BTreeSet<(usize, usize)> = bundle.graph.undirected_non_self_edges().collect();
    let after: BTreeSet<(usize, usize)> = enhanced.undirected_non_self_edges().collect();
    let removed = before.difference(&after).count();
    let added = after.difference(&before).count();
    save_bundle(
        &args.out,
        &enhanced,
        &bundle.features,
        &bundle.labels,
        &bundle.splits,
    )?;

    let config = json!({
        "do_filter": cfg.do_filter,
        "do_add": cfg.do_add,
        "n_max": cfg.n_max,
        "threshold": cfg.threshold,
        "scorer": scorer_echo,
    });
    let result = json!({
        "output": file_label(&args.out),
        "undirected_edges_before": before.len(),
        "undirected_edges_after": after.len(),
        "edges_removed": removed,
        "edges_added": added,
        "before": ratio_summary(&bundle.graph, &bundle.labels)?,
        "after": ratio_summary(&enhanced, &bundle.labels)?,
    });
    emit("refine", args.seed, config, input_hash, result);
    Ok(())
}

#[derive(Serialize)]
struct ArmReport<'a> {
    graph_id: &'a str,
    seed: u64,
    #[serde(rename = "K")]
    k: usize,
    accuracy: f64,
    per_class: &'a [Option<f64>],
    epochs_run: usize,
}

fn arm_report<'a>(graph_id: &'a str, seed: u64, k: usize, report: &'a ClassReport) -> ArmReport<'a> {
    ArmReport {
        graph_id,
        seed,
        k,
        accuracy: report.accuracy,
        per_class: &report.per_class_accuracy,
        epochs_run: report.epochs_run,
    }
}

fn run_train_clf(args: TrainClfArgs) -> Result<(), CliError> {
    let bundle_hash = bundle_content_hash(&args.bundle)?;
    let bundle = load_bundle(&args.bundle)?;
    let cfg = SgcConfig {
        k: args.k,
        lr: args.lr,
        weight_decay: args.weight_decay,
        max_epochs: args.max_epochs,
        patience: args.patience,
        normalize_features: !args.no_normalize,
        seed: args.seed,
    };
    let config = json!({
        "k": cfg.k,
        "lr": cfg.lr,
        "weight_decay": cfg.weight_decay,
        "max_epochs": cfg.max_epochs,
        "patience": cfg.patience,
        "normalize_features": cfg.normalize_features,
    });

    match &args.enhanced {
        None => {
            let run = train_sgc(
                &bundle.graph,
                &bundle.features,
                &bundle.labels,
                &bundle.splits.train,
                &bundle.splits.val,
                &cfg,
            )?;
            let report = evaluate_sgc(
                &run.model,
                &bundle.graph,
                &bundle.features,
                &bundle.labels,
                &bundle.splits.test,
                run.epochs_run,
            )?;
            let result = to_value(arm_report(&bundle_hash, args.seed, args.k, &report));
            emit("train-clf", args.seed, config, bundle_hash, result);
        }
        Some(second_path) => {
            let second_hash = bundle_content_hash(second_path)?;
            let second = load_bundle(second_path)?;
            let comparison = compare_origin_vs_ne(
                &bundle.graph,
                &second.graph,
                &bundle.features,
                &bundle.labels,
                &bundle.splits,
                &cfg,
            )?;
            let result = json!({
                "origin": arm_report(&bundle_hash, args.seed, args.k, &comparison.origin),
                "enhanced": arm_report(&second_hash, args.seed, args.k, &comparison.enhanced),
                "delta": comparison.delta,
            });
            let input_hash = combine_digests(&[
                ("bundle".to_string(), bundle_hash),
                ("enhanced".to_string(), second_hash),
            ]);
            emit("train-clf", args.seed, config, input_hash, result);
        }
    }
    Ok(())
}

fn run_degrade(args: DegradeArgs) -> Result<(), CliError> {
    let input_hash = bundle_content_hash(&args.bundle)?;
    let bundle = load_bundle(&args.bundle)?;
    let degraded = degrade_graph(
        &bundle.graph,
        &bundle.labels,
        &DegradeConfig {
            per_node: args.per_node,
            seed: args.seed,
        },
    )?;
    let before = ratio_stats(&bundle.graph, &bundle.labels)?;
    let after = ratio_stats(&degraded, &bundle.labels)?;
    save_bundle(
        &args.out,
        &degraded,
        &bundle.features,
        &bundle.labels,
        &bundle.splits,
    )?;
    let config = json!({"per_node": args.per_node});
    let result = json!({
        "output": file_label(&args.out),
        "added_undirected_edges": (after.global_negative - before.global_negative) / 2,
        "before": {
            "positive": before.global_positive,
            "negative": before.global_negative,
            "ratio": before.global_ratio,
        },
        "after": {
            "positive": after.global_positive,
            "negative": after.global_negative,
            "ratio": after.global_ratio,
        },
    });
    emit("degrade", args.seed, config, input_hash, result);
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    if args.seeds == 0 {
        return Err(CliError::Data("need at least one seed per cell".to_string()));
    }
    if args.p_grid.is_empty() || args.q_grid.is_empty() {
        return Err(CliError::Data("rate grids must be non-empty".to_string()));
    }

    let mut csv = String::from("p,q,p_pre,R,origin_acc,ne_acc\n");
    for &p in &args.p_grid {
        for &q in &args.q_grid {
            let mut p_pre_vals: Vec<f64> = Vec::new();
            let mut r_sum = 0.0;
            let mut origin_sum = 0.0;
            let mut ne_sum = 0.0;
            for i in 0..args.seeds {
                let seed = args.seed.wrapping_add(i);
                let data = generate_labeled_graph(&SynthGraphConfig {
                    num_nodes: args.num_nodes,
                    num_classes: args.num_classes,
                    mean_degree: args.mean_degree,
                    target_ratio: args.target_ratio,
                    feature_dim: args.feature_dim,
                    class_separation: args.class_separation,
                    seed,
                })?;
                let oracle = make_noisy_oracle(&data.labels, p, q, seed)?;
                let refine_cfg = RefineConfig {
                    do_filter: true,
                    do_add: true,
                    n_max: args.n_max,
                    threshold: 0.5,
                    candidate_order: CandidateOrder::default(),
                };
                let enhanced = enhance(&data.graph, &oracle, &data.features, &refine_cfg)?;

                let before: BTreeSet<(usize, usize)> =
                    data.graph.undirected_non_self_edges().collect();
                let mut added_total = 0usize;
                let mut added_same = 0usize;
                for (u, v) in enhanced.undirected_non_self_edges() {
                    if !before.contains(&(u, v)) {
                        added_total += 1;
                        if data.labels.label_of(u) == data.labels.label_of(v) {
                            added_same += 1;
                        }
                    }
                }
                if added_total > 0 {
                    p_pre_vals.push(added_same as f64 / added_total as f64);
                }

                r_sum += ratio_stats(&enhanced, &data.labels)?.global_ratio;
                let clf_cfg = SgcConfig {
                    k: 2,
                    lr: args.lr,
                    weight_decay: 5e-6,
                    max_epochs: args.max_epochs,
                    patience: 30,
                    normalize_features: true,
                    seed,
                };
                let comparison = compare_origin_vs_ne(
                    &data.graph,
                    &enhanced,
                    &data.features,
                    &data.labels,
                    &data.splits,
                    &clf_cfg,
                )?;
                origin_sum += comparison.origin.accuracy;
                ne_sum += comparison.enhanced.accuracy;
            }
            let trials = args.seeds as f64;
            let p_pre = if p_pre_vals.is_empty() {
                "NA".to_string()
            } else {
                let mean = p_pre_vals.iter().sum::<f64>() / p_pre_vals.len() as f64;
                format!("{mean}")
            };
            csv.push_str(&format!(
                "{p},{q},{p_pre},{},{},{}\n",
                r_sum / trials,
                origin_sum / trials,
                ne_sum / trials,
            ));
        }
    }

    match &args.out {
        Some(path) => {
            fs::write(path, &csv)?;
            let config = json!({
                "p_grid": args.p_grid,
                "q_grid": args.q_grid,
                "seeds": args.seeds,
                "num_nodes": args.num_nodes,
                "num_classes": args.num_classes,
                "mean_degree": args.mean_degree,
                "target_ratio": args.target_ratio,
                "feature_dim": args.feature_dim,
                "class_separation": args.class_separation,
                "n_max": args.n_max,
                "max_epochs": args.max_epochs,
                "lr": args.lr,
            });
            let result = json!({
                "output": file_label(path),
                "rows": args.p_grid.len() * args.q_grid.len(),
                "seeds_per_cell": args.seeds,
            });
            emit("simulate", args.seed, config, combine_digests(&[]), result);
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn run_reco(args: RecoArgs) -> Result<(), CliError> {
    let (embeddings, meta) = load_embeddings(&args.embeddings)?;
    let bin_path = args
        .embeddings
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
        .join(&meta.file);
    let input_hash = combine_digests(&[
        ("train".to_string(), file_sha256(&args.train)?),
        ("test".to_string(), file_sha256(&args.test)?),
        ("embeddings-meta".to_string(), file_sha256(&args.embeddings)?),
        ("embeddings".to_string(), file_sha256(&bin_path)?),
    ]);

    let train_rows = load_interactions(&args.train)?;
    let train = BipartiteGraph::build(&train_rows, meta.num_users, meta.num_items)?;
    let test_rows = load_interactions(&args.test)?;
    let test: Vec<(usize, usize)> = test_rows.iter().map(|&(u, item, _)| (u, item)).collect();

    let policy = match args.policy {
        PolicyArg::RandomWalk => RecoPolicy::RandomWalk,
        PolicyArg::Intuitive => RecoPolicy::Intuitive,
        PolicyArg::Negcn => RecoPolicy::Negcn,
    };
    let agg_cfg = AggregateConfig {
        policy,
        k_neighbors: args.k_neighbors,
        alpha: args.alpha,
        walks: args.walks,
        walk_length: args.walk_length,
        seed: args.seed,
    };
    let blended = aggregate_embeddings(&train, &embeddings, &agg_cfg)?;
    let report = rank_and_evaluate(&train, &test, &blended, args.k)?;

    let config = json!({
        "policy": policy,
        "k": args.k,
        "alpha": args.alpha,
        "k_neighbors": args.k_neighbors,
        "walks": args.walks,
        "walk_length": args.walk_length,
    });
    emit("reco", args.seed, config, input_hash, to_value(report));
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<(), CliError> {
    match args.kind {
        SynthKind::Graph => {
            let data = generate_labeled_graph(&SynthGraphConfig {
                num_nodes: args.num_nodes,
                num_classes: args.num_classes,
                mean_degree: args.mean_degree,
                target_ratio: args.target_ratio,
                feature_dim: args.feature_dim,
                class_separation: args.class_separation,
                seed: args.seed,
            })?;
            save_bundle(&args.out, &data.graph, &data.features, &data.labels, &data.splits)?;
            let stats = ratio_stats(&data.graph, &data.labels)?;
            let config = json!({
                "kind": "graph",
                "num_nodes": args.num_nodes,
                "num_classes": args.num_classes,
                "mean_degree": args.mean_degree,
                "target_ratio": args.target_ratio,
                "feature_dim": args.feature_dim,
                "class_separation": args.class_separation,
            });
            let result = json!({
                "output": file_label(&args.out),
                "num_nodes": data.graph.num_nodes(),
                "undirected_edges": data.graph.undirected_non_self_edges().count(),
                "positive_ratio": stats.global_ratio,
                "train_size": data.splits.train.len(),
                "val_size": data.splits.val.len(),
                "test_size": data.splits.test.len(),
            });
            emit("synth", args.seed, config, combine_digests(&[]), result);
        }
        SynthKind::Bipartite => {
            let data = generate_bipartite(&SynthBipartiteConfig {
                num_users: args.num_users,
                num_items: args.num_items,
                num_groups: args.num_groups,
                noise: args.noise,
                embedding_noise: args.embedding_noise,
                seed: args.seed,
            })?;
            fs::create_dir_all(&args.out)?;
            let mut train_rows = Vec::new();
            for user in 0..data.train.num_users() {
                let (items, weights) = data.train.user_items(user);
                for (slot, &item) in items.iter().enumerate() {
                    train_rows.push((user, item, weights[slot]));
                }
            }
            save_interactions(&args.out.join("train.tsv"), &train_rows)?;
            let test_rows: Vec<(usize, usize, f64)> =
                data.test.iter().map(|&(u, item)| (u, item, 1.0)).collect();
            save_interactions(&args.out.join("test.tsv"), &test_rows)?;
            save_embeddings(
                &args.out.join("embeddings.json"),
                &data.embeddings,
                args.num_users,
                args.num_items,
            )?;
            let config = json!({
                "kind": "bipartite",
                "num_users": args.num_users,
                "num_items": args.num_items,
                "num_groups": args.num_groups,
                "noise": args.noise,
                "embedding_noise": args.embedding_noise,
            });
            let result = json!({
                "output": file_label(&args.out),
                "train_interactions": train_rows.len(),
                "test_interactions": test_rows.len(),
                "embedding_dim": data.embeddings.cols(),
            });
            emit("synth", args.seed, config, combine_digests(&[]), result);
        }
    }
    Ok(())
}

fn malformed(file: &Path, line: usize, message: String) -> CliError {
    CliError::Data(format!("{}:{line}: {message}", file_label(file)))
}

fn run_convert_citation(args: ConvertCitationArgs) -> Result<(), CliError> {
    let input_hash = combine_digests(&[
        ("content".to_string(), file_sha256(&args.content)?),
        ("cites".to_string(), file_sha256(&args.cites)?),
    ]);

    let content = fs::read_to_string(&args.content)?;
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut node_class: Vec<String> = Vec::new();
    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(malformed(
                &args.content,
                line_no,
                "expected id, feature values, and class".to_string(),
            ));
        }
        let id = fields[0];
        if id_index.contains_key(id) {
            return Err(malformed(&args.content, line_no, format!("duplicate id {id:?}")));
        }
        let mut features = Vec::with_capacity(fields.len() - 2);
        for field in &fields[1..fields.len() - 1] {
            let value: f64 = field.trim().parse().map_err(|_| {
                malformed(&args.content, line_no, format!("bad feature value {field:?}"))
            })?;
            features.push(value);
        }
        if let Some(first) = rows.first() {
            if features.len() != first.len() {
                return Err(malformed(
                    &args.content,
                    line_no,
                    format!("expected {} feature values, got {}", first.len(), features.len()),
                ));
            }
        }
        id_index.insert(id.to_string(), rows.len());
        rows.push(features);
        node_class.push(fields[fields.len() - 1].to_string());
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no records",
            file_label(&args.content)
        )));
    }
    let num_nodes = rows.len();
    let classes: Vec<String> = node_class
        .iter()
        .cloned()
        .collect::<BTreeSet<String>>()
        .into_iter()
        .collect();
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, name)| (name.as_str(), i))
        .collect();
    let label_ids: Vec<usize> = node_class.iter().map(|name| class_index[name.as_str()]).collect();

    let cites = fs::read_to_string(&args.cites)?;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (idx, raw) in cites.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(malformed(&args.cites, line_no, "expected exactly two ids".to_string()));
        }
        let a = *id_index.get(fields[0]).ok_or_else(|| {
            malformed(&args.cites, line_no, format!("unknown id {:?}", fields[0]))
        })?;
        let b = *id_index.get(fields[1]).ok_or_else(|| {
            malformed(&args.cites, line_no, format!("unknown id {:?}", fields[1]))
        })?;
        if a != b {
            edges.push((a, b));
        }
    }

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (node, &class) in label_ids.iter().enumerate() {
        per_class[class].push(node);
    }

    let graph = Graph::build(&edges, num_nodes, true, false)?;
    let features = FeatureMatrix::from_rows(&rows)?;
    let labels = LabelVector::new(label_ids, classes.len(), None)?;

    let mut rng = substream(args.seed, &[0x6369_7465]);
    let mut train = Vec::new();
    for (class, members) in per_class.iter_mut().enumerate() {
        if members.len() < args.train_per_class {
            return Err(CliError::Data(format!(
                "class {:?} has {} nodes, need {} for the train split",
                classes[class],
                members.len(),
                args.train_per_class
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..args.train_per_class]);
    }
    let in_train: HashSet<usize> = train.iter().copied().collect();
    let mut rest: Vec<usize> = (0..num_nodes).filter(|v| !in_train.contains(v)).collect();
    rest.shuffle(&mut rng);
    if rest.len() < args.val_count + args.test_count {
        return Err(CliError::Data(format!(
            "need {} nodes outside the train split, have {}",
            args.val_count + args.test_count,
            rest.len()
        )));
    }
    let mut splits = NodeSplits {
        train,
        val: rest[..args.val_count].to_vec(),
        test: rest[args.val_count..args.val_count + args.test_count].to_vec(),
    };
    splits.train.sort_unstable();
    splits.val.sort_unstable();
    splits.test.sort_unstable();

    save_bundle(&args.out, &graph, &features, &labels, &splits)?;
    let config = json!({
        "train_per_class": args.train_per_class,
        "val_count": args.val_count,
        "test_count": args.test_count,
    });
    let result = json!({
        "output": file_label(&args.out),
        "num_nodes": num_nodes,
        "num_classes": classes.len(),
        "feature_dim": features.cols(),
        "undirected_edges": graph.undirected_non_self_edges().count(),
        "train_size": splits.train.len(),
        "val_size": splits.val.len(),
        "test_size": splits.test.len(),
    });
    emit("convert-citation", args.seed, config, input_hash, result);
    Ok(())
}
