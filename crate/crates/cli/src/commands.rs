use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use spacewalk::eval::{
    classification_protocol, link_prediction, lp_split, parameter_sweep, read_labels, stationarity_trace,
    ClassifyConfig, LogRegConfig, SweepAxis, TraceConfig, TraceKind,
};
use spacewalk::oracle::{build_hypermatrix, verify_stationary};
use spacewalk::pipeline::embed;
use spacewalk::skipgram::{
    read_binary, read_text, train_with_stats, write_binary, write_text, NegativeScope, NodeVectors, TrainConfig,
    WindowMode,
};
use spacewalk::synth::{dblp_schema, generate, PlantedCommunities, SynthConfig};
use spacewalk::walk::{read_corpus, write_corpus, write_stats, OccupationScope};
use spacewalk::{
    derive_schema, generate_corpus, load_graph, parse_metagraph, parse_metapath, Guidance, MetaSchema, TypeId,
    TypedGraph, WalkConfig, WalkMode,
};

use crate::args::*;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub deterministic: bool,
}

pub fn run(cmd: Command, ctx: &Ctx) -> Result<()> {
    match cmd {
        Command::Walk { graph, guide, walk, out } => cmd_walk(&graph, &guide, &walk, &out, ctx),
        Command::Train { graph, corpus, train, output } => cmd_train(&graph, &corpus, &train, &output, ctx),
        Command::Embed {
            graph,
            guide,
            walk,
            train,
            output,
            corpus_out,
        } => cmd_embed(&graph, &guide, &walk, &train, &output, corpus_out.as_deref(), ctx),
        Command::EvalClassify {
            vectors,
            labels,
            classify,
            out,
        } => cmd_eval_classify(&vectors, &labels, &classify, out.as_deref(), ctx),
        Command::EvalLp {
            graph,
            guide,
            walk,
            train,
            relation,
            hide,
            sample,
        } => cmd_eval_lp(&graph, &guide, &walk, &train, &relation, hide, sample, ctx),
        Command::VerifyStationary {
            graph,
            metapath,
            steps,
            alpha,
            tol,
        } => cmd_verify_stationary(&graph, &metapath, steps, alpha, tol, ctx),
        Command::Trace {
            graph,
            guide,
            alpha,
            walks,
            max_step,
            kind,
        } => cmd_trace(&graph, &guide, alpha, walks, max_step, kind, ctx),
        Command::Sweep {
            graph,
            guide,
            walk,
            train,
            labels,
            classify,
            axis,
            values,
        } => cmd_sweep(&graph, &guide, &walk, &train, &labels, &classify, &axis, &values, ctx),
        Command::Synth {
            schema,
            types,
            pairs,
            proportions,
            sizes,
            avg_degree,
            communities,
            p_in,
            label_type,
            out_dir,
            prefix,
        } => {
            let spec = SchemaSpec {
                name: schema,
                types,
                pairs,
                proportions,
            };
            cmd_synth(&spec, &sizes, avg_degree, communities, p_in, label_type.as_deref(), &out_dir, &prefix, ctx)
        }
    }
}

fn load(g: &GraphArgs) -> Result<TypedGraph> {
    let t = Instant::now();
    let graph = load_graph(&g.nodes, &g.edges)?;
    log::info!(
        "phase=load secs={:.6} nodes={} edges={} types={}",
        t.elapsed().as_secs_f64(),
        graph.node_count(),
        graph.edge_count(),
        graph.type_count()
    );
    Ok(graph)
}

fn guidance(g: &TypedGraph, args: &GuideArgs) -> Result<(Guidance, WalkMode)> {
    let schema = derive_schema(g);
    let need = || {
        args.metapath
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("--mode {:?} needs --metapath", args.mode).to_lowercase()))
    };
    Ok(match args.mode {
        ModeArg::Metaschema => (Guidance::MetaSchema(schema), WalkMode::Spacey),
        ModeArg::Metagraph => {
            let specs: Vec<&str> = need()?.split(',').map(str::trim).collect();
            (Guidance::MetaGraph(parse_metagraph(&specs, &schema)?), WalkMode::Spacey)
        }
        ModeArg::Metapath | ModeArg::Markovian => {
            let spec = need()?;
            if spec.contains(',') {
                return Err(CliError::Usage("several meta-paths given; use --mode metagraph".into()));
            }
            let mp = parse_metapath(spec, &schema)?;
            let mode = if args.mode == ModeArg::Markovian {
                WalkMode::Markovian
            } else {
                WalkMode::Spacey
            };
            (Guidance::metapath(mp, g.type_count())?, mode)
        }
    })
}

fn walk_config(w: &WalkArgs, mode: WalkMode, ctx: &Ctx) -> WalkConfig {
    WalkConfig {
        walk_times: w.walk_times,
        walk_length: w.walk_length,
        alpha: w.alpha,
        mode,
        seed: ctx.seed,
        start_filter: None,
        min_walk_nodes: w.min_walk_nodes,
        occupation_scope: match w.occupation {
            ScopeArg::Walk => OccupationScope::Walk,
            ScopeArg::Global => OccupationScope::Global,
        },
    }
}

fn train_config(t: &TrainArgs, ctx: &Ctx) -> TrainConfig {
    TrainConfig {
        dim: t.dim,
        window: t.window,
        window_mode: match t.window_mode {
            WindowArg::Radius => WindowMode::Radius,
            WindowArg::Span => WindowMode::Span,
        },
        negatives: t.negatives,
        lr0: t.lr,
        epochs: t.epochs,
        seed: ctx.seed,
        deterministic: ctx.deterministic,
        negative_scope: match t.negative_scope {
            NegScopeArg::PerType => NegativeScope::PerType,
            NegScopeArg::Global => NegativeScope::Global,
        },
    }
}

fn classify_config(c: &ClassifyArgs, ctx: &Ctx) -> ClassifyConfig {
    ClassifyConfig {
        repeats: c.repeats,
        train_fraction: c.train_fraction,
        seed: ctx.seed,
        logreg: LogRegConfig::default(),
    }
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn write_vectors(out: &VectorOut, v: &NodeVectors) -> Result<()> {
    match out.format {
        FormatArg::Text => write_text(&out.out, v)?,
        FormatArg::Binary => write_binary(&out.out, &sidecar(&out.out, ".idx"), v)?,
    }
    log::info!("wrote {} vectors of dim {} to {}", v.len(), v.dim(), out.out.display());
    Ok(())
}

fn read_vectors(v: &VectorIn) -> Result<NodeVectors> {
    Ok(match v.format {
        FormatArg::Text => read_text(&v.vectors)?,
        FormatArg::Binary => read_binary(&v.vectors, &sidecar(&v.vectors, ".idx"))?,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| spacewalk::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn stdout(text: &str) {
    let mut out = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

fn cmd_walk(graph: &GraphArgs, guide: &GuideArgs, walk: &WalkArgs, out: &Path, ctx: &Ctx) -> Result<()> {
    let g = load(graph)?;
    let (guidance, mode) = guidance(&g, guide)?;
    let cfg = walk_config(walk, mode, ctx);
    let t = Instant::now();
    let corpus = generate_corpus(&g, &guidance, &cfg)?;
    log::info!(
        "phase=walk secs={:.6} nodes={} walks={} steps={} truncations={}",
        t.elapsed().as_secs_f64(),
        g.node_count(),
        corpus.stats.walks_emitted,
        corpus.stats.total_steps,
        corpus.stats.truncations
    );
    write_corpus(out, &g, &corpus.walks)?;
    write_stats(&sidecar(out, ".stats"), &corpus.stats)?;
    Ok(())
}

fn cmd_train(graph: &GraphArgs, corpus: &Path, train: &TrainArgs, out: &VectorOut, ctx: &Ctx) -> Result<()> {
    let g = load(graph)?;
    let walks = read_corpus(corpus, &g)?;
    let t = Instant::now();
    let (emb, stats) = train_with_stats(&walks, &g, &train_config(train, ctx))?;
    log::info!(
        "phase=train secs={:.6} nodes={} pairs={}",
        t.elapsed().as_secs_f64(),
        g.node_count(),
        stats.pairs
    );
    write_vectors(out, &emb.corpus_vectors(&g, &walks))
}

#[allow(clippy::too_many_arguments)]
fn cmd_embed(
    graph: &GraphArgs,
    guide: &GuideArgs,
    walk: &WalkArgs,
    train: &TrainArgs,
    out: &VectorOut,
    corpus_out: Option<&Path>,
    ctx: &Ctx,
) -> Result<()> {
    let g = load(graph)?;
    let (guidance, mode) = guidance(&g, guide)?;
    let e = embed(&g, &guidance, &walk_config(walk, mode, ctx), &train_config(train, ctx))?;
    if let Some(p) = corpus_out {
        write_corpus(p, &g, &e.corpus.walks)?;
        write_stats(&sidecar(p, ".stats"), &e.corpus.stats)?;
    }
    let s = e.corpus.stats;
    log::info!(
        "walks_emitted={} walks_dropped={} truncations={} total_steps={} pairs={} negatives_skipped={}",
        s.walks_emitted,
        s.walks_dropped,
        s.truncations,
        s.total_steps,
        e.train_stats.pairs,
        e.train_stats.negatives_skipped
    );
    write_vectors(out, &e.embedding.corpus_vectors(&g, &e.corpus.walks))
}

fn cmd_eval_classify(v: &VectorIn, labels: &Path, c: &ClassifyArgs, out: Option<&Path>, ctx: &Ctx) -> Result<()> {
    let vectors = read_vectors(v)?;
    let labels = read_labels(labels)?;
    let report = classification_protocol(&vectors, &labels, &classify_config(c, ctx))?;
    stdout(&report.key_values());
    if let Some(p) = out {
        write_file(p, &report.tsv())?;
    }
    Ok(())
}

fn relation(g: &TypedGraph, spec: &str) -> Result<(TypeId, TypeId)> {
    let ty = |name: &str| {
        g.type_id(name.trim())
            .ok_or_else(|| CliError::Core(spacewalk::Error::UnknownType(name.trim().to_string())))
    };
    match spec.split_once('-') {
        Some((a, b)) => Ok((ty(a)?, ty(b)?)),
        None => Err(CliError::Usage(format!("relation '{spec}' should look like A-P"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval_lp(
    graph: &GraphArgs,
    guide: &GuideArgs,
    walk: &WalkArgs,
    train: &TrainArgs,
    rel: &str,
    hide: f64,
    sample: usize,
    ctx: &Ctx,
) -> Result<()> {
    let g = load(graph)?;
    let split = lp_split(&g, relation(&g, rel)?, hide, sample, ctx.seed)?;
    if split.orphaned {
        log::warn!("every resampled hidden set left some node without edges");
    }
    let (guidance, mode) = guidance(&split.train_graph, guide)?;
    let e = embed(
        &split.train_graph,
        &guidance,
        &walk_config(walk, mode, ctx),
        &train_config(train, ctx),
    )?;
    let vectors = e.embedding.to_node_vectors(&split.train_graph);
    let report = link_prediction(&split, &g, &vectors, &LogRegConfig::default())?;
    stdout(&format!("{}{}", report.key_values(), report.tsv()));
    Ok(())
}

fn cmd_verify_stationary(graph: &GraphArgs, metapath: &str, steps: usize, alpha: f64, tol: f64, ctx: &Ctx) -> Result<()> {
    if tol.is_nan() || tol < 0.0 {
        return Err(CliError::Usage("--tol must be non-negative".into()));
    }
    let g = load(graph)?;
    let mp = parse_metapath(metapath, &derive_schema(&g))?;
    // fail on the size cap before spending time on walks
    build_hypermatrix(&g, &mp)?;
    let t = Instant::now();
    let r = verify_stationary(&g, &mp, steps, alpha, ctx.seed)?;
    log::info!("phase=verify secs={:.6} nodes={} steps={steps}", t.elapsed().as_secs_f64(), g.node_count());

    let mut s = String::new();
    let _ = writeln!(s, "fixed_point_residual={:.3e}", r.fixed_point.residual);
    let _ = writeln!(s, "fixed_point_iterations={}", r.fixed_point.iterations);
    let _ = writeln!(s, "l1_spacey_fixed_point={:.6}", r.l1_spacey_fixed_point);
    let _ = writeln!(s, "l1_markov_pair_chain={:.6}", r.l1_markov_pair_chain);
    let _ = writeln!(s, "l1_fixed_point_pair_chain={:.6}", r.l1_fixed_point_pair_chain);
    let _ = writeln!(s, "l1_spacey_markov={:.6}", r.l1_spacey_markov);
    let _ = writeln!(s, "node\ttype\tfixed_point\tpair_marginal\tspacey_empirical\tmarkov_empirical");
    for u in g.nodes() {
        let i = u.index();
        let _ = writeln!(
            s,
            "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            g.node_name(u),
            g.type_name(g.node_type(u)),
            r.fixed_point.distribution[i],
            r.pair_marginal[i],
            r.spacey_empirical[i],
            r.markov_empirical[i]
        );
    }
    stdout(&s);
    let worst = r.max_gated_distance();
    if worst > tol {
        return Err(CliError::Tolerance(format!("L1 distance {worst:.6} exceeds tolerance {tol}")));
    }
    Ok(())
}

fn cmd_trace(
    graph: &GraphArgs,
    guide: &GuideArgs,
    alpha: f64,
    walks: usize,
    max_step: usize,
    kind: TraceKindArg,
    ctx: &Ctx,
) -> Result<()> {
    let g = load(graph)?;
    let (guidance, mode) = guidance(&g, guide)?;
    let cfg = TraceConfig {
        n_walks: walks,
        max_step,
        mode,
        alpha,
        seed: ctx.seed,
        kind: match kind {
            TraceKindArg::Step => TraceKind::Step,
            TraceKindArg::Occupation => TraceKind::Occupation,
        },
    };
    let trace = stationarity_trace(&g, &guidance, &cfg)?;
    let mut s = String::from("step\tjs\n");
    for (i, v) in trace.iter().enumerate() {
        let _ = writeln!(s, "{}\t{v:.6e}", i + 1);
    }
    stdout(&s);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    graph: &GraphArgs,
    guide: &GuideArgs,
    walk: &WalkArgs,
    train: &TrainArgs,
    labels: &Path,
    classify: &ClassifyArgs,
    axis: &str,
    values: &str,
    ctx: &Ctx,
) -> Result<()> {
    let axis: SweepAxis = axis.parse()?;
    let values = parse_list::<f64>(values, "--values")?;
    let g = load(graph)?;
    let (guidance, mode) = guidance(&g, guide)?;
    let labels = read_labels(labels)?;
    let rows = parameter_sweep(
        &g,
        &guidance,
        &labels,
        axis,
        &values,
        &walk_config(walk, mode, ctx),
        &train_config(train, ctx),
        &classify_config(classify, ctx),
    )?;
    let mut s = format!("{}\n", spacewalk::eval::SweepRow::tsv_header());
    for r in rows {
        let _ = writeln!(s, "{}", r.tsv());
    }
    stdout(&s);
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{flag}: cannot parse '{}'", x.trim())))
        })
        .collect()
}

pub struct SchemaSpec {
    pub name: String,
    pub types: Option<String>,
    pub pairs: Option<String>,
    pub proportions: Option<String>,
}

fn schema_of(spec: &SchemaSpec) -> Result<(MetaSchema, Vec<f64>)> {
    match spec.name.as_str() {
        "dblp" => Ok(dblp_schema()),
        "custom" => {
            let (Some(types), Some(pairs)) = (&spec.types, &spec.pairs) else {
                return Err(CliError::Usage("--schema custom needs --types and --pairs".into()));
            };
            let names: Vec<&str> = types.split(',').map(str::trim).collect();
            let schema = MetaSchema::from_pairs(&names, pairs)?;
            let props = match &spec.proportions {
                Some(p) => parse_list::<f64>(p, "--proportions")?,
                None => vec![1.0 / names.len() as f64; names.len()],
            };
            Ok((schema, props))
        }
        other => Err(CliError::Usage(format!("unknown schema '{other}' (dblp or custom)"))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    spec: &SchemaSpec,
    sizes: &str,
    avg_degree: f64,
    communities: usize,
    p_in: f64,
    label_type: Option<&str>,
    out_dir: &Path,
    prefix: &str,
    ctx: &Ctx,
) -> Result<()> {
    let (schema, props) = schema_of(spec)?;
    for t in 0..schema.type_count() {
        let t = TypeId(t as u16);
        if schema.adjacent_types(t).is_empty() {
            log::warn!("type {} takes part in no relation; its nodes get no edges", schema.type_name(t));
        }
    }
    let label_ty = match label_type {
        Some(name) => schema
            .type_id(name)
            .ok_or_else(|| CliError::Core(spacewalk::Error::UnknownType(name.to_string())))?,
        None => TypeId(0),
    };
    for n in parse_list::<usize>(sizes, "--sizes")? {
        let t = Instant::now();
        let cfg = SynthConfig {
            n_nodes: n,
            avg_degree,
            seed: ctx.seed,
            communities: (communities > 0).then_some(PlantedCommunities { count: communities, p_in }),
        };
        let sg = generate(&schema, &props, &cfg)?;
        let g = &sg.graph;
        let base = out_dir.join(format!("{prefix}_{n}"));
        g.write(&sidecar(&base, "_nodes.tsv"), &sidecar(&base, "_edges.tsv"))?;
        if let Some(blocks) = &sg.communities {
            let mut s = String::new();
            for &u in g.nodes_of_type(label_ty) {
                let _ = writeln!(s, "{}\t{}", g.node_name(u), blocks[u.index()]);
            }
            write_file(&sidecar(&base, "_labels.tsv"), &s)?;
        }
        log::info!(
            "phase=synth secs={:.6} nodes={} edges={} avg_degree={:.3}",
            t.elapsed().as_secs_f64(),
            g.node_count(),
            g.edge_count(),
            2.0 * g.edge_count() as f64 / g.node_count().max(1) as f64
        );
    }
    Ok(())
}
