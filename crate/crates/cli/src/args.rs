use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "spacewalk", version, about = "Heterogeneous network embedding with spacey random walks")]
#[command(args_override_self = true)]
pub struct Cli {
    /// key=value file whose entries act as flags; explicit flags win.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; printed when chosen automatically.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Single-threaded training so repeated runs are bit-identical.
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true", default_value = "false")]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a walk corpus.
    Walk {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        guide: GuideArgs,
        #[command(flatten)]
        walk: WalkArgs,
        /// Corpus output, one walk per line; stats go to `<out>.stats`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train node vectors on an existing corpus.
    Train {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        output: VectorOut,
    },
    /// Walk and train in one run.
    Embed {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        guide: GuideArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        output: VectorOut,
        /// Also write the corpus here.
        #[arg(long)]
        corpus_out: Option<PathBuf>,
    },
    /// Node classification with repeated random splits.
    EvalClassify {
        #[command(flatten)]
        vectors: VectorIn,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        classify: ClassifyArgs,
        /// Per-run table output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Link prediction: hide edges of one relation, embed the rest, score.
    EvalLp {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        guide: GuideArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        /// Relation to hide, e.g. `A-P`.
        #[arg(long)]
        relation: String,
        #[arg(long, default_value_t = 0.5)]
        hide: f64,
        /// Positive pairs to sample from the hidden edges.
        #[arg(long, default_value_t = 1000)]
        sample: usize,
    },
    /// Compare long walks with the dense stationary solutions.
    VerifyStationary {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        metapath: String,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        /// Largest accepted L1 distance.
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Divergence between consecutive step distributions.
    Trace {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        guide: GuideArgs,
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        walks: usize,
        #[arg(long, default_value_t = 80)]
        max_step: usize,
        #[arg(long, value_enum, default_value_t = TraceKindArg::Step)]
        kind: TraceKindArg,
    },
    /// Classification scores across values of one walk parameter.
    Sweep {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        guide: GuideArgs,
        #[command(flatten)]
        walk: WalkArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long)]
        labels: PathBuf,
        #[command(flatten)]
        classify: ClassifyArgs,
        /// walk_times, walk_length or alpha.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
    },
    /// Write random graphs over a schema.
    Synth {
        /// `dblp`, or `custom` together with --types, --pairs, --proportions.
        #[arg(long, default_value = "dblp")]
        schema: String,
        #[arg(long)]
        types: Option<String>,
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long)]
        proportions: Option<String>,
        /// Comma-separated node counts.
        #[arg(long, default_value = "1000,10000,100000,1000000")]
        sizes: String,
        #[arg(long, default_value_t = 10.0)]
        avg_degree: f64,
        /// Planted communities; 0 disables them.
        #[arg(long, default_value_t = 0)]
        communities: usize,
        #[arg(long, default_value_t = 0.8)]
        p_in: f64,
        /// Type whose nodes get a community label file.
        #[arg(long)]
        label_type: Option<String>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long, default_value = "synth")]
        prefix: String,
    },
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Node file, `id<TAB>type` per line.
    #[arg(long)]
    pub nodes: PathBuf,
    /// Edge file, `src<TAB>dst` per line.
    #[arg(long)]
    pub edges: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Markovian,
    Metapath,
    Metagraph,
    Metaschema,
}

#[derive(Args, Debug, Clone)]
pub struct GuideArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Metapath)]
    pub mode: ModeArg,
    /// Meta-path such as `A-P-V-P-A`; meta-graphs list several, comma-separated.
    #[arg(long)]
    pub metapath: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Walk,
    Global,
}

#[derive(Args, Debug, Clone)]
pub struct WalkArgs {
    /// Walks per start node.
    #[arg(short = 't', long, default_value_t = 20)]
    pub walk_times: usize,
    /// Steps per walk.
    #[arg(short = 'l', long, default_value_t = 320)]
    pub walk_length: usize,
    #[arg(long, default_value_t = 0.8)]
    pub alpha: f64,
    /// Whether walks keep their own occupation history or share one.
    #[arg(long, value_enum, default_value_t = ScopeArg::Walk)]
    pub occupation: ScopeArg,
    #[arg(long, default_value_t = 1)]
    pub min_walk_nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WindowArg {
    Radius,
    Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NegScopeArg {
    PerType,
    Global,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    #[arg(long, value_enum, default_value_t = WindowArg::Radius)]
    pub window_mode: WindowArg,
    /// Negative samples per pair.
    #[arg(long, default_value_t = 5)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0.025)]
    pub lr: f64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, value_enum, default_value_t = NegScopeArg::PerType)]
    pub negative_scope: NegScopeArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

#[derive(Args, Debug, Clone)]
pub struct VectorOut {
    /// Vector output; the binary format adds `<out>.idx`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Args, Debug, Clone)]
pub struct VectorIn {
    #[arg(long)]
    pub vectors: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
}

#[derive(Args, Debug, Clone)]
pub struct ClassifyArgs {
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.5)]
    pub train_fraction: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TraceKindArg {
    Step,
    Occupation,
}
