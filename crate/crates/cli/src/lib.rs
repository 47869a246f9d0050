//! `attn-atlas` command line: build dumps with the toy model, validate them,
//! run analytics to files and launch the HTTP service.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use atlas_core::analytics::{sankey_diagram, sort_heads, Direction, Metric, DEFAULT_SANKEY_PRUNE};
use atlas_core::generate::{attach_pos, generate_dump, parse_sentences};
use atlas_core::headlens::{build_head_profile, DEFAULT_K};
use atlas_core::piling::pile_layer;
use atlas_core::{
    export_dump, ingest_dump, io, validate_dump, AttnType, CorpusStore, DumpDocument, Error,
    ModelConfig, ScaleMode,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "attn-atlas",
    version,
    about = "Attention analytics for multi-head self-attention networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the toy model over a sentence file and write a dump.
    Gen(GenArgs),
    /// Check a dump and print its validation report.
    Validate { dump: PathBuf },
    /// Order the heads of one layer by entropy or positional offset.
    Sort(SortArgs),
    /// Group the heads of one layer into piles.
    Pile(PileArgs),
    /// Profile one head across the corpus.
    Headlens(HeadLensArgs),
    /// Layer-to-layer flow edges of one sentence.
    Sankey(SankeyArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
    /// Merge dumps and write them back out as one document.
    Export {
        #[arg(required = true)]
        dumps: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScaleArg {
    SqrtDModel,
    SqrtDk,
}

impl From<ScaleArg> for ScaleMode {
    fn from(s: ScaleArg) -> Self {
        match s {
            ScaleArg::SqrtDModel => ScaleMode::SqrtDModel,
            ScaleArg::SqrtDk => ScaleMode::SqrtDK,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub sentences: PathBuf,
    /// POS tags laid out like the sentence file.
    #[arg(long)]
    pub pos: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub d_model: usize,
    /// Defaults to 4 * d_model.
    #[arg(long)]
    pub d_ff: Option<usize>,
    #[arg(long, value_enum, default_value = "sqrt-d-model")]
    pub scale_mode: ScaleArg,
    /// Leave query/key vectors out of the dump.
    #[arg(long)]
    pub no_vectors: bool,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("indices are 1-based".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug, Args)]
pub struct LayerSelect {
    pub dump: PathBuf,
    #[arg(long)]
    pub sentence: String,
    #[arg(long, value_parser = positive)]
    pub layer: usize,
    #[arg(long = "type", default_value = "encoder_self")]
    pub attn_type: AttnType,
}

#[derive(Debug, Args)]
pub struct SortArgs {
    #[command(flatten)]
    pub select: LayerSelect,
    #[arg(long, default_value = "entropy")]
    pub metric: Metric,
    #[arg(long, default_value = "asc")]
    pub direction: Direction,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PileArgs {
    #[command(flatten)]
    pub select: LayerSelect,
    #[arg(long)]
    pub threshold: f64,
    /// Where to write the piles with their aggregated matrices.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HeadLensArgs {
    pub dump: PathBuf,
    #[arg(long, value_parser = positive)]
    pub layer: usize,
    #[arg(long, value_parser = positive)]
    pub head: usize,
    #[arg(long = "type", default_value = "encoder_self")]
    pub attn_type: AttnType,
    #[arg(long, default_value_t = DEFAULT_K, value_parser = positive)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SankeyArgs {
    pub dump: PathBuf,
    #[arg(long)]
    pub sentence: String,
    #[arg(long = "type", default_value = "encoder_self")]
    pub attn_type: AttnType,
    #[arg(long, default_value_t = DEFAULT_SANKEY_PRUNE)]
    pub prune: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = atlas_service::PORT_ENV, default_value_t = atlas_service::DEFAULT_PORT)]
    pub port: u16,
    /// Dump to load at startup; repeatable.
    #[arg(long = "dump")]
    pub dumps: Vec<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(&e);
            1
        }
    }
}

fn report_error(e: &Error) {
    eprintln!("error: {e}");
    if let Error::Validation(report) = e {
        if let Ok(json) = serde_json::to_string_pretty(report) {
            eprintln!("{json}");
        }
    }
}

fn execute(command: Command) -> Result<i32, Error> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Validate { dump } => validate(&dump),
        Command::Sort(a) => sort(a),
        Command::Pile(a) => pile(a),
        Command::Headlens(a) => headlens(a),
        Command::Sankey(a) => sankey(a),
        Command::Serve(a) => serve(a),
        Command::Export { dumps, out } => export(&dumps, &out),
    }
}

fn load(path: &Path) -> Result<CorpusStore, Error> {
    let doc: DumpDocument = io::read_document(path)?;
    ingest_dump(&doc)
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => io::write_document(path, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<i32, Error> {
    eprintln!("seed: {}", a.seed);
    let mut config = ModelConfig::new(a.layers, a.heads, a.d_model)?
        .with_seed(a.seed)
        .with_scale_mode(a.scale_mode.into());
    if let Some(d_ff) = a.d_ff {
        config.d_ff = d_ff;
        config.validate()?;
    }
    let mut sentences = parse_sentences(&fs::read_to_string(&a.sentences)?)?;
    if let Some(pos) = &a.pos {
        attach_pos(&mut sentences, &fs::read_to_string(pos)?)?;
    }
    let doc = generate_dump(&config, &sentences, !a.no_vectors)?;
    io::write_document(&a.out, &doc)?;
    eprintln!(
        "wrote {} sentences to {}",
        doc.sentences.len(),
        a.out.display()
    );
    Ok(0)
}

fn validate(path: &Path) -> Result<i32, Error> {
    let doc: DumpDocument = io::read_document(path)?;
    let report = validate_dump(&doc);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.is_ok() { 0 } else { 1 })
}

fn sort(a: SortArgs) -> Result<i32, Error> {
    let s = &a.select;
    let store = load(&s.dump)?;
    let heads = store.sentence(&s.sentence)?.layer(s.attn_type, s.layer)?;
    let order = sort_heads(heads, a.metric, a.direction)?;
    if a.json {
        emit(&order, None)?;
    } else {
        println!(
            "{} {} layer {} by {} ({:?})",
            s.sentence, s.attn_type, s.layer, a.metric, a.direction
        );
        for h in &order {
            println!("head {:>3}  {:.6}", h.head, h.value);
        }
    }
    Ok(0)
}

fn pile(a: PileArgs) -> Result<i32, Error> {
    let s = &a.select;
    let store = load(&s.dump)?;
    let heads = store.sentence(&s.sentence)?.layer(s.attn_type, s.layer)?;
    let piles = pile_layer(heads, a.threshold)?;
    for (i, p) in piles.piles.iter().enumerate() {
        let members: Vec<String> = p.members.iter().map(usize::to_string).collect();
        println!(
            "pile {}: heads {} (intra {:.6})",
            i + 1,
            members.join(","),
            p.intra_distance
        );
    }
    if let Some(out) = &a.out {
        io::write_document(out, &piles)?;
    }
    Ok(0)
}

fn headlens(a: HeadLensArgs) -> Result<i32, Error> {
    eprintln!("seed: {}", a.seed);
    let store = load(&a.dump)?;
    let profile = build_head_profile(&store, a.attn_type, a.layer, a.head, a.k, a.seed)?;
    emit(&profile, a.out.as_deref())?;
    Ok(0)
}

fn sankey(a: SankeyArgs) -> Result<i32, Error> {
    let store = load(&a.dump)?;
    let diagram = sankey_diagram(store.sentence(&a.sentence)?, a.attn_type, a.prune)?;
    emit(&diagram, a.out.as_deref())?;
    Ok(0)
}

fn serve(a: ServeArgs) -> Result<i32, Error> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let config = atlas_service::ServeConfig {
        host: a.host,
        port: a.port,
        dumps: a.dumps,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    match runtime.block_on(atlas_service::serve(config)) {
        Ok(()) => Ok(0),
        Err(atlas_service::ServeError::Load { path, source }) => {
            eprintln!("refusing to start: {}", path.display());
            Err(source)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Ok(1)
        }
    }
}

fn export(dumps: &[PathBuf], out: &Path) -> Result<i32, Error> {
    let mut store = load(&dumps[0])?;
    for path in &dumps[1..] {
        store = store.merge(&load(path)?)?;
    }
    io::write_document(out, &export_dump(&store))?;
    eprintln!("wrote {} sentences to {}", store.len(), out.display());
    Ok(0)
}
