use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mage_rnn::autodiff::{grad_check, ParamStore, Tensor};
use mage_rnn::babi::{
    build_example_graph, examples_from_stories, extract_coref, generate_stories, mix_stories, read_stories_file,
    write_stories, EntityLexicon, Story, SynthConfig,
};
use mage_rnn::cell::{encode_bidirectional, EncodeOptions, StateLayout};
use mage_rnn::graph::{decompose, write_records, Edge, EdgeType, EdgeTypeRegistry, GraphRecord, SequenceOrder};
use mage_rnn::reader::{answer_classify, attention, write_probe_table, CandidateSet};
use mage_rnn::train::{
    evaluate, load_model, multi_seed, Dataset, ResultRecord, Split, StorySplits, TrainConfig, CHECKPOINT_FILE,
    RESULT_FILE,
};
use mage_rnn::{Error, Result};

#[derive(Parser)]
#[command(name = "mage", version, about = "Typed-edge DAG recurrent readers for bAbi")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one or more seeds and keep the best by validation error.
    Train(TrainArgs),
    /// Evaluate a saved run on a split.
    Eval(EvalArgs),
    /// Write bAbi-Mix files built from pairs of stories.
    MixGen(MixArgs),
    /// Write the annotated graph of every example as JSON lines.
    GraphDump(DumpArgs),
    /// Compare analytic and finite-difference gradients.
    GradCheck(GradArgs),
}

/// Config flags; each overrides the same key from `--config`.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// key=value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    d_emb: Option<String>,
    #[arg(long)]
    seq_dim: Option<String>,
    #[arg(long)]
    coref_dim: Option<String>,
    #[arg(long)]
    layers: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    clip: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    valid_fraction: Option<String>,
    #[arg(long)]
    link_question: Option<String>,
    #[arg(long)]
    permute: Option<String>,
    #[arg(long)]
    m_max: Option<String>,
    #[arg(long)]
    interpolate_with_memory: Option<String>,
    #[arg(long)]
    fast_path: Option<String>,
    /// bAbi training file.
    #[arg(long)]
    train_file: Option<String>,
    #[arg(long)]
    test_file: Option<String>,
    /// Task number when it cannot be read from the file name.
    #[arg(long)]
    task: Option<String>,
    /// Generate stories for this task instead of reading files.
    #[arg(long)]
    synth_task: Option<String>,
    #[arg(long)]
    data_seed: Option<String>,
    #[arg(long)]
    stories: Option<String>,
    #[arg(long)]
    statements_min: Option<String>,
    #[arg(long)]
    statements_max: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Some(enc) = &self.encoder {
            cfg = TrainConfig::for_encoder(enc.parse()?);
        }
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags = [
            ("encoder", &self.encoder),
            ("head", &self.head),
            ("d-emb", &self.d_emb),
            ("seq-dim", &self.seq_dim),
            ("coref-dim", &self.coref_dim),
            ("layers", &self.layers),
            ("lr", &self.lr),
            ("clip", &self.clip),
            ("epochs", &self.epochs),
            ("patience", &self.patience),
            ("batch-size", &self.batch_size),
            ("seed", &self.seed),
            ("valid-fraction", &self.valid_fraction),
            ("link-question", &self.link_question),
            ("permute", &self.permute),
            ("m-max", &self.m_max),
            ("interpolate-with-memory", &self.interpolate_with_memory),
            ("fast-path", &self.fast_path),
            ("train-file", &self.train_file),
            ("test-file", &self.test_file),
            ("task", &self.task),
            ("synth-task", &self.synth_task),
            ("data-seed", &self.data_seed),
            ("stories", &self.stories),
            ("statements-min", &self.statements_min),
            ("statements-max", &self.statements_max),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Number of seeds, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// A run directory written by `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Write per-sentence candidate distributions of this example to stdout.
    #[arg(long)]
    probe: Option<usize>,
}

#[derive(Args)]
struct MixArgs {
    #[arg(long)]
    task: u8,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// bAbi files to mix; without them stories are generated.
    #[arg(long)]
    input: Vec<PathBuf>,
}

#[derive(Args)]
struct DumpArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::MixGen(a) => run_mix(a),
        Command::GraphDump(a) => run_dump(a),
        Command::GradCheck(a) => run_grad_check(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run_train(a: TrainArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let ds = Dataset::load(&cfg)?;
    log::info!(
        "task {}: {} train, {} valid, {} test questions, {} candidates",
        ds.task,
        ds.train.len(),
        ds.valid.len(),
        ds.test.len(),
        ds.candidates.len()
    );
    let sweep = multi_seed(&cfg, &ds, a.seeds, Some(&a.out))?;
    let best = sweep.best();
    let summary = serde_json::to_string_pretty(&sweep).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(a.out.join("sweep.json"), summary + "\n")?;
    println!(
        "selected seed {}: valid error {:.4}, test error {:.4} (run dir {})",
        best.seed,
        best.valid_error,
        best.test_error,
        a.out.join(format!("seed-{}", best.seed)).display()
    );
    Ok(())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let record = ResultRecord::read(&a.run.join(RESULT_FILE))?;
    let split: Split = a.split.parse()?;
    let ds = Dataset::load(&record.config)?;
    let ckpt = a.run.join(CHECKPOINT_FILE);
    if let Some(i) = a.probe {
        let model = load_model(&record.config, &ds, &ckpt)?;
        let ex = ds
            .split(split)
            .get(i)
            .ok_or_else(|| Error::Config(format!("no example {i} in {}", a.split)))?;
        let rows = model.probe(ex)?;
        let names: Vec<String> = ds.candidates.iter().map(|&c| ds.vocab.word(c).to_string()).collect();
        let doc = &ex.tokens[ex.story.clone()];
        let mut start = 0;
        let sentences: Vec<String> = ex
            .boundaries
            .iter()
            .map(|&end| {
                let words: Vec<&str> = doc[start..=end].iter().map(|&t| ds.vocab.word(t)).collect();
                start = end + 1;
                words.join(" ")
            })
            .collect();
        write_probe_table(std::io::stdout().lock(), &sentences, &names, &rows)?;
        return Ok(());
    }
    let err = evaluate(&record.config, &ds, &ckpt, split)?;
    println!("{} error {err:.4}", a.split);
    Ok(())
}

fn run_mix(a: MixArgs) -> Result<()> {
    let inputs: Vec<(String, Vec<Story>)> = if a.input.is_empty() {
        ["train", "test"]
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let cfg = SynthConfig::task(a.task, a.seed.wrapping_add(i as u64));
                Ok((name.to_string(), generate_stories(&cfg)?))
            })
            .collect::<Result<_>>()?
    } else {
        a.input
            .iter()
            .map(|p| {
                let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("stories").to_string();
                Ok((name, read_stories_file(p)?))
            })
            .collect::<Result<_>>()?
    };
    let all: Vec<Story> = inputs.iter().flat_map(|(_, s)| s.iter().cloned()).collect();
    let lexicon = EntityLexicon::from_stories(&all);
    std::fs::create_dir_all(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    for (name, stories) in &inputs {
        let mixed = mix_stories(stories, &lexicon, &mut rng)?;
        let path = a.out.join(format!("qa{}_mix_{name}.txt", a.task));
        let stories: Vec<Story> = mixed.iter().map(|m| m.story.clone()).collect();
        write_stories(BufWriter::new(File::create(&path)?), &stories)?;
        let renames: Vec<_> = mixed.iter().map(|m| &m.rename.forward).collect();
        let map_path = a.out.join(format!("qa{}_mix_{name}.renames.json", a.task));
        let text = serde_json::to_string(&renames).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&map_path, text + "\n")?;
        println!("{}: {} mixed stories", path.display(), stories.len());
    }
    Ok(())
}

fn run_dump(a: DumpArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let split: Split = a.split.parse()?;
    let splits = StorySplits::load(&cfg.data)?;
    let ds = Dataset::from_splits(&cfg, &splits)?;
    let stories = match split {
        Split::Test => splits.test.clone(),
        _ => splits.train.clone(),
    };
    let n_valid = ds.valid.len();
    let mut examples = examples_from_stories(&stories, splits.task);
    match split {
        Split::Train => examples.truncate(examples.len() - n_valid),
        Split::Valid => examples = examples.split_off(examples.len() - n_valid),
        Split::Test => {}
    }
    let records = examples
        .iter()
        .map(|ex| {
            let ann = extract_coref(ex, &ds.lexicon, cfg.link_question);
            let g = build_example_graph(ex, &ann, &ds.vocab, &ds.registry, &SequenceOrder::Natural)?;
            Ok(GraphRecord::from_graph(&g.built.graph, &g.built.layout, &ds.registry, |t| {
                ds.vocab.word(t).to_string()
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = BufWriter::new(File::create(&a.out)?);
    write_records(&mut w, &records).map_err(mage_rnn::babi::DataError::from)?;
    w.flush()?;
    println!("{}: {} graphs", a.out.display(), records.len());
    Ok(())
}

/// Full bidirectional encode on a random 8-node DAG with two base edge
/// types, scored by the classification head.
fn run_grad_check(a: GradArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let registry = EdgeTypeRegistry::with_coref();
    let coref = registry.lookup("coref").expect("registered");
    let n = 8;
    let mut edges: Vec<Edge> = (0..n - 1).map(|i| Edge::new(i, i + 1, EdgeType::SEQ)).collect();
    while edges.len() < n + 2 {
        // relation edges point forward so each direction sees two types
        let (s, d) = (rng.gen_range(0..n - 1), rng.gen_range(1..n));
        let e = Edge::new(s, d, coref);
        if s < d && !edges.contains(&e) {
            edges.push(e);
        }
    }
    let graph = mage_rnn::graph::AnnotatedGraph::from_base_edges((0..n).collect(), edges, &registry)?;
    let decomp = decompose(&graph);
    let mut store = ParamStore::new();
    let layout = StateLayout::with_relation(&registry, coref, 4, 3)?;
    let layer = layout.build_layer(&mut store, "enc", 5, &registry, &mut rng)?;
    let x: Vec<Tensor> = (0..n)
        .map(|_| Tensor::vector(&(0..5).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()))
        .collect();
    let w_c = store.add(
        "W_C",
        Tensor::matrix(14, 3, (0..42).map(|_| rng.gen_range(-0.5..0.5)).collect())?,
    )?;
    let cand = CandidateSet::new(vec![10, 11, 12], w_c, &store)?;
    let report = grad_check(&mut store, a.step, |tape, store| -> Result<_> {
        let inputs: Vec<_> = x.iter().map(|t| tape.input(t.clone())).collect();
        let enc = encode_bidirectional(tape, store, &layer, &decomp, &inputs, EncodeOptions::default())?;
        let h_d = enc.matrix(tape)?;
        let h_q = enc.rows[n - 1];
        let alpha = attention(tape, h_q, h_d)?;
        let (p, _) = answer_classify(tape, store, alpha, h_d, &cand)?;
        Ok(tape.nll_loss(p, 1)?)
    })?;
    println!(
        "{} entries, max relative error {:.3e} at {:?}",
        report.entries, report.max_rel_error, report.worst
    );
    if report.max_rel_error >= 1e-4 {
        return Err(Error::Config("gradient check failed".into()));
    }
    Ok(())
}

