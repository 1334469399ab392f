//! Command-line surface: one pipeline stage per subcommand.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::checkpoint::{decoder_to_bytes, rse_to_bytes, CHECKPOINT_VERSION};
use crate::data::{
    captions_to_tsv, load_dataset, read_captions, sha256_hex, write_atomic, CaptionRow, Dataset, Split,
    SyntheticSpec, VectorFile, VectorKind, CONTAINER_VERSION, MANIFEST_VERSION,
};
use crate::decoder::{train_decoder, DecoderConfig};
use crate::embedding::{embedder_registry, Embedder, EmbedderConfig, EmbeddingStore, EmbeddingVector};
use crate::encoder::{train_rse, RseTrainConfig};
use crate::error::{Error, Result};
use crate::metrics::ablation::{run_ablation, AblationConfig, AblationSettings, VARIANT_ORDER};
use crate::metrics::{evaluate, EvalItem};
use crate::nn::norm;
use crate::viz::{export_scatter, projection_registry, ProjectionOptions};
use crate::vocab::{Vocabulary, DEFAULT_MIN_FREQ};

#[derive(Debug, Parser)]
#[command(name = "neurocap", version, about = "Caption generation from neural response vectors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset.
    SynthGen(SynthGenArgs),
    /// Convert an embedding TSV, or captions embedded locally, into a binary embedding file.
    EmbedImport(EmbedImportArgs),
    /// Build a vocabulary from the train-split captions.
    VocabBuild(VocabBuildArgs),
    /// Train the response-to-embedding encoder.
    TrainRse(TrainRseArgs),
    /// Train the embedding-to-caption decoder on true embeddings.
    TrainDecoder(TrainDecoderArgs),
    /// Caption response vectors with a trained encoder and decoder.
    Caption(CaptionArgs),
    /// Score predicted captions against the references.
    Eval(EvalArgs),
    /// Run the encoder/embedding ablation table.
    Ablate(AblateArgs),
    /// Project vectors to 2-D and export a labeled scatter.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
pub struct SynthGenArgs {
    #[arg(long, default_value_t = 8)]
    pub concepts: usize,
    #[arg(long, default_value_t = 50)]
    pub per_concept: usize,
    /// Embedding dimension.
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    /// Response dimension.
    #[arg(long, default_value_t = 64)]
    pub fdim: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::embedding::DEFAULT_HASHBAG_SEED)]
    pub embedder_seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EmbeddingChoice {
    /// `hashbag` or `file`.
    #[arg(long, default_value = "hashbag")]
    pub embedder: String,
    /// Embedding dimension for the hash-bag embedder; defaults to the dataset's.
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Hash-bag seed; defaults to the one recorded in a synthetic manifest.
    #[arg(long)]
    pub embedder_seed: Option<u64>,
    /// Embedding TSV backing the `file` embedder.
    #[arg(long)]
    pub embedder_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedImportArgs {
    /// Embedding TSV (`#dim=D` header, `id<TAB>label<TAB>v1,...,vD` rows).
    #[arg(long, conflicts_with = "captions")]
    pub input: Option<PathBuf>,
    /// Caption TSV to embed; each stimulus gets the normalized mean of its caption embeddings.
    #[arg(long)]
    pub captions: Option<PathBuf>,
    #[command(flatten)]
    pub embedding: EmbeddingChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VocabBuildArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
    pub min_freq: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainRseArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Hidden layer widths, comma separated; empty for a linear encoder.
    #[arg(long, default_value = "256", value_delimiter = ',', num_args = 0..)]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainDecoderArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Vocabulary file from `vocab-build`; built from train captions when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_FREQ)]
    pub min_freq: usize,
    #[arg(long, default_value_t = 64)]
    pub embed_dim: usize,
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    #[arg(long, default_value_t = 30)]
    pub max_len: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CaptionArgs {
    #[arg(long)]
    pub rse: PathBuf,
    #[arg(long)]
    pub decoder: PathBuf,
    /// Response file to caption.
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    pub responses: Option<PathBuf>,
    /// Caption one split of a dataset instead of a response file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value = "model")]
    pub subject_id: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub rse: PathBuf,
    #[arg(long)]
    pub decoder: PathBuf,
    /// Caption TSV from `caption`.
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub embedding: EmbeddingChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "1,2,3", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, default_value = "none,encoder_only,full", value_delimiter = ',')]
    pub variants: Vec<String>,
    /// JSON file overriding the default training settings.
    #[arg(long)]
    pub settings: Option<PathBuf>,
    #[command(flatten)]
    pub embedding: EmbeddingChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Space {
    /// Raw response vectors.
    Response,
    /// Stored caption embeddings.
    Embedding,
    /// Encoder predictions (needs `--rse`).
    Predicted,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `pca` or `tsne`.
    #[arg(long, default_value = "tsne")]
    pub method: String,
    #[arg(long, value_enum, default_value_t = Space::Predicted)]
    pub space: Space,
    #[arg(long)]
    pub rse: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write an SVG scatter here.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SynthGen(_) => "synth-gen",
            Command::EmbedImport(_) => "embed-import",
            Command::VocabBuild(_) => "vocab-build",
            Command::TrainRse(_) => "train-rse",
            Command::TrainDecoder(_) => "train-decoder",
            Command::Caption(_) => "caption",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
            Command::Viz(_) => "viz",
        }
    }

    fn seed(&self) -> Option<String> {
        match self {
            Command::SynthGen(a) => Some(a.seed.to_string()),
            Command::TrainRse(a) => Some(a.seed.to_string()),
            Command::TrainDecoder(a) => Some(a.seed.to_string()),
            Command::Ablate(a) => Some(
                a.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
            ),
            Command::Viz(a) => Some(a.seed.to_string()),
            _ => None,
        }
    }
}

/// Parses `argv`, runs the subcommand and returns the process exit status.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    log_header(&cli.command);
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn log_header(cmd: &Command) {
    let config_hash = sha256_hex(format!("{cmd:?}").as_bytes());
    eprintln!(
        "# neurocap {} {} seed={} config_sha256={} formats: container=v{CONTAINER_VERSION} manifest=v{MANIFEST_VERSION} checkpoint=v{CHECKPOINT_VERSION}",
        env!("CARGO_PKG_VERSION"),
        cmd.name(),
        cmd.seed().unwrap_or_else(|| "n/a".into()),
        &config_hash[..16],
    );
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::SynthGen(a) => synth_gen(a),
        Command::EmbedImport(a) => embed_import(a),
        Command::VocabBuild(a) => vocab_build(a),
        Command::TrainRse(a) => train_rse_cmd(a),
        Command::TrainDecoder(a) => train_decoder_cmd(a),
        Command::Caption(a) => caption(a),
        Command::Eval(a) => eval(a),
        Command::Ablate(a) => ablate(a),
        Command::Viz(a) => viz(a),
    }
}

fn synth_gen(a: &SynthGenArgs) -> Result<()> {
    let spec = SyntheticSpec {
        concepts: a.concepts,
        per_concept: a.per_concept,
        dim: a.dim,
        response_dim: a.fdim,
        noise: a.noise,
        embedder_seed: a.embedder_seed,
    };
    let ds = crate::data::generate_synthetic(&spec, a.seed)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let manifest = ds.write_to(&a.out)?;
    println!("{}", manifest.display());
    eprintln!("stimuli={} train={} test={}", ds.ids.len(), ds.train.len(), ds.test.len());
    Ok(())
}

fn build_embedder(choice: &EmbeddingChoice, dataset: Option<&Dataset>) -> Result<Box<dyn Embedder>> {
    let synth = dataset.and_then(|d| d.manifest.synthetic.as_ref());
    let mut cfg = EmbedderConfig {
        table: choice.embedder_table.clone(),
        ..EmbedderConfig::default()
    };
    if let Some(d) = choice.embed_dim.or(dataset.map(|d| d.embedding_dim)) {
        cfg.dim = d;
    }
    if let Some(s) = choice.embedder_seed.or(synth.map(|s| s.embedder_seed)) {
        cfg.seed = s;
    }
    let factory = embedder_registry().get(&choice.embedder)?;
    let embedder = factory(&cfg)?;
    if let Some(d) = dataset {
        if embedder.dim() != d.embedding_dim {
            return Err(Error::dim("sentence embedder", d.embedding_dim, embedder.dim()));
        }
    }
    Ok(embedder)
}

fn embed_import(a: &EmbedImportArgs) -> Result<()> {
    let file = match (&a.input, &a.captions) {
        (Some(input), None) => {
            let store = EmbeddingStore::read_tsv(input)?;
            let mut file = VectorFile::new(VectorKind::Embeddings, store.dim());
            for r in store.iter() {
                file.push(r.id.clone(), r.vector.as_slice().to_vec())?;
            }
            file
        }
        (None, Some(path)) => {
            let embedder = build_embedder(&a.embedding, None)?;
            let rows = read_captions(path)?;
            let mut order: Vec<&str> = Vec::new();
            let mut sums: HashMap<&str, Vec<f64>> = HashMap::new();
            for row in &rows {
                let e = embedder.embed(&row.caption)?;
                let acc = sums.entry(&row.stimulus_id).or_insert_with(|| {
                    order.push(&row.stimulus_id);
                    vec![0.0; embedder.dim()]
                });
                acc.iter_mut().zip(e.as_slice()).for_each(|(s, v)| *s += v);
            }
            let mut file = VectorFile::new(VectorKind::Embeddings, embedder.dim());
            for id in order {
                let mut v = sums.remove(id).expect("every id was inserted");
                let n = norm(&v);
                if n > 0.0 {
                    v.iter_mut().for_each(|x| *x /= n);
                }
                file.push(id, v)?;
            }
            file
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give exactly one of --input or --captions".into(),
            ))
        }
    };
    if file.records.is_empty() {
        return Err(Error::Empty("no embedding records to import".into()));
    }
    file.write(&a.out)?;
    eprintln!("records={} dim={}", file.records.len(), file.dim);
    Ok(())
}

fn vocab_build(a: &VocabBuildArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let vocab = Vocabulary::build(&ds.caption_texts(Split::Train), a.min_freq)?;
    write_atomic(&a.out, vocab.to_file_string().as_bytes())?;
    eprintln!("tokens={} sha256={}", vocab.len(), hex::encode(vocab.hash()));
    Ok(())
}

fn train_rse_cmd(a: &TrainRseArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let train = ds.stimulus_indices(Split::Train);
    let inputs: Vec<&[f64]> = train.iter().map(|&i| ds.stimuli[i].response.as_slice()).collect();
    let targets: Vec<&[f64]> = train.iter().map(|&i| ds.stimuli[i].embedding.as_slice()).collect();
    let config = RseTrainConfig {
        hidden: a.hidden.clone(),
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        seed: a.seed,
        ..RseTrainConfig::default()
    };
    let (model, curve) = train_rse(&inputs, &targets, &config)?;
    write_atomic(&a.out, &rse_to_bytes(&model, Some(&config))?)?;
    eprintln!("epochs={} final_loss={:.6e}", curve.len(), curve.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn train_decoder_cmd(a: &TrainDecoderArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let vocab = match &a.vocab {
        Some(p) => Vocabulary::load(p)?,
        None => Vocabulary::build(&ds.caption_texts(Split::Train), a.min_freq)?,
    };
    let pairs = ds
        .caption_indices(Split::Train)
        .into_iter()
        .map(|c| {
            let e = EmbeddingVector::new(ds.stimuli[ds.captions[c].stimulus].embedding.clone())?;
            Ok((e, ds.caption_record(&vocab, c)))
        })
        .collect::<Result<Vec<_>>>()?;
    let config = DecoderConfig {
        embed_dim: a.embed_dim,
        hidden: a.hidden,
        max_len: a.max_len,
        epochs: a.epochs,
        batch_size: a.batch_size,
        lr: a.lr,
        seed: a.seed,
        ..DecoderConfig::default()
    };
    let (model, curve) = train_decoder(&pairs, &vocab, &config)?;
    write_atomic(&a.out, &decoder_to_bytes(&model, Some(&config))?)?;
    eprintln!("epochs={} final_loss={:.6e}", curve.len(), curve.last().copied().unwrap_or(f64::NAN));
    Ok(())
}

fn caption(a: &CaptionArgs) -> Result<()> {
    let rse = crate::data::load_rse(&a.rse)?;
    let decoder = crate::data::load_decoder(&a.decoder, None)?;
    let records: Vec<(String, Vec<f64>)> = match (&a.responses, &a.manifest) {
        (Some(p), _) => VectorFile::read(p, VectorKind::Responses)?.records,
        (None, Some(m)) => {
            let ds = load_dataset(m)?;
            let split: Split = a.split.parse()?;
            ds.stimulus_indices(split)
                .into_iter()
                .map(|i| (ds.stimuli[i].id.clone(), ds.stimuli[i].response.clone()))
                .collect()
        }
        (None, None) => return Err(Error::InvalidArgument("give --responses or --manifest".into())),
    };
    if records.is_empty() {
        return Err(Error::Empty("no responses to caption".into()));
    }
    let mut rows = Vec::with_capacity(records.len());
    for (id, response) in &records {
        let e = rse.predict_embedding(response)?;
        let generated = decoder.generate_caption(e.as_slice())?;
        rows.push(CaptionRow::new(id.clone(), a.subject_id.clone(), generated.text));
    }
    write_atomic(&a.out, captions_to_tsv(&rows).as_bytes())?;
    eprintln!("captions={}", rows.len());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let rse_bytes = crate::data::io::read_bytes(&a.rse)?;
    let dec_bytes = crate::data::io::read_bytes(&a.decoder)?;
    let pred_bytes = crate::data::io::read_bytes(&a.predictions)?;
    let rse = crate::data::checkpoint::rse_from_bytes(&rse_bytes)?.0;
    let decoder = crate::data::checkpoint::decoder_from_bytes(&dec_bytes, None)?.0;
    let text = String::from_utf8(pred_bytes.clone())
        .map_err(|_| Error::Format("predictions are not UTF-8".into()))?;
    let predictions = crate::data::parse_captions(&text)?;
    let embedder = build_embedder(&a.embedding, Some(&ds))?;

    let by_id: HashMap<&str, usize> = ds.stimuli.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let references = ds.references();
    let mut conditions = Vec::with_capacity(predictions.len());
    for p in &predictions {
        let &i = by_id
            .get(p.stimulus_id.as_str())
            .ok_or_else(|| Error::Data(format!("prediction for unknown stimulus {:?}", p.stimulus_id)))?;
        conditions.push((i, rse.predict_embedding(&ds.stimuli[i].response)?));
    }
    let items: Vec<EvalItem<'_>> = predictions
        .iter()
        .zip(&conditions)
        .map(|(p, (i, e))| EvalItem {
            stimulus_id: &p.stimulus_id,
            references: references.get(i).cloned().unwrap_or_default(),
            prediction: &p.caption,
            condition: e.as_slice(),
        })
        .collect();
    let mut hasher_input = Vec::new();
    for part in [&rse_bytes, &dec_bytes, &pred_bytes] {
        hasher_input.extend_from_slice(sha256_hex(part).as_bytes());
    }
    let fingerprint = sha256_hex(&hasher_input);
    let report = evaluate(&decoder, embedder.as_ref(), &items, &fingerprint)?;
    write_atomic(&a.out, report.to_tsv().as_bytes())?;
    println!(
        "meteor={:.6} sentence={:.6} perplexity={:.6}",
        report.mean_meteor, report.mean_sentence, report.perplexity
    );
    Ok(())
}

fn ablate(a: &AblateArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let settings = match &a.settings {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("ablation settings: {e}")))?
        }
        None => AblationSettings::default(),
    };
    let embedder = build_embedder(&a.embedding, Some(&ds))?;
    let mut variants = a.variants.clone();
    variants.sort_by_key(|v| VARIANT_ORDER.iter().position(|o| o == v).unwrap_or(usize::MAX));
    let configs: Vec<AblationConfig> = variants
        .into_iter()
        .map(|variant| AblationConfig {
            variant,
            seeds: a.seeds.clone(),
        })
        .collect();
    let table = run_ablation(&ds, &configs, &settings, embedder.as_ref())?;
    write_atomic(&a.out, table.to_tsv().as_bytes())?;
    print!("{}", table.to_tsv());
    Ok(())
}

fn viz(a: &VizArgs) -> Result<()> {
    let ds = load_dataset(&a.manifest)?;
    let split: Split = a.split.parse()?;
    let projection = projection_registry().get(&a.method)?;
    let idx = ds.stimulus_indices(split);
    let vectors: Vec<Vec<f64>> = match a.space {
        Space::Response => idx.iter().map(|&i| ds.stimuli[i].response.clone()).collect(),
        Space::Embedding => idx.iter().map(|&i| ds.stimuli[i].embedding.clone()).collect(),
        Space::Predicted => {
            let path = a
                .rse
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--space predicted needs --rse".into()))?;
            let rse = crate::data::load_rse(path)?;
            idx.iter()
                .map(|&i| rse.predict_embedding(&ds.stimuli[i].response).map(EmbeddingVector::into_vec))
                .collect::<Result<_>>()?
        }
    };
    let labels: Vec<String> = idx
        .iter()
        .map(|&i| ds.stimuli[i].label.clone().unwrap_or_else(|| ds.stimuli[i].id.clone()))
        .collect();
    let options = ProjectionOptions {
        perplexity: a.perplexity,
        seed: a.seed,
    };
    let result = projection.project(&vectors, &labels, &options)?;
    export_scatter(&result, &a.out, a.svg.as_deref())?;
    for (k, v) in &result.diagnostics {
        eprintln!("{k}={v:.6}");
    }
    if labels.iter().collect::<std::collections::HashSet<_>>().len() >= 2 {
        if let Ok(s) = crate::viz::silhouette_score(&result.points, &labels) {
            eprintln!("silhouette={s:.6}");
        }
    }
    Ok(())
}
