use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use super::config::{Layers, SEED_ENV};
use super::manifest::RunManifest;
use super::{AlignArgs, BenchArgs, CliError, Command, Common, EvalArgs, ExtractArgs, Hyper, SynthArgs, TrainArgs};
use crate::align::{align_corpus, AlignThresholds, CorpusAlignment, FixtureGateway, HttpGateway, MetadataGateway};
use crate::embeddings::{Embeddings, Mode};
use crate::error::Error;
use crate::eval::{load_external_predictions, render_table, score, time_inference, write_predictions};
use crate::model::{load_rasters, read_corpus, write_corpus, Document};
use crate::pipeline::{train, Extractor, Method, TrainSettings};
use crate::synth::{builtin_templates, synthesize_corpus, template_files, write_synth_output, FieldSampler, NoiseConfig, Template};

type Res<T = ()> = Result<T, CliError>;

pub fn dispatch(cmd: Command) -> Res {
    let common = match &cmd {
        Command::Synth(a) => &a.common,
        Command::Align(a) => &a.common,
        Command::Train(a) => &a.common,
        Command::Extract(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Bench(a) => &a.common,
    };
    let layers = Layers::load(common.config.as_deref())?;
    let pool = thread_pool(common, &layers)?;
    pool.install(|| match cmd {
        Command::Synth(a) => synth(a, &layers),
        Command::Align(a) => align(a, &layers),
        Command::Train(a) => train_cmd(a, &layers),
        Command::Extract(a) => extract(a, &layers),
        Command::Eval(a) => eval(a, &layers),
        Command::Bench(a) => bench(a, &layers),
    })
}

fn thread_pool(common: &Common, layers: &Layers) -> Res<rayon::ThreadPool> {
    let default = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let jobs = layers.get("jobs", common.jobs, default)?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn seed(layers: &Layers, flag: Option<u64>) -> Res<u64> {
    let env = std::env::var(SEED_ENV).ok();
    layers.seed(flag, env.as_deref())
}

/// Fails with the path named when an input is missing, before any work starts.
fn existing(path: &Path) -> Res {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::NotFound(path.display().to_string()).into())
    }
}

fn ensure_parent(path: &Path) -> Res {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into()),
        _ => Ok(()),
    }
}

fn corpus_with_rasters(path: &Path) -> Res<Vec<Document>> {
    let mut docs = read_corpus(path)?;
    load_rasters(&mut docs, path.parent().unwrap_or(Path::new("")))?;
    Ok(docs)
}

fn synth(a: SynthArgs, l: &Layers) -> Res {
    let out: PathBuf = l.require("out", a.out)?;
    let templates_dir: Option<PathBuf> = l.pick("templates", a.templates)?;
    let raster_dir: Option<PathBuf> = l.pick("raster-dir", a.raster_dir)?;
    let n: usize = l.get("n", a.n, 100)?;
    let dpi: i64 = l.get("dpi", a.dpi, 72)?;
    let noise = NoiseConfig {
        bbox_jitter: l.get("jitter", a.jitter, 0.0)?,
        corruption: l.get("corruption", a.corruption, 0.0)?,
    };
    let seed = seed(l, a.seed)?;
    let templates = match &templates_dir {
        Some(dir) => {
            existing(dir)?;
            Template::load_dir(dir)?
        }
        None => builtin_templates(),
    };
    ensure_parent(&out)?;
    let mut docs = synthesize_corpus(&templates, &FieldSampler::default(), &noise, n, seed)?;
    write_synth_output(&mut docs, &out, raster_dir.as_deref(), dpi)?;
    let mut outputs = vec![out.clone()];
    if let Some(dir) = &raster_dir {
        outputs.extend(docs.iter().map(|d| dir.join(format!("{}.pgm", d.id))));
    }
    let template_inputs = match &templates_dir {
        Some(dir) => template_files(dir)?,
        None => Vec::new(),
    };
    let config = json!({
        "templates": templates_dir.map(|p| p.display().to_string()),
        "n": n,
        "out": out.display().to_string(),
        "raster-dir": raster_dir.map(|p| p.display().to_string()),
        "dpi": dpi,
        "jitter": noise.bbox_jitter,
        "corruption": noise.corruption,
    });
    RunManifest::new("synth", Some(seed), config)
        .inputs(&template_inputs)?
        .outputs(&outputs)?
        .write_beside(&out)?;
    eprintln!("wrote {} documents to {}", docs.len(), out.display());
    Ok(())
}

fn gateway(target: &str) -> Res<Box<dyn MetadataGateway>> {
    if let Some(dir) = target.strip_prefix("fixture:") {
        let dir = Path::new(dir);
        existing(dir)?;
        return Ok(Box::new(FixtureGateway::from_dir(dir)?));
    }
    if let Some(rest) = target.strip_prefix("http:") {
        // accept both `http:https://host` and a plain `http://host`
        let base = if rest.starts_with("//") { target.to_string() } else { rest.to_string() };
        return Ok(Box::new(HttpGateway::from_env(base)));
    }
    Err(CliError::Usage(format!("--gateway {target:?}: expected fixture:<dir> or http:<base-url>")))
}

fn align(a: AlignArgs, l: &Layers) -> Res {
    let input: PathBuf = l.require("input", a.input)?;
    let out: PathBuf = l.require("out", a.out)?;
    let target: String = l.require("gateway", a.gateway)?;
    let rejects: PathBuf = l.get("rejects", a.rejects, {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".rejects.jsonl");
        out.with_file_name(name)
    })?;
    let thresholds = AlignThresholds {
        default: l.get("threshold", a.threshold, AlignThresholds::default().default)?,
        doi: l.get("doi-threshold", a.doi_threshold, AlignThresholds::default().doi)?,
    };
    for t in [thresholds.default, thresholds.doi] {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage(format!("threshold {t} outside [0, 1]")));
        }
    }
    existing(&input)?;
    let gw = gateway(&target)?;
    let docs = read_corpus(&input)?;
    ensure_parent(&out)?;
    ensure_parent(&rejects)?;
    let results = align_corpus(&docs, gw.as_ref(), &thresholds);
    let mut accepted = Vec::new();
    let mut rejected = String::new();
    for r in results {
        let line = match r {
            CorpusAlignment::Accepted(d, _) => {
                accepted.push(d);
                continue;
            }
            CorpusAlignment::Rejected(rep) => json!({"id": rep.id, "doi": rep.doi, "reason": "no field matched", "unmatched": rep.unmatched}),
            CorpusAlignment::Failed { id, error } => json!({"id": id, "reason": error.to_string()}),
        };
        rejected.push_str(&line.to_string());
        rejected.push('\n');
    }
    write_corpus(&out, &accepted)?;
    fs::write(&rejects, rejected).map_err(|e| Error::io(&rejects, e))?;
    let config = json!({
        "input": input.display().to_string(),
        "gateway": target,
        "out": out.display().to_string(),
        "rejects": rejects.display().to_string(),
        "threshold": thresholds.default,
        "doi-threshold": thresholds.doi,
    });
    RunManifest::new("align", None, config)
        .input(&input)?
        .outputs(&[out.clone(), rejects])?
        .write_beside(&out)?;
    eprintln!("aligned {} of {} documents", accepted.len(), docs.len());
    Ok(())
}

fn parse_mode(s: &str) -> Res<Mode> {
    match s {
        "per-token" => Ok(Mode::PerToken),
        "per-block" => Ok(Mode::PerBlock),
        _ => Err(CliError::Usage(format!("--mode {s:?}: expected per-token or per-block"))),
    }
}

fn settings(h: &Hyper, l: &Layers, seed: u64) -> Res<TrainSettings> {
    let mut s = TrainSettings {
        seed,
        ..Default::default()
    };
    s.crf.sigma2 = l.get("sigma2", h.sigma2, s.crf.sigma2)?;
    s.crf.max_iters = l.get("max-iters", h.max_iters, s.crf.max_iters)?;
    s.crf.tol = l.get("tol", h.tol, s.crf.tol)?;
    let dim = l.get("dim", h.dim, s.word2vec.dim)?;
    s.word2vec.dim = dim;
    s.char2vec.dim = dim;
    let emb_epochs = l.get("emb-epochs", h.emb_epochs, s.word2vec.epochs)?;
    s.word2vec.epochs = emb_epochs;
    s.char2vec.epochs = emb_epochs;
    s.architecture.hidden = l.get("hidden", h.hidden, s.architecture.hidden)?;
    s.architecture.layers = l.get("layers", h.layers, s.architecture.layers)?;
    s.architecture.head = l.get("head", h.head, s.architecture.head)?;
    s.shape = l.get("shape", h.shape, s.shape)?;
    s.textmap.shape = s.shape;
    let epochs = l.get("epochs", h.epochs, s.seq.epochs)?;
    let lr = l.get("lr", h.lr, s.seq.lr)?;
    let batch = l.get("batch", h.batch, s.seq.batch)?;
    (s.seq.epochs, s.seq.lr, s.seq.batch) = (epochs, lr, batch);
    (s.textmap_train.epochs, s.textmap_train.lr, s.textmap_train.batch) = (epochs, lr, batch);
    s.textmap.width = l.get("width", h.width, s.textmap.width)?;
    s.textmap.channels = l.get("channels", h.channels, s.textmap.channels)?;
    s.textmap.heads = l.get("heads", h.heads, s.textmap.heads)?;
    s.textmap.hidden = l.get("det-hidden", h.det_hidden, s.textmap.hidden)?;
    s.textmap.geometry = l.get("geometry", h.geometry, s.textmap.geometry)?;
    if let Some(m) = l.pick::<String>("mode", h.mode.clone())? {
        s.textmap.mode = parse_mode(&m)?;
    }
    if dim == 0 || s.architecture.hidden == 0 || s.architecture.layers == 0 || batch == 0 || !(lr > 0.0) {
        return Err(CliError::Usage("dimensions, batch and learning rate must be positive".into()));
    }
    Ok(s)
}

fn method(l: &Layers, flag: Option<String>) -> Res<Method> {
    let name: String = l.require("method", flag)?;
    name.parse().map_err(|e: Error| CliError::Usage(e.to_string()))
}

/// Trains from a corpus file; returns the extractor and the input files it read.
fn train_from(m: Method, corpus: &Path, emb: Option<PathBuf>, s: &TrainSettings) -> Res<(Extractor, Vec<PathBuf>)> {
    existing(corpus)?;
    if m.needs_precomputed() && emb.is_none() {
        return Err(CliError::Usage(format!("{m} needs --embeddings")));
    }
    if let Some(e) = &emb {
        existing(e)?;
    }
    let docs = if m.is_textmap() { corpus_with_rasters(corpus)? } else { read_corpus(corpus)? };
    let pre = match (&emb, m.needs_precomputed()) {
        (Some(p), true) => Some(Embeddings::load(p)?),
        _ => None,
    };
    let mut inputs = vec![corpus.to_path_buf()];
    if m.is_textmap() {
        let base = corpus.parent().unwrap_or(Path::new(""));
        inputs.extend(docs.iter().filter_map(|d| d.page.raster_path.as_ref().map(|r| base.join(r))));
    }
    if let Some(p) = emb.filter(|_| m.needs_precomputed()) {
        inputs.push(p.clone());
        inputs.push(p.with_extension("bin"));
    }
    Ok((train(m, &docs, s, pre)?, inputs))
}

fn train_cmd(a: TrainArgs, l: &Layers) -> Res {
    let m = method(l, a.method)?;
    let corpus: PathBuf = l.require("corpus", a.corpus)?;
    let out: PathBuf = l.require("out", a.out)?;
    let emb: Option<PathBuf> = l.pick("embeddings", a.embeddings)?;
    let seed = seed(l, a.seed)?;
    let s = settings(&a.hyper, l, seed)?;
    ensure_parent(&out)?;
    let (x, inputs) = train_from(m, &corpus, emb, &s)?;
    x.save(&out)?;
    let config = json!({
        "method": m.name(),
        "corpus": corpus.display().to_string(),
        "out": out.display().to_string(),
        "settings": s,
    });
    RunManifest::new("train", Some(seed), config)
        .inputs(&inputs)?
        .outputs(&Extractor::files(&out)?)?
        .write_beside(&out)?;
    eprintln!("trained {m} on {}", corpus.display());
    Ok(())
}

fn load_extractor(model: &Path, emb: Option<&Path>) -> Res<Extractor> {
    existing(model)?;
    if let Some(e) = emb {
        existing(e)?;
    }
    let mut x = Extractor::load(model)?;
    if let Some(e) = emb {
        x.replace_embeddings(Embeddings::load(e)?)?;
    }
    Ok(x)
}

fn label_all(x: &Extractor, docs: &[Document]) -> Res<Vec<Vec<crate::model::Label>>> {
    use rayon::prelude::*;
    Ok(docs.par_iter().map(|d| x.label_document(d)).collect::<crate::Result<_>>()?)
}

fn extract(a: ExtractArgs, l: &Layers) -> Res {
    let model: PathBuf = l.require("model", a.model)?;
    let corpus: PathBuf = l.require("corpus", a.corpus)?;
    let out: PathBuf = l.require("out", a.out)?;
    let emb: Option<PathBuf> = l.pick("embeddings", a.embeddings)?;
    existing(&corpus)?;
    let x = load_extractor(&model, emb.as_deref())?;
    let docs = if x.method().is_textmap() { corpus_with_rasters(&corpus)? } else { read_corpus(&corpus)? };
    ensure_parent(&out)?;
    let labels = label_all(&x, &docs)?;
    write_predictions(&out, &docs, &labels)?;
    let config = json!({
        "model": model.display().to_string(),
        "corpus": corpus.display().to_string(),
        "out": out.display().to_string(),
        "embeddings": emb.as_ref().map(|p| p.display().to_string()),
    });
    let mut inputs = Extractor::files(&model)?;
    inputs.push(corpus.clone());
    RunManifest::new("extract", None, config)
        .inputs(&inputs)?
        .outputs(&[out.clone()])?
        .write_beside(&out)?;
    eprintln!("labeled {} documents", docs.len());
    Ok(())
}

fn eval(a: EvalArgs, l: &Layers) -> Res {
    let gold: PathBuf = l.require("gold", a.gold)?;
    let pred: PathBuf = l.require("pred", a.pred)?;
    let out: Option<PathBuf> = l.pick("out", a.out)?;
    existing(&gold)?;
    existing(&pred)?;
    let docs = read_corpus(&gold)?;
    let labels = load_external_predictions(&pred, &docs)?;
    let report = score(&docs, &labels)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    w.write_all(render_table(&report).as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
    if let Some(out) = out {
        ensure_parent(&out)?;
        let text = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
        fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
        let config = json!({"gold": gold.display().to_string(), "pred": pred.display().to_string(), "out": out.display().to_string()});
        RunManifest::new("eval", None, config)
            .inputs(&[gold, pred])?
            .outputs(&[out.clone()])?
            .write_beside(&out)?;
    }
    Ok(())
}

fn bench(a: BenchArgs, l: &Layers) -> Res {
    let model: Option<PathBuf> = l.pick("model", a.model)?;
    let corpus: Option<PathBuf> = l.pick("corpus", a.corpus)?;
    let test: Option<PathBuf> = l.pick("test", a.test)?;
    let emb: Option<PathBuf> = l.pick("embeddings", a.embeddings)?;
    let repeats: usize = l.get("repeats", a.repeats, 3)?;
    let out: Option<PathBuf> = l.pick("out", a.out)?;
    let seed = seed(l, a.seed)?;
    let (x, train_seconds) = match (&model, l.pick::<String>("method", a.method.clone())?) {
        (Some(p), _) => (load_extractor(p, emb.as_deref())?, None),
        (None, Some(_)) => {
            let m = method(l, a.method)?;
            let corpus = corpus.clone().ok_or_else(|| CliError::Usage("--method needs --corpus".into()))?;
            let s = settings(&a.hyper, l, seed)?;
            let t = Instant::now();
            let (x, _) = train_from(m, &corpus, emb.clone(), &s)?;
            (x, Some(t.elapsed().as_secs_f64()))
        }
        (None, None) => return Err(CliError::Usage("bench needs --model or --method".into())),
    };
    let timed = test
        .or(corpus)
        .ok_or_else(|| CliError::Usage("bench needs --test or --corpus".into()))?;
    existing(&timed)?;
    let docs = if x.method().is_textmap() { corpus_with_rasters(&timed)? } else { read_corpus(&timed)? };
    let mut failure = None;
    let stats = time_inference(
        |d| {
            if let Err(e) = x.label_document(d) {
                failure.get_or_insert(e);
            }
        },
        &docs,
        repeats,
    )?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    println!("method      {}", x.method());
    println!("documents   {}", docs.len());
    if let Some(t) = train_seconds {
        println!("training    {t:.1} s");
    }
    println!("inference   {:.3} ± {:.3} ms per document over {repeats} runs", stats.mean * 1e3, stats.stddev * 1e3);
    if let Some(out) = out {
        ensure_parent(&out)?;
        let report = json!({
            "method": x.method().name(),
            "documents": docs.len(),
            "train_seconds": train_seconds,
            "inference": stats,
        });
        let text = serde_json::to_string_pretty(&report).map_err(Error::from)? + "\n";
        fs::write(&out, text).map_err(|e| Error::io(&out, e))?;
    }
    Ok(())
}
