use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use drem::config::KeyValues;
use drem::corpus::{generate_synthetic, split_corpus, Corpus, EntityType, Split, SynthSpec, DEFAULT_VOCAB_MIN_COUNT};
use drem::eval::{
    evaluate_run, fisher_randomization_test, parse_qrels, parse_run, qrels_from_corpus, retrieve_run, write_run,
    Qrels, DEFAULT_CUTOFFS, DEFAULT_ITERATIONS, DEFAULT_TOPK,
};
use drem::explain::{explanation_record, ExplainConfig, Explainer, TemplateSet};
use drem::model::{train, ModelConfig, ModelKind};
use drem::quality::{
    aggregate_labels, build_group_vector, build_pair_dataset, cross_validate, default_grid, group_layout,
    log_purchase_prob, parse_feature_csv, parse_labels, parse_manifest, write_feature_csv, AssociationIndex, Case,
    GbdtParams, GroupContext, Manifest,
};
use drem::store::EmbeddingStore;

use crate::args::*;

/// Keys a config file may carry besides the model fields.
const RUN_KEYS: [&str; 6] = ["retrieve_topk", "cutoffs", "gamma", "explain_topk", "folds", "iterations"];
const CORPUS_CONF: &str = "corpus.conf";
const DEFAULT_FOLDS: usize = 5;

/// Effective settings after merging the config file with the global flags.
struct Settings {
    file: KeyValues,
    model: ModelConfig,
}

impl Settings {
    fn resolve(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(path) => KeyValues::load(path)?,
            None => KeyValues::default(),
        };
        if let Some(key) = file
            .keys()
            .find(|k| !ModelConfig::KEYS.contains(k) && !RUN_KEYS.contains(k))
        {
            bail!(drem::Error::InvalidArgument(format!("unknown config key `{key}`")));
        }
        let mut model = ModelConfig::default();
        model.apply(&file.subset(&ModelConfig::KEYS))?;
        if let Some(seed) = cli.seed {
            model.seed = seed;
        }
        if let Some(d) = cli.deterministic {
            model.deterministic = d;
        }
        Ok(Self { file, model })
    }

    fn seed(&self) -> u64 {
        self.model.seed
    }

    fn value<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file.parse_value(key)?.unwrap_or(default)),
        }
    }

    fn cutoffs(&self, flag: Option<Vec<usize>>) -> Result<Vec<usize>> {
        if let Some(c) = flag {
            return Ok(c);
        }
        match self.file.get("cutoffs") {
            None => Ok(DEFAULT_CUTOFFS.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| drem::Error::InvalidArgument(format!("config key `cutoffs` has invalid value `{v}`")).into()),
        }
    }
}

fn log_stage(stage: &str, settings: &Settings, config: Value) {
    eprintln!(
        "{}",
        json!({
            "stage": stage,
            "seed": settings.seed(),
            "deterministic": settings.model.deterministic,
            "config": config,
        })
    );
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!(drem::Error::InvalidArgument(format!("missing input file {}", path.display())));
    }
    Ok(())
}

fn write_output(path: &Path, body: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    require_file(path)?;
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn corpus_paths(args: &CorpusArgs) -> Result<(PathBuf, PathBuf, u64)> {
    match (&args.corpus, &args.triples, &args.purchases) {
        (Some(dir), _, _) => {
            let conf = dir.join(CORPUS_CONF);
            let min_count = if conf.is_file() {
                KeyValues::load(&conf)?.parse_value("vocab_min_count")?.unwrap_or(DEFAULT_VOCAB_MIN_COUNT)
            } else {
                DEFAULT_VOCAB_MIN_COUNT
            };
            Ok((dir.join("triples.tsv"), dir.join("purchases.tsv"), min_count))
        }
        (None, Some(t), Some(p)) => Ok((t.clone(), p.clone(), DEFAULT_VOCAB_MIN_COUNT)),
        _ => bail!(drem::Error::InvalidArgument(
            "give --corpus DIR or both --triples and --purchases".into()
        )),
    }
}

fn load_corpus(args: &CorpusArgs) -> Result<Corpus> {
    let (triples, purchases, min_count) = corpus_paths(args)?;
    require_file(&triples)?;
    require_file(&purchases)?;
    Ok(Corpus::load(&triples, &purchases, min_count)?)
}

fn require_test_split(corpus: &Corpus) -> Result<()> {
    if corpus.test_purchases().next().is_none() {
        bail!(drem::Error::InvalidArgument(
            "corpus has no test purchases; run `drem ingest` to split it".into()
        ));
    }
    Ok(())
}

fn load_store(path: &Path, corpus: &Corpus) -> Result<EmbeddingStore> {
    require_file(path)?;
    let store = EmbeddingStore::load(path)?;
    store.check_compatible(corpus)?;
    Ok(store)
}

pub fn run(cli: Cli) -> Result<()> {
    let settings = Settings::resolve(&cli)?;
    if settings.model.deterministic {
        // Single worker; a pool that already exists is fine to reuse.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    }
    match &cli.command {
        Command::Ingest(a) => ingest(a, &settings),
        Command::Synth(a) => synth(a, &settings),
        Command::Train(a) => train_stage(a, settings),
        Command::Retrieve(a) => retrieve(a, &settings),
        Command::Eval(a) => eval(a, &settings),
        Command::Explain(a) => explain(a, &settings),
        Command::Features(a) => features(a, &settings),
        Command::Predict(a) => predict(a, &settings),
    }
}

fn ingest(a: &IngestArgs, s: &Settings) -> Result<()> {
    log_stage(
        "ingest",
        s,
        json!({
            "triples": path_str(&a.triples),
            "purchases": path_str(&a.purchases),
            "out": path_str(&a.out),
            "test_fraction": a.test_fraction,
            "vocab_min_count": a.vocab_min_count,
        }),
    );
    require_file(&a.triples)?;
    require_file(&a.purchases)?;
    let mut corpus = Corpus::load(&a.triples, &a.purchases, a.vocab_min_count)?;
    if !corpus.has_split() {
        corpus = split_corpus(&corpus, a.test_fraction, s.seed())?;
    }
    write_output(&a.out.join("triples.tsv"), corpus.emit_triples().as_bytes())?;
    write_output(&a.out.join("purchases.tsv"), corpus.emit_purchases().as_bytes())?;
    write_output(
        &a.out.join(CORPUS_CONF),
        format!("vocab_min_count = {}\n", a.vocab_min_count).as_bytes(),
    )?;
    eprintln!(
        "{}",
        json!({
            "stage": "ingest",
            "users": corpus.count(EntityType::User),
            "items": corpus.count(EntityType::Item),
            "words": corpus.count(EntityType::Word),
            "queries": corpus.queries().len(),
            "triples": corpus.triples().len(),
            "duplicate_triples": corpus.duplicate_triples(),
            "train_purchases": corpus.train_purchases().count(),
            "test_purchases": corpus.test_purchases().count(),
        })
    );
    Ok(())
}

fn synth(a: &SynthArgs, s: &Settings) -> Result<()> {
    let spec = SynthSpec {
        users: a.users,
        items: a.items,
        brands: a.brands,
        categories: a.categories,
        queries: a.queries,
        sessions_per_user: a.sessions,
        test_fraction: a.test_fraction,
    };
    log_stage(
        "synth",
        s,
        json!({
            "out": path_str(&a.out),
            "users": spec.users,
            "items": spec.items,
            "brands": spec.brands,
            "categories": spec.categories,
            "queries": spec.queries,
            "sessions": spec.sessions_per_user,
            "test_fraction": spec.test_fraction,
        }),
    );
    generate_synthetic(&spec, s.seed())?.write_to(&a.out)?;
    Ok(())
}

fn train_stage(a: &TrainArgs, s: Settings) -> Result<()> {
    let mut config = s.model.clone();
    let m = &a.model;
    if let Some(kind) = m.model {
        config.kind = match kind {
            ModelArg::Drem => ModelKind::Drem,
            ModelArg::DremHgn => ModelKind::DremHgn,
        };
    }
    macro_rules! over {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = m.$flag {
                config.$field = v;
            })*
        };
    }
    over!(dim => dim, heads => heads, neg => negatives, epochs => epochs, lr => initial_lr, clip => clip_norm, batch => batch_size);
    config.validate()?;
    let mut logged = KeyValues::parse(&config.to_key_values())?;
    logged = logged.subset(&ModelConfig::KEYS);
    let fields: serde_json::Map<String, Value> = logged
        .keys()
        .map(|k| (k.to_owned(), Value::String(logged.get(k).unwrap_or_default().to_owned())))
        .collect();
    log_stage(
        "train",
        &s,
        json!({"checkpoint": path_str(&a.checkpoint), "model": fields}),
    );
    let corpus = load_corpus(&a.corpus)?;
    let (store, log) = train(&corpus, &config)?;
    write_output(&a.checkpoint, &store.to_bytes())?;
    if let Some(path) = &a.log {
        write_output(path, log.to_csv().as_bytes())?;
    }
    if let Some(last) = log.epochs.last() {
        eprintln!("{}", json!({"stage": "train", "epochs": log.epochs.len(), "final_loss": last.mean_loss}));
    }
    Ok(())
}

fn test_pairs(corpus: &Corpus) -> Vec<(usize, usize)> {
    corpus.judged_pairs(Split::Test).into_iter().map(|(k, _)| k).collect()
}

fn retrieve(a: &RetrieveArgs, s: &Settings) -> Result<()> {
    let k = s.value(a.topk, "retrieve_topk", DEFAULT_TOPK)?;
    if k == 0 {
        bail!(drem::Error::InvalidArgument("--topk must be at least 1".into()));
    }
    let corpus = load_corpus(&a.corpus)?;
    let store = load_store(&a.checkpoint, &corpus)?;
    let tag = a.tag.clone().unwrap_or_else(|| store.kind().name().to_owned());
    log_stage(
        "retrieve",
        s,
        json!({"checkpoint": path_str(&a.checkpoint), "topk": k, "tag": tag, "out": path_str(&a.out)}),
    );
    require_test_split(&corpus)?;
    let run = retrieve_run(&test_pairs(&corpus), &store, &corpus, k, s.model.history_cap);
    write_output(&a.out, write_run(&run, &corpus, &tag).as_bytes())
}

fn load_qrels(path: Option<&Path>, corpus: &Corpus) -> Result<Qrels> {
    match path {
        Some(p) => Ok(parse_qrels(&read_text(p)?, corpus, &path_str(p))?),
        None => {
            require_test_split(corpus)?;
            Ok(qrels_from_corpus(corpus, Split::Test))
        }
    }
}

fn eval(a: &EvalArgs, s: &Settings) -> Result<()> {
    let cutoffs = s.cutoffs(a.cutoffs.clone())?;
    let iterations = s.value(a.iterations, "iterations", DEFAULT_ITERATIONS)?;
    log_stage(
        "eval",
        s,
        json!({
            "run": path_str(&a.run),
            "qrels": a.qrels.as_deref().map(path_str),
            "cutoffs": cutoffs,
            "compare": a.compare.as_deref().map(path_str),
            "metric": a.metric,
            "iterations": iterations,
        }),
    );
    let corpus = load_corpus(&a.corpus)?;
    let qrels = load_qrels(a.qrels.as_deref(), &corpus)?;
    let run = parse_run(&read_text(&a.run)?, &corpus, &path_str(&a.run))?;
    let report = evaluate_run(&run, &qrels, &cutoffs)?;
    let mut out = json!({"run": path_str(&a.run), "report": report});
    if let Some(other) = &a.compare {
        let run_b = parse_run(&read_text(other)?, &corpus, &path_str(other))?;
        let report_b = evaluate_run(&run_b, &qrels, &cutoffs)?;
        let x = report.metric_values(&a.metric)?;
        let y = report_b.metric_values(&a.metric)?;
        let pairs: Vec<(f64, f64)> = x.into_iter().zip(y).collect();
        let p = fisher_randomization_test(&pairs, iterations, s.seed())?;
        out["compare"] = json!({"run": path_str(other), "report": report_b, "metric": a.metric, "p_value": p});
    }
    println!("{}", report.summary_line());
    if let Some(path) = &a.out {
        let mut body = serde_json::to_string_pretty(&out)?;
        body.push('\n');
        write_output(path, body.as_bytes())?;
    }
    Ok(())
}

/// Splits the given checkpoints into the post-hoc and the intrinsic model.
fn pick_stores(
    paths: &[PathBuf],
    corpus: &Corpus,
    need_post: bool,
    need_pre: bool,
) -> Result<(Option<EmbeddingStore>, Option<EmbeddingStore>)> {
    if paths.len() > 2 {
        bail!(drem::Error::InvalidArgument("at most two checkpoints".into()));
    }
    let stores: Vec<EmbeddingStore> = paths.iter().map(|p| load_store(p, corpus)).collect::<Result<_>>()?;
    let pre = if need_pre {
        let Some(i) = stores.iter().position(|s| s.kind() == ModelKind::DremHgn) else {
            bail!(drem::Error::InvalidArgument(
                "intrinsic explanations need a drem-hgn checkpoint".into()
            ));
        };
        Some(stores[i].clone())
    } else {
        None
    };
    // Post-hoc explanations prefer the vanilla model and fall back to
    // whichever checkpoint was given.
    let post = need_post.then(|| {
        let i = stores.iter().position(|s| s.kind() == ModelKind::Drem).unwrap_or(0);
        stores[i].clone()
    });
    Ok((post, pre))
}

fn explain_config(gamma: Option<f64>, topk: Option<usize>, s: &Settings) -> Result<ExplainConfig> {
    let base = ExplainConfig::default();
    Ok(ExplainConfig {
        gamma: s.value(gamma, "gamma", base.gamma)?,
        topk: s.value(topk, "explain_topk", base.topk)?,
        history_cap: s.model.history_cap,
        ..base
    })
}

fn judged_triples(corpus: &Corpus, limit: Option<usize>) -> Vec<(usize, usize, usize)> {
    let all = corpus
        .judged_pairs(Split::Test)
        .into_iter()
        .flat_map(|((u, q), items)| items.into_iter().map(move |i| (u, q, i)));
    match limit {
        Some(n) => all.take(n).collect(),
        None => all.collect(),
    }
}

fn explain(a: &ExplainArgs, s: &Settings) -> Result<()> {
    let config = explain_config(a.gamma, a.topk, s)?;
    let mode = match a.mode {
        ModeArg::Pre => "pre",
        ModeArg::Post => "post",
        ModeArg::Both => "both",
    };
    log_stage(
        "explain",
        s,
        json!({
            "checkpoints": a.checkpoint.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
            "mode": mode,
            "gamma": config.gamma,
            "topk": config.topk,
            "templates": a.templates.as_deref().map(path_str),
            "limit": a.limit,
            "out": path_str(&a.out),
        }),
    );
    let templates = match &a.templates {
        Some(p) => {
            require_file(p)?;
            TemplateSet::load(p)?
        }
        None => TemplateSet::default(),
    };
    let corpus = load_corpus(&a.corpus)?;
    require_test_split(&corpus)?;
    let need_post = a.mode != ModeArg::Pre;
    let need_pre = a.mode != ModeArg::Post;
    let (post, pre) = pick_stores(&a.checkpoint, &corpus, need_post, need_pre)?;
    let ex = Explainer::new(&corpus, templates, config)?;
    let mut out = String::new();
    for (u, q, i) in judged_triples(&corpus, a.limit) {
        let mae = post.as_ref().map(|st| ex.mae(st, u, q, i)).transpose()?;
        let mie = pre.as_ref().map(|st| ex.mie(st, u, q, i)).transpose()?;
        let _ = writeln!(out, "{}", explanation_record(&corpus, u, q, i, mae.as_ref(), mie.as_ref()));
    }
    write_output(&a.out, out.as_bytes())
}

fn model_mrr(store: &EmbeddingStore, corpus: &Corpus, k: usize, cap: usize) -> Result<f64> {
    let run = retrieve_run(&test_pairs(corpus), store, corpus, k, cap);
    Ok(evaluate_run(&run, &qrels_from_corpus(corpus, Split::Test), &DEFAULT_CUTOFFS)?.mrr)
}

fn features(a: &FeaturesArgs, s: &Settings) -> Result<()> {
    let config = explain_config(a.gamma, None, s)?;
    let k = s.value(a.topk, "retrieve_topk", DEFAULT_TOPK)?;
    log_stage(
        "features",
        s,
        json!({
            "checkpoints": a.checkpoint.iter().map(|p| path_str(p)).collect::<Vec<_>>(),
            "gamma": config.gamma,
            "topk": k,
            "limit": a.limit,
            "out": path_str(&a.out),
        }),
    );
    if a.checkpoint.len() != 2 {
        bail!(drem::Error::InvalidArgument(
            "features needs two checkpoints: one drem and one drem-hgn".into()
        ));
    }
    let corpus = load_corpus(&a.corpus)?;
    require_test_split(&corpus)?;
    let (post, pre) = pick_stores(&a.checkpoint, &corpus, true, true)?;
    let (post, pre) = (post.expect("requested"), pre.expect("requested"));
    if post.kind() != ModelKind::Drem {
        bail!(drem::Error::InvalidArgument("features needs a drem checkpoint".into()));
    }
    let cap = config.history_cap;
    let ex = Explainer::new(&corpus, TemplateSet::default(), config)?;
    let assoc = AssociationIndex::build(&corpus);
    let mrr_post = model_mrr(&post, &corpus, k, cap)?;
    let mrr_pre = model_mrr(&pre, &corpus, k, cap)?;
    let items = corpus.registry(EntityType::Item);
    let mut cases = Vec::new();
    for (u, q, i) in judged_triples(&corpus, a.limit) {
        let mae = ex.mae(&post, u, q, i)?;
        let mie = ex.mie(&pre, u, q, i)?;
        let ctx = |store: &EmbeddingStore, mrr: f64| GroupContext {
            model_mrr: mrr,
            log_purchase_prob: log_purchase_prob(u, q, i, &corpus, store, k, cap),
        };
        cases.push(Case {
            case_id: format!("{}|{}", corpus.query_key(u, q), items.name(i)),
            mie: build_group_vector(&mie, ctx(&pre, mrr_pre), &corpus, &assoc),
            mae: build_group_vector(&mae, ctx(&post, mrr_post), &corpus, &assoc),
        });
    }
    write_output(&a.out, write_feature_csv(&cases, &group_layout()).as_bytes())
}

fn predict(a: &PredictArgs, s: &Settings) -> Result<()> {
    let folds = s.value(a.folds, "folds", DEFAULT_FOLDS)?;
    let grid = if a.no_grid { vec![GbdtParams::default()] } else { default_grid() };
    log_stage(
        "predict",
        s,
        json!({
            "features": path_str(&a.features),
            "labels": path_str(&a.labels),
            "manifest": a.manifest.as_deref().map(path_str),
            "folds": folds,
            "grid_points": grid.len(),
            "out": a.out.as_deref().map(path_str),
        }),
    );
    let (_, cases) = parse_feature_csv(&read_text(&a.features)?, &path_str(&a.features))?;
    let annotations = parse_labels(&read_text(&a.labels)?, &path_str(&a.labels))?;
    let manifest = match &a.manifest {
        Some(p) => parse_manifest(&read_text(p)?, &path_str(p))?,
        None => Manifest::new(),
    };
    let labels = aggregate_labels(&annotations, &manifest)?;
    let pairs = build_pair_dataset(&cases, &labels)?;
    let report = cross_validate(&pairs, folds, &grid, s.seed())?;
    let csv = report.to_csv();
    match &a.out {
        Some(path) => write_output(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    for r in &report.rows {
        eprintln!(
            "{}",
            json!({"stage": "predict", "aspect": r.aspect.name(), "accuracy": r.accuracy(), "params": format!("{:?}", r.params)})
        );
    }
    Ok(())
}
