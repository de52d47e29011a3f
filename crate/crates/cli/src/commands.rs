use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cmo_core::config::{embedder_from_id, LlmKind};
use cmo_core::context::{
    classify_commit_type_with_retry, extract_contexts, index_commit, CommitType, CommitTypeClassifier, ContextDeps,
    ContextItem, ContextKind, FixtureForge, ForgeClient, HttpForge, LlmSummarizer, Provenance,
};
use cmo_core::diff::{parse_unified_diff, CommitDiff, Repository};
use cmo_core::llm::{HttpBackend, LlmClient, LlmError, MockBackend, ResponseCache, BASE_URL_ENV};
use cmo_core::optimizer::{generate_initial_message, optimize, LlmUpdater, OptimizeDeps};
use cmo_core::quality::LlmMetricScorer;
use cmo_core::retrieval::{
    build_corpus, read_corpus_inputs, BuildOptions, LlmWhatWhyClassifier, RuleClassifier, WhatWhyClassifier,
};
use cmo_core::{Config, CorpusStore, Error, Evaluator};

use crate::{BuildCorpusArgs, Cli, Command, ExtractArgs, OptimizeArgs, ScoreArgs};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(Error),
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

type Result<T> = std::result::Result<T, Failure>;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Optimize(a) => run_optimize(&cfg, a),
        Command::BuildCorpus(a) => run_build_corpus(&cfg, a),
        Command::Score(a) => run_score(&cfg, a),
        Command::Extract(a) => run_extract(&cfg, a),
    }
}

/// File, then environment, then flags.
fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = Config::resolve(cli.config.as_deref(), |k| std::env::var(k).ok())
        .map_err(|e| Failure::Usage(Error::from(e).to_string()))?;
    if let Some(script) = &cli.mock_script {
        cfg.backends.llm.kind = LlmKind::Mock;
        cfg.backends.llm.mock_script = Some(script.clone());
    }
    if let Some(m) = &cli.model {
        cfg.backends.llm.model = m.clone();
    }
    if let Some(d) = &cli.cache_dir {
        cfg.paths.cache = Some(d.clone());
    }
    Ok(cfg)
}

fn llm_client(cfg: &Config) -> Result<Arc<LlmClient>> {
    let llm = &cfg.backends.llm;
    let backend: Arc<dyn cmo_core::llm::ChatBackend> = match llm.kind {
        LlmKind::Mock => {
            let path = llm
                .mock_script
                .as_ref()
                .ok_or_else(|| Failure::Usage("backends.llm.kind = \"mock\" needs mock_script".into()))?;
            Arc::new(MockBackend::from_file(path)?)
        }
        LlmKind::Http => {
            let url = llm.base_url.as_deref().ok_or_else(|| {
                Failure::Runtime(Error::Llm(LlmError::Unavailable(format!(
                    "no LLM endpoint configured (set {BASE_URL_ENV} or backends.llm.base_url)"
                ))))
            })?;
            Arc::new(HttpBackend::new(url, llm.api_key.clone(), llm.timeout())?)
        }
    };
    let cache = match &cfg.paths.cache {
        Some(dir) => ResponseCache::on_disk(dir),
        None => ResponseCache::in_memory(),
    };
    Ok(Arc::new(
        LlmClient::new(backend)
            .with_cache(Some(Arc::new(cache)))
            .with_retry(llm.retry),
    ))
}

fn forge(cfg: &Config) -> Result<Option<Box<dyn ForgeClient>>> {
    let f = &cfg.backends.forge;
    if let Some(dir) = &f.fixture_dir {
        return Ok(Some(Box::new(FixtureForge::new(dir))));
    }
    match &f.url {
        Some(url) => {
            let client = HttpForge::new(url, f.token.clone(), cfg.backends.llm.timeout()).map_err(|e| {
                Failure::Runtime(Error::Context(cmo_core::context::ContextError::ForgeUnreachable(
                    e.to_string(),
                )))
            })?;
            Ok(Some(Box::new(client)))
        }
        None => Ok(None),
    }
}

fn load_store(path: &Path) -> Result<Arc<CorpusStore>> {
    Ok(Arc::new(CorpusStore::load(path)?))
}

fn evaluator(cfg: &Config, client: &Arc<LlmClient>, corpus: Option<&Path>) -> Result<Evaluator> {
    let store = corpus.map(load_store).transpose()?;
    let scorer = LlmMetricScorer::new(client.clone(), cfg.evaluator.scorers.resolve(&cfg.backends.llm.model))
        .with_diff_token_budget(cfg.evaluator.diff_token_budget);
    Ok(Evaluator::new(
        store,
        cfg.retrieval.query_config(),
        embedder_from_id(&cfg.retrieval.diff_embedder, cfg)?,
        embedder_from_id(&cfg.retrieval.text_embedder, cfg)?,
        Arc::new(scorer),
        cfg.evaluator.weights,
    )?)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e).into())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e).into())
}

fn print_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("stdout", e).into())
}

fn classify(cfg: &Config, client: &Arc<LlmClient>, diff: &CommitDiff, message: &str) -> Option<CommitType> {
    let classifier =
        CommitTypeClassifier::new(client.clone(), &cfg.backends.llm.model).with_taxonomy(cfg.context.taxonomy.clone());
    match classify_commit_type_with_retry(diff, message, &classifier) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("commit type unavailable: {e}");
            None
        }
    }
}

fn run_optimize(cfg: &Config, a: &OptimizeArgs) -> Result<()> {
    let corpus = a
        .corpus
        .clone()
        .or_else(|| cfg.retrieval.corpus.clone())
        .ok_or_else(|| Failure::Usage("--corpus is required (or set retrieval.corpus)".into()))?;
    let mut ocfg = cfg.optimizer.clone();
    if let Some(n) = a.step_limit {
        ocfg.step_limit = n;
    }
    ocfg.validate()?;

    let client = llm_client(cfg)?;
    let eval = evaluator(cfg, &client, Some(&corpus))?;
    let repo = Repository::open(&a.repo)?;
    let loaded = repo.load_commit(&a.commit)?;
    let diff = &loaded.diff;

    let exemplars = if a.blank {
        eval.exemplars(diff)?
    } else {
        eval.exemplars(diff).unwrap_or_else(|e| {
            log::warn!("no exemplars: {e}");
            Vec::new()
        })
    };
    let initial = if let Some(m) = &a.message {
        m.clone()
    } else if let Some(p) = &a.from {
        read_file(p)?
    } else if a.blank {
        generate_initial_message(
            diff,
            &exemplars,
            &client,
            &cfg.backends.llm.model,
            &ocfg.format_template,
        )?
    } else {
        loaded.message.clone()
    };

    let (snapshots, index) = index_commit(&repo, &loaded)?;
    let summarizer = LlmSummarizer::new(client.clone(), &cfg.backends.llm.model);
    let forge = forge(cfg)?;
    let deps = ContextDeps {
        summarizer: Some(&summarizer),
        forge: forge.as_deref(),
        issue_budget: cfg.context.issue_budget,
    };
    let contexts = extract_contexts(diff, &snapshots, &index, &initial, &deps, &ocfg.kinds);
    for d in &contexts.diagnostics {
        log::info!("{d}");
    }
    let items: Vec<ContextItem> = contexts.iter().cloned().collect();
    let commit_type = classify(cfg, &client, diff, &initial);
    let updater = LlmUpdater::new(client.clone(), &cfg.backends.llm.model);
    let result = optimize(
        diff,
        &initial,
        &items,
        &ocfg,
        &OptimizeDeps {
            evaluator: &eval,
            updater: &updater,
            exemplars: &exemplars,
            commit_type: commit_type.as_ref(),
        },
    )?;

    if let Some(path) = a.trace.as_ref().or(cfg.paths.trace.as_ref()) {
        write_file(path, &result.trace_jsonl())?;
    }
    let mut message = result.message.clone();
    if !message.ends_with('\n') {
        message.push('\n');
    }
    if let Some(out) = &a.out {
        write_file(out, &message)?;
    }
    eprintln!(
        "quality: {} (initial {:.4}, {} steps, {})",
        result.quality.to_json_with_total(),
        result.initial_score,
        result.steps_used,
        result.stop_reason
    );
    print_stdout(&message)
}

fn run_build_corpus(cfg: &Config, a: &BuildCorpusArgs) -> Result<()> {
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let file = fs::File::open(&a.input).map_err(|e| Error::io(a.input.display().to_string(), e))?;
    let inputs = read_corpus_inputs(BufReader::new(file))?;
    let classifier: Box<dyn WhatWhyClassifier> = if a.rule_filter {
        Box::new(RuleClassifier)
    } else {
        Box::new(LlmWhatWhyClassifier::new(llm_client(cfg)?, &cfg.backends.llm.model))
    };
    let diff_embedder = embedder_from_id(&cfg.retrieval.diff_embedder, cfg)?;
    let text_embedder = embedder_from_id(&cfg.retrieval.text_embedder, cfg)?;
    let (_, report) = build_corpus(
        inputs,
        diff_embedder.as_ref(),
        text_embedder.as_ref(),
        classifier.as_ref(),
        &a.out,
        BuildOptions { jobs: a.jobs },
    )?;
    for d in &report.diagnostics {
        eprintln!("skipped: {d}");
    }
    print_stdout(&format!(
        "{}\n",
        serde_json::to_string(&report).expect("report serializes")
    ))
}

fn run_score(cfg: &Config, a: &ScoreArgs) -> Result<()> {
    let diff = parse_unified_diff(&read_file(&a.diff)?)?;
    let message = read_file(&a.message)?;
    let corpus: Option<PathBuf> = a.corpus.clone().or_else(|| cfg.retrieval.corpus.clone());
    let client = llm_client(cfg)?;
    let eval = evaluator(cfg, &client, corpus.as_deref())?;
    let e = cmo_core::quality::Evaluate::evaluate(&eval, &diff, message.trim_end())?;
    if e.diff_truncated {
        eprintln!(
            "note: diff truncated to {} tokens for the scorers",
            cfg.evaluator.diff_token_budget
        );
    }
    print_stdout(&format!("{}\n", e.quality.to_json_with_total()))
}

fn run_extract(cfg: &Config, a: &ExtractArgs) -> Result<()> {
    let kinds: Vec<ContextKind> = if a.kinds.is_empty() {
        ContextKind::ALL.to_vec()
    } else {
        a.kinds
            .iter()
            .map(|k| {
                k.parse::<ContextKind>()
                    .map_err(|e| Failure::Usage(format!("--kinds: {e}")))
            })
            .collect::<Result<_>>()?
    };
    let needs_llm = kinds.iter().any(|k| {
        matches!(
            k,
            ContextKind::MethodBodySummary
                | ContextKind::ClassBodySummary
                | ContextKind::CalleeKnowledge
                | ContextKind::CommitType
        )
    });
    // Summaries are optional: without a backend callee items carry raw bodies
    // and summary kinds are reported as unavailable.
    let client = if needs_llm {
        match llm_client(cfg) {
            Ok(c) => Some(c),
            Err(Failure::Runtime(e)) => {
                log::warn!("{e}");
                None
            }
            Err(usage) => return Err(usage),
        }
    } else {
        None
    };
    let repo = Repository::open(&a.repo)?;
    let loaded = repo.load_commit(&a.commit)?;
    let (snapshots, index) = index_commit(&repo, &loaded)?;
    let summarizer = client
        .as_ref()
        .map(|c| LlmSummarizer::new(c.clone(), &cfg.backends.llm.model));
    let forge = forge(cfg)?;
    let deps = ContextDeps {
        summarizer: summarizer.as_ref().map(|s| s as _),
        forge: forge.as_deref(),
        issue_budget: cfg.context.issue_budget,
    };
    let set = extract_contexts(&loaded.diff, &snapshots, &index, &loaded.message, &deps, &kinds);
    for d in &set.diagnostics {
        eprintln!("{d}");
    }
    let mut items: Vec<ContextItem> = set.iter().cloned().collect();
    if kinds.contains(&ContextKind::CommitType) {
        if let Some(t) = client
            .as_ref()
            .and_then(|c| classify(cfg, c, &loaded.diff, &loaded.message))
        {
            items.push(ContextItem {
                kind: ContextKind::CommitType,
                payload: t.label,
                locator: None,
                provenance: Provenance::new("commit_type").with("raw_response", &t.raw_response),
            });
        }
    }
    let json = serde_json::to_string_pretty(&items).expect("items serialize");
    print_stdout(&format!("{json}\n"))
}
