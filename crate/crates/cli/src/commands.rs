use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::Utc;
use prescribe_core::agreement::{read_label_table, report_from_table, report_pair, AgreementReport, LabelKind};
use prescribe_core::corpus::{
    export_analysis, export_training, ingest, AnnotationStore, Corpus, DatasetManifest, ExportKind,
};
use prescribe_core::{AnnotationMode, AnnotatorId, Engine, Lexicon, TextUnit};
use prescribe_llm::{
    annotate_batch, BatchOptions, HttpTransport, LlmAnnotator, MockTransport, ModelConfig, RecordingTransport,
    ReplayTransport, RunLog, TemplateSet, Transport,
};
use serde_json::{json, Value};

use crate::config::{CliConfig, OutputFormat, Pair, TransportMode};
use crate::error::CliError;
use crate::output::{emit, jsonl, Rows};
use crate::{AnnotateArgs, Command};

pub fn dispatch(command: Command, mut config: CliConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Ingest { manifest, root } => cmd_ingest(&config, &manifest, root.as_deref(), out),
        Command::Annotate(args) => {
            apply_annotate_flags(&mut config, &args);
            cmd_annotate(&config, &args, out)
        }
        Command::Score { text, lexicon } => {
            if lexicon.is_some() {
                config.lexicon = lexicon;
            }
            cmd_score(&config, &text, out)
        }
        Command::Agree { pair, kind, mode, table } => cmd_agree(&config, &pair, kind, mode, table.as_deref(), out),
        Command::Export { kind, annotator, out: path } => cmd_export(&config, kind, annotator.as_deref(), &path, out),
        Command::Serve { addr, annotators, static_dir, lexicon } => {
            if lexicon.is_some() {
                config.lexicon = lexicon;
            }
            cmd_serve(&config, addr, &annotators, static_dir.as_deref())
        }
    }
}

fn apply_annotate_flags(config: &mut CliConfig, args: &AnnotateArgs) {
    if let Some(t) = args.transport {
        config.transport = t;
    }
    if args.recording.is_some() {
        config.recording.clone_from(&args.recording);
    }
    if args.lexicon.is_some() {
        config.lexicon.clone_from(&args.lexicon);
    }
    if args.templates.is_some() {
        config.templates.clone_from(&args.templates);
    }
    if let Some(m) = &args.model {
        config.model.clone_from(m);
    }
    if let Some(t) = args.temperature {
        config.temperature = t;
    }
    if let Some(c) = args.concurrency {
        config.concurrency = c;
    }
    if args.rate_limit.is_some() {
        config.rate_limit = args.rate_limit;
    }
    if let Some(r) = args.max_failure_ratio {
        config.max_failure_ratio = r;
    }
}

pub fn load_engine(config: &CliConfig) -> Result<Engine, CliError> {
    match &config.lexicon {
        Some(path) => Ok(Engine::new(Arc::new(Lexicon::load(path)?))),
        None => Ok(Engine::default()),
    }
}

pub fn load_corpus(config: &CliConfig) -> Result<Corpus, CliError> {
    let path = config.corpus_path();
    if !path.exists() {
        return Err(CliError::Data(format!(
            "no corpus at {}; run `prescribe ingest <manifest>` first",
            path.display()
        )));
    }
    Ok(Corpus::load_jsonl(&path)?)
}

fn open_store(config: &CliConfig) -> Result<AnnotationStore, CliError> {
    std::fs::create_dir_all(&config.workspace)
        .map_err(|e| CliError::Data(format!("cannot create workspace {}: {e}", config.workspace.display())))?;
    Ok(AnnotationStore::open(config.store_path())?)
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Data(format!("cannot start async runtime: {e}")))
}

fn cmd_ingest(
    config: &CliConfig,
    manifest_path: &Path,
    root: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let root =
        root.map(Path::to_path_buf).unwrap_or_else(|| manifest_path.parent().unwrap_or(Path::new("")).to_path_buf());
    let (corpus, report) = ingest(&manifest, &root)?;
    std::fs::create_dir_all(&config.workspace)
        .map_err(|e| CliError::Data(format!("cannot create workspace {}: {e}", config.workspace.display())))?;
    corpus.save_jsonl(config.corpus_path())?;
    match config.output {
        OutputFormat::Table => emit(out, &report.render()),
        OutputFormat::Jsonl => jsonl(out, &report),
        OutputFormat::Csv => {
            let mut rows = Rows::new(&["source", "loaded", "kept", "dropped"]);
            for s in &report.sources {
                rows.push(vec![json!(s.name), json!(s.loaded), json!(s.kept), json!(s.dropped.len())]);
            }
            rows.push(vec![
                json!("total"),
                json!(report.total_loaded),
                json!(report.total_kept),
                json!(report.total_loaded - report.total_kept),
            ]);
            rows.write(OutputFormat::Csv, out)
        }
    }
}

fn build_transport(config: &CliConfig, engine: &Engine, units: &[TextUnit]) -> Result<Arc<dyn Transport>, CliError> {
    let timeout = Duration::from_secs(config.timeout_secs);
    Ok(match config.transport {
        TransportMode::Mock => Arc::new(MockTransport::from_engine(engine.clone(), units)),
        TransportMode::Live => Arc::new(HttpTransport::from_env(&config.base_url, timeout)?),
        TransportMode::Record => {
            let path = config.recording_path()?;
            Arc::new(RecordingTransport::new(HttpTransport::from_env(&config.base_url, timeout)?, path)?)
        }
        TransportMode::Replay => Arc::new(ReplayTransport::load(config.recording_path()?)?),
    })
}

fn cmd_annotate(config: &CliConfig, args: &AnnotateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.engine && args.mode == AnnotationMode::Descriptive {
        return Err(CliError::Usage("the rule engine only produces prescriptive labels".into()));
    }
    if matches!(config.transport, TransportMode::Record | TransportMode::Replay) {
        config.recording_path()?;
    }
    let engine = load_engine(config)?;
    let corpus = load_corpus(config)?;
    let mut store = open_store(config)?;

    let mut summary: Vec<(&str, Value)> = Vec::new();
    let annotator = if args.engine {
        let id = engine.annotator_id();
        let mut added = 0usize;
        for unit in corpus.units() {
            if !store.contains(unit.id(), &id, AnnotationMode::Prescriptive) {
                store.append(engine.annotate(unit, Utc::now()))?;
                added += 1;
            }
        }
        summary.push(("annotator", json!(id.to_string())));
        summary.push(("units", json!(corpus.len())));
        summary.push(("annotated", json!(added)));
        summary.push(("skipped", json!(corpus.len() - added)));
        id
    } else {
        let templates = match &config.templates {
            Some(path) => TemplateSet::load(path)?,
            None => TemplateSet::default(),
        };
        let model = ModelConfig { model: config.model.clone(), temperature: config.temperature };
        let transport = build_transport(config, &engine, corpus.units())?;
        let annotator = LlmAnnotator::new(Arc::new(templates), model, transport);
        let options = BatchOptions {
            concurrency: config.concurrency,
            rate_per_minute: config.rate_limit,
            max_failure_ratio: config.max_failure_ratio,
        };
        let mut run_log = RunLog::open(config.run_log_path())?;
        let report = runtime()?.block_on(annotate_batch(
            &annotator,
            corpus.units(),
            args.mode,
            &mut store,
            Some(&mut run_log),
            &options,
        ))?;
        let s = &report.summary;
        let id = annotator.annotator_id();
        summary.push(("annotator", json!(id.to_string())));
        summary.push(("units", json!(s.total)));
        summary.push(("annotated", json!(s.annotated)));
        summary.push(("skipped", json!(s.skipped)));
        summary.push(("failed", json!(s.failed)));
        summary.push(("unparseable", json!(s.unparseable)));
        summary.push(("requests", json!(s.requests)));
        summary.push(("failure_ratio", json!(s.failure_ratio)));
        if s.exceeds_threshold() {
            write_summary(config.output, &summary, &mut counts(&store, &corpus, &id, args.mode), out)?;
            let first = report.outcomes.iter().find_map(|o| o.error.clone()).unwrap_or_default();
            let message = format!(
                "failure ratio {:.3} exceeds the allowed {:.3} (first error: {first})",
                s.failure_ratio, s.max_failure_ratio
            );
            return Err(if s.failed > 0 { CliError::Transport(message) } else { CliError::Data(message) });
        }
        id
    };
    write_summary(config.output, &summary, &mut counts(&store, &corpus, &annotator, args.mode), out)
}

/// Label tallies over the annotator's latest records for corpus units.
fn counts(
    store: &AnnotationStore,
    corpus: &Corpus,
    annotator: &AnnotatorId,
    mode: AnnotationMode,
) -> BTreeMap<String, usize> {
    let mut tally = BTreeMap::new();
    for record in store.records_for(annotator, Some(mode)) {
        if corpus.get(record.unit_id()).is_none() {
            continue;
        }
        if let Some(di) = record.di() {
            *tally.entry(format!("di={di}")).or_default() += 1;
        }
        if let Some(ag) = record.ag() {
            *tally.entry(format!("ag={ag}")).or_default() += 1;
        }
        *tally.entry(format!("toxic={}", record.toxic())).or_default() += 1;
    }
    tally
}

fn write_summary(
    format: OutputFormat,
    summary: &[(&str, Value)],
    tally: &mut BTreeMap<String, usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    for key in ["toxic=true", "toxic=false"] {
        tally.entry(key.to_owned()).or_default();
    }
    let mut rows = Rows::new(&["key", "value"]);
    for (k, v) in summary {
        rows.push(vec![json!(k), v.clone()]);
    }
    for (k, v) in tally.iter() {
        rows.push(vec![json!(k), json!(v)]);
    }
    if format == OutputFormat::Jsonl {
        let object: serde_json::Map<String, Value> =
            rows.rows.into_iter().map(|r| (r[0].as_str().unwrap_or_default().to_owned(), r[1].clone())).collect();
        return jsonl(out, &object);
    }
    rows.write(format, out)
}

fn cmd_score(config: &CliConfig, text: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let engine = load_engine(config)?;
    let unit = TextUnit::new("input", text, "cli");
    let a = engine.analyze(&unit);
    let role = |f: &prescribe_core::AggressionFinding| {
        serde_json::to_value(f.role).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    };
    let surface = |f: &prescribe_core::AggressionFinding| f.span.map(|s| &text[s.start..s.end]);
    match config.output {
        OutputFormat::Jsonl => jsonl(out, &json!({"text": text, "analysis": a})),
        OutputFormat::Table => {
            let mut s = format!("text\t{text}\nfindings\t{}\n", a.aggression.findings.len());
            for f in &a.aggression.findings {
                let span = f.span.map_or_else(|| "whole text".to_owned(), |sp| format!("{}..{}", sp.start, sp.end));
                s.push_str(&format!(
                    "  {}\t{span}\t{}\t{}\t+{}\n",
                    f.category,
                    surface(f).map_or_else(String::new, |t| format!("\"{t}\"")),
                    role(f),
                    f.weight()
                ));
            }
            s.push_str(&format!("score\t{}\nlevel\t{}\n", a.aggression.score, a.aggression.level));
            let alternates: Vec<String> = a.di.alternates.iter().map(ToString::to_string).collect();
            s.push_str(&format!(
                "DI\t{}{}\n",
                a.di.primary,
                if alternates.is_empty() { String::new() } else { format!(" (alternates {})", alternates.join(",")) }
            ));
            for e in &a.di.evidence {
                let rule =
                    serde_json::to_value(e.rule).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
                s.push_str(&format!(
                    "  {rule}\t{}..{}\t\"{}\"{}\n",
                    e.span.start,
                    e.span.end,
                    &text[e.span.start..e.span.end],
                    if e.suppressed { "\tsuppressed" } else { "" }
                ));
            }
            s.push_str(&format!("toxic\t{}\n", a.toxic));
            emit(out, &s)
        }
        OutputFormat::Csv => {
            let mut rows = Rows::new(&["text", "score", "level", "di", "toxic", "findings"]);
            let findings: Vec<String> = a
                .aggression
                .findings
                .iter()
                .map(|f| match f.span {
                    Some(sp) => format!("{}@{}..{}:{}", f.category, sp.start, sp.end, role(f)),
                    None => format!("{}:{}", f.category, role(f)),
                })
                .collect();
            rows.push(vec![
                json!(text),
                json!(a.aggression.score.to_string()),
                json!(a.aggression.level.value()),
                json!(a.di.primary.value()),
                json!(a.toxic),
                json!(findings.join(";")),
            ]);
            rows.write(OutputFormat::Csv, out)
        }
    }
}

fn cmd_agree(
    config: &CliConfig,
    pairs: &[Pair],
    kind: LabelKind,
    mode: AnnotationMode,
    table: Option<&Path>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut reports = Vec::with_capacity(pairs.len());
    if let Some(path) = table {
        let table = read_label_table(path)?;
        let mut columns: Vec<String> = table.keys().map(ToString::to_string).collect();
        columns.sort();
        for Pair(a, b) in pairs {
            let report = report_from_table(&table, &AnnotatorId::new(a.clone()), &AnnotatorId::new(b.clone()), kind)
                .ok_or_else(|| {
                let missing = if table.contains_key(&AnnotatorId::new(a.clone())) { b } else { a };
                CliError::Data(format!("annotator `{missing}` not found; available: {}", columns.join(", ")))
            })??;
            reports.push(report);
        }
    } else {
        let path = config.store_path();
        if !path.exists() {
            return Err(CliError::Data(format!("no annotations at {}", path.display())));
        }
        let store = AnnotationStore::open_read_only(&path)?;
        let known = store.annotators();
        for Pair(a, b) in pairs {
            for name in [a, b] {
                if !known.contains(&AnnotatorId::new(name.clone())) {
                    return Err(store.unknown_annotator(name).into());
                }
            }
            let ra = store.records_for(&AnnotatorId::new(a.clone()), Some(mode));
            let rb = store.records_for(&AnnotatorId::new(b.clone()), Some(mode));
            reports.push(report_pair(&ra, &rb, kind)?);
        }
    }
    write_reports(config.output, &reports, out)
}

fn write_reports(format: OutputFormat, reports: &[AgreementReport], out: &mut dyn Write) -> Result<(), CliError> {
    match format {
        OutputFormat::Table => {
            let text: Vec<String> = reports.iter().map(AgreementReport::render_table).collect();
            emit(out, &text.join("\n"))
        }
        OutputFormat::Jsonl => reports.iter().try_for_each(|r| jsonl(out, r)),
        OutputFormat::Csv => {
            let mut rows =
                Rows::new(&["a", "b", "kind", "n", "unmatched", "cohen_kappa", "gwet_ac1", "percent_agreement"]);
            for r in reports {
                rows.push(vec![
                    json!(r.pair.0),
                    json!(r.pair.1),
                    json!(r.label_kind.to_string()),
                    json!(r.n),
                    json!(r.unmatched),
                    r.cohen_kappa.value().map_or(json!("undefined"), |v| json!(v)),
                    r.gwet_ac1.value().map_or(json!("undefined"), |v| json!(v)),
                    json!(r.percent_agreement * 100.0),
                ]);
            }
            rows.write(OutputFormat::Csv, out)
        }
    }
}

fn cmd_export(
    config: &CliConfig,
    kind: ExportKind,
    annotator: Option<&str>,
    path: &Path,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let corpus = load_corpus(config)?;
    let store = AnnotationStore::open_read_only(config.store_path())?;
    let written = match kind {
        ExportKind::Analysis => export_analysis(&store, &corpus, annotator, path)?,
        ExportKind::Training => export_training(&store, &corpus, annotator, path)?.len(),
    };
    let summary = [("rows", json!(written)), ("out", json!(path.display().to_string()))];
    write_summary(config.output, &summary, &mut BTreeMap::new(), out)
}

fn cmd_serve(
    config: &CliConfig,
    addr: std::net::SocketAddr,
    annotators: &Path,
    static_dir: Option<&Path>,
) -> Result<(), CliError> {
    let service_config =
        prescribe_service::ServiceConfig::load(annotators).map_err(|e| CliError::Data(e.to_string()))?;
    let engine = load_engine(config)?;
    let corpus = load_corpus(config)?;
    let store = open_store(config)?;
    let state = prescribe_service::AppState::new(corpus, store, engine, service_config);
    let app = prescribe_service::router(state, static_dir);
    runtime()?
        .block_on(prescribe_service::serve(addr, app))
        .map_err(|e| CliError::Transport(format!("server on {addr} failed: {e}")))
}
