use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use arcdex::baseline::{
    agreement, baseline1_vectors, baseline2_vectors, cluster_members, cosine_matrix, load_labels,
    partition_from_similarity, AgreementReport,
};
use arcdex::catalogue::{nearest_cluster, search_similar, Query};
use arcdex::cluster::{
    cluster_all, matrix_mode_linkage, resolve_threshold, Cluster, ClusterReport,
};
use arcdex::ingest::{load_alias_table, load_cmu_summaries, load_plain_text};
use arcdex::pipeline::{
    analyze_book, analyze_characters, analyze_corpus, index_corpus, load_corpus_dir, Resources,
};
use arcdex::series::align_lengths;
use arcdex::spsi::{spsi, spsi_breakdown, spsi_matrix};
use arcdex::synth::{generate, GenSpec};
use arcdex::{
    AliasTable, BookDocument, Catalogue, DynamicThreshold, Error, PipelineConfig, SentimentSeries,
    SimilarityMatrix,
};
use serde_json::{json, Value};

use crate::{BookArgs, CliError, CliResult, Command, GlobalOpts};

struct Out {
    json: bool,
}

impl Out {
    /// Prints `value` as JSON with `--json`, otherwise the human summary.
    fn emit(&self, value: Value, human: &str) -> CliResult {
        if self.json {
            let text = serde_json::to_string_pretty(&value).map_err(Error::from)?;
            println!("{text}");
        } else {
            print!("{human}");
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: &str) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, body).map_err(|e| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v).map_err(Error::from)?)
}

pub(crate) fn dispatch(command: Command, cfg: &PipelineConfig, global: &GlobalOpts) -> CliResult {
    let out = Out { json: global.json };
    match command {
        Command::Ingest { corpus, out: path } => ingest(&out, &corpus, &path),
        Command::Characters(args) => characters(&out, cfg, &args),
        Command::Pivots(args) => pivots(&out, cfg, &args),
        Command::Series(args) => series(&out, cfg, &args),
        Command::Spsi {
            series,
            corpus,
            out: path,
        } => match corpus {
            Some(corpus) => spsi_corpus(&out, cfg, &corpus, path.as_deref()),
            None if series.len() == 2 => spsi_pair(&out, &series[0], &series[1]),
            None => Err(CliError::Usage(
                "spsi needs two series CSVs or --corpus".to_string(),
            )),
        },
        Command::Cluster {
            matrix,
            corpus,
            dt,
            mirror_lower,
            out: path,
        } => {
            let mut cfg = cfg.clone();
            if let Some(v) = dt {
                cfg.threshold = DynamicThreshold::fixed(v);
                cfg.threshold
                    .validate()
                    .map_err(|e| CliError::Usage(e.to_string()))?;
            }
            match (matrix, corpus) {
                (Some(m), None) => cluster_matrix(&out, &cfg, &m, mirror_lower, path.as_deref()),
                (None, Some(c)) => cluster_corpus(&out, &cfg, &c, path.as_deref()),
                _ => Err(CliError::Usage(
                    "cluster needs --matrix or --corpus".to_string(),
                )),
            }
        }
        Command::Index { corpus, out: path } => index(&out, cfg, &corpus, &path),
        Command::Search {
            catalogue,
            like,
            pattern,
            k,
            include_self,
        } => search(
            &out,
            &catalogue,
            like.as_deref(),
            pattern.as_deref(),
            k,
            include_self,
        ),
        Command::Eval {
            corpus,
            labels,
            baselines,
        } => eval(&out, cfg, &corpus, &labels, baselines),
        Command::Synth {
            out: dir,
            books_per_archetype,
            sigma,
        } => synth(
            &out,
            cfg,
            global.seed.unwrap_or(GenSpec::default().seed),
            &dir,
            books_per_archetype,
            sigma,
        ),
    }
}

/// Loads a corpus from a directory, a CMU summaries TSV or an ingested
/// JSON store.
fn load_corpus(path: &Path) -> CliResult<Vec<BookDocument>> {
    if path.is_dir() {
        return Ok(load_corpus_dir(path)?);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?;
            Ok(serde_json::from_str(&text).map_err(Error::from)?)
        }
        Some("tsv") | Some("txt") => Ok(load_cmu_summaries(path)?.documents),
        _ if !path.exists() => Err(CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        })),
        _ => Err(CliError::Usage(format!(
            "{} is not a corpus directory, .tsv or .json store",
            path.display()
        ))),
    }
}

fn ingest(out: &Out, corpus: &Path, path: &Path) -> CliResult {
    let (docs, skipped) = if corpus.is_file() && corpus.extension().is_some_and(|e| e == "tsv") {
        let import = load_cmu_summaries(corpus)?;
        (import.documents, import.skip_reasons)
    } else {
        (load_corpus(corpus)?, Vec::new())
    };
    write_file(path, &serde_json::to_string(&docs).map_err(Error::from)?)?;
    let mut human = format!(
        "ingested {} documents into {} ({} rows skipped)\n",
        docs.len(),
        path.display(),
        skipped.len()
    );
    for (line, reason) in &skipped {
        let _ = writeln!(human, "  line {line}: {reason}");
    }
    out.emit(
        json!({
            "documents": docs.len(),
            "out": path.display().to_string(),
            "skipped": skipped.iter().map(|(l, r)| json!({"line": l, "reason": r})).collect::<Vec<_>>(),
        }),
        &human,
    )
}

fn load_book(cfg: &PipelineConfig, args: &BookArgs) -> CliResult<(BookDocument, AliasTable)> {
    let id = args
        .book
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("book")
        .to_string();
    let doc = load_plain_text(&args.book, &id, &id)?;
    let aliases = match (&args.aliases, &cfg.alias_dir) {
        (Some(p), _) => load_alias_table(p)?,
        (None, Some(dir)) if dir.join(format!("{id}.aliases")).is_file() => {
            load_alias_table(dir.join(format!("{id}.aliases")))?
        }
        _ => AliasTable::new(),
    };
    Ok((doc, aliases))
}

fn characters(out: &Out, cfg: &PipelineConfig, args: &BookArgs) -> CliResult {
    let (doc, aliases) = load_book(cfg, args)?;
    let analysis = analyze_characters(&doc, &aliases, cfg)?;
    let report = analysis.report();
    let value = to_json(&report)?;
    if let Some(path) = &args.out {
        write_file(
            path,
            &serde_json::to_string_pretty(&value).map_err(Error::from)?,
        )?;
    }
    let mut human = format!(
        "{}: {} characters, {} prime, core {{{}}}{}\n",
        doc.book_id,
        report.len(),
        analysis.primes.len(),
        analysis
            .core
            .members
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join(", "),
        if analysis.core.fallback {
            " (fallback)"
        } else {
            ""
        }
    );
    for e in report.iter().filter(|e| e.prime) {
        let _ = writeln!(
            human,
            "  {:<20} {:>5}{}",
            e.canonical_name,
            e.count,
            if e.core { "  core" } else { "" }
        );
    }
    out.emit(value, &human)
}

fn pivots(out: &Out, cfg: &PipelineConfig, args: &BookArgs) -> CliResult {
    let (doc, aliases) = load_book(cfg, args)?;
    let a = analyze_book(&doc, &Resources::load(cfg)?.lexicon, &aliases, cfg)?;
    let value = json!({
        "book_id": a.book_id,
        "predominant": [a.predominant.0, a.predominant.1],
        "pairs": to_json(&a.pairs)?,
    });
    if let Some(path) = &args.out {
        write_file(
            path,
            &serde_json::to_string_pretty(&value).map_err(Error::from)?,
        )?;
    }
    let mut human = format!(
        "{}: predominant pair ({}, {})\n",
        a.book_id, a.predominant.0, a.predominant.1
    );
    for p in &a.pairs {
        let _ = writeln!(
            human,
            "  ({}, {}): {} pivots",
            p.pair.0,
            p.pair.1,
            p.pivots.len()
        );
        for v in &p.pivots {
            let _ = writeln!(
                human,
                "    block {:>4}  position {:.4}  sentiment {:.4}  weight {:.4}",
                v.block_index, v.position, v.sentiment, v.occurrence_weight
            );
        }
    }
    out.emit(value, &human)
}

fn series(out: &Out, cfg: &PipelineConfig, args: &BookArgs) -> CliResult {
    let (doc, aliases) = load_book(cfg, args)?;
    let a = analyze_book(&doc, &Resources::load(cfg)?.lexicon, &aliases, cfg)?;
    let csv = a.series.to_csv();
    let human = match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            format!(
                "{}: {} pivots for ({}, {}) written to {}\n",
                a.book_id,
                a.series.len(),
                a.predominant.0,
                a.predominant.1,
                path.display()
            )
        }
        None => csv,
    };
    out.emit(to_json(&a.series)?, &human)
}

fn load_series(path: &Path) -> CliResult<SentimentSeries> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    Ok(SentimentSeries::load_csv(path, id)?)
}

fn spsi_pair(out: &Out, a: &Path, b: &Path) -> CliResult {
    let (sa, sb) = (load_series(a)?, load_series(b)?);
    let (xa, xb) = align_lengths(&sa, &sb)?;
    let breakdown = spsi_breakdown(&xa.values(), &xb.values())?;
    let value = spsi(&xa.values(), &xb.values())?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.6}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let human = format!(
        "spsi = {value:.6}\nps   = {:.6}\nsd   = {:.6}\nrs   = {}\ncf   = {}\nn    = {}\n",
        breakdown.ps,
        breakdown.sd,
        fmt(&breakdown.rs),
        fmt(&breakdown.cf),
        fmt(&breakdown.n)
    );
    out.emit(
        json!({ "spsi": value, "breakdown": to_json(&breakdown)? }),
        &human,
    )
}

fn analyzed_corpus(
    cfg: &PipelineConfig,
    corpus: &Path,
) -> CliResult<(
    Vec<arcdex::pipeline::BookAnalysis>,
    Vec<arcdex::pipeline::Skipped>,
)> {
    let docs = load_corpus(corpus)?;
    Ok(analyze_corpus(&docs, &Resources::load(cfg)?, cfg)?)
}

fn spsi_corpus(out: &Out, cfg: &PipelineConfig, corpus: &Path, path: Option<&Path>) -> CliResult {
    let (analyses, skipped) = analyzed_corpus(cfg, corpus)?;
    let matrix = spsi_matrix(analyses.iter().map(|a| a.series_ref()))?;
    let csv = matrix.to_csv();
    let human = match path {
        Some(p) => {
            write_file(p, &csv)?;
            format!(
                "{}x{} matrix written to {} ({} books skipped)\n",
                matrix.len(),
                matrix.len(),
                p.display(),
                skipped.len()
            )
        }
        None => csv,
    };
    out.emit(
        json!({
            "ids": matrix.ids(),
            "values": (0..matrix.len()).map(|i| (0..matrix.len()).map(|j| matrix.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "skipped": to_json(&skipped)?,
        }),
        &human,
    )
}

fn member_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Clusters largest first, members in natural order.
fn partition_text(clusters: &[Cluster]) -> String {
    let mut groups: Vec<Vec<&str>> = clusters
        .iter()
        .map(|c| {
            let mut m: Vec<&str> = c.members.iter().map(String::as_str).collect();
            m.sort_by(|a, b| member_order(a, b));
            m
        })
        .collect();
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| member_order(a[0], b[0])));
    groups
        .iter()
        .map(|g| format!("{{{}}}", g.join(",")))
        .collect::<Vec<_>>()
        .join(", ")
}

fn cluster_output(
    out: &Out,
    threshold: f64,
    clusters: &[Cluster],
    path: Option<&Path>,
) -> CliResult {
    let report = ClusterReport::new(threshold, clusters);
    let value = to_json(&report)?;
    if let Some(p) = path {
        write_file(
            p,
            &serde_json::to_string_pretty(&value).map_err(Error::from)?,
        )?;
    }
    let mut human = format!("threshold {threshold:.6}, {} clusters\n", clusters.len());
    let mut trace: Vec<_> = clusters.iter().flat_map(|c| &c.merge_trace).collect();
    trace.sort_by(|a, b| b.similarity.total_cmp(&a.similarity));
    for r in trace {
        let _ = writeln!(
            human,
            "  merge {{{}}} + {{{}}} at {:.6}",
            r.left_members.join(","),
            r.right_members.join(","),
            r.similarity
        );
    }
    let _ = writeln!(human, "partition: {}", partition_text(clusters));
    out.emit(value, &human)
}

fn cluster_matrix(
    out: &Out,
    cfg: &PipelineConfig,
    path: &Path,
    mirror_lower: bool,
    dest: Option<&Path>,
) -> CliResult {
    let mut matrix = SimilarityMatrix::load_csv(path)?;
    if mirror_lower {
        matrix = matrix.mirror_lower();
    }
    let threshold = resolve_threshold(&matrix, &cfg.threshold);
    let clusters = matrix_mode_linkage(&matrix, threshold)?;
    cluster_output(out, threshold, &clusters, dest)
}

fn cluster_corpus(
    out: &Out,
    cfg: &PipelineConfig,
    corpus: &Path,
    dest: Option<&Path>,
) -> CliResult {
    let (analyses, _) = analyzed_corpus(cfg, corpus)?;
    let matrix = spsi_matrix(analyses.iter().map(|a| a.series_ref()))?;
    let threshold = resolve_threshold(&matrix, &cfg.threshold);
    let series: Vec<SentimentSeries> = analyses.iter().map(|a| a.series.clone()).collect();
    let clusters = cluster_all(&matrix, &series, threshold)?;
    cluster_output(out, threshold, &clusters, dest)
}

fn index(out: &Out, cfg: &PipelineConfig, corpus: &Path, path: &Path) -> CliResult {
    let docs = load_corpus(corpus)?;
    let idx = index_corpus(&docs, &Resources::load(cfg)?, cfg)?;
    let catalogue = idx.catalogue(cfg)?;
    catalogue.save(path)?;
    let mut human = format!(
        "indexed {} books into {} clusters (threshold {:.6}), written to {}\n",
        catalogue.entries.len(),
        catalogue.clusters.len(),
        idx.threshold,
        path.display()
    );
    for c in &catalogue.clusters {
        let _ = writeln!(
            human,
            "  cluster {}: {} books",
            c.cluster_id,
            c.members.len()
        );
    }
    for s in &idx.skipped {
        let _ = writeln!(human, "  skipped {}: {}", s.book_id, s.reason);
    }
    out.emit(
        json!({
            "out": path.display().to_string(),
            "books": catalogue.entries.len(),
            "clusters": catalogue.clusters.len(),
            "threshold": idx.threshold,
            "skipped": to_json(&idx.skipped)?,
        }),
        &human,
    )
}

fn search(
    out: &Out,
    catalogue: &Path,
    like: Option<&str>,
    pattern: Option<&Path>,
    k: usize,
    include_self: bool,
) -> CliResult {
    let cat = Catalogue::load(catalogue)?;
    let pattern_series = pattern.map(load_series).transpose()?;
    let (query, nearest) = match (like, &pattern_series) {
        (Some(id), _) => (Query::Book(id), None),
        (None, Some(s)) => (Query::Series(s), Some(nearest_cluster(&cat, s)?)),
        (None, None) => {
            return Err(CliError::Usage(
                "search needs --like or --pattern".to_string(),
            ))
        }
    };
    let hits = search_similar(&cat, query, k, include_self)?;
    let mut human = String::new();
    if let Some((id, s)) = nearest {
        let _ = writeln!(human, "nearest cluster {id} (spsi {s:.6})");
    }
    for (i, h) in hits.iter().enumerate() {
        let _ = writeln!(
            human,
            "{:>3}. {} ({})  spsi {:.6}",
            i + 1,
            h.title,
            h.book_id,
            h.spsi
        );
    }
    out.emit(
        json!({
            "nearest_cluster": nearest.map(|(id, s)| json!({"cluster_id": id, "spsi": s})),
            "hits": to_json(&hits)?,
        }),
        &human,
    )
}

fn eval(
    out: &Out,
    cfg: &PipelineConfig,
    corpus: &Path,
    labels: &Path,
    baselines: bool,
) -> CliResult {
    let labels = load_labels(labels)?;
    let docs = load_corpus(corpus)?;
    let idx = index_corpus(&docs, &Resources::load(cfg)?, cfg)?;
    let mut reports: Vec<AgreementReport> = vec![agreement(
        "spbsi",
        &cluster_members(&idx.clusters),
        &labels,
    )?];
    if baselines {
        let m1 = cosine_matrix(&baseline1_vectors(&docs));
        let (_, c1) = partition_from_similarity(&m1, &cfg.threshold)?;
        reports.push(agreement("baseline-1", &cluster_members(&c1), &labels)?);
        let m2 = cosine_matrix(&baseline2_vectors(&docs, cfg.baseline_full_text)?);
        let (_, c2) = partition_from_similarity(&m2, &cfg.threshold)?;
        reports.push(agreement("baseline-2", &cluster_members(&c2), &labels)?);
    }
    let mut human = format!(
        "{:<12} {:>6} {:>9} {:>8} {:>9}\n",
        "method", "books", "clusters", "purity", "pairwise"
    );
    for r in &reports {
        let _ = writeln!(
            human,
            "{:<12} {:>6} {:>9} {:>8.4} {:>9.4}",
            r.method, r.book_count, r.cluster_count, r.purity, r.pairwise_agreement
        );
    }
    if !idx.skipped.is_empty() {
        let _ = writeln!(human, "{} books skipped by the pipeline", idx.skipped.len());
    }
    out.emit(
        json!({ "reports": to_json(&reports)?, "skipped": to_json(&idx.skipped)? }),
        &human,
    )
}

fn synth(
    out: &Out,
    cfg: &PipelineConfig,
    seed: u64,
    dir: &Path,
    books_per_archetype: usize,
    sigma: f64,
) -> CliResult {
    let spec = GenSpec {
        seed,
        books_per_archetype,
        noise_sigma: sigma,
        block_size: cfg.block_size,
        ..GenSpec::default()
    };
    spec.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let lexicon = Resources::load(cfg)?.lexicon;
    let corpus = generate(&spec, &lexicon)?;
    corpus.write_to(dir)?;
    out.emit(
        json!({
            "out": dir.display().to_string(),
            "seed": seed,
            "books": corpus.books.len(),
            "archetypes": spec.archetypes.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        }),
        &format!(
            "wrote {} books ({} archetypes, seed {seed}) to {}\n",
            corpus.books.len(),
            spec.archetypes.len(),
            dir.display()
        ),
    )
}
