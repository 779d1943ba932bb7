use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use hemfair::corpus::{load_manifest_with_fps, rating_vectors, TalkRecord, LABEL_COUNT};
use hemfair::embeddings::EmbeddingTable;
use hemfair::fair_model::{
    build_dataset, evaluate, evaluate_on, fit, grid_search, predict, stratified_split, Checkpoint, Dataset, FairnessReport,
    LossConfig, Objective, Split, CHECKPOINT_VERSION,
};
use hemfair::hem_stats::{bias_table, hem_pairs, rating_curves, AnalysisTalk, HemPairs};
use hemfair::pipeline::{corpus_hem, TalkHem};
use hemfair::synth::{gen_corpus, write_corpus};
use serde_json::json;

use crate::config::RunConfig;
use crate::output::{column, num, opt, read_rows, write_json, CsvOut};

pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub hash: String,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn load_corpus(manifest: &Path, ctx: &Ctx) -> Result<Vec<TalkRecord>> {
    let corpus = load_manifest_with_fps(manifest, ctx.config.fps)?;
    if corpus.is_empty() {
        bail!("{}: corpus is empty", manifest.display());
    }
    Ok(corpus)
}

pub fn synth(ctx: &Ctx) -> Result<()> {
    let mut cfg = ctx.config.synth.clone();
    cfg.seed = ctx.seed;
    let corpus = gen_corpus(&cfg)?;
    write_corpus(&corpus, &ctx.out)?;
    Ok(())
}

pub fn hem(ctx: &Ctx, manifest: &Path, embeddings: &Path) -> Result<()> {
    let corpus = load_corpus(manifest, ctx)?;
    let table = EmbeddingTable::load_with_dim(embeddings, ctx.config.embedding_dim)?;
    let hems = corpus_hem(&corpus, &table, &ctx.config.hem, ctx.seed, ctx.threads)?;
    let pairs = normalized(&hems)?;

    let mut out = CsvOut::create(
        &ctx.path("hem.csv"),
        &ctx.hash,
        &[
            "id", "hem_tr_raw", "hem_ges_raw", "hem_tr", "hem_ges", "hem_tr_dis", "hem_ges_dis", "segments", "empty_topics",
            "oov_rate",
        ],
    )?;
    for (h, p) in hems.iter().zip(&pairs.pairs) {
        out.row([
            h.id.clone(),
            num(h.hem_tr_raw),
            num(h.hem_ges_raw),
            num(p.hem_tr),
            num(p.hem_ges),
            p.hem_tr_dis.to_string(),
            p.hem_ges_dis.to_string(),
            h.segment_eigs.len().to_string(),
            h.empty_topics.to_string(),
            num(h.oov_rate),
        ])?;
    }
    out.finish()?;

    let k = ctx.config.hem.gesture_k;
    let mut header = vec!["id".to_string(), "segment".to_string()];
    header.extend((1..=k).map(|i| format!("eig_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut out = CsvOut::create(&ctx.path("segment_eigs.csv"), &ctx.hash, &header)?;
    for h in &hems {
        for (s, eigs) in h.segment_eigs.iter().enumerate() {
            let mut row = vec![h.id.clone(), s.to_string()];
            row.extend(eigs.iter().map(|&e| num(e)));
            row.resize(k + 2, String::new());
            out.row(row)?;
        }
    }
    out.finish()
}

fn normalized(hems: &[TalkHem]) -> Result<HemPairs> {
    let tr: Vec<f64> = hems.iter().map(|h| h.hem_tr_raw).collect();
    let ges: Vec<f64> = hems.iter().map(|h| h.hem_ges_raw).collect();
    Ok(hem_pairs(&tr, &ges)?)
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, path: &Path, line: usize) -> Result<T> {
    field
        .parse()
        .map_err(|_| anyhow!("{}: row {line}: bad {what} `{field}`", path.display()))
}

/// Reads `hem.csv` (and `segment_eigs.csv` beside it) back into corpus order.
fn read_hem(path: &Path, corpus: &[TalkRecord]) -> Result<Vec<TalkHem>> {
    let (header, rows) = read_rows(path, &["id", "hem_tr_raw", "hem_ges_raw", "empty_topics", "oov_rate"])?;
    let [id, tr, ges, empty, oov] =
        ["id", "hem_tr_raw", "hem_ges_raw", "empty_topics", "oov_rate"].map(|c| column(&header, c));
    let mut by_id: HashMap<String, TalkHem> = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        let h = TalkHem {
            id: r[id].to_string(),
            hem_tr_raw: parse(&r[tr], "hem_tr_raw", path, i + 1)?,
            hem_ges_raw: parse(&r[ges], "hem_ges_raw", path, i + 1)?,
            segment_eigs: Vec::new(),
            empty_topics: parse(&r[empty], "empty_topics", path, i + 1)?,
            oov_rate: parse(&r[oov], "oov_rate", path, i + 1)?,
        };
        if by_id.insert(h.id.clone(), h).is_some() {
            bail!("{}: duplicate id `{}`", path.display(), &r[id]);
        }
    }
    let seg_path = path.with_file_name("segment_eigs.csv");
    if seg_path.exists() {
        let (header, rows) = read_rows(&seg_path, &["id", "segment"])?;
        let id = column(&header, "id");
        let eig_cols: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("eig_"))
            .map(|(i, _)| i)
            .collect();
        for (i, r) in rows.iter().enumerate() {
            let h = by_id
                .get_mut(&r[id])
                .ok_or_else(|| anyhow!("{}: unknown id `{}`", seg_path.display(), &r[id]))?;
            let eigs = eig_cols
                .iter()
                .filter(|&&c| !r[c].is_empty())
                .map(|&c| parse(&r[c], "eigenvalue", &seg_path, i + 1))
                .collect::<Result<Vec<f64>>>()?;
            h.segment_eigs.push(eigs);
        }
    }
    corpus
        .iter()
        .map(|t| {
            by_id
                .remove(&t.id)
                .ok_or_else(|| anyhow!("{}: no row for talk `{}`", path.display(), t.id))
        })
        .collect()
}

fn analysis_talks(corpus: &[TalkRecord], pairs: &HemPairs) -> Result<Vec<AnalysisTalk>> {
    let ratings = rating_vectors(corpus)?;
    Ok(corpus
        .iter()
        .zip(&pairs.pairs)
        .zip(ratings)
        .map(|((t, hem), r)| AnalysisTalk {
            gender: t.gender,
            race: t.race,
            hem: *hem,
            normalized: r.normalized,
            binary: r.binary,
        })
        .collect())
}

pub fn analyze(ctx: &Ctx, manifest: &Path, hem_path: &Path) -> Result<()> {
    let corpus = load_corpus(manifest, ctx)?;
    let hems = read_hem(hem_path, &corpus)?;
    let pairs = normalized(&hems)?;
    let talks = analysis_talks(&corpus, &pairs)?;
    let cells = bias_table(&talks);
    let curves = rating_curves(&talks)?;

    let mut out = CsvOut::create(
        &ctx.path("analysis.csv"),
        &ctx.hash,
        &[
            "label", "modality", "hem_bin", "attribute", "group", "n", "positives", "rate", "ci_lo", "ci_hi", "other_group",
            "other_n", "other_positives", "other_rate", "other_ci_lo", "other_ci_hi", "gap", "significant",
        ],
    )?;
    for c in &cells {
        let mut row = vec![
            c.label.name().to_string(),
            c.modality.name().to_string(),
            c.hem_bin.to_string(),
            c.first.group.attribute().to_string(),
        ];
        for g in [&c.first, &c.second] {
            row.extend([
                g.group.value(),
                g.n.to_string(),
                g.x.to_string(),
                opt(g.rate),
                opt(g.ci95.map(|ci| ci.0)),
                opt(g.ci95.map(|ci| ci.1)),
            ]);
        }
        row.extend([opt(c.gap), c.significant.to_string()]);
        out.row(row)?;
    }
    out.finish()?;

    let mut out = CsvOut::create(
        &ctx.path("curves.csv"),
        &ctx.hash,
        &["label", "modality", "bin", "n", "mean", "std_err", "concave", "increasing", "convex", "decreasing"],
    )?;
    for c in &curves {
        let flags = |f: fn(&hemfair::hem_stats::CurveShape) -> bool| c.shape.as_ref().map(f).map(|b| b.to_string()).unwrap_or_default();
        for (bin, stat) in c.bins.iter().enumerate() {
            out.row([
                c.label.name().to_string(),
                c.modality.name().to_string(),
                bin.to_string(),
                stat.map_or(0, |s| s.n).to_string(),
                opt(stat.map(|s| s.mean)),
                opt(stat.map(|s| s.std_err)),
                flags(|s| s.concave),
                flags(|s| s.increasing),
                flags(|s| s.convex),
                flags(|s| s.decreasing),
            ])?;
        }
    }
    out.finish()?;

    write_json(
        &ctx.path("analysis.json"),
        &json!({
            "config_hash": ctx.hash,
            "talks": talks.len(),
            "hem_tr_degenerate": pairs.tr_degenerate,
            "hem_ges_degenerate": pairs.ges_degenerate,
            "curves": curves,
            "cells": cells,
        }),
    )
}

struct Prepared {
    data: Dataset,
    split: Split,
}

fn prepare(ctx: &Ctx, manifest: &Path, embeddings: &Path, hem_path: &Path) -> Result<Prepared> {
    let corpus = load_corpus(manifest, ctx)?;
    let table = EmbeddingTable::load_with_dim(embeddings, ctx.config.embedding_dim)?;
    let hems = read_hem(hem_path, &corpus)?;
    let data = build_dataset(&corpus, &hems, &table, ctx.config.hem.gesture_k, ctx.seed)?;
    let split = stratified_split(&data.talks, ctx.config.test_fraction, ctx.seed)?;
    if split.test.is_empty() {
        bail!("the split leaves no test talks");
    }
    Ok(Prepared { data, split })
}

const PROB_COLUMNS: [&str; LABEL_COUNT] = [
    "p_fascinating", "p_ingenious", "p_jaw_dropping", "p_longwinded", "p_unconvincing", "p_ok",
];
const BIN_COLUMNS: [&str; LABEL_COUNT] = [
    "y_fascinating", "y_ingenious", "y_jaw_dropping", "y_longwinded", "y_unconvincing", "y_ok",
];

fn write_report(ctx: &Ctx, stem: &str, report: &FairnessReport) -> Result<()> {
    let mut out = CsvOut::create(
        &ctx.path(&format!("{stem}.csv")),
        &ctx.hash,
        &[
            "label", "accuracy", "positive_rate", "spd_gender", "spd_race", "true_spd_gender", "true_spd_race", "cv_prob",
        ],
    )?;
    for l in &report.labels {
        out.row([
            l.label.name().to_string(),
            num(l.accuracy),
            num(l.positive_rate),
            opt(l.spd_gender),
            opt(l.spd_race),
            opt(l.true_spd_gender),
            opt(l.true_spd_race),
            opt(l.cv_prob.as_ref().and_then(|c| c.value)),
        ])?;
    }
    out.finish()?;
    write_json(&ctx.path(&format!("{stem}.json")), &json!({ "config_hash": ctx.hash, "report": report }))
}

pub fn train(ctx: &Ctx, manifest: &Path, embeddings: &Path, hem_path: &Path) -> Result<()> {
    let p = prepare(ctx, manifest, embeddings, hem_path)?;
    let loss = LossConfig::new(ctx.config.epsilon, ctx.config.lambda)?;
    let objective = Objective::Fair(loss);
    let (model, trace) = fit(&p.data, &p.split, objective, &ctx.config.train, ctx.seed)?;

    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        input_dim: model.net.input_dim,
        hidden: model.net.hidden,
        outputs: LABEL_COUNT,
        s_max: p.data.s_max,
        objective,
        train: ctx.config.train.clone(),
        seed: ctx.seed,
        model,
    };
    write_json(&ctx.path("model.json"), &json!({ "config_hash": ctx.hash, "checkpoint": checkpoint }))?;

    let mut out = CsvOut::create(&ctx.path("trace.csv"), &ctx.hash, &["epoch", "pred_loss", "hem_loss", "total"])?;
    for r in &trace {
        out.row([r.epoch.to_string(), num(r.loss.pred), num(r.loss.hem), num(r.loss.total)])?;
    }
    out.finish()?;

    let probs = predict(&checkpoint.model, &p.data, &p.split.test)?;
    let mut header = vec!["id"];
    header.extend(PROB_COLUMNS);
    header.extend(BIN_COLUMNS);
    let mut out = CsvOut::create(&ctx.path("predictions.csv"), &ctx.hash, &header)?;
    for (&i, pr) in p.split.test.iter().zip(&probs) {
        let mut row = vec![p.data.talks[i].id.clone()];
        row.extend(pr.iter().map(|&v| num(v)));
        row.extend(pr.iter().map(|&v| u8::from(v >= 0.5).to_string()));
        out.row(row)?;
    }
    out.finish()?;

    let report = evaluate_on(&p.data, &p.split.test, &probs)?;
    write_report(ctx, "report", &report)
}

pub fn grid(ctx: &Ctx, manifest: &Path, embeddings: &Path, hem_path: &Path) -> Result<()> {
    let p = prepare(ctx, manifest, embeddings, hem_path)?;
    let rows = grid_search(&p.data, &p.split, &ctx.config.grid, &ctx.config.train, ctx.seed, ctx.threads)?;
    let mut out = CsvOut::create(
        &ctx.path("grid.csv"),
        &ctx.hash,
        &[
            "epsilon", "lambda", "key", "mean_accuracy", "label", "accuracy", "spd_gender", "spd_race", "true_spd_gender",
            "true_spd_race", "cv_prob",
        ],
    )?;
    for r in &rows {
        for l in &r.report.labels {
            out.row([
                num(r.epsilon),
                num(r.lambda),
                num(r.key),
                num(r.report.mean_accuracy),
                l.label.name().to_string(),
                num(l.accuracy),
                opt(l.spd_gender),
                opt(l.spd_race),
                opt(l.true_spd_gender),
                opt(l.true_spd_race),
                opt(l.cv_prob.as_ref().and_then(|c| c.value)),
            ])?;
        }
    }
    out.finish()?;
    write_json(&ctx.path("grid.json"), &json!({ "config_hash": ctx.hash, "rows": rows }))
}

/// Recomputes the report from a prediction dump and the manifest alone.
pub fn evaluate_dump(ctx: &Ctx, manifest: &Path, predictions: &Path, hem_path: &Path) -> Result<()> {
    let corpus = load_corpus(manifest, ctx)?;
    let hems = read_hem(hem_path, &corpus)?;
    let pairs = normalized(&hems)?;
    let talks = analysis_talks(&corpus, &pairs)?;
    let index: HashMap<&str, usize> = corpus.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();

    let mut required = vec!["id"];
    required.extend(PROB_COLUMNS);
    let (header, rows) = read_rows(predictions, &required)?;
    let id = column(&header, "id");
    let prob_cols = PROB_COLUMNS.map(|c| column(&header, c));
    let (mut probs, mut truth, mut genders, mut races, mut hem) = (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, r) in rows.iter().enumerate() {
        let &i = index
            .get(&r[id])
            .ok_or_else(|| anyhow!("{}: talk `{}` is not in the manifest", predictions.display(), &r[id]))?;
        let mut p = [0.0; LABEL_COUNT];
        for (v, &c) in p.iter_mut().zip(&prob_cols) {
            *v = parse(&r[c], "probability", predictions, line + 1)?;
        }
        probs.push(p);
        truth.push(talks[i].binary);
        genders.push(talks[i].gender);
        races.push(talks[i].race);
        hem.push(talks[i].hem.point());
    }
    let report = evaluate(&probs, &truth, &genders, &races, &hem).context("evaluating predictions")?;
    write_report(ctx, "evaluation", &report)
}

pub fn ensure_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}
