use std::path::Path;

use chrono::DateTime;
use hatelab_core::annotation::{write_labels, Decision, LabelRecord};
use hatelab_core::corpus::{
    clean_pipeline, ingest as read_posts, write_jsonl, write_raw_csv, CleanPost, CleanResources, IngestReport,
    PipelineReport,
};
use hatelab_core::encoding::Normalizer;
use hatelab_core::lexicon::{build_matcher, load_lexicon, merge_lexicons, Lexicon};
use hatelab_core::segment::{Dictionary, Stoplist};
use hatelab_core::synth::{generate, SynthConfig};
use serde::Serialize;

use crate::{data, need, need_seed, pick, report, usage, CleanArgs, CleanInputs, CliError, IngestArgs, MergeArgs, RunConfig, SynthArgs};

pub fn ingest(a: IngestArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let input = need(pick(&a.input, &cfg.paths.posts), "--in")?;
    cfg.paths.posts = Some(input.clone());
    let (posts, rep) = read_posts(&input).map_err(data)?;
    if let Some(out) = &a.out {
        write_raw_csv(out, &posts).map_err(data)?;
    }
    report(a.report.as_deref(), "ingest", &cfg, rep)
}

/// Copies clean flags into the config so the report shows what ran.
pub fn apply_clean_inputs(inputs: &CleanInputs, cfg: &mut RunConfig) {
    if !inputs.lexicons.is_empty() {
        cfg.paths.lexicons = inputs.lexicons.clone();
    }
    let p = &mut cfg.paths;
    for (flag, slot) in [
        (&inputs.dictionary, &mut p.dictionary),
        (&inputs.stopwords, &mut p.stopwords),
        (&inputs.rules, &mut p.rules),
        (&inputs.markers, &mut p.markers),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    let s = &mut cfg.pipeline;
    s.min_syllables = inputs.min_syllables.unwrap_or(s.min_syllables);
    s.ratio_threshold = inputs.ratio_threshold.unwrap_or(s.ratio_threshold);
    s.encoding_threshold = inputs.encoding_threshold.unwrap_or(s.encoding_threshold);
}

fn tag(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "lexicon".into())
}

fn merged_lexicon(paths: &[impl AsRef<Path>]) -> Result<Lexicon, CliError> {
    let mut lex: Option<Lexicon> = None;
    for p in paths {
        let next = load_lexicon(p, &tag(p.as_ref())).map_err(data)?;
        lex = Some(match lex {
            None => next,
            Some(acc) => merge_lexicons(&acc, &next).0,
        });
    }
    lex.ok_or_else(|| usage("--lexicon is required"))
}

pub fn resources(cfg: &RunConfig) -> Result<CleanResources, CliError> {
    let p = &cfg.paths;
    let lexicon = merged_lexicon(&p.lexicons)?;
    let dictionary = match &p.dictionary {
        Some(d) => Dictionary::from_path(d).map_err(data)?,
        None => Dictionary::builtin().clone(),
    };
    let stoplist = match &p.stopwords {
        Some(s) => Stoplist::from_path(s).map_err(data)?,
        None => Stoplist::builtin().clone(),
    };
    let normalizer = if p.rules.is_some() || p.markers.is_some() {
        Normalizer::from_files(p.rules.as_deref(), p.markers.as_deref(), cfg.pipeline.encoding_threshold)
            .map_err(data)?
    } else {
        Normalizer::builtin().clone()
    };
    Ok(CleanResources { matcher: build_matcher(&lexicon), dictionary, stoplist, normalizer })
}

#[derive(Serialize)]
pub struct CleanReport {
    pub ingest: IngestReport,
    pub pipeline: PipelineReport,
}

/// Ingest and clean in memory; shared by `clean` and the `--in` paths of later stages.
pub fn clean_posts(input: &Path, cfg: &RunConfig, seed: u64) -> Result<(Vec<CleanPost>, CleanReport), CliError> {
    let res = resources(cfg)?;
    let (posts, ingest) = read_posts(input).map_err(data)?;
    let (clean, pipeline) = clean_pipeline(posts, &cfg.pipeline_config(seed), &res).map_err(data)?;
    if clean.is_empty() {
        log::warn!("no posts survived cleaning");
    }
    Ok((clean, CleanReport { ingest, pipeline }))
}

pub fn clean(a: CleanArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let input = need(pick(&a.input, &cfg.paths.posts), "--in")?;
    let out = need(pick(&a.out, &cfg.paths.corpus), "--out")?;
    apply_clean_inputs(&a.inputs, &mut cfg);
    let seed = need_seed(a.seed, &mut cfg, "clean")?;
    cfg.paths.posts = Some(input.clone());
    cfg.paths.corpus = Some(out.clone());
    let (clean, rep) = clean_posts(&input, &cfg, seed)?;
    write_jsonl(&out, &clean).map_err(data)?;
    log::info!("{} posts written to {}", clean.len(), out.display());
    report(a.report.as_deref(), "clean", &cfg, rep)
}

pub fn merge(a: MergeArgs, mut cfg: RunConfig) -> Result<(), CliError> {
    let out = need(a.out.clone(), "--out")?;
    let mut reports = Vec::new();
    let mut acc: Option<Lexicon> = None;
    for p in &a.lexicons {
        let next = load_lexicon(p, &tag(p)).map_err(data)?;
        acc = Some(match acc {
            None => next,
            Some(prev) => {
                let (m, r) = merge_lexicons(&prev, &next);
                reports.push(r);
                m
            }
        });
    }
    let mut lex = acc.expect("clap requires two lexicons");
    let mut excluded = 0;
    if let Some(x) = &a.exclude {
        let text = std::fs::read_to_string(x).map_err(|e| data(format!("cannot read {}: {e}", x.display())))?;
        let before = lex.len();
        lex = lex.exclude(text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')));
        excluded = before - lex.len();
    }
    std::fs::write(&out, lex.to_tsv()).map_err(|e| data(format!("cannot write {}: {e}", out.display())))?;
    cfg.paths.lexicons = vec![out];
    #[derive(Serialize)]
    struct MergeSummary {
        merges: Vec<hatelab_core::lexicon::MergeReport>,
        excluded: usize,
        terms: usize,
    }
    report(a.report.as_deref(), "lexicon merge", &cfg, MergeSummary { merges: reports, excluded, terms: lex.len() })
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    let seed = need_seed(a.seed, &mut cfg, "synth")?;
    let mut sc = SynthConfig::new(a.posts, seed);
    sc.noise = a.noise;
    let corpus = generate(&sc);
    std::fs::create_dir_all(&a.out_dir).map_err(data)?;
    let d = &a.out_dir;
    write_raw_csv(d.join("posts.csv"), &corpus.posts).map_err(data)?;
    std::fs::write(d.join("lexicon.tsv"), corpus.lexicon().to_tsv()).map_err(data)?;
    let epoch = DateTime::from_timestamp(0, 0).expect("epoch");
    let gold: Vec<LabelRecord> = corpus
        .labels
        .iter()
        .map(|(id, &hate)| LabelRecord {
            post_id: id.clone(),
            annotator_id: "synthetic".into(),
            round: 0,
            decision: if hate { Decision::Yes } else { Decision::No },
            characteristics: Vec::new(),
            timestamp: epoch,
        })
        .collect();
    write_labels(d.join("gold.csv"), &gold).map_err(data)?;
    log::info!("wrote posts.csv, lexicon.tsv and gold.csv to {}", d.display());
    Ok(())
}
