//! Command-line driver: corpus manifests, model setup from settings, the
//! four subcommands and their log files.

pub mod config;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

pub use config::{Key, Settings, KEYS};

use crate::error::{read_file, Error, Result};
use crate::fsa::{build_fsa, export_fsa, fsa_viterbi_align};
use crate::lexicon::{build_open_vocab, parse_lexicon, Lexicon};
use crate::lm::{combine_lms, load_arpa, make_simulated_lm, SharedLm, SimulatedKind};
use crate::parallel::map_ordered;
use crate::prefix_tree::PrefixTree;
use crate::scorer::{load_context_table, ScoreMatrix, ScoreTensor, Scorer, ScorerKind, SegmentInput};
use crate::search::{
    write_ctm, write_lattice, write_nbest, write_stats, BeamLimits, BeamMode, Decoder, GlobalPruning, LmSlots,
    LookaheadMode, Recombination, SearchConfig,
};
use crate::topology::{make_topology, Preset, Topology, TopologyFlags};
use crate::wer::{align_words, WerCounts};

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub recording: String,
    pub channel: String,
    /// Input path, or a frame count for time-independent scorers.
    pub input: String,
    pub reference: Option<Vec<String>>,
}

/// Parses `<recording>\t<channel>\t<input>[\t<reference words>]` lines.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::Config(format!(
                "manifest line {}: expected recording, channel and input",
                i + 1
            )));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(Error::Config(format!("manifest line {}: duplicate recording `{}`", i + 1, fields[0])));
        }
        let reference = (fields.len() > 3).then(|| fields[3..].iter().flat_map(|f| f.split_whitespace()).map(str::to_string).collect());
        out.push(ManifestEntry {
            recording: fields[0].to_string(),
            channel: fields[1].to_string(),
            input: fields[2].to_string(),
            reference,
        });
    }
    Ok(out)
}

/// Outcome of a subcommand that ran to completion.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub utterances: usize,
    pub failures: usize,
    /// One-line summary for the terminal.
    pub summary: String,
}

pub fn run(command: &str, settings: Settings) -> Result<Report> {
    match command {
        "decode" => run_decode(settings),
        "align" => run_align(settings),
        "fsa-export" => run_export_fsa(settings),
        "wer" => run_wer(&settings),
        other => Err(Error::Config(format!("unknown subcommand `{other}`"))),
    }
}

fn existing(settings: &Settings, name: &str) -> Result<PathBuf> {
    let v = settings.get(name);
    if v.is_empty() {
        return Err(Error::Config(format!("{name} is required")));
    }
    let p = PathBuf::from(v);
    if !p.is_file() {
        return Err(Error::Config(format!("{name}: no such file `{v}`")));
    }
    Ok(p)
}

/// Corpus setup shared by the model-based subcommands.
struct Corpus {
    lexicon: Arc<Lexicon>,
    topology: Topology,
    entries: Vec<ManifestEntry>,
    base: PathBuf,
    out_dir: PathBuf,
    workers: usize,
    frame_shift: f64,
}

impl Corpus {
    fn load(s: &Settings) -> Result<Self> {
        let lexicon_path = existing(s, "lexicon")?;
        let manifest_path = existing(s, "manifest")?;
        let mut lexicon = parse_lexicon(&read_file(&lexicon_path)?)?;
        if s.flag("open-vocab")? {
            lexicon = build_open_vocab(lexicon.alphabet())?;
        }
        let preset: Preset = s.get("topology").parse()?;
        let flags = TopologyFlags {
            min_loop_occurrence: s.parse("min-loop")?,
            ..TopologyFlags::from(preset)
        };
        let topology = make_topology(flags, lexicon.alphabet())?;
        let entries = parse_manifest(&read_file(&manifest_path)?)?;
        let workers: usize = s.parse("workers")?;
        let frame_shift: f64 = s.parse("frame-shift")?;
        if workers == 0 || !(frame_shift > 0.0 && frame_shift.is_finite()) {
            return Err(Error::Config("workers and frame-shift must be positive".into()));
        }
        Ok(Self {
            lexicon: Arc::new(lexicon),
            topology,
            entries,
            base: manifest_path.parent().map(Path::to_path_buf).unwrap_or_default(),
            out_dir: PathBuf::from(s.get("out-dir")),
            workers,
            frame_shift,
        })
    }

    fn input_path(&self, e: &ManifestEntry) -> PathBuf {
        self.base.join(&e.input)
    }

    fn check_inputs(&self) -> Result<()> {
        for e in &self.entries {
            let p = self.input_path(e);
            if !p.is_file() {
                return Err(Error::Config(format!("{}: no such input `{}`", e.recording, p.display())));
            }
        }
        Ok(())
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, text).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn create_out_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir).map_err(|source| Error::Io {
            path: self.out_dir.display().to_string(),
            source,
        })
    }
}

fn limits(s: &Settings, prefix: &str) -> Result<BeamLimits> {
    Ok(BeamLimits::new(
        s.parse(&format!("{prefix}-threshold"))?,
        s.limit(&format!("{prefix}-histogram"))?.unwrap_or(usize::MAX),
    ))
}

pub fn search_config(s: &Settings) -> Result<SearchConfig> {
    let bad = |k: &str| Error::Config(format!("{k}: unknown value `{}`", s.get(k)));
    let config = SearchConfig {
        beam_mode: match s.get("beam-mode") {
            "individual" => BeamMode::Individual,
            "global" => BeamMode::Global,
            _ => return Err(bad("beam-mode")),
        },
        global: match s.limit("global-fixed-size")? {
            Some(k) => GlobalPruning::FixedSize(k),
            None => GlobalPruning::ScoreHistogram(limits(s, "global")?),
        },
        label_beam: limits(s, "label-beam")?,
        word_end_beam: limits(s, "word-end-beam")?,
        ended_beam: limits(s, "ended-beam")?,
        local_threshold: s.parse("local-threshold")?,
        blank_threshold: s.parse("blank-threshold")?,
        eos_threshold: s.parse("eos-threshold")?,
        max_step_ratio: s.parse("max-step-ratio")?,
        recombination: match s.get("recombination") {
            "viterbi" => Recombination::Viterbi,
            "full_sum" => Recombination::FullSum,
            _ => return Err(bad("recombination")),
        },
        recombination_history_limit: s.limit("recombination-history-limit")?,
        length_normalization: s.flag("length-normalization")?,
        early_stopping: s.flag("early-stopping")?,
        lm_scale: s.parse("lm-scale")?,
        lookahead: match s.get("lookahead") {
            "none" => LookaheadMode::None,
            "unigram" => LookaheadMode::Unigram,
            "higher" => LookaheadMode::Higher,
            _ => return Err(bad("lookahead")),
        },
        lookahead_scale: s.parse("lookahead-scale")?,
        lookahead_cache: s.parse("lookahead-cache")?,
        nbest: s.parse("nbest")?,
        lattice: s.flag("lattice")?,
    };
    config.validate().map_err(Error::Config)?;
    Ok(config)
}

fn vocabulary(lexicon: &Lexicon) -> Vec<String> {
    let mut v: Vec<String> = lexicon
        .lemmata()
        .iter()
        .flat_map(|l| l.lm_tokens.clone().unwrap_or_default())
        .collect();
    v.sort();
    v.dedup();
    v
}

fn arpa(path: &str) -> Result<SharedLm> {
    if !Path::new(path).is_file() {
        return Err(Error::Config(format!("no such LM file `{path}`")));
    }
    Ok(Arc::new(load_arpa(&read_file(Path::new(path))?)?))
}

fn language_models(s: &Settings, lexicon: &Lexicon) -> Result<LmSlots> {
    let zero_gram = || make_simulated_lm(SimulatedKind::ZeroGram, None, vocabulary(lexicon));
    let names = s.list("lm");
    let mut parts = Vec::new();
    for name in &names {
        parts.push(if name == "zero_gram" { zero_gram()? } else { arpa(name)? });
    }
    let scoring = match parts.len() {
        0 => None,
        1 if s.get("lm-weights").is_empty() => parts.pop(),
        n => {
            let weights = s.list("lm-weights");
            if weights.len() != n {
                return Err(Error::Config(format!("lm-weights needs {n} values")));
            }
            let weights: Vec<f64> = weights
                .iter()
                .map(|w| w.parse().map_err(|_| Error::Config(format!("lm-weights: bad value `{w}`"))))
                .collect::<Result<_>>()?;
            Some(combine_lms(parts.into_iter().zip(weights).collect())?)
        }
    };
    let lookahead = match s.get("lookahead-lm") {
        "" => None,
        p => Some(arpa(p)?),
    };
    let recombination = match s.get("recombination-lm") {
        "" => None,
        "full_context" => {
            let base = match &scoring {
                Some(lm) => lm.clone(),
                None => zero_gram()?,
            };
            Some(make_simulated_lm(SimulatedKind::FullContext, Some(base), Vec::<String>::new())?)
        }
        p => Some(arpa(p)?),
    };
    Ok(LmSlots {
        scoring,
        lookahead,
        recombination,
    })
}

fn scorer(s: &Settings, lexicon: &Lexicon) -> Result<Scorer> {
    let labels = lexicon.alphabet().len();
    let base = match s.get("scorer") {
        "precomputed" => Scorer::precomputed(labels),
        "first_order" => Scorer::first_order(labels),
        "context_table" => load_context_table(&read_file(&existing(s, "scorer-file")?)?, lexicon.alphabet())?,
        v => return Err(Error::Config(format!("scorer: unknown kind `{v}`"))),
    };
    let context = match s.get("scorer-context-size") {
        "full" => None,
        _ => Some(s.parse("scorer-context-size")?),
    };
    let mut scorer = base
        .with_history_flags(s.flag("scorer-history-loop")?, s.flag("scorer-history-blank")?)
        .with_batch_limit(s.parse::<usize>("scorer-batch-limit")?.max(1));
    // Context-table scorers fix their own context size.
    if scorer.kind() != ScorerKind::ContextTable {
        scorer = scorer.with_context_size(context);
    }
    Ok(scorer)
}

fn segment_input(scorer: &Scorer, path: &Path, input: &str) -> Result<SegmentInput> {
    Ok(match scorer.kind() {
        ScorerKind::Precomputed => SegmentInput::Matrix(ScoreMatrix::parse(&read_file(path)?)?),
        ScorerKind::PrecomputedFirstOrder => SegmentInput::Tensor(ScoreTensor::parse(&read_file(path)?)?),
        ScorerKind::ContextTable => SegmentInput::Frames(
            input
                .parse()
                .map_err(|_| Error::Config(format!("context-table input must be a frame count, got `{input}`")))?,
        ),
    })
}

#[derive(Default)]
struct Utterance {
    outputs: BTreeMap<&'static str, String>,
    log: String,
    frames: usize,
    hyp: Option<Vec<String>>,
    failed: bool,
}

const DECODE_OUTPUTS: [&str; 5] = ["ctm", "nbest", "lattice", "stats", "text"];

fn run_decode(mut s: Settings) -> Result<Report> {
    let outputs = s.list("outputs");
    if let Some(o) = outputs.iter().find(|o| !DECODE_OUTPUTS.contains(&o.as_str())) {
        return Err(Error::Config(format!("outputs: unknown output `{o}`")));
    }
    if outputs.iter().any(|o| o == "lattice") {
        s.set("lattice", "true");
    }
    let corpus = Corpus::load(&s)?;
    let scorer = Arc::new(scorer(&s, &corpus.lexicon)?);
    if scorer.kind() != ScorerKind::ContextTable {
        corpus.check_inputs()?;
    }
    let decoder = Decoder::new(
        Arc::new(PrefixTree::build(corpus.lexicon.clone())),
        corpus.topology.clone(),
        scorer.clone(),
        language_models(&s, &corpus.lexicon)?,
        search_config(&s)?,
    )?;
    corpus.create_out_dir()?;

    let start = Instant::now();
    let decode_one = |e: &ManifestEntry| -> Utterance {
        let mut u = Utterance::default();
        let result = segment_input(&scorer, &corpus.input_path(e), &e.input)
            .and_then(|input| Ok(scorer.init_segment(input)?))
            .and_then(|enc| Ok(decoder.decode(&enc)?));
        let r = match result {
            Ok(r) => r,
            Err(err) => {
                u.failed = true;
                let _ = writeln!(u.log, "ERROR {}: {err}", e.recording);
                if let Error::Search(crate::search::SearchError::Failure { stats, .. }) = &err {
                    u.frames = stats.frames;
                    write_stats(u.outputs.entry("stats").or_default(), &e.recording, stats);
                }
                return u;
            }
        };
        u.frames = r.stats.frames;
        let best = r.best();
        write_ctm(u.outputs.entry("ctm").or_default(), &e.recording, &e.channel, &best.words, corpus.frame_shift);
        write_nbest(u.outputs.entry("nbest").or_default(), &e.recording, &r.nbest);
        if let Some(l) = &r.lattice {
            write_lattice(u.outputs.entry("lattice").or_default(), &e.recording, l);
        }
        write_stats(u.outputs.entry("stats").or_default(), &e.recording, &r.stats);
        let words: Vec<String> = best.orths().into_iter().map(str::to_string).collect();
        let _ = writeln!(u.outputs.entry("text").or_default(), "{} {}", e.recording, words.join(" "));
        let _ = writeln!(u.log, "utterance {}\n{}{}", e.recording, r.stats.describe(), u.outputs["stats"]);
        u.hyp = Some(words);
        u
    };
    let done = map_ordered(&corpus.entries, corpus.workers, decode_one);
    let wall = start.elapsed().as_secs_f64();

    let mut log = s.echo();
    let mut files: BTreeMap<&str, String> = BTreeMap::new();
    let mut wer = WerCounts::default();
    let mut scored = 0;
    let (mut frames, mut failures) = (0, 0);
    for (e, u) in corpus.entries.iter().zip(&done) {
        log.push_str(&u.log);
        frames += u.frames;
        failures += usize::from(u.failed);
        for o in &outputs {
            if let Some(text) = u.outputs.get(o.as_str()) {
                files.entry(o.as_str()).or_default().push_str(text);
            }
        }
        if let Some(reference) = &e.reference {
            wer.add(align_words(reference, u.hyp.as_deref().unwrap_or_default()));
            scored += 1;
        }
    }
    for o in &outputs {
        corpus.write(&format!("decode.{o}"), files.get(o.as_str()).map_or("", String::as_str))?;
    }
    let audio = frames as f64 * corpus.frame_shift;
    let mut summary = format!(
        "utterances={} failed={failures} frames={frames} audio_s={audio:.2} wall_s={wall:.3} rtf={:.4}",
        corpus.entries.len(),
        if audio > 0.0 { wall / audio } else { 0.0 }
    );
    if scored > 0 {
        let _ = write!(summary, " {wer}");
    }
    let _ = writeln!(log, "SUMMARY {summary}");
    corpus.write("decode.log", &log)?;
    Ok(Report {
        utterances: corpus.entries.len(),
        failures,
        summary,
    })
}

fn run_align(s: Settings) -> Result<Report> {
    let corpus = Corpus::load(&s)?;
    corpus.check_inputs()?;
    corpus.create_out_dir()?;
    let align_one = |e: &ManifestEntry| -> std::result::Result<String, String> {
        let reference = e.reference.as_ref().ok_or("no reference transcription")?;
        let fsa = build_fsa(reference, &corpus.lexicon, &corpus.topology).map_err(|e| e.to_string())?;
        let scores = ScoreMatrix::parse(&read_file(&corpus.input_path(e)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let (labels, cost) = fsa_viterbi_align(&fsa, &scores).map_err(|e| e.to_string())?;
        let alphabet = corpus.lexicon.alphabet();
        let mut line = format!("{} {cost:.6}", e.recording);
        for l in labels {
            line.push(' ');
            line.push_str(alphabet.symbol(l));
        }
        line.push('\n');
        Ok(line)
    };
    let done = map_ordered(&corpus.entries, corpus.workers, align_one);
    let (mut out, mut log, mut failures) = (String::new(), s.echo(), 0);
    for (e, r) in corpus.entries.iter().zip(done) {
        match r {
            Ok(line) => out.push_str(&line),
            Err(msg) => {
                failures += 1;
                let _ = writeln!(log, "ERROR {}: {msg}", e.recording);
            }
        }
    }
    let summary = format!("utterances={} failed={failures}", corpus.entries.len());
    let _ = writeln!(log, "SUMMARY {summary}");
    corpus.write("align.txt", &out)?;
    corpus.write("align.log", &log)?;
    Ok(Report {
        utterances: corpus.entries.len(),
        failures,
        summary,
    })
}

fn run_export_fsa(s: Settings) -> Result<Report> {
    let corpus = Corpus::load(&s)?;
    corpus.create_out_dir()?;
    let (mut log, mut failures) = (s.echo(), 0);
    for e in &corpus.entries {
        let result = e
            .reference
            .as_ref()
            .ok_or_else(|| "no reference transcription".to_string())
            .and_then(|r| build_fsa(r, &corpus.lexicon, &corpus.topology).map_err(|e| e.to_string()));
        match result {
            Ok(fsa) => corpus.write(&format!("{}.fsa", e.recording), &export_fsa(&fsa, corpus.lexicon.alphabet()))?,
            Err(msg) => {
                failures += 1;
                let _ = writeln!(log, "ERROR {}: {msg}", e.recording);
            }
        }
    }
    let summary = format!("utterances={} failed={failures}", corpus.entries.len());
    let _ = writeln!(log, "SUMMARY {summary}");
    corpus.write("fsa-export.log", &log)?;
    Ok(Report {
        utterances: corpus.entries.len(),
        failures,
        summary,
    })
}

/// `<id> <words...>` lines keyed by id.
fn transcriptions(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut out = BTreeMap::new();
    for (i, line) in read_file(path)?.lines().enumerate() {
        let mut words = line.split_whitespace().map(str::to_string);
        let Some(id) = words.next() else { continue };
        if out.insert(id.clone(), words.collect()).is_some() {
            return Err(Error::Config(format!("{}:{}: duplicate id `{id}`", path.display(), i + 1)));
        }
    }
    Ok(out)
}

fn run_wer(s: &Settings) -> Result<Report> {
    let refs = transcriptions(&existing(s, "ref")?)?;
    let hyps = transcriptions(&existing(s, "hyp")?)?;
    if let Some(id) = refs.keys().find(|id| !hyps.contains_key(*id)).or_else(|| hyps.keys().find(|id| !refs.contains_key(*id))) {
        return Err(Error::Config(format!("recording `{id}` is missing from one of the files")));
    }
    let mut total = WerCounts::default();
    for (id, r) in &refs {
        total.add(align_words(r, &hyps[id]));
    }
    Ok(Report {
        utterances: refs.len(),
        failures: 0,
        summary: total.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lines() {
        let m = parse_manifest("a\t1\ta.scores\tthe cat\nb\tA\tb.scores\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].reference, Some(vec!["the".to_string(), "cat".to_string()]));
        assert_eq!(m[1].reference, None);
        assert!(parse_manifest("a\t1\n").is_err());
        assert!(parse_manifest("a\t1\tx\na\t1\ty\n").is_err());
    }

    #[test]
    fn search_keys_map_to_config() {
        let cli = [("beam-mode", "global"), ("global-fixed-size", "8"), ("label-beam-histogram", "5")]
            .map(|(k, v)| (k.to_string(), v.to_string()));
        let s = Settings::resolve("decode", None, &cli).unwrap();
        let c = search_config(&s).unwrap();
        assert_eq!(c.beam_mode, BeamMode::Global);
        assert_eq!(c.global, GlobalPruning::FixedSize(8));
        assert_eq!(c.label_beam, BeamLimits::new(f64::INFINITY, 5));
        let defaults = search_config(&Settings::resolve("decode", None, &[]).unwrap()).unwrap();
        assert_eq!(defaults, SearchConfig::default());
    }
}
