//! Label scorers: the interface between search and the model producing
//! per-step label costs. Three file-backed kinds are provided:
//!
//! * `precomputed`: a `T x A` cost matrix, history-independent.
//! * `precomputed_first_order`: a `T x (A+1) x A` tensor, one slice per
//!   previous label plus a begin-context slice (index `A`).
//! * `context_table`: time-independent costs keyed by the last `k` labels.
//!
//! Score files are text: a header line followed by whitespace-separated
//! decimal costs.
//!
//! ```text
//! SCORES <T> <A>
//! SCORES3 <T> <C> <A>
//! CTXTABLE <k> <default-cost>
//! ```

use std::collections::HashMap;
use std::sync::Arc;

use smallvec::SmallVec;

use crate::error::ScorerError;
use crate::lexicon::{LabelAlphabet, LabelId, BOS_SYMBOL};
use crate::topology::TransitionKind;

/// Padding entry in a label context.
pub const BOS: LabelId = LabelId::MAX;

pub type Context = SmallVec<[LabelId; 4]>;

/// How label events feed the scorer's label context.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HistorySpec {
    /// `None` keeps the full label history.
    pub context_size: Option<usize>,
    pub include_loop: bool,
    pub include_blank: bool,
}

impl HistorySpec {
    pub fn limited(k: usize) -> Self {
        Self {
            context_size: Some(k),
            include_loop: false,
            include_blank: false,
        }
    }

    pub fn full() -> Self {
        Self {
            context_size: None,
            include_loop: false,
            include_blank: false,
        }
    }
}

/// Label context of a hypothesis. Contexts are stored already truncated, so
/// equality is equality of effective contexts.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct S2SHistory {
    labels: Context,
}

impl S2SHistory {
    pub fn labels(&self) -> &[LabelId] {
        &self.labels
    }

    /// The last `limit` entries (all of them for `None`).
    pub fn suffix(&self, limit: Option<usize>) -> &[LabelId] {
        match limit {
            Some(k) if k < self.labels.len() => &self.labels[self.labels.len() - k..],
            _ => &self.labels,
        }
    }

    pub fn last(&self) -> Option<LabelId> {
        self.labels.last().copied().filter(|&l| l != BOS)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    frames: usize,
    labels: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(frames: usize, labels: usize, data: Vec<f64>) -> Result<Self, ScorerError> {
        if data.len() != frames * labels {
            return Err(ScorerError::Dimension(format!(
                "{} values for a {frames}x{labels} matrix",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(ScorerError::NonFinite { line: 0 });
        }
        Ok(Self { frames, labels, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ScorerError> {
        let labels = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != labels) {
            return Err(ScorerError::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), labels, rows.concat())
    }

    pub fn parse(text: &str) -> Result<Self, ScorerError> {
        let mut lines = numbered_lines(text);
        let (line, header) = lines.next().ok_or(ScorerError::Parse {
            line: 1,
            msg: "missing SCORES header".into(),
        })?;
        let dims = parse_header(line, header, "SCORES", 2)?;
        let (frames, labels) = (dims[0], dims[1]);
        let data = parse_rows(lines, frames, labels)?;
        Ok(Self { frames, labels, data })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.labels..(t + 1) * self.labels]
    }

    pub fn render(&self) -> String {
        let mut out = format!("SCORES {} {}\n", self.frames, self.labels);
        for t in 0..self.frames {
            let row: Vec<String> = self.row(t).iter().map(|c| format!("{c}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTensor {
    frames: usize,
    contexts: usize,
    labels: usize,
    data: Vec<f64>,
}

impl ScoreTensor {
    pub fn new(frames: usize, contexts: usize, labels: usize, data: Vec<f64>) -> Result<Self, ScorerError> {
        if data.len() != frames * contexts * labels {
            return Err(ScorerError::Dimension(format!(
                "{} values for a {frames}x{contexts}x{labels} tensor",
                data.len()
            )));
        }
        if data.iter().any(|c| !c.is_finite()) {
            return Err(ScorerError::NonFinite { line: 0 });
        }
        Ok(Self {
            frames,
            contexts,
            labels,
            data,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ScorerError> {
        let mut lines = numbered_lines(text);
        let (line, header) = lines.next().ok_or(ScorerError::Parse {
            line: 1,
            msg: "missing SCORES3 header".into(),
        })?;
        let dims = parse_header(line, header, "SCORES3", 3)?;
        let (frames, contexts, labels) = (dims[0], dims[1], dims[2]);
        let data = parse_rows(lines, frames * contexts, labels)?;
        Ok(Self {
            frames,
            contexts,
            labels,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn slice(&self, t: usize, context: usize) -> &[f64] {
        let start = (t * self.contexts + context) * self.labels;
        &self.data[start..start + self.labels]
    }
}

/// Time-independent costs keyed by a `k`-label context.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextTable {
    order: usize,
    labels: usize,
    default_row: Vec<f64>,
    rows: HashMap<Context, Vec<f64>>,
}

impl ContextTable {
    pub fn parse(text: &str, alphabet: &LabelAlphabet) -> Result<Self, ScorerError> {
        let mut lines = numbered_lines(text);
        let (line, header) = lines.next().ok_or(ScorerError::Parse {
            line: 1,
            msg: "missing CTXTABLE header".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "CTXTABLE" {
            return Err(ScorerError::Parse {
                line,
                msg: "expected `CTXTABLE <k> <default-cost>`".into(),
            });
        }
        let order: usize = fields[1].parse().map_err(|_| ScorerError::Parse {
            line,
            msg: format!("bad context size `{}`", fields[1]),
        })?;
        let default: f64 = parse_cost(fields[2], line)?;
        let labels = alphabet.len();
        let mut rows: HashMap<Context, Vec<f64>> = HashMap::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() != order + 2 {
                return Err(ScorerError::Parse {
                    line,
                    msg: format!("expected {} context symbols, a label and a cost", order),
                });
            }
            let mut ctx = Context::new();
            for sym in &fields[..order] {
                if *sym == BOS_SYMBOL {
                    ctx.push(BOS);
                } else {
                    ctx.push(alphabet.id(sym).ok_or_else(|| ScorerError::Parse {
                        line,
                        msg: format!("unknown label `{sym}`"),
                    })?);
                }
            }
            let label = alphabet.id(fields[order]).ok_or_else(|| ScorerError::Parse {
                line,
                msg: format!("unknown label `{}`", fields[order]),
            })?;
            let cost = parse_cost(fields[order + 1], line)?;
            rows.entry(ctx).or_insert_with(|| vec![default; labels])[label as usize] = cost;
        }
        Ok(Self {
            order,
            labels,
            default_row: vec![default; labels],
            rows,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn row(&self, context: &[LabelId]) -> &[f64] {
        self.rows.get(context).unwrap_or(&self.default_row)
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Precomputed,
    FirstOrder,
    ContextTable(Arc<ContextTable>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ScorerKind {
    Precomputed,
    PrecomputedFirstOrder,
    ContextTable,
}

/// Per-utterance scorer input.
#[derive(Clone, Debug)]
pub enum SegmentInput {
    Matrix(ScoreMatrix),
    Tensor(ScoreTensor),
    /// Frame count for time-independent scorers.
    Frames(usize),
}

#[derive(Clone, Debug)]
enum EncoderData {
    Matrix(Arc<ScoreMatrix>),
    Tensor(Arc<ScoreTensor>),
    None,
}

/// Encoder output of one utterance.
#[derive(Clone, Debug)]
pub struct EncoderState {
    frames: usize,
    data: EncoderData,
}

impl EncoderState {
    pub fn frames(&self) -> usize {
        self.frames
    }
}

#[derive(Clone, Debug)]
pub struct Scorer {
    kind: Kind,
    labels: usize,
    history: HistorySpec,
    batch_limit: usize,
}

impl Scorer {
    pub fn precomputed(labels: usize) -> Self {
        Self {
            kind: Kind::Precomputed,
            labels,
            history: HistorySpec::limited(0),
            batch_limit: usize::MAX,
        }
    }

    pub fn first_order(labels: usize) -> Self {
        Self {
            kind: Kind::FirstOrder,
            labels,
            history: HistorySpec::limited(1),
            batch_limit: usize::MAX,
        }
    }

    pub fn context_table(table: ContextTable) -> Self {
        Self {
            labels: table.labels,
            history: HistorySpec::limited(table.order),
            kind: Kind::ContextTable(Arc::new(table)),
            batch_limit: usize::MAX,
        }
    }

    /// Sets which label events enter the context. The context size is fixed
    /// by the scorer kind for first-order and table scorers.
    pub fn with_history_flags(mut self, include_loop: bool, include_blank: bool) -> Self {
        self.history.include_loop = include_loop;
        self.history.include_blank = include_blank;
        self
    }

    /// Overrides the context size; only meaningful for the precomputed
    /// scorer, whose scores ignore it, to control recombination.
    pub fn with_context_size(mut self, size: Option<usize>) -> Self {
        if matches!(self.kind, Kind::Precomputed) {
            self.history.context_size = size;
        }
        self
    }

    pub fn with_batch_limit(mut self, limit: usize) -> Self {
        self.batch_limit = limit.max(1);
        self
    }

    pub fn kind(&self) -> ScorerKind {
        match self.kind {
            Kind::Precomputed => ScorerKind::Precomputed,
            Kind::FirstOrder => ScorerKind::PrecomputedFirstOrder,
            Kind::ContextTable(_) => ScorerKind::ContextTable,
        }
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn history_spec(&self) -> HistorySpec {
        self.history
    }

    pub fn batch_limit(&self) -> usize {
        self.batch_limit
    }

    pub fn time_dependent(&self) -> bool {
        !matches!(self.kind, Kind::ContextTable(_))
    }

    pub fn init_segment(&self, input: SegmentInput) -> Result<EncoderState, ScorerError> {
        match (&self.kind, input) {
            (Kind::Precomputed, SegmentInput::Matrix(m)) => {
                if m.frames > 0 && m.labels != self.labels {
                    return Err(ScorerError::Dimension(format!(
                        "score matrix has {} columns, alphabet has {} labels",
                        m.labels, self.labels
                    )));
                }
                Ok(EncoderState {
                    frames: m.frames,
                    data: EncoderData::Matrix(Arc::new(m)),
                })
            }
            (Kind::FirstOrder, SegmentInput::Tensor(s)) => {
                if s.frames > 0 && (s.labels != self.labels || s.contexts != self.labels + 1) {
                    return Err(ScorerError::Dimension(format!(
                        "tensor is {}x{}, expected {}x{}",
                        s.contexts,
                        s.labels,
                        self.labels + 1,
                        self.labels
                    )));
                }
                Ok(EncoderState {
                    frames: s.frames,
                    data: EncoderData::Tensor(Arc::new(s)),
                })
            }
            (Kind::ContextTable(_), SegmentInput::Frames(frames)) => Ok(EncoderState {
                frames,
                data: EncoderData::None,
            }),
            (_, input) => {
                let name = match input {
                    SegmentInput::Matrix(_) => "score matrix",
                    SegmentInput::Tensor(_) => "score tensor",
                    SegmentInput::Frames(_) => "frame count",
                };
                Err(ScorerError::Input(format!("{name} input for a {:?} scorer", self.kind())))
            }
        }
    }

    pub fn initial_history(&self) -> S2SHistory {
        let labels = match self.history.context_size {
            Some(k) => std::iter::repeat_n(BOS, k).collect(),
            None => Context::new(),
        };
        S2SHistory { labels }
    }

    pub fn extend_history(&self, h: &S2SHistory, label: LabelId, kind: TransitionKind) -> S2SHistory {
        let append = match kind {
            TransitionKind::Forward => true,
            TransitionKind::Loop => self.history.include_loop,
            TransitionKind::Blank => self.history.include_blank,
            TransitionKind::Exit | TransitionKind::Eos => false,
        };
        if !append {
            return h.clone();
        }
        match self.history.context_size {
            Some(0) => h.clone(),
            Some(k) => {
                let mut labels = Context::with_capacity(k);
                let keep = k - 1;
                let start = h.labels.len().saturating_sub(keep);
                labels.extend_from_slice(&h.labels[start..]);
                labels.push(label);
                S2SHistory { labels }
            }
            None => {
                let mut labels = h.labels.clone();
                labels.push(label);
                S2SHistory { labels }
            }
        }
    }

    fn score_one<'a>(&'a self, enc: &'a EncoderState, history: &S2SHistory, t: usize) -> Result<&'a [f64], ScorerError> {
        if self.time_dependent() && t >= enc.frames {
            return Err(ScorerError::FrameRange { t, frames: enc.frames });
        }
        match (&self.kind, &enc.data) {
            (Kind::Precomputed, EncoderData::Matrix(m)) => Ok(m.row(t)),
            (Kind::FirstOrder, EncoderData::Tensor(s)) => {
                let context = history.last().map_or(self.labels, |l| l as usize);
                Ok(s.slice(t, context))
            }
            (Kind::ContextTable(table), _) => Ok(table.row(history.suffix(Some(table.order)))),
            _ => Err(ScorerError::Input("encoder state does not belong to this scorer".into())),
        }
    }

    /// One cost vector per `(history, t)` query, in query order. Queries are
    /// processed in chunks of at most `batch_limit`.
    pub fn score_batch<'a>(
        &'a self,
        enc: &'a EncoderState,
        queries: &[(&S2SHistory, usize)],
    ) -> Result<Vec<&'a [f64]>, ScorerError> {
        let chunk = |qs: &[(&S2SHistory, usize)]| -> Result<Vec<&'a [f64]>, ScorerError> {
            qs.iter().map(|(h, t)| self.score_one(enc, h, *t)).collect()
        };
        let chunks = queries.chunks(self.batch_limit);
        #[cfg(feature = "parallel")]
        if queries.len() > self.batch_limit {
            use rayon::prelude::*;
            let parts: Vec<_> = queries.par_chunks(self.batch_limit).map(chunk).collect();
            return parts.into_iter().try_fold(Vec::with_capacity(queries.len()), |mut acc, p| {
                acc.extend(p?);
                Ok(acc)
            });
        }
        let mut out = Vec::with_capacity(queries.len());
        for qs in chunks {
            out.extend(chunk(qs)?);
        }
        Ok(out)
    }

    /// Number of scorer invocations `score_batch` performs for `n` queries.
    pub fn calls_for(&self, n: usize) -> usize {
        n.div_ceil(self.batch_limit)
    }
}

/// Parses a score-matrix file and prepares the segment in one go.
pub fn load_precomputed(text: &str, labels: usize) -> Result<(Scorer, EncoderState), ScorerError> {
    let scorer = Scorer::precomputed(labels);
    let enc = scorer.init_segment(SegmentInput::Matrix(ScoreMatrix::parse(text)?))?;
    Ok((scorer, enc))
}

pub fn load_first_order(text: &str, alphabet: &LabelAlphabet) -> Result<(Scorer, EncoderState), ScorerError> {
    let tensor = ScoreTensor::parse(text)?;
    if tensor.contexts != tensor.labels + 1 {
        return Err(ScorerError::Dimension(format!(
            "first-order tensor needs {} contexts, file has {}",
            tensor.labels + 1,
            tensor.contexts
        )));
    }
    let scorer = Scorer::first_order(alphabet.len());
    let enc = scorer.init_segment(SegmentInput::Tensor(tensor))?;
    Ok((scorer, enc))
}

pub fn load_context_table(text: &str, alphabet: &LabelAlphabet) -> Result<Scorer, ScorerError> {
    Ok(Scorer::context_table(ContextTable::parse(text, alphabet)?))
}

fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_header(line: usize, header: &str, tag: &str, dims: usize) -> Result<Vec<usize>, ScorerError> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != dims + 1 || fields[0] != tag {
        return Err(ScorerError::Parse {
            line,
            msg: format!("expected `{tag}` header with {dims} dimensions"),
        });
    }
    fields[1..]
        .iter()
        .map(|f| {
            f.parse().map_err(|_| ScorerError::Parse {
                line,
                msg: format!("bad dimension `{f}`"),
            })
        })
        .collect()
}

fn parse_cost(field: &str, line: usize) -> Result<f64, ScorerError> {
    let v: f64 = field.parse().map_err(|_| ScorerError::Parse {
        line,
        msg: format!("bad cost `{field}`"),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ScorerError::NonFinite { line })
    }
}

fn parse_rows<'a>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    rows: usize,
    width: usize,
) -> Result<Vec<f64>, ScorerError> {
    let mut data = Vec::with_capacity(rows * width);
    let mut count = 0;
    for (line, l) in lines {
        count += 1;
        if count > rows {
            return Err(ScorerError::Dimension(format!("line {line}: more than {rows} rows")));
        }
        let before = data.len();
        for f in l.split_whitespace() {
            data.push(parse_cost(f, line)?);
        }
        if data.len() - before != width {
            return Err(ScorerError::Dimension(format!(
                "line {line}: {} columns, expected {width}",
                data.len() - before
            )));
        }
    }
    if count != rows {
        return Err(ScorerError::Dimension(format!("{count} rows, expected {rows}")));
    }
    Ok(data)
}
