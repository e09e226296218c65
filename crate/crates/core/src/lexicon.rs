//! Broad-sense lexicon: label alphabet plus lemmata binding a transcription
//! output to one or more label sequences and an optional LM token sequence.
//!
//! File format (UTF-8, tab-separated fields, `#` starts a comment line):
//!
//! ```text
//! LABELS	k a t r <b>
//! SPECIAL	blank=<b>
//! LEMMA	cat	cat	k a t
//! LEMMA	car	-	k a r;k a a r
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::error::{LexiconError, Location};

pub type LabelId = u32;

/// Padding symbol for label contexts shorter than the context size.
pub const BOS_SYMBOL: &str = "<bos>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelAlphabet {
    symbols: Vec<String>,
    index: HashMap<String, LabelId>,
    blank: Option<LabelId>,
    eos: Option<LabelId>,
}

impl LabelAlphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self, LexiconError> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(LexiconError::Alphabet("no labels".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (id, sym) in symbols.iter().enumerate() {
            if sym.is_empty() || sym.chars().any(char::is_whitespace) || sym.contains(';') {
                return Err(LexiconError::Alphabet(format!("invalid label symbol `{sym}`")));
            }
            if sym == BOS_SYMBOL {
                return Err(LexiconError::Alphabet(format!("`{BOS_SYMBOL}` is reserved")));
            }
            if index.insert(sym.clone(), id as LabelId).is_some() {
                return Err(LexiconError::Alphabet(format!("duplicate label symbol `{sym}`")));
            }
        }
        Ok(Self {
            symbols,
            index,
            blank: None,
            eos: None,
        })
    }

    pub fn with_specials(mut self, blank: Option<&str>, eos: Option<&str>) -> Result<Self, LexiconError> {
        let lookup = |s: &str| {
            self.id(s)
                .ok_or_else(|| LexiconError::Alphabet(format!("special symbol `{s}` is not a label")))
        };
        let blank = blank.map(lookup).transpose()?;
        let eos = eos.map(lookup).transpose()?;
        if blank.is_some() && blank == eos {
            return Err(LexiconError::Alphabet("blank and EOS must be distinct labels".into()));
        }
        self.blank = blank;
        self.eos = eos;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<LabelId> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: LabelId) -> &str {
        &self.symbols[id as usize]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn blank(&self) -> Option<LabelId> {
        self.blank
    }

    pub fn eos(&self) -> Option<LabelId> {
        self.eos
    }

    pub fn is_special(&self, id: LabelId) -> bool {
        Some(id) == self.blank || Some(id) == self.eos
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma {
    pub orth: String,
    pub variants: Vec<Vec<LabelId>>,
    /// `None` marks an LM-transparent lemma: no LM score, LM state unchanged.
    pub lm_tokens: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    alphabet: LabelAlphabet,
    lemmata: Vec<Lemma>,
}

impl Lexicon {
    /// Validates `lemmata` against `alphabet`. Errors are localized by lemma
    /// position.
    pub fn new(alphabet: LabelAlphabet, lemmata: Vec<Lemma>) -> Result<Self, LexiconError> {
        let locations: Vec<Location> = (0..lemmata.len()).map(Location::Lemma).collect();
        Self::validated(alphabet, lemmata, &locations)
    }

    fn validated(
        alphabet: LabelAlphabet,
        lemmata: Vec<Lemma>,
        locations: &[Location],
    ) -> Result<Self, LexiconError> {
        let mut seen: HashSet<(&str, Option<&[String]>, Vec<&[LabelId]>)> = HashSet::new();
        for (lemma, &at) in lemmata.iter().zip(locations) {
            if lemma.orth.is_empty() || lemma.orth.contains(['\t', '\n']) {
                return Err(LexiconError::Syntax {
                    at,
                    msg: "orthography must be non-empty and tab-free".into(),
                });
            }
            if lemma.variants.is_empty() {
                return Err(LexiconError::Syntax {
                    at,
                    msg: "lemma needs at least one variant".into(),
                });
            }
            if matches!(&lemma.lm_tokens, Some(t) if t.is_empty()) {
                return Err(LexiconError::Syntax {
                    at,
                    msg: "empty LM token sequence (use `-` for none)".into(),
                });
            }
            let mut variants = HashSet::new();
            for variant in &lemma.variants {
                if variant.is_empty() {
                    return Err(LexiconError::EmptyVariant { at });
                }
                for &label in variant {
                    if label as usize >= alphabet.len() {
                        return Err(LexiconError::UnknownLabel {
                            at,
                            symbol: format!("#{label}"),
                        });
                    }
                    if alphabet.is_special(label) {
                        return Err(LexiconError::SpecialInVariant {
                            at,
                            symbol: alphabet.symbol(label).to_string(),
                        });
                    }
                }
                if !variants.insert(variant.as_slice()) {
                    return Err(LexiconError::DuplicateVariant {
                        at,
                        orth: lemma.orth.clone(),
                    });
                }
            }
            let mut variant_set: Vec<&[LabelId]> = variants.into_iter().collect();
            variant_set.sort();
            let key = (lemma.orth.as_str(), lemma.lm_tokens.as_deref(), variant_set);
            if !seen.insert(key) {
                return Err(LexiconError::DuplicateLemma {
                    at,
                    orth: lemma.orth.clone(),
                });
            }
        }
        Ok(Self { alphabet, lemmata })
    }

    pub fn alphabet(&self) -> &LabelAlphabet {
        &self.alphabet
    }

    pub fn lemmata(&self) -> &[Lemma] {
        &self.lemmata
    }

    /// Lemma indices that carry no LM tokens.
    pub fn lm_transparent(&self) -> Vec<usize> {
        (0..self.lemmata.len())
            .filter(|&i| self.lemmata[i].lm_tokens.is_none())
            .collect()
    }

    /// Lemma indices grouped by orthography, in lexicon order.
    pub fn lemmata_by_orth(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, lemma) in self.lemmata.iter().enumerate() {
            map.entry(lemma.orth.as_str()).or_default().push(i);
        }
        map
    }

    /// Serializes to the lexicon file format; `parse_lexicon` reads it back.
    pub fn render(&self) -> String {
        let a = &self.alphabet;
        let mut out = format!("LABELS\t{}\n", a.symbols().join(" "));
        let mut specials = Vec::new();
        if let Some(b) = a.blank() {
            specials.push(format!("blank={}", a.symbol(b)));
        }
        if let Some(e) = a.eos() {
            specials.push(format!("eos={}", a.symbol(e)));
        }
        if !specials.is_empty() {
            let _ = writeln!(out, "SPECIAL\t{}", specials.join(" "));
        }
        for lemma in &self.lemmata {
            let lm = match &lemma.lm_tokens {
                Some(tokens) => tokens.join(" "),
                None => "-".to_string(),
            };
            let variants: Vec<String> = lemma
                .variants
                .iter()
                .map(|v| v.iter().map(|&l| a.symbol(l)).collect::<Vec<_>>().join(" "))
                .collect();
            let _ = writeln!(out, "LEMMA\t{}\t{}\t{}", lemma.orth, lm, variants.join(";"));
        }
        out
    }
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .peekable();

    let (first_line, first) = lines.next().ok_or(LexiconError::Syntax {
        at: Location::Line(1),
        msg: "missing LABELS line".into(),
    })?;
    let syntax = |line: usize, msg: &str| LexiconError::Syntax {
        at: Location::Line(line),
        msg: msg.to_string(),
    };
    let labels = first
        .strip_prefix("LABELS\t")
        .ok_or_else(|| syntax(first_line, "expected `LABELS<TAB>...`"))?;
    let mut alphabet = LabelAlphabet::new(labels.split_whitespace()).map_err(|e| match e {
        LexiconError::Alphabet(msg) => syntax(first_line, &msg),
        other => other,
    })?;

    if let Some(&(line, l)) = lines.peek() {
        if let Some(spec) = l.strip_prefix("SPECIAL\t") {
            lines.next();
            let (mut blank, mut eos) = (None, None);
            for item in spec.split_whitespace() {
                match item.split_once('=') {
                    Some(("blank", s)) if blank.is_none() => blank = Some(s),
                    Some(("eos", s)) if eos.is_none() => eos = Some(s),
                    _ => return Err(syntax(line, &format!("bad SPECIAL entry `{item}`"))),
                }
            }
            alphabet = alphabet.with_specials(blank, eos).map_err(|e| match e {
                LexiconError::Alphabet(msg) => syntax(line, &msg),
                other => other,
            })?;
        }
    }

    let mut lemmata = Vec::new();
    let mut locations = Vec::new();
    for (line, l) in lines {
        let at = Location::Line(line);
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() != 4 || fields[0] != "LEMMA" {
            return Err(syntax(line, "expected `LEMMA<TAB>orth<TAB>lm-tokens<TAB>variants`"));
        }
        let lm_tokens = match fields[2].trim() {
            "-" => None,
            toks => Some(toks.split_whitespace().map(str::to_string).collect()),
        };
        let mut variants = Vec::new();
        for v in fields[3].split(';') {
            let mut seq = Vec::new();
            for sym in v.split_whitespace() {
                let id = alphabet.id(sym).ok_or_else(|| LexiconError::UnknownLabel {
                    at,
                    symbol: sym.to_string(),
                })?;
                seq.push(id);
            }
            if seq.is_empty() {
                return Err(LexiconError::EmptyVariant { at });
            }
            variants.push(seq);
        }
        lemmata.push(Lemma {
            orth: fields[1].to_string(),
            variants,
            lm_tokens,
        });
        locations.push(at);
    }
    Lexicon::validated(alphabet, lemmata, &locations)
}

/// One single-label lemma per non-special label: the open-vocabulary case
/// where transcription, model and LM share one unit set.
pub fn build_open_vocab(alphabet: &LabelAlphabet) -> Result<Lexicon, LexiconError> {
    let lemmata: Vec<Lemma> = (0..alphabet.len() as LabelId)
        .filter(|&id| !alphabet.is_special(id))
        .map(|id| Lemma {
            orth: alphabet.symbol(id).to_string(),
            variants: vec![vec![id]],
            lm_tokens: Some(vec![alphabet.symbol(id).to_string()]),
        })
        .collect();
    if lemmata.is_empty() {
        return Err(LexiconError::NoLexicalContent);
    }
    Lexicon::new(alphabet.clone(), lemmata)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const CAT_CAR: &str = "LABELS\tk a t r\nLEMMA\tcat\tcat\tk a t\nLEMMA\tcar\tcar\tk a r\n";

    #[test]
    fn parses_two_lemmata() {
        let lex = parse_lexicon(CAT_CAR).unwrap();
        assert_eq!(lex.alphabet().len(), 4);
        assert_eq!(lex.lemmata().len(), 2);
        assert_eq!(lex.lemmata()[0].orth, "cat");
        assert_eq!(lex.lemmata()[0].variants, vec![vec![0, 1, 2]]);
        assert_eq!(lex.lemmata()[1].lm_tokens, Some(vec!["car".to_string()]));
    }

    #[test]
    fn unknown_label_reports_line() {
        let text = "# comment\nLABELS\tk a t\nLEMMA\tcat\tcat\tk a t\nLEMMA\tzap\tzap\tz a\n";
        assert_eq!(
            parse_lexicon(text).unwrap_err(),
            LexiconError::UnknownLabel {
                at: Location::Line(4),
                symbol: "z".into()
            }
        );
    }

    #[test]
    fn multiple_variants() {
        let text = "LABELS\tk a t d\nLEMMA\tcat\tcat\tk a t;k a d\n";
        let lex = parse_lexicon(text).unwrap();
        assert_eq!(lex.lemmata().len(), 1);
        assert_eq!(lex.lemmata()[0].variants.len(), 2);
    }

    #[test]
    fn rejects_empty_variant_and_duplicates() {
        let empty = "LABELS\tk a\nLEMMA\tka\t-\tk a;\n";
        assert_eq!(
            parse_lexicon(empty).unwrap_err(),
            LexiconError::EmptyVariant { at: Location::Line(2) }
        );
        let dup = "LABELS\tk a\nLEMMA\tka\t-\tk a\nLEMMA\tka\t-\tk a\n";
        assert!(matches!(
            parse_lexicon(dup).unwrap_err(),
            LexiconError::DuplicateLemma { at: Location::Line(3), .. }
        ));
        let dup_variant = "LABELS\tk a\nLEMMA\tka\t-\tk a;k a\n";
        assert!(matches!(
            parse_lexicon(dup_variant).unwrap_err(),
            LexiconError::DuplicateVariant { .. }
        ));
    }

    #[test]
    fn homophones_are_allowed() {
        let text = "LABELS\ta b\nLEMMA\tx\tx\ta b\nLEMMA\ty\ty\ta b\n";
        assert_eq!(parse_lexicon(text).unwrap().lemmata().len(), 2);
    }

    #[test]
    fn specials_cannot_appear_in_variants() {
        let text = "LABELS\ta b <b>\nSPECIAL\tblank=<b>\nLEMMA\tx\t-\ta <b>\n";
        assert!(matches!(
            parse_lexicon(text).unwrap_err(),
            LexiconError::SpecialInVariant { at: Location::Line(3), .. }
        ));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        assert!(matches!(
            parse_lexicon("LABELS\ta\nLEMMA\tx\ta\n").unwrap_err(),
            LexiconError::Syntax { at: Location::Line(2), .. }
        ));
        assert!(matches!(
            parse_lexicon("LABELS\ta\nSPECIAL\tblank=q\n").unwrap_err(),
            LexiconError::Syntax { at: Location::Line(2), .. }
        ));
        assert!(matches!(
            parse_lexicon("LEMMA\tx\t-\ta\n").unwrap_err(),
            LexiconError::Syntax { at: Location::Line(1), .. }
        ));
    }

    #[test]
    fn lm_transparent_lemmata_are_flagged() {
        let text = "LABELS\ta b\nLEMMA\tx\t-\ta\nLEMMA\ty\ty\tb\n";
        assert_eq!(parse_lexicon(text).unwrap().lm_transparent(), vec![0]);
    }

    #[test]
    fn open_vocab() {
        let a = LabelAlphabet::new(["a", "b", "c", "<b>"])
            .unwrap()
            .with_specials(Some("<b>"), None)
            .unwrap();
        let lex = build_open_vocab(&a).unwrap();
        assert_eq!(lex.lemmata().len(), 3);
        assert!(lex.lemmata().iter().all(|l| l.variants.len() == 1 && l.variants[0].len() == 1));

        let single = LabelAlphabet::new(["a"]).unwrap();
        assert_eq!(build_open_vocab(&single).unwrap().lemmata().len(), 1);

        let only_blank = LabelAlphabet::new(["<b>"]).unwrap().with_specials(Some("<b>"), None).unwrap();
        assert_eq!(build_open_vocab(&only_blank).unwrap_err(), LexiconError::NoLexicalContent);
    }

    fn arb_lexicon() -> impl Strategy<Value = Lexicon> {
        (2usize..6, any::<bool>()).prop_flat_map(|(n, with_blank)| {
            let labels = n as u32;
            let lexical = if with_blank { labels - 1 } else { labels };
            let lemma = (
                prop::collection::vec(prop::collection::vec(0..lexical, 1..4), 1..3),
                prop::option::of(prop::collection::vec("[a-z]{1,3}", 1..3)),
            );
            prop::collection::vec(lemma, 1..6).prop_map(move |raw| {
                let syms: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
                let mut alphabet = LabelAlphabet::new(syms.clone()).unwrap();
                if with_blank {
                    alphabet = alphabet.with_specials(Some(&syms[n - 1]), None).unwrap();
                }
                let lemmata = raw
                    .into_iter()
                    .enumerate()
                    .map(|(i, (mut variants, lm_tokens))| {
                        variants.sort();
                        variants.dedup();
                        Lemma {
                            orth: format!("w{i}"),
                            variants,
                            lm_tokens,
                        }
                    })
                    .collect();
                Lexicon::new(alphabet, lemmata).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(lex in arb_lexicon()) {
            prop_assert_eq!(parse_lexicon(&lex.render()).unwrap(), lex);
        }
    }
}
