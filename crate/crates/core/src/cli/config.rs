//! Flat `key = value` settings. Every key has a default; a config file
//! overrides defaults and command-line values override the file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    /// Subcommands that read this key.
    pub commands: &'static [&'static str],
}

const DECODE: &[&str] = &["decode"];
const MODEL: &[&str] = &["decode", "align", "fsa-export"];
const WER: &[&str] = &["wer"];

pub const KEYS: &[Key] = &[
    Key { name: "lexicon", default: "", help: "lexicon file", commands: MODEL },
    Key { name: "open-vocab", default: "false", help: "one lemma per lexicon label, ignoring LEMMA lines", commands: MODEL },
    Key { name: "topology", default: "ctc", help: "ctc, hmm, rna, rnnt or label_sync", commands: MODEL },
    Key { name: "min-loop", default: "0", help: "minimum label occurrences before leaving a loop topology", commands: MODEL },
    Key { name: "manifest", default: "", help: "tab-separated corpus: recording, channel, input, reference", commands: MODEL },
    Key { name: "out-dir", default: ".", help: "output directory", commands: MODEL },
    Key { name: "workers", default: "1", help: "utterances decoded in parallel", commands: MODEL },
    Key { name: "frame-shift", default: "0.01", help: "seconds per frame", commands: MODEL },
    Key { name: "outputs", default: "ctm,stats", help: "comma list of ctm, nbest, lattice, stats, text", commands: DECODE },
    Key { name: "scorer", default: "precomputed", help: "precomputed, first_order or context_table", commands: DECODE },
    Key { name: "scorer-file", default: "", help: "context table file for the context_table scorer", commands: DECODE },
    Key { name: "scorer-context-size", default: "0", help: "label context kept in histories: a count or `full`", commands: DECODE },
    Key { name: "scorer-history-loop", default: "false", help: "loop labels enter the label history", commands: DECODE },
    Key { name: "scorer-history-blank", default: "false", help: "blank labels enter the label history", commands: DECODE },
    Key { name: "scorer-batch-limit", default: "4096", help: "queries per scorer call", commands: DECODE },
    Key { name: "lm", default: "", help: "comma list of ARPA files, or `zero_gram`", commands: DECODE },
    Key { name: "lm-weights", default: "", help: "comma list of weights when several LMs are combined", commands: DECODE },
    Key { name: "lookahead-lm", default: "", help: "ARPA file for lookahead; empty uses the scoring LM", commands: DECODE },
    Key { name: "recombination-lm", default: "", help: "ARPA file or `full_context`; empty uses the scoring LM", commands: DECODE },
    Key { name: "beam-mode", default: "individual", help: "individual or global", commands: DECODE },
    Key { name: "global-threshold", default: "inf", help: "global beam score threshold", commands: DECODE },
    Key { name: "global-histogram", default: "inf", help: "global beam histogram limit", commands: DECODE },
    Key { name: "global-fixed-size", default: "none", help: "fixed global beam size instead of score/histogram", commands: DECODE },
    Key { name: "label-beam-threshold", default: "inf", help: "label-level score threshold", commands: DECODE },
    Key { name: "label-beam-histogram", default: "inf", help: "label-level histogram limit", commands: DECODE },
    Key { name: "word-end-beam-threshold", default: "inf", help: "word-end score threshold", commands: DECODE },
    Key { name: "word-end-beam-histogram", default: "inf", help: "word-end histogram limit", commands: DECODE },
    Key { name: "ended-beam-threshold", default: "inf", help: "ended-hypothesis score threshold", commands: DECODE },
    Key { name: "ended-beam-histogram", default: "inf", help: "ended-hypothesis histogram limit", commands: DECODE },
    Key { name: "local-threshold", default: "inf", help: "per-step label cost margin", commands: DECODE },
    Key { name: "blank-threshold", default: "-inf", help: "blank cost at or below which only blank is expanded", commands: DECODE },
    Key { name: "eos-threshold", default: "inf", help: "EOS cost margin", commands: DECODE },
    Key { name: "max-step-ratio", default: "2.0", help: "step limit per frame for non time-synchronous search", commands: DECODE },
    Key { name: "recombination", default: "viterbi", help: "viterbi or full_sum", commands: DECODE },
    Key { name: "recombination-history-limit", default: "none", help: "label context used in recombination keys", commands: DECODE },
    Key { name: "length-normalization", default: "false", help: "rank ended hypotheses by cost per label", commands: DECODE },
    Key { name: "early-stopping", default: "true", help: "stop once no live hypothesis can win", commands: DECODE },
    Key { name: "lm-scale", default: "1.0", help: "LM scale", commands: DECODE },
    Key { name: "lookahead", default: "none", help: "none, unigram or higher", commands: DECODE },
    Key { name: "lookahead-scale", default: "1.0", help: "lookahead scale", commands: DECODE },
    Key { name: "lookahead-cache", default: "1024", help: "cached higher-order lookahead tables", commands: DECODE },
    Key { name: "nbest", default: "10", help: "N-best list size", commands: DECODE },
    Key { name: "lattice", default: "false", help: "keep word-end alternatives for lattices", commands: DECODE },
    Key { name: "ref", default: "", help: "reference transcriptions: `<id> <words>` lines", commands: WER },
    Key { name: "hyp", default: "", help: "hypothesis transcriptions: `<id> <words>` lines", commands: WER },
];

pub fn key(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn normalize(name: &str) -> String {
    name.trim().replace('_', "-")
}

/// Effective values of every key a subcommand reads.
#[derive(Clone, Debug)]
pub struct Settings {
    command: String,
    values: BTreeMap<&'static str, String>,
}

impl Settings {
    /// Applies `file` (config text) and then `cli` on top of the defaults.
    pub fn resolve(command: &str, file: Option<&str>, cli: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<&'static str, String> = KEYS
            .iter()
            .filter(|k| k.commands.contains(&command))
            .map(|k| (k.name, k.default.to_string()))
            .collect();
        let mut set = |name: &str, value: &str, origin: &str| -> Result<()> {
            let name = normalize(name);
            let k = key(&name)
                .filter(|k| k.commands.contains(&command))
                .ok_or_else(|| Error::Config(format!("{origin}: unknown key `{name}` for {command}")))?;
            values.insert(k.name, value.trim().to_string());
            Ok(())
        };
        if let Some(text) = file {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
                set(k, v, &format!("config line {}", i + 1))?;
            }
        }
        for (k, v) in cli {
            set(k, v, "command line")?;
        }
        Ok(Self {
            command: command.to_string(),
            values,
        })
    }

    pub fn get(&self, name: &str) -> &str {
        self.values.get(name).map_or("", String::as_str)
    }

    pub fn set(&mut self, name: &'static str, value: impl Into<String>) {
        self.values.insert(name, value.into());
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> Result<T> {
        let v = self.get(name);
        v.parse()
            .map_err(|_| Error::Config(format!("{name}: cannot parse `{v}`")))
    }

    pub fn flag(&self, name: &str) -> Result<bool> {
        match self.get(name) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::Config(format!("{name}: expected true or false, got `{v}`"))),
        }
    }

    /// A count where `inf`, `none` and `unlimited` mean no limit.
    pub fn limit(&self, name: &str) -> Result<Option<usize>> {
        match self.get(name) {
            "inf" | "none" | "unlimited" => Ok(None),
            _ => self.parse(name).map(Some),
        }
    }

    pub fn list(&self, name: &str) -> Vec<String> {
        self.get(name)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    }

    /// Every effective value in `key = value` form, readable back as a
    /// config file.
    pub fn echo(&self) -> String {
        let mut out = format!("# {} configuration\n", self.command);
        for k in KEYS.iter().filter(|k| self.values.contains_key(k.name)) {
            let _ = writeln!(out, "{} = {}", k.name, self.values[k.name]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn precedence() {
        let file = "# comment\nlm_scale = 0.5\nnbest = 3\n";
        let s = Settings::resolve("decode", Some(file), &cli(&[("nbest", "7")])).unwrap();
        assert_eq!(s.get("lm-scale"), "0.5");
        assert_eq!(s.get("nbest"), "7");
        assert_eq!(s.get("beam-mode"), "individual");
    }

    #[test]
    fn unknown_and_malformed() {
        assert!(Settings::resolve("decode", Some("bogus = 1"), &[]).is_err());
        assert!(Settings::resolve("decode", Some("nbest 3"), &[]).is_err());
        assert!(Settings::resolve("wer", None, &cli(&[("nbest", "3")])).is_err());
        let s = Settings::resolve("decode", None, &cli(&[("nbest", "x")])).unwrap();
        assert!(s.parse::<usize>("nbest").is_err());
    }

    #[test]
    fn echo_reads_back() {
        let s = Settings::resolve("decode", None, &cli(&[("lm-scale", "0.3")])).unwrap();
        let again = Settings::resolve("decode", Some(&s.echo()), &[]).unwrap();
        assert_eq!(again.values, s.values);
        assert!(s.echo().contains("lm-scale = 0.3\n"));
    }

    #[test]
    fn limits() {
        let s = Settings::resolve("decode", None, &cli(&[("label-beam-histogram", "12")])).unwrap();
        assert_eq!(s.limit("label-beam-histogram").unwrap(), Some(12));
        assert_eq!(s.limit("word-end-beam-histogram").unwrap(), None);
    }
}
