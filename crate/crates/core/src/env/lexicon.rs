use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::emotion::Polarity;
use crate::text::{insertion_positions, segment};
use crate::{Error, Result};

const BUILTIN: &str = include_str!("../../data/lexicon.txt");

/// Sentence templates and slot values, grouped by section name.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    sections: BTreeMap<String, Vec<String>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(BUILTIN).expect("built-in lexicon is valid")
    }
}

impl Lexicon {
    pub fn parse(src: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (n, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            let Some(sec) = &current else {
                return Err(Error::Config(format!(
                    "lexicon line {}: entry before any section",
                    n + 1
                )));
            };
            sections.get_mut(sec).expect("section exists").push(line.to_string());
        }
        let lex = Lexicon { sections };
        lex.validate()?;
        Ok(lex)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    fn validate(&self) -> Result<()> {
        for required in ["reply", "directed", "general", "distractor", "greeting", "signoff"] {
            if self.section(required).is_empty() {
                return Err(Error::Config(format!(
                    "lexicon section [{required}] is missing or empty"
                )));
            }
        }
        for p in [Polarity::Positive, Polarity::Negative] {
            if self.emotion_words(p).is_empty() {
                return Err(Error::Config(
                    "lexicon needs positive and negative emotion words".into(),
                ));
            }
        }
        for (name, entries) in &self.sections {
            if name.starts_with("slot.") || name.starts_with("emotion.") {
                continue;
            }
            for t in entries {
                let positions = insertion_positions(t);
                if positions.len() != 1 || positions[0] != t.len() {
                    return Err(Error::Config(format!(
                        "template {t:?} in [{name}] must end with its only split mark"
                    )));
                }
                for slot in slots_of(t) {
                    if slot != "emo" && self.section(&format!("slot.{slot}")).is_empty() {
                        return Err(Error::Config(format!("template {t:?}: unknown slot {{{slot}}}")));
                    }
                }
            }
        }
        let directed = self.registers(true);
        if let Some(dup) = self.registers(false).iter().find(|t| directed.contains(t)) {
            return Err(Error::Config(format!("template {dup:?} is both directed and general")));
        }
        Ok(())
    }

    fn registers(&self, directed: bool) -> Vec<&String> {
        self.sections
            .iter()
            .filter(|(k, _)| {
                if directed {
                    k.starts_with("directed")
                } else {
                    k.starts_with("general")
                }
            })
            .flat_map(|(_, v)| v)
            .collect()
    }

    pub fn section(&self, name: &str) -> &[String] {
        self.sections.get(name).map_or(&[], Vec::as_slice)
    }

    pub fn emotion_words(&self, p: Polarity) -> &[String] {
        self.section(match p {
            Polarity::Positive => "emotion.positive",
            Polarity::Negative => "emotion.negative",
        })
    }

    /// Request templates of `action` in phrasing family `family`.
    pub fn action_templates(&self, action: &str, family: usize) -> &[String] {
        self.section(&format!("action.{action}.{family}"))
    }

    /// Number of phrasing families available for `action`.
    pub fn families(&self, action: &str) -> usize {
        (0..)
            .take_while(|f| !self.action_templates(action, *f).is_empty())
            .count()
    }

    /// Directed-emotion templates usable with polarity `p`.
    pub fn directed_templates(&self, p: Polarity) -> Vec<&String> {
        let specific = match p {
            Polarity::Positive => "directed.positive",
            Polarity::Negative => "directed.negative",
        };
        self.section("directed").iter().chain(self.section(specific)).collect()
    }

    /// Fills every `{slot}` of `template`; `{emo}` uses words of `polarity`.
    pub fn render<R: Rng + ?Sized>(&self, template: &str, polarity: Option<Polarity>, rng: &mut R) -> String {
        let mut out = String::with_capacity(template.len() + 16);
        let mut rest = template;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("validated template");
            let slot = &rest[open + 1..close];
            let pool = if slot == "emo" {
                self.emotion_words(polarity.unwrap_or(Polarity::Positive))
            } else {
                self.section(&format!("slot.{slot}"))
            };
            out.push_str(pool.choose(rng).expect("validated slot"));
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }

    pub fn pick<'a, R: Rng + ?Sized>(&'a self, section: &str, rng: &mut R) -> &'a str {
        self.section(section).choose(rng).map_or("", String::as_str)
    }
}

fn slots_of(t: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        let Some(len) = rest[open..].find('}') else { break };
        out.push(&rest[open + 1..open + len]);
        rest = &rest[open + len + 1..];
    }
    out
}

/// Whether `text` renders to exactly one segment.
pub fn is_single_segment(text: &str) -> bool {
    segment(text).len() == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{MULTI_CLASS_ACTIONS, MULTI_LABEL_ACTIONS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtin_lexicon_covers_every_action() {
        let lex = Lexicon::default();
        for a in MULTI_CLASS_ACTIONS.iter().chain(&MULTI_LABEL_ACTIONS) {
            assert!(lex.families(a) >= 2, "{a}");
        }
    }

    #[test]
    fn rendered_templates_are_single_segments() {
        let lex = Lexicon::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (name, entries) in &lex.sections {
            if name.starts_with("slot.") || name.starts_with("emotion.") {
                continue;
            }
            for t in entries {
                for _ in 0..5 {
                    let r = lex.render(t, Some(Polarity::Negative), &mut rng);
                    assert!(is_single_segment(&r), "{r}");
                    assert!(!r.contains('{'));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_templates() {
        let base = "[reply]\nok.\n[directed]\nyes!\n[general]\nhm!\n[distractor]\nx.\n[greeting]\nhi,\n[signoff]\nbye.\n[emotion.positive]\ngood\n[emotion.negative]\nbad\n";
        assert!(Lexicon::parse(base).is_ok());
        assert!(Lexicon::parse(&format!("{base}[distractor]\nno mark\n")).is_err());
        assert!(Lexicon::parse(&format!("{base}[distractor]\ntwo, marks.\n")).is_err());
        assert!(Lexicon::parse(&format!("{base}[distractor]\nsee {{nope}}.\n")).is_err());
        assert!(Lexicon::parse(&format!("{base}[general.x]\nyes!\n")).is_err());
    }
}
