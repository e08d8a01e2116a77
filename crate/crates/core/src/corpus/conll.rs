//! Two-column token files: `surface<TAB>label`, blank line between
//! sentences, optional `#label=<sentence label>` directive before the first
//! token of a sentence.

use std::fmt::Write as _;
use std::path::Path;

use super::{CorpusError, LabelScheme, Provenance, SchemeMode, Sentence, Token};

const DIRECTIVE: &str = "#label=";

/// How strictly token lines are read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseMode {
    /// Every token line needs a known label and every identical-mode
    /// sentence needs a `#label=` directive.
    Labelled,
    /// Labels may be missing (prediction input); missing token labels and
    /// sentence labels fall back to the default.
    Unlabelled,
}

pub fn read_conll(path: &Path, scheme: &LabelScheme, mode: ParseMode) -> Result<Vec<Sentence>, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_conll_str(&text, scheme, mode)
}

/// Strict parse of a labelled file.
pub fn parse_conll(path: &Path, scheme: &LabelScheme) -> Result<Vec<Sentence>, CorpusError> {
    read_conll(path, scheme, ParseMode::Labelled)
}

struct Pending {
    tokens: Vec<Token>,
    directive: Option<usize>,
    start_line: usize,
}

pub fn parse_conll_str(text: &str, scheme: &LabelScheme, mode: ParseMode) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    let mut pending: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(p) = pending.take() {
                out.push(finish(p, scheme, mode)?);
            }
            continue;
        }
        let cur = pending.get_or_insert_with(|| Pending {
            tokens: Vec::new(),
            directive: None,
            start_line: line_no,
        });
        if !line.contains('\t') {
            if let Some(label) = line.strip_prefix(DIRECTIVE) {
                if !cur.tokens.is_empty() {
                    return Err(CorpusError::Parse {
                        line: line_no,
                        message: "sentence label directive after the first token".into(),
                    });
                }
                let label = label.trim();
                let idx = scheme.sentence_index(label).ok_or_else(|| CorpusError::UnknownLabel {
                    line: line_no,
                    label: label.to_string(),
                })?;
                cur.directive = Some(idx);
                continue;
            }
            if mode == ParseMode::Unlabelled {
                cur.tokens.push(Token {
                    surface: line.trim().to_string(),
                    label: scheme.default_token(),
                    supervised: false,
                });
                continue;
            }
            return Err(CorpusError::Parse {
                line: line_no,
                message: format!("expected `surface<TAB>label`, found `{line}`"),
            });
        }
        let (surface, label) = line.split_once('\t').expect("line contains a tab");
        if surface.is_empty() {
            return Err(CorpusError::Parse {
                line: line_no,
                message: "empty token surface".into(),
            });
        }
        let label = label.trim();
        let label = match scheme.token_index(label) {
            Some(i) => i,
            None if mode == ParseMode::Unlabelled && label.is_empty() => scheme.default_token(),
            None => {
                return Err(CorpusError::UnknownLabel {
                    line: line_no,
                    label: label.to_string(),
                })
            }
        };
        cur.tokens.push(Token {
            surface: surface.to_string(),
            label,
            supervised: true,
        });
    }
    if let Some(p) = pending.take() {
        out.push(finish(p, scheme, mode)?);
    }
    Ok(out)
}

fn finish(p: Pending, scheme: &LabelScheme, mode: ParseMode) -> Result<Sentence, CorpusError> {
    if p.tokens.is_empty() {
        return Err(CorpusError::Parse {
            line: p.start_line,
            message: "sentence label directive without tokens".into(),
        });
    }
    let (label, provenance) = match (p.directive, scheme.mode(), mode) {
        (Some(l), _, _) => (l, Provenance::Annotated),
        (None, SchemeMode::Binary, _) => {
            let labels: Vec<usize> = p.tokens.iter().map(|t| t.label).collect();
            (scheme.derive_sentence_label(&labels)?, Provenance::Derived)
        }
        (None, SchemeMode::Identical, ParseMode::Unlabelled) => (scheme.default_sentence(), Provenance::Derived),
        (None, SchemeMode::Identical, ParseMode::Labelled) => {
            return Err(CorpusError::Parse {
                line: p.start_line,
                message: "missing `#label=` directive; identical tagsets need annotated sentence labels".into(),
            })
        }
    };
    Ok(Sentence {
        tokens: p.tokens,
        label,
        provenance,
    })
}

/// Serialises sentences in the same format. Annotated sentence labels are
/// written as directives; derived ones are left implicit.
pub fn write_conll(sentences: &[Sentence], scheme: &LabelScheme) -> String {
    let mut out = String::new();
    for (i, s) in sentences.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        if s.provenance == Provenance::Annotated {
            let _ = writeln!(out, "{DIRECTIVE}{}", scheme.sentence_labels()[s.label]);
        }
        for t in &s.tokens {
            let _ = writeln!(out, "{}\t{}", t.surface, scheme.token_labels()[t.label]);
        }
    }
    out
}
