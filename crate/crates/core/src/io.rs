//! Corpus ingestion, segmented-corpus rendering and model files.
//!
//! Model files are line oriented. Token texts are escaped so that a
//! backslash, tab, LF or CR inside a token never collides with the
//! framing: `\\`, `\t`, `\n`, `\r`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::bpe::{MergeRule, MergeTable};
use crate::error::{Error, Result};
use crate::model::{tokenize_line, BoundaryMode, SymbolSequence, Token, Vocabulary, BLANK};

pub const BPE_HEADER: &str = "#lcpseg-bpe v1";
pub const LCP_HEADER: &str = "#lcpseg-lcp v1";

pub fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(text: &str) -> Option<String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next()? {
            '\\' => '\\',
            't' => '\t',
            'n' => '\n',
            'r' => '\r',
            _ => return None,
        });
    }
    Some(out)
}

/// Reads LF-separated lines as raw strings, keeping empty lines.
pub fn read_lines<R: Read>(reader: R) -> Result<Vec<String>> {
    let mut reader = BufReader::new(reader);
    let mut lines = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        let line = String::from_utf8(std::mem::take(&mut buf)).map_err(|_| Error::Decode {
            line: lines.len() + 1,
        })?;
        lines.push(line);
    }
    Ok(lines)
}

pub fn read_raw_corpus(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_lines(file)
}

/// Tokenizes every line; line `i` gets origin `i`.
pub fn tokenize_corpus<S: AsRef<str>>(lines: &[S], mode: BoundaryMode) -> Vec<SymbolSequence> {
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| tokenize_line(l.as_ref(), mode, i))
        .collect()
}

pub fn read_corpus<R: Read>(reader: R, mode: BoundaryMode) -> Result<Vec<SymbolSequence>> {
    Ok(tokenize_corpus(&read_lines(reader)?, mode))
}

/// One sequence per line of `path`, empty lines included.
pub fn load_corpus(path: &Path, mode: BoundaryMode) -> Result<Vec<SymbolSequence>> {
    Ok(tokenize_corpus(&read_raw_corpus(path)?, mode))
}

/// How segmented sentences are written as text.
///
/// Tokens are joined by `separator`; blanks inside the data are written as
/// `blank_marker`. A backslash, a literal marker or a literal separator in
/// the data is preceded by a backslash.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentFormat {
    pub separator: String,
    pub blank_marker: String,
}

impl Default for SegmentFormat {
    fn default() -> Self {
        SegmentFormat {
            separator: " ".into(),
            blank_marker: "\u{2581}".into(),
        }
    }
}

impl SegmentFormat {
    pub fn new(separator: impl Into<String>, blank_marker: impl Into<String>) -> Result<Self> {
        let fmt = SegmentFormat {
            separator: separator.into(),
            blank_marker: blank_marker.into(),
        };
        if fmt.separator.is_empty() || fmt.blank_marker.is_empty() {
            return Err(Error::param("separator and blank marker must be non-empty"));
        }
        if fmt.separator.contains('\n') || fmt.blank_marker.contains('\n') {
            return Err(Error::param(
                "separator and blank marker must not contain LF",
            ));
        }
        if fmt.separator.starts_with('\\')
            || fmt.blank_marker.starts_with('\\')
            || fmt.separator.starts_with(&fmt.blank_marker)
            || fmt.blank_marker.starts_with(&fmt.separator)
        {
            return Err(Error::param(
                "separator and blank marker must be distinct and not start with a backslash",
            ));
        }
        Ok(fmt)
    }

    fn render_token(&self, text: &str, out: &mut String) {
        let mut rest = text;
        while let Some(c) = rest.chars().next() {
            if c == '\\' {
                out.push_str("\\\\");
            } else if rest.starts_with(&self.blank_marker) {
                out.push('\\');
                out.push_str(&self.blank_marker);
                rest = &rest[self.blank_marker.len()..];
                continue;
            } else if rest.starts_with(&self.separator) && !self.separator.starts_with(BLANK) {
                out.push('\\');
                out.push_str(&self.separator);
                rest = &rest[self.separator.len()..];
                continue;
            } else if c == BLANK {
                out.push_str(&self.blank_marker);
            } else if c == '\n' {
                out.push_str("\\n");
            } else {
                out.push(c);
            }
            rest = &rest[c.len_utf8()..];
        }
    }

    pub fn render(&self, seq: &SymbolSequence) -> String {
        let mut out = String::new();
        for (i, token) in seq.tokens.iter().enumerate() {
            if i > 0 {
                out.push_str(&self.separator);
            }
            self.render_token(token.text(), &mut out);
        }
        out
    }

    /// Inverse of [`render`](Self::render). Single-blank tokens become
    /// boundary tokens under [`BoundaryMode::RespectWordBoundaries`].
    pub fn parse(&self, line: &str, mode: BoundaryMode, origin: usize) -> Result<SymbolSequence> {
        let malformed = |msg: &str| Error::Malformed {
            line: origin + 1,
            msg: msg.to_owned(),
        };
        let mut tokens = Vec::new();
        let mut current = String::new();
        let mut rest = line;
        let push = |current: &mut String, tokens: &mut Vec<Token>| -> Result<()> {
            if current.is_empty() {
                return Err(malformed("empty token"));
            }
            let text = std::mem::take(current);
            let boundary = mode == BoundaryMode::RespectWordBoundaries && text == BLANK.to_string();
            tokens.push(Token::from_parts(text, boundary));
            Ok(())
        };
        if rest.is_empty() {
            return Ok(SymbolSequence::new(tokens, origin));
        }
        while let Some(c) = rest.chars().next() {
            if c == '\\' {
                rest = &rest[1..];
                if let Some(r) = rest.strip_prefix('\\') {
                    current.push('\\');
                    rest = r;
                } else if let Some(r) = rest.strip_prefix('n') {
                    current.push('\n');
                    rest = r;
                } else if let Some(r) = rest.strip_prefix(self.blank_marker.as_str()) {
                    current.push_str(&self.blank_marker);
                    rest = r;
                } else if let Some(r) = rest.strip_prefix(self.separator.as_str()) {
                    current.push_str(&self.separator);
                    rest = r;
                } else {
                    return Err(malformed("dangling escape"));
                }
            } else if let Some(r) = rest.strip_prefix(self.separator.as_str()) {
                push(&mut current, &mut tokens)?;
                rest = r;
            } else if let Some(r) = rest.strip_prefix(self.blank_marker.as_str()) {
                current.push(BLANK);
                rest = r;
            } else {
                current.push(c);
                rest = &rest[c.len_utf8()..];
            }
        }
        push(&mut current, &mut tokens)?;
        Ok(SymbolSequence::new(tokens, origin))
    }

    pub fn write_corpus<W: Write>(&self, mut writer: W, corpus: &[SymbolSequence]) -> Result<()> {
        for seq in corpus {
            writeln!(writer, "{}", self.render(seq))?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn read_corpus<R: Read>(
        &self,
        reader: R,
        mode: BoundaryMode,
    ) -> Result<Vec<SymbolSequence>> {
        read_lines(reader)?
            .iter()
            .enumerate()
            .map(|(i, line)| self.parse(line, mode, i))
            .collect()
    }
}

/// `<stem>.pass<i>.txt`, `i` starting at 1.
pub fn pass_path(stem: &Path, pass: usize) -> PathBuf {
    let mut name = stem.as_os_str().to_owned();
    name.push(format!(".pass{pass}.txt"));
    PathBuf::from(name)
}

/// Writes one line-aligned file per pass and returns their paths.
pub fn write_passes<'a>(
    stem: &Path,
    passes: impl IntoIterator<Item = &'a [SymbolSequence]>,
    fmt: &SegmentFormat,
) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for (i, pass) in passes.into_iter().enumerate() {
        let path = pass_path(stem, i + 1);
        let file = File::create(&path).map_err(|e| Error::file(&path, e))?;
        fmt.write_corpus(BufWriter::new(file), pass)?;
        paths.push(path);
    }
    Ok(paths)
}

/// A trained LCP-dropout vocabulary and the settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct LcpModel {
    pub vocab_size: usize,
    pub partial_vocab: usize,
    pub topk: f64,
    pub seed: u64,
    pub vocab: Vocabulary,
}

/// Either kind of model file.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Bpe(MergeTable),
    Lcp(LcpModel),
}

pub fn write_merge_table<W: Write>(mut w: W, table: &MergeTable) -> Result<()> {
    writeln!(w, "{BPE_HEADER}")?;
    for rule in &table.rules {
        writeln!(w, "{}\t{}", escape(&rule.left), escape(&rule.right))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_lcp_model<W: Write>(mut w: W, model: &LcpModel) -> Result<()> {
    writeln!(w, "{LCP_HEADER}")?;
    writeln!(
        w,
        "v={} l={} k={} seed={}",
        model.vocab_size, model.partial_vocab, model.topk, model.seed
    )?;
    for entry in model.vocab.iter() {
        writeln!(w, "{}", escape(entry))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_model<W: Write>(w: W, model: &Model) -> Result<()> {
    match model {
        Model::Bpe(t) => write_merge_table(w, t),
        Model::Lcp(m) => write_lcp_model(w, m),
    }
}

fn split_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

fn parse_merge_table(lines: &[&str]) -> Result<MergeTable> {
    let mut pairs = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 2;
        let malformed = |msg: &str| Error::Malformed {
            line: line_no,
            msg: msg.to_owned(),
        };
        let (l, r) = line
            .split_once('\t')
            .ok_or_else(|| malformed("expected <left>\\t<right>"))?;
        if r.contains('\t') {
            return Err(malformed("more than one tab"));
        }
        let l = unescape(l).ok_or_else(|| malformed("bad escape"))?;
        let r = unescape(r).ok_or_else(|| malformed("bad escape"))?;
        if l.is_empty() || r.is_empty() {
            return Err(malformed("empty token"));
        }
        pairs.push((l, r));
    }
    // The file holds only rules; the base alphabet is the set of symbols
    // the rules mention.
    let mut symbols: Vec<char> = pairs
        .iter()
        .flat_map(|(l, r)| l.chars().chain(r.chars()))
        .collect();
    symbols.sort_unstable();
    symbols.dedup();
    let base: Vocabulary = symbols.iter().map(|c| c.to_string()).collect();
    Ok(MergeTable {
        rules: pairs
            .into_iter()
            .enumerate()
            .map(|(priority, (left, right))| MergeRule {
                left,
                right,
                priority,
            })
            .collect(),
        base_vocab: base,
    })
}

fn parse_lcp_model(lines: &[&str]) -> Result<LcpModel> {
    let hyper = lines.first().ok_or(Error::Malformed {
        line: 2,
        msg: "missing hyperparameter line".into(),
    })?;
    let bad_hyper = |msg: String| Error::Malformed { line: 2, msg };
    let mut fields = hyper.split(' ');
    let mut field = |name: &str| -> Result<&str> {
        fields
            .next()
            .and_then(|f| f.strip_prefix(name))
            .and_then(|f| f.strip_prefix('='))
            .ok_or_else(|| bad_hyper(format!("expected {name}=<value>")))
    };
    let parse_usize = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| bad_hyper(format!("{s:?}: {e}")))
    };
    let vocab_size = parse_usize(field("v")?)?;
    let partial_vocab = parse_usize(field("l")?)?;
    let k = field("k")?;
    let topk = k
        .parse::<f64>()
        .map_err(|e| bad_hyper(format!("{k:?}: {e}")))?;
    let seed = field("seed")?;
    let seed = seed
        .parse::<u64>()
        .map_err(|e| bad_hyper(format!("{seed:?}: {e}")))?;
    if fields.next().is_some() {
        return Err(bad_hyper("trailing fields".into()));
    }

    let mut vocab = Vocabulary::new();
    for (i, line) in lines[1..].iter().enumerate() {
        let malformed = |msg: &str| Error::Malformed {
            line: i + 3,
            msg: msg.to_owned(),
        };
        let entry = unescape(line).ok_or_else(|| malformed("bad escape"))?;
        if entry.is_empty() {
            return Err(malformed("empty vocabulary entry"));
        }
        if !vocab.insert(&entry).1 {
            return Err(malformed("duplicate vocabulary entry"));
        }
    }
    Ok(LcpModel {
        vocab_size,
        partial_vocab,
        topk,
        seed,
        vocab,
    })
}

/// Parses a model file, dispatching on its header line.
pub fn parse_model(text: &str) -> Result<Model> {
    let lines = split_lines(text);
    let header = lines.first().copied().unwrap_or("");
    match header {
        BPE_HEADER => parse_merge_table(&lines[1..]).map(Model::Bpe),
        LCP_HEADER => parse_lcp_model(&lines[1..]).map(Model::Lcp),
        other => Err(Error::Version {
            expected: format!("{BPE_HEADER} | {LCP_HEADER}"),
            found: other.to_owned(),
        }),
    }
}

pub fn read_model<R: Read>(mut reader: R) -> Result<Model> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::Decode { line: line + 1 }
    })?;
    parse_model(&text)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_model(BufWriter::new(file), model)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_model(file)
}
