//! Streaming readers for word2vec (text and binary), GloVe and fastText
//! embedding files.
//!
//! Text formats split on Unicode whitespace and parse floats with `.` as the
//! decimal point regardless of locale. Binary word2vec records are
//! `key 0x20 f32le × dim`, optionally followed by a single `\n`.

use std::io::{BufRead, ErrorKind};

use crate::error::{Error, Result};
use crate::vector::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceFormat {
    Word2VecText,
    Word2VecBinary,
    GloveText,
    FastTextText,
}

impl SourceFormat {
    pub fn has_header(self) -> bool {
        !matches!(self, SourceFormat::GloveText)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecord {
    pub key: String,
    pub vector: EmbeddingVector,
}

/// Number of leading bytes `detect_format` wants to see.
pub const DETECT_HEAD_LEN: usize = 4096;

/// Guesses the format from the file extension (with or without the leading
/// dot) and the first bytes of the file.
pub fn detect_format(extension: &str, head: &[u8]) -> Result<SourceFormat> {
    let ext = extension.trim_start_matches('.').to_ascii_lowercase();
    let (line, rest) = match head.iter().position(|&b| b == b'\n') {
        Some(i) => (&head[..i], Some(&head[i + 1..])),
        None => (head, None),
    };
    let line_text = std::str::from_utf8(line).map_err(|_| {
        Error::UnknownFormat(format!(
            "first line is not UTF-8 (starts with {:02x?})",
            &line[..line.len().min(16)]
        ))
    })?;
    let fields: Vec<&str> = line_text.split_whitespace().collect();

    if fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok()) {
        if let Some(payload) = rest {
            if looks_binary(payload) {
                return Ok(SourceFormat::Word2VecBinary);
            }
        } else if ext == "bin" {
            return Ok(SourceFormat::Word2VecBinary);
        }
        return Ok(if ext == "vec" {
            SourceFormat::FastTextText
        } else {
            SourceFormat::Word2VecText
        });
    }

    // The head may cut the first line short; ignore a trailing partial token.
    let complete = if rest.is_none() && fields.len() > 2 {
        &fields[..fields.len() - 1]
    } else {
        &fields[..]
    };
    if complete.len() >= 2 && complete[1..].iter().all(|f| parse_float(f).is_some()) {
        return Ok(SourceFormat::GloveText);
    }

    let shown: String = line_text.chars().take(60).collect();
    Err(Error::UnknownFormat(format!(
        "expected a \"count dim\" header or \"token float ...\" line, saw {shown:?} ({} fields)",
        fields.len()
    )))
}

fn looks_binary(payload: &[u8]) -> bool {
    if payload
        .iter()
        .any(|&b| b == 0 || (b < 0x20 && !matches!(b, b'\n' | b'\r' | b'\t')))
    {
        return true;
    }
    match std::str::from_utf8(payload) {
        Ok(_) => false,
        // An error with a known length is invalid UTF-8; without one the
        // buffer merely ends mid-character.
        Err(e) => e.error_len().is_some(),
    }
}

fn parse_float(s: &str) -> Option<f32> {
    // Rust's parser is locale-independent; reject the spelled-out specials.
    let v: f32 = s.parse().ok()?;
    v.is_finite().then_some(v)
}

/// Streaming record reader. Memory use is bounded by the longest record.
pub struct EmbeddingReader<R> {
    input: R,
    format: SourceFormat,
    declared: Option<(u64, usize)>,
    dimension: Option<usize>,
    records: u64,
    line: u64,
    offset: u64,
    buf: Vec<u8>,
    done: bool,
}

/// Opens a record stream; reads the header line for formats that have one.
pub fn parse_embeddings<R: BufRead>(input: R, format: SourceFormat) -> Result<EmbeddingReader<R>> {
    EmbeddingReader::new(input, format)
}

impl<R: BufRead> EmbeddingReader<R> {
    pub fn new(mut input: R, format: SourceFormat) -> Result<Self> {
        let (declared, offset) = if format.has_header() {
            let (count, dim, n) = read_header(&mut input)?;
            (Some((count, dim)), n)
        } else {
            (None, 0)
        };
        Ok(Self {
            input,
            format,
            declared,
            dimension: declared.map(|(_, d)| d),
            records: 0,
            line: u64::from(declared.is_some()),
            offset,
            buf: Vec::new(),
            done: false,
        })
    }

    /// `(count, dimension)` from the header, when the format has one.
    pub fn declared(&self) -> Option<(u64, usize)> {
        self.declared
    }

    /// Dimension established so far (declared or inferred from the first
    /// record).
    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn format(&self) -> SourceFormat {
        self.format
    }

    fn malformed(&self, reason: impl Into<String>) -> Error {
        let location = match self.format {
            SourceFormat::Word2VecBinary => format!("byte {}", self.offset),
            _ => format!("line {}", self.line),
        };
        Error::MalformedRecord {
            record: self.records + 1,
            location,
            reason: reason.into(),
        }
    }

    fn check_dimension(&mut self, actual: usize) -> Result<()> {
        match self.dimension {
            None => {
                if actual == 0 {
                    return Err(self.malformed("record has no vector components"));
                }
                self.dimension = Some(actual);
                Ok(())
            }
            Some(expected) if expected != actual => Err(Error::DimensionDrift {
                record: self.records + 1,
                expected,
                actual,
            }),
            Some(_) => Ok(()),
        }
    }

    fn next_text(&mut self) -> Result<Option<ParsedRecord>> {
        loop {
            self.buf.clear();
            let n = self.input.read_until(b'\n', &mut self.buf)?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            self.offset += n as u64;
            let text = match std::str::from_utf8(&self.buf) {
                Ok(t) => t,
                Err(e) => return Err(self.malformed(format!("invalid UTF-8: {e}"))),
            };
            let mut fields = text.split_whitespace();
            let Some(key) = fields.next() else {
                continue; // blank line
            };
            let key = key.to_owned();
            let mut values = Vec::with_capacity(self.dimension.unwrap_or(0));
            for f in fields {
                match parse_float(f) {
                    Some(v) => values.push(v),
                    None => {
                        let shown: String = f.chars().take(24).collect();
                        return Err(self.malformed(format!("bad float {shown:?}")));
                    }
                }
            }
            self.check_dimension(values.len())?;
            self.records += 1;
            return Ok(Some(ParsedRecord {
                key,
                vector: EmbeddingVector::from_raw(values),
            }));
        }
    }

    fn next_binary(&mut self) -> Result<Option<ParsedRecord>> {
        if let Some((count, _)) = self.declared {
            if self.records >= count {
                return Ok(None);
            }
        }
        // Skip the optional newline left by the previous record.
        loop {
            let head = self.input.fill_buf()?;
            match head.first() {
                None => {
                    return match self.declared {
                        Some((count, _)) if self.records < count => Err(self.malformed(format!(
                            "unexpected end of file after {} of {count} records",
                            self.records
                        ))),
                        _ => Ok(None),
                    };
                }
                Some(b'\n') => {
                    self.input.consume(1);
                    self.offset += 1;
                }
                Some(_) => break,
            }
        }
        self.buf.clear();
        let n = self.input.read_until(b' ', &mut self.buf)?;
        if self.buf.last() != Some(&b' ') {
            return Err(self.malformed("unterminated key"));
        }
        self.buf.pop();
        let key = match std::str::from_utf8(&self.buf) {
            Ok(k) if !k.is_empty() => k.to_owned(),
            Ok(_) => return Err(self.malformed("empty key")),
            Err(e) => return Err(self.malformed(format!("key is not UTF-8: {e}"))),
        };
        self.offset += n as u64;
        let dim = self.dimension.expect("binary header sets the dimension");
        self.buf.resize(dim * 4, 0);
        if let Err(e) = self.input.read_exact(&mut self.buf) {
            return if e.kind() == ErrorKind::UnexpectedEof {
                Err(self.malformed("truncated vector"))
            } else {
                Err(e.into())
            };
        }
        let values: Vec<f32> = self
            .buf
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(self.malformed(format!("non-finite component {i}")));
        }
        self.offset += (dim * 4) as u64;
        self.records += 1;
        Ok(Some(ParsedRecord {
            key,
            vector: EmbeddingVector::from_raw(values),
        }))
    }
}

fn read_header<R: BufRead>(input: &mut R) -> Result<(u64, usize, u64)> {
    let mut line = Vec::new();
    let n = input.read_until(b'\n', &mut line)?;
    let text = String::from_utf8_lossy(&line);
    let mut fields = text.split_whitespace();
    let count = fields.next().and_then(|f| f.parse::<u64>().ok());
    let dim = fields.next().and_then(|f| f.parse::<usize>().ok());
    match (count, dim, fields.next()) {
        (Some(count), Some(dim), None) if dim > 0 => Ok((count, dim, n as u64)),
        _ => Err(Error::MalformedRecord {
            record: 0,
            location: "line 1".into(),
            reason: format!("expected \"count dim\" header, saw {:?}", text.trim_end()),
        }),
    }
}

impl<R: BufRead> Iterator for EmbeddingReader<R> {
    type Item = Result<ParsedRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let next = match self.format {
            SourceFormat::Word2VecBinary => self.next_binary(),
            _ => self.next_text(),
        };
        match next {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}
