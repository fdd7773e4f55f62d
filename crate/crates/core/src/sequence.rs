//! Protein sequences and FASTA I/O.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Residues per line when writing FASTA.
pub const FASTA_LINE_WIDTH: usize = 60;

const STANDARD_RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
const EXTENDED_RESIDUES: &[u8] = b"BZXUO";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequenceError {
    #[error("empty sequence")]
    Empty,
    #[error("invalid residue '{residue}' at position {position}")]
    InvalidResidue { residue: char, position: usize },
    #[error("empty FASTA input")]
    EmptyInput,
    #[error("line {line}: sequence data before the first '>' header")]
    MissingHeader { line: usize },
    #[error("line {line}: header has no identifier")]
    MissingId { line: usize },
    #[error("record {id} (line {line}) has no sequence")]
    NoSequence { id: String, line: usize },
    #[error("invalid residue '{residue}' at record {id}, line {line}")]
    InvalidRecordResidue { id: String, line: usize, residue: char },
    #[error("invalid record id {0:?}")]
    InvalidId(String),
}

/// Which residue codes are accepted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Alphabet {
    /// The 20 standard residues plus B, Z, X, U, O.
    #[default]
    Extended,
    /// The 20 standard residues only.
    Strict,
}

impl Alphabet {
    pub fn accepts(self, residue: u8) -> bool {
        let r = residue.to_ascii_uppercase();
        STANDARD_RESIDUES.contains(&r)
            || (self == Alphabet::Extended && EXTENDED_RESIDUES.contains(&r))
    }
}

/// A non-empty, uppercase amino-acid string. Positions are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AminoAcidSequence(String);

impl AminoAcidSequence {
    pub fn new(residues: &str) -> Result<Self, SequenceError> {
        Self::with_alphabet(residues, Alphabet::Extended)
    }

    pub fn with_alphabet(residues: &str, alphabet: Alphabet) -> Result<Self, SequenceError> {
        if residues.is_empty() {
            return Err(SequenceError::Empty);
        }
        if let Some((i, c)) = residues
            .char_indices()
            .find(|&(_, c)| !c.is_ascii() || !alphabet.accepts(c as u8))
        {
            return Err(SequenceError::InvalidResidue {
                residue: c,
                position: residues[..i].chars().count() + 1,
            });
        }
        Ok(Self(residues.to_ascii_uppercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Residue at a 1-based position.
    pub fn residue_at(&self, position: usize) -> Option<char> {
        if position == 0 {
            return None;
        }
        self.0.as_bytes().get(position - 1).map(|&b| b as char)
    }

    /// Copy of this sequence with the residue at `position` (1-based) replaced.
    pub(crate) fn with_residue(&self, position: usize, residue: u8) -> Self {
        let mut bytes = self.0.clone().into_bytes();
        bytes[position - 1] = residue.to_ascii_uppercase();
        // every byte is still ASCII
        Self(String::from_utf8(bytes).expect("ascii"))
    }
}

impl fmt::Display for AminoAcidSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for AminoAcidSequence {
    type Err = SequenceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for AminoAcidSequence {
    type Error = SequenceError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(&value)
    }
}

impl From<AminoAcidSequence> for String {
    fn from(value: AminoAcidSequence) -> Self {
        value.0
    }
}

/// A named protein sequence: one FASTA record, one test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProteinRecord {
    pub id: String,
    pub description: String,
    pub sequence: AminoAcidSequence,
}

impl ProteinRecord {
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        sequence: AminoAcidSequence,
    ) -> Result<Self, SequenceError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(SequenceError::InvalidId(id));
        }
        Ok(Self {
            id,
            description: description.into(),
            sequence,
        })
    }
}

/// Parses protein FASTA, accepting extended residue codes.
pub fn parse_fasta(text: &str) -> Result<Vec<ProteinRecord>, SequenceError> {
    parse_fasta_with(text, Alphabet::Extended)
}

pub fn parse_fasta_with(text: &str, alphabet: Alphabet) -> Result<Vec<ProteinRecord>, SequenceError> {
    struct Pending {
        id: String,
        description: String,
        line: usize,
        residues: String,
    }

    fn finish(p: Pending) -> Result<ProteinRecord, SequenceError> {
        if p.residues.is_empty() {
            return Err(SequenceError::NoSequence { id: p.id, line: p.line });
        }
        Ok(ProteinRecord {
            id: p.id,
            description: p.description,
            sequence: AminoAcidSequence(p.residues),
        })
    }

    let mut records = Vec::new();
    let mut current: Option<Pending> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some(header) = line.strip_prefix('>') {
            if let Some(p) = current.take() {
                records.push(finish(p)?);
            }
            let header = header.trim();
            let (id, description) = match header.split_once(char::is_whitespace) {
                Some((id, rest)) => (id, rest.trim()),
                None => (header, ""),
            };
            if id.is_empty() {
                return Err(SequenceError::MissingId { line: line_no });
            }
            current = Some(Pending {
                id: id.to_string(),
                description: description.to_string(),
                line: line_no,
                residues: String::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(p) = current.as_mut() else {
            return Err(SequenceError::MissingHeader { line: line_no });
        };
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            if !c.is_ascii() || !alphabet.accepts(c as u8) {
                return Err(SequenceError::InvalidRecordResidue {
                    id: p.id.clone(),
                    line: line_no,
                    residue: c,
                });
            }
            p.residues.push(c.to_ascii_uppercase());
        }
    }

    match current {
        Some(p) => records.push(finish(p)?),
        None if records.is_empty() => return Err(SequenceError::EmptyInput),
        None => {}
    }
    Ok(records)
}

/// Serializes records as FASTA, wrapping sequences at [`FASTA_LINE_WIDTH`].
pub fn write_fasta(records: &[ProteinRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push('>');
        out.push_str(&r.id);
        if !r.description.is_empty() {
            out.push(' ');
            out.push_str(&r.description);
        }
        out.push('\n');
        for chunk in r.sequence.as_str().as_bytes().chunks(FASTA_LINE_WIDTH) {
            // chunks of an ASCII string are valid UTF-8
            out.push_str(std::str::from_utf8(chunk).expect("ascii"));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> AminoAcidSequence {
        AminoAcidSequence::new(s).unwrap()
    }

    #[test]
    fn parses_multiline_record() {
        let recs = parse_fasta(">P1 demo\nACDG\nHIK").unwrap();
        assert_eq!(
            recs,
            vec![ProteinRecord {
                id: "P1".into(),
                description: "demo".into(),
                sequence: seq("ACDGHIK"),
            }]
        );
    }

    #[test]
    fn rejects_digit_residue() {
        let err = parse_fasta(">P1\nAC1G").unwrap_err();
        assert_eq!(
            err,
            SequenceError::InvalidRecordResidue { id: "P1".into(), line: 2, residue: '1' }
        );
        assert!(err.to_string().contains("'1'"));
        assert!(err.to_string().contains("P1"));
    }

    #[test]
    fn rejects_stop_and_gap() {
        assert!(parse_fasta(">P1\nAC*").is_err());
        assert!(parse_fasta(">P1\nA-C").is_err());
    }

    #[test]
    fn empty_and_headerless_input() {
        assert_eq!(parse_fasta(""), Err(SequenceError::EmptyInput));
        assert_eq!(parse_fasta("\n\n"), Err(SequenceError::EmptyInput));
        assert_eq!(parse_fasta("ACDG\n"), Err(SequenceError::MissingHeader { line: 1 }));
        assert_eq!(parse_fasta(">\nACDG"), Err(SequenceError::MissingId { line: 1 }));
    }

    #[test]
    fn header_without_sequence() {
        assert_eq!(
            parse_fasta(">P1\n>P2\nAC"),
            Err(SequenceError::NoSequence { id: "P1".into(), line: 1 })
        );
        assert!(matches!(parse_fasta(">P1 x\n"), Err(SequenceError::NoSequence { .. })));
    }

    #[test]
    fn crlf_and_lowercase() {
        let a = parse_fasta(">P1 d\r\nacdg\r\nhik\r\n").unwrap();
        let b = parse_fasta(">P1 d\nACDGHIK\n").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strict_alphabet() {
        assert!(parse_fasta(">P1\nACX").is_ok());
        assert!(parse_fasta_with(">P1\nACX", Alphabet::Strict).is_err());
        assert!(AminoAcidSequence::with_alphabet("ACU", Alphabet::Strict).is_err());
    }

    #[test]
    fn writes_short_record() {
        let r = ProteinRecord::new("P1", "", seq("ACDG")).unwrap();
        assert_eq!(write_fasta(&[r]), ">P1\nACDG\n");
        assert_eq!(write_fasta(&[]), "");
    }

    #[test]
    fn wraps_at_sixty() {
        let s = "A".repeat(130);
        let r = ProteinRecord::new("P1", "long one", seq(&s)).unwrap();
        let out = write_fasta(&[r]);
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], ">P1 long one");
        assert_eq!(lines[1].len(), 60);
        assert_eq!(lines[2].len(), 60);
        assert_eq!(lines[3].len(), 10);
    }

    #[test]
    fn sequence_accessors() {
        let s = seq("acdg");
        assert_eq!(s.as_str(), "ACDG");
        assert_eq!(s.residue_at(1), Some('A'));
        assert_eq!(s.residue_at(4), Some('G'));
        assert_eq!(s.residue_at(0), None);
        assert_eq!(s.residue_at(5), None);
        assert_eq!(AminoAcidSequence::new(""), Err(SequenceError::Empty));
        assert_eq!(
            AminoAcidSequence::new("AC J"),
            Err(SequenceError::InvalidResidue { residue: ' ', position: 3 })
        );
    }

    #[test]
    fn record_id_validation() {
        assert!(ProteinRecord::new("a b", "", seq("A")).is_err());
        assert!(ProteinRecord::new("", "", seq("A")).is_err());
    }
}
