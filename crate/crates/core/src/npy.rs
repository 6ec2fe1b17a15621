//! NPY v1.0 container for `<f4` C-order tensors.
//!
//! Layout: the six magic bytes `\x93NUMPY`, version `1 0`, a little-endian
//! `u16` header length, then an ASCII Python-literal dict such as
//! `{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }` padded with
//! spaces and terminated by `\n` so that the whole preamble is a multiple of
//! 64 bytes. Raw little-endian `f32` values follow.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::tensor::Tensor;

pub const MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Preamble lengths are padded to a multiple of this.
pub const HEADER_ALIGN: usize = 64;

const FIXED_PREFIX: usize = MAGIC.len() + 2 + 2;

#[derive(Debug, Error)]
pub enum NpyError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("not an npy file (bad magic)")]
    BadMagic,

    #[error("unsupported npy version {0}.{1}")]
    UnsupportedVersion(u8, u8),

    #[error("unsupported dtype {0:?}; only '<f4' is supported")]
    UnsupportedDtype(String),

    #[error("fortran-order arrays are not supported")]
    UnsupportedOrder,

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    TruncatedPayload { expected: usize, actual: usize },

    #[error("header too large for npy v1.0 ({0} bytes)")]
    HeaderTooLarge(usize),
}

fn header_dict(shape: &[usize]) -> String {
    let dims = match shape {
        [] => "()".to_string(),
        [d] => format!("({d},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    format!("{{'descr': '<f4', 'fortran_order': False, 'shape': {dims}, }}")
}

/// Full preamble (magic through trailing newline) for a tensor of `shape`.
pub fn preamble(shape: &[usize]) -> Result<Vec<u8>, NpyError> {
    let dict = header_dict(shape);
    let unpadded = FIXED_PREFIX + dict.len() + 1;
    let total = unpadded.div_ceil(HEADER_ALIGN) * HEADER_ALIGN;
    let header_len = total - FIXED_PREFIX;
    let header_len_u16 =
        u16::try_from(header_len).map_err(|_| NpyError::HeaderTooLarge(header_len))?;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len_u16.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    Ok(out)
}

pub fn write_npy<W: Write>(tensor: &Tensor, mut sink: W) -> Result<(), NpyError> {
    sink.write_all(&preamble(tensor.shape())?)?;
    let mut buf = Vec::with_capacity(tensor.len().min(1 << 16) * 4);
    for chunk in tensor.data().chunks(1 << 16) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        sink.write_all(&buf)?;
    }
    sink.flush()?;
    Ok(())
}

pub fn to_npy_bytes(tensor: &Tensor) -> Result<Vec<u8>, NpyError> {
    let mut out = Vec::with_capacity(HEADER_ALIGN + tensor.len() * 4);
    write_npy(tensor, &mut out)?;
    Ok(out)
}

pub fn read_npy<R: Read>(mut source: R) -> Result<Tensor, NpyError> {
    let mut prefix = [0u8; FIXED_PREFIX];
    read_prefix(&mut source, &mut prefix)?;
    if prefix[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    if (prefix[6], prefix[7]) != (1, 0) {
        return Err(NpyError::UnsupportedVersion(prefix[6], prefix[7]));
    }
    let header_len = u16::from_le_bytes([prefix[8], prefix[9]]) as usize;
    let mut header = vec![0u8; header_len];
    source.read_exact(&mut header).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => NpyError::MalformedHeader("header truncated".into()),
        _ => NpyError::Io(e),
    })?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| NpyError::MalformedHeader("header is not ASCII".into()))?;
    let dict = HeaderDict::parse(header)?;
    if dict.descr != "<f4" {
        return Err(NpyError::UnsupportedDtype(dict.descr));
    }
    if dict.fortran_order {
        return Err(NpyError::UnsupportedOrder);
    }

    let count = dict
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| NpyError::MalformedHeader("shape overflows".into()))?;
    let expected = count
        .checked_mul(4)
        .ok_or_else(|| NpyError::MalformedHeader("shape overflows".into()))?;
    let mut payload = Vec::with_capacity(expected);
    let actual = source
        .by_ref()
        .take(expected as u64)
        .read_to_end(&mut payload)?;
    if actual < expected {
        return Err(NpyError::TruncatedPayload { expected, actual });
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(Tensor::new(dict.shape, data).expect("payload length derived from shape"))
}

pub fn from_npy_bytes(bytes: &[u8]) -> Result<Tensor, NpyError> {
    read_npy(bytes)
}

fn read_prefix<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<(), NpyError> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if filled < MAGIC.len() || buf[..MAGIC.len()] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    if filled < buf.len() {
        return Err(NpyError::MalformedHeader("preamble truncated".into()));
    }
    Ok(())
}

#[derive(Debug, PartialEq)]
struct HeaderDict {
    descr: String,
    fortran_order: bool,
    shape: Vec<usize>,
}

#[derive(Debug, PartialEq)]
enum Literal {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parser for the restricted Python-literal dict numpy writes.
struct Cursor<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), NpyError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(malformed(format!(
                "expected '{}' at byte {}",
                c as char, self.pos
            )))
        }
    }

    fn string(&mut self) -> Result<String, NpyError> {
        let quote = match self.peek() {
            Some(q @ (b'\'' | b'"')) => q,
            _ => return Err(malformed(format!("expected string at byte {}", self.pos))),
        };
        self.pos += 1;
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos] != quote {
            self.pos += 1;
        }
        if self.pos == self.src.len() {
            return Err(malformed("unterminated string".into()));
        }
        let s = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn word(&mut self) -> &'a [u8] {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn literal(&mut self) -> Result<Literal, NpyError> {
        match self.peek() {
            Some(b'\'' | b'"') => self.string().map(Literal::Str),
            Some(b'(') => {
                self.pos += 1;
                let mut dims = Vec::new();
                loop {
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    let w = self.word();
                    // numpy may emit `3L` on very old writers
                    let digits = w.strip_suffix(b"L").unwrap_or(w);
                    let d = std::str::from_utf8(digits)
                        .ok()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| malformed("bad shape entry".into()))?;
                    dims.push(d);
                    match self.peek() {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {}
                        _ => return Err(malformed("bad shape tuple".into())),
                    }
                }
                Ok(Literal::Tuple(dims))
            }
            _ => match self.word() {
                b"True" => Ok(Literal::Bool(true)),
                b"False" => Ok(Literal::Bool(false)),
                other => Err(malformed(format!(
                    "unexpected token {:?}",
                    String::from_utf8_lossy(other)
                ))),
            },
        }
    }
}

fn malformed(msg: String) -> NpyError {
    NpyError::MalformedHeader(msg)
}

impl HeaderDict {
    fn parse(header: &str) -> Result<Self, NpyError> {
        let mut cur = Cursor {
            src: header.as_bytes(),
            pos: 0,
        };
        cur.expect(b'{')?;
        let (mut descr, mut fortran_order, mut shape) = (None, None, None);
        loop {
            if cur.peek() == Some(b'}') {
                cur.pos += 1;
                break;
            }
            let key = cur.string()?;
            cur.expect(b':')?;
            let value = cur.literal()?;
            match (key.as_str(), value) {
                ("descr", Literal::Str(s)) => descr = Some(s),
                ("fortran_order", Literal::Bool(b)) => fortran_order = Some(b),
                ("shape", Literal::Tuple(t)) => shape = Some(t),
                (k, v) => return Err(malformed(format!("unexpected entry {k:?}: {v:?}"))),
            }
            match cur.peek() {
                Some(b',') => cur.pos += 1,
                Some(b'}') => {}
                _ => return Err(malformed("expected ',' or '}'".into())),
            }
        }
        if cur.peek().is_some() {
            return Err(malformed("trailing data after header dict".into()));
        }
        Ok(Self {
            descr: descr.ok_or_else(|| malformed("missing 'descr'".into()))?,
            fortran_order: fortran_order
                .ok_or_else(|| malformed("missing 'fortran_order'".into()))?,
            shape: shape.ok_or_else(|| malformed("missing 'shape'".into()))?,
        })
    }
}
