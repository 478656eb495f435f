//! Canonical byte encoding for hashed and signed composites.
//!
//! Every field is written as a 4-byte big-endian length followed by its
//! bytes, in declaration order. Decoding is strict: lengths must fit and no
//! trailing bytes are allowed.

use super::PrimitiveError;

#[derive(Debug, Default, Clone)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, bytes: &[u8]) -> Self {
        self.push(bytes);
        self
    }

    pub fn push(&mut self, bytes: &[u8]) {
        let len = u32::try_from(bytes.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(bytes);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

/// Encodes `fields` in order.
pub fn encode(fields: &[&[u8]]) -> Vec<u8> {
    let mut enc = Encoder::new();
    for f in fields {
        enc.push(f);
    }
    enc.finish()
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    rest: &'a [u8],
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { rest: bytes }
    }

    pub fn field(&mut self) -> Result<&'a [u8], PrimitiveError> {
        if self.rest.len() < 4 {
            return Err(PrimitiveError::Malformed("truncated length prefix"));
        }
        let len = u32::from_be_bytes(self.rest[..4].try_into().unwrap()) as usize;
        let body = &self.rest[4..];
        if body.len() < len {
            return Err(PrimitiveError::Malformed("field exceeds input"));
        }
        let (field, rest) = body.split_at(len);
        self.rest = rest;
        Ok(field)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], PrimitiveError> {
        self.field()?.try_into().map_err(|_| PrimitiveError::Malformed("fixed-size field has wrong length"))
    }

    pub fn u32(&mut self) -> Result<u32, PrimitiveError> {
        Ok(u32::from_be_bytes(self.array::<4>()?))
    }

    pub fn finish(self) -> Result<(), PrimitiveError> {
        if self.rest.is_empty() {
            Ok(())
        } else {
            Err(PrimitiveError::Malformed("trailing bytes"))
        }
    }
}
