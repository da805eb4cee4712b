//! Little-endian integers and Bitcoin CompactSize lengths.

use super::CodecError;

/// Largest list or script length accepted while decoding.
pub const MAX_DECODE_LEN: u64 = 1 << 24;

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_varint(out: &mut Vec<u8>, v: u64) {
    match v {
        0..=0xFC => out.push(v as u8),
        0xFD..=0xFFFF => {
            out.push(0xFD);
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        0x1_0000..=0xFFFF_FFFF => {
            out.push(0xFE);
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        _ => {
            out.push(0xFF);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    put_varint(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self.pos.checked_add(n).ok_or(CodecError::Truncated)?;
        let out = self.buf.get(self.pos..end).ok_or(CodecError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// CompactSize; non-minimal encodings and absurd lengths are rejected.
    pub fn varint(&mut self) -> Result<u64, CodecError> {
        let v = match self.u8()? {
            0xFD => {
                let v = u64::from(u16::from_le_bytes(self.array()?));
                if v < 0xFD {
                    return Err(CodecError::NonCanonicalVarInt);
                }
                v
            }
            0xFE => {
                let v = u64::from(u32::from_le_bytes(self.array()?));
                if v <= 0xFFFF {
                    return Err(CodecError::NonCanonicalVarInt);
                }
                v
            }
            0xFF => {
                let v = u64::from_le_bytes(self.array()?);
                if v <= 0xFFFF_FFFF {
                    return Err(CodecError::NonCanonicalVarInt);
                }
                v
            }
            b => u64::from(b),
        };
        if v > MAX_DECODE_LEN {
            return Err(CodecError::VarIntOverflow);
        }
        Ok(v)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let n = self.varint()?;
        self.take(n as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.pos == self.buf.len()
    }

    pub fn finish(self) -> Result<(), CodecError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(CodecError::TrailingBytes)
        }
    }
}
