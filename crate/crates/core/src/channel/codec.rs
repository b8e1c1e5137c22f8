//! Big-endian cursor helpers for handshake messages.

use super::ChannelError;

pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self { buf: Vec::new() }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn u24(&mut self, v: usize) {
        debug_assert!(v < 1 << 24);
        self.buf.extend_from_slice(&(v as u32).to_be_bytes()[1..]);
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    /// u8 length prefix.
    pub fn short(&mut self, b: &[u8]) -> Result<(), ChannelError> {
        let len = u8::try_from(b.len()).map_err(|_| ChannelError::Decode("field over 255 bytes".into()))?;
        self.u8(len);
        self.bytes(b);
        Ok(())
    }

    /// u24 length prefix.
    pub fn long(&mut self, b: &[u8]) -> Result<(), ChannelError> {
        if b.len() >= 1 << 24 {
            return Err(ChannelError::Decode("field over 2^24 bytes".into()));
        }
        self.u24(b.len());
        self.bytes(b);
        Ok(())
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ChannelError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| {
            ChannelError::Decode(format!("truncated at offset {}", self.pos))
        })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, ChannelError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ChannelError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    pub fn u24(&mut self) -> Result<usize, ChannelError> {
        let b = self.take(3)?;
        Ok(u32::from_be_bytes([0, b[0], b[1], b[2]]) as usize)
    }

    pub fn u64(&mut self) -> Result<u64, ChannelError> {
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().expect("8 bytes")))
    }

    pub fn short(&mut self) -> Result<&'a [u8], ChannelError> {
        let n = self.u8()? as usize;
        self.take(n)
    }

    pub fn long(&mut self) -> Result<&'a [u8], ChannelError> {
        let n = self.u24()?;
        self.take(n)
    }

    pub fn finish(&self) -> Result<(), ChannelError> {
        if self.pos == self.buf.len() {
            Ok(())
        } else {
            Err(ChannelError::Decode(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )))
        }
    }
}
