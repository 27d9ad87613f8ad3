/// A bounds-checked byte array that grows on demand up to a fixed limit.
#[derive(Clone, Debug, Default)]
pub struct ByteStore {
    data: Vec<u8>,
    limit: usize,
}

/// An access past the store's limit: `(offset, len, limit)`.
pub type OutOfBounds = (usize, usize, usize);

impl ByteStore {
    pub fn new(limit: usize) -> Self {
        Self {
            data: Vec::new(),
            limit,
        }
    }

    pub fn with_size(limit: usize, size: usize) -> Self {
        let mut s = Self::new(limit);
        s.data.resize(size.min(limit), 0);
        s
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    fn ensure(&mut self, offset: usize, len: usize) -> Result<(), OutOfBounds> {
        let end = offset.checked_add(len).ok_or((offset, len, self.limit))?;
        if end > self.limit {
            return Err((offset, len, self.limit));
        }
        if end > self.data.len() {
            self.data.resize(end, 0);
        }
        Ok(())
    }

    pub fn read(&mut self, offset: usize, len: usize) -> Result<&[u8], OutOfBounds> {
        self.ensure(offset, len)?;
        Ok(&self.data[offset..offset + len])
    }

    pub fn write(&mut self, offset: usize, bytes: &[u8]) -> Result<(), OutOfBounds> {
        self.ensure(offset, bytes.len())?;
        self.data[offset..offset + bytes.len()].copy_from_slice(bytes);
        Ok(())
    }

    /// Mutable view of `[offset, offset + len)`.
    pub fn slice_mut(&mut self, offset: usize, len: usize) -> Result<&mut [u8], OutOfBounds> {
        self.ensure(offset, len)?;
        Ok(&mut self.data[offset..offset + len])
    }

    /// The bytes written so far.
    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}
