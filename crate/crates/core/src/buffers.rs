//! Host-side vectors addressed by opaque handles.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::patterns::{from_bytes, to_bytes, ElemType, Element};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BufferId(pub u32);

impl fmt::Display for BufferId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HostBuf {
    pub elem: ElemType,
    pub bytes: Vec<u8>,
}

impl HostBuf {
    pub fn len(&self) -> usize {
        self.bytes.len() / self.elem.size
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// The host memory a pipeline reads from and writes fetched results into.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HostBuffers {
    bufs: BTreeMap<BufferId, HostBuf>,
    next: u32,
}

impl HostBuffers {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh(&mut self) -> BufferId {
        let id = BufferId(self.next);
        self.next += 1;
        id
    }

    pub fn insert<T: Element>(&mut self, values: &[T]) -> BufferId {
        self.insert_bytes(ElemType::of::<T>(), to_bytes(values))
    }

    pub fn insert_bytes(&mut self, elem: ElemType, bytes: Vec<u8>) -> BufferId {
        let id = self.fresh();
        self.bufs.insert(id, HostBuf { elem, bytes });
        id
    }

    /// An empty buffer to receive results.
    pub fn declare<T: Element>(&mut self) -> BufferId {
        self.insert::<T>(&[])
    }

    pub fn get(&self, id: BufferId) -> Option<&HostBuf> {
        self.bufs.get(&id)
    }

    pub fn read<T: Element>(&self, id: BufferId) -> Option<Vec<T>> {
        let b = self.bufs.get(&id)?;
        (b.elem.size == T::SIZE).then(|| from_bytes(&b.bytes))
    }

    pub fn bytes(&self, id: BufferId) -> Option<&[u8]> {
        self.bufs.get(&id).map(|b| b.bytes.as_slice())
    }

    pub fn len(&self, id: BufferId) -> Option<usize> {
        self.bufs.get(&id).map(HostBuf::len)
    }

    pub fn contains(&self, id: BufferId) -> bool {
        self.bufs.contains_key(&id)
    }

    /// Replaces (or creates) the contents of `id`.
    pub fn set_bytes(&mut self, id: BufferId, elem: ElemType, bytes: Vec<u8>) {
        self.next = self.next.max(id.0 + 1);
        self.bufs.insert(id, HostBuf { elem, bytes });
    }

    pub fn write<T: Element>(&mut self, id: BufferId, values: &[T]) {
        self.set_bytes(id, ElemType::of::<T>(), to_bytes(values));
    }

    pub fn ids(&self) -> impl Iterator<Item = BufferId> + '_ {
        self.bufs.keys().copied()
    }
}
