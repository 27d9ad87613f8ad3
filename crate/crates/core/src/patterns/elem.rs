//! Element types as the device sees them: a byte size and a stable name.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Type information kept for an argument once the host type is erased.
///
/// Only the size and the textual name survive; both appear verbatim in the
/// emitted device program.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElemType {
    pub size: usize,
    pub name: String,
}

impl ElemType {
    pub fn new(name: impl Into<String>, size: usize) -> Option<Self> {
        let name = name.into();
        if name.is_empty() || !matches!(size, 1 | 2 | 4 | 8) {
            return None;
        }
        Some(Self { size, name })
    }

    pub fn of<T: Element>() -> Self {
        Self {
            size: T::SIZE,
            name: T::NAME.to_string(),
        }
    }

    /// Smallest element count whose byte size is a multiple of 8.
    pub fn align_elems(&self) -> usize {
        8 / gcd(8, self.size)
    }
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A plain little-endian scalar that can live in device memory.
pub trait Element: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const SIZE: usize;
    const NAME: &'static str;

    fn read_le(bytes: &[u8]) -> Self;
    fn write_le(self, out: &mut [u8]);
}

macro_rules! impl_element {
    ($($ty:ty => $name:literal),* $(,)?) => {
        $(
            impl Element for $ty {
                const SIZE: usize = std::mem::size_of::<$ty>();
                const NAME: &'static str = $name;

                #[inline]
                fn read_le(bytes: &[u8]) -> Self {
                    let mut raw = [0u8; std::mem::size_of::<$ty>()];
                    raw.copy_from_slice(&bytes[..Self::SIZE]);
                    <$ty>::from_le_bytes(raw)
                }

                #[inline]
                fn write_le(self, out: &mut [u8]) {
                    out[..Self::SIZE].copy_from_slice(&self.to_le_bytes());
                }
            }
        )*
    };
}

impl_element! {
    u8 => "u8", i8 => "i8",
    u16 => "u16", i16 => "i16",
    u32 => "u32", i32 => "i32",
    u64 => "u64", i64 => "i64",
    f32 => "f32", f64 => "f64",
}

pub fn to_bytes<T: Element>(values: &[T]) -> Vec<u8> {
    let mut out = vec![0u8; values.len() * T::SIZE];
    for (chunk, v) in out.chunks_exact_mut(T::SIZE).zip(values) {
        v.write_le(chunk);
    }
    out
}

pub fn from_bytes<T: Element>(bytes: &[u8]) -> Vec<T> {
    bytes.chunks_exact(T::SIZE).map(T::read_le).collect()
}

pub(crate) fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub(crate) fn lcm(a: usize, b: usize) -> usize {
    if a == 0 || b == 0 {
        return 0;
    }
    a / gcd(a, b) * b
}

#[inline]
pub(crate) fn pad8(bytes: usize) -> usize {
    bytes.div_ceil(8) * 8
}
