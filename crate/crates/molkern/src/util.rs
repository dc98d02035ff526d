//! Small shared utilities.

/// XOR mask that derives a second, decorrelated RNG stream from one user
/// seed (e.g. one stream draws seed points, the other drives acquisition),
/// keeping both a pure function of that seed.
pub const STREAM_SPLIT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Streaming FNV-1a 64-bit hasher.
///
/// Used to fingerprint scan inputs and run manifests. Not cryptographic —
/// it only needs to detect configuration drift between runs, and the
/// algorithm is simple enough to stay stable across releases (the digest
/// is persisted in journal files).
#[derive(Debug, Clone)]
pub struct Fnv1a64(u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl Fnv1a64 {
    pub fn new() -> Fnv1a64 {
        Fnv1a64(FNV_OFFSET)
    }

    pub fn update(&mut self, bytes: &[u8]) -> &mut Fnv1a64 {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
        self
    }

    pub fn update_f64(&mut self, value: f64) -> &mut Fnv1a64 {
        self.update(&value.to_bits().to_le_bytes())
    }

    pub fn update_usize(&mut self, value: usize) -> &mut Fnv1a64 {
        self.update(&(value as u64).to_le_bytes())
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv1a64 {
    fn default() -> Fnv1a64 {
        Fnv1a64::new()
    }
}

/// One-shot FNV-1a 64-bit digest of a byte slice.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(bytes);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vectors() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn streaming_equals_one_shot() {
        let mut h = Fnv1a64::new();
        h.update(b"foo").update(b"bar");
        assert_eq!(h.finish(), fnv1a64(b"foobar"));
    }

    #[test]
    fn field_updates_are_order_sensitive() {
        let mut a = Fnv1a64::new();
        a.update_f64(1.0).update_usize(2);
        let mut b = Fnv1a64::new();
        b.update_usize(2).update_f64(1.0);
        assert_ne!(a.finish(), b.finish());
    }
}
