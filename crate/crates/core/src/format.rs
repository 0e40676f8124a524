//! Binary sketch files.
//!
//! All integers are unsigned 64-bit little-endian:
//!
//! ```text
//! magic   "DKMWSK01" (8 bytes)
//! version 1
//! p, u, l, k, r, d
//! r times:
//!     seed
//!     l coefficients, constant term first
//!     entry count (<= k)
//!     entry count times: value, element   (strictly increasing)
//! ```

use std::collections::HashSet;
use std::io::{self, Read, Write};

use crate::error::{Error, Result};
use crate::estimators::{SketchBundle, SketchParams};
use crate::hash_family::{FieldParams, PolyHashFunction};
use crate::sketch::{BottomKSketch, HashedPoint};

pub const MAGIC: &[u8; 8] = b"DKMWSK01";
pub const VERSION: u64 = 1;

pub fn save<W: Write>(bundle: &SketchBundle, mut out: W) -> Result<()> {
    let p = bundle.params();
    out.write_all(MAGIC)?;
    for v in [
        VERSION,
        p.field.p(),
        p.field.u(),
        p.l as u64,
        p.k as u64,
        bundle.r() as u64,
        p.d,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for (h, sketch) in bundle.functions().iter().zip(bundle.sketches()) {
        out.write_all(&h.id().to_le_bytes())?;
        for c in h.coeffs() {
            out.write_all(&c.to_le_bytes())?;
        }
        out.write_all(&(sketch.len() as u64).to_le_bytes())?;
        for e in sketch.entries() {
            out.write_all(&e.value.to_le_bytes())?;
            out.write_all(&e.element.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn to_bytes(bundle: &SketchBundle) -> Vec<u8> {
    let mut buf = Vec::new();
    save(bundle, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn bad(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Load {
        field,
        reason: reason.into(),
    }
}

fn read_u64<R: Read>(input: &mut R, field: &'static str) -> Result<u64> {
    let mut buf = [0u8; 8];
    match input.read_exact(&mut buf) {
        Ok(()) => Ok(u64::from_le_bytes(buf)),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(bad(field, "unexpected end of file")),
        Err(e) => Err(e.into()),
    }
}

fn to_usize(v: u64, field: &'static str) -> Result<usize> {
    usize::try_from(v).map_err(|_| bad(field, format!("{v} does not fit in memory")))
}

pub fn load<R: Read>(mut input: R) -> Result<SketchBundle> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| bad("magic", "file shorter than the magic number"))?;
    if &magic != MAGIC {
        return Err(bad(
            "magic",
            format!("expected {:?}", std::str::from_utf8(MAGIC).unwrap()),
        ));
    }
    let version = read_u64(&mut input, "version")?;
    if version != VERSION {
        return Err(bad("version", format!("unsupported version {version}")));
    }
    let p = read_u64(&mut input, "p")?;
    let u = read_u64(&mut input, "u")?;
    let field = FieldParams::new(p, u).map_err(|e| bad("p", e.to_string()))?;
    let l = read_u64(&mut input, "l")?;
    if l == 0 || l > 1024 {
        return Err(bad("l", format!("independence degree {l} out of range [1, 1024]")));
    }
    let k = read_u64(&mut input, "k")?;
    if k == 0 {
        return Err(bad("k", "capacity must be at least 1"));
    }
    let r = read_u64(&mut input, "r")?;
    if r == 0 {
        return Err(bad("r", "bundle must hold at least one sketch"));
    }
    let d = read_u64(&mut input, "d")?;
    if d == 0 || d > k {
        return Err(bad("d", format!("subset size {d} must lie in [1, k = {k}]")));
    }
    let (l, k) = (to_usize(l, "l")?, to_usize(k, "k")?);
    let params = SketchParams { field, l, k, d };

    let mut functions = Vec::new();
    let mut sketches = Vec::new();
    let mut seeds = HashSet::new();
    for _ in 0..r {
        let seed = read_u64(&mut input, "seed")?;
        if !seeds.insert(seed) {
            return Err(bad("seed", format!("function seed {seed} repeated")));
        }
        let coeffs = (0..l)
            .map(|_| read_u64(&mut input, "coeffs"))
            .collect::<Result<Vec<_>>>()?;
        let h = PolyHashFunction::sample(field, l, seed).map_err(|e| bad("coeffs", e.to_string()))?;
        if h.coeffs() != coeffs.as_slice() {
            return Err(bad("coeffs", format!("coefficients do not match seed {seed}")));
        }
        let count = read_u64(&mut input, "entry_count")?;
        if count > k as u64 {
            return Err(bad("entry_count", format!("{count} entries exceed k = {k}")));
        }
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let value = read_u64(&mut input, "entries")?;
            let element = read_u64(&mut input, "entries")?;
            if element >= u || h.eval_unchecked(element) != value {
                return Err(bad(
                    "entries",
                    format!("entry ({value}, {element}) is not a hash of its element"),
                ));
            }
            entries.push(HashedPoint::new(value, element));
        }
        let sketch = BottomKSketch::from_entries(k, seed, entries).map_err(|e| bad("entries", e.to_string()))?;
        functions.push(h);
        sketches.push(sketch);
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(bad("trailing", "unexpected bytes after the last sketch"));
    }
    Ok(SketchBundle::from_parts(params, functions, sketches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::build_bundle_with_count;
    use crate::exec::Execution;

    fn sample_bundle() -> SketchBundle {
        let elems: Vec<u64> = (0..100).map(|i| i * 1_000_003).collect();
        build_bundle_with_count(&elems, SketchParams::for_d(16, 2).unwrap(), 3, 42, Execution::default()).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let b = sample_bundle();
        let bytes = to_bytes(&b);
        let loaded = load(bytes.as_slice()).unwrap();
        assert_eq!(loaded.sketches(), b.sketches());
        assert_eq!(loaded.functions(), b.functions());
        assert_eq!(to_bytes(&loaded), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&sample_bundle());
        assert_eq!(&bytes[..8], MAGIC);
        let word = |i: usize| u64::from_le_bytes(bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap());
        assert_eq!(word(0), VERSION);
        assert_eq!(word(1), (1 << 61) - 1);
        assert_eq!(word(3), 8);
        assert_eq!(word(4), 16);
        assert_eq!(word(5), 3);
        assert_eq!(word(6), 2);
        // First sketch: seed, 8 coefficients, count 16, 16 entries.
        let per_sketch = 8 * (1 + 8 + 1 + 2 * 16);
        assert_eq!(bytes.len(), 8 + 7 * 8 + 3 * per_sketch);
    }

    fn load_err(bytes: &[u8]) -> &'static str {
        match load(bytes) {
            Err(Error::Load { field, .. }) => field,
            other => panic!("expected a load error, got {other:?}"),
        }
    }

    fn patch(bytes: &mut [u8], word: usize, v: u64) {
        bytes[8 + 8 * word..16 + 8 * word].copy_from_slice(&v.to_le_bytes());
    }

    #[test]
    fn malformed_files_name_the_field() {
        let good = to_bytes(&sample_bundle());
        let mut b = good.clone();
        b[0] = b'X';
        assert_eq!(load_err(&b), "magic");
        let mut b = good.clone();
        patch(&mut b, 0, 2);
        assert_eq!(load_err(&b), "version");
        let mut b = good.clone();
        patch(&mut b, 1, 15);
        assert_eq!(load_err(&b), "p");
        let mut b = good.clone();
        patch(&mut b, 4, 0);
        assert_eq!(load_err(&b), "k");
        let mut b = good.clone();
        patch(&mut b, 8, 5); // first coefficient
        assert_eq!(load_err(&b), "coeffs");
        let mut b = good.clone();
        patch(&mut b, 16, 99); // first entry count
        assert_eq!(load_err(&b), "entry_count");
        let mut b = good.clone();
        patch(&mut b, 17, 3); // first entry value
        assert_eq!(load_err(&b), "entries");
        assert_eq!(load_err(&good[..good.len() - 4]), "entries");
        let mut b = good.clone();
        b.push(0);
        assert_eq!(load_err(&b), "trailing");
        assert_eq!(load_err(&good[..5]), "magic");
    }
}
