//! Little-endian binary layout for [`LexicalIndex`]:
//!
//! ```text
//! "LXIX"  u32 version  u8 variant  f64 k1  f64 b  f64 delta  f64 avgdl
//! u32 n_docs   { u16 len, utf8 id, u32 doc_len } × n_docs
//! u32 n_terms  { u16 len, utf8 token, f64 idf, u32 n_post, { u32 doc, u32 tf } × n_post } × n_terms
//! ```

use std::fs;
use std::path::Path;

use super::{Bm25Params, LexicalIndex, Variant};
use crate::error::{Error, Result};

pub const LXIX_MAGIC: &[u8; 4] = b"LXIX";
pub const LXIX_VERSION: u32 = 1;

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::Format {
        kind: "lexical index",
        message: format!("string too long to store: {} bytes", s.len()),
    })?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

pub fn encode(index: &LexicalIndex) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(LXIX_MAGIC);
    buf.extend_from_slice(&LXIX_VERSION.to_le_bytes());
    buf.push(index.variant().code());
    let p = index.params();
    for x in [p.k1, p.b, p.delta, index.avgdl()] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&(index.n_docs() as u32).to_le_bytes());
    for (id, len) in index.doc_ids().iter().zip(index.doc_len()) {
        put_str(&mut buf, id)?;
        buf.extend_from_slice(&len.to_le_bytes());
    }
    buf.extend_from_slice(&(index.terms().len() as u32).to_le_bytes());
    for ((term, idf), plist) in index.terms().iter().zip(index.raw_idf()).zip(index.raw_postings()) {
        put_str(&mut buf, term)?;
        buf.extend_from_slice(&idf.to_le_bytes());
        buf.extend_from_slice(&(plist.len() as u32).to_le_bytes());
        for (doc, tf) in plist {
            buf.extend_from_slice(&doc.to_le_bytes());
            buf.extend_from_slice(&tf.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| bad("truncated file"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| bad("invalid UTF-8 string"))
    }
}

fn bad(message: impl Into<String>) -> Error {
    Error::Format {
        kind: "lexical index",
        message: message.into(),
    }
}

pub fn decode(bytes: &[u8]) -> Result<LexicalIndex> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != LXIX_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u32()?;
    if version != LXIX_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let variant = Variant::from_code(r.u8()?).ok_or_else(|| bad("unknown variant code"))?;
    let params = Bm25Params {
        k1: r.f64()?,
        b: r.f64()?,
        delta: r.f64()?,
    };
    let avgdl = r.f64()?;
    let n_docs = r.u32()? as usize;
    let mut doc_ids = Vec::with_capacity(n_docs.min(1 << 20));
    let mut doc_len = Vec::with_capacity(n_docs.min(1 << 20));
    for _ in 0..n_docs {
        doc_ids.push(r.string()?);
        doc_len.push(r.u32()?);
    }
    let n_terms = r.u32()? as usize;
    let mut terms = Vec::with_capacity(n_terms.min(1 << 20));
    let mut idf = Vec::with_capacity(n_terms.min(1 << 20));
    let mut postings = Vec::with_capacity(n_terms.min(1 << 20));
    for _ in 0..n_terms {
        terms.push(r.string()?);
        let w = r.f64()?;
        if !w.is_finite() {
            return Err(bad("non-finite idf"));
        }
        idf.push(w);
        let n_post = r.u32()? as usize;
        let mut plist = Vec::with_capacity(n_post.min(1 << 20));
        for _ in 0..n_post {
            let doc = r.u32()?;
            if doc as usize >= n_docs {
                return Err(bad(format!("posting refers to document {doc} of {n_docs}")));
            }
            plist.push((doc, r.u32()?));
        }
        postings.push(plist);
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    LexicalIndex::from_parts(variant, params, doc_ids, doc_len, avgdl, terms, idf, postings)
}

pub fn write_index(path: &Path, index: &LexicalIndex) -> Result<()> {
    let bytes = encode(index)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_index(path: &Path) -> Result<LexicalIndex> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
