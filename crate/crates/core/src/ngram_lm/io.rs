//! `MKN1` binary model format, all integers little-endian:
//!
//! ```text
//! magic "MKN1" | u32 version | u8 flags (bit 0: unk_singletons)
//! u32 vocab_len | vocab_len x (u32 byte_len, utf-8 bytes)   -- id order
//! vocab_len x u64 unigram count
//! u64 n | n x (u32, u32, u64)        -- bigrams, sorted by key
//! u64 n | n x (u32, u32, u32, u64)   -- trigrams, sorted by key
//! 3 x (f64 d1, f64 d2, f64 d3plus)   -- unigram, bigram, trigram order
//! ```
//!
//! Continuation counts are rebuilt on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::counts::{CountTable, ShardCounts, Vocab, PAD, PAD_ID, UNK, UNK_ID};
use super::discounts::Discounts;
use super::model::MknModel;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MKN1";
const VERSION: u32 = 1;

impl MknModel {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let counts = self.counts();
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&[u8::from(counts.unk_singletons)])?;

        let vocab = counts.vocab.tokens();
        w.write_all(&(vocab.len() as u32).to_le_bytes())?;
        for t in vocab {
            w.write_all(&(t.len() as u32).to_le_bytes())?;
            w.write_all(t.as_bytes())?;
        }
        for c in &counts.unigrams {
            w.write_all(&c.to_le_bytes())?;
        }

        let mut bigrams: Vec<_> = counts.bigrams.iter().collect();
        bigrams.sort_unstable();
        w.write_all(&(bigrams.len() as u64).to_le_bytes())?;
        for (&(a, b), c) in bigrams {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
        }

        let mut trigrams: Vec<_> = counts.trigrams.iter().collect();
        trigrams.sort_unstable();
        w.write_all(&(trigrams.len() as u64).to_le_bytes())?;
        for (&(a, b, c), n) in trigrams {
            w.write_all(&a.to_le_bytes())?;
            w.write_all(&b.to_le_bytes())?;
            w.write_all(&c.to_le_bytes())?;
            w.write_all(&n.to_le_bytes())?;
        }

        for d in self.discounts() {
            for v in [d.d1, d.d2, d.d3plus] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = Reader(r);
        let mut magic = [0u8; 4];
        r.bytes(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidModel("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::InvalidModel(format!("unsupported version {version}")));
        }
        let mut flags = [0u8; 1];
        r.bytes(&mut flags)?;

        let vocab_len = r.u32()? as usize;
        if vocab_len < 2 {
            return Err(Error::InvalidModel("vocabulary lacks special tokens".into()));
        }
        let mut tokens = Vec::with_capacity(vocab_len);
        for _ in 0..vocab_len {
            let len = r.u32()? as usize;
            let mut buf = vec![0u8; len];
            r.bytes(&mut buf)?;
            tokens.push(
                String::from_utf8(buf).map_err(|_| Error::InvalidModel("token is not utf-8".into()))?,
            );
        }
        if tokens[PAD_ID as usize] != PAD || tokens[UNK_ID as usize] != UNK {
            return Err(Error::InvalidModel("special tokens out of place".into()));
        }
        let vocab = Vocab::from_id_order(tokens);
        if vocab.len() != vocab_len {
            return Err(Error::InvalidModel("duplicate vocabulary entries".into()));
        }
        let check = |id: u32| {
            if (id as usize) < vocab_len {
                Ok(id)
            } else {
                Err(Error::InvalidModel(format!("token id {id} out of range")))
            }
        };

        let mut raw = ShardCounts::default();
        for id in 0..vocab_len as u32 {
            let c = r.u64()?;
            if c > 0 {
                raw.unigrams.insert(id, c);
            }
        }
        let n = r.u64()?;
        for _ in 0..n {
            let key = (check(r.u32()?)?, check(r.u32()?)?);
            raw.bigrams.insert(key, r.u64()?);
        }
        let n = r.u64()?;
        for _ in 0..n {
            let key = (check(r.u32()?)?, check(r.u32()?)?, check(r.u32()?)?);
            raw.trigrams.insert(key, r.u64()?);
        }
        let mut discounts = [Discounts::default(); 3];
        for d in &mut discounts {
            d.d1 = r.f64()?;
            d.d2 = r.f64()?;
            d.d3plus = r.f64()?;
            if !d.is_valid() {
                return Err(Error::InvalidModel("discount out of range".into()));
            }
        }
        let mut trailing = [0u8; 1];
        if r.0.read(&mut trailing)? != 0 {
            return Err(Error::InvalidModel("trailing bytes".into()));
        }

        let counts = CountTable::from_raw(vocab, raw, flags[0] & 1 == 1);
        Ok(MknModel::with_discounts(counts, discounts))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::read_from(bytes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes(&mut self, buf: &mut [u8]) -> Result<()> {
        self.0.read_exact(buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::InvalidModel("truncated file".into()),
            _ => Error::Io(e),
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.bytes(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.bytes(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}
