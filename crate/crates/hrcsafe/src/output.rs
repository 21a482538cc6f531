//! Output files. Every file starts with a comment line carrying the config
//! hash and the seed, and is written in one piece so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::Error;

/// Identity of a run, embedded in every artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn header(&self) -> String {
        format!("# config_sha256={} seed={}\n", self.config_sha256, self.seed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Where a command writes, and what it wrote.
#[derive(Debug)]
pub struct Sink {
    pub dir: PathBuf,
    pub prov: Provenance,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: impl Into<PathBuf>, prov: Provenance) -> Result<Self, Error> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            prov,
            written: Vec::new(),
        })
    }

    /// Files written so far, relative to the output directory, in write order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// CSV with the provenance line, optional extra comment lines, a header row and data rows.
    pub fn csv(&mut self, name: &str, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, Error> {
        let mut buf = self.prov.header().into_bytes();
        for c in comments {
            buf.extend_from_slice(format!("# {c}\n").as_bytes());
        }
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        buf.extend(w.into_inner().map_err(|e| Error::Csv(e.to_string()))?);
        self.raw(name, &buf)
    }

    /// Plain text with the provenance line.
    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, Error> {
        let mut buf = self.prov.header();
        buf.push_str(body);
        self.raw(name, buf.as_bytes())
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, Error> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.written.push(PathBuf::from(name));
        Ok(path)
    }

    pub fn path(&self, name: impl AsRef<Path>) -> PathBuf {
        self.dir.join(name)
    }
}

/// Fixed-width text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.push('\n');
        s
    };
    let mut out = line(header.to_vec());
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(|s| s.as_str()).collect()));
    for r in rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}
