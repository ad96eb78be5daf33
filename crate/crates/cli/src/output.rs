//! Single writer for all artifacts of one run.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("cannot create output directory {}", d.display()))?;
        }
        Ok(Sink { dir, written: Vec::new() })
    }

    pub fn to_dir(&self) -> bool {
        self.dir.is_some()
    }

    /// The primary artifact: a file under `--out`, stdout otherwise.
    pub fn primary(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        match &self.dir {
            Some(_) => self.file(name, bytes),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }

    /// Secondary artifacts are only written when an output directory is set.
    pub fn file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn finish(self, command: &str, started: SystemTime) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let meta = Meta {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            argv: std::env::args().collect(),
            started_unix_ms: unix_ms(started),
            finished_unix_ms: unix_ms(SystemTime::now()),
            artifacts: self.written.clone(),
        };
        let mut sink = self;
        sink.file("meta.json", &json_bytes(&meta)?)
    }
}

#[derive(Serialize)]
struct Meta {
    command: String,
    version: String,
    argv: Vec<String>,
    started_unix_ms: u128,
    finished_unix_ms: u128,
    artifacts: Vec<String>,
}

fn unix_ms(t: SystemTime) -> u128 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}
