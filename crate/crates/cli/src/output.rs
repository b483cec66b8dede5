//! Report envelopes and all-or-nothing output files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _};
use pitchguard::config::{render, KvConfig};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The argument list that regenerates a report. `--jobs` is dropped since
/// it cannot change any output.
pub fn normalized_invocation(args: &[String]) -> Vec<String> {
    let mut out = vec!["pitchguard".to_string()];
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--jobs" {
            it.next();
        } else if !a.starts_with("--jobs=") {
            out.push(a.clone());
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    invocation: &'a [String],
    seed: u64,
    config: BTreeMap<&'a str, &'a str>,
    result: &'a T,
}

pub struct Context {
    command: &'static str,
    pub seed: u64,
    config_text: Option<String>,
    out: Option<PathBuf>,
    invocation: Vec<String>,
    pending: Vec<(PathBuf, Vec<u8>)>,
}

impl Context {
    pub fn new(
        command: &'static str,
        seed: u64,
        config: Option<&Path>,
        out: Option<PathBuf>,
        invocation: Vec<String>,
    ) -> anyhow::Result<Self> {
        let config_text = config
            .map(|p| {
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))
            })
            .transpose()?;
        Ok(Self {
            command,
            seed,
            config_text,
            out,
            invocation,
            pending: vec![],
        })
    }

    /// The parsed `--config` file, empty when none was given.
    pub fn config(&self) -> anyhow::Result<KvConfig> {
        match &self.config_text {
            Some(t) => KvConfig::parse(t).context("parsing config"),
            None => Ok(KvConfig::default()),
        }
    }

    pub fn invocation(&self) -> &[String] {
        &self.invocation
    }

    pub fn out(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    pub fn require_out(&self) -> anyhow::Result<&Path> {
        match self.out.as_deref() {
            Some(p) => Ok(p),
            None => bail!("{} needs --out", self.command),
        }
    }

    /// Queues a file; nothing touches disk until [`Context::commit`].
    pub fn emit(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.pending.push((path.into(), bytes));
    }

    pub fn report_bytes<T: Serialize>(
        &self,
        config: &[(&str, String)],
        result: &T,
    ) -> anyhow::Result<Vec<u8>> {
        log::info!("seed = {}\n{}", self.seed, render(config));
        let env = Envelope {
            tool: "pitchguard",
            version: VERSION,
            command: self.command,
            invocation: &self.invocation,
            seed: self.seed,
            config: config.iter().map(|(k, v)| (*k, v.as_str())).collect(),
            result,
        };
        let mut bytes = serde_json::to_vec_pretty(&env)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn emit_report<T: Serialize>(
        &mut self,
        path: impl Into<PathBuf>,
        config: &[(&str, String)],
        result: &T,
    ) -> anyhow::Result<()> {
        let bytes = self.report_bytes(config, result)?;
        self.emit(path, bytes);
        Ok(())
    }

    /// Writes every queued file to a temporary sibling, then renames them
    /// all into place.
    pub fn commit(self) -> anyhow::Result<()> {
        let mut staged: Vec<(PathBuf, &Path)> = vec![];
        let result = (|| -> anyhow::Result<()> {
            for (path, bytes) in &self.pending {
                let dir = match path.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let name = path
                    .file_name()
                    .with_context(|| format!("{} is not a file path", path.display()))?;
                let tmp = dir.join(format!(
                    ".{}.{}.tmp",
                    name.to_string_lossy(),
                    std::process::id()
                ));
                let mut f = fs::File::create(&tmp)
                    .with_context(|| format!("creating {}", tmp.display()))?;
                staged.push((tmp.clone(), path));
                f.write_all(bytes)?;
                f.sync_all()?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        for (tmp, path) in &staged {
            fs::rename(tmp, path)
                .with_context(|| format!("moving output into {}", path.display()))?;
        }
        Ok(())
    }
}

/// `path` with its extension replaced, e.g. the JSON report next to a CSV.
pub fn sibling(path: &Path, extension: &str) -> PathBuf {
    path.with_extension(extension)
}
