use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::ValueEnum;
use fdc_core::experiments::Provenance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Destination and provenance for a command's output.
pub struct Output {
    path: Option<PathBuf>,
    format: Option<Format>,
    provenance: Provenance,
}

impl Output {
    pub fn new(path: Option<PathBuf>, format: Option<Format>, command: String, seed: u64) -> Self {
        Output {
            path,
            format,
            provenance: Provenance::new(command, Some(seed)),
        }
    }

    /// The requested format, or the command's natural one.
    pub fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }

    pub fn csv(&self, body: &str) -> anyhow::Result<()> {
        let mut text = self.provenance.comment_header();
        text.push_str(body);
        self.write(&text)
    }

    pub fn json(&self, payload: serde_json::Value) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.provenance.wrap_json(payload))?;
        text.push('\n');
        self.write(&text)
    }

    fn write(&self, text: &str) -> anyhow::Result<()> {
        match &self.path {
            Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }
}
