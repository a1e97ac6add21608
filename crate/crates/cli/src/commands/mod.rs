pub mod basis;
pub mod diagnose;
pub mod experiment;
pub mod recover;
pub mod selftest;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Ensures the output directory exists and returns a path inside it. Every
/// subcommand writes exclusively under its `--out` directory.
pub fn out_file(out_dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    Ok(out_dir.join(name))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
