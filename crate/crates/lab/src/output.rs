//! Writing run outputs and the metadata sidecar.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::commands::Output;
use crate::config::{Format, RunConfig};
use crate::error::{LabError, LabResult};
use crate::table::Table;

/// Bytes of the primary output in the configured format.
pub fn primary_bytes(cfg: &RunConfig, out: &Output) -> LabResult<Vec<u8>> {
    render(cfg.format, &out.primary, Some(&out.summary))
}

fn render(format: Format, table: &Table, summary: Option<&serde_json::Value>) -> LabResult<Vec<u8>> {
    match (format, summary) {
        (Format::Json, Some(s)) => {
            let mut v = serde_json::to_vec_pretty(&json!({ "summary": s, "rows": table.to_json_value() }))?;
            v.push(b'\n');
            Ok(v)
        }
        _ => table.render(format),
    }
}

/// `<dir>/<stem>.<name>.<ext>` next to the primary file.
pub fn sibling(path: &Path, name: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{name}.{ext}"))
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> LabResult<()> {
    std::fs::write(path, bytes).map_err(|e| LabError::io(path, e))
}

/// Writes the primary output (to `cfg.out` or stdout), the extra tables and
/// the sidecar `<out>.meta.json` with version, config hash, seed and wall time.
pub fn emit(cfg: &RunConfig, out: &Output, wall_seconds: f64, workers: usize) -> LabResult<Vec<PathBuf>> {
    let bytes = primary_bytes(cfg, out)?;
    let Some(path) = cfg.out.as_deref() else {
        std::io::stdout().write_all(&bytes).map_err(|e| LabError::io("<stdout>", e))?;
        return Ok(vec![]);
    };
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut written = vec![path.to_path_buf()];
    write_file(path, &bytes)?;
    for (name, table) in &out.extras {
        let p = sibling(path, name, ext);
        write_file(&p, &render(cfg.format, table, None)?)?;
        written.push(p);
    }
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cfg.subcommand.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "workers": workers,
        "wall_time_seconds": wall_seconds,
        "config": cfg,
        "summary": out.summary,
        "outputs": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    let mp = meta_path(path);
    let mut mb = serde_json::to_vec_pretty(&meta)?;
    mb.push(b'\n');
    write_file(&mp, &mb)?;
    written.push(mp);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_names() {
        assert_eq!(meta_path(Path::new("a/u.csv")), PathBuf::from("a/u.csv.meta.json"));
        assert_eq!(sibling(Path::new("a/u.csv"), "grad", "csv"), PathBuf::from("a/u.grad.csv"));
    }
}
