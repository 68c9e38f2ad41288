use std::fs;
use std::path::Path;

use anyhow::Context;

/// Provenance lines written at the top of every output file.
#[derive(Debug, Clone)]
pub struct Meta {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Meta {
    fn header(&self) -> String {
        format!(
            "# factorlab {} {}\n# config_sha256: {}\n# seed: {}\n",
            self.command,
            env!("CARGO_PKG_VERSION"),
            self.config_hash,
            self.seed
        )
    }
}

/// Renders a CSV body and writes it after the metadata lines.
pub fn write_csv<F>(path: &Path, meta: &Meta, body: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> factorlab::Result<()>,
{
    let mut buf = meta.header().into_bytes();
    body(&mut buf).with_context(|| format!("rendering {}", path.display()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Two-column `key,value` report.
pub fn write_key_values(path: &Path, meta: &Meta, rows: &[(&str, String)]) -> anyhow::Result<()> {
    write_csv(path, meta, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["key", "value"])?;
        for (k, v) in rows {
            w.write_record([*k, v.as_str()])?;
        }
        w.flush()?;
        Ok(())
    })
}

/// Writes records built by the caller under a header row.
pub fn write_table(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> anyhow::Result<()> {
    write_csv(path, meta, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })
}
