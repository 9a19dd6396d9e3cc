use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use wdro::jsonfmt::to_string_precise;

use crate::{CliError, Common};

/// Files one subcommand produces, written together or not at all.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut body = to_string_precise(value)?.into_bytes();
        body.push(b'\n');
        self.files.push((name.to_string(), body));
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: Vec<u8>) {
        self.files.push((name.to_string(), body));
    }

    /// Writes into `--out`, or concatenates to stdout without it.
    pub fn emit(self, common: &Common) -> Result<(), CliError> {
        let Some(dir) = &common.out else {
            let mut stdout = std::io::stdout().lock();
            for (_, body) in &self.files {
                stdout.write_all(body)?;
            }
            return Ok(());
        };
        fs::create_dir_all(dir)?;
        if !common.force {
            if let Some((name, _)) = self.files.iter().find(|(name, _)| dir.join(name).exists()) {
                return Err(CliError::OutputExists(dir.join(name)));
            }
        }
        for (name, body) in &self.files {
            let path = dir.join(name);
            write_file(&path, body)?;
            if common.verbose {
                eprintln!("wrote {}", path.display());
            }
        }
        Ok(())
    }
}

fn write_file(path: &Path, body: &[u8]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(body)?;
    f.sync_all()
}
