//! Output files. Tables go to CSV with fixed formatting, summaries to JSON; each file is
//! written to a temporary name and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let tmp = self.root.join(format!(".{name}.partial"));
        fs::write(&tmp, contents)?;
        fs::rename(&tmp, &path)?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// CSV text with a header row and `%.12e` numbers.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::Int(v) => write!(self.text, "{v}"),
                Cell::Num(v) => write!(self.text, "{v:.12e}"),
                Cell::Opt(Some(v)) => write!(self.text, "{v:.6}"),
                Cell::Opt(None) => Ok(()),
                Cell::Text(s) => write!(self.text, "{s}"),
            }
            .expect("writing to a String cannot fail");
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub enum Cell<'a> {
    Int(i64),
    Num(f64),
    Opt(Option<f64>),
    Text(&'a str),
}
