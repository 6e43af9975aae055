use std::fs::File;
use std::io::{BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::DatasetError;

/// Append-only writer, one JSON document per line.
pub struct JsonlWriter<T> {
    path: PathBuf,
    out: BufWriter<File>,
    count: usize,
    _marker: PhantomData<fn(&T)>,
}

impl<T: Serialize> JsonlWriter<T> {
    pub fn create(path: &Path) -> Result<Self, DatasetError> {
        let file = File::create(path).map_err(|e| io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            count: 0,
            _marker: PhantomData,
        })
    }

    /// Opens `path` for appending, creating it if needed.
    pub fn open_append(path: &Path) -> Result<Self, DatasetError> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            count: 0,
            _marker: PhantomData,
        })
    }

    pub fn append(&mut self, item: &T) -> Result<(), DatasetError> {
        let line = serde_json::to_string(item).map_err(|e| DatasetError::Invalid(e.to_string()))?;
        writeln!(self.out, "{line}").map_err(|e| io(&self.path, e))?;
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(mut self) -> Result<usize, DatasetError> {
        self.out.flush().map_err(|e| io(&self.path, e))?;
        Ok(self.count)
    }
}

fn io(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses line-delimited JSON; blank lines are skipped.
pub fn parse_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>, DatasetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    parse_jsonl(&text, &path.display().to_string())
}
