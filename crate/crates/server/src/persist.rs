//! Atomic log files: write to a temporary file in the target directory, then
//! rename into place so readers never see a partial log.

use std::io::Write;
use std::path::{Path, PathBuf};

use echogrid_core::tasks::SessionLog;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("log directory {0}: {1}")]
    Dir(PathBuf, std::io::Error),
    #[error("writing {0}: {1}")]
    Write(PathBuf, std::io::Error),
}

/// `<session>_s<n>_<task>[_c<k>][_aborted].jsonl`
pub fn log_file_name(session_id: &str, log: &SessionLog) -> String {
    let h = &log.header;
    let safe: String = session_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    let mut name = format!("{safe}_s{}_{}", h.session_number, h.task);
    if let Some(c) = h.course {
        name.push_str(&format!("_c{c}"));
    }
    if !h.complete {
        name.push_str("_aborted");
    }
    name + ".jsonl"
}

pub fn persist_log(dir: &Path, session_id: &str, log: &SessionLog) -> Result<PathBuf, PersistError> {
    std::fs::create_dir_all(dir).map_err(|e| PersistError::Dir(dir.to_path_buf(), e))?;
    let target = dir.join(log_file_name(session_id, log));
    let wrap = |e: std::io::Error| PersistError::Write(target.clone(), e);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(wrap)?;
    tmp.write_all(log.to_jsonl().as_bytes()).map_err(wrap)?;
    tmp.as_file().sync_all().map_err(wrap)?;
    tmp.persist(&target).map_err(|e| wrap(e.error))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use echogrid_core::tasks::{EventKind, LogHeader, TaskKind};
    use echogrid_core::Mode;

    #[test]
    fn names_carry_course_and_abort() {
        let mut h = LogHeader::new("p", TaskKind::Navigation, Mode::ThreeD, 1);
        h.session_number = 2;
        h.course = Some(3);
        let log = SessionLog::new(h);
        assert_eq!(log_file_name("a/b", &log), "a_b_s2_navigation_c3_aborted.jsonl");
    }

    #[test]
    fn written_log_reads_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = SessionLog::new(LogHeader::new("p", TaskKind::Localization, Mode::TwoD, 4));
        log.push(0.0, EventKind::TaskStart).unwrap();
        log.push(1.0, EventKind::TaskEnd).unwrap();
        log.header.complete = true;
        let path = persist_log(dir.path(), "x", &log).unwrap();
        let back = SessionLog::from_jsonl(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, log);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1, "no temp files left behind");
    }
}
