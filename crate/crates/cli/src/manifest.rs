use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::CliResult;

/// Provenance record written next to every command's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// RFC 3339 start time.
    pub started: String,
    pub wall_clock_secs: f64,
    pub git_describe: String,
    pub threads: usize,
}

pub(crate) struct RunTimer {
    command: &'static str,
    started: String,
    clock: Instant,
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

impl RunManifest {
    pub(crate) fn start(command: &'static str) -> RunTimer {
        RunTimer {
            command,
            started: chrono::Utc::now().to_rfc3339(),
            clock: Instant::now(),
        }
    }
}

impl RunTimer {
    pub(crate) fn finish(
        self,
        config: serde_json::Value,
        seed: u64,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        path: &Path,
    ) -> CliResult<RunManifest> {
        let m = RunManifest {
            command: self.command.into(),
            config,
            seed,
            inputs,
            outputs,
            started: self.started,
            wall_clock_secs: self.clock.elapsed().as_secs_f64(),
            git_describe: git_describe(),
            threads: gmnet_core::parallel::threads_from_env(),
        };
        fs::write(path, serde_json::to_string_pretty(&m).expect("serializable"))?;
        Ok(m)
    }
}
