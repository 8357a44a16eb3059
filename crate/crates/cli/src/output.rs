use serde_json::Value as Json;
use std::fs;
use std::io::Write;
use std::process::ExitCode;

use crate::Global;

/// What a command produced: a JSON document, a short summary, extra files
/// for `--out`, and the number of invariant violations found.
pub struct Report {
    pub name: &'static str,
    pub json: Json,
    pub human: String,
    pub files: Vec<(String, String)>,
    pub violations: usize,
}

impl Report {
    pub fn new(name: &'static str, json: Json, human: String) -> Self {
        Self {
            name,
            json,
            human,
            files: Vec::new(),
            violations: 0,
        }
    }

    pub fn file(mut self, name: impl Into<String>, contents: String) -> Self {
        self.files.push((name.into(), contents));
        self
    }

    pub fn violations(mut self, n: usize) -> Self {
        self.violations = n;
        self
    }

    pub fn emit(self, global: &Global) -> Result<ExitCode, Box<dyn std::error::Error>> {
        let json = serde_json::to_string_pretty(&self.json)? + "\n";
        if let Some(dir) = &global.out {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(format!("{}.json", self.name)), &json)?;
            for (name, contents) in &self.files {
                fs::write(dir.join(name), contents)?;
            }
        }
        let mut stdout = std::io::stdout().lock();
        if global.json {
            stdout.write_all(json.as_bytes())?;
        } else {
            stdout.write_all(self.human.as_bytes())?;
            if !self.human.ends_with('\n') {
                stdout.write_all(b"\n")?;
            }
        }
        Ok(if self.violations > 0 {
            ExitCode::from(1)
        } else {
            ExitCode::SUCCESS
        })
    }
}
