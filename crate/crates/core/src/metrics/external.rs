use std::path::Path;
use std::process::Command;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Runs an external scoring tool, e.g. a wideband PESQ binary.
///
/// The command template is split on whitespace; `{clean}` and `{processed}`
/// are replaced by the file paths. The first capture group of `pattern`
/// (or the whole match if it has none) is parsed as the score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalMetric {
    pub name: String,
    pub command_template: String,
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScore {
    pub value: f64,
    /// Program and template that produced the value.
    pub tool: String,
}

impl ExternalMetric {
    pub fn new(name: impl Into<String>, command_template: impl Into<String>, pattern: impl Into<String>) -> Self {
        Self { name: name.into(), command_template: command_template.into(), pattern: pattern.into() }
    }

    pub fn score(&self, clean: &Path, processed: &Path) -> Result<ExternalScore> {
        let re = Regex::new(&self.pattern)
            .map_err(|e| Error::External(format!("{}: bad pattern {:?}: {e}", self.name, self.pattern)))?;
        let mut parts = self.command_template.split_whitespace().map(|p| {
            p.replace("{clean}", &clean.to_string_lossy()).replace("{processed}", &processed.to_string_lossy())
        });
        let program = parts.next().ok_or_else(|| Error::External(format!("{}: empty command template", self.name)))?;
        let output = Command::new(&program)
            .args(parts)
            .output()
            .map_err(|e| Error::External(format!("{}: cannot run {program}: {e}", self.name)))?;
        if !output.status.success() {
            return Err(Error::External(format!(
                "{}: {program} exited with {}: {}",
                self.name,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let caps = re.captures(&stdout).ok_or_else(|| {
            Error::External(format!("{}: output did not match pattern {:?}", self.name, self.pattern))
        })?;
        let text = caps.get(1).or_else(|| caps.get(0)).map(|m| m.as_str()).unwrap_or_default();
        let value: f64 = text.trim().parse().map_err(|_| {
            Error::External(format!("{}: pattern {:?} captured non-numeric {text:?}", self.name, self.pattern))
        })?;
        if !value.is_finite() {
            return Err(Error::External(format!("{}: non-finite score", self.name)));
        }
        Ok(ExternalScore { value, tool: format!("{program} ({})", self.command_template) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths() -> (&'static Path, &'static Path) {
        (Path::new("/tmp/c.wav"), Path::new("/tmp/p.wav"))
    }

    #[test]
    fn stub_tool_is_parsed() {
        let m = ExternalMetric::new("pesq", "echo 2.50", r"([-+0-9.]+)");
        let (c, p) = paths();
        let s = m.score(c, p).unwrap();
        assert_eq!(s.value, 2.5);
        assert!(s.tool.starts_with("echo"));
    }

    #[test]
    fn placeholders_are_substituted() {
        let m = ExternalMetric::new("pesq", "echo {clean} score: 3.1 {processed}", r"score: ([0-9.]+) /tmp/p.wav");
        let (c, p) = paths();
        assert_eq!(m.score(c, p).unwrap().value, 3.1);
    }

    #[test]
    fn missing_tool_is_an_error() {
        let m = ExternalMetric::new("pesq", "definitely-not-a-real-binary-xyz {clean}", r"([0-9.]+)");
        let (c, p) = paths();
        assert!(matches!(m.score(c, p), Err(Error::External(_))));
    }

    #[test]
    fn malformed_output_names_pattern() {
        let m = ExternalMetric::new("pesq", "echo no score here", r"MOS-LQO = ([0-9.]+)");
        let (c, p) = paths();
        let err = m.score(c, p).unwrap_err().to_string();
        assert!(err.contains("MOS-LQO"), "{err}");
    }
}
