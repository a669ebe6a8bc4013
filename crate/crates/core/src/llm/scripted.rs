use std::path::Path;

use super::{LlmError, Provider, ProviderReply, Request};

/// Line separating responses in a script file.
pub const SCRIPT_SEPARATOR: &str = "%%% RESPONSE %%%";

/// Replays canned responses. Response `i` answers the run's `i`-th call,
/// so a resumed run picks up where the checkpoint left off.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    responses: Vec<String>,
}

impl ScriptedProvider {
    pub fn new(responses: Vec<String>) -> Self {
        Self { responses }
    }

    /// Splits on lines equal to [`SCRIPT_SEPARATOR`]. A separator on the
    /// first line is optional.
    pub fn parse(text: &str) -> Self {
        let mut responses = Vec::new();
        let mut current: Vec<&str> = Vec::new();
        let mut seen_content = false;
        for line in text.lines() {
            if line.trim_end() == SCRIPT_SEPARATOR {
                if seen_content {
                    responses.push(current.join("\n"));
                }
                current.clear();
                seen_content = true;
            } else {
                current.push(line);
                seen_content = true;
            }
        }
        if seen_content && !(current.is_empty() && text.trim_end().ends_with(SCRIPT_SEPARATOR)) {
            responses.push(current.join("\n"));
        }
        Self { responses }
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Joins responses into script-file text.
    pub fn render(responses: &[String]) -> String {
        let mut out = String::new();
        for r in responses {
            out.push_str(SCRIPT_SEPARATOR);
            out.push('\n');
            out.push_str(r);
            if !r.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, request: &Request<'_>) -> Result<ProviderReply, LlmError> {
        self.responses
            .get(request.ordinal as usize)
            .cloned()
            .map(ProviderReply::text_only)
            .ok_or(LlmError::ScriptExhausted(request.ordinal))
    }
}
