//! Line-delimited JSON adapter for external model components.
//!
//! A plugin is either a long-running subprocess that reads one JSON request
//! per line on stdin and answers with one JSON response per line on stdout,
//! or an HTTP endpoint that accepts the same request as a POST body. Readers,
//! embedders, cross scorers, question generators and evaluators all speak
//! through this transport; each adapter only fixes the request and response
//! shapes.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PluginError {
    #[error("failed to start plugin `{program}`: {source}")]
    Spawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plugin i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("plugin closed its output stream")]
    Closed,
    #[error("plugin http request failed: {0}")]
    Http(String),
    #[error("malformed plugin response: {0}")]
    Protocol(String),
    #[error("{0}")]
    Component(String),
}

/// Where a plugin lives. Serialized as `{"command": [...]}` or `{"url": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PluginEndpoint {
    Command(Vec<String>),
    Url(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PluginSpec {
    #[serde(flatten)]
    pub endpoint: PluginEndpoint,
    /// Whether the plugin tolerates concurrent requests. Subprocess plugins
    /// are always driven one request at a time regardless.
    #[serde(default)]
    pub concurrent: bool,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct JsonPlugin {
    spec: PluginSpec,
    process: Mutex<Option<Process>>,
}

impl JsonPlugin {
    pub fn new(spec: PluginSpec) -> Self {
        Self {
            spec,
            process: Mutex::new(None),
        }
    }

    pub fn spec(&self) -> &PluginSpec {
        &self.spec
    }

    pub fn concurrency_safe(&self) -> bool {
        matches!(self.spec.endpoint, PluginEndpoint::Url(_)) && self.spec.concurrent
    }

    pub fn call<Req, Resp>(&self, request: &Req) -> Result<Resp, PluginError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let body = serde_json::to_string(request).map_err(|e| PluginError::Protocol(e.to_string()))?;
        let raw = match &self.spec.endpoint {
            PluginEndpoint::Command(argv) => self.call_process(argv, &body)?,
            PluginEndpoint::Url(url) => ureq::post(url)
                .set("content-type", "application/json")
                .send_string(&body)
                .map_err(|e| PluginError::Http(e.to_string()))?
                .into_string()?,
        };
        serde_json::from_str(raw.trim()).map_err(|e| PluginError::Protocol(format!("{e}: {}", raw.trim())))
    }

    fn call_process(&self, argv: &[String], body: &str) -> Result<String, PluginError> {
        let mut guard = self.process.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(spawn(argv)?);
        }
        let proc = guard.as_mut().expect("process started above");
        let result = (|| {
            proc.stdin.write_all(body.as_bytes())?;
            proc.stdin.write_all(b"\n")?;
            proc.stdin.flush()?;
            let mut line = String::new();
            if proc.stdout.read_line(&mut line)? == 0 {
                return Err(PluginError::Closed);
            }
            Ok(line)
        })();
        if result.is_err() {
            // a broken pipe leaves the child in an unknown state; restart on next call
            if let Some(mut p) = guard.take() {
                let _ = p.child.kill();
                let _ = p.child.wait();
            }
        }
        result
    }
}

fn spawn(argv: &[String]) -> Result<Process, PluginError> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| PluginError::Protocol("empty plugin command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|source| PluginError::Spawn {
            program: program.clone(),
            source,
        })?;
    let stdin = child.stdin.take().ok_or(PluginError::Closed)?;
    let stdout = BufReader::new(child.stdout.take().ok_or(PluginError::Closed)?);
    Ok(Process { child, stdin, stdout })
}

impl Drop for JsonPlugin {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.process.lock() {
            if let Some(mut p) = guard.take() {
                let _ = p.child.kill();
                let _ = p.child.wait();
            }
        }
    }
}

impl std::fmt::Debug for JsonPlugin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonPlugin").field("spec", &self.spec).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Ping<'a> {
        text: &'a str,
    }

    #[derive(Debug, Deserialize)]
    struct Pong {
        text: String,
    }

    fn have_sh() -> bool {
        Command::new("sh").arg("-c").arg("true").status().is_ok()
    }

    #[test]
    fn subprocess_round_trip() {
        if !have_sh() {
            return;
        }
        // `cat` echoes each request line back unchanged
        let plugin = JsonPlugin::new(PluginSpec {
            endpoint: PluginEndpoint::Command(vec!["cat".into()]),
            concurrent: false,
        });
        for word in ["a", "b", "c"] {
            let pong: Pong = plugin.call(&Ping { text: word }).unwrap();
            assert_eq!(pong.text, word);
        }
        assert!(!plugin.concurrency_safe());
    }

    #[test]
    fn missing_program_is_a_spawn_error() {
        let plugin = JsonPlugin::new(PluginSpec {
            endpoint: PluginEndpoint::Command(vec!["/nonexistent/plugin-binary".into()]),
            concurrent: false,
        });
        let err = plugin.call::<_, Pong>(&Ping { text: "x" }).unwrap_err();
        assert!(matches!(err, PluginError::Spawn { .. }));
    }

    #[test]
    fn closed_stream_is_reported() {
        if !have_sh() {
            return;
        }
        let plugin = JsonPlugin::new(PluginSpec {
            endpoint: PluginEndpoint::Command(vec!["sh".into(), "-c".into(), "exit 0".into()]),
            concurrent: false,
        });
        assert!(plugin.call::<_, Pong>(&Ping { text: "x" }).is_err());
    }

    #[test]
    fn spec_serde_shape() {
        let spec: PluginSpec = serde_json::from_str(r#"{"command":["python3","reader.py"]}"#).unwrap();
        assert_eq!(spec.endpoint, PluginEndpoint::Command(vec!["python3".into(), "reader.py".into()]));
        assert!(!spec.concurrent);
        let spec: PluginSpec =
            serde_json::from_str(r#"{"url":"http://localhost:9000/read","concurrent":true}"#).unwrap();
        assert_eq!(spec.endpoint, PluginEndpoint::Url("http://localhost:9000/read".into()));
    }
}
