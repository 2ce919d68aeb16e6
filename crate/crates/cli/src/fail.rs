//! Command failures and their exit codes.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Exit 2: bad flags, config or missing inputs named by the user.
    Config,
    /// Exit 1: numeric or I/O failure while running.
    Runtime,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub kind: Kind,
    pub flag: Option<String>,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { kind: Kind::Config, flag: None, message: message.into() }
    }

    pub fn config_flag(flag: &str, message: impl Into<String>) -> Self {
        Self { kind: Kind::Config, flag: Some(flag.to_string()), message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { kind: Kind::Runtime, flag: None, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Config => 2,
            Kind::Runtime => 1,
        }
    }

    /// Single-line JSON for stderr.
    pub fn to_json_line(&self) -> String {
        let kind = match self.kind {
            Kind::Config => "config",
            Kind::Runtime => "runtime",
        };
        let mut v = serde_json::json!({ "error": kind, "message": self.message });
        if let Some(f) = &self.flag {
            v["flag"] = serde_json::Value::String(f.clone());
        }
        v.to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<pitchaudit::Error> for Failure {
    fn from(e: pitchaudit::Error) -> Self {
        use pitchaudit::Error as E;
        match e {
            E::Config(_) | E::UnknownColumn(_) => Failure::config(e.to_string()),
            _ => Failure::runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::runtime(e.to_string())
    }
}
