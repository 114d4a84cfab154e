use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;

use crate::config::RunConfig;

pub const TOOL: &str = "harnack-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One pass/fail line of a report. Non-binding checks are reported but do not
/// change the exit code, e.g. the conclusion of an exploratory run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
    pub binding: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= limit,
            value,
            limit,
            binding: true,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            pass: value >= limit,
            value,
            limit,
            binding: true,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
            binding: true,
        }
    }

    pub fn advisory(mut self) -> Self {
        self.binding = false;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Exploratory,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Exploratory => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub unmet_hypotheses: Vec<String>,
    pub hypothesis_flags: Option<Value>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Envelope {
    /// A binding failure wins; otherwise unmet hypotheses make the run exploratory.
    pub fn new(
        command: &str,
        config: &RunConfig,
        mut checks: Vec<Check>,
        unmet: Vec<String>,
        exploratory: bool,
        result: Value,
    ) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let status = if checks.iter().any(|c| c.binding && !c.pass) {
            Status::Fail
        } else if exploratory || !unmet.is_empty() {
            Status::Exploratory
        } else {
            Status::Pass
        };
        Envelope {
            tool: TOOL,
            version: VERSION,
            command: command.to_string(),
            config: config.clone(),
            status,
            exit_code: status.exit_code(),
            checks,
            unmet_hypotheses: unmet,
            hypothesis_flags: None,
            result,
            timing: None,
        }
    }

    pub fn with_hypotheses(mut self, flags: Value) -> Self {
        self.hypothesis_flags = Some(flags);
        self
    }
}

/// Pretty JSON with every float written as `{:.16e}` (17 significant digits).
struct SciFormatter {
    inner: PrettyFormatter<'static>,
}

impl Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", f64::from(value))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut out,
        SciFormatter {
            inner: PrettyFormatter::new(),
        },
    );
    value.serialize(&mut ser).expect("report values serialize");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_17_digits() {
        let s = to_json(&serde_json::json!({"x": 0.1, "y": [2.0, -1e-300], "z": 3}));
        assert!(s.contains("\"x\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("2.0000000000000000e0"), "{s}");
        assert!(s.contains("-1.0000000000000000e-300"), "{s}");
        assert!(s.contains("\"z\": 3"), "{s}");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn status_precedence() {
        let cfg = RunConfig::default();
        let ok = Check::at_most("a", 1.0, 2.0);
        let bad = Check::at_most("b", 3.0, 2.0);
        let e = Envelope::new("t", &cfg, vec![ok.clone()], vec![], false, Value::Null);
        assert_eq!(e.exit_code, 0);
        let e = Envelope::new(
            "t",
            &cfg,
            vec![ok.clone()],
            vec!["parallel_ricci".into()],
            false,
            Value::Null,
        );
        assert_eq!(e.exit_code, 3);
        let e = Envelope::new("t", &cfg, vec![bad.clone(), ok], vec!["x".into()], true, Value::Null);
        assert_eq!(e.exit_code, 1);
        assert_eq!(e.checks[0].name, "a");
        let e = Envelope::new("t", &cfg, vec![bad.advisory()], vec![], true, Value::Null);
        assert_eq!(e.exit_code, 3);
    }
}
