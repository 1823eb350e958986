//! Versioned CSV files with an embedded configuration echo.

use crate::error::{Error, Result};

pub const VERSION_LINE: &str = "# bar csv v1";
pub const UNITS: &str = "hbar = 1; energies in units of omega; temperatures k_B T/omega; times 1/omega";
const GENERATED: &str = "# generated: ";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvDoc {
    pub kind: String,
    pub seed: u64,
    pub notes: Vec<String>,
    /// Configuration text, one echo line per config line.
    pub config: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Timestamp as read back; ignored when rendering.
    pub generated: Option<String>,
}

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

impl CsvDoc {
    pub fn new(kind: &str, seed: u64, config: &str, header: &[&str]) -> Self {
        CsvDoc {
            kind: kind.to_string(),
            seed,
            notes: Vec::new(),
            config: config.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            generated: None,
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Text form; only the `generated` line depends on `timestamp`.
    pub fn render(&self, timestamp: &str) -> String {
        let mut out = String::new();
        out.push_str(VERSION_LINE);
        out.push('\n');
        out.push_str(&format!("# kind: {}\n", self.kind));
        out.push_str(&format!("# units: {UNITS}\n"));
        out.push_str(&format!("{GENERATED}{timestamp}\n"));
        out.push_str(&format!("# seed: {}\n", self.seed));
        for n in &self.notes {
            out.push_str(&format!("# note: {n}\n"));
        }
        for l in self.config.lines() {
            out.push_str(&format!("# config: {l}\n"));
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(VERSION_LINE) => {}
            Some(l) if l.starts_with("# bar csv v") => {
                return fmt_err(format!("unsupported CSV version {:?}", &l[2..]))
            }
            _ => return fmt_err("missing CSV version line"),
        }
        let mut doc = CsvDoc::default();
        let mut config = String::new();
        let mut seen_kind = false;
        let mut seen_seed = false;
        let mut header = None;
        for l in lines.by_ref() {
            if let Some(c) = l.strip_prefix("# config: ") {
                config.push_str(c);
                config.push('\n');
            } else if let Some(v) = l.strip_prefix("# kind: ") {
                doc.kind = v.to_string();
                seen_kind = true;
            } else if let Some(v) = l.strip_prefix("# seed: ") {
                doc.seed = v.parse().map_err(|_| Error::Format(format!("bad seed {v:?}")))?;
                seen_seed = true;
            } else if let Some(v) = l.strip_prefix("# note: ") {
                doc.notes.push(v.to_string());
            } else if let Some(v) = l.strip_prefix(GENERATED) {
                doc.generated = Some(v.to_string());
            } else if let Some(v) = l.strip_prefix("# units: ") {
                if v != UNITS {
                    return fmt_err(format!("unexpected units line {v:?}"));
                }
            } else if l.starts_with('#') {
                return fmt_err(format!("unknown header line {l:?}"));
            } else {
                header = Some(l);
                break;
            }
        }
        if !seen_kind || !seen_seed {
            return fmt_err("header lacks kind or seed");
        }
        let header = match header {
            Some(h) if !h.is_empty() => h,
            _ => return fmt_err("missing column header"),
        };
        doc.header = header.split(',').map(str::to_string).collect();
        for (i, l) in lines.enumerate() {
            if l.contains('"') {
                return fmt_err(format!("row {} uses quoting, which is not supported", i + 1));
            }
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != doc.header.len() {
                return fmt_err(format!(
                    "row {} has {} fields, header has {}",
                    i + 1,
                    row.len(),
                    doc.header.len()
                ));
            }
            doc.rows.push(row);
        }
        doc.config = config;
        Ok(doc)
    }
}

/// Drops the `generated` line so two renderings can be compared.
pub fn strip_timestamp(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with(GENERATED)).map(|l| format!("{l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut d = CsvDoc::new("scan", 42, "[run]\nseed = 42\n", &["a", "b"]);
        d.notes.push("long-running".into());
        d.push(vec!["1".into(), "2.5e-3".into()]);
        let text = d.render("123");
        let back = CsvDoc::parse(&text).unwrap();
        assert_eq!(back.generated.as_deref(), Some("123"));
        assert_eq!(back.render("123"), text);
        assert_eq!(strip_timestamp(&d.render("999")), strip_timestamp(&text));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CsvDoc::parse("a,b\n1,2\n").is_err());
        let text = CsvDoc::new("scan", 1, "", &["a"]).render("0");
        let v2 = text.replacen("v1", "v2", 1);
        let e = CsvDoc::parse(&v2).unwrap_err();
        assert!(e.to_string().contains("unsupported"), "{e}");
        let ragged = format!("{text}1,2\n");
        assert!(CsvDoc::parse(&ragged).is_err());
        assert!(CsvDoc::parse(&text.replace("# seed: 1\n", "")).is_err());
    }
}
