//! Minimal INI reader: `[section]` headers, `key = value` lines, and
//! comments starting with `#` or `;` (whole-line, or after whitespace).

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    let bytes = line.as_bytes();
    for (i, &b) in bytes.iter().enumerate() {
        if (b == b'#' || b == b';') && i > 0 && bytes[i - 1].is_ascii_whitespace() {
            return &line[..i];
        }
    }
    line
}

pub fn parse(text: &str) -> Result<Vec<Section>, CliError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name =
                rest.strip_suffix(']').ok_or_else(|| CliError::parse(line, "unterminated section header"))?.trim();
            if name.is_empty() {
                return Err(CliError::parse(line, "empty section name"));
            }
            if sections.iter().any(|s| s.name == name) {
                return Err(CliError::parse(line, format!("duplicate section [{name}]")));
            }
            sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| CliError::parse(line, format!("expected `key = value`, found `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(CliError::parse(line, "missing key before `=`"));
        }
        let section = sections
            .last_mut()
            .ok_or_else(|| CliError::parse(line, format!("key `{key}` appears before any section")))?;
        if section.entries.iter().any(|e| e.key == key) {
            return Err(CliError::parse(line, format!("duplicate key `{key}` in [{}]", section.name)));
        }
        section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
    }
    Ok(sections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_keys_and_comments() {
        let s = parse("# top\n[run]\nE = 4 # energy\n; note\nL=6.5\n\n[cloak]\nrho = 0.01\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].entries[0], Entry { key: "E".into(), value: "4".into(), line: 3 });
        assert_eq!(s[0].entries[1].value, "6.5");
        assert_eq!(s[1].entries[0].line, 8);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse("[run]\nE = 4\nbogus line\n").unwrap_err();
        assert_eq!(e.to_string(), "line 3: expected `key = value`, found `bogus line`");
        assert!(parse("E = 4\n").is_err());
        assert!(parse("[run\n").is_err());
        assert!(parse("[run]\nE = 1\nE = 2\n").is_err());
    }
}
