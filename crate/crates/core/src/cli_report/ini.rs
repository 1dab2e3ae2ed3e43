//! Line-oriented `[section]` / `key = value` documents.

use crate::error::{Error, Result};

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

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub sections: Vec<Section>,
    /// Number of lines in the source, used to place "missing" errors.
    pub lines: usize,
}

pub(crate) fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

impl Document {
    /// `#` starts a comment anywhere on a line; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Document::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            doc.lines = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_error(line, format!("malformed section header `{content}`")))?
                    .trim();
                if name.is_empty() {
                    return Err(config_error(line, "empty section name"));
                }
                if doc.section(name).is_some() {
                    return Err(config_error(line, format!("duplicate section [{name}]")));
                }
                doc.sections.push(Section { name: name.to_string(), line, entries: Vec::new() });
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(config_error(line, "empty key"));
            }
            let section = doc
                .sections
                .last_mut()
                .ok_or_else(|| config_error(line, format!("key `{key}` outside any section")))?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(config_error(line, format!("duplicate key `{key}` in [{}]", section.name)));
            }
            section.entries.push(Entry { key: key.to_string(), value: value.to_string(), line });
        }
        Ok(doc)
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let doc = Document::parse("# head\n[a]\nx = 1 # trailing\n\n[b]\ny=two words\n").unwrap();
        assert_eq!(doc.sections.len(), 2);
        assert_eq!(doc.sections[0].entries[0], Entry { key: "x".into(), value: "1".into(), line: 3 });
        assert_eq!(doc.sections[1].entries[0].value, "two words");
        assert_eq!(doc.lines, 6);
    }

    #[test]
    fn reports_line_numbers() {
        let line_of = |text: &str| match Document::parse(text) {
            Err(Error::Config { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("x = 1"), 1);
        assert_eq!(line_of("[a]\nx = 1\nx = 2"), 3);
        assert_eq!(line_of("[a]\n\n[a]"), 3);
        assert_eq!(line_of("[a]\nnonsense"), 2);
        assert_eq!(line_of("[a\n"), 1);
    }
}
