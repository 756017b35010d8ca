//! Flat `key=value` configuration files.
//!
//! Pairs are separated by whitespace or newlines and `#` starts a comment.
//! Keys are the input columns of the output schemas, e.g. `policy`, `n`,
//! `d`, `load`, `reps`, `seed`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("");
            for token in line.split_whitespace() {
                let (key, value) = token.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("config entry `{token}` is not key=value"))
                })?;
                if entries.insert(key.to_string(), value.to_string()).is_some() {
                    return Err(CliError::Usage(format!("config key `{key}` given twice")));
                }
            }
        }
        Ok(Settings { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects any key outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str], command: &str) -> Result<(), CliError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(key) => Err(CliError::Usage(format!(
                "unknown config key `{key}` for `{command}`"
            ))),
            None => Ok(()),
        }
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|v| parse_value(key, v))
            .transpose()
    }

    /// Comma-separated list.
    pub fn get_list<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.entries
            .get(key)
            .map(|v| v.split(',').map(|x| parse_value(key, x)).collect())
            .transpose()
    }

    /// The command-line value when given, else the file value.
    pub fn pick<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }
}

fn parse_value<T>(key: &str, value: &str) -> Result<T, CliError>
where
    T: FromStr,
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("config key `{key}`: cannot parse `{value}`: {e}")))
}

/// Renders pairs one per line, in the given order.
pub fn render(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_and_multiline() {
        let s = Settings::parse("policy=bibd n=13\n# comment\nd=4 # trailing\n").unwrap();
        assert_eq!(s.get::<usize>("n").unwrap(), Some(13));
        assert_eq!(s.get::<usize>("d").unwrap(), Some(4));
        assert_eq!(s.get::<String>("policy").unwrap().as_deref(), Some("bibd"));
        assert_eq!(s.get::<usize>("jobs").unwrap(), None);
    }

    #[test]
    fn errors_name_the_key() {
        let s = Settings::parse("n=thirteen").unwrap();
        let err = s.get::<usize>("n").unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
        let s = Settings::parse("bogus=1").unwrap();
        let err = s.check_keys(&["n"], "simulate").unwrap_err().to_string();
        assert!(err.contains("`bogus`"), "{err}");
        assert!(Settings::parse("n=1 n=2").is_err());
        assert!(Settings::parse("n").is_err());
    }

    #[test]
    fn command_line_wins() {
        let s = Settings::parse("d=4").unwrap();
        assert_eq!(s.pick(Some(5usize), "d").unwrap(), Some(5));
        assert_eq!(s.pick(None::<usize>, "d").unwrap(), Some(4));
        assert_eq!(s.get_list::<f64>("d").unwrap(), Some(vec![4.0]));
    }
}
