use std::fmt;

use super::WireError;

pub const MAX_LABEL: usize = 63;
pub const MAX_NAME: usize = 255;

/// A domain name as a sequence of raw labels, root excluded.
///
/// Names built through [`Name::parse`] are always valid. [`Name::from_labels`]
/// skips validation so oversize names can reach the encoder, which rejects them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Name {
    labels: Vec<Vec<u8>>,
}

impl Name {
    pub fn root() -> Self {
        Self { labels: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self, WireError> {
        let invalid = || WireError::InvalidName(text.to_string());
        let trimmed = text.strip_suffix('.').unwrap_or(text);
        if trimmed.is_empty() {
            return if text == "." { Ok(Self::root()) } else { Err(invalid()) };
        }
        let mut labels = Vec::new();
        for label in trimmed.split('.') {
            if label.is_empty() || label.len() > MAX_LABEL || !label.is_ascii() {
                return Err(invalid());
            }
            labels.push(label.as_bytes().to_vec());
        }
        let name = Self { labels };
        if name.wire_len() > MAX_NAME {
            return Err(invalid());
        }
        Ok(name)
    }

    pub fn from_labels(labels: Vec<Vec<u8>>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[Vec<u8>] {
        &self.labels
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    pub fn is_root(&self) -> bool {
        self.labels.is_empty()
    }

    /// Length on the wire, uncompressed, including the root byte.
    pub fn wire_len(&self) -> usize {
        self.labels.iter().map(|l| l.len() + 1).sum::<usize>() + 1
    }

    pub fn to_lowercase(&self) -> Self {
        Self {
            labels: self.labels.iter().map(|l| l.to_ascii_lowercase()).collect(),
        }
    }

    /// Parent name, or `None` at the root.
    pub fn parent(&self) -> Option<Self> {
        if self.labels.is_empty() {
            None
        } else {
            Some(Self {
                labels: self.labels[1..].to_vec(),
            })
        }
    }

    pub fn is_subdomain_of(&self, other: &Name) -> bool {
        let (a, b) = (self.to_lowercase(), other.to_lowercase());
        a.labels.len() >= b.labels.len() && a.labels.ends_with(&b.labels)
    }

    pub fn eq_ignore_case(&self, other: &Name) -> bool {
        self.to_lowercase() == other.to_lowercase()
    }

    pub(crate) fn check(&self) -> Result<(), WireError> {
        for label in &self.labels {
            if label.is_empty() || label.len() > MAX_LABEL {
                return Err(WireError::OversizeRecord(format!(
                    "label of {} bytes in {self}",
                    label.len()
                )));
            }
        }
        if self.wire_len() > MAX_NAME {
            return Err(WireError::OversizeRecord(format!(
                "name of {} bytes",
                self.wire_len()
            )));
        }
        Ok(())
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        self.check()?;
        for label in &self.labels {
            out.push(label.len() as u8);
            out.extend_from_slice(label);
        }
        out.push(0);
        Ok(())
    }

    /// Canonical (lowercase, uncompressed) wire form.
    pub fn canonical_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        for label in &self.labels {
            out.push(label.len() as u8);
            out.extend(label.iter().map(u8::to_ascii_lowercase));
        }
        out.push(0);
        out
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.labels.is_empty() {
            return f.write_str(".");
        }
        for label in &self.labels {
            f.write_str(&String::from_utf8_lossy(label))?;
            f.write_str(".")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Name {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}
