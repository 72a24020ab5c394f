use std::collections::BTreeMap;
use std::path::Path;

use crate::corpus::{Domain, Relation};
use crate::{Error, Result};

/// Shipped template file. Each line is `key: text`; lines starting with `#`
/// are comments.
/// Bracketed segments are dropped when any placeholder inside is unset.
pub const DEFAULT_TEMPLATES: &str = r#"# explanation templates
T1: This product was retrieved because it is frequently {relation_phrase} with products retrieved by the query "{query}", such as {entities}.
T2: This product was retrieved [{percent}% ]because the user often buys products with {domain} such as {entities}.
T3: This product was retrieved {percent}% because of its popularity under the query.
T4: This product was retrieved because it directly matches the query "{query}".

relation.also_bought: also bought
relation.also_viewed: also viewed
relation.bought_together: bought together
relation.brand: of the same brand
relation.category: in the same category

domain.item: related items
domain.brand: brands
domain.category: categories
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TemplateId {
    /// Item-to-item path.
    Path,
    /// Entities of a knowledge domain.
    Domain,
    /// Query popularity.
    Popularity,
    /// Direct query match.
    Direct,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [TemplateId::Path, TemplateId::Domain, TemplateId::Popularity, TemplateId::Direct];

    pub fn key(self) -> &'static str {
        match self {
            TemplateId::Path => "T1",
            TemplateId::Domain => "T2",
            TemplateId::Popularity => "T3",
            TemplateId::Direct => "T4",
        }
    }
}

/// Placeholder values for one rendering.
#[derive(Clone, Debug, Default)]
pub struct Slots<'a> {
    pub percent: Option<u32>,
    pub domain: Option<&'a str>,
    pub entities: Option<String>,
    pub relation_phrase: Option<String>,
    pub query: Option<&'a str>,
}

impl Slots<'_> {
    fn get(&self, name: &str) -> Option<String> {
        match name {
            "percent" => self.percent.map(|p| p.to_string()),
            "domain" => self.domain.map(str::to_string),
            "entities" => self.entities.clone(),
            "relation_phrase" => self.relation_phrase.clone(),
            "query" => self.query.map(str::to_string),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TemplateSet {
    entries: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES, "default").expect("shipped templates parse")
    }
}

const PLACEHOLDERS: [&str; 5] = ["percent", "domain", "entities", "relation_phrase", "query"];

impl TemplateSet {
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once(':').ok_or_else(|| Error::Parse {
                file: file.into(),
                line: n + 1,
                message: "expected `key: text`".into(),
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        let set = TemplateSet { entries };
        for id in TemplateId::ALL {
            let t = set.entries.get(id.key()).ok_or_else(|| Error::Schema {
                file: file.into(),
                line: 0,
                message: format!("missing template {}", id.key()),
            })?;
            for name in placeholders(t) {
                if !PLACEHOLDERS.contains(&name.as_str()) {
                    return Err(Error::Schema {
                        file: file.into(),
                        line: 0,
                        message: format!("unknown placeholder {{{name}}} in {}", id.key()),
                    });
                }
            }
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn template(&self, id: TemplateId) -> &str {
        &self.entries[id.key()]
    }

    pub fn relation_phrase(&self, r: Relation) -> String {
        self.entries
            .get(&format!("relation.{}", r.name()))
            .cloned()
            .unwrap_or_else(|| r.name().replace('_', " "))
    }

    pub fn domain_phrase(&self, d: Domain) -> String {
        self.entries
            .get(&format!("domain.{}", d.name()))
            .cloned()
            .unwrap_or_else(|| d.name().to_string())
    }

    pub fn render(&self, id: TemplateId, slots: &Slots<'_>) -> String {
        render(self.template(id), slots)
    }
}

fn placeholders(t: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = t;
    while let Some(start) = rest.find('{') {
        let Some(len) = rest[start..].find('}') else { break };
        out.push(rest[start + 1..start + len].to_string());
        rest = &rest[start + len + 1..];
    }
    out
}

fn fill(t: &str, slots: &Slots<'_>) -> Option<String> {
    let mut out = String::with_capacity(t.len());
    let mut rest = t;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let len = rest[start..].find('}')?;
        out.push_str(&slots.get(&rest[start + 1..start + len])?);
        rest = &rest[start + len + 1..];
    }
    out.push_str(rest);
    Some(out)
}

fn render(t: &str, slots: &Slots<'_>) -> String {
    let mut out = String::new();
    let mut rest = t;
    while let Some(open) = rest.find('[') {
        out.push_str(&fill(&rest[..open], slots).unwrap_or_default());
        let Some(close) = rest[open..].find(']') else { break };
        if let Some(opt) = fill(&rest[open + 1..open + close], slots) {
            out.push_str(&opt);
        }
        rest = &rest[open + close + 1..];
    }
    out.push_str(&fill(rest, slots).unwrap_or_default());
    out
}
