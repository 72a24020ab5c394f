use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::stats::majority_vote;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Aspect {
    Informativeness,
    Usefulness,
    Satisfaction,
}

impl Aspect {
    pub const ALL: [Aspect; 3] = [Aspect::Informativeness, Aspect::Usefulness, Aspect::Satisfaction];

    pub fn name(self) -> &'static str {
        match self {
            Aspect::Informativeness => "informativeness",
            Aspect::Usefulness => "usefulness",
            Aspect::Satisfaction => "satisfaction",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

/// A worker's answer about the anonymized groups A and B.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    A,
    B,
    Equal,
    None,
}

impl Label {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "A" | "a" => Some(Label::A),
            "B" | "b" => Some(Label::B),
            "equal" => Some(Label::Equal),
            "none" => Some(Label::None),
            _ => Option::None,
        }
    }
}

/// Preference between the first and second group of an ordered pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preference {
    First,
    Second,
    Equal,
    None,
}

impl Preference {
    pub fn mirrored(self) -> Self {
        match self {
            Preference::First => Preference::Second,
            Preference::Second => Preference::First,
            other => other,
        }
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Preference::First | Preference::Second)
    }

    pub fn name(self) -> &'static str {
        match self {
            Preference::First => "first",
            Preference::Second => "second",
            Preference::Equal => "equal",
            Preference::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupRole {
    Mie,
    Mae,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Annotation {
    pub case_id: String,
    pub aspect: Aspect,
    pub worker_id: String,
    pub label: Label,
}

fn csv_rows<'a>(text: &'a str, header_start: &str) -> impl Iterator<Item = (usize, Vec<String>)> + 'a {
    let header_start = header_start.to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .filter(move |(n, l)| !(*n == 0 && l.starts_with(&header_start)))
        .map(|(n, l)| (n + 1, l.split(',').map(|c| c.trim().to_string()).collect()))
}

/// Reads `case_id,aspect,worker_id,label` rows; a leading header is skipped.
pub fn parse_labels(text: &str, file: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (line, cols) in csv_rows(text, "case_id") {
        let err = |message: String| Error::Parse {
            file: file.into(),
            line,
            message,
        };
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        }
        out.push(Annotation {
            case_id: cols[0].clone(),
            aspect: Aspect::parse(&cols[1]).ok_or_else(|| err(format!("unknown aspect {:?}", cols[1])))?,
            worker_id: cols[2].clone(),
            label: Label::parse(&cols[3]).ok_or_else(|| err(format!("unknown label {:?}", cols[3])))?,
        });
    }
    Ok(out)
}

/// Which explanation kind was shown as group A, per case.
pub type Manifest = BTreeMap<String, GroupRole>;

/// Reads `case_id,A,B` rows with values `MIE` or `MAE`.
pub fn parse_manifest(text: &str, file: &str) -> Result<Manifest> {
    let mut out = Manifest::new();
    for (line, cols) in csv_rows(text, "case_id") {
        let role = |s: &str| match s.to_ascii_uppercase().as_str() {
            "MIE" => Some(GroupRole::Mie),
            "MAE" => Some(GroupRole::Mae),
            _ => Option::None,
        };
        let parsed = (cols.len() == 3)
            .then(|| (role(&cols[1]), role(&cols[2])))
            .and_then(|(a, b)| Some((a?, b?)));
        match parsed {
            Some((a, b)) if a != b => {
                out.insert(cols[0].clone(), a);
            }
            _ => {
                return Err(Error::Parse {
                    file: file.into(),
                    line,
                    message: "expected `case_id,A,B` with one MIE and one MAE".into(),
                })
            }
        }
    }
    Ok(out)
}

/// Majority label per (case, aspect), expressed as MIE-versus-MAE
/// preference. Cases absent from the manifest show MIE as group A.
pub fn aggregate_labels(annotations: &[Annotation], manifest: &Manifest) -> Result<BTreeMap<(String, Aspect), Preference>> {
    let mut grouped: BTreeMap<(String, Aspect), Vec<Label>> = BTreeMap::new();
    for a in annotations {
        grouped.entry((a.case_id.clone(), a.aspect)).or_default().push(a.label);
    }
    grouped
        .into_iter()
        .map(|(key, labels)| {
            let vote = majority_vote(&labels)
                .map_err(|e| Error::InvalidArgument(format!("case {} {}: {e}", key.0, key.1.name())))?;
            let a_first = match vote {
                Label::A => Preference::First,
                Label::B => Preference::Second,
                Label::Equal => Preference::Equal,
                Label::None => Preference::None,
            };
            let pref = match manifest.get(&key.0) {
                Some(GroupRole::Mae) => a_first.mirrored(),
                _ => a_first,
            };
            Ok((key, pref))
        })
        .collect()
}

/// Feature vectors of the two groups of one annotated case.
#[derive(Clone, Debug, PartialEq)]
pub struct Case {
    pub case_id: String,
    pub mie: Vec<f64>,
    pub mae: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreferencePair {
    pub case_id: String,
    pub aspect: Aspect,
    /// First group's features followed by the second's.
    pub features: Vec<f64>,
    pub label: Preference,
    /// MIE first when true.
    pub forward: bool,
}

/// Two mirrored pairs per case and aspect, MIE first then MAE first.
pub fn build_pair_dataset(cases: &[Case], labels: &BTreeMap<(String, Aspect), Preference>) -> Result<Vec<PreferencePair>> {
    let mut out = Vec::with_capacity(cases.len() * 6);
    for aspect in Aspect::ALL {
        for case in cases {
            let label = *labels
                .get(&(case.case_id.clone(), aspect))
                .ok_or_else(|| Error::MissingLabel {
                    case: case.case_id.clone(),
                    aspect: aspect.name().into(),
                })?;
            let fwd: Vec<f64> = case.mie.iter().chain(&case.mae).copied().collect();
            let bwd: Vec<f64> = case.mae.iter().chain(&case.mie).copied().collect();
            out.push(PreferencePair {
                case_id: case.case_id.clone(),
                aspect,
                features: fwd,
                label,
                forward: true,
            });
            out.push(PreferencePair {
                case_id: case.case_id.clone(),
                aspect,
                features: bwd,
                label: label.mirrored(),
                forward: false,
            });
        }
    }
    Ok(out)
}

/// Pairwise feature file: a header naming every column, then a forward
/// (MIE first) and a backward row per case.
pub fn write_feature_csv(cases: &[Case], layout: &[String]) -> String {
    let mut out = String::from("case_id,order");
    for side in ["first", "second"] {
        for name in layout {
            let _ = write!(out, ",{side}.{name}");
        }
    }
    out.push('\n');
    for c in cases {
        for (order, a, b) in [("forward", &c.mie, &c.mae), ("backward", &c.mae, &c.mie)] {
            out.push_str(&c.case_id);
            out.push(',');
            out.push_str(order);
            for v in a.iter().chain(b.iter()) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
    }
    out
}

/// Inverse of [`write_feature_csv`]; returns the per-group layout and the cases.
pub fn parse_feature_csv(text: &str, file: &str) -> Result<(Vec<String>, Vec<Case>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::EmptyFile(file.into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "case_id" || cols[1] != "order" || (cols.len() - 2) % 2 != 0 {
        return Err(Error::Schema {
            file: file.into(),
            line: 1,
            message: "header must be `case_id,order,` then paired first./second. columns".into(),
        });
    }
    let width = (cols.len() - 2) / 2;
    let layout: Vec<String> = cols[2..2 + width]
        .iter()
        .map(|c| c.strip_prefix("first.").unwrap_or(c).to_string())
        .collect();
    let mut cases = Vec::new();
    for (n, raw) in lines {
        let line = n + 1;
        let cells: Vec<&str> = raw.split(',').collect();
        let err = |message: String| Error::Parse {
            file: file.into(),
            line,
            message,
        };
        if cells.len() != cols.len() {
            return Err(err(format!("expected {} columns, found {}", cols.len(), cells.len())));
        }
        if cells[1] != "forward" {
            continue;
        }
        let values = cells[2..]
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| err(format!("bad number {c:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        cases.push(Case {
            case_id: cells[0].to_string(),
            mie: values[..width].to_vec(),
            mae: values[width..].to_vec(),
        });
    }
    Ok((layout, cases))
}
