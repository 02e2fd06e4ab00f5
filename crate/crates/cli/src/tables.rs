use std::fs;
use std::path::PathBuf;

use cayley_core::algebra::CayleyTable;
use cayley_core::engine::TableSpec;

use crate::CliError;

/// A table named by a family spec or read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum TableSource {
    Spec(TableSpec),
    File(PathBuf),
}

impl TableSource {
    pub fn build(&self) -> Result<CayleyTable, CliError> {
        match self {
            TableSource::Spec(s) => Ok(s.build()?),
            TableSource::File(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                let t = if text.trim_start().starts_with('{') {
                    CayleyTable::from_json(&text)
                } else {
                    CayleyTable::from_text(&text)
                };
                t.map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn id(&self) -> String {
        match self {
            TableSource::Spec(s) => s.id(),
            TableSource::File(p) => {
                format!("file-{}", p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            }
        }
    }
}

impl std::fmt::Display for TableSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TableSource::Spec(s) => write!(f, "{s}"),
            TableSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl std::str::FromStr for TableSource {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.strip_prefix("file:") {
            Some(path) => Ok(TableSource::File(PathBuf::from(path))),
            None => s.parse().map(TableSource::Spec).map_err(|e: cayley_core::Error| CliError::Usage(e.to_string())),
        }
    }
}

/// `6`, `6,8,10` or `3..16` (inclusive).
fn sizes(params: &str) -> Result<Vec<String>, CliError> {
    let bad = || CliError::Usage(format!("bad size list {params:?}"));
    if let Some((lo, hi)) = params.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        return Ok((lo..=hi).map(|n| n.to_string()).collect());
    }
    let v: Vec<String> = params.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect();
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

/// Turns positional `FAMILY PARAMS` into the comma-separated `table` value.
pub fn positional_to_value(family: &str, params: Option<&str>, seed: u64) -> Result<String, CliError> {
    let need = || CliError::Usage(format!("{family} needs parameters"));
    let items: Vec<String> = match family {
        "file" => vec![format!("file:{}", params.ok_or_else(need)?)],
        "product" => params.ok_or_else(need)?.split(',').map(|p| format!("product:{}", p.trim())).collect(),
        "cyclic" | "dihedral" => sizes(params.ok_or_else(need)?)?.into_iter().map(|n| format!("{family}:{n}")).collect(),
        "random-latin" | "nonassoc" => {
            sizes(params.ok_or_else(need)?)?.into_iter().map(|n| format!("{family}:{n}:{seed}")).collect()
        }
        other => return Err(CliError::Usage(format!("unknown table family {other:?}"))),
    };
    Ok(items.join(","))
}

pub fn parse_sources(value: &str) -> Result<Vec<TableSource>, CliError> {
    let v: Vec<TableSource> =
        value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err(CliError::Usage("no table given".into()));
    }
    Ok(v)
}
