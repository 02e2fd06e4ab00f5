use std::fmt;
use std::str::FromStr;

use crate::algebra::{cyclic_group, dihedral_group, direct_product, find_nonassociative_quasigroup, random_latin_square, CayleyTable};
use crate::error::{Error, Result};

/// A named, reproducible table family member.
///
/// Text form: `cyclic:N`, `dihedral:M`, `product:N1xN2[x...]` (cyclic
/// factors), `random-latin:N:SEED`, `nonassoc:N:SEED`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TableSpec {
    Cyclic(usize),
    Dihedral(usize),
    Product(Vec<usize>),
    RandomLatin { n: usize, seed: u64 },
    Nonassoc { n: usize, seed: u64 },
}

impl TableSpec {
    pub fn build(&self) -> Result<CayleyTable> {
        match self {
            TableSpec::Cyclic(n) => cyclic_group(*n),
            TableSpec::Dihedral(m) => dihedral_group(*m),
            TableSpec::Product(factors) => {
                let (first, rest) = factors
                    .split_first()
                    .ok_or_else(|| Error::InvalidInput("product needs at least one factor".into()))?;
                rest.iter().try_fold(cyclic_group(*first)?, |acc, &k| direct_product(&acc, &cyclic_group(k)?))
            }
            TableSpec::RandomLatin { n, seed } => random_latin_square(*n, *seed),
            TableSpec::Nonassoc { n, seed } => find_nonassociative_quasigroup(*n, *seed),
        }
    }

    /// Identifier used in result files, e.g. `cyclic-6`.
    pub fn id(&self) -> String {
        match self {
            TableSpec::Cyclic(n) => format!("cyclic-{n}"),
            TableSpec::Dihedral(m) => format!("dihedral-{m}"),
            TableSpec::Product(f) => {
                format!("product-{}", f.iter().map(usize::to_string).collect::<Vec<_>>().join("x"))
            }
            TableSpec::RandomLatin { n, seed } => format!("random-latin-{n}-s{seed}"),
            TableSpec::Nonassoc { n, seed } => format!("nonassoc-{n}-s{seed}"),
        }
    }
}

impl fmt::Display for TableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableSpec::Cyclic(n) => write!(f, "cyclic:{n}"),
            TableSpec::Dihedral(m) => write!(f, "dihedral:{m}"),
            TableSpec::Product(fs) => {
                write!(f, "product:{}", fs.iter().map(usize::to_string).collect::<Vec<_>>().join("x"))
            }
            TableSpec::RandomLatin { n, seed } => write!(f, "random-latin:{n}:{seed}"),
            TableSpec::Nonassoc { n, seed } => write!(f, "nonassoc:{n}:{seed}"),
        }
    }
}

impl FromStr for TableSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|_| Error::Parse(format!("bad number {x:?} in {s:?}")));
        let seed = |x: &str| x.parse::<u64>().map_err(|_| Error::Parse(format!("bad seed {x:?} in {s:?}")));
        match parts.as_slice() {
            ["cyclic", n] => Ok(TableSpec::Cyclic(num(n)?)),
            ["dihedral", m] => Ok(TableSpec::Dihedral(num(m)?)),
            ["product", fs] => Ok(TableSpec::Product(fs.split('x').map(num).collect::<Result<_>>()?)),
            ["random-latin", n, sd] => Ok(TableSpec::RandomLatin { n: num(n)?, seed: seed(sd)? }),
            ["nonassoc", n, sd] => Ok(TableSpec::Nonassoc { n: num(n)?, seed: seed(sd)? }),
            _ => Err(Error::Parse(format!("unrecognized table spec {s:?}"))),
        }
    }
}
