use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{make_cte, make_identity, make_pht, make_tabulated, WeightFunction};
use crate::error::{Error, Result};
use crate::Scalar;

/// Weight specification as it appears in config files, e.g.
/// `{"family":"pht","nu":0.75}` or `{"family":"tabulated","grid":[[0.2,0],[0.8,1]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum WeightSpec {
    Pht { nu: f64 },
    Cte { nu: f64 },
    Identity,
    Tabulated { grid: Vec<[f64; 2]> },
}

impl WeightSpec {
    pub fn build<T: Scalar>(&self) -> Result<WeightFunction<T>> {
        match self {
            WeightSpec::Pht { nu } => make_pht(T::lit(*nu)),
            WeightSpec::Cte { nu } => make_cte(T::lit(*nu)),
            WeightSpec::Identity => Ok(make_identity()),
            WeightSpec::Tabulated { grid } => {
                make_tabulated(grid.iter().map(|p| (T::lit(p[0]), T::lit(p[1]))).collect())
            }
        }
    }
}

/// Accepts the command-line shorthand `pht:0.75`, `cte:0.95`, `identity`,
/// `tabulated:0.2=0,0.5=3,0.8=0`, or an inline JSON object.
impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s)
                .map_err(|e| Error::InvalidParameter(format!("bad weight JSON: {e}")));
        }
        let (family, arg) = s.split_once(':').unwrap_or((s, ""));
        let parse_nu = |a: &str| {
            a.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad weight parameter '{a}'")))
        };
        match family.trim().to_ascii_lowercase().as_str() {
            "pht" => Ok(WeightSpec::Pht { nu: parse_nu(arg)? }),
            "cte" => Ok(WeightSpec::Cte { nu: parse_nu(arg)? }),
            "identity" => Ok(WeightSpec::Identity),
            "tabulated" => {
                let grid = arg
                    .split(',')
                    .map(|pt| {
                        let (t, w) = pt.split_once('=').ok_or_else(|| {
                            Error::InvalidParameter(format!("tabulated point '{pt}' is not t=w"))
                        })?;
                        Ok([parse_nu(t)?, parse_nu(w)?])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(WeightSpec::Tabulated { grid })
            }
            other => Err(Error::InvalidParameter(format!("unknown weight family '{other}'"))),
        }
    }
}
