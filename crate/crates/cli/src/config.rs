//! `key=value` run configuration and the value grammars shared with the
//! command-line flags.

use std::collections::BTreeMap;
use std::fmt;

use statpriv::divergence::grid_range;
use statpriv::{Pmf, Query, Technique};

/// A parse failure. `line` is set for config files, `column` is 1-based
/// within the offending value (or line).
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub source: String,
    pub line: Option<usize>,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}:{}: {}", self.source, l, self.column, self.message),
            None => write!(f, "{} (column {}): {}", self.source, self.column, self.message),
        }
    }
}

impl std::error::Error for ParseError {}

fn err(source: &str, column: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        source: source.to_string(),
        line: None,
        column,
        message: message.into(),
    }
}

/// Parsed config file: key → (value, line, column of the value).
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: BTreeMap<String, (String, usize, usize)>,
    path: String,
}

pub const KNOWN_KEYS: &[&str] = &[
    "entry",
    "n",
    "query",
    "technique",
    "eps",
    "out",
    "budget",
    "max-n",
    "p",
    "lambda",
    "rates",
    "sample",
    "mu",
    "nu",
];

impl ConfigFile {
    pub fn parse(path: &str, text: &str) -> Result<Self, ParseError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let at = |column: usize, message: String| ParseError {
                source: path.to_string(),
                line: Some(line),
                column,
                message,
            };
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let indent = content.len() - content.trim_start().len();
            let Some(eq) = content.find('=') else {
                return Err(at(indent + 1, "expected `key=value`".into()));
            };
            let key = content[..eq].trim();
            if key.is_empty() {
                return Err(at(indent + 1, "missing key before `=`".into()));
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(at(indent + 1, format!("unknown key `{key}`")));
            }
            let after = &content[eq + 1..];
            let value = after.trim();
            let col = eq + 2 + (after.len() - after.trim_start().len());
            if entries
                .insert(key.to_string(), (value.to_string(), line, col))
                .is_some()
            {
                return Err(at(indent + 1, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            entries,
            path: path.to_string(),
        })
    }

    /// Flag value if given, otherwise the file value, parsed by `f`. Errors
    /// from file values are re-anchored at the file's line and column.
    pub fn resolve<T>(
        &self,
        key: &str,
        flag: Option<&str>,
        f: impl Fn(&str, &str) -> Result<T, ParseError>,
    ) -> Result<Option<T>, ParseError> {
        if let Some(v) = flag {
            return f(&format!("--{key}"), v).map(Some);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line, col)) => f(key, v).map(Some).map_err(|e| ParseError {
                source: self.path.clone(),
                line: Some(*line),
                column: col + e.column - 1,
                message: e.message,
            }),
        }
    }
}

fn number(source: &str, s: &str, offset: usize) -> Result<f64, ParseError> {
    let t = s.trim();
    let lead = s.len() - s.trim_start().len();
    let parsed = if let Some(arg) = t.strip_prefix("ln") {
        let arg = arg.trim_start_matches('(').trim_end_matches(')');
        arg.parse::<f64>().ok().filter(|x| *x > 0.0).map(f64::ln)
    } else {
        t.parse::<f64>().ok()
    };
    match parsed {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(err(source, offset + lead + 1, format!("`{t}` is not a number"))),
    }
}

pub fn parse_f64(source: &str, s: &str) -> Result<f64, ParseError> {
    number(source, s, 0)
}

pub fn parse_usize(source: &str, s: &str) -> Result<usize, ParseError> {
    s.trim()
        .parse()
        .map_err(|_| err(source, 1, format!("`{}` is not a nonnegative integer", s.trim())))
}

pub fn parse_string(_: &str, s: &str) -> Result<String, ParseError> {
    Ok(s.to_string())
}

/// `start:end:step`, a comma list, or a single value; `lnX` is accepted
/// for any number.
pub fn parse_grid(source: &str, s: &str) -> Result<Vec<f64>, ParseError> {
    let fail = |m: String| err(source, 1, m);
    let grid = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(fail("range must be start:end:step".into()));
        }
        let mut offset = 0;
        let mut nums = Vec::new();
        for p in &parts {
            nums.push(number(source, p, offset)?);
            offset += p.len() + 1;
        }
        grid_range(nums[0], nums[1], nums[2]).map_err(|e| fail(e.to_string()))?
    } else {
        let mut offset = 0;
        let mut nums = Vec::new();
        for p in s.split(',') {
            nums.push(number(source, p, offset)?);
            offset += p.len() + 1;
        }
        nums
    };
    if grid.is_empty() {
        return Err(fail("grid is empty".into()));
    }
    if grid.iter().any(|e| *e < 0.0) {
        return Err(fail("epsilon values must be nonnegative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(fail("epsilon values must be strictly increasing".into()));
    }
    Ok(grid)
}

/// Comma list of rates in (0, 1].
pub fn parse_rates(source: &str, s: &str) -> Result<Vec<f64>, ParseError> {
    let mut offset = 0;
    let mut out = Vec::new();
    for p in s.split(',') {
        let x = number(source, p, offset)?;
        if !(x > 0.0 && x <= 1.0) {
            return Err(err(source, offset + 1, format!("rate {x} is not in (0, 1]")));
        }
        out.push(x);
        offset += p.len() + 1;
    }
    Ok(out)
}

/// `bern:p`, `point:v`, `uniform:k` (values 0..k−1) or `pmf:v=w;v=w;...`.
pub fn parse_entry(source: &str, s: &str) -> Result<Pmf, ParseError> {
    let Some((kind, args)) = s.split_once(':') else {
        return Err(err(source, 1, "expected bern:p, point:v, uniform:k or pmf:v=w;..."));
    };
    let at = kind.len() + 2;
    let bad = |e: statpriv::Error| err(source, at, e.to_string());
    match kind {
        "bern" => Pmf::bernoulli(number(source, args, at - 1)?).map_err(bad),
        "point" => Ok(Pmf::point(number(source, args, at - 1)?)),
        "uniform" => {
            let k: usize = args
                .trim()
                .parse()
                .ok()
                .filter(|k| *k > 0)
                .ok_or_else(|| err(source, at, "uniform needs a positive integer"))?;
            Pmf::uniform(&(0..k).map(|i| i as f64).collect::<Vec<_>>()).map_err(bad)
        }
        "pmf" => {
            let mut offset = at - 1;
            let mut pairs = Vec::new();
            for item in args.split(';') {
                let Some((v, w)) = item.split_once('=') else {
                    return Err(err(source, offset + 1, "expected value=weight"));
                };
                pairs.push((number(source, v, offset)?, number(source, w, offset + v.len() + 1)?));
                offset += item.len() + 1;
            }
            let total: f64 = pairs.iter().map(|p| p.1).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(err(source, at, format!("weights sum to {total}, not 1")));
            }
            Pmf::from_pairs(pairs).map_err(bad)
        }
        other => Err(err(source, 1, format!("unknown entry distribution `{other}`"))),
    }
}

pub fn parse_query(source: &str, s: &str) -> Result<Query, ParseError> {
    match s.trim() {
        "count" => Ok(Query::count()),
        "sum" => Ok(Query::sum()),
        "mean" => Ok(Query::mean()),
        other => Err(err(source, 1, format!("unknown query `{other}` (count, sum or mean)"))),
    }
}

/// Technique token, or `None` for `none`.
pub fn parse_technique(source: &str, s: &str) -> Result<Option<Technique>, ParseError> {
    if s.trim() == "none" {
        return Ok(None);
    }
    Technique::parse(s.trim())
        .map(Some)
        .map_err(|e| err(source, 1, e.to_string()))
}
