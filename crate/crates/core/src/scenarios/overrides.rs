//! Dotted-path overrides such as `material.heat_loss=2e-4` or
//! `lights[0].intensity_mw_cm2=240`.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

enum Step<'a> {
    Key(&'a str),
    Index(usize),
}

fn parse_path(path: &str) -> Result<Vec<Step<'_>>> {
    let bad = || Error::InvalidOverride(path.to_string());
    let mut steps = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(bad());
        }
        steps.push(Step::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            let idx = rest[1..close].parse().map_err(|_| bad())?;
            steps.push(Step::Index(idx));
            rest = &rest[close + 1..];
        }
    }
    Ok(steps)
}

fn slot<'v>(root: &'v mut Value, path: &str) -> Result<&'v mut Value> {
    let bad = || Error::InvalidOverride(path.to_string());
    let mut cur = root;
    for step in parse_path(path)? {
        cur = match step {
            Step::Key(k) => cur.as_object_mut().and_then(|o| o.get_mut(k)).ok_or_else(bad)?,
            Step::Index(i) => cur.as_array_mut().and_then(|a| a.get_mut(i)).ok_or_else(bad)?,
        };
    }
    Ok(cur)
}

/// Parses the right-hand side of an override as JSON, falling back to a string.
pub fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Splits `path=value`.
pub fn split_assignment(text: &str) -> Result<(String, Value)> {
    let (path, value) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidOverride(text.to_string()))?;
    Ok((path.trim().to_string(), parse_value(value.trim())))
}

/// Reads the number at `path`.
pub fn get_number<T: Serialize>(target: &T, path: &str) -> Result<f64> {
    let mut v = serde_json::to_value(target)?;
    slot(&mut v, path)?
        .as_f64()
        .ok_or_else(|| Error::InvalidOverride(path.to_string()))
}

/// Returns a copy of `target` with every override applied. The path must
/// already exist (optional fields set to null count as existing), and the
/// result must deserialize; the input is never modified.
pub fn apply_overrides<T: Serialize + DeserializeOwned>(target: &T, overrides: &[(String, Value)]) -> Result<T> {
    let mut v = serde_json::to_value(target)?;
    for (path, value) in overrides {
        *slot(&mut v, path)? = value.clone();
    }
    serde_json::from_value(v).map_err(|e| Error::InvalidOverride(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Inner {
        a: f64,
    }

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Outer {
        inner: Inner,
        list: Vec<Inner>,
    }

    fn sample() -> Outer {
        Outer {
            inner: Inner { a: 1.0 },
            list: vec![Inner { a: 2.0 }, Inner { a: 3.0 }],
        }
    }

    #[test]
    fn nested_and_indexed_paths() {
        let o = apply_overrides(
            &sample(),
            &[
                ("inner.a".into(), parse_value("5")),
                ("list[1].a".into(), parse_value("7.5")),
            ],
        )
        .unwrap();
        assert_eq!(o.inner.a, 5.0);
        assert_eq!(o.list[1].a, 7.5);
        assert_eq!(get_number(&o, "list[1].a").unwrap(), 7.5);
    }

    #[test]
    fn unknown_paths_and_bad_types_fail() {
        let s = sample();
        for bad in ["inner.b", "list[5].a", "list[x].a", "inner..a", "list[0"] {
            assert!(matches!(
                apply_overrides(&s, &[(bad.into(), parse_value("1"))]),
                Err(Error::InvalidOverride(_))
            ));
        }
        assert!(apply_overrides(&s, &[("inner.a".into(), parse_value("\"x\""))]).is_err());
    }
}
