//! Turning command-line arguments into methods, cores and problems.

use std::fmt;
use std::path::Path;

use glmlab::catalog::{self, bdf2_core, ie_core, mp_core, rk22_core};
use glmlab::{CatalogEntry, CoreMethod, GlmTableau, OdeProblem};

/// Input that could not be turned into something runnable. Maps to exit 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<E: std::error::Error> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

/// A method named on the command line.
pub enum Resolved {
    Catalog(Box<CatalogEntry>),
    File(GlmTableau),
}

impl Resolved {
    pub fn tableau(&self) -> &GlmTableau {
        match self {
            Resolved::Catalog(e) => &e.tableau,
            Resolved::File(t) => t,
        }
    }
}

pub fn read_file(path: &str) -> Result<String, UsageError> {
    std::fs::read_to_string(path).map_err(|e| UsageError(format!("{path}: {e}")))
}

/// Parses a method file; serde errors already carry line and column.
pub fn tableau_file(path: &str) -> Result<GlmTableau, UsageError> {
    let text = read_file(path)?;
    GlmTableau::from_json(&text).map_err(|e| UsageError(format!("{path}: {e}")))
}

/// Catalog name (including `IE-Filt(<d>)`) or path to a method file.
/// Catalog names win over files of the same name.
pub fn method(arg: &str) -> Result<Resolved, UsageError> {
    match catalog::get(arg) {
        Ok(e) => Ok(Resolved::Catalog(Box::new(e))),
        Err(_) if arg.ends_with(".json") || Path::new(arg).exists() => tableau_file(arg).map(Resolved::File),
        Err(e) => Err(e.into()),
    }
}

fn core_by_name(name: &str) -> Option<CoreMethod> {
    match name {
        "IE" => Some(ie_core()),
        "MP" => Some(mp_core()),
        "BDF2" => Some(bdf2_core()),
        "RK22" => Some(rk22_core()),
        _ => None,
    }
}

/// Core solver by name, from any catalog entry already in core form, or
/// from a method file.
pub fn core(arg: &str) -> Result<CoreMethod, UsageError> {
    if let Some(c) = core_by_name(arg) {
        return Ok(c);
    }
    let tableau = match method(arg)? {
        Resolved::Catalog(e) => e.tableau,
        Resolved::File(t) => t,
    };
    Ok(CoreMethod::new(tableau)?)
}

/// Core given inline in an optimizer problem: a name or a method object.
pub fn core_value(v: &serde_json::Value) -> Result<CoreMethod, UsageError> {
    match v {
        serde_json::Value::String(name) => core(name),
        other => {
            let t = GlmTableau::from_json(&other.to_string()).map_err(|e| UsageError(format!("core: {e}")))?;
            Ok(CoreMethod::new(t)?)
        }
    }
}

pub fn problem(spec: &str) -> Result<OdeProblem, UsageError> {
    Ok(glmlab::problems::by_name(spec)?)
}

/// `re_min:re_max:im_min:im_max`.
pub fn window(spec: &str) -> Result<glmlab::stability::Window, UsageError> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError(format!("window '{spec}': expected four numbers re_min:re_max:im_min:im_max")))?;
    let [re_min, re_max, im_min, im_max] = parts[..] else {
        return Err(UsageError(format!("window '{spec}': expected four numbers, found {}", parts.len())));
    };
    if !(re_min < re_max && im_min < im_max) {
        return Err(UsageError(format!("window '{spec}' is empty")));
    }
    Ok(glmlab::stability::Window {
        re_min,
        re_max,
        im_min,
        im_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_parses_negative_bounds() {
        let w = window("-6:2:-4:4").unwrap();
        assert_eq!((w.re_min, w.re_max, w.im_min, w.im_max), (-6.0, 2.0, -4.0, 4.0));
    }

    #[test]
    fn window_rejects_bad_input() {
        assert!(window("1:2:3").is_err());
        assert!(window("2:1:0:1").is_err());
        assert!(window("a:1:0:1").is_err());
    }

    #[test]
    fn cores_resolve() {
        assert_eq!(core("BDF2").unwrap().k(), 2);
        assert!(core("nope").is_err());
        assert!(matches!(method("IE-Filt(0.5)"), Ok(Resolved::Catalog(_))));
    }
}
