//! Problem files: one `key = value` per line, `#` starts a comment.
//!
//! ```text
//! kind      = linear | hjb | monge-ampere
//! domain    = disk | square            (default disk)
//! a11, a12, a22, b1, b2, c, f = <expr> (a12, b1, b2, c default to 0)
//! alpha_min, alpha_max = <expr>        (hjb only, required)
//! lambda, epsilon = <expr>             (optional Cordes parameters)
//! ```
//!
//! Monge-Ampere files give only `f`. Expressions follow [`super::expr`].

use std::collections::BTreeMap;
use std::path::Path;

use super::expr::{Expr, Var};
use super::{ProblemDomain, ProblemKind, ProblemSpec};
use crate::assembly::PointCoefficients;
use crate::cordes::{CoefficientSet, CordesPolicy};
use crate::error::{Error, Result};

const EXPR_KEYS: [&str; 7] = ["a11", "a12", "a22", "b1", "b2", "c", "f"];
const CONST_KEYS: [&str; 4] = ["alpha_min", "alpha_max", "lambda", "epsilon"];

struct Entry {
    line: usize,
    value: String,
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("problem");
    parse_problem(name, &text)
}

pub fn parse_problem(name: &str, text: &str) -> Result<ProblemSpec> {
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(parse_error(line, format!("expected `key = value`, found `{content}`")));
        };
        let key = key.trim().to_string();
        let known = key == "kind" || key == "domain" || EXPR_KEYS.contains(&key.as_str()) || CONST_KEYS.contains(&key.as_str());
        if !known {
            return Err(parse_error(line, format!("unknown key `{key}`")));
        }
        if let Some(prev) = entries.get(&key) {
            return Err(parse_error(line, format!("duplicate key `{key}` (first on line {})", prev.line)));
        }
        entries.insert(key, Entry { line, value: value.trim().to_string() });
    }

    let kind = match entries.get("kind") {
        None => return Err(parse_error(0, "missing key `kind`")),
        Some(e) => match e.value.as_str() {
            "linear" => ProblemKind::Linear,
            "hjb" => ProblemKind::Hjb,
            "monge-ampere" | "ma" => ProblemKind::MongeAmpere,
            other => return Err(parse_error(e.line, format!("unknown kind `{other}`"))),
        },
    };
    let domain = match entries.get("domain") {
        None => ProblemDomain::UnitDisk,
        Some(e) => match e.value.as_str() {
            "disk" => ProblemDomain::UnitDisk,
            "square" => ProblemDomain::UnitSquare,
            other => return Err(parse_error(e.line, format!("unknown domain `{other}`"))),
        },
    };

    let expr = |key: &str| -> Result<Option<(usize, Expr)>> {
        match entries.get(key) {
            None => Ok(None),
            Some(e) => Expr::parse(&e.value)
                .map(|x| Some((e.line, x)))
                .map_err(|err| parse_error(e.line, format!("`{key}`: {err}"))),
        }
    };
    let constant = |key: &str| -> Result<Option<f64>> {
        match expr(key)? {
            None => Ok(None),
            Some((line, e)) => match e.constant() {
                Some(v) if v.is_finite() => Ok(Some(v)),
                _ => Err(parse_error(line, format!("`{key}` must be a finite constant"))),
            },
        }
    };
    let required = |key: &str| -> Result<(usize, Expr)> {
        expr(key)?.ok_or_else(|| parse_error(0, format!("missing key `{key}`")))
    };

    let mut spec = ProblemSpec {
        name: name.to_string(),
        kind,
        domain,
        coefficients: None,
        source: None,
        exact: None,
        cordes_policy: CordesPolicy::Enforce,
    };

    if kind == ProblemKind::MongeAmpere {
        for key in EXPR_KEYS.iter().filter(|k| **k != "f").chain(&CONST_KEYS) {
            if let Some(e) = entries.get(*key) {
                return Err(parse_error(e.line, format!("`{key}` is not used by Monge-Ampere problems")));
            }
        }
        let (line, f) = required("f")?;
        if f.uses(Var::Alpha) {
            return Err(parse_error(line, "`f` may not depend on alpha"));
        }
        spec.source = Some(std::sync::Arc::new(move |x| f.eval(x, 0.0)));
        return Ok(spec);
    }

    let zero = || Expr::Num(0.0);
    let a11 = required("a11")?.1;
    let a22 = required("a22")?.1;
    let f = required("f")?.1;
    let a12 = expr("a12")?.map_or_else(zero, |e| e.1);
    let b1 = expr("b1")?.map_or_else(zero, |e| e.1);
    let b2 = expr("b2")?.map_or_else(zero, |e| e.1);
    let c = expr("c")?.map_or_else(zero, |e| e.1);

    let controls = match (constant("alpha_min")?, constant("alpha_max")?) {
        (Some(lo), Some(hi)) if lo <= hi => Some((lo, hi)),
        (Some(_), Some(_)) => return Err(parse_error(entries["alpha_max"].line, "alpha_max is below alpha_min")),
        (None, None) => None,
        _ => return Err(parse_error(0, "alpha_min and alpha_max must be given together")),
    };
    match (kind, controls) {
        (ProblemKind::Hjb, None) => return Err(parse_error(0, "hjb problems need alpha_min and alpha_max")),
        (ProblemKind::Linear, Some(_)) => {
            return Err(parse_error(entries["alpha_min"].line, "linear problems take no control interval"))
        }
        _ => {}
    }
    if kind == ProblemKind::Linear {
        for key in EXPR_KEYS {
            if let Some((line, e)) = expr(key)? {
                if e.uses(Var::Alpha) {
                    return Err(parse_error(line, format!("`{key}` uses alpha in a linear problem")));
                }
            }
        }
    }

    let model = move |x: [f64; 2], alpha: f64| {
        let off = a12.eval(x, alpha);
        PointCoefficients {
            a: [[a11.eval(x, alpha), off], [off, a22.eval(x, alpha)]],
            b: [b1.eval(x, alpha), b2.eval(x, alpha)],
            c: c.eval(x, alpha),
            f: f.eval(x, alpha),
        }
    };
    let mut set = CoefficientSet::new(model);
    if let Some((lo, hi)) = controls {
        set = set.with_controls(lo, hi);
    }
    if let Some(l) = constant("lambda")? {
        if !(l > 0.0) {
            return Err(parse_error(entries["lambda"].line, "lambda must be positive"));
        }
        set = set.with_lambda(l);
    }
    if let Some(e) = constant("epsilon")? {
        set = set.with_epsilon(e);
    }
    spec.coefficients = Some(set);
    Ok(spec)
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}
