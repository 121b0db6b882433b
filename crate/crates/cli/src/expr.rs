//! Coordinate expressions in config files.
//!
//! An expression is either a plain TOML number or a string such as
//! `"math::sin(pi * x1) * x2"`. Variables `x1`, `x2` (aliases `x`, `y`) hold
//! the node coordinates and `pi`, `e` the usual constants. Integer literals are
//! read as floats, so `1/2` means one half.

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node,
    Value,
};
use regvi_core::ScalarFn;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Expr {
    Number(f64),
    Text(String),
}

impl Default for Expr {
    fn default() -> Self {
        Expr::Number(0.0)
    }
}

impl From<f64> for Expr {
    fn from(v: f64) -> Self {
        Expr::Number(v)
    }
}

/// Rewrites standalone integer literals as float literals.
fn floatify(src: &str) -> String {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 8);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let starts_number = c.is_ascii_digit()
            && !prev.is_some_and(|p| p.is_alphanumeric() || p == '_' || p == '.' || p == ':');
        if !starts_number {
            out.push(c);
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
        out.extend(&chars[i..j]);
        let next = chars.get(j).copied();
        if !next.is_some_and(|n| n == '.' || n == 'e' || n == 'E' || n.is_alphanumeric() || n == '_') {
            out.push_str(".0");
        }
        i = j;
    }
    out
}

fn context(x: [f64; 2]) -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (name, v) in [
        ("x1", x[0]),
        ("x2", x[1]),
        ("x", x[0]),
        ("y", x[1]),
        ("pi", std::f64::consts::PI),
        ("e", std::f64::consts::E),
    ] {
        ctx.set_value(name.into(), Value::Float(v)).expect("fresh context accepts values");
    }
    ctx
}

fn parse(key: &str, src: &str) -> Result<Node<DefaultNumericTypes>, ConfigError> {
    build_operator_tree::<DefaultNumericTypes>(&floatify(src))
        .map_err(|e| ConfigError::new(key, format!("cannot parse `{src}`: {e}")))
}

impl Expr {
    /// Compiles the expression; `key` names it in error messages.
    pub fn compile(&self, key: &str) -> Result<ScalarFn, ConfigError> {
        let src = match self {
            Expr::Number(v) => return Ok(ScalarFn::constant(*v)),
            Expr::Text(s) => s,
        };
        let node = parse(key, src)?;
        node.eval_number_with_context(&context([0.0, 0.0]))
            .map_err(|e| ConfigError::new(key, format!("cannot evaluate `{src}`: {e}")))?;
        Ok(ScalarFn::new(move |x| {
            node.eval_number_with_context(&context(x)).unwrap_or(f64::NAN)
        }))
    }
}

/// Compiles a boolean node predicate such as `"x1 < 0.5"`.
pub fn compile_predicate(key: &str, src: &str) -> Result<impl Fn([f64; 2]) -> bool, ConfigError> {
    let node = parse(key, src)?;
    node.eval_boolean_with_context(&context([0.0, 0.0]))
        .map_err(|e| ConfigError::new(key, format!("`{src}` is not a condition: {e}")))?;
    Ok(move |x| node.eval_boolean_with_context(&context(x)).unwrap_or(false))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integers_become_floats() {
        assert_eq!(floatify("1/2 + x1*3"), "1.0/2.0 + x1*3.0");
        assert_eq!(floatify("2.5e3 + math::sin(2)"), "2.5e3 + math::sin(2.0)");
    }

    #[test]
    fn evaluates_coordinates() {
        let f = Expr::Text("1/2 * x1 + math::sin(pi * y)".into()).compile("f").unwrap();
        assert!((f.eval([3.0, 0.5]) - 2.5).abs() < 1e-15);
        assert_eq!(Expr::Number(4.0).compile("f").unwrap().eval([1.0, 1.0]), 4.0);
    }

    #[test]
    fn errors_name_the_key() {
        let err = Expr::Text("x1 +".into()).compile("coefficients.f").unwrap_err();
        assert!(err.to_string().contains("coefficients.f"));
        let err = Expr::Text("z * 2".into()).compile("obstacle.lower").unwrap_err();
        assert!(err.to_string().contains("obstacle.lower"));
    }

    #[test]
    fn predicates() {
        let p = compile_predicate("observe", "x1 < 0.5 && x2 >= 0").unwrap();
        assert!(p([0.2, 0.1]));
        assert!(!p([0.7, 0.1]));
        assert!(compile_predicate("observe", "x1 + 1").is_err());
    }
}
