//! JSON encodings of algebras, elements, bimodules and generators.
//!
//! Complex numbers are `[re, im]` pairs; a bare number is accepted as a real
//! entry. Matrices are arrays of rows. An algebra element is an array with
//! one matrix per block.
//!
//! Parsers enforce size limits so hostile input cannot request huge
//! allocations.

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::algebra::{AlgElement, AlgebraSpec, CStarAlgebra};
use crate::bimodule::{BimoduleTensors, StarBimodule};
use crate::error::{Result, StarError};
use crate::linalg::{c, CMat, RMat};
use crate::DEFAULT_TOL;

pub const BIMODULE_VERSION: &str = "starmod-bimodule/1";

/// Largest accepted block size.
pub const MAX_BLOCK: usize = 8;
/// Largest accepted number of blocks.
pub const MAX_BLOCKS: usize = 16;
/// Largest accepted module dimension.
pub const MAX_MODULE_DIM: usize = 96;
/// Largest accepted generic matrix side.
pub const MAX_MATRIX: usize = 128;

pub(crate) fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(StarError::ConfigParse(msg.into()))
}

pub(crate) fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    match v.get(name) {
        Some(x) => Ok(x),
        None => err(format!("missing field `{name}`")),
    }
}

pub(crate) fn as_array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| StarError::ConfigParse(format!("{what} must be an array")))
}

pub(crate) fn as_f64(v: &Value, what: &str) -> Result<f64> {
    match v.as_f64() {
        Some(x) if x.is_finite() => Ok(x),
        _ => err(format!("{what} must be a finite number")),
    }
}

pub(crate) fn as_usize(v: &Value, what: &str, max: usize) -> Result<usize> {
    match v.as_u64() {
        Some(x) if x as usize <= max => Ok(x as usize),
        Some(_) => err(format!("{what} exceeds the limit {max}")),
        None => err(format!("{what} must be a nonnegative integer")),
    }
}

pub(crate) fn usize_list(v: &Value, what: &str, max_len: usize, max: usize) -> Result<Vec<usize>> {
    let a = as_array(v, what)?;
    if a.len() > max_len {
        return err(format!("{what} has more than {max_len} entries"));
    }
    a.iter().map(|x| as_usize(x, what, max)).collect()
}

pub fn parse_complex(v: &Value) -> Result<Complex64> {
    if let Some(x) = v.as_f64() {
        return if x.is_finite() { Ok(c(x, 0.0)) } else { err("non-finite number") };
    }
    match v.as_array().map(|a| a.as_slice()) {
        Some([re, im]) => Ok(c(as_f64(re, "real part")?, as_f64(im, "imaginary part")?)),
        _ => err("complex entry must be a number or [re, im]"),
    }
}

pub fn complex_to_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

/// Complex matrix from an array of rows; `shape` is checked when given.
pub fn parse_cmat(v: &Value, shape: Option<(usize, usize)>) -> Result<CMat> {
    let rows = as_array(v, "matrix")?;
    if rows.len() > MAX_MATRIX {
        return err("matrix too large");
    }
    let ncols = match rows.first() {
        Some(r) => as_array(r, "matrix row")?.len(),
        None => shape.map(|s| s.1).unwrap_or(0),
    };
    if ncols > MAX_MATRIX {
        return err("matrix too large");
    }
    let mut m = CMat::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        let r = as_array(r, "matrix row")?;
        if r.len() != ncols {
            return err("ragged matrix rows");
        }
        for (j, z) in r.iter().enumerate() {
            m[(i, j)] = parse_complex(z)?;
        }
    }
    if let Some(s) = shape {
        if m.shape() != s {
            return err(format!("expected a {}×{} matrix, found {}×{}", s.0, s.1, m.nrows(), m.ncols()));
        }
    }
    Ok(m)
}

pub fn cmat_to_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| complex_to_json(m[(i, j)])).collect()))
            .collect(),
    )
}

/// Real matrix from an array of rows of numbers.
pub fn parse_rmat(v: &Value) -> Result<RMat> {
    let rows = as_array(v, "matrix")?;
    if rows.len() > MAX_MATRIX {
        return err("matrix too large");
    }
    let ncols = match rows.first() {
        Some(r) => as_array(r, "matrix row")?.len(),
        None => 0,
    };
    let mut m = RMat::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        let r = as_array(r, "matrix row")?;
        if r.len() != ncols {
            return err("ragged matrix rows");
        }
        for (j, x) in r.iter().enumerate() {
            m[(i, j)] = as_f64(x, "matrix entry")?;
        }
    }
    Ok(m)
}

pub fn rmat_to_json(m: &RMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| json!(m[(i, j)])).collect())).collect())
}

/// `{"blocks": [n_1, …], "trace_weights": [c_1, …]}`; weights default to 1.
pub fn parse_algebra(v: &Value) -> Result<CStarAlgebra> {
    let blocks = usize_list(field(v, "blocks")?, "blocks", MAX_BLOCKS, MAX_BLOCK)?;
    let weights = match v.get("trace_weights") {
        Some(w) => as_array(w, "trace_weights")?
            .iter()
            .map(|x| as_f64(x, "trace weight"))
            .collect::<Result<Vec<f64>>>()?,
        None => vec![1.0; blocks.len()],
    };
    if blocks.is_empty() {
        return err("algebra needs at least one block");
    }
    if weights.len() != blocks.len() {
        return err("trace_weights must have one entry per block");
    }
    CStarAlgebra::from_spec(&AlgebraSpec { blocks, trace_weights: weights })
}

pub fn algebra_to_json(a: &CStarAlgebra) -> Value {
    json!({"blocks": a.block_dims(), "trace_weights": a.trace_weights()})
}

pub fn parse_element(algebra: &CStarAlgebra, v: &Value) -> Result<AlgElement> {
    let blocks = as_array(v, "element")?;
    if blocks.len() != algebra.num_blocks() {
        return err(format!("element has {} blocks, algebra has {}", blocks.len(), algebra.num_blocks()));
    }
    let mats = blocks
        .iter()
        .zip(algebra.block_dims())
        .map(|(b, &n)| parse_cmat(b, Some((n, n))))
        .collect::<Result<Vec<_>>>()?;
    algebra.element(mats)
}

pub fn element_to_json(a: &AlgElement) -> Value {
    Value::Array(a.blocks().iter().map(cmat_to_json).collect())
}

fn parse_tensor(v: &Value, count: usize, dim: usize, what: &str) -> Result<Vec<CMat>> {
    let a = as_array(v, what)?;
    if a.len() != count {
        return err(format!("{what} must have {count} entries"));
    }
    a.iter().map(|m| parse_cmat(m, Some((dim, dim)))).collect()
}

/// The pairing is stored as a `d×d` array of algebra elements.
fn parse_pairing(algebra: &CStarAlgebra, v: &Value, dim: usize) -> Result<Vec<CMat>> {
    let rows = as_array(v, "pairing")?;
    if rows.len() != dim {
        return err("pairing must have dim rows");
    }
    let mut out = vec![CMat::zeros(dim, dim); algebra.dim()];
    for (i, r) in rows.iter().enumerate() {
        let r = as_array(r, "pairing row")?;
        if r.len() != dim {
            return err("pairing rows must have dim entries");
        }
        for (j, e) in r.iter().enumerate() {
            let coords = algebra.to_coords(&parse_element(algebra, e)?);
            for (g, z) in coords.iter().enumerate() {
                out[g][(i, j)] = *z;
            }
        }
    }
    Ok(out)
}

fn pairing_to_json(m: &StarBimodule) -> Value {
    let alg = m.algebra();
    let d = m.dim();
    Value::Array(
        (0..d)
            .map(|i| {
                Value::Array(
                    (0..d)
                        .map(|j| {
                            let coords = crate::linalg::CVec::from_iterator(
                                alg.dim(),
                                m.pairing_tensor().iter().map(|p| p[(i, j)]),
                            );
                            element_to_json(&alg.from_coords(&coords))
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}

/// Parses tensors without running the axiom suite.
pub fn parse_bimodule_unchecked(v: &Value) -> Result<StarBimodule> {
    match v.get("version").and_then(Value::as_str) {
        Some(BIMODULE_VERSION) => {}
        Some(other) => return err(format!("unsupported bimodule version `{other}`")),
        None => return err("missing bimodule version"),
    }
    let algebra = parse_algebra(field(v, "algebra")?)?;
    let dim = as_usize(field(v, "dim")?, "dim", MAX_MODULE_DIM)?;
    if algebra.dim() * dim * dim > 64 * MAX_MODULE_DIM * MAX_MODULE_DIM {
        return err("bimodule too large");
    }
    let t = field(v, "tensors")?;
    let da = algebra.dim();
    let tensors = BimoduleTensors {
        left: parse_tensor(field(t, "left_action")?, da, dim, "left_action")?,
        right: parse_tensor(field(t, "right_action")?, da, dim, "right_action")?,
        pairing: parse_pairing(&algebra, field(t, "pairing")?, dim)?,
        involution: parse_cmat(field(t, "involution")?, Some((dim, dim)))?,
    };
    let tol = match v.get("tol") {
        Some(x) => as_f64(x, "tol")?,
        None => DEFAULT_TOL,
    };
    StarBimodule::assemble(&algebra, dim, tensors, tol)
}

/// Parses and validates a `starmod-bimodule/1` document.
pub fn parse_bimodule(v: &Value) -> Result<StarBimodule> {
    let m = parse_bimodule_unchecked(v)?;
    if let Some((axiom, residual)) = m.check_axioms().first_violation() {
        return Err(StarError::AxiomViolation { axiom, residual });
    }
    Ok(m)
}

pub fn parse_bimodule_str(s: &str) -> Result<StarBimodule> {
    let v: Value = serde_json::from_str(s).map_err(|e| StarError::ConfigParse(e.to_string()))?;
    parse_bimodule(&v)
}

pub fn bimodule_to_json(m: &StarBimodule) -> Value {
    json!({
        "version": BIMODULE_VERSION,
        "algebra": algebra_to_json(m.algebra()),
        "dim": m.dim(),
        "tensors": {
            "left_action": m.left_tensor().iter().map(cmat_to_json).collect::<Vec<_>>(),
            "right_action": m.right_tensor().iter().map(cmat_to_json).collect::<Vec<_>>(),
            "pairing": pairing_to_json(m),
            "involution": cmat_to_json(m.involution_matrix()),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{hyperbolic_pair, multiplication_module};

    #[test]
    fn element_round_trip() {
        let alg = CStarAlgebra::new(&[2, 1], &[1.0, 0.5]).unwrap();
        let a = alg.unit(1).scale(c(0.5, -2.0));
        let back = parse_element(&alg, &element_to_json(&a)).unwrap();
        assert_eq!(a, back);
        assert!(parse_element(&alg, &json!([[[1]]])).is_err());
    }

    #[test]
    fn bimodule_round_trip() {
        for m in [multiplication_module(&CStarAlgebra::new(&[2, 1], &[1.0, 1.0]).unwrap()).unwrap(), hyperbolic_pair(2).unwrap()]
        {
            let v = bimodule_to_json(&m);
            let back = parse_bimodule(&v).unwrap();
            assert_eq!(back.dim(), m.dim());
            assert_eq!(back.pairing_tensor(), m.pairing_tensor());
            assert_eq!(back.left_tensor(), m.left_tensor());
            assert_eq!(back.involution_matrix(), m.involution_matrix());
        }
    }

    #[test]
    fn invalid_documents() {
        assert!(matches!(parse_bimodule_str("{"), Err(StarError::ConfigParse(_))));
        assert!(matches!(parse_bimodule_str(r#"{"version":"x"}"#), Err(StarError::ConfigParse(_))));
        let mut v = bimodule_to_json(&hyperbolic_pair(1).unwrap());
        v["tensors"]["pairing"] = json!([[[[[-1]]], [[[0]]]], [[[[0]]], [[[-1]]]]]);
        assert!(matches!(parse_bimodule(&v), Err(StarError::AxiomViolation { .. })));
        assert!(parse_algebra(&json!({"blocks": [100]})).is_err());
        assert!(parse_algebra(&json!({"blocks": [2], "trace_weights": [-1.0]})).is_err());
    }
}
