//! Grasp description files.
//!
//! A grasp lives in a single JSON document:
//!
//! ```json
//! {
//!   "mode": "spatial",
//!   "contacts": [
//!     {"position": [0.0, -0.03, 0.0], "normal": [0.0, 1.0, 0.0], "mu": 0.5, "link": 0}
//!   ],
//!   "hand": {
//!     "joints": [{"parent": -1, "axis": [0.0, 0.0, 1.0], "origin": [-0.06, 0.05, 0.0]}],
//!     "transmission_R": [[1.0]],
//!     "commanded": [0.1]
//!   },
//!   "solver": {"eta": 2.5, "q": 10}
//! }
//! ```
//!
//! Planar documents (`"mode": "planar"`) use 2-vectors, carry an optional
//! per-contact `preload` instead of a `link`, and take no `hand` block.
//!
//! An optional `frame` block places the coordinate system the document is
//! written in inside the object frame: parsed positions become
//! `rotation · p + origin` (normals and joint axes rotate along). Canonical
//! emission always writes geometry directly in the object frame, so the
//! block is normalized away.
//!
//! The schema is strict: unknown fields are rejected, vectors must have the
//! right length, and normals must already be unit length — nothing is
//! silently renormalized. Every parse error names the offending location as
//! a JSON pointer such as `/contacts/0/mu`.
//!
//! [`canonical_json`] emits a byte-stable canonical form: keys sorted, two
//! space indentation, floats printed like C's `%.12g`. Emitting, re-parsing
//! and emitting again reproduces the bytes exactly.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde_json::Value;
use thiserror::Error;

use crate::grasp::{
    ContactSpec, GraspError, GraspModel, HandModel, Joint, PlanarContact, PlanarGrasp,
    SpatialGrasp,
};
use crate::queries::QueryConfig;

/// Largest accepted deviation of a stated unit vector from length one.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IoError {
    /// The document is valid JSON but violates the grasp schema. `path` is a
    /// JSON pointer to the offending value.
    #[error("{}{msg}", if .path.is_empty() { String::new() } else { format!("{path}: ") })]
    Schema { path: String, msg: String },
    /// The document is not valid JSON at all.
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read grasp file: {0}")]
    File(#[from] std::io::Error),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

fn schema(path: impl Into<String>, msg: impl Into<String>) -> IoError {
    IoError::Schema { path: path.into(), msg: msg.into() }
}

/// Solver settings a grasp file may pin. Every field is optional; absent
/// fields leave the corresponding [`QueryConfig`] entry untouched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveDefaults {
    /// Normal-uncertainty half-angle for robust relaxation queries, degrees.
    pub eta_deg: Option<f64>,
    /// Relaxation resolution exponent `q`.
    pub resolution_exponent: Option<u32>,
    /// Iterative-solver step bound.
    pub gamma: Option<f64>,
    /// Iterative-solver convergence threshold, newtons.
    pub epsilon: Option<f64>,
    /// Edge count of the iterative solver's inscribed friction cone.
    pub cone_resolution: Option<usize>,
}

impl SolveDefaults {
    pub fn is_empty(&self) -> bool {
        *self == SolveDefaults::default()
    }

    /// Folds the file's settings into a query configuration.
    pub fn apply(&self, cfg: &mut QueryConfig) {
        if let Some(deg) = self.eta_deg {
            cfg.relaxation.eta = deg.to_radians();
        }
        if let Some(q) = self.resolution_exponent {
            cfg.relaxation.resolution_exponent = q;
        }
        if let Some(g) = self.gamma {
            cfg.iterative.gamma = g;
        }
        if let Some(e) = self.epsilon {
            cfg.iterative.epsilon = e;
        }
        if let Some(k) = self.cone_resolution {
            cfg.iterative.cone_resolution = k;
        }
    }
}

/// A parsed grasp document: the validated model plus any solver defaults the
/// file carried.
#[derive(Debug, Clone)]
pub struct GraspFile {
    pub model: GraspModel,
    pub defaults: SolveDefaults,
}

/// Reads and validates a grasp file from disk.
pub fn parse_grasp_file(path: impl AsRef<std::path::Path>) -> Result<GraspFile, IoError> {
    let text = std::fs::read_to_string(path)?;
    parse_grasp_str(&text)
}

/// Parses and validates a grasp document from a JSON string.
pub fn parse_grasp_str(text: &str) -> Result<GraspFile, IoError> {
    let value: Value = serde_json::from_str(text)?;
    let root = Cur { v: &value, path: String::new() };
    root.expect_object()?;

    let mode = root.member("mode")?;
    let model = match mode.str()? {
        "planar" => {
            root.allow_keys(&["mode", "frame", "contacts", "solver"])?;
            GraspModel::Planar(parse_planar(&root)?)
        }
        "spatial" => {
            root.allow_keys(&["mode", "frame", "contacts", "hand", "solver"])?;
            GraspModel::Spatial(parse_spatial(&root)?)
        }
        other => {
            return Err(schema(
                mode.path,
                format!("mode must be \"planar\" or \"spatial\" (got \"{other}\")"),
            ))
        }
    };

    let defaults = match root.opt_member("solver") {
        Some(cur) => parse_defaults(&cur)?,
        None => SolveDefaults::default(),
    };

    // Cross-field invariants (transmission shape, link reachability, ...) are
    // owned by the model types; translate their reports back onto pointers.
    model.validate().map_err(|e| match e {
        GraspError::InvalidContact { index, msg } => schema(format!("/contacts/{index}"), msg),
        GraspError::UnreachableLink { index, link } => schema(
            format!("/contacts/{index}/link"),
            format!("link {link} is not reachable from the base"),
        ),
        GraspError::InvalidHand(msg) => schema("/hand", msg),
        other => IoError::Grasp(other),
    })?;

    Ok(GraspFile { model, defaults })
}

fn parse_planar(root: &Cur) -> Result<PlanarGrasp, IoError> {
    let frame = match root.opt_member("frame") {
        Some(cur) => Some(parse_planar_frame(&cur)?),
        None => None,
    };
    let contacts = root.member("contacts")?;
    let items = contacts.array()?;
    if items.is_empty() {
        return Err(schema(contacts.path, "grasp needs at least one contact"));
    }
    let mut out = Vec::with_capacity(items.len());
    for item in &items {
        item.expect_object()?;
        if item.v.get("link").is_some() {
            return Err(schema(item.child("link"), "link applies to spatial grasps only"));
        }
        item.allow_keys(&["position", "normal", "mu", "preload", "stiffness"])?;
        let mut position = Vector2::from(item.member("position")?.fixed_floats::<2>()?);
        let mut normal = Vector2::from(item.member("normal")?.fixed_floats::<2>()?);
        check_unit(&item.member("normal")?, normal.norm())?;
        if let Some((rot, orig)) = &frame {
            position = rot * position + orig;
            normal = rot * normal;
        }
        out.push(PlanarContact {
            position,
            normal,
            mu: item.member("mu")?.nonnegative()?,
            preload: match item.opt_member("preload") {
                Some(p) => p.nonnegative()?,
                None => 0.0,
            },
            stiffness: parse_stiffness(item)?,
        });
    }
    Ok(PlanarGrasp { contacts: out })
}

fn parse_spatial(root: &Cur) -> Result<SpatialGrasp, IoError> {
    let frame = match root.opt_member("frame") {
        Some(cur) => Some(parse_spatial_frame(&cur)?),
        None => None,
    };
    let contacts = root.member("contacts")?;
    let items = contacts.array()?;
    if items.is_empty() {
        return Err(schema(contacts.path, "grasp needs at least one contact"));
    }
    let mut specs = Vec::with_capacity(items.len());
    for item in &items {
        item.expect_object()?;
        if item.v.get("preload").is_some() {
            return Err(schema(
                item.child("preload"),
                "preload applies to planar grasps only; spatial preloads come from hand.commanded",
            ));
        }
        item.allow_keys(&["position", "normal", "mu", "link", "stiffness"])?;
        let mut position = Vector3::from(item.member("position")?.fixed_floats::<3>()?);
        let mut normal = Vector3::from(item.member("normal")?.fixed_floats::<3>()?);
        check_unit(&item.member("normal")?, normal.norm())?;
        if let Some((rot, orig)) = &frame {
            position = rot * position + orig;
            normal = rot * normal;
        }
        let link = item.member("link")?.int()?;
        if link < -1 {
            return Err(schema(item.child("link"), "link must be -1 (world) or a joint index"));
        }
        specs.push(ContactSpec {
            position,
            normal,
            mu: item.member("mu")?.nonnegative()?,
            link: link as i32,
            stiffness: parse_stiffness(item)?,
        });
    }

    let hand = root.member("hand")?;
    hand.expect_object()?;
    hand.allow_keys(&["joints", "transmission_R", "commanded"])?;

    let mut joints = Vec::new();
    for j in &hand.member("joints")?.array()? {
        j.expect_object()?;
        j.allow_keys(&["parent", "axis", "origin"])?;
        let parent = j.member("parent")?.int()?;
        if parent < -1 {
            return Err(schema(j.child("parent"), "parent must be -1 (base) or a joint index"));
        }
        let mut axis = Vector3::from(j.member("axis")?.fixed_floats::<3>()?);
        check_unit(&j.member("axis")?, axis.norm())?;
        let mut origin = Vector3::from(j.member("origin")?.fixed_floats::<3>()?);
        if let Some((rot, off)) = &frame {
            axis = rot * axis;
            origin = rot * origin + off;
        }
        joints.push(Joint { parent: parent as i32, axis, origin });
    }

    let trans = hand.member("transmission_R")?;
    let rows = trans.array()?;
    let mut width: Option<usize> = None;
    let mut entries: Vec<f64> = Vec::new();
    for row in &rows {
        let vals = row.floats()?;
        match width {
            None => width = Some(vals.len()),
            Some(w) if w != vals.len() => {
                return Err(schema(
                    row.path.clone(),
                    format!("row has {} entries, expected {w}", vals.len()),
                ))
            }
            _ => {}
        }
        entries.extend(vals);
    }
    let ncols = width.unwrap_or(0);
    let transmission = DMatrix::from_row_slice(rows.len(), ncols, &entries);

    let commanded_cur = hand.member("commanded")?;
    let commanded = DVector::from_vec(commanded_cur.floats()?);
    if commanded.len() != ncols && !rows.is_empty() {
        return Err(schema(
            commanded_cur.path,
            format!("{} commanded forces for {ncols} actuators", commanded.len()),
        ));
    }

    Ok(SpatialGrasp { contacts: specs, hand: HandModel { joints, transmission, commanded } })
}

fn parse_stiffness(item: &Cur) -> Result<f64, IoError> {
    match item.opt_member("stiffness") {
        Some(s) => {
            let v = s.float()?;
            if !(v > 0.0) {
                return Err(schema(s.path, format!("stiffness must be > 0 (got {v})")));
            }
            Ok(v)
        }
        None => Ok(1.0),
    }
}

fn check_unit(cur: &Cur, norm: f64) -> Result<(), IoError> {
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(schema(
            cur.path.clone(),
            format!("must be unit length within {UNIT_NORM_TOL:e} (got norm {norm}); normalize it in the file"),
        ));
    }
    Ok(())
}

fn parse_planar_frame(cur: &Cur) -> Result<(Matrix2<f64>, Vector2<f64>), IoError> {
    cur.expect_object()?;
    cur.allow_keys(&["origin", "rotation"])?;
    let origin = match cur.opt_member("origin") {
        Some(o) => Vector2::from(o.fixed_floats::<2>()?),
        None => Vector2::zeros(),
    };
    let rotation = match cur.opt_member("rotation") {
        Some(r) => {
            let m = parse_matrix_rows::<2>(&r)?;
            check_rotation(&r, (m.transpose() * m - Matrix2::identity()).amax(), m.determinant())?;
            m
        }
        None => Matrix2::identity(),
    };
    Ok((rotation, origin))
}

fn parse_spatial_frame(cur: &Cur) -> Result<(Matrix3<f64>, Vector3<f64>), IoError> {
    cur.expect_object()?;
    cur.allow_keys(&["origin", "rotation"])?;
    let origin = match cur.opt_member("origin") {
        Some(o) => Vector3::from(o.fixed_floats::<3>()?),
        None => Vector3::zeros(),
    };
    let rotation = match cur.opt_member("rotation") {
        Some(r) => {
            let m = parse_matrix_rows::<3>(&r)?;
            check_rotation(&r, (m.transpose() * m - Matrix3::identity()).amax(), m.determinant())?;
            m
        }
        None => Matrix3::identity(),
    };
    Ok((rotation, origin))
}

fn parse_matrix_rows<const N: usize>(
    cur: &Cur,
) -> Result<nalgebra::SMatrix<f64, N, N>, IoError> {
    let rows = cur.array()?;
    if rows.len() != N {
        return Err(schema(cur.path.clone(), format!("expected {N} rows, got {}", rows.len())));
    }
    let mut m = nalgebra::SMatrix::<f64, N, N>::zeros();
    for (i, row) in rows.iter().enumerate() {
        let vals = row.fixed_floats::<N>()?;
        for (jj, v) in vals.iter().enumerate() {
            m[(i, jj)] = *v;
        }
    }
    Ok(m)
}

fn check_rotation(cur: &Cur, orth_err: f64, det: f64) -> Result<(), IoError> {
    if orth_err > UNIT_NORM_TOL || det <= 0.0 {
        return Err(schema(
            cur.path.clone(),
            "must be a rotation matrix (orthonormal rows, determinant +1)",
        ));
    }
    Ok(())
}

fn parse_defaults(cur: &Cur) -> Result<SolveDefaults, IoError> {
    cur.expect_object()?;
    cur.allow_keys(&["eta", "q", "gamma", "epsilon", "cone_resolution"])?;
    let mut d = SolveDefaults::default();
    if let Some(eta) = cur.opt_member("eta") {
        let v = eta.float()?;
        if !(0.0..90.0).contains(&v) {
            return Err(schema(eta.path, "eta must lie in [0, 90) degrees"));
        }
        d.eta_deg = Some(v);
    }
    if let Some(q) = cur.opt_member("q") {
        let v = q.int()?;
        if !(0..=30).contains(&v) {
            return Err(schema(q.path, "q must lie in [0, 30]"));
        }
        d.resolution_exponent = Some(v as u32);
    }
    if let Some(g) = cur.opt_member("gamma") {
        let v = g.float()?;
        if !(v > 0.0) {
            return Err(schema(g.path, "gamma must be > 0"));
        }
        d.gamma = Some(v);
    }
    if let Some(e) = cur.opt_member("epsilon") {
        let v = e.float()?;
        if !(v > 0.0) {
            return Err(schema(e.path, "epsilon must be > 0"));
        }
        d.epsilon = Some(v);
    }
    if let Some(k) = cur.opt_member("cone_resolution") {
        let v = k.int()?;
        if v < 3 {
            return Err(schema(k.path, "cone_resolution must be at least 3"));
        }
        d.cone_resolution = Some(v as usize);
    }
    Ok(d)
}

/// A value plus the JSON pointer that leads to it.
struct Cur<'a> {
    v: &'a Value,
    path: String,
}

fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

impl<'a> Cur<'a> {
    fn child(&self, key: &str) -> String {
        format!("{}/{}", self.path, escape_pointer(key))
    }

    fn expect_object(&self) -> Result<(), IoError> {
        if self.v.is_object() {
            Ok(())
        } else {
            Err(schema(self.path.clone(), "expected an object"))
        }
    }

    fn member(&self, key: &str) -> Result<Cur<'a>, IoError> {
        self.expect_object()?;
        match self.v.get(key) {
            Some(v) => Ok(Cur { v, path: self.child(key) }),
            None => Err(schema(self.child(key), "missing required field")),
        }
    }

    fn opt_member(&self, key: &str) -> Option<Cur<'a>> {
        self.v.get(key).map(|v| Cur { v, path: self.child(key) })
    }

    fn allow_keys(&self, allowed: &[&str]) -> Result<(), IoError> {
        let map = self.v.as_object().ok_or_else(|| schema(self.path.clone(), "expected an object"))?;
        for k in map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(schema(self.child(k), "unknown field"));
            }
        }
        Ok(())
    }

    fn array(&self) -> Result<Vec<Cur<'a>>, IoError> {
        let items = self.v.as_array().ok_or_else(|| schema(self.path.clone(), "expected an array"))?;
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, v)| Cur { v, path: format!("{}/{i}", self.path) })
            .collect())
    }

    fn float(&self) -> Result<f64, IoError> {
        let v = self
            .v
            .as_f64()
            .ok_or_else(|| schema(self.path.clone(), "expected a number"))?;
        if !v.is_finite() {
            return Err(schema(self.path.clone(), "number must be finite"));
        }
        Ok(v)
    }

    fn nonnegative(&self) -> Result<f64, IoError> {
        let v = self.float()?;
        if v < 0.0 {
            return Err(schema(self.path.clone(), format!("must be >= 0 (got {v})")));
        }
        Ok(v)
    }

    fn int(&self) -> Result<i64, IoError> {
        self.v
            .as_i64()
            .ok_or_else(|| schema(self.path.clone(), "expected an integer"))
    }

    fn str(&self) -> Result<&'a str, IoError> {
        self.v
            .as_str()
            .ok_or_else(|| schema(self.path.clone(), "expected a string"))
    }

    fn floats(&self) -> Result<Vec<f64>, IoError> {
        self.array()?.iter().map(|c| c.float()).collect()
    }

    fn fixed_floats<const N: usize>(&self) -> Result<[f64; N], IoError> {
        let vals = self.floats()?;
        if vals.len() != N {
            return Err(schema(
                self.path.clone(),
                format!("expected {N} numbers, got {}", vals.len()),
            ));
        }
        let mut out = [0.0; N];
        out.copy_from_slice(&vals);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Canonical emission
// ---------------------------------------------------------------------------

/// Formats a float the way C's `printf("%.12g", x)` would: up to twelve
/// significant digits, trailing zeros stripped, scientific notation outside
/// the `%g` exponent window. The output is deterministic, so canonical
/// documents are byte-stable.
pub fn format_g12(x: f64) -> String {
    const P: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    debug_assert!(x.is_finite());
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("float in scientific notation");
    let x10: i32 = exp.parse().expect("float exponent");
    if x10 < -4 || x10 >= P {
        format!("{}e{}{:02}", strip_zeros(mant), if x10 < 0 { '-' } else { '+' }, x10.abs())
    } else {
        let prec = (P - 1 - x10).max(0) as usize;
        strip_zeros(&format!("{x:.prec$}"))
    }
}

fn strip_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    trimmed.to_string()
}

/// Canonical JSON value: raw scalar text, array, or object with keys already
/// in canonical (sorted) order.
enum Node {
    Scalar(String),
    Array(Vec<Node>),
    Object(Vec<(&'static str, Node)>),
}

fn num(x: f64) -> Node {
    Node::Scalar(format_g12(x))
}

fn nums<'a>(values: impl Iterator<Item = &'a f64>) -> Node {
    Node::Array(values.map(|v| num(*v)).collect())
}

fn render(node: &Node, depth: usize, out: &mut String) {
    let pad = |out: &mut String, d: usize| {
        for _ in 0..d {
            out.push_str("  ");
        }
    };
    match node {
        Node::Scalar(s) => out.push_str(s),
        Node::Array(items) => {
            if items.iter().all(|i| matches!(i, Node::Scalar(_))) {
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    render(item, depth, out);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    pad(out, depth + 1);
                    render(item, depth + 1, out);
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                pad(out, depth);
                out.push(']');
            }
        }
        Node::Object(pairs) => {
            if pairs.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (name, value)) in pairs.iter().enumerate() {
                pad(out, depth + 1);
                out.push('"');
                out.push_str(name);
                out.push_str("\": ");
                render(value, depth + 1, out);
                if k + 1 < pairs.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, depth);
            out.push('}');
        }
    }
}

/// Emits the canonical JSON form of a model plus defaults: keys sorted,
/// geometry in the object frame, floats via [`format_g12`], trailing
/// newline. Parsing the output and emitting again reproduces the bytes
/// exactly.
pub fn canonical_json(model: &GraspModel, defaults: &SolveDefaults) -> String {
    let mut root: Vec<(&'static str, Node)> = Vec::new();
    match model {
        GraspModel::Planar(g) => {
            let contacts = g
                .contacts
                .iter()
                .map(|c| {
                    Node::Object(vec![
                        ("mu", num(c.mu)),
                        ("normal", nums(c.normal.iter())),
                        ("position", nums(c.position.iter())),
                        ("preload", num(c.preload)),
                        ("stiffness", num(c.stiffness)),
                    ])
                })
                .collect();
            root.push(("contacts", Node::Array(contacts)));
            root.push(("mode", Node::Scalar("\"planar\"".into())));
        }
        GraspModel::Spatial(g) => {
            let contacts = g
                .contacts
                .iter()
                .map(|c| {
                    Node::Object(vec![
                        ("link", Node::Scalar(c.link.to_string())),
                        ("mu", num(c.mu)),
                        ("normal", nums(c.normal.iter())),
                        ("position", nums(c.position.iter())),
                        ("stiffness", num(c.stiffness)),
                    ])
                })
                .collect();
            let joints = g
                .hand
                .joints
                .iter()
                .map(|j| {
                    Node::Object(vec![
                        ("axis", nums(j.axis.iter())),
                        ("origin", nums(j.origin.iter())),
                        ("parent", Node::Scalar(j.parent.to_string())),
                    ])
                })
                .collect();
            let rows = (0..g.hand.transmission.nrows())
                .map(|r| nums(g.hand.transmission.row(r).iter()))
                .collect();
            root.push(("contacts", Node::Array(contacts)));
            root.push((
                "hand",
                Node::Object(vec![
                    ("commanded", nums(g.hand.commanded.iter())),
                    ("joints", Node::Array(joints)),
                    ("transmission_R", Node::Array(rows)),
                ]),
            ));
            root.push(("mode", Node::Scalar("\"spatial\"".into())));
        }
    }
    if !defaults.is_empty() {
        let mut fields: Vec<(&'static str, Node)> = Vec::new();
        if let Some(k) = defaults.cone_resolution {
            fields.push(("cone_resolution", Node::Scalar(k.to_string())));
        }
        if let Some(e) = defaults.epsilon {
            fields.push(("epsilon", num(e)));
        }
        if let Some(eta) = defaults.eta_deg {
            fields.push(("eta", num(eta)));
        }
        if let Some(g) = defaults.gamma {
            fields.push(("gamma", num(g)));
        }
        if let Some(q) = defaults.resolution_exponent {
            fields.push(("q", Node::Scalar(q.to_string())));
        }
        root.push(("solver", Node::Object(fields)));
    }
    let mut out = String::new();
    render(&Node::Object(root), 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    const PLANAR_DOC: &str = r#"{
        "mode": "planar",
        "contacts": [
            {"position": [-0.05, 0.0], "normal": [1.0, 0.0], "mu": 0.5, "preload": 1.0},
            {"position": [0.0, -0.05], "normal": [0.0, 1.0], "mu": 0.5},
            {"position": [0.05, 0.0], "normal": [-1.0, 0.0], "mu": 0.5, "preload": 1.0}
        ]
    }"#;

    fn planar_model(doc: &str) -> PlanarGrasp {
        match parse_grasp_str(doc).expect("parse").model {
            GraspModel::Planar(g) => g,
            GraspModel::Spatial(_) => panic!("expected planar"),
        }
    }

    #[test]
    fn minimal_planar_document_parses() {
        let g = planar_model(PLANAR_DOC);
        assert_eq!(g.contacts.len(), 3);
        assert_eq!(g.contacts[1].preload, 0.0);
        assert_eq!(g.contacts[1].stiffness, 1.0);
        assert_relative_eq!(g.contacts[0].position.x, -0.05);
    }

    #[test]
    fn missing_mu_names_the_pointer() {
        let doc = r#"{"mode": "planar", "contacts": [
            {"position": [0.0, -0.05], "normal": [0.0, 1.0]}
        ]}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/contacts/0/mu"), "got: {err}");
        assert!(err.contains("missing"), "got: {err}");
    }

    #[test]
    fn non_unit_normal_is_rejected_not_renormalized() {
        let doc = r#"{"mode": "planar", "contacts": [
            {"position": [0.0, -0.05], "normal": [0.0, 1.0], "mu": 0.5},
            {"position": [0.0, 0.05], "normal": [0.0, -1.001], "mu": 0.5}
        ]}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/contacts/1/normal"), "got: {err}");
        assert!(err.contains("normalize"), "got: {err}");
        // Just inside the tolerance is accepted as stated, not rescaled.
        let doc_ok = r#"{"mode": "planar", "contacts": [
            {"position": [0.0, -0.05], "normal": [0.0, 1.0000005], "mu": 0.5}
        ]}"#;
        let g = planar_model(doc_ok);
        assert_eq!(g.contacts[0].normal.y, 1.0000005);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let doc = r#"{"mode": "planar", "contacts": [
            {"position": [0.0, -0.05], "normal": [0.0, 1.0], "mu": 0.5, "flavor": 3}
        ]}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/contacts/0/flavor"), "got: {err}");
        assert!(err.contains("unknown"), "got: {err}");
    }

    #[test]
    fn mode_mixups_are_named() {
        let planar_with_link = r#"{"mode": "planar", "contacts": [
            {"position": [0.0, -0.05], "normal": [0.0, 1.0], "mu": 0.5, "link": 0}
        ]}"#;
        let err = parse_grasp_str(planar_with_link).unwrap_err().to_string();
        assert!(err.contains("/contacts/0/link"), "got: {err}");

        let spatial_doc = canonical_json(
            &GraspModel::Spatial(fixtures::two_finger_box()),
            &SolveDefaults::default(),
        );
        let with_preload = spatial_doc.replace("\"mu\": 0.4,", "\"mu\": 0.4,\n      \"preload\": 1,");
        let err = parse_grasp_str(&with_preload).unwrap_err().to_string();
        assert!(err.contains("/contacts/0/preload"), "got: {err}");
        assert!(err.contains("hand.commanded"), "got: {err}");
    }

    #[test]
    fn broken_json_is_a_syntax_error() {
        match parse_grasp_str("{\"mode\": ").unwrap_err() {
            IoError::Json(_) => {}
            other => panic!("expected Json error, got {other}"),
        }
    }

    #[test]
    fn spatial_round_trip_is_byte_stable() {
        let defaults = SolveDefaults {
            eta_deg: Some(2.5),
            resolution_exponent: Some(8),
            gamma: None,
            epsilon: Some(1e-3),
            cone_resolution: Some(16),
        };
        let model = GraspModel::Spatial(fixtures::package_grasp());
        let first = canonical_json(&model, &defaults);
        let parsed = parse_grasp_str(&first).expect("canonical form parses");
        assert_eq!(parsed.defaults, defaults);
        let second = canonical_json(&parsed.model, &parsed.defaults);
        assert_eq!(first, second);

        // The quantized model agrees with the original to %.12g precision.
        let (orig, back) = match (&model, &parsed.model) {
            (GraspModel::Spatial(a), GraspModel::Spatial(b)) => (a, b),
            _ => unreachable!(),
        };
        assert_eq!(orig.contacts.len(), back.contacts.len());
        for (a, b) in orig.contacts.iter().zip(&back.contacts) {
            assert_relative_eq!(a.position, b.position, max_relative = 1e-11);
            assert_relative_eq!(a.normal, b.normal, max_relative = 1e-11);
            assert_eq!(a.link, b.link);
        }
        assert_relative_eq!(
            orig.hand.transmission,
            back.hand.transmission,
            max_relative = 1e-11
        );
    }

    #[test]
    fn planar_round_trip_is_byte_stable() {
        let file = parse_grasp_str(PLANAR_DOC).expect("parse");
        let first = canonical_json(&file.model, &file.defaults);
        let again = parse_grasp_str(&first).expect("reparse");
        assert_eq!(first, canonical_json(&again.model, &again.defaults));
    }

    #[test]
    fn frame_block_moves_the_document_into_the_object_frame() {
        // The same physical grasp written in a frame rotated 90° about z and
        // shifted: parse must undo the transform.
        let doc = r#"{
            "mode": "spatial",
            "frame": {
                "origin": [0.01, 0.02, 0.0],
                "rotation": [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]
            },
            "contacts": [
                {"position": [-0.02, 0.04, 0.0], "normal": [0.0, -1.0, 0.0], "mu": 0.4, "link": 0},
                {"position": [-0.05, 0.03, 0.0], "normal": [1.0, 0.0, 0.0], "mu": 0.4, "link": 0},
                {"position": [-0.02, -0.02, 0.0], "normal": [0.0, 1.0, 0.0], "mu": 0.4, "link": 1},
                {"position": [-0.05, -0.01, 0.0], "normal": [1.0, 0.0, 0.0], "mu": 0.4, "link": 1}
            ],
            "hand": {
                "joints": [
                    {"parent": -1, "axis": [0.0, 0.0, 1.0], "origin": [0.03, 0.07, 0.0]},
                    {"parent": -1, "axis": [0.0, 0.0, -1.0], "origin": [0.03, -0.05, 0.0]}
                ],
                "transmission_R": [[1.0, 0.0], [0.0, 1.0]],
                "commanded": [0.1, 0.1]
            }
        }"#;
        let parsed = match parse_grasp_str(doc).expect("parse").model {
            GraspModel::Spatial(g) => g,
            _ => unreachable!(),
        };
        let reference = fixtures::two_finger_box();
        for (a, b) in reference.contacts.iter().zip(&parsed.contacts) {
            assert_relative_eq!(a.position, b.position, epsilon = 1e-12);
            assert_relative_eq!(a.normal, b.normal, epsilon = 1e-12);
        }
        for (a, b) in reference.hand.joints.iter().zip(&parsed.hand.joints) {
            assert_relative_eq!(a.origin, b.origin, epsilon = 1e-12);
            assert_relative_eq!(a.axis, b.axis, epsilon = 1e-12);
        }
    }

    #[test]
    fn shoddy_rotation_is_rejected() {
        let doc = r#"{"mode": "planar",
            "frame": {"rotation": [[1.0, 0.1], [0.0, 1.0]]},
            "contacts": [{"position": [0.0, 0.0], "normal": [0.0, 1.0], "mu": 0.5}]}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/frame/rotation"), "got: {err}");
    }

    #[test]
    fn ragged_transmission_rows_are_named() {
        let doc = r#"{"mode": "spatial",
            "contacts": [{"position": [0.0, -0.05, 0.0], "normal": [0.0, 1.0, 0.0], "mu": 0.5, "link": 0}],
            "hand": {
                "joints": [{"parent": -1, "axis": [0.0, 0.0, 1.0], "origin": [0.0, 0.0, 0.0]}],
                "transmission_R": [[1.0, 0.0], [0.0]],
                "commanded": [0.1, 0.1]
            }}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/hand/transmission_R/1"), "got: {err}");
    }

    #[test]
    fn commanded_length_mismatch_is_named() {
        let doc = r#"{"mode": "spatial",
            "contacts": [{"position": [0.0, -0.05, 0.0], "normal": [0.0, 1.0, 0.0], "mu": 0.5, "link": 0}],
            "hand": {
                "joints": [{"parent": -1, "axis": [0.0, 0.0, 1.0], "origin": [0.0, 0.0, 0.0]}],
                "transmission_R": [[1.0, 0.0]],
                "commanded": [0.1]
            }}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/hand/commanded"), "got: {err}");
    }

    #[test]
    fn unreachable_link_is_mapped_back_to_its_contact() {
        let doc = r#"{"mode": "spatial",
            "contacts": [{"position": [0.0, -0.05, 0.0], "normal": [0.0, 1.0, 0.0], "mu": 0.5, "link": 7}],
            "hand": {
                "joints": [{"parent": -1, "axis": [0.0, 0.0, 1.0], "origin": [0.0, 0.0, 0.0]}],
                "transmission_R": [[1.0]],
                "commanded": [0.1]
            }}"#;
        let err = parse_grasp_str(doc).unwrap_err().to_string();
        assert!(err.contains("/contacts/0/link"), "got: {err}");
    }

    #[test]
    fn solver_defaults_parse_and_apply() {
        let doc = r#"{"mode": "planar",
            "contacts": [{"position": [0.0, -0.05], "normal": [0.0, 1.0], "mu": 0.5}],
            "solver": {"eta": 2.5, "q": 6, "gamma": 0.002, "epsilon": 0.0005, "cone_resolution": 32}}"#;
        let file = parse_grasp_str(doc).expect("parse");
        let mut cfg = QueryConfig::default();
        file.defaults.apply(&mut cfg);
        assert_relative_eq!(cfg.relaxation.eta, 2.5f64.to_radians());
        assert_eq!(cfg.relaxation.resolution_exponent, 6);
        assert_relative_eq!(cfg.iterative.gamma, 0.002);
        assert_relative_eq!(cfg.iterative.epsilon, 0.0005);
        assert_eq!(cfg.iterative.cone_resolution, 32);

        let bad = doc.replace("\"eta\": 2.5", "\"eta\": 95.0");
        let err = parse_grasp_str(&bad).unwrap_err().to_string();
        assert!(err.contains("/solver/eta"), "got: {err}");
    }

    #[test]
    fn g_format_matches_printf() {
        // Reference strings are printf("%.12g", x) outputs.
        let cases: &[(f64, &str)] = &[
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (-1.5, "-1.5"),
            (0.05, "0.05"),
            (1000.0, "1000"),
            (0.0001, "0.0001"),
            (0.00001, "1e-05"),
            (1e-9, "1e-09"),
            (1e12, "1e+12"),
            (123456789012345.0, "1.23456789012e+14"),
            (1234.5678, "1234.5678"),
            (1.0 / 3.0, "0.333333333333"),
            (2.0f64.sqrt(), "1.41421356237"),
            (-9.81, "-9.81"),
            (999999999999.5, "1e+12"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g12(*x), *want, "formatting {x}");
        }
    }

    #[test]
    fn pointer_escaping_follows_rfc6901() {
        assert_eq!(escape_pointer("a/b"), "a~1b");
        assert_eq!(escape_pointer("a~b"), "a~0b");
    }
}
