//! Experiment configuration: one JSON document, per-subcommand defaults and
//! dotted `--set key=value` overrides.

use std::sync::Arc;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::basis::{BasisFamily, BoxSpec, DEFAULT_ELEMENT_BUDGET};
use crate::error::{Error, Result};
use crate::grid::{random_set, CellSet, FractionalShape, GridGeometry, DEFAULT_CELL_BUDGET};
use crate::halo::{Method, DEFAULT_SUBSET_BUDGET};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    Maximal,
    HaloCurve,
    JumpDemo,
    Iterate,
    AugmentCheck,
    StrictGap,
    Oracle,
    Bench,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Maximal => "maximal",
            Subcommand::HaloCurve => "halo-curve",
            Subcommand::JumpDemo => "jump-demo",
            Subcommand::Iterate => "iterate",
            Subcommand::AugmentCheck => "augment-check",
            Subcommand::StrictGap => "strict-gap",
            Subcommand::Oracle => "oracle",
            Subcommand::Bench => "bench",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub extent: Vec<usize>,
    #[serde(with = "crate::rational::serde_q")]
    pub h: Rational,
}

impl GeometrySpec {
    pub fn build(&self, cell_budget: u64) -> Result<Arc<GridGeometry>> {
        Ok(Arc::new(GridGeometry::with_budget(
            &self.extent,
            self.h.clone(),
            cell_budget,
        )?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct RandomSpec {
    #[serde(with = "crate::rational::serde_q")]
    pub density: Rational,
    pub seed: u64,
}

/// Candidate set description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSpec {
    Cells(Vec<usize>),
    Boxes(Vec<BoxSpec>),
    Hex(String),
    Random(RandomSpec),
    Shape(FractionalShape),
}

impl SetSpec {
    pub fn build(&self, geom: &Arc<GridGeometry>) -> Result<CellSet> {
        match self {
            SetSpec::Cells(cells) => CellSet::from_cells(geom, cells.iter().copied()),
            SetSpec::Boxes(boxes) => {
                let mut out = CellSet::empty(geom);
                for b in boxes {
                    out = out.union(&CellSet::from_box(geom, &b.lo, &b.hi)?)?;
                }
                Ok(out)
            }
            SetSpec::Hex(hex) => CellSet::from_hex(geom, hex),
            SetSpec::Random(r) => random_set(geom, &r.density, r.seed),
            SetSpec::Shape(s) => s.rasterize(geom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub cells: u64,
    pub elements: u64,
    pub subsets: u64,
    pub search: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            cells: DEFAULT_CELL_BUDGET,
            elements: DEFAULT_ELEMENT_BUDGET,
            subsets: DEFAULT_SUBSET_BUDGET,
            search: 256,
        }
    }
}

/// Fully resolved configuration. Fields a subcommand does not use may be absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    pub family: BasisFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element: Option<Vec<BoxSpec>>,
    #[serde(
        default,
        with = "crate::rational::serde_q::vec",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub u_grid: Vec<Rational>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub u: Option<Rational>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub alpha: Option<Rational>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub gamma: Option<Rational>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub eps: Option<Rational>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub theta: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub c_probe: Option<Rational>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<usize>,
    #[serde(
        default,
        with = "crate::rational::serde_q::opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub domain: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<FractionalShape>,
    #[serde(default = "default_strategy")]
    pub strategy: Method,
    #[serde(default = "default_true")]
    pub pool: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub budget: Budgets,
    /// Worker threads; 0 means one per available processor.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default = "default_format")]
    pub format: Format,
}

fn default_strategy() -> Method {
    Method::Structured
}

fn default_true() -> bool {
    true
}

fn default_out_dir() -> String {
    "halolab_out".to_string()
}

fn default_format() -> Format {
    Format::Csv
}

impl ExperimentConfig {
    pub fn resolved_workers(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.workers
        }
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, field: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| Error::invalid(field, "required by this subcommand"))
    }
}

/// Built-in defaults; user documents are merged over these.
pub fn defaults(sub: Subcommand) -> Value {
    let intervals = json!({"kind": "intervals"});
    match sub {
        Subcommand::Maximal => json!({
            "geometry": {"extent": [16], "h": "1/16"},
            "family": intervals,
            "set": {"cells": [0]},
        }),
        Subcommand::HaloCurve => json!({
            "geometry": {"extent": [12], "h": "1/12"},
            "family": intervals,
            "u_grid": ["11/10", "3/2", "2", "3"],
            "strategy": "structured",
        }),
        Subcommand::JumpDemo => json!({
            "geometry": {"extent": [2000], "h": "1/1000"},
            "family": {"kind": "jump_example", "jump": {"scales": [1000], "gaps": [1, 2, 4], "stride": 1}},
            "set": {"boxes": [{"lo": [0], "hi": [1000]}]},
            "u_grid": ["101/100", "11/10", "3/2"],
        }),
        Subcommand::Iterate => json!({
            "geometry": {"extent": [64], "h": "1/64"},
            "family": intervals,
            "set": {"cells": (0..32).step_by(2).collect::<Vec<_>>()},
            "element": [{"lo": [0], "hi": [32]}],
            "alpha": "1/4",
            "gamma": "1/2",
        }),
        Subcommand::AugmentCheck => json!({
            "geometry": {"extent": [64], "h": "1/64"},
            "family": intervals,
            "set": {"random": {"density": "1/2", "seed": 0}},
            "alpha": "3/4",
            "eps": "1/32",
        }),
        Subcommand::StrictGap => json!({
            "geometry": {"extent": [16], "h": "1/16"},
            "family": {"kind": "intervals", "scale_max_fraction": "1/2"},
            "shape": {"boxes": [{"lo": ["1/4"], "hi": ["3/4"]}]},
            "gamma": "1/2",
            "ladder": [16, 64, 256],
            "domain": "1",
        }),
        Subcommand::Oracle => json!({
            "geometry": {"extent": [12], "h": "1/12"},
            "family": intervals,
            "u": "5/2",
        }),
        Subcommand::Bench => json!({
            "geometry": {"extent": [4096], "h": "1/4096"},
            "family": {"kind": "intervals", "scale_max": 64},
            "set": {"random": {"density": "1/4", "seed": 1}},
            "theta": "1/2",
        }),
    }
}

/// Recursively merges `over` into `base`; objects merge, everything else replaces.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `key.path=value`; the value is parsed as JSON when possible and
/// taken as a string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::invalid("--set", format!("expected key=value, got {assignment:?}"))
    })?;
    if path.is_empty() {
        return Err(Error::invalid("--set", "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = match slot {
            Value::Object(m) => m,
            other => {
                *other = Value::Object(Map::new());
                other.as_object_mut().expect("just set")
            }
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        slot = obj
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Defaults, then the user document, then overrides; the result is validated
/// by deserialization and errors name the offending field path.
pub fn resolve(
    sub: Subcommand,
    user: Option<Value>,
    overrides: &[String],
) -> Result<(ExperimentConfig, Value)> {
    let mut doc = defaults(sub);
    if let Some(user) = user {
        if !user.is_object() {
            return Err(Error::invalid("config", "top level must be a JSON object"));
        }
        // a user family replaces the default one wholesale
        if let (Some(fam), Some(obj)) = (user.get("family").cloned(), doc.as_object_mut()) {
            obj.insert("family".into(), fam);
        }
        merge(&mut doc, user);
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(doc.clone()).map_err(|e| {
        let path = e.path().to_string();
        let field = if path.is_empty() || path == "." {
            "config".to_string()
        } else {
            path
        };
        Error::invalid(field, e.inner().to_string())
    })?;
    let resolved = serde_json::to_value(&cfg).map_err(|e| Error::Internal(e.to_string()))?;
    Ok((cfg, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn defaults_resolve_for_every_subcommand() {
        for sub in Subcommand::value_variants() {
            let (cfg, _) = resolve(*sub, None, &[]).unwrap();
            assert!(!cfg.geometry.extent.is_empty(), "{}", sub.name());
        }
    }

    #[test]
    fn overrides_take_precedence() {
        let user = json!({"alpha": "1/3", "geometry": {"extent": [32]}});
        let (cfg, _) = resolve(
            Subcommand::Iterate,
            Some(user),
            &[
                "gamma=2/3".into(),
                "budget.search=9".into(),
                "geometry.h=1/32".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.alpha, Some(rat(1, 3)));
        assert_eq!(cfg.gamma, Some(rat(2, 3)));
        assert_eq!(cfg.geometry.extent, vec![32]);
        assert_eq!(cfg.geometry.h, rat(1, 32));
        assert_eq!(cfg.budget.search, 9);
        assert_eq!(cfg.budget.elements, DEFAULT_ELEMENT_BUDGET);
    }

    #[test]
    fn errors_name_the_field() {
        let err = resolve(Subcommand::Iterate, None, &["alpha=abc".into()]).unwrap_err();
        assert!(
            matches!(err, Error::Invalid { ref field, .. } if field == "alpha"),
            "{err:?}"
        );
        let err = resolve(Subcommand::Iterate, Some(json!({"bogus": 1})), &[]).unwrap_err();
        assert!(matches!(err, Error::Invalid { .. }));
        assert!(resolve(Subcommand::Iterate, None, &["novalue".into()]).is_err());
    }

    #[test]
    fn set_specs_build() {
        let g = Arc::new(GridGeometry::line(8).unwrap());
        let s: SetSpec =
            serde_json::from_value(json!({"boxes": [{"lo": [2], "hi": [5]}]})).unwrap();
        assert_eq!(s.build(&g).unwrap().len(), 3);
        let s: SetSpec = serde_json::from_value(json!({"hex": "10"})).unwrap();
        assert_eq!(s.build(&g).unwrap().iter().collect::<Vec<_>>(), vec![0]);
        let s: SetSpec =
            serde_json::from_value(json!({"shape": {"boxes": [{"lo": ["1/2"], "hi": [1]}]}}))
                .unwrap();
        assert_eq!(s.build(&g).unwrap().len(), 4);
    }
}
