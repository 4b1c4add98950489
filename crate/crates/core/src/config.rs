//! Scenario configuration files and the named presets.
//!
//! Configurations are JSON. Polynomials are coefficient tables keyed by
//! exponent strings, so `{"1,0": 0.5, "0,2": -1}` on two variables is
//! `0.5 x0 - x1^2`. The schema is published as `schema/scenario.schema.json`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bundles::{LieGroupBundle, TotalSpace};
use crate::calculus::{AlgebraOneForm, BaseCurve, ChartDomain, Polynomial};
use crate::connections::LieGroupBundleConnection;
use crate::error::{check_dim, Error, Result};
use crate::liegroup::{AlgebraElement, DescriptorSpec, GroupDescriptor};
use crate::principal::{AlgebraField, GeneralizedPrincipalConnection, LocalChart, Weight};
use crate::scenarios::affine::AffineScenario;
use crate::scenarios::gauge::{ClassifiedConnection, JetGaugeGroup};
use crate::scenarios::standard::StandardPrincipalScenario;

pub type PolyTable = BTreeMap<String, f64>;
/// `table[mu][k]`: component `k` of the coefficient of `dx^mu`.
pub type FormTable = Vec<Vec<PolyTable>>;

pub const PRESETS: [&str; 5] = [
    "principal-so3",
    "affine-constant",
    "affine-varying",
    "gauge-jet-so3",
    "gauge-jet-abelian",
];

fn default_seed() -> u64 {
    7
}

fn default_samples() -> usize {
    100
}

fn default_step() -> f64 {
    1e-3
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Take the definition from a named preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<Definition>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Per-check tolerance overrides keyed by check id.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Checks to run; all applicable checks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Definition {
    Principal(PrincipalDef),
    Affine(AffineDef),
    GaugeJet(GaugeJetDef),
}

/// A group given by preset name ("so3", "so2", "so4", "r3", ...) or inline.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GroupRef {
    Preset(String),
    Inline(DescriptorSpec),
}

impl GroupRef {
    pub fn resolve(&self) -> Result<GroupDescriptor> {
        match self {
            GroupRef::Preset(name) => GroupDescriptor::preset(name),
            GroupRef::Inline(spec) => GroupDescriptor::from_spec(spec),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PrincipalDef {
    pub group: GroupRef,
    pub base: ChartDomain,
    /// Extra quotient coordinates beyond the base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<ChartDomain>,
    pub connection: ConnectionSpec,
    /// Charts glued into a connection; a single reference chart when empty.
    #[serde(default)]
    pub charts: Vec<ChartDef>,
    /// Form `A-hat` of a classical principal connection, for the
    /// equivalence checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standard_form: Option<FormTable>,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConnectionSpec {
    Trivial,
    /// `h = A(u) - Ad_g A(u)` for the given form.
    PrincipalForm { coefficients: FormTable },
    /// The principal-form cocycle plus `u^0 offset`; not a Lie group
    /// bundle connection unless the offset vanishes.
    Perturbed { coefficients: FormTable, offset: Vec<f64> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChartDef {
    pub label: String,
    /// Exponential coordinates `s(v)` of the transition, one polynomial per
    /// algebra component in the quotient coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<PolyTable>>,
    /// Shift `beta` on the quotient, `table[mu][k]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<FormTable>,
    #[serde(default)]
    pub weight: WeightSpec,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    #[default]
    One,
    SmoothFall { axis: usize, lower: f64, upper: f64 },
    SmoothRise { axis: usize, lower: f64, upper: f64 },
}

impl WeightSpec {
    fn to_weight(&self) -> Weight {
        match *self {
            WeightSpec::One => Weight::One,
            WeightSpec::SmoothFall { axis, lower, upper } => Weight::SmoothFall { axis, lower, upper },
            WeightSpec::SmoothRise { axis, lower, upper } => Weight::SmoothRise { axis, lower, upper },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AffineDef {
    pub base: ChartDomain,
    /// `linear[mu][a][b]`: entry `(a, b)` of `N_mu`.
    pub linear: Vec<Vec<Vec<PolyTable>>>,
    /// `affine[mu][a]`: component `a` of `Gamma_mu`.
    pub affine: Vec<Vec<PolyTable>>,
    #[serde(default)]
    pub curves: Vec<CurveSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GaugeJetDef {
    pub group: GroupRef,
    pub base_dim: usize,
    /// Base point at which all jets live.
    pub point: Vec<f64>,
    /// Section `f`, `f[mu][k]`, in the base coordinates.
    pub f: FormTable,
    /// Section `g`, `g[mu][nu][k]`.
    pub g: Vec<Vec<Vec<PolyTable>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Line { id: String, start: Vec<f64>, end: Vec<f64> },
    Circle { id: String, center: Vec<f64>, radius: f64, axes: [usize; 2] },
}

impl CurveSpec {
    pub fn id(&self) -> &str {
        match self {
            CurveSpec::Line { id, .. } | CurveSpec::Circle { id, .. } => id,
        }
    }

    pub fn build(&self) -> Result<BaseCurve> {
        let c = match self {
            CurveSpec::Line { start, end, .. } => {
                BaseCurve::line(DVector::from_vec(start.clone()), DVector::from_vec(end.clone()))?
            }
            CurveSpec::Circle { center, radius, axes, .. } => {
                BaseCurve::circle(DVector::from_vec(center.clone()), *radius, (axes[0], axes[1]))?
            }
        };
        Ok(c.with_label(self.id()))
    }
}

fn polys(tables: &[PolyTable], nvars: usize) -> Result<Vec<Polynomial>> {
    tables.iter().map(|t| Polynomial::from_table(t, nvars)).collect()
}

fn form_from_table(table: &FormTable, nvars: usize, d: usize) -> Result<AlgebraOneForm> {
    check_dim(nvars, table.len(), "form rows")?;
    let rows = table
        .iter()
        .map(|r| {
            check_dim(d, r.len(), "form components")?;
            polys(r, nvars)
        })
        .collect::<Result<Vec<_>>>()?;
    AlgebraOneForm::polynomial(rows, d)
}

fn eval_tables(tables: &[PolyTable], x: &[f64]) -> Result<AlgebraElement> {
    let p = polys(tables, x.len())?;
    Ok(AlgebraElement(DVector::from_iterator(p.len(), p.iter().map(|q| q.eval(x)))))
}

/// A principal-bundle scenario ready to run.
#[derive(Clone)]
pub struct PrincipalSetup {
    pub space: Arc<TotalSpace>,
    pub nu: Arc<LieGroupBundleConnection>,
    /// `nu` is expected to be compatible with the group structure.
    pub nu_expected_valid: bool,
    /// Canonical connection in the first chart alone.
    pub single: GeneralizedPrincipalConnection,
    /// All configured charts glued, when there is more than one.
    pub glued: Option<GeneralizedPrincipalConnection>,
    /// Shift of the first chart, if any; the reference for differences.
    pub shift: Option<AlgebraOneForm>,
    pub standard: Option<StandardPrincipalScenario>,
    pub curves: Vec<BaseCurve>,
}

#[derive(Clone)]
pub struct AffineSetup {
    pub scenario: AffineScenario,
    pub connection: GeneralizedPrincipalConnection,
    pub curves: Vec<BaseCurve>,
}

#[derive(Clone, Debug)]
pub struct GaugeSetup {
    pub jets: JetGaugeGroup,
    pub point: DVector<f64>,
    pub connection: ClassifiedConnection,
    /// Coefficients of `f`, for the finite-difference map oracle.
    pub f_table: FormTable,
}

#[derive(Clone)]
pub enum Scenario {
    Principal(Box<PrincipalSetup>),
    Affine(Box<AffineSetup>),
    GaugeJet(Box<GaugeSetup>),
}

impl Scenario {
    pub fn kind(&self) -> &'static str {
        match self {
            Scenario::Principal(_) => "principal",
            Scenario::Affine(_) => "affine",
            Scenario::GaugeJet(_) => "gauge_jet",
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that do not need the scenario built.
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be positive, got {}", self.step)));
        }
        for (id, tol) in &self.tolerances {
            if !(*tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("tolerance for '{id}' must be positive")));
            }
        }
        if let Some(checks) = &self.checks {
            if checks.is_empty() {
                return Err(Error::Usage("empty check list".into()));
            }
        }
        match (&self.preset, &self.definition) {
            (Some(p), None) => {
                if !PRESETS.contains(&p.as_str()) {
                    return Err(Error::Config(format!("unknown preset '{p}'")));
                }
            }
            (None, Some(_)) => {}
            (Some(_), Some(_)) => return Err(Error::Config("give either a preset or a definition".into())),
            (None, None) => return Err(Error::Config("missing definition".into())),
        }
        Ok(())
    }

    /// The definition, resolving presets.
    pub fn resolved_definition(&self) -> Result<Definition> {
        match (&self.preset, &self.definition) {
            (_, Some(d)) => Ok(d.clone()),
            (Some(p), None) => Ok(preset(p)?.definition.expect("presets carry definitions")),
            (None, None) => Err(Error::Config("missing definition".into())),
        }
    }

    pub fn curves(&self) -> Result<Vec<CurveSpec>> {
        Ok(match self.resolved_definition()? {
            Definition::Principal(p) => p.curves,
            Definition::Affine(a) => a.curves,
            Definition::GaugeJet(_) => Vec::new(),
        })
    }

    pub fn build(&self) -> Result<Scenario> {
        match self.resolved_definition()? {
            Definition::Principal(p) => build_principal(&p).map(|s| Scenario::Principal(Box::new(s))),
            Definition::Affine(a) => build_affine(&a).map(|s| Scenario::Affine(Box::new(s))),
            Definition::GaugeJet(g) => build_gauge(&g).map(|s| Scenario::GaugeJet(Box::new(s))),
        }
    }
}

fn build_principal(def: &PrincipalDef) -> Result<PrincipalSetup> {
    let group = Arc::new(def.group.resolve()?);
    let d = group.dim();
    let n = def.base.dim();
    let space = Arc::new(TotalSpace::new(def.base.clone(), def.extra.clone(), group.clone())?);
    let q = space.quotient_dim();
    let bundle = LieGroupBundle::new(def.base.clone(), group.clone())?;
    let (nu, nu_expected_valid) = match &def.connection {
        ConnectionSpec::Trivial => (LieGroupBundleConnection::trivial(bundle), true),
        ConnectionSpec::PrincipalForm { coefficients } => (
            LieGroupBundleConnection::principal_form(bundle, form_from_table(coefficients, n, d)?)?,
            true,
        ),
        ConnectionSpec::Perturbed { coefficients, offset } => {
            check_dim(d, offset.len(), "cocycle offset")?;
            let inner = LieGroupBundleConnection::principal_form(bundle.clone(), form_from_table(coefficients, n, d)?)?;
            let off = AlgebraElement::from_slice(offset);
            let valid = off.norm() == 0.0;
            let nu = LieGroupBundleConnection::custom(bundle, "perturbed", move |x, g, u| {
                Ok(inner.cocycle(x, g, u)? + &off * u[0])
            });
            (nu, valid)
        }
    };
    let nu = Arc::new(nu);
    let mut charts = Vec::new();
    for c in &def.charts {
        let transition: Option<AlgebraField> = match &c.transition {
            None => None,
            Some(t) => {
                check_dim(d, t.len(), "transition components")?;
                let p = polys(t, q)?;
                Some(Arc::new(move |v: &DVector<f64>| {
                    AlgebraElement(DVector::from_iterator(p.len(), p.iter().map(|pk| pk.eval(v.as_slice()))))
                }))
            }
        };
        let shift = c.shift.as_ref().map(|s| form_from_table(s, q, d)).transpose()?;
        charts.push(LocalChart {
            label: c.label.clone(),
            transition,
            shift,
            weight: c.weight.to_weight(),
        });
    }
    if charts.is_empty() {
        charts.push(LocalChart::reference(None));
    }
    let first = LocalChart {
        weight: Weight::One,
        ..charts[0].clone()
    };
    let shift = first.shift.clone();
    let single = GeneralizedPrincipalConnection::canonical(space.clone(), nu.clone(), vec![first])?;
    let glued = if charts.len() > 1 {
        Some(GeneralizedPrincipalConnection::canonical(space.clone(), nu.clone(), charts)?)
    } else {
        None
    };
    let standard = match &def.standard_form {
        Some(t) => Some(StandardPrincipalScenario::new(space.clone(), form_from_table(t, n, d)?)?),
        None => None,
    };
    let curves = def.curves.iter().map(CurveSpec::build).collect::<Result<Vec<_>>>()?;
    Ok(PrincipalSetup {
        space,
        nu,
        nu_expected_valid,
        single,
        glued,
        shift,
        standard,
        curves,
    })
}

fn build_affine(def: &AffineDef) -> Result<AffineSetup> {
    let n = def.base.dim();
    let linear = def
        .linear
        .iter()
        .map(|rows| rows.iter().map(|r| polys(r, n)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let affine = def.affine.iter().map(|r| polys(r, n)).collect::<Result<Vec<_>>>()?;
    let scenario = AffineScenario::new(def.base.clone(), linear, affine)?;
    let connection = scenario.connection()?;
    let curves = def.curves.iter().map(CurveSpec::build).collect::<Result<Vec<_>>>()?;
    Ok(AffineSetup {
        scenario,
        connection,
        curves,
    })
}

fn build_gauge(def: &GaugeJetDef) -> Result<GaugeSetup> {
    let group = Arc::new(def.group.resolve()?);
    let d = group.dim();
    let n = def.base_dim;
    check_dim(n, def.point.len(), "gauge base point")?;
    check_dim(n, def.f.len(), "section f")?;
    check_dim(n, def.g.len(), "section g")?;
    let jets = JetGaugeGroup::new(group, n)?;
    let f = def
        .f
        .iter()
        .map(|r| {
            check_dim(d, r.len(), "section f components")?;
            eval_tables(r, &def.point)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut g = crate::calculus::BiCovector::zeros(n, d);
    for (mu, rows) in def.g.iter().enumerate() {
        check_dim(n, rows.len(), "section g rows")?;
        for (nu, r) in rows.iter().enumerate() {
            check_dim(d, r.len(), "section g components")?;
            g.set(mu, nu, &eval_tables(r, &def.point)?);
        }
    }
    Ok(GaugeSetup {
        jets,
        point: DVector::from_vec(def.point.clone()),
        connection: ClassifiedConnection { f, g, broken: false },
        f_table: def.f.clone(),
    })
}

fn table(entries: &[(&str, f64)]) -> PolyTable {
    entries.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn zero_table() -> PolyTable {
    PolyTable::new()
}

/// A named preset configuration.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let definition = match name {
        "principal-so3" => {
            let base = ChartDomain::cube("X", 2, 1.0)?;
            let coefficients = vec![
                vec![table(&[("0,1", 0.4)]), table(&[("0,0", 0.2)]), table(&[("1,1", 0.3)])],
                vec![table(&[("0,0", -0.1)]), table(&[("1,0", 0.5)]), table(&[("0,0", 0.15), ("2,0", -0.2)])],
            ];
            let shift_a = vec![
                vec![table(&[("0,0", 0.1)]), zero_table(), table(&[("0,1", 0.2)])],
                vec![zero_table(), table(&[("1,0", -0.3)]), zero_table()],
            ];
            let shift_b = vec![
                vec![zero_table(), table(&[("0,0", -0.2)]), zero_table()],
                vec![table(&[("1,1", 0.25)]), zero_table(), table(&[("0,0", 0.1)])],
            ];
            Definition::Principal(PrincipalDef {
                group: GroupRef::Preset("so3".into()),
                base,
                extra: None,
                connection: ConnectionSpec::PrincipalForm { coefficients },
                charts: vec![
                    ChartDef {
                        label: "west".into(),
                        transition: None,
                        shift: Some(shift_a),
                        weight: WeightSpec::SmoothFall {
                            axis: 0,
                            lower: -0.4,
                            upper: 0.4,
                        },
                    },
                    ChartDef {
                        label: "east".into(),
                        transition: Some(vec![
                            table(&[("1,0", 0.3)]),
                            table(&[("0,1", -0.2), ("0,0", 0.1)]),
                            table(&[("1,1", 0.4)]),
                        ]),
                        shift: Some(shift_b),
                        weight: WeightSpec::SmoothRise {
                            axis: 0,
                            lower: -0.4,
                            upper: 0.4,
                        },
                    },
                ],
                standard_form: Some(vec![vec![zero_table(), zero_table(), table(&[("0,0", 1.0)])], vec![
                    zero_table(),
                    zero_table(),
                    zero_table(),
                ]]),
                curves: vec![
                    CurveSpec::Line {
                        id: "diagonal".into(),
                        start: vec![-0.6, -0.5],
                        end: vec![0.7, 0.4],
                    },
                    CurveSpec::Circle {
                        id: "loop".into(),
                        center: vec![0.0, 0.0],
                        radius: 0.5,
                        axes: [0, 1],
                    },
                ],
            })
        }
        "affine-constant" | "affine-varying" => {
            let varying = name == "affine-varying";
            let base = ChartDomain::cube("X", 2, 1.0)?;
            let linear = if varying {
                vec![
                    vec![
                        vec![table(&[("1,0", 0.3)]), table(&[("0,0", -0.2)])],
                        vec![table(&[("0,0", 0.2)]), table(&[("0,1", 0.1)])],
                    ],
                    vec![
                        vec![table(&[("0,0", 0.1)]), table(&[("1,1", 0.4)])],
                        vec![zero_table(), table(&[("2,0", -0.3)])],
                    ],
                ]
            } else {
                vec![
                    vec![
                        vec![table(&[("0,0", 0.3)]), table(&[("0,0", -0.2)])],
                        vec![table(&[("0,0", 0.2)]), table(&[("0,0", 0.1)])],
                    ],
                    vec![
                        vec![table(&[("0,0", 0.1)]), table(&[("0,0", 0.4)])],
                        vec![zero_table(), table(&[("0,0", -0.3)])],
                    ],
                ]
            };
            let affine = if varying {
                vec![
                    vec![table(&[("0,1", 0.5)]), table(&[("0,0", -0.1)])],
                    vec![table(&[("1,0", 0.2), ("0,0", 0.3)]), zero_table()],
                ]
            } else {
                vec![
                    vec![table(&[("0,0", 0.5)]), table(&[("0,0", -0.1)])],
                    vec![table(&[("0,0", 0.3)]), table(&[("0,0", 0.2)])],
                ]
            };
            Definition::Affine(AffineDef {
                base,
                linear,
                affine,
                curves: vec![
                    CurveSpec::Line {
                        id: "diagonal".into(),
                        start: vec![-0.6, -0.5],
                        end: vec![0.7, 0.4],
                    },
                    CurveSpec::Circle {
                        id: "loop".into(),
                        center: vec![0.1, 0.0],
                        radius: 0.5,
                        axes: [0, 1],
                    },
                ],
            })
        }
        "gauge-jet-so3" | "gauge-jet-abelian" => {
            let group = if name == "gauge-jet-so3" { "so3" } else { "r3" };
            let n = 3;
            let f = vec![
                vec![table(&[("1,0,0", 0.4)]), table(&[("0,0,0", -0.3)]), table(&[("0,1,1", 0.2)])],
                vec![table(&[("0,0,0", 0.1)]), table(&[("0,0,1", 0.6)]), zero_table()],
                vec![table(&[("0,2,0", -0.5)]), zero_table(), table(&[("0,0,0", 0.25), ("1,0,0", 0.1)])],
            ];
            let g = (0..n)
                .map(|mu| {
                    (0..n)
                        .map(|nu| {
                            (0..3)
                                .map(|k| {
                                    let c = 0.1 * ((mu * 7 + nu * 3 + k * 5) % 11) as f64 - 0.5;
                                    let key = match (mu + nu + k) % 3 {
                                        0 => "0,0,0",
                                        1 => "1,0,0",
                                        _ => "0,1,1",
                                    };
                                    table(&[(key, c)])
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            Definition::GaugeJet(GaugeJetDef {
                group: GroupRef::Preset(group.into()),
                base_dim: n,
                point: vec![0.3, -0.2, 0.5],
                f,
                g,
            })
        }
        other => return Err(Error::Config(format!("unknown preset '{other}'"))),
    };
    Ok(ScenarioConfig {
        name: name.to_string(),
        preset: None,
        definition: Some(definition),
        seed: default_seed(),
        samples: default_samples(),
        step: default_step(),
        tolerances: BTreeMap::new(),
        checks: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_json_and_build() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(back, cfg);
            back.build().unwrap();
        }
    }

    #[test]
    fn unknown_fields_and_presets_are_rejected() {
        let e = ScenarioConfig::from_json(r#"{"name":"x","preset":"principal-so3","sampels":3}"#).unwrap_err();
        assert!(matches!(e, Error::Config(m) if m.contains("sampels")));
        let e = ScenarioConfig::from_json(r#"{"name":"x","preset":"principal-su2"}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let e = ScenarioConfig::from_json(r#"{"name":"x"}"#).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
    }

    #[test]
    fn tolerances_and_step_must_be_positive() {
        let e = ScenarioConfig::from_json(r#"{"name":"x","preset":"affine-constant","tolerances":{"transport_identities":0}}"#);
        assert!(e.is_err());
        let e = ScenarioConfig::from_json(r#"{"name":"x","preset":"affine-constant","step":-1e-3}"#);
        assert!(e.is_err());
    }

    #[test]
    fn empty_check_list_is_a_usage_error() {
        let e = ScenarioConfig::from_json(r#"{"name":"x","preset":"affine-constant","checks":[]}"#).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
    }

    #[test]
    fn polynomial_tables_use_exponent_keys() {
        let p = Polynomial::from_table(&table(&[("1,0", 0.5), ("0,2", -1.0)]), 2).unwrap();
        assert!((p.eval(&[2.0, 3.0]) - (1.0 - 9.0)).abs() < 1e-15);
        assert!(Polynomial::from_table(&table(&[("1", 1.0)]), 2).is_err());
    }

    #[test]
    fn perturbed_connections_are_marked_invalid() {
        let mut cfg = preset("principal-so3").unwrap();
        let Some(Definition::Principal(def)) = &mut cfg.definition else { unreachable!() };
        let ConnectionSpec::PrincipalForm { coefficients } = def.connection.clone() else { unreachable!() };
        def.connection = ConnectionSpec::Perturbed { coefficients, offset: vec![0.1, 0.0, 0.0] };
        let Scenario::Principal(s) = cfg.build().unwrap() else { unreachable!() };
        assert!(!s.nu_expected_valid);
    }
}
