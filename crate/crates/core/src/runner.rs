//! Scenario files, task dispatch and reports.
//!
//! A scenario names an algebra, a construction or a generator, and a list
//! of tasks. Each task draws randomness from its own stream derived from
//! the scenario seed and the task name, so adding or reordering tasks never
//! changes another task's samples.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::algebra::{AlgElement, BlockPartition, CStarAlgebra, StateFunctional};
use crate::bimodule::StarBimodule;
use crate::constructions::{self, FellBundleFinite};
use crate::error::{Axiom, Result, StarError};
use crate::io::{self, as_array, as_f64, as_usize, err, field, usize_list};
use crate::linalg::{self, CMat, RMat};
use crate::linking::verify_theorem12;
use crate::report::Json;
use crate::sauvageot::{self, MarkovGenerator};
use crate::structure;

pub const SCENARIO_VERSION: &str = "starmod-scenario/1";
pub const REPORT_VERSION: &str = "starmod-report/1";
pub const DEFAULT_SAMPLES: usize = 200;
const MAX_SAMPLES: usize = 5000;
const MAX_TASKS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    VerifyAxioms,
    Theorem12,
    Decompose,
    Complement,
    Akemann,
    Sauvageot,
    FellDecompose,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::VerifyAxioms,
        Task::Theorem12,
        Task::Decompose,
        Task::Complement,
        Task::Akemann,
        Task::Sauvageot,
        Task::FellDecompose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::VerifyAxioms => "verify_axioms",
            Task::Theorem12 => "theorem12",
            Task::Decompose => "decompose",
            Task::Complement => "complement",
            Task::Akemann => "akemann",
            Task::Sauvageot => "sauvageot",
            Task::FellDecompose => "fell_decompose",
        }
    }

    pub fn from_name(s: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == s)
    }
}

#[derive(Debug, Clone)]
pub enum Construction {
    Gns { density: Option<AlgElement> },
    Complexified { gram: RMat },
    Hyperbolic { n: usize },
    Tensor { ideal_blocks: Vec<usize>, gram: RMat },
    Expectation { partition: BlockPartition },
    Fell { bundle: FellBundleFinite },
    DirectSum { patterns: Vec<Vec<bool>> },
    Multiplication,
    Bimodule { module: Box<StarBimodule> },
}

#[derive(Debug, Clone)]
pub enum GeneratorSpec {
    Graph { weights: RMat },
    Conjugation { unitary: AlgElement },
    Raw { matrix: CMat },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub algebra: Option<CStarAlgebra>,
    pub construction: Option<Construction>,
    pub generator: Option<GeneratorSpec>,
    pub tasks: Vec<Task>,
    pub tol: f64,
    pub seed: u64,
    pub samples: usize,
}

fn need_algebra<'a>(alg: &'a Option<CStarAlgebra>, what: &str) -> Result<&'a CStarAlgebra> {
    alg.as_ref().ok_or_else(|| StarError::ConfigParse(format!("{what} requires an `algebra`")))
}

fn parse_partition(alg: &CStarAlgebra, v: &Value) -> Result<BlockPartition> {
    match v.as_str() {
        Some("diagonal") => return Ok(BlockPartition::diagonal(alg)),
        Some("identity") => return Ok(BlockPartition::identity(alg)),
        Some(other) => return err(format!("unknown partition `{other}`")),
        None => {}
    }
    let sub_dims = usize_list(field(v, "sub_dims")?, "sub_dims", 64, io::MAX_BLOCK)?;
    let placement = as_array(field(v, "placement")?, "placement")?
        .iter()
        .map(|p| usize_list(p, "placement", 64, 64))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockPartition { sub_dims, placement })
}

fn parse_pattern(v: &Value) -> Result<Vec<bool>> {
    as_array(v, "projection pattern")?
        .iter()
        .map(|x| match (x.as_bool(), x.as_u64()) {
            (Some(b), _) => Ok(b),
            (_, Some(0)) => Ok(false),
            (_, Some(1)) => Ok(true),
            _ => err("projection pattern entries must be 0/1 or booleans"),
        })
        .collect()
}

fn parse_construction(alg: &Option<CStarAlgebra>, v: &Value) -> Result<Construction> {
    let name = field(v, "name")?.as_str().ok_or_else(|| StarError::ConfigParse("construction name must be a string".into()))?;
    let empty = Value::Object(Default::default());
    let p = v.get("params").unwrap_or(&empty);
    Ok(match name {
        "gns" => {
            let a = need_algebra(alg, "gns")?;
            let density = p.get("density").map(|d| io::parse_element(a, d)).transpose()?;
            Construction::Gns { density }
        }
        "complexified" => Construction::Complexified { gram: io::parse_rmat(field(p, "gram")?)? },
        "hyperbolic" => Construction::Hyperbolic { n: as_usize(field(p, "n")?, "n", io::MAX_MODULE_DIM / 2)? },
        "tensor" => {
            need_algebra(alg, "tensor")?;
            let gram = match p.get("gram") {
                Some(g) => io::parse_rmat(g)?,
                None => RMat::identity(1, 1),
            };
            if gram.nrows() > 8 {
                return err("tensor gram larger than 8×8");
            }
            Construction::Tensor {
                ideal_blocks: usize_list(field(p, "ideal_blocks")?, "ideal_blocks", io::MAX_BLOCKS, io::MAX_BLOCKS)?,
                gram,
            }
        }
        "expectation" => {
            let a = need_algebra(alg, "expectation")?;
            Construction::Expectation { partition: parse_partition(a, field(p, "partition")?)? }
        }
        "fell" => {
            let bundle = if let Some(g) = p.get("fiber_grams") {
                let grams = as_array(g, "fiber_grams")?;
                if grams.len() > 16 {
                    return err("at most 16 base points");
                }
                FellBundleFinite::new(grams.iter().map(io::parse_rmat).collect::<Result<_>>()?)?
            } else {
                FellBundleFinite::standard(&usize_list(field(p, "fiber_dims")?, "fiber_dims", 16, 8)?)?
            };
            Construction::Fell { bundle }
        }
        "direct_sum" => {
            let a = need_algebra(alg, "direct_sum")?;
            let patterns = as_array(field(p, "projections")?, "projections")?
                .iter()
                .map(parse_pattern)
                .collect::<Result<Vec<_>>>()?;
            if patterns.len() > 16 || patterns.iter().any(|q| q.len() != a.num_blocks()) {
                return err("projections must be at most 16 patterns with one entry per block");
            }
            Construction::DirectSum { patterns }
        }
        "multiplication" => {
            need_algebra(alg, "multiplication")?;
            Construction::Multiplication
        }
        "bimodule" => Construction::Bimodule { module: Box::new(io::parse_bimodule(field(p, "bimodule")?)?) },
        other => return err(format!("unknown construction `{other}`")),
    })
}

fn parse_generator(alg: &Option<CStarAlgebra>, v: &Value) -> Result<GeneratorSpec> {
    let kind = field(v, "kind")?.as_str().ok_or_else(|| StarError::ConfigParse("generator kind must be a string".into()))?;
    Ok(match kind {
        "graph" => {
            let weights = io::parse_rmat(field(v, "weights")?)?;
            if weights.nrows() > 16 {
                return err("graph generators are limited to 16 vertices");
            }
            GeneratorSpec::Graph { weights }
        }
        "conjugation" => {
            let a = need_algebra(alg, "conjugation generator")?;
            GeneratorSpec::Conjugation { unitary: io::parse_element(a, field(v, "unitary")?)? }
        }
        "raw" => {
            let a = need_algebra(alg, "raw generator")?;
            let d = a.dim();
            GeneratorSpec::Raw { matrix: io::parse_cmat(field(v, "matrix")?, Some((d, d)))? }
        }
        other => return err(format!("unknown generator kind `{other}`")),
    })
}

impl Scenario {
    pub fn from_json(v: &Value) -> Result<Scenario> {
        match v.get("version").and_then(Value::as_str) {
            Some(SCENARIO_VERSION) => {}
            Some(other) => return err(format!("unsupported scenario version `{other}`")),
            None => return err("missing scenario version"),
        }
        let algebra = v.get("algebra").map(io::parse_algebra).transpose()?;
        if algebra.as_ref().is_some_and(|a| a.dim() > 36) {
            return err("algebra dimension above 36");
        }
        let construction = v.get("construction").map(|c| parse_construction(&algebra, c)).transpose()?;
        let generator = v.get("generator").map(|g| parse_generator(&algebra, g)).transpose()?;
        let tasks = as_array(field(v, "tasks")?, "tasks")?
            .iter()
            .map(|t| {
                let name = t.as_str().unwrap_or("");
                Task::from_name(name).ok_or_else(|| StarError::ConfigParse(format!("unknown task `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if tasks.is_empty() || tasks.len() > MAX_TASKS {
            return err("tasks must be a nonempty list");
        }
        let tol = match v.get("tol") {
            Some(t) => as_f64(t, "tol")?,
            None => crate::DEFAULT_TOL,
        };
        if tol <= 0.0 {
            return err("tol must be positive");
        }
        let seed = match v.get("seed") {
            Some(s) => s.as_u64().ok_or_else(|| StarError::ConfigParse("seed must be a nonnegative integer".into()))?,
            None => 0,
        };
        let samples = match v.get("samples") {
            Some(s) => as_usize(s, "samples", MAX_SAMPLES)?,
            None => DEFAULT_SAMPLES,
        };
        Ok(Scenario { algebra, construction, generator, tasks, tol, seed, samples })
    }

    pub fn from_str(s: &str) -> Result<Scenario> {
        let v: Value = serde_json::from_str(s).map_err(|e| StarError::ConfigParse(e.to_string()))?;
        Scenario::from_json(&v)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        Scenario::from_str(&std::fs::read_to_string(path)?)
    }

    /// The bimodule described by the construction.
    pub fn build_module(&self) -> Result<StarBimodule> {
        let c = self
            .construction
            .as_ref()
            .ok_or_else(|| StarError::ConfigParse("task needs a `construction`".into()))?;
        let alg = || need_algebra(&self.algebra, "construction");
        let m = match c {
            Construction::Gns { density } => {
                let a = alg()?;
                let state = match density {
                    Some(d) => StateFunctional::new(a, d.clone(), self.tol)?,
                    None => StateFunctional::normalized_trace(a),
                };
                constructions::gns_bimodule(a, &state)?
            }
            Construction::Complexified { gram } => constructions::complexified_real_hilbert(gram)?,
            Construction::Hyperbolic { n } => constructions::hyperbolic_pair(*n)?,
            Construction::Tensor { ideal_blocks, gram } => constructions::tensor_bimodule(alg()?, ideal_blocks, gram)?,
            Construction::Expectation { partition } => {
                constructions::expectation_bimodule(&alg()?.conditional_expectation(partition)?)?
            }
            Construction::Fell { bundle } => constructions::fell_bundle_module(bundle)?,
            Construction::DirectSum { patterns } => {
                let a = alg()?;
                let ps: Vec<AlgElement> = patterns.iter().map(|p| constructions::projection_from_pattern(a, p)).collect();
                constructions::direct_sum_module(a, &ps)?
            }
            Construction::Multiplication => constructions::multiplication_module(alg()?)?,
            Construction::Bimodule { module } => (**module).clone(),
        };
        Ok(m.with_tol(self.tol))
    }

    pub fn build_generator(&self) -> Result<MarkovGenerator> {
        let g = self
            .generator
            .as_ref()
            .ok_or_else(|| StarError::ConfigParse("task needs a `generator`".into()))?;
        match g {
            GeneratorSpec::Graph { weights } => sauvageot::graph_laplacian_generator(weights),
            GeneratorSpec::Conjugation { unitary } => {
                sauvageot::conjugation_generator(need_algebra(&self.algebra, "generator")?, unitary)
            }
            GeneratorSpec::Raw { matrix } => MarkovGenerator::raw(need_algebra(&self.algebra, "generator")?, matrix.clone()),
        }
    }
}

/// FNV-1a hash of a stream name.
fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Random stream for the named task.
pub fn task_rng(seed: u64, name: &str) -> ChaCha8Rng {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ fnv1a(name);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskReport {
    pub name: String,
    pub pass: bool,
    pub residuals: BTreeMap<String, f64>,
    pub details: BTreeMap<String, Json>,
    pub error: Option<String>,
    pub elapsed_ms: f64,
}

impl TaskReport {
    fn new(task: Task) -> Self {
        TaskReport {
            name: task.name().to_string(),
            pass: false,
            residuals: BTreeMap::new(),
            details: BTreeMap::new(),
            error: None,
            elapsed_ms: 0.0,
        }
    }

    fn residual(&mut self, key: &str, value: f64) {
        self.residuals.insert(key.to_string(), value);
    }

    fn detail(&mut self, key: &str, value: impl Into<Json>) {
        self.details.insert(key.to_string(), value.into());
    }

    fn to_json(&self, timing: bool) -> Json {
        let mut m = BTreeMap::new();
        m.insert("name".to_string(), Json::from(self.name.as_str()));
        m.insert("pass".to_string(), Json::from(self.pass));
        m.insert(
            "residuals".to_string(),
            Json::Obj(self.residuals.iter().map(|(k, v)| (k.clone(), Json::from(*v))).collect()),
        );
        m.insert("details".to_string(), Json::Obj(self.details.clone()));
        if let Some(e) = &self.error {
            m.insert("error".to_string(), Json::from(e.as_str()));
        }
        if timing {
            m.insert("elapsed_ms".to_string(), Json::from(self.elapsed_ms));
        }
        Json::Obj(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub tol: f64,
    pub tasks: Vec<TaskReport>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.tasks.iter().all(|t| t.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// Wall-clock timings are left out unless requested, so that reports
    /// of the same scenario and seed are byte-identical.
    pub fn to_json(&self, timing: bool) -> Json {
        Json::obj([
            ("version", Json::from(REPORT_VERSION)),
            ("crate_version", Json::from(env!("CARGO_PKG_VERSION"))),
            ("seed", Json::Int(self.seed as i64)),
            ("tol", Json::from(self.tol)),
            ("pass", Json::from(self.passed())),
            ("tasks", Json::Arr(self.tasks.iter().map(|t| t.to_json(timing)).collect())),
        ])
    }

    pub fn to_canonical(&self, timing: bool) -> String {
        self.to_json(timing).to_canonical()
    }
}

pub fn emit_report(report: &Report, path: &Path, timing: bool) -> Result<()> {
    std::fs::write(path, report.to_canonical(timing))?;
    Ok(())
}

/// Runs every task in order; errors are recorded in the task's report.
pub fn run_scenario(s: &Scenario) -> Report {
    let mut tasks = Vec::with_capacity(s.tasks.len());
    for &task in &s.tasks {
        let start = Instant::now();
        let mut rep = TaskReport::new(task);
        let mut rng = task_rng(s.seed, task.name());
        if let Err(e) = run_task(s, task, &mut rep, &mut rng) {
            rep.pass = false;
            rep.error = Some(error_label(&e));
        }
        rep.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        tasks.push(rep);
    }
    Report { seed: s.seed, tol: s.tol, tasks }
}

fn error_label(e: &StarError) -> String {
    let kind = match e {
        StarError::NonPositiveDimension(_) => "NonPositiveDimension",
        StarError::NonPositiveWeight { .. } => "NonPositiveWeight",
        StarError::ShapeMismatch(_) => "ShapeMismatch",
        StarError::NotPositive => "NotPositive",
        StarError::InvalidPartition(_) => "InvalidPartition",
        StarError::CommutativeAlgebra => "CommutativeAlgebra",
        StarError::AxiomViolation { .. } => "AxiomViolation",
        StarError::OwnerMismatch => "OwnerMismatch",
        StarError::NotAdjointable(_) => "NotAdjointable",
        StarError::NotAState(_) => "NotAState",
        StarError::NotPositiveDefinite => "NotPositiveDefinite",
        StarError::EmptyIdeal => "EmptyIdeal",
        StarError::NotCommutativeBase => "NotCommutativeBase",
        StarError::RealityConditionFails(_) => "RealityConditionFails",
        StarError::ActionsDiffer(_) => "ActionsDiffer",
        StarError::NotCentralProjection(_) => "NotCentralProjection",
        StarError::NotLocal => "NotLocal",
        StarError::NotCentered => "NotCentered",
        StarError::NotSubmodule => "NotSubmodule",
        StarError::NullSpacePresent(_) => "NullSpacePresent",
        StarError::AsymmetricWeights => "AsymmetricWeights",
        StarError::NegativeWeight => "NegativeWeight",
        StarError::NotUnitary(_) => "NotUnitary",
        StarError::GeneratorInvalid(_) => "GeneratorInvalid",
        StarError::PositivityFails(_) => "PositivityFails",
        StarError::ConfigParse(_) => "ConfigParse",
        StarError::Io(_) => "Io",
    };
    format!("{kind}: {e}")
}

fn axiom_key(a: Axiom) -> &'static str {
    match a {
        Axiom::Involutive => "involutive",
        Axiom::PairingAdjoint => "a_pairing_adjoint",
        Axiom::ActionInvolution => "b_action_involution",
        Axiom::Positivity => "c_positivity",
        Axiom::Bilinearity => "bilinearity",
        Axiom::Actions => "actions",
    }
}

fn run_task(s: &Scenario, task: Task, rep: &mut TaskReport, rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = s.tol;
    match task {
        Task::VerifyAxioms => {
            let e = s.build_module()?;
            let r = e.check_axioms();
            for (a, v) in &r.residuals {
                rep.residual(axiom_key(*a), *v);
            }
            rep.detail("dim", e.dim());
            rep.detail("positivity_margin_l", r.positivity_margin_l);
            rep.detail("positivity_margin_r", r.positivity_margin_r);
            rep.pass = r.passed();
        }
        Task::Theorem12 => {
            let e = s.build_module()?;
            let r = verify_theorem12(&e, s.samples, tol, rng);
            for item in &r.items {
                rep.residual(&item.name, item.max_residual);
            }
            rep.detail("theorem", "12");
            rep.detail(
                "items",
                Json::Arr(
                    r.items
                        .iter()
                        .map(|i| {
                            Json::obj([
                                ("name", Json::from(i.name.as_str())),
                                ("max_residual", Json::from(i.max_residual)),
                                ("pass", Json::from(i.pass)),
                            ])
                        })
                        .collect(),
                ),
            );
            rep.detail("tol", r.tol);
            rep.pass = r.passed();
        }
        Task::Decompose => {
            let e = s.build_module()?;
            let d = structure::decompose_local(&e)?;
            let report = structure::verify_decomposition(&e, &d.projections, &d.iso, tol.max(1e-8))?;
            rep.residual("iso_residual", report.iso_residual);
            rep.detail(
                "projections",
                Json::Arr(report.projections.iter().map(|p| Json::from(&io::element_to_json(p))).collect()),
            );
            rep.detail("iso_residual", report.iso_residual);
            rep.detail("pass", report.pass);
            rep.detail("multiplicities", structure::block_multiplicities(e.algebra(), &d.projections, 1e-9)?);
            rep.pass = report.pass;
        }
        Task::Complement => {
            let e = s.build_module()?;
            let d = structure::decompose_local(&e)?;
            let f = match d.generators.first() {
                Some(x) => {
                    let cols: Vec<CMat> = e
                        .left_tensor()
                        .iter()
                        .map(|l| CMat::from_column_slice(e.dim(), 1, (l * x).as_slice()))
                        .collect();
                    linalg::range(&linalg::hstack(&cols, e.dim()), e.tol())
                }
                None => CMat::zeros(e.dim(), 0),
            };
            let comp = structure::complement(&e, &f)?;
            rep.residual("orthogonality", comp.orthogonality_residual);
            rep.detail("dim_e", e.dim());
            rep.detail("dim_f", f.ncols());
            rep.detail("dim_f_prime", comp.basis.ncols());
            rep.detail("spans", comp.spans);
            rep.pass = comp.spans && comp.orthogonality_residual <= tol;
        }
        Task::Akemann => {
            let a = need_algebra(&s.algebra, "akemann")?;
            let (x, y) = a.akemann_witness()?;
            let l = (&(&x * &x.adjoint()) + &(&y * &y.adjoint())).norm();
            let r = (&(&x.adjoint() * &x) + &(&y.adjoint() * &y)).norm();
            rep.detail("norm_left_sum", l);
            rep.detail("norm_right_sum", r);
            rep.detail("x", Json::from(&io::element_to_json(&x)));
            rep.detail("y", Json::from(&io::element_to_json(&y)));
            rep.residual("left_sum", (l - 1.0).abs());
            rep.residual("right_sum", (r - 2.0).abs());
            rep.pass = (l - 1.0).abs() <= 1e-12 && (r - 2.0).abs() <= 1e-12;
        }
        Task::Sauvageot => {
            let g = s.build_generator()?;
            let v = sauvageot::validate_generator(&g, tol);
            rep.residual("generator_unital", v.unital);
            rep.residual("generator_reality", v.reality);
            rep.residual("generator_symmetry", v.symmetry);
            for c in &v.choi {
                rep.residual(&format!("choi_min_eigenvalue_t{}", c.t), c.min_eigenvalue);
            }
            rep.detail("smooth_domain_is_algebra", v.domain_is_algebra);
            rep.detail("finite_trace", v.finite_trace);
            let t = sauvageot::build_tangent(&g, tol, false)?;
            let d = sauvageot::verify_derivation(&t, tol.max(1e-10));
            rep.detail("dim_A", g.algebra().dim());
            rep.detail("dim_E0", t.e0_dim());
            rep.detail("dim_null", t.e0.null_space().ncols());
            rep.detail("dim_E", t.module.dim());
            rep.detail("span_identity", t.span_identity);
            rep.detail("positivity_margin", t.positivity_margin);
            rep.residual("leibniz", d.leibniz);
            rep.residual("self_adjoint", d.self_adjoint);
            rep.residual("carre_du_champ", d.carre_du_champ);
            let t12 = verify_theorem12(&t.module, s.samples.min(50), tol.max(1e-8), rng);
            rep.residual("theorem12_max", t12.max_residual());
            rep.pass = v.passed() && d.passed() && t.span_identity && t12.passed();
        }
        Task::FellDecompose => {
            let e = s.build_module()?;
            let d = constructions::fell_decompose(&e)?;
            rep.detail("fiber_dims", d.bundle.fiber_dims.clone());
            rep.detail(
                "fiber_grams",
                Json::Arr(d.bundle.fiber_grams.iter().map(|g| Json::from(&io::rmat_to_json(g))).collect()),
            );
            rep.residual("iso_residual", d.check.residual());
            rep.detail("bijective", d.check.bijective);
            rep.pass = d.check.passed(tol.max(1e-8));
        }
    }
    Ok(())
}

/// Built-in scenarios exercised by `starmod selftest`.
pub const SELFTEST_SCENARIOS: &[(&str, &str)] = &[
    (
        "m2-tensor",
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[2]},
            "construction":{"name":"tensor","params":{"ideal_blocks":[0],"gram":[[1]]}},
            "tasks":["verify_axioms","theorem12","decompose","complement","akemann"],"seed":1}"#,
    ),
    (
        "m2c-direct-sum",
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[2,1]},
            "construction":{"name":"direct_sum","params":{"projections":[[0,1],[1,0],[1,1]]}},
            "tasks":["verify_axioms","theorem12","decompose","complement"],"seed":2}"#,
    ),
    (
        "hyperbolic",
        r#"{"version":"starmod-scenario/1",
            "construction":{"name":"hyperbolic","params":{"n":2}},
            "tasks":["verify_axioms","theorem12"],"seed":3}"#,
    ),
    (
        "gns-nontracial",
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[2]},
            "construction":{"name":"gns","params":{"density":[[[0.9,0],[0,0.1]]]}},
            "tasks":["verify_axioms","theorem12"],"seed":4}"#,
    ),
    (
        "expectation",
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[3]},
            "construction":{"name":"expectation","params":{"partition":"diagonal"}},
            "tasks":["verify_axioms","theorem12"],"seed":5}"#,
    ),
    (
        "fell",
        r#"{"version":"starmod-scenario/1",
            "construction":{"name":"fell","params":{"fiber_grams":[[[2]],[],[[1,0.5],[0.5,1]]]}},
            "tasks":["verify_axioms","theorem12","fell_decompose","decompose"],"seed":6}"#,
    ),
    (
        "p2-graph",
        r#"{"version":"starmod-scenario/1",
            "generator":{"kind":"graph","weights":[[0,1],[1,0]]},
            "tasks":["sauvageot"],"seed":7}"#,
    ),
    (
        "m2-conjugation",
        r#"{"version":"starmod-scenario/1","algebra":{"blocks":[2]},
            "generator":{"kind":"conjugation","unitary":[[[0,1],[1,0]]]},
            "tasks":["sauvageot"],"seed":8}"#,
    ),
];

/// Runs the built-in scenarios; returns `(name, pass, failing tasks)`.
pub fn selftest() -> Vec<(String, bool, Vec<String>)> {
    SELFTEST_SCENARIOS
        .iter()
        .map(|(name, text)| match Scenario::from_str(text) {
            Ok(s) => {
                let r = run_scenario(&s);
                let failing: Vec<String> = r
                    .tasks
                    .iter()
                    .filter(|t| !t.pass)
                    .map(|t| match &t.error {
                        Some(e) => format!("{} ({e})", t.name),
                        None => t.name.clone(),
                    })
                    .collect();
                (name.to_string(), r.passed(), failing)
            }
            Err(e) => (name.to_string(), false, vec![e.to_string()]),
        })
        .collect()
}

pub const DEMOS: [&str; 3] = ["p2-graph", "m2-conjugation", "fell"];

fn show(a: &AlgElement) -> String {
    let v = io::element_to_json(a);
    serde_json::to_string(&v).unwrap_or_default()
}

/// Text of a worked example.
pub fn demo(name: &str) -> Result<String> {
    use std::fmt::Write;
    let mut out = String::new();
    let w = &mut out;
    match name {
        "p2-graph" => {
            let weights = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
            let g = sauvageot::graph_laplacian_generator(&weights)?;
            let t = sauvageot::build_tangent(&g, crate::DEFAULT_TOL, false)?;
            let d1 = g.algebra().unit(0);
            let dx = t.exterior_derivative(&d1)?;
            let _ = writeln!(w, "two-point graph, weight 1 on the edge");
            let _ = writeln!(w, "generator matrix: {}", serde_json::to_string(&io::cmat_to_json(g.matrix())).unwrap_or_default());
            let _ = writeln!(w, "dim A = {}, dim E0 = {}, dim null = {}, dim E = {}", g.algebra().dim(), t.e0_dim(), t.e0.null_space().ncols(), t.module.dim());
            let _ = writeln!(w, "positivity margin = {:e}", t.positivity_margin);
            let _ = writeln!(w, "||d0(delta_1)||_m = {:.12}", t.module.norm_m(&dx));
            let _ = writeln!(w, "Gamma(delta_1, delta_1) = {}", show(&t.carre_du_champ(&d1, &d1)));
            let r = sauvageot::verify_derivation(&t, 1e-10);
            for (k, v) in r.residuals() {
                let _ = writeln!(w, "{k} residual = {v:e}");
            }
        }
        "m2-conjugation" => {
            let alg = CStarAlgebra::full_matrix(2)?;
            let u = alg.element(vec![CMat::from_row_slice(2, 2, &[linalg::ZERO, linalg::ONE, linalg::ONE, linalg::ZERO])])?;
            let g = sauvageot::conjugation_generator(&alg, &u)?;
            let v = sauvageot::validate_generator(&g, crate::DEFAULT_TOL);
            let t = sauvageot::build_tangent(&g, crate::DEFAULT_TOL, false)?;
            let e11 = alg.unit(alg.index_of(0, 0, 0));
            let _ = writeln!(w, "M2 with Delta(a) = (u a u* + u* a u)/2 - a, u = [[0,1],[1,0]]");
            let _ = writeln!(w, "generator valid: {}", v.passed());
            let _ = writeln!(w, "dim E0 = {}, dim E = {}", t.e0_dim(), t.module.dim());
            let _ = writeln!(w, "Gamma(e11, e11) = {}", show(&t.carre_du_champ(&e11, &e11)));
        }
        "fell" => {
            let bundle = FellBundleFinite::standard(&[1, 0, 2])?;
            let e = constructions::fell_bundle_module(&bundle)?;
            let d = constructions::fell_decompose(&e)?;
            let loc = structure::decompose_local(&e)?;
            let _ = writeln!(w, "bundle over 3 points with fiber dims [1, 0, 2]");
            let _ = writeln!(w, "module dim = {}, reality residual = {:e}", e.dim(), constructions::reality_residual(&e));
            let _ = writeln!(w, "recovered fiber dims = {:?}", d.bundle.fiber_dims);
            let _ = writeln!(w, "isomorphism residual = {:e}", d.check.residual());
            let pats: Vec<Vec<bool>> = loc
                .projections
                .iter()
                .map(|p| constructions::projection_pattern(e.algebra(), p, 1e-6))
                .collect::<Result<_>>()?;
            let _ = writeln!(w, "local decomposition projections = {pats:?}");
        }
        other => return err(format!("unknown demo `{other}`; expected one of {DEMOS:?}")),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_scenarios_pass() {
        for (name, pass, failing) in selftest() {
            assert!(pass, "{name}: {failing:?}");
        }
    }

    #[test]
    fn commutative_akemann_fails_with_error() {
        let s = Scenario::from_str(r#"{"version":"starmod-scenario/1","algebra":{"blocks":[1,1,1]},"tasks":["akemann"]}"#)
            .unwrap();
        let r = run_scenario(&s);
        assert_eq!(r.exit_code(), 1);
        assert!(r.tasks[0].error.as_deref().unwrap().starts_with("CommutativeAlgebra"));
    }

    #[test]
    fn p2_sauvageot_details() {
        let s = Scenario::from_str(SELFTEST_SCENARIOS[6].1).unwrap();
        let r = run_scenario(&s);
        let t = &r.tasks[0];
        assert_eq!(t.details["dim_E0"], Json::Int(2));
        assert!(matches!(t.details["positivity_margin"], Json::Float(m) if m >= 0.0));
        assert!(t.residuals.contains_key("leibniz"));
    }

    #[test]
    fn deterministic_output() {
        let s = Scenario::from_str(SELFTEST_SCENARIOS[0].1).unwrap();
        assert_eq!(run_scenario(&s).to_canonical(false), run_scenario(&s).to_canonical(false));
    }

    #[test]
    fn task_streams_are_independent_of_order() {
        let mut a = task_rng(5, "theorem12");
        let mut b = task_rng(5, "theorem12");
        let mut c = task_rng(5, "decompose");
        use rand::Rng;
        let (x, y, z): (u64, u64, u64) = (a.random(), b.random(), c.random());
        assert_eq!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn demos_run() {
        for d in DEMOS {
            assert!(!demo(d).unwrap().is_empty());
        }
        assert!(demo("nope").is_err());
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            r#"{"version":"starmod-scenario/2","tasks":["akemann"]}"#,
            r#"{"version":"starmod-scenario/1","tasks":[]}"#,
            r#"{"version":"starmod-scenario/1","tasks":["nope"]}"#,
            r#"{"version":"starmod-scenario/1","tasks":["akemann"],"tol":-1}"#,
            r#"{"version":"starmod-scenario/1","construction":{"name":"tensor","params":{"ideal_blocks":[0]}},"tasks":["verify_axioms"]}"#,
        ] {
            assert!(matches!(Scenario::from_str(bad), Err(StarError::ConfigParse(_))), "{bad}");
        }
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let s = Scenario::from_str(SELFTEST_SCENARIOS[2].1).unwrap();
        let r = run_scenario(&s);
        let e = emit_report(&r, Path::new("/nonexistent-dir/x/report.json"), false);
        assert!(matches!(e, Err(StarError::Io(_))));
    }
}
