//! New semigroups from old ones (similarity, rescaling, products) and finite
//! instances of condition (R).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::{dominates_values, GridSpec, PiecewiseAffineFunction, RealFunction};
use crate::semiflows::{make_koopman, Semiflow};
use crate::semigroups::{make_heat, HeatParams, SemigroupOperator};
use crate::tolerances::{LAW_TOL, TOL_ARITH, TOL_ZERO};

type IsoFn = Arc<dyn Fn(&RealFunction) -> Result<RealFunction> + Send + Sync>;

#[derive(Clone)]
pub enum IsoKind {
    Identity,
    /// `f ↦ c·f`, `c > 0`
    Scale {
        c: f64,
    },
    /// `f ↦ f ∘ ρ` with `ρ(x) = a·x + b`, `a ≠ 0`
    Reparam {
        a: f64,
        b: f64,
    },
    Custom {
        label: String,
        forward: IsoFn,
        inverse: IsoFn,
    },
}

/// A lattice isomorphism `V` together with its inverse.
#[derive(Clone)]
pub struct LatticeIso {
    pub kind: IsoKind,
}

impl fmt::Debug for LatticeIso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LatticeIso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            IsoKind::Identity => write!(f, "identity"),
            IsoKind::Scale { c } => write!(f, "scale({c})"),
            IsoKind::Reparam { a, b } => write!(f, "reparam({a},{b})"),
            IsoKind::Custom { label, .. } => write!(f, "{label}"),
        }
    }
}

impl LatticeIso {
    pub fn identity() -> Self {
        LatticeIso { kind: IsoKind::Identity }
    }

    pub fn scale(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::pre(format!("scaling iso needs c > 0, got {c}")));
        }
        Ok(LatticeIso { kind: IsoKind::Scale { c } })
    }

    pub fn reparam(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::pre(format!("reparametrisation needs finite a != 0, got a = {a}, b = {b}")));
        }
        Ok(LatticeIso { kind: IsoKind::Reparam { a, b } })
    }

    pub fn custom(
        label: impl Into<String>,
        forward: impl Fn(&RealFunction) -> Result<RealFunction> + Send + Sync + 'static,
        inverse: impl Fn(&RealFunction) -> Result<RealFunction> + Send + Sync + 'static,
    ) -> Self {
        LatticeIso {
            kind: IsoKind::Custom { label: label.into(), forward: Arc::new(forward), inverse: Arc::new(inverse) },
        }
    }

    pub fn forward(&self, f: &RealFunction) -> Result<RealFunction> {
        match &self.kind {
            IsoKind::Identity => Ok(f.clone()),
            IsoKind::Scale { c } => Ok(f.scale(*c)),
            IsoKind::Reparam { a, b } => f.compose_affine(*a, *b),
            IsoKind::Custom { forward, .. } => forward(f),
        }
    }

    pub fn inverse(&self, f: &RealFunction) -> Result<RealFunction> {
        match &self.kind {
            IsoKind::Identity => Ok(f.clone()),
            IsoKind::Scale { c } => Ok(f.scale(1.0 / c)),
            IsoKind::Reparam { a, b } => f.compose_affine(1.0 / a, -b / a),
            IsoKind::Custom { inverse, .. } => inverse(f),
        }
    }

    /// Factor by which conjugation stretches the reach of an operator.
    pub(crate) fn stretch(&self) -> Option<f64> {
        match &self.kind {
            IsoKind::Identity | IsoKind::Scale { .. } => Some(1.0),
            IsoKind::Reparam { a, .. } => Some(a.abs()),
            IsoKind::Custom { .. } => None,
        }
    }

    /// Checks `V⁻¹V = id`, `V(f ∨ g) = Vf ∨ Vg` and positivity of `V`, `V⁻¹`.
    pub fn validate(&self, corpus: &[RealFunction], grid: &GridSpec) -> Result<IsoValidation> {
        let (mut roundtrip, mut lattice, mut min_image) = (0.0f64, 0.0f64, f64::INFINITY);
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        for (i, f) in corpus.iter().enumerate() {
            let fv = f.sample(grid)?;
            let fwd = self.forward(f)?;
            roundtrip = roundtrip.max(dist(&self.inverse(&fwd)?.sample(grid)?, &fv));
            if fv.iter().all(|v| *v >= -TOL_ZERO) {
                for img in [fwd.sample(grid)?, self.inverse(f)?.sample(grid)?] {
                    min_image = min_image.min(img.iter().copied().fold(f64::INFINITY, f64::min));
                }
            }
            let g = &corpus[(i + 1) % corpus.len()];
            let lhs = self.forward(&f.sup_lazy(g)?)?.sample(grid)?;
            let rhs = fwd.sup_lazy(&self.forward(g)?)?.sample(grid)?;
            lattice = lattice.max(dist(&lhs, &rhs));
        }
        Ok(IsoValidation {
            iso: self.to_string(),
            roundtrip_defect: roundtrip,
            lattice_defect: lattice,
            min_image_of_positive: min_image,
            pass: roundtrip <= TOL_ARITH && lattice <= TOL_ARITH && min_image >= -TOL_ARITH,
        })
    }
}

impl FromStr for LatticeIso {
    type Err = Error;
    fn from_str(src: &str) -> Result<Self> {
        let s = src.trim();
        let bad = || Error::Parse(format!("unknown lattice isomorphism '{src}'"));
        if s == "identity" {
            return Ok(LatticeIso::identity());
        }
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let args: Vec<f64> = s[open + 1..s.len() - 1]
            .split(',')
            .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (&s[..open], args.as_slice()) {
            ("scale", [c]) => LatticeIso::scale(*c),
            ("reparam", [a, b]) => LatticeIso::reparam(*a, *b),
            ("reparam", [a]) => LatticeIso::reparam(*a, 0.0),
            _ => Err(bad()),
        }
    }
}

impl Serialize for LatticeIso {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if let IsoKind::Custom { label, .. } = &self.kind {
            return Err(serde::ser::Error::custom(format!("custom isomorphism '{label}' has no registry form")));
        }
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LatticeIso {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoValidation {
    pub iso: String,
    pub roundtrip_defect: f64,
    pub lattice_defect: f64,
    pub min_image_of_positive: f64,
    pub pass: bool,
}

/// Nonnegative test functions used to validate constructions.
pub fn standard_corpus() -> Vec<RealFunction> {
    let pa = |p: Result<PiecewiseAffineFunction>| RealFunction::from(p.expect("corpus function"));
    vec![
        RealFunction::hat(0.0, 1.0, 1.0),
        pa(PiecewiseAffineFunction::hat(1.5, 0.5, 2.0)),
        pa(PiecewiseAffineFunction::from_points(&[-3.0, -2.0, -1.0, 0.0], &[0.0, 1.0, 1.0, 0.0], 0.0, 0.0)),
        RealFunction::parse("gauss(1)").expect("corpus function"),
        RealFunction::parse("1/(1+x^2)").expect("corpus function"),
        RealFunction::constant(1.0),
    ]
}

/// Grid used when a construction validates its inputs.
pub fn validation_grid() -> GridSpec {
    GridSpec::new(-10.0, 10.0, 401).expect("static grid")
}

/// `V⁻¹ T(t) V`, after validating `V` on the standard corpus.
pub fn similar(op: &SemigroupOperator, iso: &LatticeIso) -> Result<SemigroupOperator> {
    let v = iso.validate(&standard_corpus(), &validation_grid())?;
    if !v.pass {
        return Err(Error::pre(format!(
            "{iso} is not a lattice isomorphism on the corpus: roundtrip {:e}, lattice {:e}, min image {:e}",
            v.roundtrip_defect, v.lattice_defect, v.min_image_of_positive
        )));
    }
    Ok(SemigroupOperator::Similar { inner: Box::new(op.clone()), iso: iso.clone() })
}

/// `e^{μt} T(αt)`.
pub fn rescale(op: &SemigroupOperator, mu: f64, alpha: f64) -> Result<SemigroupOperator> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::pre(format!("rescaling needs α > 0, got {alpha}")));
    }
    if !mu.is_finite() {
        return Err(Error::pre("μ must be finite"));
    }
    Ok(SemigroupOperator::Rescaled { inner: Box::new(op.clone()), mu, alpha })
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationRow {
    pub function: String,
    pub s: f64,
    pub t: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutationReport {
    pub left: String,
    pub right: String,
    pub rows: Vec<CommutationRow>,
    pub max_defect: f64,
    pub tolerance: f64,
    pub grid: GridSpec,
    pub pass: bool,
}

/// `max |S(t)R(s)f − R(s)S(t)f|` over the grid.
pub fn commutation_defect(
    left: &SemigroupOperator,
    right: &SemigroupOperator,
    f: &RealFunction,
    s: f64,
    t: f64,
    grid: &GridSpec,
) -> Result<f64> {
    let a = left.apply(t, &right.apply(s, f)?)?.sample(grid)?;
    let b = right.apply(s, &left.apply(t, f)?)?.sample(grid)?;
    Ok(a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
}

pub fn commutation_report(
    left: &SemigroupOperator,
    right: &SemigroupOperator,
    corpus: &[RealFunction],
    pairs: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<CommutationReport> {
    let mut rows = Vec::new();
    for f in corpus {
        for &(s, t) in pairs {
            rows.push(CommutationRow {
                function: f.label().to_string(),
                s,
                t,
                defect: commutation_defect(left, right, f, s, t, grid)?,
            });
        }
    }
    let max_defect = rows.iter().fold(0.0f64, |m, r| m.max(r.defect));
    Ok(CommutationReport {
        left: left.to_string(),
        right: right.to_string(),
        rows,
        max_defect,
        tolerance: LAW_TOL,
        grid: *grid,
        pass: max_defect <= LAW_TOL,
    })
}

pub const DEFAULT_COMMUTE_PAIRS: [(f64, f64); 3] = [(0.1, 0.2), (0.5, 0.25), (1.0, 1.0)];

/// `t ↦ S(t)R(t)`, built only if `S` and `R` commute on the corpus
/// (the standard corpus plus the identity function) at the given pairs.
pub fn product(
    left: &SemigroupOperator,
    right: &SemigroupOperator,
    pairs: &[(f64, f64)],
    grid: &GridSpec,
) -> Result<SemigroupOperator> {
    if pairs.is_empty() {
        return Err(Error::pre("no commutation pairs"));
    }
    let mut corpus = standard_corpus();
    corpus.push(RealFunction::identity());
    let report = commutation_report(left, right, &corpus, pairs, grid)?;
    if !report.pass {
        let worst = report.rows.iter().max_by(|a, b| a.defect.total_cmp(&b.defect)).expect("nonempty");
        return Err(Error::CheckFailed(format!(
            "{left} and {right} do not commute: defect {:e} on {} at (s, t) = ({}, {})",
            worst.defect, worst.function, worst.s, worst.t
        )));
    }
    Ok(SemigroupOperator::Product {
        left: Box::new(left.clone()),
        right: Box::new(right.clone()),
        commutation: Some(Arc::new(report)),
    })
}

fn default_sigmas() -> f64 {
    HeatParams::default().halfwidth_sigmas
}
fn default_points() -> usize {
    HeatParams::default().points
}
fn default_alpha() -> f64 {
    1.0
}
fn default_pairs() -> Vec<(f64, f64)> {
    DEFAULT_COMMUTE_PAIRS.to_vec()
}

/// JSON description of an operator, e.g.
/// `{"op":"product","left":{"op":"heat"},"right":{"op":"translation"}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum SemigroupSpec {
    Translation,
    Heat {
        #[serde(default = "default_sigmas")]
        halfwidth_sigmas: f64,
        #[serde(default = "default_points")]
        points: usize,
    },
    Koopman {
        flow: Semiflow,
    },
    Similar {
        inner: Box<SemigroupSpec>,
        iso: LatticeIso,
    },
    Rescale {
        inner: Box<SemigroupSpec>,
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Product {
        left: Box<SemigroupSpec>,
        right: Box<SemigroupSpec>,
        #[serde(default = "default_pairs")]
        pairs: Vec<(f64, f64)>,
    },
}

impl SemigroupSpec {
    pub fn build(&self) -> Result<SemigroupOperator> {
        match self {
            SemigroupSpec::Translation => Ok(SemigroupOperator::Translation),
            SemigroupSpec::Heat { halfwidth_sigmas, points } => make_heat(*halfwidth_sigmas, *points),
            SemigroupSpec::Koopman { flow } => make_koopman(flow),
            SemigroupSpec::Similar { inner, iso } => similar(&inner.build()?, iso),
            SemigroupSpec::Rescale { inner, mu, alpha } => rescale(&inner.build()?, *mu, *alpha),
            SemigroupSpec::Product { left, right, pairs } => {
                product(&left.build()?, &right.build()?, pairs, &validation_grid())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureEvidence {
    /// Family member tried as the bound.
    pub bound_index: usize,
    /// Later member that no positive multiple of keeps below the bound.
    pub member_index: usize,
    pub x: f64,
    pub member_value: f64,
    pub bound_value: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ConditionR {
    Witness {
        lambdas: Vec<f64>,
        bound: RealFunction,
        /// `max (λ_n u_n − bound)` over members and grid.
        worst_violation: f64,
        verified: bool,
    },
    Failure {
        evidence: Vec<FailureEvidence>,
        /// Only members with a strictly larger successor can be refuted by the
        /// finite family; the last member is refuted by the continuation.
        unrefuted: Vec<usize>,
    },
}

/// Scalars `λ_n > 0` with `λ_n u_n` order bounded, or evidence that no
/// family member bounds the scaled family.
pub fn condition_r_witness(
    family: &[RealFunction],
    grid: &GridSpec,
    candidate_bound: Option<&RealFunction>,
) -> Result<ConditionR> {
    if family.is_empty() {
        return Err(Error::pre("empty family"));
    }
    let values: Vec<Vec<f64>> = family.iter().map(|f| f.sample(grid)).collect::<Result<_>>()?;
    for (f, v) in family.iter().zip(&values) {
        if let Some(i) = v.iter().position(|y| *y < -TOL_ZERO) {
            return Err(Error::pre(format!("family member {} is negative at x = {}", f.label(), grid.point(i))));
        }
    }

    if let Some(b) = candidate_bound {
        let bv = b.sample(grid)?;
        let mut lambdas = Vec::with_capacity(family.len());
        let mut worst = f64::NEG_INFINITY;
        for v in &values {
            // ‖u_n‖_b, infinite where b vanishes under a positive member
            let norm = v.iter().zip(&bv).fold(0.0f64, |m, (u, b)| {
                if *u <= TOL_ZERO {
                    m
                } else if *b <= 0.0 {
                    f64::INFINITY
                } else {
                    m.max(u / b)
                }
            });
            let lambda = 1.0 / norm.max(1.0);
            let scaled: Vec<f64> = v.iter().map(|u| lambda * u).collect();
            worst = worst.max(dominates_values(&scaled, &bv, grid, 0.0).worst_violation);
            lambdas.push(lambda);
        }
        return Ok(ConditionR::Witness {
            verified: worst <= TOL_ARITH && lambdas.iter().all(|l| *l > 0.0),
            lambdas,
            bound: crate::ru_conv::portable(b, grid)?,
            worst_violation: worst,
        });
    }

    let supports: Option<Vec<[f64; 2]>> = family.iter().map(|f| f.cone().and_then(|c| c.compact_support)).collect();
    let growing =
        supports.as_ref().is_some_and(|s| s.len() >= 2 && s.windows(2).all(|w| w[1][0] < w[0][0] && w[1][1] > w[0][1]));
    if growing {
        let mut evidence = Vec::new();
        let mut unrefuted = Vec::new();
        for (bi, bv) in values.iter().enumerate() {
            let found = values.iter().enumerate().skip(bi + 1).find_map(|(mi, mv)| {
                mv.iter().zip(bv).position(|(u, b)| *u > TOL_ZERO && b.abs() <= TOL_ZERO).map(|i| FailureEvidence {
                    bound_index: bi,
                    member_index: mi,
                    x: grid.point(i),
                    member_value: mv[i],
                    bound_value: bv[i],
                })
            });
            match found {
                Some(e) => evidence.push(e),
                None => unrefuted.push(bi),
            }
        }
        if !evidence.is_empty() {
            return Ok(ConditionR::Failure { evidence, unrefuted });
        }
    }

    // finitely many members: their supremum bounds them all with λ = 1
    let sup: Vec<f64> = (0..grid.n).map(|i| values.iter().fold(0.0f64, |m, v| m.max(v[i]))).collect();
    Ok(ConditionR::Witness {
        lambdas: vec![1.0; family.len()],
        bound: RealFunction::sampled(*grid, sup)?.with_label("pointwise sup"),
        worst_violation: 0.0,
        verified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{ConeFlag, Expr};
    use crate::semigroups::{check_positivity, check_semigroup_law, make_translation};

    fn grid(r: f64, n: usize) -> GridSpec {
        GridSpec::symmetric(r, n).unwrap()
    }

    #[test]
    fn iso_registry() {
        for s in ["identity", "scale(2)", "reparam(0.5,0)"] {
            assert_eq!(s.parse::<LatticeIso>().unwrap().to_string(), s);
        }
        assert!("scale(-1)".parse::<LatticeIso>().is_err());
        assert!("reparam(0,1)".parse::<LatticeIso>().is_err());
        assert!("twist(1)".parse::<LatticeIso>().is_err());
    }

    #[test]
    fn iso_validation_catches_non_lattice_maps() {
        let g = validation_grid();
        assert!(LatticeIso::reparam(-2.0, 1.0).unwrap().validate(&standard_corpus(), &g).unwrap().pass);
        let neg = LatticeIso::custom("negate", |f| Ok(f.scale(-1.0)), |f| Ok(f.scale(-1.0)));
        let v = neg.validate(&standard_corpus(), &g).unwrap();
        assert!(!v.pass);
        assert!(similar(&make_translation(), &neg).is_err());
    }

    #[test]
    fn similar_reparam_changes_speed() {
        let g = grid(5.0, 201);
        let f = RealFunction::hat(0.3, 1.0, 1.0);
        for a in [0.5, 2.0] {
            let s = similar(&make_translation(), &LatticeIso::reparam(a, 0.0).unwrap()).unwrap();
            let out = s.apply(0.4, &f).unwrap();
            for x in g.points() {
                // (V⁻¹ T(t) V f)(x) = f(ρ(ρ⁻¹(x) + t)) = f(x + a·t)
                assert!((out.eval(x) - f.eval(x + a * 0.4)).abs() < 1e-12);
            }
        }
        let s = similar(&make_translation(), &LatticeIso::scale(2.0).unwrap()).unwrap();
        assert!((s.apply(0.4, &f).unwrap().eval(0.0) - f.eval(0.4)).abs() < 1e-15);
    }

    #[test]
    fn rescale_examples() {
        let tr = make_translation();
        let r = rescale(&tr, 0.0, 2.0).unwrap();
        let out = r.apply(0.5, &RealFunction::hat(0.0, 1.0, 1.0)).unwrap();
        assert_eq!(out.eval(-1.0), 1.0);
        let r = rescale(&tr, std::f64::consts::LN_2, 1.0).unwrap();
        assert!((r.apply(1.0, &RealFunction::constant(1.0)).unwrap().eval(3.0) - 2.0).abs() < 1e-15);
        assert!(rescale(&tr, 0.0, 0.0).is_err());
    }

    #[test]
    fn product_of_translations_doubles_speed() {
        let g = grid(5.0, 101);
        let p = product(&make_translation(), &make_translation(), &DEFAULT_COMMUTE_PAIRS, &g).unwrap();
        let f = RealFunction::hat(0.0, 1.0, 1.0);
        assert_eq!(p.apply(0.5, &f).unwrap().eval(-1.0), 1.0);
    }

    #[test]
    fn shift_and_dilation_do_not_commute() {
        let g = grid(5.0, 101);
        let dil = SemigroupOperator::Koopman(Semiflow::decay(1.0));
        let d = commutation_defect(&make_translation(), &dil, &RealFunction::identity(), 1.0, 1.0, &g).unwrap();
        assert!((d - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(matches!(product(&make_translation(), &dil, &[(1.0, 1.0)], &g), Err(Error::CheckFailed(_))));
    }

    #[test]
    fn constructions_satisfy_laws() {
        let g = grid(5.0, 101);
        let tr = make_translation();
        let ops = [
            similar(&tr, &LatticeIso::reparam(0.5, 1.0).unwrap()).unwrap(),
            rescale(&SemigroupOperator::Koopman(Semiflow::decay(1.0)), -0.3, 1.5).unwrap(),
        ];
        for op in &ops {
            for f in standard_corpus() {
                assert!(check_semigroup_law(op, &f, &[(0.2, 0.3), (0.0, 0.4)], &g).unwrap().pass);
            }
            assert!(check_positivity(op, &standard_corpus(), &[0.3, 1.0], &g).unwrap().pass);
        }
    }

    #[test]
    fn spec_round_trip() {
        let j = r#"{"op":"rescale","inner":{"op":"similar","inner":{"op":"koopman","flow":"decay(1)"},"iso":"scale(2)"},"mu":0.5}"#;
        let spec: SemigroupSpec = serde_json::from_str(j).unwrap();
        let op = spec.build().unwrap();
        assert_eq!(op.to_string(), "rescale(similar(koopman(decay(1)),scale(2)),0.5,1)");
        assert!(serde_json::from_str::<SemigroupSpec>(r#"{"op":"heat","points":"x"}"#).is_err());
        assert!(serde_json::from_str::<SemigroupSpec>(r#"{"op":"koopman","flow":"poly_drift(2)"}"#)
            .unwrap()
            .build()
            .is_err());
    }

    fn plateau(n: f64) -> RealFunction {
        RealFunction::closed(Expr::plateau(n)).with_cone(ConeFlag::supported_on(-n - 1.0, n + 1.0))
    }

    #[test]
    fn condition_r_examples() {
        let g = grid(50.0, 10001);
        let family: Vec<RealFunction> = (1..=10).map(|n| plateau(n as f64)).collect();
        match condition_r_witness(&family, &g, None).unwrap() {
            ConditionR::Failure { evidence, unrefuted } => {
                assert_eq!(evidence.len(), 9);
                assert_eq!(unrefuted, vec![9]);
                for e in &evidence {
                    assert!(e.member_index > e.bound_index && e.member_value > 0.0 && e.bound_value == 0.0);
                }
            }
            other => panic!("expected failure, got {other:?}"),
        }
        let consts: Vec<RealFunction> = (1..=5).map(|n| RealFunction::constant(n as f64)).collect();
        match condition_r_witness(&consts, &g, Some(&RealFunction::constant(1.0))).unwrap() {
            ConditionR::Witness { lambdas, verified, .. } => {
                assert!(verified);
                for (n, l) in lambdas.iter().enumerate() {
                    assert!((l - 1.0 / (n + 1) as f64).abs() < 1e-15);
                }
            }
            other => panic!("{other:?}"),
        }
        let u = RealFunction::hat(0.0, 2.0, 1.0);
        match condition_r_witness(std::slice::from_ref(&u), &g, Some(&u)).unwrap() {
            ConditionR::Witness { lambdas, verified, .. } => assert!(verified && lambdas == vec![1.0]),
            other => panic!("{other:?}"),
        }
        assert!(condition_r_witness(&[RealFunction::identity()], &g, None).is_err());
    }
}
