//! Bigraded de Rham calculus: the components `d_F`, `d_perp` and the
//! boundary of the exterior derivative, their cohomology on Fourier blocks,
//! basic cohomology, and the small-divisor certificate for the leaf slope.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quotient_dim, SparseMatrix};
use crate::model::{operator_matrix, BlockKey, Component, Family, Form, ModeWindow, Model, Monomial};
use crate::scalar::Scalar;

/// Applies a differential component to a form of the given model.
pub fn differential(model: &Arc<Model>, comp: Component, a: &Form) -> Result<Form> {
    if !Arc::ptr_eq(model, a.model()) && **model != **a.model() {
        return Err(Error::ModelMismatch);
    }
    Ok(a.differential(comp))
}

/// Basis of bidegree `(r, s)` in a block; empty when out of range.
pub(crate) fn basis(model: &Model, key: &BlockKey, r: i64, s: i64) -> Vec<Monomial> {
    if r < 0 || s < 0 || r as usize > model.leaf_dim() || s as usize > model.codim() {
        return Vec::new();
    }
    model.block_basis(key, r as usize, s as usize)
}

pub(crate) fn degree_basis(model: &Model, key: &BlockKey, k: i64) -> Vec<Monomial> {
    if k < 0 || k as usize > model.num_generators() {
        return Vec::new();
    }
    model.block_basis_degree(key, k as usize)
}

pub(crate) fn component_matrix(
    model: &Model,
    comp: Component,
    src: &[Monomial],
    tgt: &[Monomial],
) -> Result<SparseMatrix> {
    operator_matrix(src, tgt, |m| model.differentiate(comp, m))
}

// ---------------------------------------------------------------------------
// Small-divisor certificate

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    /// `|m . alpha|^{-1} <= c * |m|^n` for all nonzero integer `m`, with
    /// `|m|` the max norm (hence also any larger norm). `c` is an exact
    /// rational written as `p/q`.
    Diophantine {
        c: String,
        n: u32,
    },
    Resonant {
        witness: Vec<i64>,
    },
    Undecided {
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiophantineCertificate {
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Degree over Q of the real field generated by the entries of alpha.
    pub field_degree: usize,
    /// Primitive integer generators of the resonance lattice.
    pub resonance_lattice: Vec<Vec<i64>>,
    pub method: String,
}

impl DiophantineCertificate {
    pub fn is_diophantine(&self) -> bool {
        matches!(self.verdict, Verdict::Diophantine { .. })
    }

    /// The exact constant `c` of a Diophantine verdict.
    pub fn constant(&self) -> Option<BigRational> {
        match &self.verdict {
            Verdict::Diophantine { c, .. } => BigRational::from_str(c).ok(),
            _ => None,
        }
    }

    pub fn exponent(&self) -> Option<u32> {
        match &self.verdict {
            Verdict::Diophantine { n, .. } => Some(*n),
            _ => None,
        }
    }
}

/// Rank over GF(2) of a set of 2-bit vectors.
fn gf2_rank(vs: &[usize]) -> usize {
    let mut basis: Vec<usize> = Vec::new();
    for &v in vs {
        let mut x = v;
        for &b in &basis {
            x = x.min(x ^ b);
        }
        if x != 0 {
            basis.push(x);
            basis.sort_unstable_by(|a, b| b.cmp(a));
        }
    }
    basis.len()
}

/// Certifies whether `m . alpha` admits a polynomial lower bound.
///
/// A resonance is found by exact linear algebra on the rational coordinates
/// of alpha. Otherwise, with `K` the real field generated by alpha (degree
/// `D`), `den` a common denominator of all coordinates and `A` an upper bound
/// for `sum_j |sigma(alpha_j)|` over all embeddings, the norm of the nonzero
/// algebraic integer `den * (m . alpha)` is at least 1, so
/// `|m . alpha| >= 1 / (den^D * A^(D-1) * |m|^(D-1))`.
pub fn diophantine_certificate(alpha: &[Scalar]) -> Result<DiophantineCertificate> {
    let model = Model::torus(alpha.to_vec(), None)?;
    certificate_for(&model)
}

pub(crate) fn certificate_for(model: &Model) -> Result<DiophantineCertificate> {
    let t =
        model.torus_frame().ok_or_else(|| Error::UnsupportedModel("small-divisor certificates need a torus".into()))?;
    let field = model.field();
    let rad = |b: usize| -> u64 {
        let mut r = 1u64;
        let rs = field.radicands();
        if b & 2 != 0 {
            r *= rs[0];
        }
        if b & 4 != 0 {
            r *= rs[1];
        }
        r
    };
    let used: Vec<usize> = (0..8)
        .filter(|b| b & 1 == 0 && t.alpha.iter().any(|a| !a.coeff(*b).is_zero()))
        .map(|b| b >> 1)
        .filter(|&v| v != 0)
        .collect();
    let degree = 1usize << gf2_rank(&used);
    let lattice = model.resonance_lattice().to_vec();
    if let Some(w) = lattice.first() {
        return Ok(DiophantineCertificate {
            verdict: Verdict::Resonant { witness: w.clone() },
            field_degree: degree,
            resonance_lattice: lattice,
            method: "exact kernel of the rational coordinate matrix of alpha".into(),
        });
    }
    let mut den = BigInt::one();
    let mut a_bound = BigRational::zero();
    for a in &t.alpha {
        den = den.lcm(&a.denominator_lcm());
        for b in (0..8).filter(|b| b & 1 == 0) {
            let q = a.coeff(b);
            if q.is_zero() {
                continue;
            }
            let r = rad(b);
            let s = r.sqrt();
            let up = if s * s == r { s } else { s + 1 };
            a_bound += q.abs() * BigRational::from_integer(BigInt::from(up));
        }
    }
    let d = degree as u32;
    let c = BigRational::from_integer(num_traits::pow(den, degree)) * num_traits::pow(a_bound, degree - 1);
    Ok(DiophantineCertificate {
        verdict: Verdict::Diophantine { c: c.to_string(), n: d - 1 },
        field_degree: degree,
        resonance_lattice: lattice,
        method: format!(
            "norm bound in a real field of degree {degree}: |N(den * m.alpha)| >= 1 with conjugates bounded by |m| * sum_j |alpha_j|"
        ),
    })
}

// ---------------------------------------------------------------------------
// Identity suite

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub passed: bool,
    /// Number of basis elements and random forms the identity was tested on.
    pub checked: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub checks: Vec<IdentityCheck>,
    /// Whether the boundary component vanishes identically on the basis.
    pub boundary_vanishes: bool,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Window used for identity checks when a model has Fourier or radial
/// directions.
pub fn identity_window(model: &Model) -> ModeWindow {
    let bound = if model.mode_dim() > 2 { 1 } else { 2 };
    ModeWindow { bound, l_min: -2, l_max: 2 }
}

/// All monomials of all degrees in the identity window.
pub fn window_monomials(model: &Model, window: &ModeWindow) -> Vec<Monomial> {
    let all = (1u32 << model.num_generators()) - 1;
    model.block_keys(window).iter().flat_map(|k| (0..=all).map(move |mask| model.block_monomial(k, mask))).collect()
}

pub(crate) fn random_form(model: &Arc<Model>, pool: &[Monomial], rng: &mut ChaCha8Rng, terms: usize) -> Form {
    let mut f = Form::zero(model);
    for _ in 0..terms {
        let m = pool[rng.random_range(0..pool.len())].clone();
        let c: i64 = rng.random_range(-3..=3);
        f.add_term(m, &Scalar::from_int(c));
    }
    f
}

type Op<'a> = Box<dyn Fn(&Form) -> Form + Sync + 'a>;

/// Checks the five relations among `d_F`, `d_perp` and the boundary that
/// together are equivalent to `d^2 = 0`, plus `d^2 = 0` itself and the
/// graded Leibniz rule for `d`, `d_F`, `d_perp`. Every monomial in the
/// window is tested, then `samples` random forms (and random pairs for
/// Leibniz) drawn with the given seed.
pub fn verify_decomposition_identities(model: &Arc<Model>, samples: usize, seed: u64) -> IdentityReport {
    let window = identity_window(model);
    let pool = window_monomials(model, &window);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let randoms: Vec<Form> = (0..samples).map(|_| random_form(model, &pool, &mut rng, 4)).collect();
    let basis: Vec<Form> = pool.iter().map(|m| Form::monomial(model, m.clone(), Scalar::one()).unwrap()).collect();

    let d = |c: Component| move |f: &Form| f.differential(c);
    let (df, dp, bd, dd) = (d(Component::DF), d(Component::DPerp), d(Component::Boundary), d(Component::D));
    let sum = |a: Form, b: Form| a.plus(&b).unwrap();
    let identities: Vec<(&str, Op)> = vec![
        ("d_F^2 = 0", Box::new(move |f: &Form| df(&df(f)))),
        ("boundary^2 = 0", Box::new(move |f: &Form| bd(&bd(f)))),
        (
            "d_perp^2 + boundary d_F + d_F boundary = 0",
            Box::new(move |f: &Form| sum(sum(dp(&dp(f)), bd(&df(f))), df(&bd(f)))),
        ),
        ("d_F d_perp + d_perp d_F = 0", Box::new(move |f: &Form| sum(df(&dp(f)), dp(&df(f))))),
        ("boundary d_perp + d_perp boundary = 0", Box::new(move |f: &Form| sum(bd(&dp(f)), dp(&bd(f))))),
        ("d^2 = 0", Box::new(move |f: &Form| dd(&dd(f)))),
    ];
    let mut checks: Vec<IdentityCheck> = identities
        .par_iter()
        .map(|(name, op)| {
            let bad = basis.iter().chain(&randoms).find(|f| !op(f).is_zero());
            IdentityCheck {
                name: name.to_string(),
                passed: bad.is_none(),
                checked: basis.len() + randoms.len(),
                counterexample: bad.map(|f| f.to_string()),
            }
        })
        .collect();

    let pairs: Vec<(Form, Form)> = (0..samples.max(1))
        .map(|_| (random_form(model, &pool, &mut rng, 2), random_form(model, &pool, &mut rng, 2)))
        .collect();
    for comp in [Component::D, Component::DF, Component::DPerp] {
        let bad = pairs.iter().find(|(a, b)| leibniz_defect(a, b, comp).is_some_and(|x| !x.is_zero()));
        checks.push(IdentityCheck {
            name: format!("Leibniz rule for {}", comp.name()),
            passed: bad.is_none(),
            checked: pairs.len(),
            counterexample: bad.map(|(a, b)| format!("a = {a}; b = {b}")),
        });
    }
    let boundary_vanishes = basis.iter().all(|f| f.differential(Component::Boundary).is_zero());
    IdentityReport { checks, boundary_vanishes }
}

/// `D(a ^ b) - D(a) ^ b - (-1)^{deg a} a ^ D(b)` for homogeneous-degree
/// parts of `a`; `None` if the wedge fails.
fn leibniz_defect(a: &Form, b: &Form, comp: Component) -> Option<Form> {
    let mut total = Form::zero(a.model());
    for (m, c) in a.terms() {
        let am = Form::monomial(a.model(), m.clone(), c.clone()).ok()?;
        let sign = if m.degree() % 2 == 0 { Scalar::one() } else { Scalar::from_int(-1) };
        let lhs = am.wedge(b).ok()?.differential(comp);
        let r1 = am.differential(comp).wedge(b).ok()?;
        let r2 = am.wedge(&b.differential(comp)).ok()?.scale(&sign);
        total = total.plus(&lhs.minus(&r1).ok()?.minus(&r2).ok()?).ok()?;
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// Cohomology dimensions

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimEntry {
    pub r: usize,
    pub s: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<i64>,
    pub dim: usize,
}

/// Dimensions indexed by bidegree `(r, s)` and, on conic models, by the
/// homogeneity degree `l`. For the full differential the index `r` is the
/// total degree and `s` is always 0.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BigradedDims {
    pub leaf_dim: usize,
    pub codim: usize,
    pub total_degree: bool,
    pub entries: Vec<DimEntry>,
}

impl BigradedDims {
    pub fn get(&self, r: usize, s: usize) -> usize {
        self.entries.iter().filter(|e| e.r == r && e.s == s).map(|e| e.dim).sum()
    }

    pub fn get_l(&self, l: i64, r: usize, s: usize) -> usize {
        self.entries.iter().filter(|e| e.r == r && e.s == s && e.l == Some(l)).map(|e| e.dim).sum()
    }

    /// Dimension at signed indices, zero outside the table.
    pub fn at(&self, r: i64, s: i64) -> usize {
        if r < 0 || s < 0 {
            0
        } else {
            self.get(r as usize, s as usize)
        }
    }

    pub fn at_l(&self, l: i64, r: i64, s: i64) -> usize {
        if r < 0 || s < 0 {
            0
        } else {
            self.get_l(l, r as usize, s as usize)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyReport {
    pub operator: Component,
    pub family: Family,
    pub window: ModeWindow,
    pub dims: BigradedDims,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<DiophantineCertificate>,
    /// "smooth" when the small-divisor certificate holds (or no Fourier
    /// directions exist), otherwise "formal (non-Diophantine)".
    pub status: String,
    /// Some contribution comes from a nonzero resonant mode, so the untruncated
    /// group is infinite-dimensional and `dims` is a window count.
    pub unbounded: bool,
    /// Nonzero modes in the window with a nonzero contribution.
    pub resonant_modes: Vec<Vec<i64>>,
    /// Every block whose leafwise frequency is nonzero was computed and
    /// found acyclic.
    pub nonresonant_blocks_exact: bool,
}

pub(crate) fn status_label(cert: &Option<DiophantineCertificate>) -> String {
    match cert {
        Some(c) if !c.is_diophantine() => "formal (non-Diophantine)".into(),
        _ => "smooth".into(),
    }
}

/// True when the block's leafwise frequency is nonzero (so the leafwise
/// complex on it is acyclic).
pub(crate) fn block_is_nonresonant(model: &Model, key: &BlockKey) -> bool {
    if key.phi != 0 {
        return true;
    }
    match model.torus_frame() {
        Some(t) => !t.frequency(&key.mode).is_zero(),
        None => false,
    }
}

/// Cohomology of one block for a bigraded component at `(r, s)`.
pub(crate) fn block_dim(model: &Model, key: &BlockKey, comp: Component, r: i64, s: i64) -> Result<usize> {
    let (a, b) = comp.shift().expect("graded component");
    let c0 = basis(model, key, r - a as i64, s - b as i64);
    let c1 = basis(model, key, r, s);
    if c1.is_empty() {
        return Ok(0);
    }
    let c2 = basis(model, key, r + a as i64, s + b as i64);
    let d_in = component_matrix(model, comp, &c0, &c1)?;
    let d_out = component_matrix(model, comp, &c1, &c2)?;
    quotient_dim(&d_out, &d_in)
}

/// Cohomology of one block for the full differential in total degree `k`.
pub(crate) fn block_total_dim(model: &Model, key: &BlockKey, k: i64) -> Result<usize> {
    let c0 = degree_basis(model, key, k - 1);
    let c1 = degree_basis(model, key, k);
    if c1.is_empty() {
        return Ok(0);
    }
    let c2 = degree_basis(model, key, k + 1);
    let d_in = component_matrix(model, Component::D, &c0, &c1)?;
    let d_out = component_matrix(model, Component::D, &c1, &c2)?;
    quotient_dim(&d_out, &d_in)
}

/// Dimensions of the cohomology of a differential component, computed
/// exactly block by block over the window.
pub fn cohomology_dims(model: &Arc<Model>, comp: Component, window: &ModeWindow) -> Result<CohomologyReport> {
    let keys = model.block_keys(window);
    let (p, q) = (model.leaf_dim() as i64, model.codim() as i64);
    let cells: Vec<(i64, i64)> = if comp == Component::D {
        (0..=p + q).map(|k| (k, 0)).collect()
    } else {
        (0..=p).flat_map(|r| (0..=q).map(move |s| (r, s))).collect()
    };
    let per_block: Vec<(BlockKey, Vec<usize>)> = keys
        .par_iter()
        .map(|key| {
            let dims = cells
                .iter()
                .map(|&(r, s)| match comp {
                    Component::D => block_total_dim(model, key, r),
                    _ => block_dim(model, key, comp, r, s),
                })
                .collect::<Result<Vec<usize>>>()?;
            Ok((key.clone(), dims))
        })
        .collect::<Result<_>>()?;

    let mut totals: BTreeMap<(i64, usize), usize> = BTreeMap::new();
    let mut resonant_modes: Vec<Vec<i64>> = Vec::new();
    let mut nonresonant_exact = true;
    for (key, dims) in &per_block {
        let nonzero = dims.iter().any(|&d| d > 0);
        if block_is_nonresonant(model, key) && nonzero && comp != Component::D {
            nonresonant_exact = false;
        }
        if nonzero && key.mode.iter().any(|&k| k != 0) && !resonant_modes.contains(&key.mode) {
            resonant_modes.push(key.mode.clone());
        }
        for (cell, d) in dims.iter().enumerate() {
            *totals.entry((key.l, cell)).or_default() += d;
        }
    }
    resonant_modes.sort();
    let radial = model.is_radial();
    let entries = totals
        .into_iter()
        .map(|((l, cell), dim)| DimEntry {
            r: cells[cell].0 as usize,
            s: cells[cell].1 as usize,
            l: radial.then_some(l),
            dim,
        })
        .collect();
    let certificate = model.torus_frame().map(|_| certificate_for(model)).transpose()?;
    Ok(CohomologyReport {
        operator: comp,
        family: model.family(),
        window: *window,
        dims: BigradedDims {
            leaf_dim: model.leaf_dim(),
            codim: model.codim(),
            total_degree: comp == Component::D,
            entries,
        },
        status: status_label(&certificate),
        certificate,
        unbounded: !resonant_modes.is_empty(),
        resonant_modes,
        nonresonant_blocks_exact: nonresonant_exact,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasicReport {
    pub dims: Vec<usize>,
    /// Basic forms exist on nonzero modes, so the count depends on the window.
    pub window_sensitive: bool,
    pub window: ModeWindow,
}

/// Basic cohomology: the `d_perp` complex on `Z^s = ker(d_F) in Omega^{0,s}`.
pub fn basic_cohomology_dims(model: &Arc<Model>, window: &ModeWindow) -> Result<BasicReport> {
    let q = model.codim() as i64;
    let keys = model.block_keys(window);
    let per_block: Vec<(bool, Vec<usize>)> = keys
        .par_iter()
        .map(|key| {
            // Kernel bases of d_F on each Omega^{0,s}, as matrices of columns.
            let mut z: Vec<(Vec<Monomial>, SparseMatrix)> = Vec::new();
            for s in 0..=q {
                let src = basis(model, key, 0, s);
                let tgt = basis(model, key, 1, s);
                let m = component_matrix(model, Component::DF, &src, &tgt)?;
                let (_, ker) = m.rank_kernel();
                z.push((src.clone(), SparseMatrix::from_columns(src.len(), &ker)));
            }
            let mut ranks = Vec::new();
            for s in 0..=q {
                let (src, zs) = &z[s as usize];
                if s == q {
                    ranks.push(0);
                    continue;
                }
                let tgt = &z[s as usize + 1].0;
                let dp = component_matrix(model, Component::DPerp, src, tgt)?;
                let img = dp.mul(zs)?;
                // The image must consist of basic forms again.
                let next = basis(model, key, 1, s + 1);
                let df = component_matrix(model, Component::DF, tgt, &next)?;
                if !df.mul(&img)?.is_zero() {
                    return Err(Error::ComplexViolation("d_perp does not preserve basic forms".into()));
                }
                ranks.push(img.rank());
            }
            let dims: Vec<usize> = (0..=q as usize)
                .map(|s| {
                    let zdim = z[s].1.cols();
                    zdim - ranks[s] - if s > 0 { ranks[s - 1] } else { 0 }
                })
                .collect();
            let nonzero_mode = key.mode.iter().any(|&k| k != 0) || key.phi != 0;
            let has_basic = z.iter().any(|(_, m)| m.cols() > 0);
            Ok((nonzero_mode && has_basic, dims))
        })
        .collect::<Result<_>>()?;
    let mut dims = vec![0; q as usize + 1];
    let mut sensitive = false;
    for (flag, d) in per_block {
        sensitive |= flag;
        for (s, x) in d.into_iter().enumerate() {
            dims[s] += x;
        }
    }
    Ok(BasicReport { dims, window_sensitive: sensitive, window: *window })
}

/// Ordinary de Rham Betti numbers of a torus-family model, from the full
/// differential on each Fourier block (nonzero modes are checked acyclic).
pub fn ordinary_derham_dims(model: &Arc<Model>) -> Result<Vec<usize>> {
    match model.family() {
        Family::KroneckerTorus | Family::CosphereCircle | Family::CircleProduct => {}
        other => {
            return Err(Error::UnsupportedModel(format!(
                "ordinary de Rham numbers are only computed for torus-family models, not {other:?}"
            )))
        }
    }
    let window = ModeWindow::modes(1);
    let report = cohomology_dims(model, Component::D, &window)?;
    if !report.resonant_modes.is_empty() {
        return Err(Error::InvariantViolation("a nonzero Fourier mode carries de Rham cohomology".into()));
    }
    Ok((0..=model.num_generators()).map(|k| report.dims.get(k, 0)).collect())
}

/// Numerical lower bound `min |m . alpha| * c * |m|^n` over a box, for
/// cross-checking certificates (used by tests; floating point).
pub fn certificate_margin(alpha: &[Scalar], cert: &DiophantineCertificate, box_bound: i64) -> Option<f64> {
    let c = cert.constant()?.to_f64()?;
    let n = cert.exponent()? as i32;
    let vals: Vec<f64> = alpha.iter().map(|a| a.to_f64().0).collect();
    let dim = vals.len();
    let mut worst = f64::INFINITY;
    let mut m = vec![-box_bound; dim];
    loop {
        let norm = m.iter().map(|x| x.abs()).max().unwrap();
        if norm > 0 {
            let v: f64 = m.iter().zip(&vals).map(|(k, a)| *k as f64 * a).sum();
            worst = worst.min(v.abs() * c * (norm as f64).powi(n));
        }
        let mut i = 0;
        loop {
            if i == dim {
                return Some(worst);
            }
            m[i] += 1;
            if m[i] <= box_bound {
                break;
            }
            m[i] = -box_bound;
            i += 1;
        }
    }
}
