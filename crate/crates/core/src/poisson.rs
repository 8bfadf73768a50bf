//! Leafwise Poisson calculus on conic duals.
//!
//! On a conic model with leaf coframe `(theta, dxi)` the Poisson bivector is
//! `G = d/dxi ^ T`, so that `i_G = i_T . i_{d/dxi}` and `i_G(theta ^ dxi) = -1`.
//! This orientation is the one for which `{f, g} = i_G(df ^ dg)` equals
//! `f_xi g_x - f_x g_xi` and the symplectic star `*_F(1) = theta ^ dxi`,
//! `*_F(theta) = -theta`, `*_F(dxi) = -dxi`, `*_F(theta ^ dxi) = 1` conjugates
//! `d_F` into `delta_F` with sign `(-1)^{r+1}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derham::{self, status_label, IdentityCheck};
use crate::error::{Error, Result};
use crate::linalg::quotient_dim;
use crate::model::{operator_matrix, BlockKey, Component, Form, ModeWindow, Model, Monomial, Sign};
use crate::scalar::Scalar;

/// The leafwise Poisson structure of a conic model.
#[derive(Clone, Debug)]
pub struct PoissonTensor {
    model: Arc<Model>,
    leaf_gen: usize,
    xi_gen: usize,
}

impl PoissonTensor {
    pub fn new(model: &Arc<Model>) -> Result<PoissonTensor> {
        let xi_gen = model
            .xi_generator()
            .ok_or_else(|| Error::UnsupportedModel("the Poisson calculus needs a conic model".into()))?;
        if model.leaf_dim() != 2 {
            return Err(Error::UnsupportedModel("conic models with leaf dimension 2 only".into()));
        }
        Ok(PoissonTensor { model: model.clone(), leaf_gen: 0, xi_gen })
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    /// The leafwise symplectic form `theta ^ dxi`, homogeneous of degree 1.
    pub fn omega(&self) -> Form {
        let m = Monomial { mask: (1 << self.leaf_gen) | (1 << self.xi_gen), ..self.model.unit_monomial() };
        Form::monomial(&self.model, m, Scalar::one()).unwrap()
    }

    /// The constant-coefficient bivector has vanishing Schouten bracket, and
    /// scaling `xi -> t xi` sends it to `G / t`: contraction with it lowers
    /// homogeneity by exactly one. Both facts are checked on the window.
    pub fn check_structure(&self, window: &ModeWindow) -> bool {
        let pool = derham::window_monomials(&self.model, window);
        pool.iter().all(|m| match self.contract_monomial(m) {
            Some((out, _)) => self.model.homogeneity(&out) == self.model.homogeneity(m) - 1 && out.xi == m.xi,
            None => true,
        })
    }

    pub fn contract_monomial(&self, m: &Monomial) -> Option<(Monomial, Scalar)> {
        let (a, s1) = self.model.contract(self.xi_gen, m)?;
        let (b, s2) = self.model.contract(self.leaf_gen, &a)?;
        Some((b, Scalar::from_int((s1 * s2) as i64)))
    }

    /// Interior product `i_G`, of bidegree `(-2, 0)`.
    pub fn contract(&self, a: &Form) -> Result<Form> {
        self.check(a)?;
        Ok(a.map_terms(|m| self.contract_monomial(m).into_iter().collect()))
    }

    fn check(&self, a: &Form) -> Result<()> {
        if Arc::ptr_eq(&self.model, a.model()) || *self.model == **a.model() {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    /// `{f, g} = i_G(df ^ dg)` for functions.
    pub fn bracket(&self, f: &Form, g: &Form) -> Result<Form> {
        self.check(f)?;
        self.check(g)?;
        for x in [f, g] {
            if x.terms().keys().any(|m| m.mask != 0) {
                return Err(Error::InvalidArgument("the bracket takes functions (bidegree (0, 0))".into()));
            }
        }
        let w = f.differential(Component::D).wedge(&g.differential(Component::D))?;
        self.contract(&w)
    }

    /// `[i_G, D]` on a monomial, for `D` a differential component.
    pub fn delta_monomial(&self, variant: Delta, m: &Monomial) -> Vec<(Monomial, Scalar)> {
        let comp = variant.component();
        let mut acc: BTreeMap<Monomial, Scalar> = BTreeMap::new();
        for (dm, c) in self.model.differentiate(comp, m) {
            if let Some((out, s)) = self.contract_monomial(&dm) {
                *acc.entry(out).or_default() += &(&c * &s);
            }
        }
        if let Some((im, s)) = self.contract_monomial(m) {
            for (out, c) in self.model.differentiate(comp, &im) {
                *acc.entry(out).or_default() -= &(&c * &s);
            }
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }

    /// The Koszul-Brylinski differential or one of its bihomogeneous parts.
    pub fn delta(&self, a: &Form, variant: Delta) -> Result<Form> {
        self.check(a)?;
        Ok(a.map_terms(|m| self.delta_monomial(variant, m)))
    }

    /// Symplectic star on a monomial; `flip_odd` reverses the sign on odd
    /// leaf degree (a deliberately wrong convention for negative controls).
    pub fn star_monomial(&self, m: &Monomial, flip_odd: bool) -> (Monomial, Scalar) {
        let both = (1u32 << self.leaf_gen) | (1u32 << self.xi_gen);
        let leaf = m.mask & both;
        let rest = m.mask & !both;
        let (new_leaf, sign) = match leaf.count_ones() {
            0 => (both, 1),
            1 => (leaf, if flip_odd { 1 } else { -1 }),
            _ => (0, 1),
        };
        (m.with_mask(new_leaf | rest), Scalar::from_int(sign))
    }

    /// `*_F`, defined on forms of pure bidegree.
    pub fn hodge_star(&self, a: &Form) -> Result<Form> {
        self.check(a)?;
        if !a.is_zero() && a.pure_bidegree().is_none() {
            return Err(Error::InvalidArgument("the symplectic star needs a form of pure bidegree".into()));
        }
        Ok(a.map_terms(|m| vec![self.star_monomial(m, false)]))
    }

    /// `(-1)^{r+1} *_F d_F *_F` on a monomial of leaf degree `r`.
    pub fn conjugated_monomial(&self, m: &Monomial, flip_odd: bool) -> Vec<(Monomial, Scalar)> {
        let r = self.model.bidegree(m.mask).0;
        let sign = Scalar::from_int(if r.is_multiple_of(2) { -1 } else { 1 });
        let (sm, c1) = self.star_monomial(m, flip_odd);
        let mut acc: BTreeMap<Monomial, Scalar> = BTreeMap::new();
        for (dm, c2) in self.model.differentiate(Component::DF, &sm) {
            let (out, c3) = self.star_monomial(&dm, flip_odd);
            *acc.entry(out).or_default() += &(&(&(&c1 * &c2) * &c3) * &sign);
        }
        acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }
}

/// Which commutator with `i_G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delta {
    /// `delta = [i_G, d]`.
    Full,
    /// `delta_F = [i_G, d_F]`, bidegree `(-1, 0)`.
    Leafwise,
    /// `delta_{-2,1} = [i_G, d_perp]`.
    Transverse,
}

impl Delta {
    fn component(self) -> Component {
        match self {
            Delta::Full => Component::D,
            Delta::Leafwise => Component::DF,
            Delta::Transverse => Component::DPerp,
        }
    }
}

pub fn contract_g(a: &Form) -> Result<Form> {
    PoissonTensor::new(a.model())?.contract(a)
}

pub fn bracket(f: &Form, g: &Form) -> Result<Form> {
    PoissonTensor::new(f.model())?.bracket(f, g)
}

pub fn delta(a: &Form, variant: Delta) -> Result<Form> {
    PoissonTensor::new(a.model())?.delta(a, variant)
}

pub fn hodge_star(a: &Form) -> Result<Form> {
    PoissonTensor::new(a.model())?.hodge_star(a)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonIdentityReport {
    pub checks: Vec<IdentityCheck>,
    /// A monomial on which `delta_{-2,1}` is nonzero, if any.
    pub transverse_witness: Option<String>,
}

impl PoissonIdentityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Which symplectic star to test the conjugation identity with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StarVariant {
    Standard,
    /// Sign reversed on odd leaf degree; the identity must fail.
    FlippedOddDegree,
}

/// Checks, on every basis monomial of the window, the conjugation identity
/// `delta_F = (-1)^{r+1} *_F d_F *_F`, the relations
/// `delta_F^2 = delta_{-2,1}^2 = delta_F delta_{-2,1} + delta_{-2,1} delta_F = 0`,
/// `delta^2 = 0`, the splitting `delta = delta_F + delta_{-2,1}` (computed
/// both from the commutator and from the conjugated `d_F`), the vanishing of
/// `[i_G, boundary]`, `*_F^2 = 1`, and the homogeneity shifts.
pub fn verify_star_delta_identity(model: &Arc<Model>, window: &ModeWindow) -> Result<PoissonIdentityReport> {
    verify_star_delta_identity_variant(model, window, StarVariant::Standard)
}

pub fn verify_star_delta_identity_variant(
    model: &Arc<Model>,
    window: &ModeWindow,
    variant: StarVariant,
) -> Result<PoissonIdentityReport> {
    let pt = PoissonTensor::new(model)?;
    let flip = variant == StarVariant::FlippedOddDegree;
    let pool = derham::window_monomials(model, window);
    let form = |terms: Vec<(Monomial, Scalar)>| Form::from_terms(model, terms).unwrap();
    let apply = |f: &Form, v: Delta| f.map_terms(|m| pt.delta_monomial(v, m));
    let unit = |m: &Monomial| Form::monomial(model, m.clone(), Scalar::one()).unwrap();

    type Check<'a> = (&'static str, Box<dyn Fn(&Monomial) -> bool + Sync + 'a>);
    let checks: Vec<Check> = vec![
        (
            "delta_F = (-1)^(r+1) *_F d_F *_F",
            Box::new(|m| form(pt.delta_monomial(Delta::Leafwise, m)) == form(pt.conjugated_monomial(m, flip))),
        ),
        ("delta_F^2 = 0", Box::new(|m| apply(&apply(&unit(m), Delta::Leafwise), Delta::Leafwise).is_zero())),
        ("delta_{-2,1}^2 = 0", Box::new(|m| apply(&apply(&unit(m), Delta::Transverse), Delta::Transverse).is_zero())),
        (
            "delta_F delta_{-2,1} + delta_{-2,1} delta_F = 0",
            Box::new(|m| {
                let f = unit(m);
                let a = apply(&apply(&f, Delta::Transverse), Delta::Leafwise);
                let b = apply(&apply(&f, Delta::Leafwise), Delta::Transverse);
                a.plus(&b).unwrap().is_zero()
            }),
        ),
        ("delta^2 = 0", Box::new(|m| apply(&apply(&unit(m), Delta::Full), Delta::Full).is_zero())),
        (
            "delta = delta_F + delta_{-2,1}",
            Box::new(|m| {
                let f = unit(m);
                apply(&f, Delta::Full) == apply(&f, Delta::Leafwise).plus(&apply(&f, Delta::Transverse)).unwrap()
            }),
        ),
        (
            "delta = (-1)^(r+1) *_F d_F *_F + [i_G, d_perp]",
            Box::new(|m| {
                let f = unit(m);
                let second = form(pt.conjugated_monomial(m, flip)).plus(&apply(&f, Delta::Transverse)).unwrap();
                apply(&f, Delta::Full) == second
            }),
        ),
        (
            "[i_G, boundary] = 0",
            Box::new(|m| {
                let f = unit(m);
                let a = pt.contract(&f.differential(Component::Boundary)).unwrap();
                let b = pt.contract(&f).unwrap().differential(Component::Boundary);
                a == b
            }),
        ),
        (
            "*_F^2 = 1",
            Box::new(|m| {
                let (a, c1) = pt.star_monomial(m, flip);
                let (b, c2) = pt.star_monomial(&a, flip);
                b == *m && (&c1 * &c2).is_one()
            }),
        ),
        (
            "*_F sends l to l + p - r",
            Box::new(|m| {
                let (a, _) = pt.star_monomial(m, flip);
                let r = model.bidegree(m.mask).0 as i64;
                model.homogeneity(&a) == model.homogeneity(m) + 1 - r
            }),
        ),
        (
            "delta lowers homogeneity by one with bidegrees (-1,0) and (-2,1)",
            Box::new(|m| {
                let l = model.homogeneity(m);
                let (r, s) = model.bidegree(m.mask);
                let ok = |v: Delta, dr: i64, ds: i64| {
                    pt.delta_monomial(v, m).iter().all(|(o, _)| {
                        let (r2, s2) = model.bidegree(o.mask);
                        model.homogeneity(o) == l - 1 && r2 as i64 == r as i64 + dr && s2 as i64 == s as i64 + ds
                    })
                };
                ok(Delta::Leafwise, -1, 0)
                    && ok(Delta::Transverse, -2, 1)
                    && pt.delta_monomial(Delta::Full, m).iter().all(|(o, _)| model.homogeneity(o) == l - 1)
            }),
        ),
    ];
    let results: Vec<IdentityCheck> = checks
        .par_iter()
        .map(|(name, f)| {
            let bad = pool.iter().find(|m| !f(m));
            IdentityCheck {
                name: name.to_string(),
                passed: bad.is_none(),
                checked: pool.len(),
                counterexample: bad.map(|m| model.monomial_label(m)),
            }
        })
        .collect();
    let witness =
        pool.iter().find(|m| !pt.delta_monomial(Delta::Transverse, m).is_empty()).map(|m| model.monomial_label(m));
    Ok(PoissonIdentityReport { checks: results, transverse_witness: witness })
}

/// Compares `delta_F(f0 d_F f1 ^ ... ^ d_F fk)` for `k = 1, 2` on random
/// functions with the bracket expansion
/// `sum_i (-1)^{i+1} {f0, fi} d_F f1 ^ ..^i.. + sum_{i<j} (-1)^{i+j} f0 d_F{fi, fj} ^ ..^i..^j..`.
pub fn verify_bracket_expansion(model: &Arc<Model>, samples: usize, seed: u64) -> Result<IdentityCheck> {
    let pt = PoissonTensor::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.mode_dim();
    let random_function = |rng: &mut ChaCha8Rng| -> Form {
        let mut f = Form::zero(model);
        for _ in 0..2 {
            let mode: Vec<i64> = (0..n).map(|_| rng.random_range(-2..=2)).collect();
            let xi = rng.random_range(-2..=2);
            let m = Monomial { mode, xi, ..model.unit_monomial() };
            f.add_term(m, &Scalar::from_int(rng.random_range(-3..=3)));
        }
        f
    };
    let dff = |f: &Form| f.differential(Component::DF);
    for trial in 0..samples {
        let fs: Vec<Form> = (0..3).map(|_| random_function(&mut rng)).collect();
        // k = 1
        let lhs = pt.delta(&fs[0].wedge(&dff(&fs[1]))?, Delta::Leafwise)?;
        let rhs = pt.bracket(&fs[0], &fs[1])?;
        if lhs != rhs {
            return Ok(failed_expansion(samples, trial, 1, &lhs, &rhs));
        }
        // k = 2
        let arg = fs[0].wedge(&dff(&fs[1]))?.wedge(&dff(&fs[2]))?;
        let lhs = pt.delta(&arg, Delta::Leafwise)?;
        let t1 = pt.bracket(&fs[0], &fs[1])?.wedge(&dff(&fs[2]))?;
        let t2 = pt.bracket(&fs[0], &fs[2])?.wedge(&dff(&fs[1]))?;
        let t3 = fs[0].wedge(&dff(&pt.bracket(&fs[1], &fs[2])?))?;
        let rhs = t1.minus(&t2)?.minus(&t3)?;
        if lhs != rhs {
            return Ok(failed_expansion(samples, trial, 2, &lhs, &rhs));
        }
    }
    Ok(IdentityCheck {
        name: "delta_F on f0 d_F f1 ^ ... ^ d_F fk matches the bracket expansion (k = 1, 2)".into(),
        passed: true,
        checked: samples,
        counterexample: None,
    })
}

fn failed_expansion(samples: usize, trial: usize, k: usize, lhs: &Form, rhs: &Form) -> IdentityCheck {
    let global_sign = *lhs == rhs.scale(&Scalar::from_int(-1));
    IdentityCheck {
        name: "delta_F on f0 d_F f1 ^ ... ^ d_F fk matches the bracket expansion (k = 1, 2)".into(),
        passed: false,
        checked: samples,
        counterexample: Some(format!(
            "trial {trial}, k = {k}: delta_F gives {lhs}, expansion gives {rhs}{}",
            if global_sign { " (differs by a global sign)" } else { "" }
        )),
    }
}

// ---------------------------------------------------------------------------
// Homogeneous Poisson homology

/// Which homology to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomologyKind {
    /// `H^delta_k(X)_l`.
    Delta,
    /// `H^{delta_F}_k(X, F)_l`, summed over bidegrees of total degree `k`.
    LeafwiseTotal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoissonDim {
    pub k: i64,
    pub l: i64,
    pub dim: usize,
    /// Contributions of the `+` and `-` sheets.
    pub per_sheet: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn sheet_index(s: Option<Sign>) -> usize {
    match s {
        Some(Sign::Minus) => 1,
        _ => 0,
    }
}

/// Mode/sheet labels of a window with the homogeneity slot left at 0.
fn mode_keys(model: &Model, window: &ModeWindow) -> Vec<BlockKey> {
    let w = ModeWindow { l_min: 0, l_max: 0, ..*window };
    model.block_keys(&w)
}

fn at_l(key: &BlockKey, l: i64) -> BlockKey {
    BlockKey { l, ..key.clone() }
}

/// Homogeneous Poisson homology in degree `k` and homogeneity `l`, computed
/// exactly on each Fourier block of the window.
pub fn homogeneous_poisson_dims(
    model: &Arc<Model>,
    kind: HomologyKind,
    k: i64,
    l: i64,
    window: &ModeWindow,
) -> Result<PoissonDim> {
    let pt = PoissonTensor::new(model)?;
    let top = model.num_generators() as i64;
    if k < 0 || k > top {
        return Ok(PoissonDim {
            k,
            l,
            dim: 0,
            per_sheet: [0, 0],
            note: Some(format!("degree {k} is outside 0..={top}")),
        });
    }
    let keys = mode_keys(model, window);
    let per: Vec<(usize, usize)> = keys
        .par_iter()
        .map(|key| {
            let d = match kind {
                HomologyKind::Delta => {
                    let c0 = derham::degree_basis(model, &at_l(key, l + 1), k + 1);
                    let c1 = derham::degree_basis(model, &at_l(key, l), k);
                    let c2 = derham::degree_basis(model, &at_l(key, l - 1), k - 1);
                    let op = |m: &Monomial| pt.delta_monomial(Delta::Full, m);
                    quotient_dim(&operator_matrix(&c1, &c2, op)?, &operator_matrix(&c0, &c1, op)?)?
                }
                HomologyKind::LeafwiseTotal => {
                    let mut total = 0;
                    for r in 0..=k.min(2) {
                        total += leafwise_block_dim(&pt, key, r, k - r, l)?;
                    }
                    total
                }
            };
            Ok((sheet_index(key.sheet), d))
        })
        .collect::<Result<_>>()?;
    let mut per_sheet = [0, 0];
    for (s, d) in per {
        per_sheet[s] += d;
    }
    Ok(PoissonDim { k, l, dim: per_sheet[0] + per_sheet[1], per_sheet, note: None })
}

/// `H^{delta_F}_{r,s}` of one block at homogeneity `l`.
fn leafwise_block_dim(pt: &PoissonTensor, key: &BlockKey, r: i64, s: i64, l: i64) -> Result<usize> {
    let model = pt.model();
    let c0 = derham::basis(model, &at_l(key, l + 1), r + 1, s);
    let c1 = derham::basis(model, &at_l(key, l), r, s);
    if c1.is_empty() {
        return Ok(0);
    }
    let c2 = derham::basis(model, &at_l(key, l - 1), r - 1, s);
    let op = |m: &Monomial| pt.delta_monomial(Delta::Leafwise, m);
    quotient_dim(&operator_matrix(&c1, &c2, op)?, &operator_matrix(&c0, &c1, op)?)
}

/// Bigraded `H^{delta_F}_{r,s}(X, F)_l`.
pub fn leafwise_poisson_dims(model: &Arc<Model>, r: i64, s: i64, l: i64, window: &ModeWindow) -> Result<usize> {
    let pt = PoissonTensor::new(model)?;
    let keys = mode_keys(model, window);
    let dims: Vec<usize> = keys.par_iter().map(|key| leafwise_block_dim(&pt, key, r, s, l)).collect::<Result<_>>()?;
    Ok(dims.into_iter().sum())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomCanRow {
    pub k: i64,
    pub l: i64,
    /// Direct `delta`-homology.
    pub delta: usize,
    /// Direct `delta_F`-homology (total degree `k`).
    pub delta_leafwise: usize,
    /// `H^{p-l, k-l-p}` of the cosphere-circle bundle for `d_F`.
    pub cosphere: usize,
    pub cosphere_index: (i64, i64),
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HomCanReport {
    pub window: ModeWindow,
    pub rows: Vec<HomCanRow>,
    /// All three columns agree on every row.
    pub all_agree: bool,
    /// All rows with `|l| > p` vanish.
    pub vanishing_outside: bool,
    pub status: String,
}

/// Tabulates, for all `0 <= k <= 2p + q` and all `l` in the window's degree
/// range, the `delta`-homology, the `delta_F`-homology and the shifted
/// `d_F`-cohomology of the cosphere-circle bundle.
pub fn verify_hom_can(model: &Arc<Model>, window: &ModeWindow) -> Result<HomCanReport> {
    PoissonTensor::new(model)?;
    if model.torus_frame().is_none() {
        return Err(Error::UnsupportedModel("the comparison needs a conic dual of a Kronecker torus".into()));
    }
    let base = model.base_model();
    let cos = Model::cosphere_circle(&base)?;
    let cos_dims = derham::cohomology_dims(&cos, Component::DF, &ModeWindow::modes(window.bound))?;
    let p = 1i64;
    let top = model.num_generators() as i64;
    let mut rows = Vec::new();
    for l in window.l_min..=window.l_max {
        for k in 0..=top {
            let a = homogeneous_poisson_dims(model, HomologyKind::Delta, k, l, window)?.dim;
            let b = homogeneous_poisson_dims(model, HomologyKind::LeafwiseTotal, k, l, window)?.dim;
            let idx = (p - l, k - l - p);
            let c = cos_dims.dims.at(idx.0, idx.1);
            rows.push(HomCanRow {
                k,
                l,
                delta: a,
                delta_leafwise: b,
                cosphere: c,
                cosphere_index: idx,
                agree: a == b && b == c,
            });
        }
    }
    let all_agree = rows.iter().all(|r| r.agree);
    let vanishing_outside = rows.iter().filter(|r| r.l.abs() > p).all(|r| r.delta == 0 && r.delta_leafwise == 0);
    let cert = Some(derham::certificate_for(model)?);
    Ok(HomCanReport { window: *window, rows, all_agree, vanishing_outside, status: status_label(&cert) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Scalar {
        Scalar::parse(x).unwrap()
    }

    fn x2() -> Arc<Model> {
        let t = Model::torus(vec![s("1"), s("sqrt2")], None).unwrap();
        Model::conic_dual(&t).unwrap()
    }

    #[test]
    fn contraction_table() {
        let x = x2();
        let th = Form::generator(&x, "theta").unwrap();
        let dxi = Form::generator(&x, "dxi").unwrap();
        let eta = Form::generator(&x, "eta1").unwrap();
        assert_eq!(contract_g(&th.wedge(&dxi).unwrap()).unwrap(), Form::one(&x).scale(&s("-1")));
        assert!(contract_g(&th.wedge(&eta).unwrap()).unwrap().is_zero());
        let f = Form::exp(&x, &[1, 1]).unwrap().wedge(&Form::xi_power(&x, 2).unwrap()).unwrap();
        let arg = f.wedge(&th).unwrap().wedge(&dxi).unwrap().wedge(&eta).unwrap();
        assert_eq!(contract_g(&arg).unwrap(), f.wedge(&eta).unwrap().scale(&s("-1")));
    }

    #[test]
    fn star_table() {
        let x = x2();
        let th = Form::generator(&x, "theta").unwrap();
        let dxi = Form::generator(&x, "dxi").unwrap();
        let eta = Form::generator(&x, "eta1").unwrap();
        let w = th.wedge(&dxi).unwrap();
        assert_eq!(hodge_star(&Form::one(&x)).unwrap(), w);
        assert_eq!(hodge_star(&th).unwrap(), th.scale(&s("-1")));
        assert_eq!(hodge_star(&dxi).unwrap(), dxi.scale(&s("-1")));
        let f = Form::exp(&x, &[2, 0]).unwrap();
        assert_eq!(hodge_star(&f.wedge(&w).unwrap().wedge(&eta).unwrap()).unwrap(), f.wedge(&eta).unwrap());
        assert!(hodge_star(&th.plus(&w).unwrap()).is_err());
    }

    #[test]
    fn bracket_examples() {
        let x = x2();
        let xi = Form::xi_power(&x, 1).unwrap();
        let e = Form::exp(&x, &[1, 0]).unwrap();
        assert_eq!(bracket(&xi, &e).unwrap(), e);
        assert!(bracket(&e, &e).unwrap().is_zero());
        assert!(bracket(&e, &Form::exp(&x, &[0, 3]).unwrap()).unwrap().is_zero());
        let th = Form::generator(&x, "theta").unwrap();
        assert!(bracket(&th, &e).is_err());
    }

    #[test]
    fn delta_of_function_vanishes() {
        let x = x2();
        let f = Form::exp(&x, &[1, -1]).unwrap().wedge(&Form::xi_power(&x, 3).unwrap()).unwrap();
        for v in [Delta::Full, Delta::Leafwise, Delta::Transverse] {
            assert!(delta(&f, v).unwrap().is_zero());
        }
    }

    #[test]
    fn non_conic_models_are_rejected() {
        let t = Model::torus(vec![s("1"), s("sqrt2")], None).unwrap();
        assert!(matches!(contract_g(&Form::one(&t)), Err(Error::UnsupportedModel(_))));
    }
}
