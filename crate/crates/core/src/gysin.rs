//! Product sphere bundles `E = M x S^r` over torus models.
//!
//! For `r = 1` the bundle is realized by the circle-product model, whose
//! generators are the base leaf coframe, then `dphi`, then the base
//! transverse coframe. Fiber integration uses the fiber-last orientation
//! `pi_*(beta ^ dphi) = beta` with unit volume; with that choice `pi_*` is
//! a chain map for `d_F`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::derham::{self, cohomology_dims, IdentityCheck};
use crate::error::{Error, Result};
use crate::linalg::{induced_rank, SparseMatrix};
use crate::model::{operator_matrix, BlockKey, Component, Form, ModeWindow, Model, Monomial};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct ProductBundle {
    base: Arc<Model>,
    total: Option<Arc<Model>>,
    r: usize,
}

impl ProductBundle {
    pub fn new(base: &Arc<Model>, r: usize) -> Result<ProductBundle> {
        if r == 0 {
            return Err(Error::InvalidArgument("the fiber sphere must have positive dimension".into()));
        }
        if base.torus_frame().is_none() || base.family() != crate::model::Family::KroneckerTorus {
            return Err(Error::UnsupportedModel("product bundles are built over a Kronecker torus".into()));
        }
        let total = if r == 1 { Some(Model::circle_product(base)?) } else { None };
        Ok(ProductBundle { base: base.clone(), total, r })
    }

    pub fn base(&self) -> &Arc<Model> {
        &self.base
    }

    pub fn fiber_dim(&self) -> usize {
        self.r
    }

    /// The total space model, when the fiber is realized.
    pub fn total(&self) -> Result<&Arc<Model>> {
        self.total
            .as_ref()
            .ok_or_else(|| Error::UnsupportedModel(format!("S^{} fibers are handled by dimension count only", self.r)))
    }

    fn n_long(&self) -> usize {
        self.base.leaf_dim()
    }

    fn lift_mask(&self, mask: u32) -> u32 {
        let low = (1u32 << self.n_long()) - 1;
        (mask & low) | ((mask & !low) << 1)
    }

    fn drop_mask(&self, mask: u32) -> u32 {
        let low = (1u32 << self.n_long()) - 1;
        (mask & low) | ((mask >> 1) & !low)
    }

    fn dphi(&self) -> u32 {
        1 << self.n_long()
    }

    pub fn pullback_monomial(&self, m: &Monomial) -> Monomial {
        Monomial { mode: m.mode.clone(), phi: 0, xi: 0, sheet: None, mask: self.lift_mask(m.mask) }
    }

    /// `pi_*` on a monomial of the total space.
    pub fn integrate_monomial(&self, m: &Monomial) -> Option<(Monomial, Scalar)> {
        let dphi = self.dphi();
        if m.phi != 0 || m.mask & dphi == 0 {
            return None;
        }
        let after = (m.mask & !(dphi | (dphi - 1))).count_ones();
        let sign = if after.is_multiple_of(2) { 1 } else { -1 };
        let out = Monomial { mode: m.mode.clone(), phi: 0, xi: 0, sheet: None, mask: self.drop_mask(m.mask & !dphi) };
        Some((out, Scalar::from_int(sign)))
    }

    /// `beta -> pi^* beta ^ dphi`, on a monomial of the base.
    pub fn split_monomial(&self, m: &Monomial) -> (Monomial, Scalar) {
        let lifted = self.lift_mask(m.mask);
        let after = (lifted & !(self.dphi() | (self.dphi() - 1))).count_ones();
        let sign = if after.is_multiple_of(2) { 1 } else { -1 };
        let out = Monomial { mask: lifted | self.dphi(), ..self.pullback_monomial(m) };
        (out, Scalar::from_int(sign))
    }

    pub fn pullback(&self, a: &Form) -> Result<Form> {
        let total = self.total()?;
        self.check_base(a)?;
        Form::from_terms(total, a.terms().iter().map(|(m, c)| (self.pullback_monomial(m), c.clone())))
    }

    pub fn fiber_integrate(&self, a: &Form) -> Result<Form> {
        let total = self.total()?;
        if !(Arc::ptr_eq(total, a.model()) || **total == **a.model()) {
            return Err(Error::ModelMismatch);
        }
        let mut out = Form::zero(&self.base);
        for (m, c) in a.terms() {
            if let Some((b, s)) = self.integrate_monomial(m) {
                out.add_term(b, &(c * &s));
            }
        }
        Ok(out)
    }

    /// The splitting `H^{k-r,h}(M) -> H^{k,h}(E)`, wedge with the fiber class.
    pub fn split(&self, a: &Form) -> Result<Form> {
        let total = self.total()?;
        self.check_base(a)?;
        Form::from_terms(
            total,
            a.terms().iter().map(|(m, c)| {
                let (mm, s) = self.split_monomial(m);
                (mm, c * &s)
            }),
        )
    }

    fn check_base(&self, a: &Form) -> Result<()> {
        if Arc::ptr_eq(&self.base, a.model()) || *self.base == **a.model() {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    /// Monomial-level checks of the bundle maps on a window: both maps
    /// intertwine `d_F`, `pi^*` is injective on monomials, `pi_* pi^* = 0`,
    /// and `pi_*` inverts the splitting, which is itself a chain map.
    pub fn verify_maps(&self, window: &ModeWindow) -> Result<Vec<IdentityCheck>> {
        let total = self.total()?.clone();
        let base_pool = derham::window_monomials(&self.base, window);
        let total_pool = derham::window_monomials(&total, window);
        let unit_b = |m: &Monomial| Form::monomial(&self.base, m.clone(), Scalar::one()).unwrap();
        let unit_t = |m: &Monomial| Form::monomial(&total, m.clone(), Scalar::one()).unwrap();
        let df = |f: &Form| f.differential(Component::DF);
        let mut checks = Vec::new();
        let mut run = |name: &str, pool: &[Monomial], model: &Model, f: &dyn Fn(&Monomial) -> bool| {
            let bad = pool.iter().find(|m| !f(m));
            checks.push(IdentityCheck {
                name: name.into(),
                passed: bad.is_none(),
                checked: pool.len(),
                counterexample: bad.map(|m| model.monomial_label(m)),
            });
        };
        run("d_F pullback = pullback d_F", &base_pool, &self.base, &|m| {
            let f = unit_b(m);
            df(&self.pullback(&f).unwrap()) == self.pullback(&df(&f)).unwrap()
        });
        run("d_F fiber integration = fiber integration d_F", &total_pool, &total, &|m| {
            let f = unit_t(m);
            df(&self.fiber_integrate(&f).unwrap()) == self.fiber_integrate(&df(&f)).unwrap()
        });
        let mut images: Vec<Monomial> = base_pool.iter().map(|m| self.pullback_monomial(m)).collect();
        images.sort();
        images.dedup();
        let injective = images.len() == base_pool.len();
        run("pullback is injective on monomials", &base_pool, &self.base, &|_| injective);
        run("fiber integration of a pullback vanishes", &base_pool, &self.base, &|m| {
            self.fiber_integrate(&self.pullback(&unit_b(m)).unwrap()).unwrap().is_zero()
        });
        run("fiber integration inverts the splitting", &base_pool, &self.base, &|m| {
            self.fiber_integrate(&self.split(&unit_b(m)).unwrap()).unwrap() == unit_b(m)
        });
        run("the splitting commutes with d_F", &base_pool, &self.base, &|m| {
            let f = unit_b(m);
            df(&self.split(&f).unwrap()) == self.split(&df(&f)).unwrap()
        });
        Ok(checks)
    }
}

pub fn pullback(bundle: &ProductBundle, a: &Form) -> Result<Form> {
    bundle.pullback(a)
}

pub fn fiber_integrate(bundle: &ProductBundle, a: &Form) -> Result<Form> {
    bundle.fiber_integrate(a)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRow {
    pub k: i64,
    /// `dim H^{k,h}(E, F_E)` computed directly, when the fiber is realized.
    pub direct: Option<usize>,
    pub base_k: usize,
    pub base_k_minus_r: usize,
    pub predicted: usize,
    /// Rank of `pi^*: H^{k,h}(M) -> H^{k,h}(E)`.
    pub pullback_rank: Option<usize>,
    /// Rank of `pi_*: H^{k,h}(E) -> H^{k-r,h}(M)`.
    pub integration_rank: Option<usize>,
}

impl SplitRow {
    pub fn agrees(&self) -> bool {
        self.direct.is_none_or(|d| d == self.predicted)
    }

    /// `0 -> H(M) -> H(E) -> H(M)[-r] -> 0` is exact at all three spots.
    pub fn short_exact(&self) -> Option<bool> {
        Some(
            self.pullback_rank? == self.base_k
                && self.integration_rank? == self.base_k_minus_r
                && self.direct? == self.base_k + self.base_k_minus_r,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplittingTable {
    pub r: usize,
    pub h: i64,
    pub window: ModeWindow,
    pub rows: Vec<SplitRow>,
    /// `pi^*` is an isomorphism for `k <= r - 1`.
    pub pullback_iso_low_degrees: Option<bool>,
    /// `pi_*` is an isomorphism for `k >= p + 1`.
    pub integration_iso_high_degrees: Option<bool>,
    pub short_exact: Option<bool>,
    pub maps: Vec<IdentityCheck>,
}

impl SplittingTable {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(SplitRow::agrees)
            && self.pullback_iso_low_degrees != Some(false)
            && self.integration_iso_high_degrees != Some(false)
            && self.short_exact != Some(false)
            && self.maps.iter().all(|c| c.passed)
    }
}

/// Rank of a chain map on `d_F`-cohomology, summed over blocks.
fn cohomology_map_rank(
    src: &Model,
    tgt: &Model,
    pairs: &[(BlockKey, BlockKey)],
    (k, h): (i64, i64),
    shift: i64,
    op: &(dyn Fn(&Monomial) -> Vec<(Monomial, Scalar)> + Sync),
) -> Result<usize> {
    let ranks: Vec<usize> = pairs
        .par_iter()
        .map(|(ks, kt)| {
            let c1 = derham::basis(src, ks, k, h);
            let t1 = derham::basis(tgt, kt, k + shift, h);
            if c1.is_empty() || t1.is_empty() {
                return Ok(0);
            }
            let c2 = derham::basis(src, ks, k + 1, h);
            let t0 = derham::basis(tgt, kt, k + shift - 1, h);
            let f = operator_matrix(&c1, &t1, op)?;
            let d_out: SparseMatrix = derham::component_matrix(src, Component::DF, &c1, &c2)?;
            let d_in = derham::component_matrix(tgt, Component::DF, &t0, &t1)?;
            induced_rank(&f, &d_out, &d_in)
        })
        .collect::<Result<_>>()?;
    Ok(ranks.into_iter().sum())
}

/// Compares `H^{k,h}(E, F_E)` with `H^{k,h}(M, F) + H^{k-r,h}(M, F)` for every
/// leaf degree `k` of the total space. For `r = 1` the left side is computed
/// directly and the ranks of `pi^*` and `pi_*` on cohomology are recorded.
pub fn product_splitting_dims(base: &Arc<Model>, r: usize, h: i64, window: &ModeWindow) -> Result<SplittingTable> {
    let bundle = ProductBundle::new(base, r)?;
    let p = base.leaf_dim() as i64;
    let r_i = r as i64;
    let base_dims = cohomology_dims(base, Component::DF, window)?.dims;
    let realized = bundle.total.clone();
    let total_dims = match &realized {
        Some(t) => Some(cohomology_dims(t, Component::DF, window)?.dims),
        None => None,
    };
    let pairs: Vec<(BlockKey, BlockKey)> = base
        .block_keys(window)
        .into_iter()
        .map(|k| {
            let t = BlockKey { phi: 0, ..k.clone() };
            (k, t)
        })
        .collect();
    let flipped: Vec<(BlockKey, BlockKey)> = pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
    let mut rows = Vec::new();
    for k in 0..=p + r_i {
        let base_k = base_dims.at(k, h);
        let base_k_minus_r = base_dims.at(k - r_i, h);
        let (direct, pullback_rank, integration_rank) = match &realized {
            Some(t) => {
                let up = |m: &Monomial| vec![(bundle.pullback_monomial(m), Scalar::one())];
                let down = |m: &Monomial| bundle.integrate_monomial(m).into_iter().collect();
                (
                    Some(total_dims.as_ref().unwrap().at(k, h)),
                    Some(cohomology_map_rank(base, t, &pairs, (k, h), 0, &up)?),
                    Some(cohomology_map_rank(t, base, &flipped, (k, h), -r_i, &down)?),
                )
            }
            None => (None, None, None),
        };
        rows.push(SplitRow {
            k,
            direct,
            base_k,
            base_k_minus_r,
            predicted: base_k + base_k_minus_r,
            pullback_rank,
            integration_rank,
        });
    }
    let (low, high, exact, maps) = if realized.is_some() {
        let low = rows
            .iter()
            .filter(|row| row.k < r_i)
            .all(|row| row.pullback_rank == Some(row.base_k) && row.direct == Some(row.base_k));
        let high = rows
            .iter()
            .filter(|row| row.k > p)
            .all(|row| row.integration_rank == Some(row.base_k_minus_r) && row.direct == Some(row.base_k_minus_r));
        let exact = rows.iter().all(|row| row.short_exact() == Some(true));
        (Some(low), Some(high), Some(exact), bundle.verify_maps(window)?)
    } else {
        (None, None, None, Vec::new())
    };
    Ok(SplittingTable {
        r,
        h,
        window: *window,
        rows,
        pullback_iso_low_degrees: low,
        integration_iso_high_degrees: high,
        short_exact: exact,
        maps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2() -> Arc<Model> {
        Model::torus(vec![Scalar::one(), Scalar::sqrt(2).unwrap()], None).unwrap()
    }

    #[test]
    fn coordinate_maps() {
        let b = ProductBundle::new(&t2(), 1).unwrap();
        let e = b.total().unwrap().clone();
        let th = Form::generator(&t2(), "theta").unwrap();
        assert_eq!(b.pullback(&th).unwrap(), Form::generator(&e, "theta").unwrap());
        let eta = Form::exp(&t2(), &[1, 0]).unwrap().wedge(&Form::generator(&t2(), "eta1").unwrap()).unwrap();
        let up = b.pullback(&eta).unwrap();
        assert_eq!(up.terms().keys().next().map(|m| e.monomial_label(m)), Some("e(1,0) eta1".into()));

        let dphi = Form::generator(&e, "dphi").unwrap();
        assert_eq!(b.fiber_integrate(&dphi).unwrap(), Form::one(&t2()));
        let eth = Form::exp(&e, &[1, 0]).unwrap().wedge(&Form::generator(&e, "theta").unwrap()).unwrap();
        assert!(b.fiber_integrate(&eth).unwrap().is_zero());
        let a = eth.wedge(&dphi).unwrap();
        let expect = Form::exp(&t2(), &[1, 0]).unwrap().wedge(&th).unwrap();
        assert_eq!(b.fiber_integrate(&a).unwrap(), expect);
    }

    #[test]
    fn unrealized_fibers() {
        let b = ProductBundle::new(&t2(), 3).unwrap();
        assert!(b.pullback(&Form::one(&t2())).is_err());
        let t = product_splitting_dims(&t2(), 3, 0, &ModeWindow::modes(1)).unwrap();
        assert!(t.rows.iter().all(|r| r.direct.is_none()));
        assert_eq!(t.rows.iter().map(|r| r.predicted).collect::<Vec<_>>(), vec![1, 1, 0, 1, 1]);
    }
}
