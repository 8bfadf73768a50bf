//! Foliated models and their exterior form algebra.
//!
//! Every supported manifold is a base (a Kronecker torus or a Lie group with
//! an invariant frame) optionally extended by a radial coordinate `xi` (the
//! dual of the leaf line bundle with its zero section removed), by a circle
//! coordinate `phi`, and by a two-point sheet label. Forms are finite sums of
//! monomials `e_m * e^{k phi} * xi^j * (wedge of coframe generators)`.
//!
//! Generators are ordered longitudinal first, then transverse, so a sorted
//! exterior monomial is always (leafwise part) ^ (transverse part).

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::scalar::{Field, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    KroneckerTorus,
    ConicDual,
    CosphereCircle,
    /// `M x S^1` with leaves `L x S^1`, without the sheet label.
    CircleProduct,
    LieFrame,
}

/// Bidegree components of the exterior derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "d")]
    D,
    #[serde(rename = "d_F")]
    DF,
    #[serde(rename = "d_perp")]
    DPerp,
    #[serde(rename = "boundary")]
    Boundary,
}

impl Component {
    /// Bidegree shift `(dr, ds)`; `None` for the full differential.
    pub fn shift(self) -> Option<(i32, i32)> {
        match self {
            Component::D => None,
            Component::DF => Some((1, 0)),
            Component::DPerp => Some((0, 1)),
            Component::Boundary => Some((-1, 2)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::D => "d",
            Component::DF => "d_F",
            Component::DPerp => "d_perp",
            Component::Boundary => "boundary",
        }
    }

    const PARTS: [Component; 3] = [Component::DF, Component::DPerp, Component::Boundary];
}

impl std::str::FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Component::D),
            "d_F" | "dF" | "d_f" => Ok(Component::DF),
            "d_perp" | "dperp" => Ok(Component::DPerp),
            "boundary" | "partial" => Ok(Component::Boundary),
            other => Err(Error::InvalidArgument(format!("unknown differential component {other:?}"))),
        }
    }
}

/// Frame data of a Kronecker torus with leaf direction `T = sum alpha_j d/dx_j`.
///
/// With `j0` the first index where `alpha` is nonzero and `H` spanned by the
/// other coordinate fields, the coframe is `theta = dx_{j0} / alpha_{j0}` and
/// `eta_i = dx_{j_i} - (alpha_{j_i} / alpha_{j0}) dx_{j0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusFrame {
    pub alpha: Vec<Scalar>,
    pub pivot: usize,
    pub transverse_axes: Vec<usize>,
}

impl TorusFrame {
    /// `m . alpha`, the (reduced) leafwise frequency of `e_m`.
    pub fn frequency(&self, m: &[i64]) -> Scalar {
        m.iter().zip(&self.alpha).filter(|(k, _)| **k != 0).map(|(k, a)| a * &Scalar::from_int(*k)).sum()
    }
}

/// An invariant frame on a Lie group: `[e_i, e_j] = sum_k c[k][i][j] e_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LieFrame {
    pub dim: usize,
    pub structure: Vec<Vec<Vec<Scalar>>>,
    /// Frame indices spanning the foliation (0-based).
    pub leaf: Vec<usize>,
    pub complement: Vec<usize>,
}

impl LieFrame {
    pub fn bracket_coeff(&self, i: usize, j: usize, k: usize) -> &Scalar {
        &self.structure[k][i][j]
    }

    /// First failure of the Jacobi identity, as `(i, j, l, k)`.
    pub fn jacobi_violation(&self) -> Option<(usize, usize, usize, usize)> {
        let n = self.dim;
        for i in 0..n {
            for j in i + 1..n {
                for l in j + 1..n {
                    for m in 0..n {
                        let mut s = Scalar::zero();
                        for k in 0..n {
                            s += &(self.bracket_coeff(i, j, k) * self.bracket_coeff(k, l, m));
                            s += &(self.bracket_coeff(j, l, k) * self.bracket_coeff(k, i, m));
                            s += &(self.bracket_coeff(l, i, k) * self.bracket_coeff(k, j, m));
                        }
                        if !s.is_zero() {
                            return Some((i, j, l, m));
                        }
                    }
                }
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Base {
    Torus(TorusFrame),
    Lie(LieFrame),
}

/// Description of a model as accepted from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    KroneckerTorus {
        alpha: Vec<Scalar>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<Field>,
    },
    ConicDual {
        base: Box<ModelSpec>,
    },
    CosphereCircle {
        base: Box<ModelSpec>,
    },
    CircleProduct {
        base: Box<ModelSpec>,
    },
    LieFrame {
        dim: usize,
        /// Entries `[i, j, k, c]` (1-based) meaning `[e_i, e_j]` has
        /// coefficient `c` on `e_k`.
        structure: Vec<(usize, usize, usize, Scalar)>,
        leaf: Vec<usize>,
    },
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<ModelSpec> {
        serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))
    }
}

/// A validated foliated model.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    family: Family,
    field: Field,
    base: Base,
    radial: bool,
    circle: bool,
    sheets: bool,
    names: Vec<String>,
    n_long: usize,
    n_trans: usize,
    xi_gen: Option<usize>,
    phi_gen: Option<usize>,
    /// Frame index of each base generator (Lie bases only).
    frame_index: Vec<usize>,
    /// `gen_diff[c][g]`: value of component `c` (`d_F`, `d_perp`, boundary)
    /// on generator `g`, as a list of 2-form masks with coefficients.
    gen_diff: [Vec<Vec<(u32, Scalar)>>; 3],
    resonance: Vec<Vec<i64>>,
}

/// A single term's shape: Fourier mode, circle mode, radial exponent, sheet
/// and exterior monomial (bit `g` set when generator `g` is present).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub mode: Vec<i64>,
    pub phi: i64,
    pub xi: i64,
    pub sheet: Option<Sign>,
    pub mask: u32,
}

impl Monomial {
    pub fn degree(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn with_mask(&self, mask: u32) -> Monomial {
        Monomial { mask, ..self.clone() }
    }
}

/// Sign of `a ^ b` relative to the sorted monomial, or `None` if they share
/// a generator.
pub fn wedge_sign(a: u32, b: u32) -> Option<i32> {
    if a & b != 0 {
        return None;
    }
    let mut swaps = 0;
    let mut bb = b;
    while bb != 0 {
        let y = bb.trailing_zeros();
        swaps += (a >> y).count_ones();
        bb &= bb - 1;
    }
    Some(if swaps % 2 == 0 { 1 } else { -1 })
}

/// `(-1)^(number of set bits of mask below g)`.
pub fn position_sign(mask: u32, g: usize) -> i32 {
    if (mask & ((1u32 << g) - 1)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

fn scalar_from_i(k: i64) -> Scalar {
    Scalar::from_int(k)
}

impl Model {
    /// Builds any supported model from its description.
    pub fn from_spec(spec: &ModelSpec) -> Result<Arc<Model>> {
        match spec {
            ModelSpec::KroneckerTorus { alpha, field } => Model::torus(alpha.clone(), *field),
            ModelSpec::ConicDual { base } => Model::conic_dual(&*Model::from_spec(base)?),
            ModelSpec::CosphereCircle { base } => Model::cosphere_circle(&*Model::from_spec(base)?),
            ModelSpec::CircleProduct { base } => Model::circle_product(&*Model::from_spec(base)?),
            ModelSpec::LieFrame { dim, structure, leaf } => Model::lie_frame(*dim, structure, leaf),
        }
    }

    /// The Kronecker torus of dimension `alpha.len()` with leaf direction
    /// `sum alpha_j d/dx_j`.
    pub fn torus(alpha: Vec<Scalar>, field: Option<Field>) -> Result<Arc<Model>> {
        if alpha.is_empty() {
            return Err(Error::Validation("alpha must have at least one entry".into()));
        }
        if alpha.len() > 8 {
            return Err(Error::Validation("tori of dimension above 8 are not supported".into()));
        }
        let mut f = Field::gaussian();
        for a in &alpha {
            f = f.join(&a.field())?;
        }
        if let Some(given) = field {
            if given.join(&f)? != given {
                return Err(Error::Validation(format!("alpha does not lie in the declared field {given}")));
            }
            f = given;
        }
        let alpha: Vec<Scalar> = alpha.iter().map(|a| a.lift(&f)).collect::<Result<_>>()?;
        if let Some(k) = alpha.iter().position(|a| !a.is_real()) {
            return Err(Error::Validation(format!("alpha[{k}] is not real")));
        }
        let pivot = alpha
            .iter()
            .position(|a| !a.is_zero())
            .ok_or_else(|| Error::Validation("alpha must not be zero".into()))?;
        let transverse_axes: Vec<usize> = (0..alpha.len()).filter(|&j| j != pivot).collect();
        let frame = TorusFrame { alpha, pivot, transverse_axes };
        let resonance = resonance_lattice(&frame.alpha)?;
        let q = frame.alpha.len() - 1;
        let mut names = vec!["theta".to_string()];
        names.extend((1..=q).map(|i| format!("eta{i}")));
        Ok(Arc::new(Model::assemble(
            Family::KroneckerTorus,
            f,
            Base::Torus(frame),
            (false, false, false),
            names,
            1,
            q,
            resonance,
        )))
    }

    /// Invariant forms on a Lie group foliated by the subalgebra spanned by
    /// the `leaf` frame vectors (1-based indices).
    pub fn lie_frame(dim: usize, structure: &[(usize, usize, usize, Scalar)], leaf: &[usize]) -> Result<Arc<Model>> {
        let m = Model::lie_frame_unchecked(dim, structure, leaf)?;
        let Base::Lie(frame) = &m.base else { unreachable!() };
        if let Some((i, j, l, k)) = frame.jacobi_violation() {
            return Err(Error::Validation(format!(
                "Jacobi identity fails for (e{}, e{}, e{}) in component e{}",
                i + 1,
                j + 1,
                l + 1,
                k + 1
            )));
        }
        Ok(m)
    }

    /// As [`Model::lie_frame`] without the Jacobi check. Intended for negative
    /// controls of the identity suite; the leaf span must still be a
    /// subalgebra so that the bigraded splitting exists.
    pub fn lie_frame_unchecked(
        dim: usize,
        structure: &[(usize, usize, usize, Scalar)],
        leaf: &[usize],
    ) -> Result<Arc<Model>> {
        if dim == 0 || dim > 12 {
            return Err(Error::Validation(format!("unsupported Lie frame dimension {dim}")));
        }
        let mut c = vec![vec![vec![Scalar::zero(); dim]; dim]; dim];
        let mut field = Field::gaussian();
        for (i, j, k, v) in structure {
            let (i, j, k) = (*i, *j, *k);
            if i == 0 || j == 0 || k == 0 || i > dim || j > dim || k > dim {
                return Err(Error::Validation(format!("structure index ({i}, {j}, {k}) outside 1..={dim}")));
            }
            if i == j && !v.is_zero() {
                return Err(Error::Validation(format!("[e{i}, e{i}] must vanish")));
            }
            let (i, j, k) = (i - 1, j - 1, k - 1);
            for (a, b, val) in [(i, j, v.clone()), (j, i, -v)] {
                let cell = &mut c[k][a][b];
                if !cell.is_zero() && *cell != val {
                    return Err(Error::Validation(format!(
                        "conflicting structure constants for [e{}, e{}] on e{}",
                        i + 1,
                        j + 1,
                        k + 1
                    )));
                }
                *cell = val;
            }
            field = field.join(&v.field())?;
        }
        let mut leaf0: Vec<usize> = Vec::new();
        for &a in leaf {
            if a == 0 || a > dim || leaf0.contains(&(a - 1)) {
                return Err(Error::Validation(format!("invalid leaf index {a}")));
            }
            leaf0.push(a - 1);
        }
        if leaf0.is_empty() {
            return Err(Error::Validation("leaf must contain at least one frame vector".into()));
        }
        leaf0.sort_unstable();
        let complement: Vec<usize> = (0..dim).filter(|k| !leaf0.contains(k)).collect();
        for &a in &leaf0 {
            for &b in &leaf0 {
                if let Some(&k) = complement.iter().find(|&&k| !c[k][a][b].is_zero()) {
                    return Err(Error::Validation(format!(
                        "leaf span is not a subalgebra: [e{}, e{}] has an e{} component",
                        a + 1,
                        b + 1,
                        k + 1
                    )));
                }
            }
        }
        let names: Vec<String> = leaf0.iter().chain(&complement).map(|k| format!("e{}", k + 1)).collect();
        let (p, q) = (leaf0.len(), complement.len());
        let frame = LieFrame { dim, structure: c, leaf: leaf0, complement };
        Ok(Arc::new(Model::assemble(
            Family::LieFrame,
            field,
            Base::Lie(frame),
            (false, false, false),
            names,
            p,
            q,
            Vec::new(),
        )))
    }

    /// The dual of the leaf line bundle minus its zero section, foliated by
    /// `L x (R \ 0)`. Requires one-dimensional leaves.
    pub fn conic_dual(base: &Model) -> Result<Arc<Model>> {
        base.require_plain_base("conic dual")?;
        if base.n_long != 1 {
            return Err(Error::UnsupportedModel("conic duals need one-dimensional leaves".into()));
        }
        Ok(Arc::new(base.extend(Family::ConicDual, true, false, true)))
    }

    /// `S*F x S^1`: two copies (one per sheet) of `M x S^1` foliated by `L x S^1`.
    pub fn cosphere_circle(base: &Model) -> Result<Arc<Model>> {
        base.require_plain_base("cosphere-circle bundle")?;
        base.require_torus("cosphere-circle bundle")?;
        if base.n_long != 1 {
            return Err(Error::UnsupportedModel("cosphere bundles need one-dimensional leaves".into()));
        }
        Ok(Arc::new(base.extend(Family::CosphereCircle, false, true, true)))
    }

    /// The product bundle `M x S^1` foliated by `L x S^1`.
    pub fn circle_product(base: &Model) -> Result<Arc<Model>> {
        base.require_plain_base("circle product")?;
        base.require_torus("circle product")?;
        Ok(Arc::new(base.extend(Family::CircleProduct, false, true, false)))
    }

    fn require_plain_base(&self, what: &str) -> Result<()> {
        if self.radial || self.circle || self.sheets {
            return Err(Error::UnsupportedModel(format!("a {what} needs a torus or Lie frame base")));
        }
        Ok(())
    }

    fn require_torus(&self, what: &str) -> Result<()> {
        if !matches!(self.base, Base::Torus(_)) {
            return Err(Error::UnsupportedModel(format!("a {what} is only available over a Kronecker torus")));
        }
        Ok(())
    }

    fn extend(&self, family: Family, radial: bool, circle: bool, sheets: bool) -> Model {
        let mut names: Vec<String> = self.names[..self.n_long].to_vec();
        names.push(if radial { "dxi" } else { "dphi" }.to_string());
        names.extend(self.names[self.n_long..].iter().cloned());
        Model::assemble(
            family,
            self.field,
            self.base.clone(),
            (radial, circle, sheets),
            names,
            self.n_long + 1,
            self.n_trans,
            self.resonance.clone(),
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        family: Family,
        field: Field,
        base: Base,
        (radial, circle, sheets): (bool, bool, bool),
        names: Vec<String>,
        n_long: usize,
        n_trans: usize,
        resonance: Vec<Vec<i64>>,
    ) -> Model {
        let extra = radial || circle;
        let base_long = if extra { n_long - 1 } else { n_long };
        let extra_gen = extra.then_some(base_long);
        let mut frame_index = Vec::new();
        if let Base::Lie(lf) = &base {
            frame_index = lf.leaf.iter().chain(&lf.complement).copied().collect();
        }
        let mut model = Model {
            family,
            field,
            base,
            radial,
            circle,
            sheets,
            names,
            n_long,
            n_trans,
            xi_gen: if radial { extra_gen } else { None },
            phi_gen: if circle { extra_gen } else { None },
            frame_index,
            gen_diff: [Vec::new(), Vec::new(), Vec::new()],
            resonance,
        };
        model.gen_diff = model.split_generator_differentials();
        model
    }

    /// Generator index of the `k`-th base generator (skipping `dxi`/`dphi`).
    fn base_gen(&self, k: usize) -> usize {
        let base_long = self.n_long - usize::from(self.radial || self.circle);
        if k < base_long {
            k
        } else {
            k + usize::from(self.radial || self.circle)
        }
    }

    fn split_generator_differentials(&self) -> [Vec<Vec<(u32, Scalar)>>; 3] {
        let ng = self.names.len();
        let mut out: [Vec<Vec<(u32, Scalar)>>; 3] = [vec![Vec::new(); ng], vec![Vec::new(); ng], vec![Vec::new(); ng]];
        let Base::Lie(lf) = &self.base else { return out };
        // Chevalley-Eilenberg: d e^k = - sum_{i<j} c^k_{ij} e^i ^ e^j.
        let gen_of_frame: BTreeMap<usize, usize> =
            self.frame_index.iter().enumerate().map(|(b, &f)| (f, self.base_gen(b))).collect();
        for (&fk, &gk) in &gen_of_frame {
            for i in 0..lf.dim {
                for j in i + 1..lf.dim {
                    let c = lf.bracket_coeff(i, j, fk);
                    if c.is_zero() {
                        continue;
                    }
                    let (gi, gj) = (gen_of_frame[&i], gen_of_frame[&j]);
                    let (lo, hi) = if gi < gj { (gi, gj) } else { (gj, gi) };
                    let sign = if gi < gj { -1 } else { 1 };
                    let mask = (1u32 << lo) | (1u32 << hi);
                    let r_out = (mask & self.long_mask()).count_ones() as i32;
                    let r_in = i32::from(gk < self.n_long);
                    let slot = match r_out - r_in {
                        1 => 0,
                        0 => 1,
                        -1 => 2,
                        _ => unreachable!("integrable frame has no (2,-1) part"),
                    };
                    let v = c * &Scalar::from_int(sign);
                    let list = &mut out[slot][gk];
                    match list.iter_mut().find(|(m, _)| *m == mask) {
                        Some((_, acc)) => *acc += &v,
                        None => list.push((mask, v)),
                    }
                }
            }
        }
        for comp in out.iter_mut() {
            for list in comp.iter_mut() {
                list.retain(|(_, v)| !v.is_zero());
            }
        }
        out
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn base(&self) -> &Base {
        &self.base
    }

    pub fn torus_frame(&self) -> Option<&TorusFrame> {
        match &self.base {
            Base::Torus(t) => Some(t),
            Base::Lie(_) => None,
        }
    }

    pub fn lie_frame_data(&self) -> Option<&LieFrame> {
        match &self.base {
            Base::Lie(l) => Some(l),
            Base::Torus(_) => None,
        }
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    pub fn has_circle(&self) -> bool {
        self.circle
    }

    pub fn has_sheets(&self) -> bool {
        self.sheets
    }

    /// Number of Fourier axes (torus dimension; zero for Lie frames).
    pub fn mode_dim(&self) -> usize {
        self.torus_frame().map_or(0, |t| t.alpha.len())
    }

    /// Leaf dimension.
    pub fn leaf_dim(&self) -> usize {
        self.n_long
    }

    /// Codimension.
    pub fn codim(&self) -> usize {
        self.n_trans
    }

    pub fn num_generators(&self) -> usize {
        self.names.len()
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    pub fn generator(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn xi_generator(&self) -> Option<usize> {
        self.xi_gen
    }

    pub fn phi_generator(&self) -> Option<usize> {
        self.phi_gen
    }

    pub fn long_mask(&self) -> u32 {
        (1u32 << self.n_long) - 1
    }

    pub fn trans_mask(&self) -> u32 {
        ((1u32 << self.names.len()) - 1) & !self.long_mask()
    }

    pub fn bidegree(&self, mask: u32) -> (usize, usize) {
        ((mask & self.long_mask()).count_ones() as usize, (mask & self.trans_mask()).count_ones() as usize)
    }

    /// Homogeneity degree under `xi -> t xi` (conic models).
    pub fn homogeneity(&self, m: &Monomial) -> i64 {
        let dxi = self.xi_gen.is_some_and(|g| m.mask & (1 << g) != 0);
        m.xi + i64::from(dxi)
    }

    /// Primitive integer generators of `{m : m . alpha = 0}` (empty when
    /// non-resonant or for Lie frames).
    pub fn resonance_lattice(&self) -> &[Vec<i64>] {
        &self.resonance
    }

    pub fn is_resonant_mode(&self, m: &[i64]) -> bool {
        match &self.base {
            Base::Torus(t) => m.iter().any(|&k| k != 0) && t.frequency(m).is_zero(),
            Base::Lie(_) => false,
        }
    }

    /// The underlying torus or Lie frame model without extensions.
    pub fn base_model(&self) -> Arc<Model> {
        let (p, q) = match &self.base {
            Base::Torus(t) => (1, t.alpha.len() - 1),
            Base::Lie(l) => (l.leaf.len(), l.complement.len()),
        };
        let family = match &self.base {
            Base::Torus(_) => Family::KroneckerTorus,
            Base::Lie(_) => Family::LieFrame,
        };
        let mut names = self.names[..p].to_vec();
        names.extend(self.names[self.n_long..].iter().cloned());
        Arc::new(Model::assemble(
            family,
            self.field,
            self.base.clone(),
            (false, false, false),
            names,
            p,
            q,
            self.resonance.clone(),
        ))
    }

    /// The function-part monomial `e_m` (no radial or circle factor).
    pub fn unit_monomial(&self) -> Monomial {
        Monomial { mode: vec![0; self.mode_dim()], phi: 0, xi: 0, sheet: self.sheets.then_some(Sign::Plus), mask: 0 }
    }

    fn check_monomial(&self, m: &Monomial) -> Result<()> {
        let ok = m.mode.len() == self.mode_dim()
            && (self.circle || m.phi == 0)
            && (self.radial || m.xi == 0)
            && (self.sheets == m.sheet.is_some())
            && m.mask >> self.names.len() == 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("monomial {m:?} does not belong to this model")))
        }
    }

    /// Applies a differential component to a single monomial.
    pub fn differentiate(&self, comp: Component, mon: &Monomial) -> Vec<(Monomial, Scalar)> {
        if comp == Component::D {
            let mut acc: BTreeMap<Monomial, Scalar> = BTreeMap::new();
            for c in Component::PARTS {
                for (m, v) in self.differentiate(c, mon) {
                    *acc.entry(m).or_default() += &v;
                }
            }
            return acc.into_iter().filter(|(_, v)| !v.is_zero()).collect();
        }
        let slot = Component::PARTS.iter().position(|c| *c == comp).unwrap();
        let mut out: Vec<(Monomial, Scalar)> = Vec::new();
        // Derivative of the function part, wedged in front.
        for (g, coef, xi_shift) in self.function_derivative(comp, mon) {
            if mon.mask & (1 << g) != 0 {
                continue;
            }
            let sign = position_sign(mon.mask, g);
            let mut m = mon.with_mask(mon.mask | (1 << g));
            m.xi += xi_shift;
            out.push((m, coef * &Scalar::from_int(sign as i64)));
        }
        // Graded Leibniz rule over the generators.
        let mut bits = mon.mask;
        while bits != 0 {
            let g = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let values = &self.gen_diff[slot][g];
            if values.is_empty() {
                continue;
            }
            let before = mon.mask & ((1u32 << g) - 1);
            let after = mon.mask & !((1u32 << (g + 1)) - 1);
            let pos = if before.count_ones().is_multiple_of(2) { 1 } else { -1 };
            for (pmask, c) in values {
                let Some(s1) = wedge_sign(before, *pmask) else { continue };
                let Some(s2) = wedge_sign(before | pmask, after) else { continue };
                let sign = pos * s1 * s2;
                out.push((mon.with_mask(before | pmask | after), c * &Scalar::from_int(sign as i64)));
            }
        }
        combine(out)
    }

    /// `(generator, coefficient, change of xi exponent)` for the component
    /// applied to the function part of `mon`.
    fn function_derivative(&self, comp: Component, mon: &Monomial) -> Vec<(usize, Scalar, i64)> {
        let mut out = Vec::new();
        match comp {
            Component::DF => {
                if let Base::Torus(t) = &self.base {
                    let f = t.frequency(&mon.mode);
                    if !f.is_zero() {
                        out.push((0, f, 0));
                    }
                }
                if let Some(g) = self.xi_gen {
                    if mon.xi != 0 {
                        out.push((g, scalar_from_i(mon.xi), -1));
                    }
                }
                if let Some(g) = self.phi_gen {
                    if mon.phi != 0 {
                        out.push((g, scalar_from_i(mon.phi), 0));
                    }
                }
            }
            Component::DPerp => {
                if let Base::Torus(t) = &self.base {
                    for (i, &axis) in t.transverse_axes.iter().enumerate() {
                        let k = mon.mode[axis];
                        if k != 0 {
                            out.push((self.n_long + i, scalar_from_i(k), 0));
                        }
                    }
                }
            }
            Component::Boundary | Component::D => {}
        }
        out
    }

    /// Interior product with the frame vector dual to generator `g`.
    pub fn contract(&self, g: usize, mon: &Monomial) -> Option<(Monomial, i32)> {
        if mon.mask & (1 << g) == 0 {
            return None;
        }
        Some((mon.with_mask(mon.mask & !(1 << g)), position_sign(mon.mask, g)))
    }

    /// All block labels within a window: Fourier mode, circle mode, sheet and
    /// homogeneity degree (the last only for radial models).
    pub fn block_keys(&self, window: &ModeWindow) -> Vec<BlockKey> {
        let b = window.bound;
        let mut modes: Vec<Vec<i64>> = vec![Vec::new()];
        for _ in 0..self.mode_dim() {
            modes = modes
                .into_iter()
                .flat_map(|m| {
                    (-b..=b).map(move |k| {
                        let mut m2 = m.clone();
                        m2.push(k);
                        m2
                    })
                })
                .collect();
        }
        let phis: Vec<i64> = if self.circle { (-b..=b).collect() } else { vec![0] };
        let sheets: Vec<Option<Sign>> = if self.sheets { Sign::BOTH.map(Some).to_vec() } else { vec![None] };
        let ls: Vec<i64> = if self.radial { (window.l_min..=window.l_max).collect() } else { vec![0] };
        let mut keys = Vec::new();
        for m in &modes {
            for &phi in &phis {
                for &sheet in &sheets {
                    for &l in &ls {
                        keys.push(BlockKey { mode: m.clone(), phi, sheet, l });
                    }
                }
            }
        }
        keys
    }

    /// Basis monomials of bidegree `(r, s)` in a block.
    pub fn block_basis(&self, key: &BlockKey, r: usize, s: usize) -> Vec<Monomial> {
        let mut out = Vec::new();
        for mask in masks_with(self.n_long, r) {
            for tmask in masks_with(self.n_trans, s) {
                let mask = mask | (tmask << self.n_long);
                out.push(self.block_monomial(key, mask));
            }
        }
        out
    }

    /// Basis monomials of total degree `k` in a block.
    pub fn block_basis_degree(&self, key: &BlockKey, k: usize) -> Vec<Monomial> {
        (0..=k.min(self.n_long))
            .filter(|&r| k - r <= self.n_trans)
            .flat_map(|r| self.block_basis(key, r, k - r))
            .collect()
    }

    /// The monomial with the given mask in a block (its `xi` exponent is
    /// fixed by the block's homogeneity degree).
    pub fn block_monomial(&self, key: &BlockKey, mask: u32) -> Monomial {
        let dxi = self.xi_gen.is_some_and(|g| mask & (1 << g) != 0);
        Monomial {
            mode: key.mode.clone(),
            phi: key.phi,
            xi: if self.radial { key.l - i64::from(dxi) } else { 0 },
            sheet: key.sheet,
            mask,
        }
    }

    pub fn block_of(&self, m: &Monomial) -> BlockKey {
        BlockKey {
            mode: m.mode.clone(),
            phi: m.phi,
            sheet: m.sheet,
            l: if self.radial { self.homogeneity(m) } else { 0 },
        }
    }

    pub fn monomial_label(&self, m: &Monomial) -> String {
        let mut parts: Vec<String> = Vec::new();
        if m.mode.iter().any(|&k| k != 0) {
            let ms: Vec<String> = m.mode.iter().map(i64::to_string).collect();
            parts.push(format!("e({})", ms.join(",")));
        }
        if m.phi != 0 {
            parts.push(format!("exp({}phi)", m.phi));
        }
        if m.xi != 0 {
            parts.push(format!("xi^{}", m.xi));
        }
        let gens: Vec<&str> =
            (0..self.names.len()).filter(|g| m.mask & (1 << g) != 0).map(|g| self.names[g].as_str()).collect();
        if !gens.is_empty() {
            parts.push(gens.join("^"));
        }
        let body = if parts.is_empty() { "1".to_string() } else { parts.join(" ") };
        match m.sheet {
            Some(s) => format!("[{}] {body}", s.symbol()),
            None => body,
        }
    }
}

fn masks_with(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1 << n)).filter(|m| m.count_ones() as usize == k).collect()
}

fn combine(terms: Vec<(Monomial, Scalar)>) -> Vec<(Monomial, Scalar)> {
    let mut acc: BTreeMap<Monomial, Scalar> = BTreeMap::new();
    for (m, v) in terms {
        *acc.entry(m).or_default() += &v;
    }
    acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
}

/// Primitive integer generators of the rational kernel of `m -> m . alpha`,
/// computed from the rational coordinates of `alpha` in the field's Q-basis.
fn resonance_lattice(alpha: &[Scalar]) -> Result<Vec<Vec<i64>>> {
    let n = alpha.len();
    let entries: Vec<(usize, usize, Scalar)> = (0..8)
        .flat_map(|b| alpha.iter().enumerate().map(move |(j, a)| (b, j, Scalar::from_rational(a.coeff(b).clone()))))
        .collect();
    let m = SparseMatrix::new(8, n, entries)?;
    let (_, kernel) = m.rank_kernel();
    Ok(kernel.iter().map(|v| primitive_integer_vector(v, n)).collect())
}

fn primitive_integer_vector(v: &crate::linalg::SparseVec, n: usize) -> Vec<i64> {
    use num_integer::Integer;
    use num_traits::{Signed, ToPrimitive, Zero};
    let mut den = num_bigint::BigInt::from(1);
    for (_, x) in v {
        den = den.lcm(x.as_rational().expect("rational kernel").denom());
    }
    let mut ints = vec![num_bigint::BigInt::zero(); n];
    for (k, x) in v {
        let q = x.as_rational().unwrap();
        ints[*k] = q.numer() * (&den / q.denom());
    }
    let g = ints.iter().fold(num_bigint::BigInt::zero(), |g, x| g.gcd(x));
    let first_neg = ints.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative());
    ints.iter()
        .map(|x| {
            let y = x / &g;
            let y = if first_neg { -y } else { y };
            y.to_i64().expect("resonance vector entries fit in i64")
        })
        .collect()
}

/// Truncation of the Fourier complex: modes with `|m_j| <= bound` (and circle
/// modes `|k| <= bound`) and homogeneity degrees `l_min..=l_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeWindow {
    pub bound: i64,
    pub l_min: i64,
    pub l_max: i64,
}

impl ModeWindow {
    pub fn new(bound: i64, l_min: i64, l_max: i64) -> Result<Self> {
        if bound < 0 {
            return Err(Error::Window(format!("mode bound {bound} is negative")));
        }
        if l_min > l_max {
            return Err(Error::Window(format!("empty degree range {l_min}:{l_max}")));
        }
        Ok(ModeWindow { bound, l_min, l_max })
    }

    pub fn modes(bound: i64) -> Self {
        ModeWindow { bound, l_min: 0, l_max: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockKey {
    pub mode: Vec<i64>,
    pub phi: i64,
    pub sheet: Option<Sign>,
    pub l: i64,
}

/// A finite linear combination of monomials over one model.
#[derive(Clone)]
pub struct Form {
    model: Arc<Model>,
    terms: BTreeMap<Monomial, Scalar>,
}

impl Form {
    pub fn zero(model: &Arc<Model>) -> Form {
        Form { model: model.clone(), terms: BTreeMap::new() }
    }

    pub fn monomial(model: &Arc<Model>, m: Monomial, c: Scalar) -> Result<Form> {
        model.check_monomial(&m)?;
        let mut f = Form::zero(model);
        if !c.is_zero() {
            f.terms.insert(m, c);
        }
        Ok(f)
    }

    pub fn from_terms(model: &Arc<Model>, terms: impl IntoIterator<Item = (Monomial, Scalar)>) -> Result<Form> {
        let mut f = Form::zero(model);
        for (m, c) in terms {
            model.check_monomial(&m)?;
            f.add_term(m, &c);
        }
        Ok(f)
    }

    /// The constant function 1 (on the `+` sheet when sheets are present).
    pub fn one(model: &Arc<Model>) -> Form {
        Form::monomial(model, model.unit_monomial(), Scalar::one()).unwrap()
    }

    /// The Fourier mode `e_m` (on the `+` sheet when sheets are present).
    pub fn exp(model: &Arc<Model>, mode: &[i64]) -> Result<Form> {
        let m = Monomial { mode: mode.to_vec(), ..model.unit_monomial() };
        Form::monomial(model, m, Scalar::one())
    }

    /// A coframe generator by name.
    pub fn generator(model: &Arc<Model>, name: &str) -> Result<Form> {
        let g = model.generator(name).ok_or_else(|| Error::InvalidArgument(format!("unknown generator {name:?}")))?;
        let m = Monomial { mask: 1 << g, ..model.unit_monomial() };
        Form::monomial(model, m, Scalar::one())
    }

    /// `xi^j` on the `+` sheet (radial models).
    pub fn xi_power(model: &Arc<Model>, j: i64) -> Result<Form> {
        if !model.radial {
            return Err(Error::UnsupportedModel("xi only exists on conic models".into()));
        }
        let m = Monomial { xi: j, ..model.unit_monomial() };
        Form::monomial(model, m, Scalar::one())
    }

    /// Moves every term to the given sheet.
    pub fn on_sheet(&self, sheet: Sign) -> Form {
        let mut out = Form::zero(&self.model);
        for (m, c) in &self.terms {
            let mut m = m.clone();
            if m.sheet.is_some() {
                m.sheet = Some(sheet);
            }
            out.add_term(m, c);
        }
        out
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Scalar> {
        &self.terms
    }

    pub fn coeff(&self, m: &Monomial) -> Scalar {
        self.terms.get(m).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: &Scalar) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    fn same_model(&self, other: &Form) -> Result<()> {
        if Arc::ptr_eq(&self.model, &other.model) || *self.model == *other.model {
            Ok(())
        } else {
            Err(Error::ModelMismatch)
        }
    }

    pub fn plus(&self, other: &Form) -> Result<Form> {
        self.same_model(other)?;
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn minus(&self, other: &Form) -> Result<Form> {
        self.plus(&other.scale(&Scalar::from_int(-1)))
    }

    pub fn scale(&self, c: &Scalar) -> Form {
        let mut out = Form::zero(&self.model);
        if c.is_zero() {
            return out;
        }
        out.terms = self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect();
        out
    }

    /// Exterior product. Terms on different sheets multiply to zero.
    pub fn wedge(&self, other: &Form) -> Result<Form> {
        self.same_model(other)?;
        let mut out = Form::zero(&self.model);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if a.sheet != b.sheet {
                    continue;
                }
                let Some(sign) = wedge_sign(a.mask, b.mask) else { continue };
                let m = Monomial {
                    mode: a.mode.iter().zip(&b.mode).map(|(x, y)| x + y).collect(),
                    phi: a.phi + b.phi,
                    xi: a.xi + b.xi,
                    sheet: a.sheet,
                    mask: a.mask | b.mask,
                };
                out.add_term(m, &(&(ca * cb) * &Scalar::from_int(sign as i64)));
            }
        }
        Ok(out)
    }

    /// The component of bidegree `(r, s)`.
    pub fn bidegree_project(&self, r: usize, s: usize) -> Form {
        self.filter(|m| self.model.bidegree(m.mask) == (r, s))
    }

    /// Splits a conic-model form into its homogeneous components.
    pub fn homogeneity_decompose(&self) -> Result<BTreeMap<i64, Form>> {
        if !self.model.radial {
            return Err(Error::UnsupportedModel("homogeneity is only defined on conic models".into()));
        }
        let mut out: BTreeMap<i64, Form> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(self.model.homogeneity(m)).or_insert_with(|| Form::zero(&self.model)).add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Form {
        let mut out = Form::zero(&self.model);
        out.terms = self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect();
        out
    }

    /// Applies a monomial-level linear map.
    pub fn map_terms(&self, f: impl Fn(&Monomial) -> Vec<(Monomial, Scalar)>) -> Form {
        let mut out = Form::zero(&self.model);
        for (m, c) in &self.terms {
            for (m2, v) in f(m) {
                out.add_term(m2, &(&v * c));
            }
        }
        out
    }

    /// Applies a differential component.
    pub fn differential(&self, comp: Component) -> Form {
        let model = self.model.clone();
        self.map_terms(|m| model.differentiate(comp, m))
    }

    /// True when every term has total degree `k`.
    pub fn is_homogeneous_degree(&self, k: usize) -> bool {
        self.terms.keys().all(|m| m.degree() == k)
    }

    /// Bidegree of the form, if pure.
    pub fn pure_bidegree(&self) -> Option<(usize, usize)> {
        let mut it = self.terms.keys().map(|m| self.model.bidegree(m.mask));
        let first = it.next()?;
        it.all(|b| b == first).then_some(first)
    }
}

impl PartialEq for Form {
    fn eq(&self, other: &Form) -> bool {
        self.terms == other.terms && (Arc::ptr_eq(&self.model, &other.model) || *self.model == *other.model)
    }
}

impl fmt::Debug for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Form({self})")
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> =
            self.terms.iter().map(|(m, c)| format!("({c}) {}", self.model.monomial_label(m))).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Matrix of a monomial-level linear map from `src` to `tgt` (columns are
/// sources). Fails if an image term falls outside `tgt`.
pub fn operator_matrix(
    src: &[Monomial],
    tgt: &[Monomial],
    op: impl Fn(&Monomial) -> Vec<(Monomial, Scalar)>,
) -> Result<SparseMatrix> {
    let index: BTreeMap<&Monomial, usize> = tgt.iter().enumerate().map(|(k, m)| (m, k)).collect();
    let mut entries = Vec::new();
    for (c, m) in src.iter().enumerate() {
        for (img, v) in op(m) {
            let r = *index.get(&img).ok_or_else(|| {
                Error::Shape(format!("operator image {img:?} of {m:?} lies outside the target basis"))
            })?;
            entries.push((r, c, v));
        }
    }
    Ok(SparseMatrix::accumulate(tgt.len(), src.len(), entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Scalar {
        Scalar::parse(x).unwrap()
    }

    fn t2() -> Arc<Model> {
        Model::torus(vec![s("1"), s("sqrt2")], None).unwrap()
    }

    #[test]
    fn torus_coframe() {
        let m = t2();
        assert_eq!(m.generator_names(), ["theta", "eta1"]);
        assert!(m.resonance_lattice().is_empty());
        let e = Form::exp(&m, &[1, 0]).unwrap();
        let th = Form::generator(&m, "theta").unwrap();
        assert_eq!(e.differential(Component::DF), e.wedge(&th).unwrap());
    }

    #[test]
    fn resonant_torus() {
        let m = Model::torus(vec![s("1"), s("sqrt2"), s("sqrt2-1")], None).unwrap();
        assert_eq!(m.resonance_lattice(), [vec![1, -1, 1]]);
        let m = Model::torus(vec![s("1"), s("2")], None).unwrap();
        assert_eq!(m.resonance_lattice(), [vec![2, -1]]);
    }

    #[test]
    fn wedge_examples() {
        let m = t2();
        let th = Form::generator(&m, "theta").unwrap();
        let eta = Form::generator(&m, "eta1").unwrap();
        assert!(th.wedge(&th).unwrap().is_zero());
        assert_eq!(th.wedge(&eta).unwrap(), eta.wedge(&th).unwrap().scale(&s("-1")));
        let a = Form::exp(&m, &[1, 2]).unwrap().wedge(&th).unwrap();
        let b = Form::exp(&m, &[-3, 1]).unwrap().wedge(&eta).unwrap();
        let expect = Form::exp(&m, &[-2, 3]).unwrap().wedge(&th.wedge(&eta).unwrap()).unwrap();
        assert_eq!(a.wedge(&b).unwrap(), expect);
    }

    #[test]
    fn projections_and_homogeneity() {
        let m = t2();
        let th = Form::generator(&m, "theta").unwrap();
        let eta = Form::generator(&m, "eta1").unwrap();
        let te = th.wedge(&eta).unwrap();
        assert_eq!(te.bidegree_project(1, 1), te);
        assert!(te.bidegree_project(2, 0).is_zero());
        assert_eq!(th.plus(&eta).unwrap().bidegree_project(1, 0), th);
        assert!(th.homogeneity_decompose().is_err());

        let x = Model::conic_dual(&m).unwrap();
        let xi = Form::xi_power(&x, 1).unwrap();
        let dxi = Form::generator(&x, "dxi").unwrap();
        let th = Form::generator(&x, "theta").unwrap();
        let f = xi.wedge(&dxi).unwrap();
        let h = f.homogeneity_decompose().unwrap();
        assert_eq!(h.keys().copied().collect::<Vec<_>>(), [2]);
        let g = xi.wedge(&th).unwrap().plus(&dxi).unwrap();
        assert_eq!(g.homogeneity_decompose().unwrap()[&1], g);
    }

    #[test]
    fn model_mismatch() {
        let a = t2();
        let b = Model::torus(vec![s("1"), s("sqrt3")], None).unwrap();
        let fa = Form::one(&a);
        let fb = Form::one(&b);
        assert_eq!(fa.wedge(&fb), Err(Error::ModelMismatch));
    }

    #[test]
    fn so3_boundary() {
        let one = Scalar::one();
        let so3 = Model::lie_frame(3, &[(1, 2, 3, one.clone()), (2, 3, 1, one.clone()), (3, 1, 2, one.clone())], &[3])
            .unwrap();
        let e3 = Form::generator(&so3, "e3").unwrap();
        let e1 = Form::generator(&so3, "e1").unwrap();
        let e2 = Form::generator(&so3, "e2").unwrap();
        let expect = e1.wedge(&e2).unwrap().scale(&s("-1"));
        assert_eq!(e3.differential(Component::Boundary), expect);
        assert!(e3.differential(Component::DF).is_zero());
    }

    #[test]
    fn lie_validation() {
        let one = Scalar::one();
        // [e1,e2]=e3, [e1,e3]=e1 breaks Jacobi.
        let bad = Model::lie_frame(3, &[(1, 2, 3, one.clone()), (1, 3, 1, one.clone())], &[3]);
        assert!(matches!(bad, Err(Error::Validation(_))));
        // so(3) with F = span(e1, e2) is not a subalgebra.
        let so3 = [(1, 2, 3, one.clone()), (2, 3, 1, one.clone()), (3, 1, 2, one.clone())];
        assert!(Model::lie_frame(3, &so3, &[1, 2]).is_err());
        assert!(Model::lie_frame(3, &so3, &[4]).is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"family": "conic_dual", "base": {"family": "kronecker_torus", "alpha": ["1", "sqrt2"]}}"#;
        let spec = ModelSpec::from_json(text).unwrap();
        let m = Model::from_spec(&spec).unwrap();
        assert_eq!(m.family(), Family::ConicDual);
        assert_eq!(m.generator_names(), ["theta", "dxi", "eta1"]);
        let again = ModelSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(again, spec);
        let err = ModelSpec::from_json(r#"{"family": "kronecker_torus", "alpha": ["1+"]}"#).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }
}
