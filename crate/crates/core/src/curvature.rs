//! Christoffel symbols, curvature, Ricci forms, scalar curvatures and torsion of the
//! Gauduchon connections ∇^t (t = 1 Chern, t = −1 Bismut).
//!
//! Curvature is R_{ij̄kl̄} = g(Ω(∂_i, ∂̄_j)∂_k, ∂̄_l) in arbitrary coordinates:
//! R_{ij̄kl̄} = −g_{pl̄}(∂̄_j Γ^p_{ik} − ∂_i Γ^p_{j̄k} + Γ^s_{ik} Γ^p_{j̄s} − Γ^s_{j̄k} Γ^p_{is}).
//! The Ricci form is ρ = √−1 tr Ω; with this sign the Fubini–Study metric has Ric = (n+1) g,
//! so no global negation is applied.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GyError, Result};
use crate::field::{CurvatureField, FormType, OneFormField, ScalarField, TwoFormField};
use crate::grid::ChartGrid;
use crate::linalg;
use crate::metric::{MetricField, MetricFn};
use crate::spectral::Spectral;
use crate::stencil;

/// Sign applied to the raw curvature formula (recorded in reports).
pub const CURVATURE_SIGN: f64 = 1.0;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GauduchonParam {
    pub t: f64,
    pub n: usize,
}

impl GauduchonParam {
    pub fn new(t: f64, n: usize) -> Result<Self> {
        if !t.is_finite() {
            return Err(GyError::Contract(format!(
                "parameter t = {t} must be finite"
            )));
        }
        if n == 0 {
            return Err(GyError::Dimension(
                "complex dimension must be at least 1".into(),
            ));
        }
        Ok(GauduchonParam { t, n })
    }

    pub fn chern(n: usize) -> Self {
        GauduchonParam { t: 1.0, n }
    }

    pub fn bismut(n: usize) -> Self {
        GauduchonParam { t: -1.0, n }
    }

    /// C_t = 1 + n t − t.
    pub fn c_t(&self) -> f64 {
        1.0 + (self.n as f64 - 1.0) * self.t
    }

    pub fn is_critical(&self) -> bool {
        self.c_t().abs() < 1e-12
    }
}

fn check_param(g: &MetricField, p: GauduchonParam) -> Result<()> {
    if g.n() != p.n {
        return Err(GyError::Dimension(format!(
            "parameter built for n = {} applied to a metric of dimension {}",
            p.n,
            g.n()
        )));
    }
    Ok(())
}

#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

/// Γ^k_{ij} and Γ^k_{īj} at one node, both stored at index (k n + i) n + j.
pub(crate) fn christoffel_local(
    n: usize,
    t: f64,
    ginv: &[C64],
    dg: &[C64],
    dbg: &[C64],
    gam: &mut [C64],
    gbar: &mut [C64],
) {
    let a = 0.5 * (1.0 + t);
    let b = 0.5 * (1.0 - t);
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut s1 = ZERO;
                let mut s2 = ZERO;
                for s in 0..n {
                    let gi = ginv[k * n + s];
                    s1 += gi * (a * dg[i3(n, i, j, s)] + b * dg[i3(n, j, i, s)]);
                    s2 += gi * (dbg[i3(n, i, j, s)] - dbg[i3(n, s, j, i)]);
                }
                gam[i3(n, k, i, j)] = s1;
                gbar[i3(n, k, i, j)] = b * s2;
            }
        }
    }
}

/// Traces A_i = Σ_k Γ^k_{ik} and B_j = Σ_k Γ^k_{j̄k}.
fn traces_local(n: usize, gam: &[C64], gbar: &[C64], a: &mut [C64], b: &mut [C64]) {
    for i in 0..n {
        a[i] = (0..n).map(|k| gam[i3(n, k, i, k)]).sum();
        b[i] = (0..n).map(|k| gbar[i3(n, k, i, k)]).sum();
    }
}

/// Everything at one chart point, computed from a closed-form metric.
struct CloudJet {
    ginv: Vec<C64>,
    dg: Vec<C64>,
    dbg: Vec<C64>,
}

fn cloud_jet(f: &MetricFn, z: &[C64], h: f64) -> CloudJet {
    let n = z.len();
    let g = f(z);
    let ginv = match linalg::invert(&g, n) {
        Some((inv, _)) => linalg::transpose(&inv, n),
        None => vec![C64::new(f64::NAN, 0.0); n * n],
    };
    let (d, db) = stencil::complex_partials(f.as_ref(), z, h);
    CloudJet {
        ginv,
        dg: d.concat(),
        dbg: db.concat(),
    }
}

fn cloud_christoffel(f: &MetricFn, z: &[C64], h: f64, t: f64) -> (Vec<C64>, Vec<C64>) {
    let n = z.len();
    let j = cloud_jet(f, z, h);
    let mut gam = vec![ZERO; n * n * n];
    let mut gbar = vec![ZERO; n * n * n];
    christoffel_local(n, t, &j.ginv, &j.dg, &j.dbg, &mut gam, &mut gbar);
    (gam, gbar)
}

fn cloud_source(g: &MetricField) -> Result<(MetricFn, f64)> {
    let f = g.source().cloned().ok_or_else(|| {
        GyError::Unsupported("point-cloud metric without closed form has no derivatives".into())
    })?;
    Ok((f, g.grid().stencil_h().unwrap_or(1e-3)))
}

/// Spectral gradients of node-major data with `stride` components per node.
/// Returns node-major arrays indexed [a][c] with stride n·stride.
fn spectral_gradients(
    sp: &Spectral,
    n: usize,
    data: &[C64],
    stride: usize,
) -> (Vec<C64>, Vec<C64>) {
    let nodes = data.len() / stride;
    let w = n * stride;
    let mut d = vec![ZERO; nodes * w];
    let mut db = vec![ZERO; nodes * w];
    for c in 0..stride {
        let comp: Vec<C64> = data.iter().skip(c).step_by(stride).copied().collect();
        if comp.iter().all(|v| *v == comp[0]) {
            continue;
        }
        let (dc, dbc) = sp.gradients(&comp);
        for a in 0..n {
            for k in 0..nodes {
                d[k * w + a * stride + c] = dc[a][k];
                db[k * w + a * stride + c] = dbc[a][k];
            }
        }
    }
    (d, db)
}

/// Christoffel symbols of ∇^t. The mixed block Γ^k_{ij̄} vanishes and is not stored.
#[derive(Debug, Clone)]
pub struct ChristoffelField {
    pub grid: Arc<ChartGrid>,
    pub n: usize,
    pub t: f64,
    /// Γ^k_{ij}, node-major, index (k n + i) n + j.
    pub gamma: Vec<C64>,
    /// Γ^k_{īj}, node-major, index (k n + i) n + j.
    pub gamma_bar: Vec<C64>,
}

impl ChristoffelField {
    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .chain(&self.gamma_bar)
            .fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_bar(&self) -> f64 {
        self.gamma_bar.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

pub fn christoffel(g: &MetricField, p: GauduchonParam) -> Result<ChristoffelField> {
    check_param(g, p)?;
    let n = g.n();
    let n3 = n * n * n;
    let nodes = g.len();
    let mut gamma = vec![ZERO; nodes * n3];
    let mut gamma_bar = vec![ZERO; nodes * n3];
    let d = g.derivs()?;
    gamma
        .par_chunks_mut(n3)
        .zip(gamma_bar.par_chunks_mut(n3))
        .enumerate()
        .for_each(|(k, (gk, gbk))| {
            christoffel_local(
                n,
                p.t,
                g.inv_at(k),
                &d.dg[k * n3..(k + 1) * n3],
                &d.dbg[k * n3..(k + 1) * n3],
                gk,
                gbk,
            );
        });
    Ok(ChristoffelField {
        grid: g.grid().clone(),
        n,
        t: p.t,
        gamma,
        gamma_bar,
    })
}

/// Connection data needed for the full curvature tensor at every node.
struct GammaJets {
    gamma: Vec<C64>,
    gamma_bar: Vec<C64>,
    /// ∂̄_a Γ^k_{ij}, node-major [a][k][i][j]
    db_gamma: Vec<C64>,
    /// ∂_a Γ^k_{īj}, node-major [a][k][i][j]
    d_gamma_bar: Vec<C64>,
}

fn gamma_jets(g: &MetricField, p: GauduchonParam) -> Result<GammaJets> {
    let n = g.n();
    let n3 = n * n * n;
    let n4 = n3 * n;
    if g.grid().is_periodic() {
        let cf = christoffel(g, p)?;
        let sp = g.grid().spectral()?;
        let (_, db_gamma) = spectral_gradients(sp, n, &cf.gamma, n3);
        let (d_gamma_bar, _) = spectral_gradients(sp, n, &cf.gamma_bar, n3);
        return Ok(GammaJets {
            gamma: cf.gamma,
            gamma_bar: cf.gamma_bar,
            db_gamma,
            d_gamma_bar,
        });
    }
    let (f, h) = cloud_source(g)?;
    let grid = g.grid().clone();
    let t = p.t;
    let per: Vec<[Vec<C64>; 4]> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let z = grid.point(k);
            let (gam, gbar) = cloud_christoffel(&f, &z, h, t);
            let both = |w: &[C64]| {
                let (a, b) = cloud_christoffel(&f, w, h, t);
                [a, b].concat()
            };
            let (d, db) = stencil::complex_partials(&both, &z, h);
            let mut dbg = vec![ZERO; n4];
            let mut dgb = vec![ZERO; n4];
            for a in 0..n {
                dbg[a * n3..(a + 1) * n3].copy_from_slice(&db[a][..n3]);
                dgb[a * n3..(a + 1) * n3].copy_from_slice(&d[a][n3..]);
            }
            [gam, gbar, dbg, dgb]
        })
        .collect();
    let mut jets = GammaJets {
        gamma: Vec::with_capacity(g.len() * n3),
        gamma_bar: Vec::with_capacity(g.len() * n3),
        db_gamma: Vec::with_capacity(g.len() * n4),
        d_gamma_bar: Vec::with_capacity(g.len() * n4),
    };
    for [a, b, c, d] in per {
        jets.gamma.extend(a);
        jets.gamma_bar.extend(b);
        jets.db_gamma.extend(c);
        jets.d_gamma_bar.extend(d);
    }
    Ok(jets)
}

/// Full curvature tensor R^t_{ij̄kl̄}.
pub fn curvature_tensor(g: &MetricField, p: GauduchonParam) -> Result<CurvatureField> {
    check_param(g, p)?;
    let n = g.n();
    let n3 = n * n * n;
    let n4 = n3 * n;
    let jets = gamma_jets(g, p)?;
    let nodes = g.len();
    let mut node_major = vec![ZERO; nodes * n4];
    node_major
        .par_chunks_mut(n4)
        .enumerate()
        .for_each(|(node, out)| {
            let gm = &jets.gamma[node * n3..(node + 1) * n3];
            let gb = &jets.gamma_bar[node * n3..(node + 1) * n3];
            let dbgm = &jets.db_gamma[node * n4..(node + 1) * n4];
            let dgb = &jets.d_gamma_bar[node * n4..(node + 1) * n4];
            let gk = g.at(node);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        // E^p = ∂̄_j Γ^p_{ik} − ∂_i Γ^p_{j̄k} + Γ^s_{ik}Γ^p_{j̄s} − Γ^s_{j̄k}Γ^p_{is}
                        let mut e = [ZERO; 16];
                        for (pp, ep) in e.iter_mut().enumerate().take(n) {
                            let mut v =
                                dbgm[j * n3 + i3(n, pp, i, k)] - dgb[i * n3 + i3(n, pp, j, k)];
                            for s in 0..n {
                                v += gm[i3(n, s, i, k)] * gb[i3(n, pp, j, s)]
                                    - gb[i3(n, s, j, k)] * gm[i3(n, pp, i, s)];
                            }
                            *ep = v;
                        }
                        for l in 0..n {
                            let r: C64 = (0..n).map(|pp| gk[pp * n + l] * e[pp]).sum();
                            out[i3(n, i, j, k) * n + l] = -CURVATURE_SIGN * r;
                        }
                    }
                }
            }
        });
    let r = (0..n4)
        .map(|c| node_major.iter().skip(c).step_by(n4).copied().collect())
        .collect();
    let field = CurvatureField {
        grid: g.grid().clone(),
        n,
        r,
    };
    if !field.all_finite() {
        return Err(GyError::Contract(
            "curvature has non-finite components".into(),
        ));
    }
    Ok(field)
}

/// Traced connection data for the Ricci form: Γ at the node and first derivatives of A, B.
struct TracedJets {
    gamma: Vec<C64>,
    gamma_bar: Vec<C64>,
    /// ∂_a A_i, ∂̄_a A_i, ∂_a B_i, ∂̄_a B_i; node-major [a][i]
    d_a: Vec<C64>,
    db_a: Vec<C64>,
    d_b: Vec<C64>,
    db_b: Vec<C64>,
}

fn traced_jets(g: &MetricField, p: GauduchonParam) -> Result<TracedJets> {
    let n = g.n();
    let n2 = n * n;
    let n3 = n2 * n;
    let nodes = g.len();
    if g.grid().is_periodic() {
        let cf = christoffel(g, p)?;
        let mut a = vec![ZERO; nodes * n];
        let mut b = vec![ZERO; nodes * n];
        for k in 0..nodes {
            traces_local(
                n,
                &cf.gamma[k * n3..(k + 1) * n3],
                &cf.gamma_bar[k * n3..(k + 1) * n3],
                &mut a[k * n..(k + 1) * n],
                &mut b[k * n..(k + 1) * n],
            );
        }
        let sp = g.grid().spectral()?;
        let (d_a, db_a) = spectral_gradients(sp, n, &a, n);
        let (d_b, db_b) = spectral_gradients(sp, n, &b, n);
        return Ok(TracedJets {
            gamma: cf.gamma,
            gamma_bar: cf.gamma_bar,
            d_a,
            db_a,
            d_b,
            db_b,
        });
    }
    let (f, h) = cloud_source(g)?;
    let grid = g.grid().clone();
    let t = p.t;
    type Per = (Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>, Vec<C64>);
    let per: Vec<Per> = (0..nodes)
        .into_par_iter()
        .map(|k| {
            let z = grid.point(k);
            let (gam, gbar) = cloud_christoffel(&f, &z, h, t);
            let ab = |w: &[C64]| {
                let (gm, gb) = cloud_christoffel(&f, w, h, t);
                let mut a = vec![ZERO; n];
                let mut b = vec![ZERO; n];
                traces_local(n, &gm, &gb, &mut a, &mut b);
                [a, b].concat()
            };
            let (d, db) = stencil::complex_partials(&ab, &z, h);
            let mut out = [
                vec![ZERO; n2],
                vec![ZERO; n2],
                vec![ZERO; n2],
                vec![ZERO; n2],
            ];
            for a in 0..n {
                for i in 0..n {
                    out[0][a * n + i] = d[a][i];
                    out[1][a * n + i] = db[a][i];
                    out[2][a * n + i] = d[a][n + i];
                    out[3][a * n + i] = db[a][n + i];
                }
            }
            let [o0, o1, o2, o3] = out;
            (gam, gbar, o0, o1, o2, o3)
        })
        .collect();
    let mut j = TracedJets {
        gamma: Vec::new(),
        gamma_bar: Vec::new(),
        d_a: Vec::new(),
        db_a: Vec::new(),
        d_b: Vec::new(),
        db_b: Vec::new(),
    };
    for (a, b, c, d, e, f) in per {
        j.gamma.extend(a);
        j.gamma_bar.extend(b);
        j.d_a.extend(c);
        j.db_a.extend(d);
        j.d_b.extend(e);
        j.db_b.extend(f);
    }
    Ok(j)
}

/// Ricci form ρ = √−1 tr Ω of ∇^t, all three type blocks.
pub fn ricci_form(g: &MetricField, p: GauduchonParam) -> Result<TwoFormField> {
    check_param(g, p)?;
    let n = g.n();
    let n2 = n * n;
    let n3 = n2 * n;
    let nodes = g.len();
    let j = traced_jets(g, p)?;
    let mut out = vec![ZERO; nodes * 3 * n2];
    out.par_chunks_mut(3 * n2).enumerate().for_each(|(k, o)| {
        let gm = &j.gamma[k * n3..(k + 1) * n3];
        let gb = &j.gamma_bar[k * n3..(k + 1) * n3];
        let (da, dba) = (&j.d_a[k * n2..(k + 1) * n2], &j.db_a[k * n2..(k + 1) * n2]);
        let (dbb_, dbb) = (&j.d_b[k * n2..(k + 1) * n2], &j.db_b[k * n2..(k + 1) * n2]);
        for a in 0..n {
            for b in 0..n {
                let mut q = ZERO;
                let mut pq = ZERO;
                let mut nq = ZERO;
                for kk in 0..n {
                    for s in 0..n {
                        q += gm[i3(n, s, a, kk)] * gb[i3(n, kk, b, s)]
                            - gb[i3(n, s, b, kk)] * gm[i3(n, kk, a, s)];
                        pq += gm[i3(n, s, b, kk)] * gm[i3(n, kk, a, s)]
                            - gm[i3(n, s, a, kk)] * gm[i3(n, kk, b, s)];
                        nq += gb[i3(n, s, b, kk)] * gb[i3(n, kk, a, s)]
                            - gb[i3(n, s, a, kk)] * gb[i3(n, kk, b, s)];
                    }
                }
                // Ric_{ab̄} = −(∂̄_b A_a − ∂_a B_b + Q_ab)
                o[a * n + b] = -CURVATURE_SIGN * (dba[b * n + a] - dbb_[a * n + b] + q);
                o[n2 + a * n + b] = CURVATURE_SIGN * I * (da[a * n + b] - da[b * n + a] + pq);
                o[2 * n2 + a * n + b] = CURVATURE_SIGN * I * (dbb[a * n + b] - dbb[b * n + a] + nq);
            }
        }
    });
    Ok(split_two_form(g.grid().clone(), n, &out))
}

fn split_two_form(grid: Arc<ChartGrid>, n: usize, node_major: &[C64]) -> TwoFormField {
    let n2 = n * n;
    let w = 3 * n2;
    let comp = |c: usize| -> Vec<C64> { node_major.iter().skip(c).step_by(w).copied().collect() };
    TwoFormField {
        grid,
        n,
        h11: (0..n2).map(comp).collect(),
        a20: (n2..2 * n2).map(comp).collect(),
        a02: (2 * n2..3 * n2).map(comp).collect(),
    }
}

/// (∂*ω)_k̄ = √−1 g^{pq̄}(∂_q̄ g_{pk̄} − ∂_k̄ g_{pq̄}).
fn dstar_local(n: usize, ginv: &[C64], dbg: &[C64]) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let mut v = ZERO;
            for pp in 0..n {
                for q in 0..n {
                    v += ginv[pp * n + q] * (dbg[i3(n, q, pp, k)] - dbg[i3(n, k, pp, q)]);
                }
            }
            I * v
        })
        .collect()
}

/// The codifferential d*ω split as (∂*ω, ∂̄*ω), a (0,1)-form and a (1,0)-form.
///
/// ∂̄*ω is taken as the conjugate of ∂*ω, which keeps d*ω real and matches the Ricci
/// decomposition Ric^t = Ric^1 + (t−1)/2 dd*ω.
pub fn codifferential_omega(g: &MetricField) -> Result<(OneFormField, OneFormField)> {
    let n = g.n();
    let n3 = n * n * n;
    let d = g.derivs()?;
    let nodes = g.len();
    let local: Vec<Vec<C64>> = (0..nodes)
        .map(|k| dstar_local(n, g.inv_at(k), &d.dbg[k * n3..(k + 1) * n3]))
        .collect();
    let comps = (0..n)
        .map(|c| local.iter().map(|v| v[c]).collect())
        .collect();
    let dstar = OneFormField {
        grid: g.grid().clone(),
        kind: FormType::Antiholomorphic,
        comps,
    };
    let dbar_star = dstar.conj();
    Ok((dstar, dbar_star))
}

/// Ric^t evaluated as (t−1)/2 · dd*ω − √−1 ∂∂̄ log det g.
pub fn ricci_form_via_decomposition(g: &MetricField, p: GauduchonParam) -> Result<TwoFormField> {
    check_param(g, p)?;
    if let Some(k) = g.det().iter().position(|d| !(*d > 0.0)) {
        return Err(GyError::DegenerateMetric {
            node: k,
            min_eig: 0.0,
        });
    }
    let n = g.n();
    let n2 = n * n;
    let n3 = n2 * n;
    let nodes = g.len();
    let w = 1 + 2 * n;
    // per node: [∂_i ∂̄_j L (n2)], ∂_i ξ_{j̄}, ∂̄_j ξ_i, ∂_i ξ_j, ∂̄_i ξ_{j̄}
    let mut ddl = vec![ZERO; nodes * n2];
    let mut d_x = vec![ZERO; nodes * n * w];
    let mut db_x = vec![ZERO; nodes * n * w];
    if g.grid().is_periodic() {
        let sp = g.grid().spectral()?;
        let d = g.derivs()?;
        let mut x = vec![ZERO; nodes * w];
        for k in 0..nodes {
            let ds = dstar_local(n, g.inv_at(k), &d.dbg[k * n3..(k + 1) * n3]);
            for c in 0..n {
                x[k * w + 1 + c] = ds[c].conj();
                x[k * w + 1 + n + c] = ds[c];
            }
        }
        let (dx, dbx) = spectral_gradients(sp, n, &x, w);
        d_x = dx;
        db_x = dbx;
        let l: Vec<C64> = g.det().iter().map(|v| C64::new(v.ln(), 0.0)).collect();
        let lh = sp.forward(&l);
        for i in 0..n {
            for j in 0..n {
                let v = sp.apply2(&lh, sp.symbol_dz(i), sp.symbol_dzbar(j));
                for k in 0..nodes {
                    ddl[k * n2 + i * n + j] = v[k];
                }
            }
        }
    } else {
        let (f, h) = cloud_source(g)?;
        let grid = g.grid().clone();
        let per: Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> = (0..nodes)
            .into_par_iter()
            .map(|k| {
                let z = grid.point(k);
                let logdet = |v: &[C64]| {
                    let det = linalg::invert(&f(v), n)
                        .map(|(_, d)| d.re)
                        .unwrap_or(f64::NAN);
                    vec![C64::new(det.ln(), 0.0)]
                };
                let x = |v: &[C64]| {
                    let j = cloud_jet(&f, v, h);
                    let ds = dstar_local(n, &j.ginv, &j.dbg);
                    let (_, dbl) = stencil::complex_partials(&logdet, v, h);
                    let mut out = Vec::with_capacity(w);
                    out.push(ZERO);
                    out.extend(ds.iter().map(|c| c.conj()));
                    out.extend(ds);
                    out.extend(dbl.into_iter().map(|c| c[0]));
                    out
                };
                let (d, db) = stencil::complex_partials(&x, &z, h);
                let mut ddl_k = vec![ZERO; n2];
                let mut dx = vec![ZERO; n * w];
                let mut dbx = vec![ZERO; n * w];
                for a in 0..n {
                    for c in 0..w {
                        dx[a * w + c] = d[a][c];
                        dbx[a * w + c] = db[a][c];
                    }
                    for j in 0..n {
                        ddl_k[a * n + j] = d[a][w + j];
                    }
                }
                (ddl_k, dx, dbx)
            })
            .collect();
        for (k, (a, b, c)) in per.into_iter().enumerate() {
            ddl[k * n2..(k + 1) * n2].copy_from_slice(&a);
            d_x[k * n * w..(k + 1) * n * w].copy_from_slice(&b);
            db_x[k * n * w..(k + 1) * n * w].copy_from_slice(&c);
        }
    }
    let coef = 0.5 * (p.t - 1.0);
    let mut out = vec![ZERO; nodes * 3 * n2];
    out.par_chunks_mut(3 * n2).enumerate().for_each(|(k, o)| {
        let dx = &d_x[k * n * w..(k + 1) * n * w];
        let dbx = &db_x[k * n * w..(k + 1) * n * w];
        let xi = |c: usize| 1 + c;
        let xib = |c: usize| 1 + n + c;
        for a in 0..n {
            for b in 0..n {
                // (dξ)^{1,1} = √−1 h with h = −√−1(∂_a ξ_b̄ − ∂̄_b ξ_a)
                let hdx = -I * (dx[a * w + xib(b)] - dbx[b * w + xi(a)]);
                o[a * n + b] = coef * hdx - ddl[k * n2 + a * n + b];
                o[n2 + a * n + b] = coef * (dx[a * w + xi(b)] - dx[b * w + xi(a)]);
                o[2 * n2 + a * n + b] = coef * (dbx[a * w + xib(b)] - dbx[b * w + xib(a)]);
            }
        }
    });
    Ok(split_two_form(g.grid().clone(), n, &out))
}

/// g^{ij̄} h_{ij̄}; with the storage convention tr_ω ω = n.
pub fn trace(g: &MetricField, form: &TwoFormField) -> ScalarField {
    let n = g.n();
    let values = (0..g.len())
        .map(|k| {
            let inv = g.inv_at(k);
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    s += inv[i * n + j] * form.h11[i * n + j][k];
                }
            }
            s
        })
        .collect();
    ScalarField::from_complex(g.grid().clone(), values).expect("trace has grid length")
}

/// S^t = g^{ij̄} Ric^t_{ij̄} as a real field.
pub fn scalar_curvature(g: &MetricField, p: GauduchonParam) -> Result<ScalarField> {
    let ric = ricci_form(g, p)?;
    let s = trace(g, &ric);
    ScalarField::from_real(g.grid().clone(), s.re())
}

/// S^t_{(2)} = g^{il̄} g^{kj̄} R^t_{ij̄kl̄} as a real field.
pub fn second_scalar(g: &MetricField, p: GauduchonParam) -> Result<ScalarField> {
    let r = curvature_tensor(g, p)?;
    Ok(second_scalar_from(g, &r))
}

pub fn second_scalar_from(g: &MetricField, r: &CurvatureField) -> ScalarField {
    let n = g.n();
    let values = (0..g.len())
        .map(|node| {
            let inv = g.inv_at(node);
            let mut s = ZERO;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            s += inv[i * n + l] * inv[k * n + j] * r.comp(i, j, k, l)[node];
                        }
                    }
                }
            }
            s.re
        })
        .collect();
    ScalarField::from_real(g.grid().clone(), values).expect("grid length")
}

/// Chern torsion with its trace one-form and pointwise norms.
#[derive(Debug, Clone)]
pub struct TorsionData {
    pub n: usize,
    /// T^k_{ij}, node-major, index (k n + i) n + j.
    pub t: Vec<C64>,
    /// θ_i = Σ_k T^k_{ik}.
    pub theta: OneFormField,
    /// ‖T‖² = Σ T^k_{ij} conj(T^l_{pq}) g_{kl̄} g^{ip̄} g^{jq̄}.
    pub norm_t: Vec<f64>,
    /// ‖T^s_{s·}‖² = |θ|²_g.
    pub norm_trace: Vec<f64>,
}

impl TorsionData {
    pub fn max_abs(&self) -> f64 {
        self.t.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

pub fn chern_torsion(g: &MetricField) -> Result<TorsionData> {
    let n = g.n();
    let n3 = n * n * n;
    let nodes = g.len();
    let d = g.derivs()?;
    let mut t = vec![ZERO; nodes * n3];
    let mut theta = vec![vec![ZERO; nodes]; n];
    let mut norm_t = vec![0.0; nodes];
    let mut norm_trace = vec![0.0; nodes];
    for node in 0..nodes {
        let inv = g.inv_at(node);
        let gk = g.at(node);
        let dg = &d.dg[node * n3..(node + 1) * n3];
        let tk = &mut t[node * n3..(node + 1) * n3];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v: C64 = (0..n)
                        .map(|s| inv[k * n + s] * (dg[i3(n, i, j, s)] - dg[i3(n, j, i, s)]))
                        .sum();
                    tk[i3(n, k, i, j)] = v;
                }
            }
        }
        let th: Vec<C64> = (0..n)
            .map(|i| (0..n).map(|k| tk[i3(n, k, i, k)]).sum())
            .collect();
        let mut nt = ZERO;
        for k in 0..n {
            for l in 0..n {
                for i in 0..n {
                    for pp in 0..n {
                        for j in 0..n {
                            for q in 0..n {
                                nt += tk[i3(n, k, i, j)]
                                    * tk[i3(n, l, pp, q)].conj()
                                    * gk[k * n + l]
                                    * inv[i * n + pp]
                                    * inv[j * n + q];
                            }
                        }
                    }
                }
            }
        }
        let mut ns = ZERO;
        for i in 0..n {
            for j in 0..n {
                ns += inv[i * n + j] * th[i] * th[j].conj();
            }
        }
        norm_t[node] = nt.re;
        norm_trace[node] = ns.re;
        for i in 0..n {
            theta[i][node] = th[i];
        }
    }
    Ok(TorsionData {
        n,
        t,
        theta: OneFormField {
            grid: g.grid().clone(),
            kind: FormType::Holomorphic,
            comps: theta,
        },
        norm_t,
        norm_trace,
    })
}

/// ‖dω‖_∞ through its (2,1) part ∂_i g_{jk̄} − ∂_j g_{ik̄}.
pub fn kahler_residual(g: &MetricField) -> Result<f64> {
    let n = g.n();
    let n3 = n * n * n;
    let d = g.derivs()?;
    let mut worst = 0.0f64;
    for node in 0..g.len() {
        let dg = &d.dg[node * n3..(node + 1) * n3];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((dg[i3(n, i, j, k)] - dg[i3(n, j, i, k)]).norm());
                }
            }
        }
    }
    Ok(worst)
}

/// ‖θ‖_∞ of the torsion one-form.
pub fn balanced_residual(g: &MetricField) -> Result<f64> {
    Ok(chern_torsion(g)?.theta.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_periodic_grid, make_point_cloud};

    fn fs(n: usize) -> MetricFn {
        Arc::new(move |w: &[C64]| {
            let r2: f64 = w.iter().map(|v| v.norm_sqr()).sum();
            let s = 1.0 + r2;
            let mut g = vec![ZERO; n * n];
            for i in 0..n {
                for j in 0..n {
                    let delta = if i == j { s } else { 0.0 };
                    g[i * n + j] = (C64::new(delta, 0.0) - w[i].conj() * w[j]) / (s * s);
                }
            }
            g
        })
    }

    #[test]
    fn critical_parameter() {
        let p = GauduchonParam::new(-1.0, 2).unwrap();
        assert!(p.is_critical());
        assert_eq!(GauduchonParam::new(-1.0, 3).unwrap().c_t(), -1.0);
        assert_eq!(GauduchonParam::new(1.0, 3).unwrap().c_t(), 3.0);
        assert!(GauduchonParam::new(f64::NAN, 2).is_err());
    }

    #[test]
    fn fubini_study_ricci_is_positive_multiple() {
        let pts = vec![vec![ZERO], vec![C64::new(0.7, -0.4)]];
        let grid = make_point_cloud(1, pts, 1e-3).unwrap();
        let g = MetricField::from_fn(grid, fs(1)).unwrap();
        let ric = ricci_form(&g, GauduchonParam::chern(1)).unwrap();
        for k in 0..2 {
            let rel = (ric.h11[0][k] - 2.0 * g.at(k)[0]).norm() / g.at(k)[0].norm();
            assert!(rel < 1e-7, "rel {rel}");
        }
    }

    #[test]
    fn chern_mixed_christoffel_vanishes() {
        let grid = make_periodic_grid(2, &[8, 4, 4, 4], &[1.0; 4]).unwrap();
        let f: MetricFn = Arc::new(|z: &[C64]| {
            let m = C64::new(0.3 * (std::f64::consts::TAU * z[0].re).sin(), 0.0);
            vec![C64::new(1.0, 0.0), m, m, C64::new(1.0, 0.0)]
        });
        let g = MetricField::from_fn(grid, f).unwrap();
        assert_eq!(
            christoffel(&g, GauduchonParam::chern(2))
                .unwrap()
                .max_abs_bar(),
            0.0
        );
        assert!(
            christoffel(&g, GauduchonParam::bismut(2))
                .unwrap()
                .max_abs_bar()
                > 0.1
        );
    }
}
