//! Dual-Lipschitz distance between finitely supported measures:
//!
//! `sup { sum_i f_i (mu1_i - mu2_i) : |f| <= M, |f_i - f_j| <= L d_ij, M + L <= 1 }`.
//!
//! The Lipschitz seminorm of the metric only looks at pairs with
//! `0 < d <= 1`, but on a convex set chaining short steps makes that the
//! global Lipschitz constant, so every pair of atoms is constrained. (Keeping
//! only close pairs of the support would not give a metric: a third measure
//! can put atoms in the gap.)
//!
//! The value is concave in `t = M`; for fixed `t` it is an earth-mover cost
//! with ground metric `min(2t, (1 - t) d)`. On the line the inner problem is
//! instead solved by a dynamic program over concave piecewise-linear value
//! functions.

use super::measure::{euclid, DiscreteMeasure};
use super::simplex;
use crate::error::{Error, Result};

/// Largest combined support accepted.
pub const MAX_ATOMS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BlRoute {
    /// Line solver in one dimension, transport solver otherwise.
    #[default]
    Auto,
    Line,
    Transport,
    /// Dense simplex on the full LP; intended for small supports.
    Simplex,
}

pub fn dual_lipschitz(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<f64> {
    dual_lipschitz_with(mu1, mu2, BlRoute::Auto)
}

pub fn dual_lipschitz_with(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, route: BlRoute) -> Result<f64> {
    if mu1.dim() != mu2.dim() {
        return Err(Error::InvalidInput("measures live in different dimensions".into()));
    }
    let atoms = mu1.len() + mu2.len();
    if atoms > MAX_ATOMS {
        return Err(Error::SupportTooLarge {
            atoms,
            limit: MAX_ATOMS,
        });
    }
    // The value is symmetric; fix an order so the computation is too.
    let (a, b) = if canonical_le(mu1, mu2) { (mu1, mu2) } else { (mu2, mu1) };
    let signed = merge(a, b);
    let route = match route {
        BlRoute::Auto if a.dim() == 1 => BlRoute::Line,
        BlRoute::Auto => BlRoute::Transport,
        r => r,
    };
    let v = match route {
        BlRoute::Line => {
            if a.dim() != 1 {
                return Err(Error::InvalidInput("line route needs one-dimensional atoms".into()));
            }
            line_value(&signed)
        }
        BlRoute::Transport => transport_value(&signed)?,
        BlRoute::Simplex => simplex_value(&signed)?,
        BlRoute::Auto => unreachable!(),
    };
    Ok(v.clamp(0.0, 2.0))
}

fn canonical_le(a: &DiscreteMeasure, b: &DiscreteMeasure) -> bool {
    use std::cmp::Ordering;
    let ord = a.len().cmp(&b.len()).then_with(|| {
        for (x, y) in a.points().iter().zip(b.points()) {
            let o = x.total_cmp(y);
            if o != Ordering::Equal {
                return o;
            }
        }
        for (x, y) in a.weights().iter().zip(b.weights()) {
            let o = x.total_cmp(y);
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
    ord != Ordering::Greater
}

/// Atoms of both measures with signed mass `mu1 - mu2`, coincident atoms
/// merged, sorted lexicographically.
struct Signed {
    dim: usize,
    points: Vec<f64>,
    g: Vec<f64>,
}

impl Signed {
    fn atom(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
    fn len(&self) -> usize {
        self.g.len()
    }
}

fn merge(a: &DiscreteMeasure, b: &DiscreteMeasure) -> Signed {
    let d = a.dim();
    let mut all: Vec<(&[f64], f64)> = (0..a.len())
        .map(|i| (a.atom(i), a.weights()[i]))
        .chain((0..b.len()).map(|j| (b.atom(j), -b.weights()[j])))
        .collect();
    all.sort_by(|x, y| {
        x.0.iter()
            .zip(y.0)
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut points = Vec::with_capacity(all.len() * d);
    let mut g: Vec<f64> = Vec::with_capacity(all.len());
    for (p, w) in all {
        let same = !g.is_empty() && &points[points.len() - d..] == p;
        if same {
            *g.last_mut().unwrap() += w;
        } else {
            points.extend_from_slice(p);
            g.push(w);
        }
    }
    Signed { dim: d, points, g }
}

// ---------------------------------------------------------------- line route

/// Concave piecewise-linear function through `(x, y)` vertices.
type Pwl = Vec<(f64, f64)>;

fn pwl_eval(f: &Pwl, x: f64) -> f64 {
    if x <= f[0].0 {
        return f[0].1;
    }
    for w in f.windows(2) {
        if x <= w[1].0 {
            let span = w[1].0 - w[0].0;
            if span <= 0.0 {
                return w[1].1;
            }
            return w[0].1 + (w[1].1 - w[0].1) * (x - w[0].0) / span;
        }
    }
    f[f.len() - 1].1
}

fn pwl_max(f: &Pwl) -> (usize, f64) {
    let mut best = 0;
    for (i, p) in f.iter().enumerate() {
        if p.1 > f[best].1 {
            best = i;
        }
    }
    (best, f[best].1)
}

/// `v -> max_{|w - v| <= r} f(w)`, restricted back to `[lo, hi]`.
fn slide(f: &Pwl, r: f64, lo: f64, hi: f64) -> Pwl {
    if r <= 0.0 {
        return f.clone();
    }
    let (m, _) = pwl_max(f);
    let mut g: Pwl = Vec::with_capacity(f.len() + 1);
    for p in &f[..=m] {
        g.push((p.0 - r, p.1));
    }
    g.push((f[m].0 + r, f[m].1));
    for p in &f[m + 1..] {
        g.push((p.0 + r, p.1));
    }
    clip(&g, lo, hi)
}

fn clip(f: &Pwl, lo: f64, hi: f64) -> Pwl {
    let mut out: Pwl = Vec::with_capacity(f.len() + 2);
    out.push((lo, pwl_eval(f, lo)));
    for p in f {
        if p.0 > lo && p.0 < hi {
            out.push(*p);
        }
    }
    out.push((hi, pwl_eval(f, hi)));
    simplify(out)
}

/// Drops vertices at which the slope does not change.
fn simplify(f: Pwl) -> Pwl {
    let mut out: Pwl = Vec::with_capacity(f.len());
    for p in f {
        if let Some(last) = out.last() {
            if p.0 - last.0 <= 1e-15 * (1.0 + p.0.abs()) {
                let y = last.1.max(p.1);
                out.last_mut().unwrap().1 = y;
                continue;
            }
        }
        while out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            let s1 = (b.1 - a.1) / (b.0 - a.0);
            let s2 = (p.1 - b.1) / (p.0 - b.0);
            if (s1 - s2).abs() <= 1e-13 * (1.0 + s1.abs().max(s2.abs())) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(p);
    }
    out
}

/// Inner value for `M = t`, `L = 1 - t` on the line.
fn line_inner(s: &Signed, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let lip = 1.0 - t;
    let mut f: Pwl = vec![(-t, 0.0), (t, 0.0)];
    for k in 0..s.len() {
        if k > 0 {
            let gap = s.atom(k)[0] - s.atom(k - 1)[0];
            f = slide(&f, lip * gap, -t, t);
        }
        let gk = s.g[k];
        for p in f.iter_mut() {
            p.1 += gk * p.0;
        }
    }
    pwl_max(&f).1
}

/// Maximises a concave function on `[0, 1]` by golden-section search.
fn golden_max<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, 1.0f64);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = fc.max(fd).max(f(1.0));
    while b - a > 1e-13 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        }
        best = best.max(fc).max(fd);
    }
    best
}

fn line_value(s: &Signed) -> f64 {
    if s.g.iter().all(|&g| g == 0.0) {
        return 0.0;
    }
    golden_max(|t| line_inner(s, t))
}

// ----------------------------------------------------------- transport route

struct Ground {
    sources: Vec<usize>,
    sinks: Vec<usize>,
    supply: Vec<f64>,
    demand: Vec<f64>,
    /// Graph distance between source `i` and sink `j`, row-major.
    dist: Vec<f64>,
}

fn ground(s: &Signed) -> Ground {
    let n = s.len();
    let sources: Vec<usize> = (0..n).filter(|&i| s.g[i] > 0.0).collect();
    let sinks: Vec<usize> = (0..n).filter(|&i| s.g[i] < 0.0).collect();
    let mut dist = Vec::with_capacity(sources.len() * sinks.len());
    for &i in &sources {
        for &j in &sinks {
            dist.push(euclid(s.atom(i), s.atom(j)));
        }
    }
    Ground {
        supply: sources.iter().map(|&i| s.g[i]).collect(),
        demand: sinks.iter().map(|&j| -s.g[j]).collect(),
        sources,
        sinks,
        dist,
    }
}

/// Successive shortest paths on the dense bipartite transportation problem.
/// Returns the optimal flow matrix.
fn min_cost_flow(supply: &[f64], demand: &[f64], cost: &[f64]) -> Vec<f64> {
    let ns = supply.len();
    let nt = demand.len();
    let mut flow = vec![0.0; ns * nt];
    let mut rs = supply.to_vec();
    let mut rt = demand.to_vec();
    let tot = supply.iter().sum::<f64>().max(demand.iter().sum::<f64>());
    let tol = 1e-14 * tot.max(1e-300);
    let nodes = ns + nt + 2;
    let (src, snk) = (ns + nt, ns + nt + 1);
    let mut pot = vec![0.0; nodes];
    let mut dist = vec![0.0; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let max_aug = 20 * (ns + nt) + 100;
    for _ in 0..max_aug {
        if rs.iter().sum::<f64>() <= tol || rt.iter().sum::<f64>() <= tol {
            break;
        }
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        prev.iter_mut().for_each(|p| *p = usize::MAX);
        done.iter_mut().for_each(|d| *d = false);
        dist[src] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX || u == snk {
                break;
            }
            done[u] = true;
            let du = dist[u];
            if u == src {
                for i in 0..ns {
                    if rs[i] > tol {
                        let nd = du + pot[src] - pot[i];
                        if nd < dist[i] {
                            dist[i] = nd;
                            prev[i] = src;
                        }
                    }
                }
            } else if u < ns {
                let row = &cost[u * nt..(u + 1) * nt];
                let base = du + pot[u];
                for j in 0..nt {
                    let v = ns + j;
                    if done[v] {
                        continue;
                    }
                    let nd = base + row[j] - pot[v];
                    if nd < dist[v] {
                        dist[v] = nd;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - ns;
                let base = du + pot[u];
                for i in 0..ns {
                    if done[i] || flow[i * nt + j] <= tol {
                        continue;
                    }
                    let nd = base - cost[i * nt + j] - pot[i];
                    if nd < dist[i] {
                        dist[i] = nd;
                        prev[i] = u;
                    }
                }
                if rt[j] > tol {
                    let nd = base - pot[snk];
                    if nd < dist[snk] {
                        dist[snk] = nd;
                        prev[snk] = u;
                    }
                }
            }
        }
        if !dist[snk].is_finite() {
            break;
        }
        let dt = dist[snk];
        for v in 0..nodes {
            pot[v] += dist[v].min(dt);
        }
        // Bottleneck along the path.
        let mut delta = f64::INFINITY;
        let mut v = snk;
        let last_sink = prev[snk] - ns;
        delta = delta.min(rt[last_sink]);
        while prev[v] != src {
            let p = prev[v];
            if v < ns && p >= ns {
                delta = delta.min(flow[v * nt + (p - ns)]);
            }
            v = p;
        }
        let first_source = v;
        delta = delta.min(rs[first_source]);
        let mut v = snk;
        while prev[v] != src {
            let p = prev[v];
            if p < ns && v >= ns && v != snk {
                flow[p * nt + (v - ns)] += delta;
            } else if v < ns && p >= ns {
                let e = &mut flow[v * nt + (p - ns)];
                *e = (*e - delta).max(0.0);
            }
            v = p;
        }
        rs[first_source] -= delta;
        rt[last_sink] -= delta;
    }
    flow
}

/// Value at `M = t` together with the supporting line `(1 - t') A + t' B`.
fn transport_inner(gr: &Ground, t: f64) -> (f64, f64, f64) {
    let cost: Vec<f64> = gr
        .dist
        .iter()
        .map(|&d| {
            let direct = (1.0 - t) * d;
            if direct < 2.0 * t {
                direct
            } else {
                2.0 * t
            }
        })
        .collect();
    let flow = min_cost_flow(&gr.supply, &gr.demand, &cost);
    let (mut v, mut a, mut b) = (0.0, 0.0, 0.0);
    for (k, &f) in flow.iter().enumerate() {
        if f <= 0.0 {
            continue;
        }
        v += f * cost[k];
        let d = gr.dist[k];
        if d.is_finite() && (1.0 - t) * d <= 2.0 * t {
            a += f * d;
        } else {
            b += 2.0 * f;
        }
    }
    (v, a, b)
}

/// Kelley's cutting-plane method for the concave outer maximisation.
fn transport_value(s: &Signed) -> Result<f64> {
    if s.g.iter().all(|&g| g == 0.0) {
        return Ok(0.0);
    }
    let gr = ground(s);
    if gr.sources.is_empty() || gr.sinks.is_empty() {
        return Ok(0.0);
    }
    let mut lines: Vec<(f64, f64)> = Vec::new();
    let mut best = 0.0f64;
    let eval = |t: f64, lines: &mut Vec<(f64, f64)>, best: &mut f64| {
        let (v, a, b) = transport_inner(&gr, t);
        *best = best.max(v);
        lines.push((a, b));
    };
    eval(1.0, &mut lines, &mut best);
    eval(0.5, &mut lines, &mut best);
    for _ in 0..200 {
        let (t, upper) = envelope_argmax(&lines);
        if upper - best <= 1e-12 * best.max(1e-300) + 1e-300 {
            return Ok(best);
        }
        let before = lines.len();
        eval(t, &mut lines, &mut best);
        let (a, b) = lines[before];
        if lines[..before].contains(&(a, b)) {
            // no new information: the envelope is already exact here
            return Ok(best);
        }
    }
    Ok(best)
}

/// Maximiser of `min_k (1 - t) A_k + t B_k` over `[0, 1]`.
fn envelope_argmax(lines: &[(f64, f64)]) -> (f64, f64) {
    let env = |t: f64| {
        lines
            .iter()
            .map(|&(a, b)| (1.0 - t) * a + t * b)
            .fold(f64::INFINITY, f64::min)
    };
    let mut cands = vec![0.0, 1.0];
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a1, b1) = lines[i];
            let (a2, b2) = lines[j];
            let den = (b1 - a1) - (b2 - a2);
            if den != 0.0 {
                let t = (a2 - a1) / den;
                if (0.0..=1.0).contains(&t) {
                    cands.push(t);
                }
            }
        }
    }
    let mut best = (0.0, env(0.0));
    for t in cands {
        let v = env(t);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

// ------------------------------------------------------------- simplex route

fn simplex_value(s: &Signed) -> Result<f64> {
    let n = s.len();
    if n > 80 {
        return Err(Error::SupportTooLarge { atoms: n, limit: 80 });
    }
    // Variables y_0..y_{n-1} (= f + M), M, L.
    let nv = n + 2;
    let (im, il) = (n, n + 1);
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; nv];
        row[i] = 1.0;
        row[im] = -2.0;
        a.push(row);
        b.push(0.0);
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut row = vec![0.0; nv];
            row[i] = 1.0;
            row[j] = -1.0;
            row[il] = -euclid(s.atom(i), s.atom(j));
            a.push(row);
            b.push(0.0);
        }
    }
    let mut row = vec![0.0; nv];
    row[im] = 1.0;
    row[il] = 1.0;
    a.push(row);
    b.push(1.0);
    let mut c = s.g.clone();
    // f = y - M, so the objective picks up -M * sum g (zero up to rounding).
    c.push(-s.g.iter().sum::<f64>());
    c.push(0.0);
    Ok(simplex::maximize(&c, &a, &b)?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1(xs: &[f64], ws: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(1, xs.to_vec(), ws.to_vec()).unwrap()
    }

    fn all_routes(a: &DiscreteMeasure, b: &DiscreteMeasure) -> [f64; 3] {
        [
            dual_lipschitz_with(a, b, BlRoute::Line).unwrap(),
            dual_lipschitz_with(a, b, BlRoute::Transport).unwrap(),
            dual_lipschitz_with(a, b, BlRoute::Simplex).unwrap(),
        ]
    }

    #[test]
    fn half_unit_shift_gives_two_fifths() {
        let v = all_routes(&DiscreteMeasure::dirac(&[0.0]), &DiscreteMeasure::dirac(&[0.5]));
        for x in v {
            assert!((x - 0.4).abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn diracs_follow_closed_form() {
        // max min(2M, L D) over M + L <= 1 is 2D / (2 + D)
        for d in [0.5, 2.0, 3.0] {
            let v = all_routes(&DiscreteMeasure::dirac(&[0.0]), &DiscreteMeasure::dirac(&[d]));
            for x in v {
                assert!((x - 2.0 * d / (2.0 + d)).abs() < 1e-9, "{v:?}");
            }
        }
    }

    #[test]
    fn routes_agree_on_mixed_supports() {
        let a = d1(&[0.0, 0.4, 1.1, 2.9], &[0.1, 0.2, 0.3, 0.4]);
        let b = d1(&[0.2, 0.5, 1.7, 3.0, 4.5], &[0.3, 0.1, 0.2, 0.2, 0.2]);
        let v = all_routes(&a, &b);
        assert!((v[0] - v[2]).abs() < 1e-9, "{v:?}");
        assert!((v[1] - v[2]).abs() < 1e-9, "{v:?}");
    }

    #[test]
    fn identical_is_zero_and_size_limit() {
        let a = d1(&[0.0, 1.0], &[0.5, 0.5]);
        assert_eq!(dual_lipschitz(&a, &a).unwrap(), 0.0);
        let big = DiscreteMeasure::uniform(1, (0..1001).map(f64::from).collect()).unwrap();
        assert!(matches!(dual_lipschitz(&big, &big), Err(Error::SupportTooLarge { .. })));
    }

    #[test]
    fn planar_transport_matches_simplex() {
        let a = DiscreteMeasure::new(2, vec![0.0, 0.0, 0.5, 0.1, 0.9, 0.9], vec![0.2, 0.5, 0.3]).unwrap();
        let b = DiscreteMeasure::new(2, vec![0.1, 0.3, 0.6, 0.6, 2.5, 0.0], vec![0.4, 0.4, 0.2]).unwrap();
        let t = dual_lipschitz_with(&a, &b, BlRoute::Transport).unwrap();
        let s = dual_lipschitz_with(&a, &b, BlRoute::Simplex).unwrap();
        assert!((t - s).abs() < 1e-9, "{t} vs {s}");
    }
}
