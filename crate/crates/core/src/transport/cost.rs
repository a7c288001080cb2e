//! The threshold cost `C_eps(mu1, mu2)`: the least probability, over all
//! couplings, that the pair lies farther than `eps` apart.

use super::maxflow::FlowNetwork;
use super::measure::{euclid, CouplingPlan, DiscreteMeasure};
use crate::error::{Error, Result};

/// `1` if `|u1 - u2| > eps`, else `0`.
pub fn d_eps(u1: &[f64], u2: &[f64], eps: f64) -> u8 {
    u8::from(euclid(u1, u2) > eps)
}

fn check(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Result<()> {
    if mu1.dim() != mu2.dim() {
        return Err(Error::InvalidInput("measures live in different dimensions".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Exact `C_eps` as one minus the maximal mass that can be matched within
/// distance `eps`.
pub fn transport_cost(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Result<f64> {
    let plan = optimal_plan(mu1, mu2, eps)?;
    Ok(plan.cost(mu1, mu2, eps).clamp(0.0, 1.0))
}

/// A coupling attaining `C_eps`.
pub fn optimal_plan(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Result<CouplingPlan> {
    check(mu1, mu2, eps)?;
    let (mut entries, mut r1, mut r2) = if mu1.dim() == 1 {
        matched_1d(mu1, mu2, eps)
    } else {
        matched_flow(mu1, mu2, eps)
    };
    // Pair the unmatched remainder in index order.
    let (mut i, mut j) = (0, 0);
    while i < r1.len() && j < r2.len() {
        let m = r1[i].min(r2[j]);
        if m > 0.0 {
            entries.push((i, j, m));
        }
        r1[i] -= m;
        r2[j] -= m;
        if r1[i] <= 1e-300 {
            i += 1;
        }
        if r2[j] <= 1e-300 {
            j += 1;
        }
    }
    Ok(CouplingPlan { entries })
}

type Matched = (Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>);

fn matched_flow(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Matched {
    let (n1, n2) = (mu1.len(), mu2.len());
    let s = n1 + n2;
    let t = s + 1;
    let mut g = FlowNetwork::new(n1 + n2 + 2);
    for i in 0..n1 {
        g.add_edge(s, i, mu1.weights()[i]);
    }
    let mut pairs = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            if mu1.distance(i, mu2, j) <= eps {
                let id = g.add_edge(i, n1 + j, f64::INFINITY);
                pairs.push((i, j, id));
            }
        }
    }
    for j in 0..n2 {
        g.add_edge(n1 + j, t, mu2.weights()[j]);
    }
    g.max_flow(s, t);
    let mut r1 = mu1.weights().to_vec();
    let mut r2 = mu2.weights().to_vec();
    let mut entries = Vec::new();
    for (i, j, id) in pairs {
        let f = g.flow(id).min(r1[i]).min(r2[j]);
        if f > 0.0 {
            entries.push((i, j, f));
            r1[i] -= f;
            r2[j] -= f;
        }
    }
    (entries, r1, r2)
}

/// On the line, matching sinks in increasing order to the leftmost live
/// sources inside `[y - eps, y + eps]` is optimal.
fn matched_1d(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Matched {
    let mut src: Vec<usize> = (0..mu1.len()).collect();
    let mut snk: Vec<usize> = (0..mu2.len()).collect();
    src.sort_by(|&a, &b| mu1.atom(a)[0].total_cmp(&mu1.atom(b)[0]).then(a.cmp(&b)));
    snk.sort_by(|&a, &b| mu2.atom(a)[0].total_cmp(&mu2.atom(b)[0]).then(a.cmp(&b)));
    let mut r1 = mu1.weights().to_vec();
    let mut r2 = mu2.weights().to_vec();
    let mut entries = Vec::new();
    let mut start = 0;
    for &j in &snk {
        let y = mu2.atom(j)[0];
        while start < src.len() && (r1[src[start]] <= 0.0 || (y - mu1.atom(src[start])[0]) > eps) {
            start += 1;
        }
        let mut k = start;
        while k < src.len() && r2[j] > 0.0 {
            let i = src[k];
            if (mu1.atom(i)[0] - y).abs() > eps {
                if mu1.atom(i)[0] > y {
                    break;
                }
                k += 1;
                continue;
            }
            let m = r1[i].min(r2[j]);
            if m > 0.0 {
                entries.push((i, j, m));
                r1[i] -= m;
                r2[j] -= m;
            }
            k += 1;
        }
    }
    (entries, r1, r2)
}
