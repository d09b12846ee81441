use dicke_core::classical::{
    poincare_section, section_initial_condition, transformed_extremes,
};
use dicke_core::lattice::{all_chains, Lattice};
use dicke_core::quantum::{Sector, Spectrum};
use dicke_core::stats::spacing_check;
use dicke_core::ModelParams;

fn tuned() -> ModelParams {
    ModelParams::new(1.0, 1.0, 2.5, 0.0, 40, 40).unwrap()
}

fn chain_points(points: &[(f64, f64)]) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    used[0] = true;
    order.push(0usize);
    let mut cur = 0usize;
    for _ in 1..n {
        let (cx, cy) = points[cur];
        let mut best = usize::MAX;
        let mut bd = f64::INFINITY;
        for (i, &(x, y)) in points.iter().enumerate() {
            if !used[i] {
                let d = (x - cx).powi(2) + (y - cy).powi(2);
                if d < bd {
                    bd = d;
                    best = i;
                }
            }
        }
        used[best] = true;
        order.push(best);
        cur = best;
    }
    let mut gaps: Vec<f64> = order
        .windows(2)
        .map(|w| {
            let (ax, ay) = points[w[0]];
            let (bx, by) = points[w[1]];
            ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt()
        })
        .collect();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    gaps.sort_by(f64::total_cmp);
    let med = gaps[gaps.len() / 2];
    (order, max_gap / med)
}

fn closed_curve_residual(points: &[(f64, f64)], harmonics: usize) -> f64 {
    let n = points.len();
    let (order, _) = chain_points(points);
    let mut s = vec![0.0f64; n];
    for i in 1..n {
        let (ax, ay) = points[order[i - 1]];
        let (bx, by) = points[order[i]];
        s[i] = s[i - 1] + ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt();
    }
    let (lx, ly) = points[order[n - 1]];
    let (fx, fy) = points[order[0]];
    let total = s[n - 1] + ((fx - lx).powi(2) + (fy - ly).powi(2)).sqrt();
    let dim = 2 * harmonics + 1;
    let row = |t: f64| -> Vec<f64> {
        let mut v = vec![1.0];
        for h in 1..=harmonics {
            v.push((h as f64 * t).cos());
            v.push((h as f64 * t).sin());
        }
        v
    };
    let solve = |targets: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut ata = vec![vec![0.0f64; dim]; dim];
        let mut atb = vec![0.0f64; dim];
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * s[i] / total;
            let v = row(t);
            for a in 0..dim {
                for b in 0..dim {
                    ata[a][b] += v[a] * v[b];
                }
                atb[a] += v[a] * targets(i);
            }
        }
        for col in 0..dim {
            let piv = (col..dim)
                .max_by(|&a, &b| ata[a][col].abs().total_cmp(&ata[b][col].abs()))
                .unwrap();
            ata.swap(col, piv);
            atb.swap(col, piv);
            for r2 in (col + 1)..dim {
                let f = ata[r2][col] / ata[col][col];
                for c2 in col..dim {
                    ata[r2][c2] -= f * ata[col][c2];
                }
                atb[r2] -= f * atb[col];
            }
        }
        let mut coef = vec![0.0f64; dim];
        for i in (0..dim).rev() {
            let mut acc = atb[i];
            for k in (i + 1)..dim {
                acc -= ata[i][k] * coef[k];
            }
            coef[i] = acc / ata[i][i];
        }
        coef
    };
    let cx = solve(&|i| points[order[i]].0);
    let cy = solve(&|i| points[order[i]].1);
    let mut worst = 0.0f64;
    for i in 0..n {
        let t = 2.0 * std::f64::consts::PI * s[i] / total;
        let v = row(t);
        let x: f64 = v.iter().zip(&cx).map(|(a, b)| a * b).sum();
        let y: f64 = v.iter().zip(&cy).map(|(a, b)| a * b).sum();
        let (px, py) = points[order[i]];
        worst = worst.max(((px - x).powi(2) + (py - y).powi(2)).sqrt());
    }
    worst
}

fn main() {
    let p = tuned();

    // c10a: scan (M, energy fraction) candidates for smooth closed curves.
    for m_target in [0.6f64, 0.8, 1.2, 1.4] {
        let (lo, hi) = transformed_extremes(&p, m_target, 4096).unwrap();
        let fold = m_target - 0.5;
        for frac in [0.3f64, 0.55] {
            let e = lo + frac * (hi - lo);
            let ic = match section_initial_condition(&p, m_target, e) {
                Ok(ic) => ic,
                Err(err) => {
                    println!("c10a: M={m_target} frac={frac} e={e:.4} IC failed: {err}");
                    continue;
                }
            };
            let cross = poincare_section(&p, &[ic], 800.0, 1e-10).unwrap();
            let pts: Vec<(f64, f64)> = cross.iter().map(|c| (c.xp, c.pp)).collect();
            if pts.len() < 120 {
                println!("c10a: M={m_target} frac={frac} e={e:.4} only {} pts", pts.len());
                continue;
            }
            let (_, gap_ratio) = chain_points(&pts);
            let r32 = closed_curve_residual(&pts, 32);
            let r40 = closed_curve_residual(&pts, 40);
            println!(
                "c10a: M={m_target} frac={frac} e={e:.4} dfold={:.3} n={} gapr={gap_ratio:.1} H32={r32:.2e} H40={r40:.2e}",
                (e - fold).abs(),
                pts.len()
            );
        }
    }

    // c8 alternates away from the separatrix energy.
    let pj = ModelParams::new(1.0, 1.0, 2.5, 0.0, 80, 80).unwrap();
    let s = Spectrum::compute(&pj, &Sector::MBlock(60)).unwrap();
    let n = s.energies.len();
    for frac in [0.35, 0.45, 0.62] {
        let e = s.energies[(n as f64 * frac) as usize];
        let ratio = spacing_check(&s, e).unwrap();
        println!("c8: frac={frac} E={e:.3} ratio={ratio:.4} |err|={:.4}", (ratio - 1.0).abs());
    }

    // c9: full chain table with the classification rule applied.
    let lat = Lattice::build(&p, 0, 120).unwrap();
    let chains = all_chains(&lat);
    let mut n_below = 0;
    let mut n_above = 0;
    for ch in &chains {
        let first = *ch.columns.first().unwrap();
        if first > 34 {
            continue;
        }
        let idx40 = ch.columns.iter().position(|&c| c == 80).map(|_| 0);
        let _ = idx40;
        let e40 = ch
            .columns
            .iter()
            .position(|&c| c == 40)
            .map(|i| ch.energies[i]);
        let Some(e40) = e40 else { continue };
        let bg = ch.background();
        let (col, amp) = match ch.spike() {
            Some(v) => v,
            None => (0, 0.0),
        };
        let ratio = if bg > 0.0 { amp / bg } else { f64::INFINITY };
        let class = if e40 < 16.0 {
            n_below += 1;
            if ratio < 10.0 { "below-ok" } else { "below-VIOLATION" }
        } else if e40 > 22.0 {
            n_above += 1;
            if ratio >= 10.0 && (col as i64 - 40).unsigned_abs() <= 1 {
                "above-ok"
            } else {
                "above-VIOLATION"
            }
        } else {
            "band"
        };
        println!(
            "c9: k={} first={first} E40={e40:.2} ratio={ratio:.1} col={col} {class}",
            ch.k
        );
    }
    println!("c9: below={n_below} above={n_above}");
}
