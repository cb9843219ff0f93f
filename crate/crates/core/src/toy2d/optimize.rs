use super::polygon::Point2;

/// Downhill simplex in the plane from `start` with initial edge `step`.
/// Stops after `max_iter` iterations or when the simplex is smaller than `tol`.
pub fn nelder_mead<F: Fn(&Point2) -> f64>(
    f: &F,
    start: Point2,
    step: f64,
    tol: f64,
    max_iter: usize,
) -> (Point2, f64) {
    let mut s = [
        (start, f(&start)),
        (start + Point2::new(step, 0.0), 0.0),
        (start + Point2::new(0.0, step), 0.0),
    ];
    s[1].1 = f(&s[1].0);
    s[2].1 = f(&s[2].0);
    for _ in 0..max_iter {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = (s[1].0 - s[0].0).norm().max((s[2].0 - s[0].0).norm());
        if size < tol {
            break;
        }
        let centre = (s[0].0 + s[1].0) / 2.0;
        let worst = s[2];
        let reflect = centre + (centre - worst.0);
        let fr = f(&reflect);
        if fr < s[0].1 {
            let expand = centre + (centre - worst.0) * 2.0;
            let fe = f(&expand);
            s[2] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < s[1].1 {
            s[2] = (reflect, fr);
        } else {
            let contract = if fr < worst.1 {
                centre + (reflect - centre) * 0.5
            } else {
                centre + (worst.0 - centre) * 0.5
            };
            let fc = f(&contract);
            if fc < worst.1.min(fr) {
                s[2] = (contract, fc);
            } else {
                let best = s[0].0;
                for v in s.iter_mut().skip(1) {
                    v.0 = best + (v.0 - best) * 0.5;
                    v.1 = f(&v.0);
                }
            }
        }
    }
    s.sort_by(|a, b| a.1.total_cmp(&b.1));
    s[0]
}

/// Minimum of `f` over a `res × res` grid on `[lo, hi]`, ties going to the
/// lexicographically smallest `(x, y)`. Returns the best `k` grid points
/// in increasing order of value.
pub fn grid_search<F: Fn(&Point2) -> f64>(
    f: &F,
    lo: Point2,
    hi: Point2,
    res: usize,
    k: usize,
) -> Vec<(Point2, f64)> {
    let res = res.max(2);
    let h = (hi - lo) / (res - 1) as f64;
    let mut best: Vec<(Point2, f64)> = Vec::with_capacity(k + 1);
    for i in 0..res {
        for j in 0..res {
            let p = Point2::new(lo.x + h.x * i as f64, lo.y + h.y * j as f64);
            let v = f(&p);
            if best.len() < k || v < best[best.len() - 1].1 {
                let pos = best.partition_point(|b| b.1 <= v);
                best.insert(pos, (p, v));
                best.truncate(k);
            }
        }
    }
    best
}
