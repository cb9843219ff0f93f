use nalgebra::Vector2;

pub type Point2 = Vector2<f64>;

/// Convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Vertices are reordered counter-clockwise if given clockwise.
    pub fn new(mut vertices: Vec<Point2>) -> Self {
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    pub fn rectangle(min: Point2, max: Point2) -> Self {
        Self::new(vec![
            min,
            Point2::new(max.x, min.y),
            max,
            Point2::new(min.x, max.y),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn centroid(&self) -> Point2 {
        let o = self.vertices[0];
        let (mut a, mut c) = (0.0, Point2::zeros());
        for (p, q) in self.edges() {
            let (p, q) = (p - o, q - o);
            let cross = p.perp(&q);
            a += cross;
            c += (p + q) * cross;
        }
        o + c / (3.0 * a)
    }

    /// `∫ ‖X - centroid‖² dX` over the polygon.
    pub fn polar_moment(&self) -> f64 {
        let o = self.centroid();
        let mut ixx_plus_iyy = 0.0;
        for (p, q) in self.edges() {
            let (p, q) = (p - o, q - o);
            let cross = p.perp(&q);
            ixx_plus_iyy +=
                cross * (p.x * p.x + p.x * q.x + q.x * q.x + p.y * p.y + p.y * q.y + q.y * q.y);
        }
        ixx_plus_iyy / 12.0
    }

    /// `∫ ‖estimate - X‖² dX` over the polygon.
    pub fn squared_error_integral(&self, estimate: &Point2) -> f64 {
        self.area() * (estimate - self.centroid()).norm_squared() + self.polar_moment()
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// `{X : n·X ≤ c}` ∩ polygon; `None` if empty or degenerate.
    pub fn clip(&self, n: &Point2, c: f64) -> Option<Polygon> {
        let mut out = Vec::with_capacity(self.vertices.len() + 1);
        for (p, q) in self.edges() {
            let (fp, fq) = (n.dot(&p) - c, n.dot(&q) - c);
            if fp <= 0.0 {
                out.push(p);
            }
            if (fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0) {
                out.push(p + (q - p) * (fp / (fp - fq)));
            }
        }
        out.dedup_by(|a, b| (*a - *b).norm() == 0.0);
        if out.len() >= 2 && out[0] == out[out.len() - 1] {
            out.pop();
        }
        (out.len() >= 3 && signed_area(&out) > 0.0).then_some(Polygon { vertices: out })
    }

    /// Split by the line `n·X = c` into the `≤` and `≥` sides. A side below
    /// `min_area` is dropped; if the line misses the interior the polygon is
    /// returned whole on its side.
    pub fn split(&self, n: &Point2, c: f64, min_area: f64) -> (Option<Polygon>, Option<Polygon>) {
        let scale = n.norm() * (1.0 + self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max));
        let eps = 1e-12 * scale;
        let vals: Vec<f64> = self.vertices.iter().map(|v| n.dot(v) - c).collect();
        if vals.iter().all(|&v| v <= eps) {
            return (Some(self.clone()), None);
        }
        if vals.iter().all(|&v| v >= -eps) {
            return (None, Some(self.clone()));
        }
        let keep = |p: Option<Polygon>| p.filter(|p| p.area() >= min_area);
        let below = keep(self.clip(n, c));
        let above = keep(self.clip(&-n, -c));
        match (below, above) {
            (None, None) => (Some(self.clone()), None),
            (None, Some(_)) => (None, Some(self.clone())),
            (Some(_), None) => (Some(self.clone()), None),
            pair => pair,
        }
    }

    pub fn contains(&self, x: &Point2, tol: f64) -> bool {
        self.edges().all(|(p, q)| {
            let e = q - p;
            e.perp(&(x - p)) >= -tol * e.norm()
        })
    }

    /// The point of the closed polygon nearest to `x`.
    pub fn nearest_point(&self, x: &Point2) -> Point2 {
        if self.contains(x, 0.0) {
            return *x;
        }
        self.edges()
            .map(|(p, q)| {
                let e = q - p;
                let t = ((x - p).dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
                p + e * t
            })
            .min_by(|a, b| (a - x).norm_squared().total_cmp(&(b - x).norm_squared()))
            .expect("polygon has edges")
    }
}

fn signed_area(v: &[Point2]) -> f64 {
    if v.len() < 3 {
        return 0.0;
    }
    let o = v[0];
    let n = v.len();
    (0..n)
        .map(|i| (v[i] - o).perp(&(v[(i + 1) % n] - o)))
        .sum::<f64>()
        / 2.0
}

pub fn bounding_box(points: &[Point2]) -> (Point2, Point2) {
    points.iter().fold(
        (
            Point2::repeat(f64::INFINITY),
            Point2::repeat(f64::NEG_INFINITY),
        ),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Polygon {
        Polygon::rectangle(Point2::zeros(), Point2::new(1.0, 1.0))
    }

    #[test]
    fn square_moments() {
        let sq = unit_square();
        assert!((sq.area() - 1.0).abs() < 1e-15);
        assert!((sq.centroid() - Point2::new(0.5, 0.5)).norm() < 1e-15);
        assert!((sq.polar_moment() - 1.0 / 6.0).abs() < 1e-15);
        assert!((sq.squared_error_integral(&Point2::new(0.5, 0.5)) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let p = Polygon::new(vec![
            Point2::zeros(),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 0.0),
        ]);
        assert!(p.area() > 0.0);
    }

    #[test]
    fn split_conserves_area_and_moment() {
        let tri = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.5),
            Point2::new(1.0, 2.0),
        ]);
        let n = Point2::new(1.0, -0.3);
        let (a, b) = tri.split(&n, 1.0, 0.0);
        let (a, b) = (a.unwrap(), b.unwrap());
        assert!((a.area() + b.area() - tri.area()).abs() < 1e-14);
        let x = Point2::new(0.3, 0.7);
        let whole = tri.squared_error_integral(&x);
        assert!(
            (a.squared_error_integral(&x) + b.squared_error_integral(&x) - whole).abs() < 1e-12
        );
        let (c, d) = tri.split(&n, 100.0, 0.0);
        assert!(c.is_some() && d.is_none());
    }

    #[test]
    fn integral_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let poly = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(2.0, -0.5),
            Point2::new(2.5, 1.0),
            Point2::new(0.5, 2.0),
        ]);
        let x = Point2::new(1.7, 1.9);
        let (lo, hi) = poly.bounding_box();
        let box_area = (hi - lo).x * (hi - lo).y;
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let p = Point2::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y));
                if poly.contains(&p, 0.0) {
                    box_area * (x - p).norm_squared()
                } else {
                    0.0
                }
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - poly.squared_error_integral(&x)).abs() < 4.0 * se);
    }

    #[test]
    fn nearest_point_of_square() {
        let sq = Polygon::rectangle(Point2::new(2.0, 1.0), Point2::new(3.0, 2.0));
        assert!((sq.nearest_point(&Point2::zeros()) - Point2::new(2.0, 1.0)).norm() < 1e-15);
        let strip = Polygon::rectangle(Point2::new(-1.0, 1.0), Point2::new(1.0, 2.0));
        assert!((strip.nearest_point(&Point2::zeros()) - Point2::new(0.0, 1.0)).norm() < 1e-15);
        let around = Polygon::rectangle(Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0));
        assert_eq!(around.nearest_point(&Point2::zeros()), Point2::zeros());
    }
}
