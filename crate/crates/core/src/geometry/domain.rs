use super::Point;
use std::f64::consts::PI;

/// Foot point of a projection onto a boundary curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub foot: Point,
    /// Outward unit normal at the foot.
    pub normal: Point,
    pub distance: f64,
}

pub trait Boundary {
    fn project(&self, p: &Point) -> Projection;
}

/// Star-shaped domain bounded by r(theta) = r0 + amp cos(lobes theta) about `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain2D {
    pub center: Point,
    pub r0: f64,
    pub amp: f64,
    pub lobes: u32,
}

impl Domain2D {
    pub fn new(center: Point, r0: f64, amp: f64, lobes: u32) -> Self {
        assert!(r0 > amp.abs(), "radius must stay positive");
        Self { center, r0, amp, lobes }
    }

    pub fn disk(center: Point, radius: f64) -> Self {
        Self::new(center, radius, 0.0, 0)
    }

    /// Five-lobed curve r = 1 + 0.25 cos 5θ centred at (2, 0); the origin lies outside.
    pub fn test_domain() -> Self {
        Self::new(Point::new(2.0, 0.0), 1.0, 0.25, 5)
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.r0 + self.amp * (self.lobes as f64 * t).cos()
    }
    fn dr(&self, t: f64) -> f64 {
        let k = self.lobes as f64;
        -self.amp * k * (k * t).sin()
    }
    fn ddr(&self, t: f64) -> f64 {
        let k = self.lobes as f64;
        -self.amp * k * k * (k * t).cos()
    }

    pub fn point(&self, t: f64) -> Point {
        self.center + self.radius(t) * Point::new(t.cos(), t.sin())
    }

    pub fn tangent(&self, t: f64) -> Point {
        let (s, c) = t.sin_cos();
        self.dr(t) * Point::new(c, s) + self.radius(t) * Point::new(-s, c)
    }

    pub fn normal(&self, t: f64) -> Point {
        let tg = self.tangent(t);
        Point::new(tg.y, -tg.x).normalize()
    }

    /// Signed curvature, positive on convex arcs.
    pub fn curvature(&self, t: f64) -> f64 {
        let (r, r1, r2) = (self.radius(t), self.dr(t), self.ddr(t));
        (r * r + 2.0 * r1 * r1 - r * r2) / (r * r + r1 * r1).powf(1.5)
    }

    pub fn contains(&self, p: &Point) -> bool {
        let d = p - self.center;
        d.norm() < self.radius(d.y.atan2(d.x))
    }

    pub fn area(&self) -> f64 {
        if self.lobes == 0 {
            PI * (self.r0 + self.amp).powi(2)
        } else {
            PI * (self.r0 * self.r0 + 0.5 * self.amp * self.amp)
        }
    }

    pub fn perimeter(&self) -> f64 {
        let n = 20_000;
        let h = 2.0 * PI / n as f64;
        (0..n).map(|i| self.tangent((i as f64 + 0.5) * h).norm() * h).sum()
    }

    /// Parameter of the nearest boundary point.
    pub fn nearest_param(&self, p: &Point) -> f64 {
        let n = 256;
        let h = 2.0 * PI / n as f64;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let t = i as f64 * h;
            let d = (self.point(t) - p).norm_squared();
            if d < best.0 {
                best = (d, t);
            }
        }
        // golden-section refinement on the bracketing interval
        let (mut a, mut b) = (best.1 - h, best.1 + h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |t: f64| (self.point(t) - p).norm_squared();
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        while b - a > 1e-15 * (1.0 + a.abs()) {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = f(d);
            }
        }
        // a couple of Newton steps on (B(t) - p) . B'(t) = 0 for full precision
        let mut t = 0.5 * (a + b);
        for _ in 0..3 {
            let q = self.point(t) - p;
            let tg = self.tangent(t);
            let (s, co) = t.sin_cos();
            let d2 = self.ddr(t) * Point::new(co, s) + 2.0 * self.dr(t) * Point::new(-s, co)
                - self.radius(t) * Point::new(co, s);
            let g1 = q.dot(&tg);
            let g2 = tg.norm_squared() + q.dot(&d2);
            if g2 <= 0.0 {
                break;
            }
            let tn = t - g1 / g2;
            if (tn - t).abs() > h {
                break;
            }
            t = tn;
        }
        t.rem_euclid(2.0 * PI)
    }

    pub fn distance(&self, p: &Point) -> f64 {
        (self.point(self.nearest_param(p)) - p).norm()
    }
}

impl Boundary for Domain2D {
    fn project(&self, p: &Point) -> Projection {
        let t = self.nearest_param(p);
        let foot = self.point(t);
        Projection { foot, normal: self.normal(t), distance: (foot - p).norm() }
    }
}

/// The line y = 0 seen from the interior y > 0, with normals fanning out of the
/// point G = (0, 3s cot alpha) on the symmetry axis. Projection follows the
/// ray through G (vertical for alpha = 0); the reported distance is the
/// distance to the line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanLine {
    pub alpha: f64,
    pub spacing: f64,
}

impl FanLine {
    pub fn normal_at(&self, x: f64) -> Point {
        super::reference_normal(self.alpha, self.spacing, x)
    }
}

impl Boundary for FanLine {
    fn project(&self, p: &Point) -> Projection {
        let (sa, ca) = self.alpha.sin_cos();
        // G = (0, g) with g = 3 s cos/sin; the foot is x * g / (g - y),
        // written without dividing by sin(alpha).
        let num = 3.0 * self.spacing * ca;
        let den = 3.0 * self.spacing * ca - p.y * sa;
        let x = p.x * num / den;
        let foot = Point::new(x, 0.0);
        Projection { foot, normal: self.normal_at(x), distance: p.y.abs() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_domain_properties() {
        let d = Domain2D::test_domain();
        assert_eq!(d.radius(0.0), d.radius(2.0 * PI));
        let n = 2000;
        let mut pos = 0;
        let mut neg = 0;
        let mut min_origin = f64::INFINITY;
        for i in 0..n {
            let t = 2.0 * PI * i as f64 / n as f64;
            // sign-scan oracle of the polar curvature numerator
            let k = d.curvature(t);
            if k > 0.0 {
                pos += 1;
            } else if k < 0.0 {
                neg += 1;
            }
            min_origin = min_origin.min(d.point(t).norm());
            assert!((d.normal(t).norm() - 1.0).abs() < 1e-14);
            assert!(d.radius(t) > 0.0);
        }
        assert!(pos > 0 && neg > 0);
        assert!(min_origin >= 0.75 - 1e-12);
        assert!(!d.contains(&Point::zeros()));
        assert!(d.contains(&Point::new(2.0, 0.0)));
    }

    #[test]
    fn normals_point_outward() {
        let d = Domain2D::test_domain();
        for i in 0..100 {
            let t = 0.0628 * i as f64;
            let n = d.normal(t);
            assert!(!d.contains(&(d.point(t) + 1e-6 * n)));
            assert!(d.contains(&(d.point(t) - 1e-6 * n)));
        }
    }

    #[test]
    fn circle_projection_is_radial() {
        let d = Domain2D::disk(Point::new(0.5, -0.3), 2.0);
        let p = Point::new(0.5, -0.3) + 1.7 * Point::new(0.6, 0.8);
        let pr = d.project(&p);
        assert!((pr.foot - (Point::new(0.5, -0.3) + 2.0 * Point::new(0.6, 0.8))).norm() < 1e-12);
        assert!((pr.normal - Point::new(0.6, 0.8)).norm() < 1e-12);
        assert!((pr.distance - 0.3).abs() < 1e-12);
    }

    #[test]
    fn nearest_point_beats_brute_force() {
        let d = Domain2D::test_domain();
        for &(x, y) in &[(2.1, 0.3), (2.9, 0.05), (1.3, -0.6), (2.0, 1.1)] {
            let p = Point::new(x, y);
            let t = d.nearest_param(&p);
            let got = (d.point(t) - p).norm();
            let brute = (0..200_000)
                .map(|i| (d.point(2.0 * PI * i as f64 / 200_000.0) - p).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(got <= brute + 1e-12);
            // stationarity: the residual is normal to the curve
            let q = d.point(t) - p;
            assert!(q.dot(&d.tangent(t)).abs() < 1e-10 * d.tangent(t).norm());
        }
    }

    #[test]
    fn flat_projection_is_vertical_at_zero_angle() {
        let f = FanLine { alpha: 0.0, spacing: 0.1 };
        let p = f.project(&Point::new(0.15, 0.0866));
        assert!((p.foot - Point::new(0.15, 0.0)).norm() < 1e-15);
        assert_eq!(p.normal, Point::new(0.0, -1.0));
    }
}
