//! Deterministic generators and ground-truth labelers for the nine
//! benchmark problems.
//!
//! All problems live on the box [-1, 1]^d. The circle, sphere and
//! hypersphere boundaries are sized so the inner class covers exactly half
//! the box volume (which pushes the hypersphere radius beyond 1). Boundary
//! points (a measure-zero set) go to the lowest eligible class index.
//!
//! Generation is keyed per sample index, so datasets are byte-identical
//! across runs, platforms and parallel partitionings.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{key, Stream};

const DATASET_TAG: u64 = 0x6461_7461; // "data"

/// The nine benchmark problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Problem {
    Circle,
    NonConvex,
    Crown,
    Sphere,
    Hypersphere,
    Tricrown,
    ThreeCircles,
    Squares,
    WavyLines,
}

/// Radius of the circle holding half the area of [-1, 1]^2.
pub fn circle_radius() -> f64 {
    (2.0 / PI).sqrt()
}

/// Radius of the sphere holding half the volume of [-1, 1]^3.
pub fn sphere_radius() -> f64 {
    (3.0 / PI).powf(1.0 / 3.0)
}

/// Radius of the 4-ball holding half the volume of [-1, 1]^4. Exceeds 1:
/// the boundary pokes out of the feature box.
pub fn hypersphere_radius() -> f64 {
    2.0 / PI.sqrt()
}

/// Outer and inner radii of the crown annulus. The annulus and the inner
/// disc each hold a quarter of the box area.
pub fn crown_radii() -> (f64, f64) {
    let outer = circle_radius();
    (outer, outer / 2.0f64.sqrt())
}

/// Radius and centers of the three-circles discs.
pub fn three_circles_geometry() -> (f64, [(f64, f64); 3]) {
    ((2.0 / PI).sqrt() / 2.0, [(-0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)])
}

fn non_convex_frontier(x1: f64) -> f64 {
    -x1 + 0.5 * (PI * x1).sin() + 0.3 * (3.0 * PI * x1).sin()
}

fn wavy_curves(x1: f64) -> (f64, f64) {
    let s = (PI * x1).sin();
    (s + x1, s - x1)
}

impl Problem {
    pub const ALL: [Problem; 9] = [
        Problem::Circle,
        Problem::NonConvex,
        Problem::Crown,
        Problem::Sphere,
        Problem::Hypersphere,
        Problem::Tricrown,
        Problem::ThreeCircles,
        Problem::Squares,
        Problem::WavyLines,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Problem::Circle => "circle",
            Problem::NonConvex => "non-convex",
            Problem::Crown => "crown",
            Problem::Sphere => "sphere",
            Problem::Hypersphere => "hypersphere",
            Problem::Tricrown => "tricrown",
            Problem::ThreeCircles => "three-circles",
            Problem::Squares => "squares",
            Problem::WavyLines => "wavy-lines",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase();
        Problem::ALL
            .iter()
            .copied()
            .find(|p| p.name() == normalized)
            .ok_or_else(|| Error::invalid(format!("unknown problem {s:?}")))
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Sphere => 3,
            Problem::Hypersphere => 4,
            _ => 2,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Problem::Tricrown => 3,
            Problem::ThreeCircles | Problem::Squares | Problem::WavyLines => 4,
            _ => 2,
        }
    }

    fn id(&self) -> u64 {
        Problem::ALL.iter().position(|p| p == self).unwrap() as u64
    }
}

/// One labeled point.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub class: usize,
}

/// A labeled dataset together with the seed that regenerates it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub problem: Problem,
    pub samples: Vec<Sample>,
    pub seed: u64,
}

/// Ground-truth class of a point.
pub fn label_point(problem: Problem, x: &[f64]) -> Result<usize> {
    if x.len() != problem.dim() {
        return Err(Error::invalid(format!(
            "{} expects {} coordinates, got {}",
            problem.name(),
            problem.dim(),
            x.len()
        )));
    }
    if x.iter().any(|c| !(-1.0..=1.0).contains(c)) {
        return Err(Error::invalid("coordinate outside [-1, 1]"));
    }
    let r2: f64 = x.iter().map(|c| c * c).sum();
    Ok(match problem {
        Problem::Circle => usize::from(r2.sqrt() > circle_radius()),
        Problem::Sphere => usize::from(r2.sqrt() > sphere_radius()),
        Problem::Hypersphere => usize::from(r2.sqrt() > hypersphere_radius()),
        Problem::NonConvex => usize::from(x[1] > non_convex_frontier(x[0])),
        Problem::Crown => {
            let (outer, inner) = crown_radii();
            let r = r2.sqrt();
            usize::from(!(inner..=outer).contains(&r))
        }
        Problem::Tricrown => {
            let (outer, inner) = crown_radii();
            let r = r2.sqrt();
            if r <= inner {
                0
            } else if r <= outer {
                1
            } else {
                2
            }
        }
        Problem::ThreeCircles => {
            let (radius, centers) = three_circles_geometry();
            let mut class = 3;
            for (c, (cx, cy)) in centers.iter().enumerate() {
                let d2 = (x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy);
                if d2.sqrt() <= radius {
                    class = c;
                    break;
                }
            }
            class
        }
        Problem::Squares => 2 * usize::from(x[1] > 0.0) + usize::from(x[0] > 0.0),
        Problem::WavyLines => {
            let (g1, g2) = wavy_curves(x[0]);
            let (lo, hi) = (g1.min(g2), g1.max(g2));
            if x[1] <= lo {
                0
            } else if x[1] <= hi {
                if g1 >= g2 {
                    1
                } else {
                    2
                }
            } else {
                3
            }
        }
    })
}

/// Draw `n` points uniformly on the box and label them.
pub fn sample_dataset(problem: Problem, n: usize, seed: u64) -> Dataset {
    let dim = problem.dim();
    let samples = (0..n)
        .map(|i| {
            let mut stream = Stream::new(key(&[DATASET_TAG, problem.id(), seed, i as u64]));
            let x: Vec<f64> = (0..dim).map(|_| stream.symmetric()).collect();
            let class = label_point(problem, &x).expect("generated point is in range");
            Sample { x, class }
        })
        .collect();
    Dataset { problem, samples, seed }
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    // n must be even
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Volume of a radius-`rho` ball clipped to [-1, 1]^3. Valid for
/// rho < sqrt(2), where the six face caps do not overlap.
fn clipped_ball3_volume(rho: f64) -> f64 {
    let full = 4.0 / 3.0 * PI * rho.powi(3);
    if rho <= 1.0 {
        return full;
    }
    let h = rho - 1.0;
    let cap = PI * h * h * (3.0 * rho - h) / 3.0;
    full - 6.0 * cap
}

/// Exact (closed-form or quadrature) class fractions within the box.
/// Quadrature-backed entries are accurate to well below 1e-4.
pub fn class_balance(problem: Problem) -> Vec<f64> {
    match problem {
        Problem::Circle | Problem::Sphere => vec![0.5, 0.5],
        // the frontier is odd in x1 and stays inside the box, so the area
        // below it is exactly half
        Problem::NonConvex => vec![0.5, 0.5],
        Problem::Crown => vec![0.25, 0.75],
        Problem::Tricrown => vec![0.25, 0.25, 0.5],
        Problem::ThreeCircles => vec![0.125, 0.125, 0.125, 0.625],
        Problem::Squares => vec![0.25; 4],
        Problem::Hypersphere => {
            let r = hypersphere_radius();
            let r2 = r * r;
            let slice = |w: f64| clipped_ball3_volume((r2 - w * w).sqrt());
            // integrand has a kink where the slice radius crosses 1
            let w_star = (r2 - 1.0).sqrt();
            let volume = 2.0 * (simpson(slice, 0.0, w_star, 2000) + simpson(slice, w_star, 1.0, 2000));
            let inner = volume / 16.0;
            vec![inner, 1.0 - inner]
        }
        Problem::WavyLines => {
            let lo = |x: f64| {
                let (g1, g2) = wavy_curves(x);
                g1.min(g2).clamp(-1.0, 1.0)
            };
            let hi = |x: f64| {
                let (g1, g2) = wavy_curves(x);
                g1.max(g2).clamp(-1.0, 1.0)
            };
            let below = simpson(|x| lo(x) + 1.0, -1.0, 1.0, 8000) / 4.0;
            let above = simpson(|x| 1.0 - hi(x), -1.0, 1.0, 8000) / 4.0;
            // between the curves, the higher one is g1 exactly for x >= 0
            let between_right = simpson(|x| hi(x) - lo(x), 0.0, 1.0, 8000) / 4.0;
            let between_left = simpson(|x| hi(x) - lo(x), -1.0, 0.0, 8000) / 4.0;
            vec![below, between_right, between_left, above]
        }
    }
}

impl Dataset {
    /// Write as CSV with header `x1,...,xd,class` and 17-significant-digit
    /// coordinates.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let dim = self.problem.dim();
        let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        out.push_str(",class\n");
        for s in &self.samples {
            for c in &s.x {
                out.push_str(&format!("{c:.16e},"));
            }
            out.push_str(&format!("{}\n", s.class));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Read a CSV written by [`Dataset::write_csv`]. Rejects out-of-range
    /// coordinates and class indices.
    pub fn read_csv(problem: Problem, path: &Path) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)?;
        let dim = problem.dim();
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let expected_cols = dim + 1;
        if header.split(',').count() != expected_cols {
            return Err(Error::Parse(format!(
                "expected {expected_cols} columns for {}",
                problem.name()
            )));
        }
        let mut samples = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != expected_cols {
                return Err(Error::Parse(format!("line {}: wrong column count", lineno + 2)));
            }
            let mut x = Vec::with_capacity(dim);
            for f in &fields[..dim] {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("line {}: bad coordinate {f:?}", lineno + 2)))?;
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "line {}: coordinate {v} outside [-1, 1]",
                        lineno + 2
                    )));
                }
                x.push(v);
            }
            let class: usize = fields[dim]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad class", lineno + 2)))?;
            if class >= problem.classes() {
                return Err(Error::invalid(format!(
                    "line {}: class {class} out of range",
                    lineno + 2
                )));
            }
            samples.push(Sample { x, class });
        }
        Ok(Dataset { problem, samples, seed: 0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problem_shapes() {
        let expect = [
            (Problem::Circle, 2, 2),
            (Problem::NonConvex, 2, 2),
            (Problem::Crown, 2, 2),
            (Problem::Sphere, 3, 2),
            (Problem::Hypersphere, 4, 2),
            (Problem::Tricrown, 2, 3),
            (Problem::ThreeCircles, 2, 4),
            (Problem::Squares, 2, 4),
            (Problem::WavyLines, 2, 4),
        ];
        for (p, d, k) in expect {
            assert_eq!(p.dim(), d, "{}", p.name());
            assert_eq!(p.classes(), k, "{}", p.name());
            assert_eq!(Problem::from_name(p.name()).unwrap(), p);
        }
        assert!(Problem::from_name("pentagon").is_err());
    }

    #[test]
    fn circle_labels() {
        assert_eq!(label_point(Problem::Circle, &[0.0, 0.0]).unwrap(), 0);
        // |(1,1)| = 1.414 > sqrt(2/pi) = 0.798
        assert_eq!(label_point(Problem::Circle, &[1.0, 1.0]).unwrap(), 1);
        // boundary goes to the inner class
        let r = circle_radius();
        assert_eq!(label_point(Problem::Circle, &[r, 0.0]).unwrap(), 0);
    }

    #[test]
    fn hypersphere_boundary_pokes_out() {
        let r = hypersphere_radius();
        assert!((r - 1.1283791670955126).abs() < 1e-12);
        assert!(r > 1.0);
        // solve (pi^2/2) r^4 = 8
        assert!((PI * PI / 2.0 * r.powi(4) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_is_rejected() {
        assert!(label_point(Problem::Circle, &[1.5, 0.0]).is_err());
        assert!(label_point(Problem::Circle, &[0.0]).is_err());
    }

    #[test]
    fn squares_quadrants() {
        assert_eq!(label_point(Problem::Squares, &[-0.5, -0.5]).unwrap(), 0);
        assert_eq!(label_point(Problem::Squares, &[0.5, -0.5]).unwrap(), 1);
        assert_eq!(label_point(Problem::Squares, &[-0.5, 0.5]).unwrap(), 2);
        assert_eq!(label_point(Problem::Squares, &[0.5, 0.5]).unwrap(), 3);
    }

    #[test]
    fn tricrown_rings() {
        let (outer, inner) = crown_radii();
        assert_eq!(label_point(Problem::Tricrown, &[0.0, 0.0]).unwrap(), 0);
        assert_eq!(label_point(Problem::Tricrown, &[(inner + outer) / 2.0, 0.0]).unwrap(), 1);
        assert_eq!(label_point(Problem::Tricrown, &[0.99, 0.99]).unwrap(), 2);
        // crown inverts: annulus is class 0
        assert_eq!(label_point(Problem::Crown, &[(inner + outer) / 2.0, 0.0]).unwrap(), 0);
        assert_eq!(label_point(Problem::Crown, &[0.0, 0.0]).unwrap(), 1);
    }

    #[test]
    fn generation_is_deterministic() {
        for p in Problem::ALL {
            let a = sample_dataset(p, 64, 17);
            let b = sample_dataset(p, 64, 17);
            assert_eq!(a, b);
            let c = sample_dataset(p, 64, 18);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn prefix_stability_under_growth() {
        // per-index streams: the first n samples do not depend on n
        let small = sample_dataset(Problem::Circle, 10, 5);
        let large = sample_dataset(Problem::Circle, 200, 5);
        assert_eq!(small.samples[..], large.samples[..10]);
    }

    #[test]
    fn all_samples_in_range_and_consistent() {
        for p in Problem::ALL {
            let d = sample_dataset(p, 500, 3);
            assert_eq!(d.samples.len(), 500);
            for s in &d.samples {
                assert!(s.x.iter().all(|c| (-1.0..=1.0).contains(c)));
                assert_eq!(label_point(p, &s.x).unwrap(), s.class, "{}", p.name());
            }
        }
    }

    #[test]
    fn balances_sum_to_one() {
        for p in Problem::ALL {
            let b = class_balance(p);
            assert_eq!(b.len(), p.classes());
            let sum: f64 = b.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "{}: {sum}", p.name());
        }
    }

    #[test]
    fn hypersphere_inner_fraction_is_clipped_below_half() {
        let b = class_balance(Problem::Hypersphere);
        assert!(b[0] < 0.5, "inner {}", b[0]);
        assert!(b[0] > 0.4, "inner {}", b[0]);
    }

    #[test]
    fn monte_carlo_matches_class_balance() {
        let n = 100_000;
        for p in Problem::ALL {
            let d = sample_dataset(p, n, 999);
            let balance = class_balance(p);
            let mut counts = vec![0usize; p.classes()];
            for s in &d.samples {
                counts[s.class] += 1;
            }
            for (c, &expected) in balance.iter().enumerate() {
                let observed = counts[c] as f64 / n as f64;
                let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
                assert!(
                    (observed - expected).abs() < 3.0 * sigma + 1e-4,
                    "{} class {c}: observed {observed}, expected {expected}",
                    p.name()
                );
            }
        }
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let dir = std::env::temp_dir().join("requp-dataset-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("circle.csv");
        let d = sample_dataset(Problem::Circle, 50, 7);
        d.write_csv(&path).unwrap();
        let back = Dataset::read_csv(Problem::Circle, &path).unwrap();
        assert_eq!(back.samples, d.samples);

        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "x1,x2,class\n1.5,0.0,0\n").unwrap();
        assert!(Dataset::read_csv(Problem::Circle, &bad).is_err());
    }
}
