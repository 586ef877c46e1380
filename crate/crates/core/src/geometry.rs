//! Cone geometry, the contraction factor alpha, and smallest enclosing balls.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("parameter out of range: {0}")]
    DomainError(String),
    #[error("support is empty")]
    EmptySupport,
}

pub type Vec2 = [f64; 2];

pub const CONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub d: usize,
    /// Row-major `d x d` orthogonal matrix `A`; only the leading block is used for `d = 1`.
    pub rotation: [[f64; 2]; 2],
    pub rho: f64,
}

impl ConeSpec {
    pub fn new(d: usize, rotation: [[f64; 2]; 2], rho: f64) -> Result<Self, GeometryError> {
        if !(0.0..1.0).contains(&rho) {
            return Err(GeometryError::DomainError(format!("rho = {rho} not in [0, 1)")));
        }
        let c = Self { d, rotation, rho };
        let ata = c.gram();
        for (i, row) in ata.iter().enumerate().take(d) {
            for (j, v) in row.iter().enumerate().take(d) {
                let want = if i == j { 1.0 } else { 0.0 };
                if (v - want).abs() > 1e-12 {
                    return Err(GeometryError::DomainError("rotation is not orthogonal".into()));
                }
            }
        }
        Ok(c)
    }

    pub fn identity(d: usize, rho: f64) -> Result<Self, GeometryError> {
        Self::new(d, [[1.0, 0.0], [0.0, 1.0]], rho)
    }

    /// Rotation by `theta` in 2D; in 1D `theta = pi` gives the reflection `-1`.
    pub fn rotated(d: usize, theta: f64, rho: f64) -> Result<Self, GeometryError> {
        if d == 1 {
            let s = if theta.cos() < 0.0 { -1.0 } else { 1.0 };
            return Self::new(1, [[s, 0.0], [0.0, 1.0]], rho);
        }
        let (s, c) = theta.sin_cos();
        Self::new(2, [[c, -s], [s, c]], rho)
    }

    fn gram(&self) -> [[f64; 2]; 2] {
        let a = &self.rotation;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate().take(self.d) {
            for (j, v) in row.iter_mut().enumerate().take(self.d) {
                *v = (0..self.d).map(|k| a[k][i] * a[k][j]).sum();
            }
        }
        out
    }

    /// `A^T xi`.
    pub fn pull_back(&self, xi: Vec2) -> Vec2 {
        let a = &self.rotation;
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.d) {
            *o = (0..self.d).map(|k| a[k][i] * xi[k]).sum();
        }
        out
    }

    /// `A nu*`.
    pub fn axis(&self) -> Vec2 {
        let s = nu_star(self.d);
        let a = &self.rotation;
        let mut out = [0.0; 2];
        for (i, o) in out.iter_mut().enumerate().take(self.d) {
            *o = (0..self.d).map(|k| a[i][k] * s[k]).sum();
        }
        out
    }
}

pub fn nu_star(d: usize) -> Vec2 {
    let v = 1.0 / (d as f64).sqrt();
    if d == 1 {
        [1.0, 0.0]
    } else {
        [v, v]
    }
}

pub fn norm(x: Vec2) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

pub fn dist(x: Vec2, y: Vec2) -> f64 {
    norm([x[0] - y[0], x[1] - y[1]])
}

/// `A^T xi` lies in the closed cone `H^rho` around the diagonal of the first orthant.
pub fn cone_membership(xi: Vec2, cone: &ConeSpec) -> bool {
    let y = cone.pull_back(xi);
    if y.iter().take(cone.d).any(|&c| c < -CONE_TOL) {
        return false;
    }
    let s = nu_star(cone.d);
    let proj: f64 = (0..cone.d).map(|k| y[k] * s[k]).sum();
    proj >= (1.0 - cone.rho) * norm(xi) - CONE_TOL
}

/// `alpha(gamma, rho) = sqrt(1 - 4 gamma / (1 + gamma)^2 (1 - rho)^2)`.
pub fn compute_alpha(gamma: f64, rho: f64) -> Result<f64, GeometryError> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(GeometryError::DomainError(format!("gamma = {gamma} not in (0, 1)")));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(GeometryError::DomainError(format!("rho = {rho} not in [0, 1)")));
    }
    let q = 1.0 - rho;
    Ok((1.0 - 4.0 * gamma / ((1.0 + gamma) * (1.0 + gamma)) * q * q).sqrt())
}

/// Upper bound on `|x - t nu*|` over unit vectors of the cone.
pub fn max_distance_bound(t: f64, rho: f64) -> Result<f64, GeometryError> {
    if !(t > 0.0) {
        return Err(GeometryError::DomainError(format!("t = {t} must be positive")));
    }
    Ok((t * t - 2.0 * t * (1.0 - rho) + 1.0).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec2,
    pub radius: f64,
}

impl Ball {
    fn from_two(a: Vec2, b: Vec2) -> Self {
        let center = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        Self { center, radius: dist(a, b) / 2.0 }
    }

    fn from_three(a: Vec2, b: Vec2, c: Vec2) -> Option<Self> {
        let (bx, by) = (b[0] - a[0], b[1] - a[1]);
        let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
        let det = 2.0 * (bx * cy - by * cx);
        let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
        if det.abs() <= 1e-14 * scale {
            return None;
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / det;
        let uy = (bx * c2 - cx * b2) / det;
        Some(Self { center: [a[0] + ux, a[1] + uy], radius: (ux * ux + uy * uy).sqrt() })
    }

    fn contains(&self, p: Vec2) -> bool {
        dist(self.center, p) <= self.radius * (1.0 + 1e-12) + 1e-15
    }
}

/// Exact smallest enclosing ball of a finite point set in the plane (or on a line).
pub fn min_enclosing_ball(points: &[Vec2]) -> Result<Ball, GeometryError> {
    if points.is_empty() {
        return Err(GeometryError::EmptySupport);
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5eed));
    let mut ball = Ball { center: pts[0], radius: 0.0 };
    for i in 1..pts.len() {
        if ball.contains(pts[i]) {
            continue;
        }
        ball = Ball { center: pts[i], radius: 0.0 };
        for j in 0..i {
            if ball.contains(pts[j]) {
                continue;
            }
            ball = Ball::from_two(pts[i], pts[j]);
            for k in 0..j {
                if ball.contains(pts[k]) {
                    continue;
                }
                // Collinear triples: the two farthest points span the ball.
                ball = Ball::from_three(pts[i], pts[j], pts[k]).unwrap_or_else(|| {
                    let cands = [
                        Ball::from_two(pts[i], pts[j]),
                        Ball::from_two(pts[i], pts[k]),
                        Ball::from_two(pts[j], pts[k]),
                    ];
                    cands.into_iter().max_by(|a, b| a.radius.total_cmp(&b.radius)).unwrap()
                });
            }
        }
    }
    Ok(ball)
}
