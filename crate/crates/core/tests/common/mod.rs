#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mnmr::linalg::Matrix;
use rand::Rng;

/// `A Aᵀ + 0.1 I` for a Gaussian `A`.
pub fn random_spd<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    let a = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + Matrix::identity(n, n) * 0.1
}

/// Kronecker product written out entry by entry.
pub fn dense_kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Matrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Dense Gaussian log-density through nalgebra's own Cholesky.
pub fn dense_logpdf(x: &[f64], mean: &[f64], cov: &Matrix) -> f64 {
    let n = x.len();
    let chol = nalgebra::Cholesky::new(cov.clone()).expect("SPD covariance");
    let diff = nalgebra::DVector::from_iterator(n, x.iter().zip(mean).map(|(a, b)| a - b));
    let sol = chol.solve(&diff);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + diff.dot(&sol))
}

/// Writes a HighD-style recording with `n_pairs` independent leader/follower
/// couples driving in direction 2 over `frames` frames at 25 Hz.
pub fn write_highd_recording<R: Rng>(dir: &Path, prefix: &str, n_pairs: usize, frames: i64, rng: &mut R) -> (PathBuf, PathBuf) {
    let mut tracks = String::from(
        "frame,id,x,y,width,height,xVelocity,yVelocity,xAcceleration,yAcceleration,precedingId,followingId,laneId\n",
    );
    let mut meta = String::from("id,width,height,initialFrame,finalFrame,numFrames,class,drivingDirection\n");
    for p in 0..n_pairs {
        let leader = 2 * p as i64 + 1;
        let follower = leader + 1;
        let phase: f64 = rng.random_range(0.0..6.28);
        let amp: f64 = rng.random_range(0.5..2.5);
        let freq: f64 = rng.random_range(0.05..0.2);
        let base: f64 = rng.random_range(20.0..30.0);
        let len_l = 4.5;
        let len_f = 4.2;
        let dt = 1.0 / 25.0;
        let lead_v = |t: f64| base + amp * (freq * t + phase).sin();
        let lead_a = |t: f64| amp * freq * (freq * t + phase).cos();
        let mut x_l = 100.0 + 300.0 * p as f64;
        let mut x_f = x_l - len_f - 30.0;
        let mut v_f = lead_v(0.0);
        for f in 0..frames {
            let t = f as f64 * dt;
            let v_l = lead_v(t);
            let gap = x_l - (x_f + len_f);
            let a_f = 0.3 * (gap - (5.0 + 1.2 * v_f)) + 0.8 * (v_l - v_f) + rng.random_range(-0.05..0.05);
            writeln!(tracks, "{},{leader},{x_l},10.0,{len_l},2.0,{v_l},0.0,{},0.0,0,{follower},2", f + 1, lead_a(t)).unwrap();
            writeln!(tracks, "{},{follower},{x_f},10.0,{len_f},2.0,{v_f},0.0,{a_f},0.0,{leader},0,2", f + 1).unwrap();
            x_l += v_l * dt;
            x_f += v_f * dt;
            v_f += a_f * dt;
        }
        for (id, len) in [(leader, len_l), (follower, len_f)] {
            writeln!(meta, "{id},{len},2.0,1,{frames},{frames},Car,2").unwrap();
        }
    }
    let tp = dir.join(format!("{prefix}_tracks.csv"));
    let mp = dir.join(format!("{prefix}_tracksMeta.csv"));
    std::fs::write(&tp, tracks).unwrap();
    std::fs::write(&mp, meta).unwrap();
    (tp, mp)
}
