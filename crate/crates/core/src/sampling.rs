//! Seeded samplers: noncentral matrix gamma, Haar orthogonal matrices and
//! the beta and bimatrix constructions built from independent gamma draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::densities::check_omega;
use crate::error::{Error, Result};
use crate::matrixkit::{inverse, interval_check, is_pd, psd_sqrt, spd_inv_sqrt, symmetrize, to_rows, Mat};

/// A (seed, stream) pair. Equal pairs give bit-identical draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream: u64,
}

impl RngHandle {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngHandle { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    // Column-major fill order is part of the reproducibility contract.
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Haar orthogonal matrix from the QR factorisation of a Gaussian matrix,
/// with columns rescaled so that R has a positive diagonal.
pub fn sample_haar_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> Mat {
    let qr = gaussian(m, m, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A ∼ G_m(a, I, Ω) as A = (M + E/√2)'(M + E/√2), with E an n×m standard
/// Gaussian matrix, n = 2a, and M the stack of Ω^{1/2} over zeros.
pub fn sample_matgamma(a: f64, omega: &Mat, rng: &mut ChaCha8Rng) -> Result<Mat> {
    let m = omega.nrows();
    let n = check_shape(a, m)?;
    check_omega(omega, m, "Omega")?;
    let mut x = gaussian(n, m, rng) * std::f64::consts::FRAC_1_SQRT_2;
    let root = psd_sqrt(omega);
    let mut top = x.view_mut((0, 0), (m, m));
    top += &root;
    Ok(symmetrize(&(x.transpose() * x)))
}

fn check_shape(a: f64, m: usize) -> Result<usize> {
    let n = 2.0 * a;
    if !(n.is_finite() && n.fract() == 0.0 && n >= 1.0) {
        return Err(Error::Domain(format!("shape {a} is not a positive half-integer")));
    }
    let n = n as usize;
    if n < m {
        return Err(Error::Domain(format!("2a = {n} is below the dimension {m}")));
    }
    Ok(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Definition {
    One,
    Two,
}

fn require_pd(x: &Mat, name: &str) -> Result<()> {
    if is_pd(x) {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite(name.to_string()))
    }
}

fn sandwich(outer: &Mat, inner: &Mat) -> Mat {
    symmetrize(&(outer * inner * outer))
}

/// Beta type I from A, B: (A+B)^{-1/2} A (A+B)^{-1/2} or A^{1/2}(A+B)⁻¹A^{1/2}.
pub fn construct_beta1(a: &Mat, b: &Mat, def: Definition) -> Result<Mat> {
    require_pd(a, "A")?;
    require_pd(b, "B")?;
    let s = a + b;
    Ok(match def {
        Definition::One => sandwich(&spd_inv_sqrt(&s)?, a),
        Definition::Two => sandwich(&psd_sqrt(a), &inverse(&s)?),
    })
}

/// Beta type II from A, B: B^{-1/2} A B^{-1/2} or A^{1/2} B⁻¹ A^{1/2}.
pub fn construct_beta2(a: &Mat, b: &Mat, def: Definition) -> Result<Mat> {
    require_pd(a, "A")?;
    require_pd(b, "B")?;
    Ok(match def {
        Definition::One => sandwich(&spd_inv_sqrt(b)?, a),
        Definition::Two => sandwich(&psd_sqrt(a), &inverse(b)?),
    })
}

/// U₁ = (A+C)^{-1/2} A (A+C)^{-1/2}, U₂ = (B+C)^{-1/2} B (B+C)^{-1/2}.
pub fn construct_bgb1(a: &Mat, b: &Mat, c: &Mat) -> Result<(Mat, Mat)> {
    Ok((construct_beta1(a, c, Definition::One)?, construct_beta1(b, c, Definition::One)?))
}

/// F₁ = C^{-1/2} A C^{-1/2}, F₂ = C^{-1/2} B C^{-1/2}.
pub fn construct_bgb2(a: &Mat, b: &Mat, c: &Mat) -> Result<(Mat, Mat)> {
    require_pd(a, "A")?;
    require_pd(b, "B")?;
    require_pd(c, "C")?;
    let r = spd_inv_sqrt(c)?;
    Ok((sandwich(&r, a), sandwich(&r, b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleDist {
    Matgamma,
    Beta1,
    Beta2,
    Bgb1,
    Bgb2,
}

impl SampleDist {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "matgamma" => SampleDist::Matgamma,
            "beta1" => SampleDist::Beta1,
            "beta2" => SampleDist::Beta2,
            "bgb1" => SampleDist::Bgb1,
            "bgb2" => SampleDist::Bgb2,
            _ => return Err(Error::Input(format!("unknown distribution {s:?}"))),
        })
    }

    pub fn matrices_per_draw(self) -> usize {
        match self {
            SampleDist::Matgamma | SampleDist::Beta1 | SampleDist::Beta2 => 1,
            SampleDist::Bgb1 | SampleDist::Bgb2 => 2,
        }
    }
}

/// Shapes and noncentralities feeding the gamma draws. `shapes[i]` pairs
/// with `omegas[i]`; beta laws use (A, B), bimatrix laws (A, B, C).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleParams {
    pub m: usize,
    pub shapes: Vec<f64>,
    #[serde(serialize_with = "ser_mats")]
    pub omegas: Vec<Mat>,
}

fn ser_mats<S: serde::Serializer>(v: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleMeta {
    pub dist: SampleDist,
    pub params: SampleParams,
    pub seed: u64,
    pub stream: u64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleBatch {
    pub meta: SampleMeta,
    /// One entry per draw, each holding one or two matrices.
    #[serde(serialize_with = "ser_draws")]
    pub draws: Vec<Vec<Mat>>,
}

fn ser_draws<S: serde::Serializer>(v: &[Vec<Mat>], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|d| d.iter().map(to_rows).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
}

impl SampleBatch {
    /// CSV with one row per draw: the flattened (row-major) matrices.
    pub fn to_csv(&self) -> String {
        let m = self.meta.params.m;
        let k = self.meta.dist.matrices_per_draw();
        let mut header = Vec::new();
        for s in 0..k {
            for i in 0..m {
                for j in 0..m {
                    header.push(format!("x{}_{}{}", s + 1, i + 1, j + 1));
                }
            }
        }
        let mut out = header.join(",");
        out.push('\n');
        for d in &self.draws {
            let row: Vec<String> = d
                .iter()
                .flat_map(|x| to_rows(x).into_iter().flatten())
                .map(|v| format!("{v:e}"))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn one_draw(dist: SampleDist, p: &SampleParams, rng: &mut ChaCha8Rng) -> Result<Vec<Mat>> {
    let g = |i: usize, rng: &mut ChaCha8Rng| sample_matgamma(p.shapes[i], &p.omegas[i], rng);
    Ok(match dist {
        SampleDist::Matgamma => vec![g(0, rng)?],
        SampleDist::Beta1 => {
            let (a, b) = (g(0, rng)?, g(1, rng)?);
            vec![construct_beta1(&a, &b, Definition::One)?]
        }
        SampleDist::Beta2 => {
            let (a, b) = (g(0, rng)?, g(1, rng)?);
            vec![construct_beta2(&a, &b, Definition::One)?]
        }
        SampleDist::Bgb1 => {
            let (a, b, c) = (g(0, rng)?, g(1, rng)?, g(2, rng)?);
            let (u1, u2) = construct_bgb1(&a, &b, &c)?;
            vec![u1, u2]
        }
        SampleDist::Bgb2 => {
            let (a, b, c) = (g(0, rng)?, g(1, rng)?, g(2, rng)?);
            let (f1, f2) = construct_bgb2(&a, &b, &c)?;
            vec![f1, f2]
        }
    })
}

/// `n` draws of `dist` from the stream (seed, stream).
pub fn sample_batch(dist: SampleDist, params: &SampleParams, n: usize, handle: RngHandle) -> Result<SampleBatch> {
    let need = match dist {
        SampleDist::Matgamma => 1,
        SampleDist::Beta1 | SampleDist::Beta2 => 2,
        SampleDist::Bgb1 | SampleDist::Bgb2 => 3,
    };
    if params.shapes.len() != need || params.omegas.len() != need {
        return Err(Error::Input(format!("{need} shapes and noncentralities required")));
    }
    for (i, (&a, o)) in params.shapes.iter().zip(&params.omegas).enumerate() {
        check_shape(a, params.m)?;
        check_omega(o, params.m, &format!("Omega{}", i + 1))?;
    }
    let mut rng = handle.rng();
    let mut draws = Vec::with_capacity(n);
    while draws.len() < n {
        let d = one_draw(dist, params, &mut rng)?;
        let ok = match dist {
            SampleDist::Beta1 | SampleDist::Bgb1 => d.iter().all(interval_check),
            _ => d.iter().all(is_pd),
        };
        if !ok {
            // Rounding can push an eigenvalue onto the boundary.
            return Err(Error::Support(format!("draw {} left the support", draws.len())));
        }
        draws.push(d);
    }
    Ok(SampleBatch {
        meta: SampleMeta { dist, params: params.clone(), seed: handle.seed, stream: handle.stream, count: n },
        draws,
    })
}
