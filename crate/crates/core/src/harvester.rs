//! Rectifier models.
//!
//! Two families are supported for optimization: the fourth-order Taylor model
//! of the diode current and the region-1 second-order polynomial fit of the
//! input/output power curve. Both reduce to `c4 * E{y^4} + c2 * E{y^2}`. The
//! sigmoid and rational models are evaluators only.

use std::io::Read;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeParams {
    /// Saturation current (A).
    pub i_s: f64,
    /// Thermal voltage (V).
    pub v_t: f64,
    /// Ideality factor.
    pub gamma: f64,
    /// Antenna resistance (ohm).
    pub r_ant: f64,
}

impl DiodeParams {
    /// SMS-7630 Schottky diode on a 50 ohm antenna.
    pub const SMS7630: DiodeParams = DiodeParams { i_s: 5e-6, v_t: 25.86e-3, gamma: 1.05, r_ant: 50.0 };

    fn validate(&self) -> Result<()> {
        for (name, v) in [("i_s", self.i_s), ("v_t", self.v_t), ("gamma", self.gamma), ("r_ant", self.r_ant)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("diode {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HarvesterModel {
    DiodeTaylor { k2: f64, k4: f64, r_ant: f64 },
    /// `P_out = beta1 P_in^2 + beta2 P_in + beta3`.
    Poly2 { beta1: f64, beta2: f64, beta3: f64 },
    /// Logistic model; `pi1` is the slope, `pi2` the midpoint, `pi3` the saturation level.
    Sigmoid { pi1: f64, pi2: f64, pi3: f64 },
    /// `(eta3 P^3 + eta2 P^2 + eta1 P) / (q3 P^3 + q2 P^2 + q1 P + q0)`.
    Rational { eta: [f64; 3], q: [f64; 4] },
    /// `(theta3 P + theta2) / (P + theta1) - theta2 / theta1`.
    RationalSimplified { theta1: f64, theta2: f64, theta3: f64 },
}

impl HarvesterModel {
    pub fn diode(p: &DiodeParams) -> Result<Self> {
        let (k2, k4) = taylor_coeffs(p)?;
        Ok(Self::DiodeTaylor { k2, k4, r_ant: p.r_ant })
    }
}

/// Objective `c4 * E{y^4} + c2 * E{y^2} + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveCoeffs {
    pub c2: f64,
    pub c4: f64,
    pub offset: f64,
}

impl ObjectiveCoeffs {
    pub fn new(c2: f64, c4: f64, offset: f64) -> Result<Self> {
        if !(c2 > 0.0 && c2.is_finite()) {
            return Err(Error::InvalidArgument(format!("c2 must be positive, got {c2}")));
        }
        if !(c4 >= 0.0 && c4.is_finite()) {
            return Err(Error::InvalidArgument(format!("c4 must be non-negative, got {c4}")));
        }
        Ok(Self { c2, c4, offset })
    }
}

/// Taylor coefficients `k_n = i_s / (n! (gamma v_t)^n)` for `n = 2, 4`.
pub fn taylor_coeffs(p: &DiodeParams) -> Result<(f64, f64)> {
    p.validate()?;
    let nvt = p.gamma * p.v_t;
    let k2 = p.i_s / (2.0 * nvt.powi(2));
    let k4 = p.i_s / (24.0 * nvt.powi(4));
    Ok((k2, k4))
}

pub fn model_coeffs(m: &HarvesterModel) -> Result<ObjectiveCoeffs> {
    match *m {
        HarvesterModel::DiodeTaylor { k2, k4, r_ant } => {
            ObjectiveCoeffs::new(k2 * r_ant, k4 * r_ant * r_ant, 0.0)
        }
        HarvesterModel::Poly2 { beta1, beta2, beta3 } => ObjectiveCoeffs::new(beta2, beta1, beta3)
            .map_err(|e| Error::InvalidArgument(format!("poly2 is not a region-1 (convex) fit: {e}"))),
        HarvesterModel::Sigmoid { .. } => Err(Error::NotReducible("sigmoid")),
        HarvesterModel::Rational { .. } => Err(Error::NotReducible("rational")),
        HarvesterModel::RationalSimplified { .. } => Err(Error::NotReducible("rational (simplified)")),
    }
}

/// Output of the model for a single-tone input of power `p_in`, clamped at zero.
pub fn eval_model(m: &HarvesterModel, p_in: f64) -> Result<f64> {
    Ok(eval_model_raw(m, p_in)?.max(0.0))
}

/// Unclamped model output. For the diode model this is `f_DC` of a single
/// tone carrying `p_in` (`E{y^2} = p_in`, `E{y^4} = 1.5 p_in^2`).
pub fn eval_model_raw(m: &HarvesterModel, p_in: f64) -> Result<f64> {
    if !(p_in >= 0.0) {
        return Err(Error::InvalidArgument(format!("p_in must be non-negative, got {p_in}")));
    }
    let p = p_in;
    let v = match *m {
        HarvesterModel::DiodeTaylor { k2, k4, r_ant } => {
            k2 * r_ant * p + k4 * r_ant * r_ant * 1.5 * p * p
        }
        HarvesterModel::Poly2 { beta1, beta2, beta3 } => beta1 * p * p + beta2 * p + beta3,
        HarvesterModel::Sigmoid { pi1, pi2, pi3 } => {
            let omega = 1.0 / (1.0 + (pi1 * pi2).exp());
            let logistic = pi3 / (1.0 + (-pi1 * (p - pi2)).exp());
            (logistic - pi3 * omega) / (1.0 - omega)
        }
        HarvesterModel::Rational { eta, q } => {
            let num = ((eta[2] * p + eta[1]) * p + eta[0]) * p;
            let den = ((q[3] * p + q[2]) * p + q[1]) * p + q[0];
            if den == 0.0 {
                return Err(Error::Pole(p));
            }
            num / den
        }
        HarvesterModel::RationalSimplified { theta1, theta2, theta3 } => {
            if p + theta1 == 0.0 || theta1 == 0.0 {
                return Err(Error::Pole(p));
            }
            (theta3 * p + theta2) / (p + theta1) - theta2 / theta1
        }
    };
    Ok(v)
}

/// Least-squares quadratic fit of `(p_in, p_out)` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly2Fit {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// Standard errors of `(beta1, beta2, beta3)`; zero when there are only
    /// three samples.
    pub std_errors: [f64; 3],
    pub residual_ss: f64,
}

impl Poly2Fit {
    pub fn model(&self) -> HarvesterModel {
        HarvesterModel::Poly2 { beta1: self.beta1, beta2: self.beta2, beta3: self.beta3 }
    }
}

/// Fits `p_out = beta1 p_in^2 + beta2 p_in + beta3` through the normal
/// equations. Abscissae are scaled by their maximum magnitude internally.
pub fn fit_poly2(samples: &[(f64, f64)]) -> Result<Poly2Fit> {
    if samples.len() < 3 {
        return Err(Error::RankDeficient(format!("{} samples, need at least 3", samples.len())));
    }
    if samples.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sample".into()));
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::RankDeficient(format!("{} distinct p_in values, need 3", xs.len())));
    }
    let scale = samples.iter().map(|s| s.0.abs()).fold(0.0, f64::max);

    // columns: t^2, t, 1 with t = p_in / scale
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for &(x, y) in samples {
        let t = x / scale;
        let row = Vector3::new(t * t, t, 1.0);
        ata += row * row.transpose();
        aty += row * y;
    }
    let inv = ata
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient("normal equations are singular".into()))?;
    let gamma = inv * aty;

    let mut rss = 0.0;
    for &(x, y) in samples {
        let t = x / scale;
        let r = y - (gamma[0] * t * t + gamma[1] * t + gamma[2]);
        rss += r * r;
    }
    let dof = samples.len() - 3;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let unscale = [1.0 / (scale * scale), 1.0 / scale, 1.0];
    let std_errors = [0, 1, 2].map(|k| (sigma2 * inv[(k, k)]).max(0.0).sqrt() * unscale[k]);

    Ok(Poly2Fit {
        beta1: gamma[0] * unscale[0],
        beta2: gamma[1] * unscale[1],
        beta3: gamma[2],
        std_errors,
        residual_ss: rss,
    })
}

/// Reads `p_in_w,p_out_w` samples.
pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "p_in_w" || &headers[1] != "p_out_w" {
        return Err(Error::InvalidArgument(format!(
            "harvester csv header must be p_in_w,p_out_w, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<f64> {
            rec.get(k).and_then(|s| s.parse().ok()).ok_or_else(|| {
                Error::InvalidArgument(format!("harvester csv row {}: bad number", i + 2))
            })
        };
        out.push((parse(0)?, parse(1)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn sms7630_coefficients() {
        let (k2, k4) = taylor_coeffs(&DiodeParams::SMS7630).unwrap();
        // i_s / (2 (1.05 * 25.86e-3)^2) and i_s / (24 (1.05 * 25.86e-3)^4)
        assert_relative_eq!(k2, 3.390_817e-3, max_relative = 1e-6);
        assert_relative_eq!(k4, 0.383_255, max_relative = 1e-5);
    }

    #[test]
    fn unit_thermal_voltage() {
        let p = DiodeParams { i_s: 2.0, v_t: 1.0, gamma: 1.0, r_ant: 1.0 };
        let (k2, k4) = taylor_coeffs(&p).unwrap();
        assert_eq!(k2, 1.0);
        assert_relative_eq!(k4, 1.0 / 12.0, epsilon = 1e-16);
        assert!(taylor_coeffs(&DiodeParams { i_s: 0.0, ..p }).is_err());
    }

    #[test]
    fn ratio_identity_and_monotonicity() {
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for gamma in [1.0, 1.05, 1.2, 1.5, 2.0] {
            let p = DiodeParams { gamma, ..DiodeParams::SMS7630 };
            let (k2, k4) = taylor_coeffs(&p).unwrap();
            let nvt = gamma * p.v_t;
            assert_relative_eq!(k4 / k2, 1.0 / (12.0 * nvt * nvt), max_relative = 1e-12);
            assert!(k2 > 0.0 && k4 > 0.0);
            assert!(k2 < prev.0 && k4 < prev.1);
            prev = (k2, k4);
        }
    }

    #[test]
    fn coefficient_mapping() {
        let c = model_coeffs(&HarvesterModel::DiodeTaylor { k2: 1.0, k4: 1.0, r_ant: 2.0 }).unwrap();
        assert_eq!((c.c2, c.c4, c.offset), (2.0, 4.0, 0.0));
        let c = model_coeffs(&HarvesterModel::Poly2 { beta1: 0.5, beta2: 2.0, beta3: -0.1 }).unwrap();
        assert_eq!((c.c2, c.c4, c.offset), (2.0, 0.5, -0.1));
        let sig = HarvesterModel::Sigmoid { pi1: 1.0, pi2: 1.0, pi3: 1.0 };
        assert!(matches!(model_coeffs(&sig), Err(Error::NotReducible(_))));
        let rat = HarvesterModel::RationalSimplified { theta1: 1.0, theta2: 1.0, theta3: 1.0 };
        assert!(matches!(model_coeffs(&rat), Err(Error::NotReducible(_))));
        let concave = HarvesterModel::Poly2 { beta1: -1.0, beta2: 2.0, beta3: 0.0 };
        assert!(model_coeffs(&concave).is_err());
    }

    #[test]
    fn fit_exact_quadratic() {
        let samples: Vec<(f64, f64)> =
            (0..7).map(|i| i as f64 * 0.5).map(|x| (x, 2.0 * x * x + 3.0 * x - 1.0)).collect();
        let fit = fit_poly2(&samples).unwrap();
        assert!((fit.beta1 - 2.0).abs() < 1e-10);
        assert!((fit.beta2 - 3.0).abs() < 1e-10);
        assert!((fit.beta3 + 1.0).abs() < 1e-10);
    }

    #[test]
    fn fit_line() {
        let samples: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 * i as f64)).collect();
        let fit = fit_poly2(&samples).unwrap();
        assert!(fit.beta1.abs() < 1e-10);
        assert!((fit.beta2 - 3.0).abs() < 1e-10);
        assert!(fit.beta3.abs() < 1e-10);
    }

    #[test]
    fn fit_rank_deficiency() {
        assert!(matches!(fit_poly2(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::RankDeficient(_))));
        let repeated = [(1.0, 1.0), (1.0, 2.0), (2.0, 3.0), (2.0, 1.0)];
        assert!(matches!(fit_poly2(&repeated), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn fit_is_local_least_squares_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = i as f64 / 40.0;
                (x, 0.7 * x * x + 0.2 * x + 0.01 + noise.sample(&mut rng))
            })
            .collect();
        let fit = fit_poly2(&samples).unwrap();
        let rss = |b: [f64; 3]| {
            samples.iter().map(|(x, y)| (y - b[0] * x * x - b[1] * x - b[2]).powi(2)).sum::<f64>()
        };
        let base = rss([fit.beta1, fit.beta2, fit.beta3]);
        assert_relative_eq!(base, fit.residual_ss, max_relative = 1e-9);
        let step = Normal::new(0.0, 1e-4).unwrap();
        for _ in 0..1000 {
            let b = [
                fit.beta1 + step.sample(&mut rng),
                fit.beta2 + step.sample(&mut rng),
                fit.beta3 + step.sample(&mut rng),
            ];
            assert!(rss(b) >= base);
        }
    }

    #[test]
    fn model_evaluation() {
        let poly = HarvesterModel::Poly2 { beta1: 2.0, beta2: 3.0, beta3: -1.0 };
        assert_eq!(eval_model_raw(&poly, 0.5).unwrap(), 2.0 * 0.25 + 1.5 - 1.0);
        assert_eq!(eval_model_raw(&poly, 0.0).unwrap(), -1.0);
        assert_eq!(eval_model(&poly, 0.0).unwrap(), 0.0);
        assert!(eval_model(&poly, -1.0).is_err());

        for (pi1, pi2, pi3) in [(1500.0, 2e-3, 0.024), (2.0, 0.3, 5.0), (10.0, 1.0, 1.0)] {
            let sig = HarvesterModel::Sigmoid { pi1, pi2, pi3 };
            assert!(eval_model_raw(&sig, 0.0).unwrap().abs() < 1e-15);
            let far = eval_model_raw(&sig, 1e6 * pi2).unwrap();
            assert_relative_eq!(far, pi3, max_relative = 1e-9);
            let mut prev = 0.0;
            for i in 0..200 {
                let v = eval_model(&sig, i as f64 * pi2 / 20.0).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }

        for (t1, t2, t3) in [(1.0, 2.0, 3.0), (0.3, -0.1, 7.0)] {
            let rat = HarvesterModel::RationalSimplified { theta1: t1, theta2: t2, theta3: t3 };
            assert!(eval_model_raw(&rat, 0.0).unwrap().abs() < 1e-15);
        }
        let pole = HarvesterModel::RationalSimplified { theta1: 0.0, theta2: 1.0, theta3: 1.0 };
        assert!(matches!(eval_model(&pole, 0.0), Err(Error::Pole(_))));

        let full = HarvesterModel::Rational { eta: [1.0, 0.0, 0.0], q: [1.0, 0.0, 0.0, 0.0] };
        assert_eq!(eval_model(&full, 0.25).unwrap(), 0.25);

        let diode = HarvesterModel::DiodeTaylor { k2: 1.0, k4: 1.0, r_ant: 1.0 };
        assert_eq!(eval_model(&diode, 2.0).unwrap(), 2.0 + 6.0);
    }

    #[test]
    fn reads_sample_csv() {
        let text = "p_in_w,p_out_w\n1e-6,2e-7\n2e-6,5e-7\n";
        assert_eq!(read_samples_csv(text.as_bytes()).unwrap(), vec![(1e-6, 2e-7), (2e-6, 5e-7)]);
        assert!(read_samples_csv("pin,pout\n1,2\n".as_bytes()).is_err());
        assert!(read_samples_csv("p_in_w,p_out_w\n1,x\n".as_bytes()).is_err());
    }
}
