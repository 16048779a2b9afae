//! Rician and near-flat channel generation, plus CSV exchange of realizations.
//!
//! Complex Gaussian draws follow the `CN(mean, var)` convention with the mean on
//! the real axis and the variance split evenly between the real and imaginary
//! parts.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};

/// Harvester link `H` and optional information-receiver link `G`, both `N x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DMatrix<Complex64>,
    pub g: Option<DMatrix<Complex64>>,
    /// Distances in wavelengths, when known.
    pub d_h: Option<f64>,
    pub d_g: Option<f64>,
    /// Linear path-loss factors already applied to `h` and `g`.
    pub l_h: f64,
    pub l_g: f64,
}

impl ChannelRealization {
    pub fn n_tones(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_antennas(&self) -> usize {
        self.h.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicianParams {
    /// Linear Rice factor.
    pub kappa: f64,
    pub seed: u64,
    pub n_tones: usize,
    pub n_antennas: usize,
}

impl RicianParams {
    pub fn from_db(kappa_db: f64, seed: u64, n_tones: usize, n_antennas: usize) -> Self {
        Self { kappa: db_to_linear(kappa_db), seed, n_tones, n_antennas }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

/// Free-space path loss `(lambda / (4 pi d))^2` for a distance in wavelengths.
pub fn path_loss(d_over_lambda: f64) -> Result<f64> {
    if !(d_over_lambda > 0.0 && d_over_lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "distance must be positive, got {d_over_lambda}"
        )));
    }
    Ok((1.0 / (4.0 * PI * d_over_lambda)).powi(2))
}

/// Draws an `N x M` Rician matrix `sqrt(L_P) * Z`, `Z ~ CN(sqrt(k/(k+1)), 1/(k+1))`.
///
/// Entries are drawn antenna-major (all tones of antenna 0, then antenna 1, ...)
/// so the first `M'` columns of an `M`-antenna draw equal an `M'`-antenna
/// draw from the same stream.
pub fn rician_matrix<R: Rng + ?Sized>(
    kappa: f64,
    path_loss: f64,
    n_tones: usize,
    n_antennas: usize,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidArgument(format!("kappa must be non-negative, got {kappa}")));
    }
    if !(path_loss > 0.0 && path_loss <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "path loss must be in (0, 1], got {path_loss}"
        )));
    }
    let los = (kappa / (kappa + 1.0)).sqrt();
    let sigma = (0.5 / (kappa + 1.0)).sqrt();
    let amp = path_loss.sqrt();
    let mut h = DMatrix::from_element(n_tones, n_antennas, Complex64::new(0.0, 0.0));
    for m in 0..n_antennas {
        for n in 0..n_tones {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            h[(n, m)] = Complex64::new(los + sigma * re, sigma * im) * amp;
        }
    }
    Ok(h)
}

/// Harvester-link realization from the caller's stream.
pub fn rician_draw<R: Rng + ?Sized>(
    params: &RicianParams,
    path_loss: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let h = rician_matrix(params.kappa, path_loss, params.n_tones, params.n_antennas, rng)?;
    Ok(ChannelRealization { h, g: None, d_h: None, d_g: None, l_h: path_loss, l_g: 1.0 })
}

/// Near frequency-flat single-antenna channel: real gains `N(1, sigma)` with
/// `sigma` the variance, clamped below at zero.
pub fn flat_draw<R: Rng + ?Sized>(
    n_tones: usize,
    sigma: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be non-negative, got {sigma}")));
    }
    let normal = Normal::new(1.0, sigma.sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let h = DMatrix::from_fn(n_tones, 1, |_, _| {
        Complex64::new(normal.sample(rng).max(0.0), 0.0)
    });
    Ok(ChannelRealization { h, g: None, d_h: None, d_g: None, l_h: 1.0, l_g: 1.0 })
}

/// Stream layout for seeded Monte Carlo runs. Realization `r` draws its
/// harvester link from ChaCha8 stream `2r` and its information-receiver link
/// from stream `2r + 1`, both keyed by the master seed. Grid points reuse the
/// same streams, so sweeps compare strategies on common random numbers.
pub fn realization_rng(seed: u64, realization: u64, link: Link) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * realization + link as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Harvester = 0,
    InfoReceiver = 1,
}

/// Draws the harvester link at `d_h` and, when `d_g` is given, an independent
/// information-receiver link at `d_g`, using [`realization_rng`].
pub fn seeded_realization(
    params: &RicianParams,
    realization: u64,
    d_h: f64,
    d_g: Option<f64>,
) -> Result<ChannelRealization> {
    let l_h = path_loss(d_h)?;
    let mut rng_h = realization_rng(params.seed, realization, Link::Harvester);
    let h = rician_matrix(params.kappa, l_h, params.n_tones, params.n_antennas, &mut rng_h)?;
    let (g, l_g) = match d_g {
        Some(d) => {
            let l_g = path_loss(d)?;
            let mut rng_g = realization_rng(params.seed, realization, Link::InfoReceiver);
            let g = rician_matrix(params.kappa, l_g, params.n_tones, params.n_antennas, &mut rng_g)?;
            (Some(g), l_g)
        }
        None => (None, 1.0),
    };
    Ok(ChannelRealization { h, g, d_h: Some(d_h), d_g, l_h, l_g })
}

/// Writes `tone,antenna,link,re,im` rows (zero-based indices, `H` rows first).
pub fn write_channel_csv<W: Write>(ch: &ChannelRealization, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tone", "antenna", "link", "re", "im"])?;
    let mut emit = |name: &str, m: &DMatrix<Complex64>| -> Result<()> {
        for n in 0..m.nrows() {
            for a in 0..m.ncols() {
                let c = m[(n, a)];
                w.write_record([
                    n.to_string(),
                    a.to_string(),
                    name.to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                ])?;
            }
        }
        Ok(())
    };
    emit("H", &ch.h)?;
    if let Some(g) = &ch.g {
        emit("G", g)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the format written by [`write_channel_csv`]. Path-loss metadata is not
/// stored in the file, so the result reports unit path loss and no distances.
pub fn read_channel_csv<R: Read>(input: R) -> Result<ChannelRealization> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let expected = ["tone", "antenna", "link", "re", "im"];
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::InvalidArgument(format!(
            "channel csv header must be {}, got {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut entries: Vec<(usize, usize, bool, Complex64)> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| {
            Error::InvalidArgument(format!("channel csv row {}: bad {what}", line + 2))
        };
        let tone: usize = rec[0].parse().map_err(|_| bad("tone"))?;
        let ant: usize = rec[1].parse().map_err(|_| bad("antenna"))?;
        let is_g = match &rec[2] {
            "H" => false,
            "G" => true,
            _ => return Err(bad("link")),
        };
        let re: f64 = rec[3].parse().map_err(|_| bad("re"))?;
        let im: f64 = rec[4].parse().map_err(|_| bad("im"))?;
        entries.push((tone, ant, is_g, Complex64::new(re, im)));
    }
    let h_entries: Vec<_> = entries.iter().filter(|e| !e.2).collect();
    if h_entries.is_empty() {
        return Err(Error::InvalidArgument("channel csv has no H rows".into()));
    }
    let n = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
    let m = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
    let fill = |want_g: bool| -> Result<DMatrix<Complex64>> {
        let mut mat = DMatrix::from_element(n, m, Complex64::new(f64::NAN, 0.0));
        for e in entries.iter().filter(|e| e.2 == want_g) {
            mat[(e.0, e.1)] = e.3;
        }
        if mat.iter().any(|c| c.re.is_nan()) {
            let link = if want_g { "G" } else { "H" };
            return Err(Error::InvalidArgument(format!(
                "channel csv: link {link} does not cover all {n}x{m} entries"
            )));
        }
        Ok(mat)
    };
    let h = fill(false)?;
    let g = if entries.iter().any(|e| e.2) { Some(fill(true)?) } else { None };
    Ok(ChannelRealization { h, g, d_h: None, d_g: None, l_h: 1.0, l_g: 1.0 })
}
