//! QAM constellations, the binary layer decomposition, Rayleigh channels and
//! AWGN, and hard decisions.
//!
//! A `4^Q`-QAM symbol has real and imaginary parts in
//! `{±1, ±3, …, ±(2^Q − 1)}` and is written as `x = Σ_q 2^(q−1) x_q` with
//! binary layers `x_q ∈ {±1 ± j}`. Bits map to layer signs directly
//! (`b ↦ 2b − 1`), without Gray coding. Bit order inside a block is
//! user-major, then layer `q = 1..Q`, then real part before imaginary part:
//! bit index `u·2Q + 2(q−1) + {0 = re, 1 = im}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector};

/// A `4^Q`-QAM constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Modulation {
    layers: usize,
}

impl Modulation {
    /// Largest supported number of layers (`4^16`-QAM is far beyond any use).
    pub const MAX_LAYERS: usize = 16;

    pub fn new(layers: usize) -> Result<Self> {
        if layers == 0 || layers > Self::MAX_LAYERS {
            return Err(Error::InvalidArgument(format!(
                "number of layers must lie in 1..={}, got {layers}",
                Self::MAX_LAYERS
            )));
        }
        Ok(Self { layers })
    }

    /// `Q`.
    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.layers
    }

    /// `4^Q`.
    pub fn size(&self) -> usize {
        1 << (2 * self.layers)
    }

    /// `2^Q − 1`, the largest amplitude per real dimension.
    pub fn max_level(&self) -> f64 {
        ((1u64 << self.layers) - 1) as f64
    }

    /// Odd amplitudes per real dimension, ascending.
    pub fn levels(&self) -> Vec<f64> {
        let m = self.max_level();
        (0..(1u64 << self.layers)).map(|i| 2.0 * i as f64 - m).collect()
    }

    /// Average symbol energy `2(4^Q − 1)/3`.
    pub fn symbol_energy(&self) -> f64 {
        2.0 * (self.size() as f64 - 1.0) / 3.0
    }

    /// All points, real part major then imaginary part, both ascending.
    pub fn constellation(&self) -> Vec<Complex64> {
        let levels = self.levels();
        levels
            .iter()
            .flat_map(|&re| levels.iter().map(move |&im| Complex64::new(re, im)))
            .collect()
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.level_index(z.re).is_some() && self.level_index(z.im).is_some()
    }

    /// For an odd integer `t` in range, the index `m = (t + 2^Q − 1)/2` whose
    /// bit `q − 1` is the sign bit of layer `q`.
    fn level_index(&self, t: f64) -> Option<u64> {
        let m = (t + self.max_level()) / 2.0;
        if m.fract() == 0.0 && m >= 0.0 && m <= self.max_level() {
            Some(m as u64)
        } else {
            None
        }
    }
}

/// `Q` binary layer vectors `x_q ∈ {±1 ± j}^U`, layer `q = 1` first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<ComplexVector>,
}

impl LayerStack {
    /// Checks that every part is exactly `±1` and all layers share a length.
    pub fn new(layers: Vec<ComplexVector>) -> Result<Self> {
        let users = layers.first().map(|l| l.len()).unwrap_or(0);
        if layers.is_empty() || users == 0 {
            return Err(Error::InvalidArgument("layer stack is empty".into()));
        }
        for layer in &layers {
            if layer.len() != users {
                return Err(Error::DimensionMismatch {
                    expected: users,
                    found: layer.len(),
                });
            }
            if let Some((i, z)) = layer
                .iter()
                .enumerate()
                .find(|(_, z)| z.re.abs() != 1.0 || z.im.abs() != 1.0)
            {
                return Err(Error::NotInConstellation { index: i, re: z.re, im: z.im });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[ComplexVector] {
        &self.layers
    }

    pub fn users(&self) -> usize {
        self.layers[0].len()
    }
}

/// Maps `2QU` bits to layer signs.
pub fn bits_to_layers(bits: &[u8], modulation: Modulation, users: usize) -> Result<LayerStack> {
    let q_count = modulation.layers();
    let expected = 2 * q_count * users;
    if bits.len() != expected || users == 0 {
        return Err(Error::LengthMismatch {
            expected,
            found: bits.len(),
        });
    }
    if let Some(&value) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::InvalidBit { value });
    }
    let sign = |b: u8| 2.0 * b as f64 - 1.0;
    let layers = (0..q_count)
        .map(|q| {
            (0..users)
                .map(|u| {
                    let base = u * 2 * q_count + 2 * q;
                    Complex64::new(sign(bits[base]), sign(bits[base + 1]))
                })
                .collect::<Vec<_>>()
                .into()
        })
        .collect();
    Ok(LayerStack { layers })
}

/// `Σ_q 2^(q−1) x_q`.
pub fn recompose(stack: &LayerStack) -> ComplexVector {
    recompose_layers(stack.layers())
}

/// `Σ_q 2^(q−1) x_q` for arbitrary (not necessarily binary) layers.
pub fn recompose_layers(layers: &[ComplexVector]) -> ComplexVector {
    let users = layers[0].len();
    let mut out = vec![Complex64::new(0.0, 0.0); users];
    for (q, layer) in layers.iter().enumerate() {
        let weight = layer_weight(q);
        for (o, z) in out.iter_mut().zip(layer.iter()) {
            *o += weight * z;
        }
    }
    out.into()
}

/// `2^q` for the zero-based layer index `q`.
pub fn layer_weight(q: usize) -> f64 {
    (1u64 << q) as f64
}

/// Splits constellation symbols into their unique binary layers.
pub fn decompose(x: &[Complex64], modulation: Modulation) -> Result<LayerStack> {
    let q_count = modulation.layers();
    let mut layers = vec![vec![Complex64::new(0.0, 0.0); x.len()]; q_count];
    for (u, z) in x.iter().enumerate() {
        let not_in = || Error::NotInConstellation { index: u, re: z.re, im: z.im };
        let m_re = modulation.level_index(z.re).ok_or_else(not_in)?;
        let m_im = modulation.level_index(z.im).ok_or_else(not_in)?;
        for (q, layer) in layers.iter_mut().enumerate() {
            let sign = |m: u64| if (m >> q) & 1 == 1 { 1.0 } else { -1.0 };
            layer[u] = Complex64::new(sign(m_re), sign(m_im));
        }
    }
    LayerStack::new(layers.into_iter().map(ComplexVector::from).collect())
}

/// Samples a standard circularly-symmetric complex Gaussian `CN(0, 1)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `B×U` channel with i.i.d. `CN(0, 1)` entries, drawn row by row.
pub fn rayleigh_channel<R: Rng + ?Sized>(b: usize, u: usize, rng: &mut R) -> Result<ComplexMatrix> {
    if u == 0 || b < u {
        return Err(Error::InvalidArgument(format!(
            "channel requires B >= U >= 1, got B={b}, U={u}"
        )));
    }
    Ok(ComplexMatrix::from_fn(b, u, |_, _| complex_gaussian(rng)))
}

/// Noise variance for an average received SNR (dB) per receive antenna:
/// `sigma2 = U E_s / 10^(snr/10)`. `+inf` gives `0`.
pub fn noise_sigma(snr_db: f64, users: usize, modulation: Modulation) -> f64 {
    users as f64 * modulation.symbol_energy() / 10f64.powf(snr_db / 10.0)
}

/// One channel use `r = H x + n`.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    pub h: ComplexMatrix,
    pub x_true: ComplexVector,
    /// Total complex noise variance per receive antenna.
    pub sigma2: f64,
    pub r: ComplexVector,
}

impl ChannelInstance {
    /// Builds an instance from a known received vector.
    pub fn new(h: ComplexMatrix, x_true: ComplexVector, sigma2: f64, r: ComplexVector) -> Result<Self> {
        if x_true.len() != h.cols() {
            return Err(Error::DimensionMismatch {
                expected: h.cols(),
                found: x_true.len(),
            });
        }
        if r.len() != h.rows() {
            return Err(Error::DimensionMismatch {
                expected: h.rows(),
                found: r.len(),
            });
        }
        if h.rows() < h.cols() {
            return Err(Error::InvalidArgument("instance requires B >= U".into()));
        }
        if !(sigma2 >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        Ok(Self { h, x_true, sigma2, r })
    }

    /// `B`.
    pub fn receive_antennas(&self) -> usize {
        self.h.rows()
    }

    /// `U`.
    pub fn users(&self) -> usize {
        self.h.cols()
    }
}

/// Passes `x_true` through `H` and adds `CN(0, sigma2)` noise. Noise is
/// always drawn (B samples) so the random stream does not depend on `sigma2`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    x_true: &ComplexVector,
    sigma2: f64,
    rng: &mut R,
) -> Result<ChannelInstance> {
    if x_true.len() != h.cols() {
        return Err(Error::DimensionMismatch {
            expected: h.cols(),
            found: x_true.len(),
        });
    }
    let std = sigma2.sqrt();
    let mut r = h.mul_vec(x_true);
    for ri in r.iter_mut() {
        let n = complex_gaussian(rng);
        if sigma2 > 0.0 {
            *ri += std * n;
        }
    }
    ChannelInstance::new(h.clone(), x_true.clone(), sigma2, r.into())
}

/// Nearest constellation point per real dimension:
/// `clamp(2 floor(t/2) + 1, −(2^Q − 1), 2^Q − 1)`, ties at even integers
/// going up.
pub fn hard_decision(v: &[Complex64], modulation: Modulation) -> ComplexVector {
    let m = modulation.max_level();
    let quantize = |t: f64| (2.0 * (t / 2.0).floor() + 1.0).clamp(-m, m);
    v.iter()
        .map(|z| Complex64::new(quantize(z.re), quantize(z.im)))
        .collect::<Vec<_>>()
        .into()
}

/// Inverse of `recompose ∘ bits_to_layers`.
pub fn bits_from_symbols(x: &[Complex64], modulation: Modulation) -> Result<Vec<u8>> {
    let stack = decompose(x, modulation)?;
    let q_count = modulation.layers();
    let mut bits = vec![0u8; 2 * q_count * x.len()];
    for (q, layer) in stack.layers().iter().enumerate() {
        for (u, z) in layer.iter().enumerate() {
            let base = u * 2 * q_count + 2 * q;
            bits[base] = u8::from(z.re > 0.0);
            bits[base + 1] = u8::from(z.im > 0.0);
        }
    }
    Ok(bits)
}

/// Draws `2QU` uniform bits.
pub fn random_bits<R: Rng + ?Sized>(count: usize, rng: &mut R) -> Vec<u8> {
    (0..count).map(|_| u8::from(rng.random::<bool>())).collect()
}
