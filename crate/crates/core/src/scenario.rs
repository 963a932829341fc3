//! Network geometry and channel generation.
//!
//! Every realization is a pure function of the scenario and a seed. Random
//! draws come from ChaCha8 seeded with the 64-bit seed, one stream per
//! purpose (see [`Stream`]), so each link family can be regenerated without
//! touching the others and the sequence is portable across platforms.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use relaycast_linalg::Complex64;

use crate::units::{db_to_linear, dbm_to_watt};
use crate::CoreError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinkKind {
    SourceRelay,
    SourceDestination,
    RelayDestination,
}

impl LinkKind {
    pub fn label(self) -> &'static str {
        match self {
            LinkKind::SourceRelay => "source-relay",
            LinkKind::SourceDestination => "source-destination",
            LinkKind::RelayDestination => "relay-destination",
        }
    }
}

/// ChaCha8 stream numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 0,
    SourceRelayFading = 1,
    SourceDestinationFading = 2,
    RelayDestinationFading = 3,
    SourceDestinationShadowing = 4,
    RelayDestinationShadowing = 5,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Log-distance pathloss `PL(d) = intercept + slope·log10(d / 1 m)` in dB.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossModel {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl Default for PathlossModel {
    /// Urban-micro non-line-of-sight fit.
    fn default() -> Self {
        Self {
            intercept_db: 34.53,
            slope_db: 38.0,
        }
    }
}

impl PathlossModel {
    /// The same law applies to every link kind.
    pub fn pathloss_db(&self, distance: f64, _kind: LinkKind) -> f64 {
        assert!(distance > 0.0, "distance must be positive");
        self.intercept_db + self.slope_db * distance.log10()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGeometry {
    pub relay_count: usize,
    pub destination_count: usize,
    pub relay_radius: f64,
    pub destination_radius_min: f64,
    pub destination_radius_max: f64,
    pub source_height: f64,
    pub relay_height: f64,
    pub destination_height: f64,
    pub carrier_frequency: f64,
}

impl NetworkGeometry {
    /// Ten relays on a 250 m ring, destinations between 600 and 800 m.
    pub fn reference(relay_count: usize, destination_count: usize) -> Self {
        Self {
            relay_count,
            destination_count,
            relay_radius: 250.0,
            destination_radius_min: 600.0,
            destination_radius_max: 800.0,
            source_height: 10.0,
            relay_height: 5.0,
            destination_height: 1.5,
            carrier_frequency: 1.8e9,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |what: &str| Err(CoreError::InvalidInput(format!("geometry: {what}")));
        if self.relay_count == 0 {
            return bad("relay_count must be at least 1");
        }
        if self.destination_count == 0 {
            return bad("destination_count must be at least 1");
        }
        if !(self.destination_radius_min > 0.0 && self.destination_radius_min <= self.destination_radius_max) {
            return bad("need 0 < destination_radius_min <= destination_radius_max");
        }
        if !(self.relay_radius > 0.0) {
            return bad("relay_radius must be positive");
        }
        if !(self.source_height > 0.0 && self.relay_height > 0.0 && self.destination_height > 0.0) {
            return bad("heights must be positive");
        }
        Ok(())
    }

    pub fn relay_positions(&self) -> Vec<[f64; 3]> {
        let r = self.relay_count as f64;
        (0..self.relay_count)
            .map(|i| {
                let phi = TAU * i as f64 / r;
                [self.relay_radius * phi.cos(), self.relay_radius * phi.sin(), self.relay_height]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub geometry: NetworkGeometry,
    pub pathloss: PathlossModel,
    /// Lognormal shadowing on links ending at a destination; none on
    /// source→relay.
    pub shadowing_std_db: f64,
    pub destination_noise_dbm: f64,
    pub relay_noise_dbm: f64,
    /// When false every `d_m` is zero.
    pub direct_links: bool,
}

impl Scenario {
    pub fn reference(relay_count: usize, destination_count: usize) -> Self {
        Self {
            geometry: NetworkGeometry::reference(relay_count, destination_count),
            pathloss: PathlossModel::default(),
            shadowing_std_db: 10.0,
            destination_noise_dbm: -132.0,
            relay_noise_dbm: -132.0,
            direct_links: true,
        }
    }

    pub fn source_position(&self) -> [f64; 3] {
        [0.0, 0.0, self.geometry.source_height]
    }

    /// Uniform angle, uniform radial distance.
    pub fn destination_positions(&self, seed: u64) -> Vec<[f64; 3]> {
        let g = &self.geometry;
        let mut rng = stream_rng(seed, Stream::Placement as u64);
        (0..g.destination_count)
            .map(|_| {
                let phi = rng.random_range(0.0..TAU);
                let rad = if g.destination_radius_max > g.destination_radius_min {
                    rng.random_range(g.destination_radius_min..g.destination_radius_max)
                } else {
                    g.destination_radius_min
                };
                [rad * phi.cos(), rad * phi.sin(), g.destination_height]
            })
            .collect()
    }

    pub fn generate(&self, seed: u64) -> Result<ChannelRealization, CoreError> {
        self.geometry.validate()?;
        let src = self.source_position();
        let relays = self.geometry.relay_positions();
        let dests = self.destination_positions(seed);
        let gain = |a: [f64; 3], b: [f64; 3], kind| db_to_linear(-self.pathloss.pathloss_db(distance(a, b), kind));

        let mut fading_sr = stream_rng(seed, Stream::SourceRelayFading as u64);
        let mut fading_sd = stream_rng(seed, Stream::SourceDestinationFading as u64);
        let mut fading_rd = stream_rng(seed, Stream::RelayDestinationFading as u64);
        let mut shadow_sd = stream_rng(seed, Stream::SourceDestinationShadowing as u64);
        let mut shadow_rd = stream_rng(seed, Stream::RelayDestinationShadowing as u64);
        let shadow = |rng: &mut ChaCha8Rng| {
            let z: f64 = rng.sample(StandardNormal);
            db_to_linear(self.shadowing_std_db * z)
        };

        let f_gain: Vec<f64> = relays.iter().map(|&p| gain(src, p, LinkKind::SourceRelay)).collect();
        let f = f_gain
            .iter()
            .map(|&gn| complex_gaussian(&mut fading_sr) * gn.sqrt())
            .collect();

        let mut g_gain = Vec::with_capacity(dests.len());
        let mut g = Vec::with_capacity(dests.len());
        let mut d_gain = Vec::with_capacity(dests.len());
        let mut d = Vec::with_capacity(dests.len());
        for &dst in &dests {
            let row_gain: Vec<f64> = relays
                .iter()
                .map(|&p| gain(p, dst, LinkKind::RelayDestination) * shadow(&mut shadow_rd))
                .collect();
            g.push(
                row_gain
                    .iter()
                    .map(|&gn| complex_gaussian(&mut fading_rd) * gn.sqrt())
                    .collect(),
            );
            g_gain.push(row_gain);
            let dg = gain(src, dst, LinkKind::SourceDestination) * shadow(&mut shadow_sd);
            let fade = complex_gaussian(&mut fading_sd);
            if self.direct_links {
                d.push(fade * dg.sqrt());
                d_gain.push(dg);
            } else {
                d.push(Complex64::new(0.0, 0.0));
                d_gain.push(0.0);
            }
        }

        Ok(ChannelRealization {
            f,
            g,
            d,
            sigma_nu_sq: dbm_to_watt(self.destination_noise_dbm),
            sigma_eta_sq: dbm_to_watt(self.relay_noise_dbm),
            large_scale: Some(LargeScale { f: f_gain, g: g_gain, d: d_gain }),
        })
    }
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Linear power gains (pathloss times shadowing) behind each coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct LargeScale {
    pub f: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub d: Vec<f64>,
}

/// All coefficients of one network draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// Source→relay, length R.
    pub f: Vec<Complex64>,
    /// Relay→destination, `g[m][r]`.
    pub g: Vec<Vec<Complex64>>,
    /// Source→destination, length M.
    pub d: Vec<Complex64>,
    pub sigma_nu_sq: f64,
    pub sigma_eta_sq: f64,
    pub large_scale: Option<LargeScale>,
}

impl ChannelRealization {
    /// Realization from explicit coefficients.
    pub fn new(
        f: Vec<Complex64>,
        g: Vec<Vec<Complex64>>,
        d: Vec<Complex64>,
        sigma_nu_sq: f64,
        sigma_eta_sq: f64,
    ) -> Result<Self, CoreError> {
        let ch = Self {
            f,
            g,
            d,
            sigma_nu_sq,
            sigma_eta_sq,
            large_scale: None,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn relay_count(&self) -> usize {
        self.f.len()
    }

    pub fn destination_count(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let r = self.f.len();
        if r == 0 || self.d.is_empty() {
            return Err(CoreError::InvalidInput("need at least one relay and one destination".into()));
        }
        if self.g.len() != self.d.len() || self.g.iter().any(|row| row.len() != r) {
            return Err(CoreError::InvalidInput("channel dimensions are inconsistent".into()));
        }
        if !(self.sigma_nu_sq > 0.0 && self.sigma_eta_sq > 0.0) {
            return Err(CoreError::InvalidInput("noise powers must be positive".into()));
        }
        let finite = |c: &Complex64| c.re.is_finite() && c.im.is_finite();
        if !(self.f.iter().all(finite) && self.d.iter().all(finite) && self.g.iter().flatten().all(finite)) {
            return Err(CoreError::InvalidInput("channel coefficients must be finite".into()));
        }
        Ok(())
    }

    /// CSV dump with columns `link,i,j,re,im`; `i` is the relay index for
    /// relay links and the destination index otherwise.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("link,i,j,re,im\n");
        for (r, c) in self.f.iter().enumerate() {
            let _ = writeln!(out, "{},{r},0,{:e},{:e}", LinkKind::SourceRelay.label(), c.re, c.im);
        }
        for (m, row) in self.g.iter().enumerate() {
            for (r, c) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{r},{m},{:e},{:e}", LinkKind::RelayDestination.label(), c.re, c.im);
            }
        }
        for (m, c) in self.d.iter().enumerate() {
            let _ = writeln!(out, "{},{m},0,{:e},{:e}", LinkKind::SourceDestination.label(), c.re, c.im);
        }
        out
    }
}
