//! Sparse geometric THz MIMO channels.
//!
//! Each hop is the sum of at most one line-of-sight path and `L` reflected
//! paths, each an outer product of UPA steering vectors weighted by a complex
//! gain that carries spreading loss, molecular absorption and propagation
//! delay phase:
//!
//! ```text
//! H = sqrt(Nt·Nr)·α0·a_r·a_tᴴ + sqrt(Nt·Nr/L)·Σ_l α_l·a_r,l·a_t,lᴴ
//! ```
//!
//! Sampling is a pure function of an explicit RNG stream, and every sampled
//! matrix can be rebuilt from its [`PathParams`] list (see [`assemble_channel`]
//! and the plain-text dump format in [`write_dump`]).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{CMatrix, CVector, Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayRole {
    Bs,
    Ms,
    Ris,
}

impl ArrayRole {
    fn tag(self) -> &'static str {
        match self {
            ArrayRole::Bs => "bs",
            ArrayRole::Ms => "ms",
            ArrayRole::Ris => "ris",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "bs" => Some(ArrayRole::Bs),
            "ms" => Some(ArrayRole::Ms),
            "ris" => Some(ArrayRole::Ris),
            _ => None,
        }
    }
}

/// Uniform planar array in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_x: usize,
    pub n_y: usize,
    pub element_spacing_m: f64,
    pub role: ArrayRole,
}

impl ArrayGeometry {
    /// Near-square `n_x × n_y` factorisation of `n_elements` with
    /// `n_x ≤ n_y`.
    pub fn planar(role: ArrayRole, n_elements: usize, element_spacing_m: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::Usage(format!("{} array needs at least one element", role.tag())));
        }
        let mut n_x = (n_elements as f64).sqrt().floor() as usize;
        while n_elements % n_x != 0 {
            n_x -= 1;
        }
        Ok(Self {
            n_x,
            n_y: n_elements / n_x,
            element_spacing_m,
            role,
        })
    }

    /// Half-wavelength transceiver array (BS or MS).
    pub fn half_wavelength(role: ArrayRole, n_elements: usize, wavelength_m: f64) -> Result<Self> {
        Self::planar(role, n_elements, wavelength_m / 2.0)
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Normalised UPA response; entry `p·n_y + q` is
/// `exp(j·2π·d/λ·(p·sinθ_el·cosθ_az + q·cosθ_el)) / sqrt(N)`.
pub fn upa_response(geom: &ArrayGeometry, azimuth_rad: f64, elevation_rad: f64, wavelength_m: f64) -> CVector {
    debug_assert!(wavelength_m > 0.0);
    let n = geom.len();
    let scale = 1.0 / (n as f64).sqrt();
    let k = 2.0 * PI * geom.element_spacing_m / wavelength_m;
    let u = elevation_rad.sin() * azimuth_rad.cos();
    let v = elevation_rad.cos();
    CVector::from_iterator(
        n,
        (0..geom.n_x).flat_map(|p| {
            (0..geom.n_y).map(move |q| Complex64::from_polar(scale, k * (p as f64 * u + q as f64 * v)))
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub kind: PathKind,
    pub aoa_azimuth_rad: f64,
    pub aoa_elevation_rad: f64,
    pub aod_azimuth_rad: f64,
    pub aod_elevation_rad: f64,
    pub complex_gain: Complex64,
    pub delay_s: f64,
}

/// Propagation parameters of one hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub carrier_freq_hz: f64,
    pub distance_m: f64,
    /// Molecular absorption coefficient κ(f) (1/m).
    pub absorption_coeff_per_m: f64,
    /// Reflection coefficient ξ(f) of the scattering surfaces.
    pub reflection_coeff: f64,
    pub n_nlos_paths: usize,
    /// Range of the extra path length added to reflected paths (m).
    pub nlos_excess_range_m: (f64, f64),
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_freq_hz > 0.0) {
            return Err(Error::Domain(format!("carrier frequency must be > 0, got {}", self.carrier_freq_hz)));
        }
        if !(self.distance_m > 0.0) {
            return Err(Error::Domain(format!("link distance must be > 0, got {}", self.distance_m)));
        }
        if !(self.absorption_coeff_per_m >= 0.0) {
            return Err(Error::Domain("absorption coefficient must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.reflection_coeff) {
            return Err(Error::Domain("reflection coefficient must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.nlos_excess_range_m;
        if !(lo >= 0.0 && hi >= lo) {
            return Err(Error::Domain(format!("invalid NLoS excess range [{lo}, {hi}]")));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn los_delay_s(&self) -> f64 {
        self.distance_m / SPEED_OF_LIGHT
    }
}

/// Line-of-sight gain: spreading loss, half-power absorption and delay phase.
pub fn los_gain(link: &LinkGeometry) -> Complex64 {
    let f = link.carrier_freq_hz;
    let r = link.distance_m;
    let magnitude = SPEED_OF_LIGHT / (4.0 * PI * f * r) * (-0.5 * link.absorption_coeff_per_m * r).exp();
    Complex64::from_polar(magnitude, -2.0 * PI * f * link.los_delay_s())
}

/// Gain of a reflected path with legs `r1_m` (transmitter to reflector) and
/// `r2_m` (reflector to receiver).
pub fn nlos_gain(link: &LinkGeometry, r1_m: f64, r2_m: f64) -> Result<Complex64> {
    let travelled = r1_m + r2_m;
    if travelled < link.distance_m {
        return Err(Error::Domain(format!(
            "reflected path length {travelled} m is shorter than the direct distance {} m",
            link.distance_m
        )));
    }
    let f = link.carrier_freq_hz;
    let delay = link.los_delay_s() + (travelled - link.distance_m) / SPEED_OF_LIGHT;
    let magnitude = SPEED_OF_LIGHT * link.reflection_coeff / (4.0 * PI * f * travelled)
        * (-0.5 * link.absorption_coeff_per_m * travelled).exp();
    Ok(Complex64::from_polar(magnitude, -2.0 * PI * f * delay))
}

fn nlos_delay(link: &LinkGeometry, travelled: f64) -> f64 {
    link.los_delay_s() + (travelled - link.distance_m) / SPEED_OF_LIGHT
}

/// Sum of path outer products, weighted `sqrt(Nt·Nr)` for LoS and
/// `sqrt(Nt·Nr/L)` for each of the `L` reflected paths.
pub fn assemble_channel(rx: &ArrayGeometry, tx: &ArrayGeometry, wavelength_m: f64, paths: &[PathParams]) -> CMatrix {
    let n_rx = rx.len();
    let n_tx = tx.len();
    let n_nlos = paths.iter().filter(|p| p.kind == PathKind::Nlos).count();
    let full = ((n_rx * n_tx) as f64).sqrt();
    let per_nlos = if n_nlos > 0 { full / (n_nlos as f64).sqrt() } else { 0.0 };
    let mut h = CMatrix::zeros(n_rx, n_tx);
    for path in paths {
        let weight = match path.kind {
            PathKind::Los => full,
            PathKind::Nlos => per_nlos,
        };
        let a_rx = upa_response(rx, path.aoa_azimuth_rad, path.aoa_elevation_rad, wavelength_m);
        let a_tx = upa_response(tx, path.aod_azimuth_rad, path.aod_elevation_rad, wavelength_m);
        let g = path.complex_gain * weight;
        h.ger(g, &a_rx, &a_tx.conjugate(), Complex64::new(1.0, 0.0));
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hop {
    BsRis,
    RisMs,
    BsMsDirect,
}

impl Hop {
    pub fn tag(self) -> &'static str {
        match self {
            Hop::BsRis => "bs_ris",
            Hop::RisMs => "ris_ms",
            Hop::BsMsDirect => "bs_ms_direct",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "bs_ris" => Some(Hop::BsRis),
            "ris_ms" => Some(Hop::RisMs),
            "bs_ms_direct" => Some(Hop::BsMsDirect),
            _ => None,
        }
    }

    /// Small integer folded into per-hop RNG seeds.
    pub fn seed_tag(self) -> u64 {
        match self {
            Hop::BsRis => 1,
            Hop::RisMs => 2,
            Hop::BsMsDirect => 3,
        }
    }
}

/// How hop matrices are scaled before they reach the beamforming layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainNormalization {
    /// Divide each hop by the magnitude of its own line-of-sight gain
    /// (blocked or not), so SNR is quoted relative to the LoS link budget.
    #[default]
    LosReference,
    /// Use the physical gains as they are.
    None,
}

/// Everything needed to draw channels for one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub n_bs: usize,
    pub n_ris: usize,
    pub n_ms: usize,
    pub carrier_freq_hz: f64,
    pub bs_ris_m: f64,
    pub ris_ms_m: f64,
    pub bs_ms_m: f64,
    pub kappa_per_m: f64,
    pub xi: f64,
    pub n_nlos: usize,
    pub n_nlos_direct: usize,
    pub ris_spacing_m: f64,
    pub nlos_excess_range_m: (f64, f64),
    pub nlos_split_range: (f64, f64),
    pub azimuth_range_rad: (f64, f64),
    pub elevation_range_rad: (f64, f64),
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            n_bs: 64,
            n_ris: 64,
            n_ms: 16,
            carrier_freq_hz: 1.6e12,
            bs_ris_m: 10.0,
            ris_ms_m: 20.0,
            bs_ms_m: 25.0,
            kappa_per_m: 0.2,
            xi: 1e-6,
            n_nlos: 2,
            n_nlos_direct: 3,
            ris_spacing_m: 70e-6,
            nlos_excess_range_m: (1.0, 10.0),
            nlos_split_range: (0.3, 0.7),
            azimuth_range_rad: (0.0, 2.0 * PI),
            elevation_range_rad: (0.0, PI),
        }
    }
}

impl ChannelModel {
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    pub fn link(&self, hop: Hop) -> LinkGeometry {
        let (distance_m, n_nlos_paths) = match hop {
            Hop::BsRis => (self.bs_ris_m, self.n_nlos),
            Hop::RisMs => (self.ris_ms_m, self.n_nlos),
            Hop::BsMsDirect => (self.bs_ms_m, self.n_nlos_direct),
        };
        LinkGeometry {
            carrier_freq_hz: self.carrier_freq_hz,
            distance_m,
            absorption_coeff_per_m: self.kappa_per_m,
            reflection_coeff: self.xi,
            n_nlos_paths,
            nlos_excess_range_m: self.nlos_excess_range_m,
        }
    }

    /// Receive and transmit arrays of a hop.
    pub fn arrays(&self, hop: Hop) -> Result<(ArrayGeometry, ArrayGeometry)> {
        let lambda = self.wavelength_m();
        let bs = ArrayGeometry::half_wavelength(ArrayRole::Bs, self.n_bs, lambda)?;
        let ms = ArrayGeometry::half_wavelength(ArrayRole::Ms, self.n_ms, lambda)?;
        let ris = ArrayGeometry::planar(ArrayRole::Ris, self.n_ris, self.ris_spacing_m)?;
        Ok(match hop {
            Hop::BsRis => (ris, bs),
            Hop::RisMs => (ms, ris),
            Hop::BsMsDirect => (ms, bs),
        })
    }
}

/// One sampled hop with enough metadata to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct HopChannel {
    pub hop: Hop,
    pub matrix: CMatrix,
    pub paths: Vec<PathParams>,
    pub rx: ArrayGeometry,
    pub tx: ArrayGeometry,
    pub link: LinkGeometry,
}

impl HopChannel {
    /// Rebuilds the hop matrix from its path list.
    pub fn reconstruct(&self) -> CMatrix {
        assemble_channel(&self.rx, &self.tx, self.link.wavelength_m(), &self.paths)
    }

    /// Magnitude of the hop's LoS gain, used as the normalisation reference.
    pub fn reference_gain(&self) -> f64 {
        los_gain(&self.link).norm()
    }

    pub fn scaled_matrix(&self, mode: GainNormalization) -> CMatrix {
        match mode {
            GainNormalization::None => self.matrix.clone(),
            GainNormalization::LosReference => {
                let g = self.reference_gain();
                self.matrix.map(|z| z / g)
            }
        }
    }
}

fn draw(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws one hop. The stream is consumed in a fixed order: LoS angles
/// (AoA az, AoA el, AoD az, AoD el) when the LoS path exists, then per
/// reflected path its four angles followed by the split fraction and the
/// excess length.
pub fn sample_channel(model: &ChannelModel, hop: Hop, rng: &mut impl Rng) -> Result<HopChannel> {
    let link = model.link(hop);
    link.validate()?;
    let (rx, tx) = model.arrays(hop)?;
    let mut paths = Vec::with_capacity(link.n_nlos_paths + 1);
    let angles = |rng: &mut _| {
        [
            draw(rng, model.azimuth_range_rad),
            draw(rng, model.elevation_range_rad),
            draw(rng, model.azimuth_range_rad),
            draw(rng, model.elevation_range_rad),
        ]
    };
    if hop != Hop::BsMsDirect {
        let [aoa_az, aoa_el, aod_az, aod_el] = angles(rng);
        paths.push(PathParams {
            kind: PathKind::Los,
            aoa_azimuth_rad: aoa_az,
            aoa_elevation_rad: aoa_el,
            aod_azimuth_rad: aod_az,
            aod_elevation_rad: aod_el,
            complex_gain: los_gain(&link),
            delay_s: link.los_delay_s(),
        });
    }
    for _ in 0..link.n_nlos_paths {
        let [aoa_az, aoa_el, aod_az, aod_el] = angles(rng);
        let split = draw(rng, model.nlos_split_range);
        let excess = draw(rng, link.nlos_excess_range_m);
        let r1 = link.distance_m * split;
        let r2 = link.distance_m * (1.0 - split) + excess;
        paths.push(PathParams {
            kind: PathKind::Nlos,
            aoa_azimuth_rad: aoa_az,
            aoa_elevation_rad: aoa_el,
            aod_azimuth_rad: aod_az,
            aod_elevation_rad: aod_el,
            complex_gain: nlos_gain(&link, r1, r2)?,
            delay_s: nlos_delay(&link, r1 + r2),
        });
    }
    let matrix = assemble_channel(&rx, &tx, link.wavelength_m(), &paths);
    Ok(HopChannel {
        hop,
        matrix,
        paths,
        rx,
        tx,
        link,
    })
}

/// Both RIS hops (and optionally the blocked direct hop) of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub seed: u64,
    pub h1: HopChannel,
    pub h2: HopChannel,
    pub direct: Option<HopChannel>,
}

/// Dumped channel realization, replayable without the RNG.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDump {
    pub seed: u64,
    pub realization: u64,
    pub hops: Vec<HopChannel>,
}

const DUMP_MAGIC: &str = "ris-thz-channel-dump 1";

fn kind_tag(kind: PathKind) -> &'static str {
    match kind {
        PathKind::Los => "los",
        PathKind::Nlos => "nlos",
    }
}

/// Renders a dump. Floats use shortest round-trip formatting, so parsing the
/// text back reproduces every path parameter bit-for-bit.
pub fn format_dump(dump: &ChannelDump) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{DUMP_MAGIC}");
    let _ = writeln!(s, "seed {}", dump.seed);
    let _ = writeln!(s, "realization {}", dump.realization);
    for h in &dump.hops {
        let l = &h.link;
        let _ = writeln!(s, "hop {}", h.hop.tag());
        let _ = writeln!(
            s,
            "link {:e} {:e} {:e} {:e} {:e} {:e}",
            l.carrier_freq_hz,
            l.distance_m,
            l.absorption_coeff_per_m,
            l.reflection_coeff,
            l.nlos_excess_range_m.0,
            l.nlos_excess_range_m.1
        );
        for (label, a) in [("rx", &h.rx), ("tx", &h.tx)] {
            let _ = writeln!(s, "{label} {} {} {} {:e}", a.role.tag(), a.n_x, a.n_y, a.element_spacing_m);
        }
        let _ = writeln!(s, "paths {}", h.paths.len());
        for p in &h.paths {
            let _ = writeln!(
                s,
                "{} {:e} {:e} {:e} {:e} {:e} {:e} {:e}",
                kind_tag(p.kind),
                p.aoa_azimuth_rad,
                p.aoa_elevation_rad,
                p.aod_azimuth_rad,
                p.aod_elevation_rad,
                p.complex_gain.re,
                p.complex_gain.im,
                p.delay_s
            );
        }
        let _ = writeln!(s, "end");
    }
    s
}

pub fn write_dump(path: &Path, dump: &ChannelDump) -> Result<()> {
    std::fs::write(path, format_dump(dump)).map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<ChannelDump> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dump(&text).map_err(|msg| Error::Parse {
        path: path.to_path_buf(),
        msg,
    })
}

pub fn parse_dump(text: &str) -> std::result::Result<ChannelDump, String> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut next = |what: &str| lines.next().ok_or_else(|| format!("unexpected end of dump, expected {what}"));

    let (n, magic) = next("header")?;
    if magic != DUMP_MAGIC {
        return Err(format!("line {n}: not a channel dump (header `{magic}`)"));
    }
    let seed = keyed(next("seed")?, "seed")?;
    let realization = keyed(next("realization")?, "realization")?;

    let mut hops = Vec::new();
    loop {
        let (n, line) = match next("hop") {
            Ok(v) => v,
            Err(_) => break,
        };
        let hop_tag = line
            .strip_prefix("hop ")
            .ok_or_else(|| format!("line {n}: expected `hop <name>`"))?;
        let hop = Hop::from_tag(hop_tag.trim()).ok_or_else(|| format!("line {n}: unknown hop `{hop_tag}`"))?;

        let (n, line) = next("link")?;
        let v = floats(line, "link", 6).map_err(|e| format!("line {n}: {e}"))?;
        let mut link = LinkGeometry {
            carrier_freq_hz: v[0],
            distance_m: v[1],
            absorption_coeff_per_m: v[2],
            reflection_coeff: v[3],
            n_nlos_paths: 0,
            nlos_excess_range_m: (v[4], v[5]),
        };

        let mut arrays = Vec::with_capacity(2);
        for label in ["rx", "tx"] {
            let (n, line) = next(label)?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 || f[0] != label {
                return Err(format!("line {n}: expected `{label} <role> <n_x> <n_y> <spacing>`"));
            }
            let role = ArrayRole::from_tag(f[1]).ok_or_else(|| format!("line {n}: unknown role `{}`", f[1]))?;
            let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| format!("line {n}: {e}"));
            arrays.push(ArrayGeometry {
                role,
                n_x: parse_usize(f[2])?,
                n_y: parse_usize(f[3])?,
                element_spacing_m: f[4].parse().map_err(|e| format!("line {n}: {e}"))?,
            });
        }

        let count: usize = keyed(next("paths")?, "paths")?;
        let mut paths = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next("path row")?;
            let (kind, rest) = line.split_once(' ').ok_or_else(|| format!("line {n}: malformed path row"))?;
            let kind = match kind {
                "los" => PathKind::Los,
                "nlos" => PathKind::Nlos,
                other => return Err(format!("line {n}: unknown path kind `{other}`")),
            };
            let v: Vec<f64> = rest
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("line {n}: {e}")))
                .collect::<std::result::Result<_, _>>()?;
            if v.len() != 7 {
                return Err(format!("line {n}: path row needs 7 numbers, got {}", v.len()));
            }
            paths.push(PathParams {
                kind,
                aoa_azimuth_rad: v[0],
                aoa_elevation_rad: v[1],
                aod_azimuth_rad: v[2],
                aod_elevation_rad: v[3],
                complex_gain: Complex64::new(v[4], v[5]),
                delay_s: v[6],
            });
        }
        let (n, line) = next("end")?;
        if line != "end" {
            return Err(format!("line {n}: expected `end`"));
        }
        link.n_nlos_paths = paths.iter().filter(|p| p.kind == PathKind::Nlos).count();
        let (rx, tx) = (arrays[0], arrays[1]);
        let matrix = assemble_channel(&rx, &tx, link.wavelength_m(), &paths);
        hops.push(HopChannel {
            hop,
            matrix,
            paths,
            rx,
            tx,
            link,
        });
    }
    Ok(ChannelDump {
        seed,
        realization,
        hops,
    })
}

fn keyed<T: std::str::FromStr>((n, line): (usize, &str), key: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    let value = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| format!("line {n}: expected `{key} <value>`"))?;
    value.trim().parse().map_err(|e| format!("line {n}: {e}"))
}

fn floats(line: &str, key: &str, count: usize) -> std::result::Result<Vec<f64>, String> {
    let rest = line
        .strip_prefix(key)
        .ok_or_else(|| format!("expected `{key}` row"))?;
    let v: Vec<f64> = rest
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != count {
        return Err(format!("`{key}` row needs {count} numbers, got {}", v.len()));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rank(m: &CMatrix, tol: f64) -> usize {
        let sv = m.clone().singular_values();
        let max = sv.iter().cloned().fold(0.0, f64::max);
        sv.iter().filter(|&&s| s > tol * max).count()
    }

    #[test]
    fn planar_factorisation() {
        let g = ArrayGeometry::planar(ArrayRole::Bs, 512, 1.0).unwrap();
        assert_eq!((g.n_x, g.n_y), (16, 32));
        let g = ArrayGeometry::planar(ArrayRole::Ms, 32, 1.0).unwrap();
        assert_eq!((g.n_x, g.n_y), (4, 8));
        let g = ArrayGeometry::planar(ArrayRole::Ris, 7, 1.0).unwrap();
        assert_eq!((g.n_x, g.n_y), (1, 7));
        assert!(ArrayGeometry::planar(ArrayRole::Ris, 0, 1.0).is_err());
    }

    #[test]
    fn broadside_response_is_flat() {
        let g = ArrayGeometry::planar(ArrayRole::Bs, 16, 0.5).unwrap();
        let a = upa_response(&g, PI / 2.0, PI / 2.0, 1.0);
        for z in a.iter() {
            assert!((z - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn zenith_response_alternates_along_q() {
        let g = ArrayGeometry::planar(ArrayRole::Bs, 12, 0.5).unwrap();
        let a = upa_response(&g, 0.3, 0.0, 1.0);
        let s = 1.0 / 12f64.sqrt();
        for p in 0..g.n_x {
            for q in 0..g.n_y {
                let want = Complex64::from_polar(s, PI * q as f64);
                assert!((a[p * g.n_y + q] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn upa_matches_reference_entries() {
        // mpmath reference for a 4×4 half-wavelength array, az = 0.7, el = 1.1
        let g = ArrayGeometry::planar(ArrayRole::Bs, 16, 0.5).unwrap();
        let a = upa_response(&g, 0.7, 1.1, 1.0);
        let cases = [
            ((0, 0), (0.25, 0.0)),
            ((1, 2), (0.068_861_276_403_986_94, -0.240_329_200_498_012_13)),
            ((3, 3), (-0.072_993_951_234_783_02, -0.239_106_426_269_002_9)),
            ((2, 1), (0.209_751_198_429_475_25, -0.136_031_006_602_902_48)),
        ];
        for ((p, q), (re, im)) in cases {
            let z = a[p * 4 + q];
            assert!((z.re - re).abs() < 1e-14 && (z.im - im).abs() < 1e-14, "({p},{q}) {z}");
        }
    }

    fn link(f: f64, r: f64, kappa: f64, xi: f64) -> LinkGeometry {
        LinkGeometry {
            carrier_freq_hz: f,
            distance_m: r,
            absorption_coeff_per_m: kappa,
            reflection_coeff: xi,
            n_nlos_paths: 2,
            nlos_excess_range_m: (1.0, 10.0),
        }
    }

    #[test]
    fn los_gain_free_space_and_scaling() {
        let g = los_gain(&link(1.6e12, 25.0, 0.0, 1e-6));
        assert!((g.norm() - SPEED_OF_LIGHT / (4.0 * PI * 1.6e12 * 25.0)).abs() < 1e-22);
        let g2 = los_gain(&link(1.6e12, 50.0, 0.0, 1e-6));
        assert!((g.norm() / g2.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn los_gain_matches_reference() {
        // mpmath: f = 1.6 THz, r0 = 25 m, κ = 0.2
        let g = los_gain(&link(1.6e12, 25.0, 0.2, 1e-6));
        assert!((g.norm() - 4.895_698_260_376_382e-8).abs() < 1e-12 * 4.9e-8);
        assert!((g.re - -3.165_931_434_919_912e-8).abs() < 1e-9 * 4.9e-8);
        assert!((g.im - 3.734_265_604_645_482e-8).abs() < 1e-9 * 4.9e-8);
    }

    #[test]
    fn nlos_gain_cases() {
        let l = link(1.6e12, 10.0, 0.2, 0.0);
        assert_eq!(nlos_gain(&l, 6.0, 7.0).unwrap().norm(), 0.0);

        let l = link(1.6e12, 10.0, 0.2, 1e-6);
        let g = nlos_gain(&l, 4.0, 6.0).unwrap();
        let g0 = los_gain(&l);
        assert!((g.norm() - 1e-6 * g0.norm()).abs() < 1e-12 * g.norm());
        assert!((g - g0 * 1e-6).norm() < 1e-12 * g.norm());

        // mpmath: r1 = 6, r2 = 7, r = 10, κ = 0.2, ξ = 1e-6
        let g = nlos_gain(&l, 6.0, 7.0).unwrap();
        let scale = 3.125_825_123_631_215e-13;
        assert!((g.norm() - scale).abs() < 1e-12 * scale);
        assert!((g.re - -1.536_780_972_663_313e-13).abs() < 1e-9 * scale);
        assert!((g.im - -2.721_963_803_137_421e-13).abs() < 1e-9 * scale);

        assert!(matches!(nlos_gain(&l, 3.0, 4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn los_only_channel_is_rank_one_with_known_norm() {
        let model = ChannelModel {
            n_bs: 16,
            n_ris: 9,
            n_ms: 4,
            n_nlos: 0,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hc = sample_channel(&model, Hop::BsRis, &mut rng).unwrap();
        assert_eq!(hc.paths.len(), 1);
        assert_eq!(rank(&hc.matrix, 1e-10), 1);
        let expected = 16.0 * 9.0 * hc.paths[0].complex_gain.norm_sqr();
        let fro = hc.matrix.norm_squared();
        assert!((fro - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn sampled_dimensions_and_rank_bound() {
        let model = ChannelModel {
            n_bs: 16,
            n_ris: 12,
            n_ms: 8,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h1 = sample_channel(&model, Hop::BsRis, &mut rng).unwrap();
        let h2 = sample_channel(&model, Hop::RisMs, &mut rng).unwrap();
        let hd = sample_channel(&model, Hop::BsMsDirect, &mut rng).unwrap();
        assert_eq!(h1.matrix.shape(), (12, 16));
        assert_eq!(h2.matrix.shape(), (8, 12));
        assert_eq!(hd.matrix.shape(), (8, 16));
        assert!(hd.paths.iter().all(|p| p.kind == PathKind::Nlos));
        assert_eq!(hd.paths.len(), 3);
        for h in [&h1, &h2, &hd] {
            assert!(rank(&h.matrix, 1e-13) <= 1 + 3);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let model = ChannelModel::default();
        let a = sample_channel(&model, Hop::RisMs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_channel(&model, Hop::RisMs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn reflected_paths_keep_geometry_constraints() {
        let model = ChannelModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let h = sample_channel(&model, Hop::BsRis, &mut rng).unwrap();
            let los_delay = h.link.los_delay_s();
            for p in &h.paths {
                assert!((0.0..2.0 * PI).contains(&p.aoa_azimuth_rad));
                assert!((0.0..=PI).contains(&p.aoa_elevation_rad));
                if p.kind == PathKind::Nlos {
                    assert!(p.delay_s > los_delay);
                    assert!(p.complex_gain.norm() < h.paths[0].complex_gain.norm());
                }
            }
        }
    }

    #[test]
    fn reference_normalisation_gives_unit_los_gain() {
        let model = ChannelModel {
            n_bs: 4,
            n_ris: 4,
            n_ms: 4,
            n_nlos: 0,
            ..Default::default()
        };
        let hc = sample_channel(&model, Hop::BsRis, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let m = hc.scaled_matrix(GainNormalization::LosReference);
        assert!((m.norm_squared() - 16.0).abs() < 1e-10);
        assert_eq!(hc.scaled_matrix(GainNormalization::None), hc.matrix);
    }

    #[test]
    fn dump_round_trip_is_exact() {
        let model = ChannelModel {
            n_bs: 8,
            n_ris: 6,
            n_ms: 4,
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let hops = vec![
            sample_channel(&model, Hop::BsRis, &mut rng).unwrap(),
            sample_channel(&model, Hop::RisMs, &mut rng).unwrap(),
            sample_channel(&model, Hop::BsMsDirect, &mut rng).unwrap(),
        ];
        let dump = ChannelDump {
            seed: 77,
            realization: 4,
            hops,
        };
        let parsed = parse_dump(&format_dump(&dump)).unwrap();
        assert_eq!(parsed.seed, 77);
        assert_eq!(parsed.realization, 4);
        for (a, b) in dump.hops.iter().zip(&parsed.hops) {
            assert_eq!(a.paths, b.paths);
            assert_eq!(a.rx, b.rx);
            assert_eq!(a.matrix, b.matrix);
        }
    }

    #[test]
    fn dump_parser_reports_line_numbers() {
        let err = parse_dump("ris-thz-channel-dump 1\nseed x\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(parse_dump("garbage").is_err());
    }
}
