//! Star-shaped register: electron two-level system plus N nuclear spins,
//! and the rotating-frame drive Hamiltonians.
//!
//! Basis ordering: the electron is the most significant factor with
//! |↓⟩ at index 0, followed by the nuclei (nucleus 0 most significant).

use std::f64::consts::{PI, SQRT_2};

use nvq_core::matcore::{identity, C64, CMat, ZERO};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectronKind {
    /// Spin-1 NV centre restricted to m_s ∈ {0, −1}.
    Nv,
    /// Spin-1/2 group-IV colour centre.
    GroupIv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nucleus {
    pub label: String,
    /// rad/s/T
    pub gamma: f64,
    /// Half the parallel hyperfine splitting A_zz/2, rad/s.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    /// Zero-field splitting, rad/s.
    pub d: f64,
    /// Electron gyromagnetic ratio, rad/s/T.
    pub gamma_nv: f64,
    /// Static field, T.
    pub b0: f64,
    pub nuclei: Vec<Nucleus>,
    pub electron_kind: ElectronKind,
}

pub const DEFAULT_B0: f64 = 0.5;

impl SpinSystem {
    /// Parameter set of the NV register (¹⁵N, ¹³C₁, ¹³C₂).
    pub fn nv_default(b0: f64) -> Self {
        let mhz = TWO_PI * 1e6;
        let c13 = TWO_PI * 10.708e6;
        SpinSystem {
            d: TWO_PI * 2.87e9,
            gamma_nv: TWO_PI * 28.024e9,
            b0,
            nuclei: vec![
                Nucleus { label: "15N".into(), gamma: -TWO_PI * 4.32e6, beta: 1.515 * mhz },
                Nucleus { label: "13C1".into(), gamma: c13, beta: 0.49 * mhz },
                Nucleus { label: "13C2".into(), gamma: c13, beta: 0.206 * mhz },
            ],
            electron_kind: ElectronKind::Nv,
        }
    }

    /// Placeholder spin-1/2 register (no zero-field term); values are
    /// illustrative, meant to be replaced by a parameter file.
    pub fn group4_template(b0: f64) -> Self {
        let mhz = TWO_PI * 1e6;
        let c13 = TWO_PI * 10.708e6;
        SpinSystem {
            d: 0.0,
            gamma_nv: TWO_PI * 28.024e9,
            b0,
            nuclei: vec![
                Nucleus { label: "13C_a".into(), gamma: c13, beta: 0.7 * mhz },
                Nucleus { label: "13C_b".into(), gamma: c13, beta: 0.3 * mhz },
            ],
            electron_kind: ElectronKind::GroupIv,
        }
    }

    /// Sub-register keeping only the listed nuclei, in the given order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let mut s = self.clone();
        s.nuclei = idx
            .iter()
            .map(|&i| {
                self.nuclei
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("no nucleus {i}")))
            })
            .collect::<Result<_>>()?;
        Ok(s)
    }

    /// First `n` nuclei.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        self.select(&(0..n).collect::<Vec<_>>())
    }

    pub fn n(&self) -> usize {
        self.nuclei.len()
    }

    /// Number of nuclear basis levels 2^N.
    pub fn levels(&self) -> usize {
        1 << self.n()
    }

    /// Full dimension 2^{N+1}.
    pub fn dim(&self) -> usize {
        2 << self.n()
    }

    /// Bare electron transition ω_el = D − γ_NV B0.
    pub fn omega_el(&self) -> f64 {
        self.d - self.gamma_nv * self.b0
    }

    /// Nuclear transition frequency with the electron in |↓⟩.
    pub fn nuclear_frequency(&self, i: usize) -> f64 {
        let nu = &self.nuclei[i];
        match self.electron_kind {
            ElectronKind::Nv => nu.gamma * self.b0 + 2.0 * nu.beta,
            ElectronKind::GroupIv => nu.gamma * self.b0 + nu.beta,
        }
    }

    /// Electron drive coupling (prefactor of B₁ in H_NV).
    pub fn drive_coupling(&self) -> f64 {
        match self.electron_kind {
            ElectronKind::Nv => self.gamma_nv / SQRT_2,
            ElectronKind::GroupIv => self.gamma_nv / 2.0,
        }
    }

    fn parity(&self, bit: usize) -> f64 {
        let f = if bit == 1 { 1.0 } else { -1.0 };
        match self.electron_kind {
            ElectronKind::Nv => f,
            ElectronKind::GroupIv => 0.5 * f,
        }
    }

    /// ω̃_l = Σ_j F(s_lj) β_j for the 0-based level index `l`
    /// (nucleus 0 is the most significant bit).
    pub fn level_frequency(&self, l: usize) -> Result<f64> {
        if l >= self.levels() {
            return invalid(format!("level {l} out of range for {} nuclei", self.n()));
        }
        let n = self.n();
        Ok(self
            .nuclei
            .iter()
            .enumerate()
            .map(|(j, nu)| self.parity((l >> (n - 1 - j)) & 1) * nu.beta)
            .sum())
    }

    pub fn level_frequencies(&self) -> Vec<f64> {
        (0..self.levels()).map(|l| self.level_frequency(l).expect("in range")).collect()
    }

    /// Regime checks that strain the secular/RWA approximations.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = vec![];
        for nu in &self.nuclei {
            let larmor = (nu.gamma * self.b0).abs();
            if larmor == 0.0 || nu.beta.abs() / larmor > 0.1 {
                w.push(format!(
                    "{}: β/|γB0| = {:.3} exceeds 0.1; the ZZ-coupling approximation is strained",
                    nu.label,
                    nu.beta.abs() / larmor
                ));
            }
        }
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                let sep = (self.nuclear_frequency(i) - self.nuclear_frequency(j)).abs();
                if sep < TWO_PI * 1e3 {
                    w.push(format!(
                        "{} and {} transition frequencies are {:.1} Hz apart",
                        self.nuclei[i].label,
                        self.nuclei[j].label,
                        sep / TWO_PI
                    ));
                }
            }
        }
        if self.omega_el().abs() < TWO_PI * 50e6 {
            w.push(format!("ω_el = 2π·{:.3} MHz is small", self.omega_el() / TWO_PI / 1e6));
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [self.d, self.gamma_nv, self.b0];
        if vals.iter().any(|v| !v.is_finite())
            || self.nuclei.iter().any(|n| !n.gamma.is_finite() || !n.beta.is_finite())
        {
            return invalid("spin system contains non-finite rates");
        }
        if self.n() > 6 {
            return invalid("at most 6 register nuclei are supported");
        }
        Ok(())
    }

    /// Bundled preset by name (`table2-nv`, `group4-template`), otherwise a
    /// path to a parameter file.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "table2-nv" => Self::from_preset_json(include_str!("../presets/table2-nv.json")),
            "group4-template" => Self::from_preset_json(include_str!("../presets/group4-template.json")),
            path => {
                let s = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("preset '{path}': {e}")))?;
                Self::from_preset_json(&s)
            }
        }
    }

    /// Loads a unit-annotated parameter file.
    pub fn from_preset_json(s: &str) -> Result<Self> {
        let p: PresetFile = serde_json::from_str(s)?;
        p.into_system()
    }

    pub fn to_preset_json(&self) -> String {
        let hz = |v: f64| Quantity { value: v / TWO_PI, unit: "Hz".into() };
        let p = PresetFile {
            name: None,
            electron_kind: self.electron_kind,
            d: hz(self.d),
            gamma_nv: Quantity { value: self.gamma_nv / TWO_PI, unit: "Hz/T".into() },
            b0: Quantity { value: self.b0, unit: "T".into() },
            nuclei: self
                .nuclei
                .iter()
                .map(|n| PresetNucleus {
                    label: n.label.clone(),
                    gamma: Quantity { value: n.gamma / TWO_PI, unit: "Hz/T".into() },
                    beta: hz(n.beta),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&p).expect("preset serializes")
    }
}

/// A numeric value with a mandatory unit. Frequencies are quoted as
/// cycles (Hz-style) and converted with the 2π factor; "rad/s" is taken as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Copy)]
enum Dim {
    Freq,
    Gyro,
    Field,
}

impl Quantity {
    fn si(&self, dim: Dim) -> Result<f64> {
        let u = self.unit.trim();
        let freq_scale = |u: &str| -> Option<f64> {
            Some(match u {
                "Hz" => TWO_PI,
                "kHz" => TWO_PI * 1e3,
                "MHz" => TWO_PI * 1e6,
                "GHz" => TWO_PI * 1e9,
                "rad/s" => 1.0,
                _ => return None,
            })
        };
        let scale = match dim {
            Dim::Freq => freq_scale(u),
            Dim::Gyro => u.strip_suffix("/T").and_then(freq_scale),
            Dim::Field => match u {
                "T" => Some(1.0),
                "mT" => Some(1e-3),
                "G" => Some(1e-4),
                _ => None,
            },
        };
        match scale {
            Some(s) => Ok(self.value * s),
            None => invalid(format!("unit '{}' not valid for {:?}", self.unit, dim)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PresetNucleus {
    label: String,
    gamma: Quantity,
    beta: Quantity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PresetFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    electron_kind: ElectronKind,
    #[serde(rename = "D")]
    d: Quantity,
    gamma_nv: Quantity,
    #[serde(rename = "B0")]
    b0: Quantity,
    nuclei: Vec<PresetNucleus>,
}

impl PresetFile {
    fn into_system(self) -> Result<SpinSystem> {
        // The parameter table quotes D in "GHz/T"; it is a splitting, so the
        // "/T" is dropped on ingestion.
        let d = if self.d.unit.ends_with("/T") {
            log::warn!("D quoted in '{}'; treating it as a frequency", self.d.unit);
            Quantity { value: self.d.value, unit: self.d.unit.trim_end_matches("/T").into() }
        } else {
            self.d
        };
        let sys = SpinSystem {
            d: d.si(Dim::Freq)?,
            gamma_nv: self.gamma_nv.si(Dim::Gyro)?,
            b0: self.b0.si(Dim::Field)?,
            nuclei: self
                .nuclei
                .into_iter()
                .map(|n| {
                    Ok(Nucleus { label: n.label, gamma: n.gamma.si(Dim::Gyro)?, beta: n.beta.si(Dim::Freq)? })
                })
                .collect::<Result<_>>()?,
            electron_kind: self.electron_kind,
        };
        sys.validate()?;
        Ok(sys)
    }
}

/// Sampled control field B₁(t) = B̃(t)·cos(carrier·(t0 + t) + phase), with
/// `t` local to the pulse and `t0` its start in the rotating frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveField {
    /// rad/s
    pub carrier: f64,
    /// B̃ sampled per step, T.
    pub envelope: Vec<f64>,
    /// rad
    pub phase: f64,
    /// Sample step, s.
    pub tau: f64,
    /// Start time in the rotating frame, s.
    #[serde(default)]
    pub t0: f64,
}

impl DriveField {
    pub fn zero(tau: f64) -> Self {
        DriveField { carrier: 0.0, envelope: vec![], phase: 0.0, tau, t0: 0.0 }
    }

    pub fn duration(&self) -> f64 {
        self.envelope.len() as f64 * self.tau
    }

    pub fn steps(&self) -> usize {
        self.envelope.len()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let d = self.duration();
        if !(t >= 0.0 && t <= d + 1e-15) {
            return invalid(format!("t = {t:e} s outside the pulse [0, {d:e}]"));
        }
        Ok(())
    }

    pub fn envelope_at(&self, t: f64) -> f64 {
        if self.envelope.is_empty() {
            return 0.0;
        }
        let k = ((t / self.tau).floor().max(0.0) as usize).min(self.envelope.len() - 1);
        self.envelope[k]
    }

    pub fn b1(&self, t: f64) -> f64 {
        self.envelope_at(t) * (self.carrier * (self.t0 + t) + self.phase).cos()
    }

    /// Same drive, moved to start at frame time `t0`. The carrier phase
    /// stays referenced to absolute time, which keeps the rotating-frame
    /// action of a resonant pulse unchanged.
    pub fn shifted_to(&self, t0: f64) -> Self {
        DriveField { t0, ..self.clone() }
    }
}

fn nuclear_op(sys: &SpinSystem, j: usize, op: [[C64; 2]; 2]) -> CMat {
    let n = sys.n();
    let d = sys.levels();
    let shift = n - 1 - j;
    CMat::from_fn(d, d, |r, c| {
        if (r ^ c) & !(1 << shift) != 0 {
            ZERO
        } else {
            op[(r >> shift) & 1][(c >> shift) & 1]
        }
    })
}

fn electron_embed(e: [[C64; 2]; 2], nuc: &CMat) -> CMat {
    let d = nuc.nrows();
    CMat::from_fn(2 * d, 2 * d, |r, c| e[r / d][c / d] * nuc[(r % d, c % d)])
}

/// −Σ_i [I_x cos ω_i t + I_y sin ω_i t]·γ_i B₁(t), identity on the electron.
pub fn h_sq(sys: &SpinSystem, t: f64, field: &DriveField) -> Result<CMat> {
    field.check_time(t)?;
    let b1 = field.b1(t);
    let tt = field.t0 + t;
    let d = sys.levels();
    let mut h = CMat::zeros(d, d);
    for j in 0..sys.n() {
        let (s, c) = (sys.nuclear_frequency(j) * tt).sin_cos();
        let a = -sys.nuclei[j].gamma * b1 / 2.0;
        // (I_x cos + I_y sin) = ½ [[0, e^{-iωt}], [e^{iωt}, 0]]
        let op = [[ZERO, C64::new(c, -s) * a], [C64::new(c, s) * a, ZERO]];
        h += nuclear_op(sys, j, op);
    }
    let one = C64::new(1.0, 0.0);
    Ok(electron_embed([[one, ZERO], [ZERO, one]], &h))
}

/// Electron block of level `l`: k·[cos(θ)σ_x − sin(θ)σ_y] as a 2×2 array.
fn level_block(k: f64, theta: f64) -> [[C64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    // cos σx − sin σy = [[0, c + i s], [c − i s, 0]]
    [[ZERO, C64::new(k * c, k * s)], [C64::new(k * c, -k * s), ZERO]]
}

fn level_sum(sys: &SpinSystem, block: impl Fn(f64) -> [[C64; 2]; 2]) -> CMat {
    let d = sys.levels();
    let freqs = sys.level_frequencies();
    let mut h = CMat::zeros(2 * d, 2 * d);
    for (l, w) in freqs.iter().enumerate() {
        let b = block(*w);
        for e in 0..2 {
            for f in 0..2 {
                h[(e * d + l, f * d + l)] = b[e][f];
            }
        }
    }
    h
}

/// Full microwave drive coupling through σ on the electron per level.
pub fn h_nv(sys: &SpinSystem, t: f64, field: &DriveField) -> Result<CMat> {
    field.check_time(t)?;
    let k = sys.drive_coupling() * field.b1(t);
    let tt = field.t0 + t;
    let wel = sys.omega_el();
    Ok(level_sum(sys, |w| level_block(k, (wel + w) * tt)))
}

/// Co-rotating part of `h_nv` for a drive B̃(t)·cos(ω_el t).
pub fn h_nv_rwa(sys: &SpinSystem, t: f64, envelope: f64) -> CMat {
    let k = sys.drive_coupling() * envelope / 2.0;
    level_sum(sys, |w| level_block(k, w * t))
}

/// Dense 2^{N+1} identity, handy for callers building propagators.
pub fn full_identity(sys: &SpinSystem) -> CMat {
    identity(sys.dim())
}
