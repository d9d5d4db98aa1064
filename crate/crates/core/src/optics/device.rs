//! Linear-optical devices and their quantized wave-plate angles.
//!
//! Wave-plate angles are exact rational multiples of pi, reduced modulo pi,
//! so setups can be compared, hashed, and round-tripped through text and
//! JSON without floating-point drift.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Photon polarization. `V` encodes logical |0>, `H` logical |1>.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pol {
    V = 0,
    H = 1,
}

/// One optical mode: a (path, polarization) pair. With `N` paths there are
/// `2N` modes, ordered by `2 * path + pol`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpticalMode {
    pub path: usize,
    pub pol: Pol,
}

impl OpticalMode {
    pub fn index(self) -> usize {
        2 * self.path + self.pol as usize
    }
}

/// Exact angle `num * pi / den`, stored reduced with `num < den` (i.e. the
/// value is reduced modulo pi, which leaves every wave-plate action
/// unchanged since both plates depend only on `2 * theta` modulo `2 pi`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Angle {
    num: u32,
    den: u32,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl Angle {
    pub const ZERO: Angle = Angle { num: 0, den: 1 };

    /// `num * pi / den`, reduced modulo pi and to lowest terms.
    pub fn pi_times(num: u32, den: u32) -> Angle {
        assert!(den > 0, "angle denominator must be positive");
        let num = num % den;
        if num == 0 {
            return Angle::ZERO;
        }
        let g = gcd(num, den);
        Angle { num: num / g, den: den / g }
    }

    /// Reconstruct an angle from radians. Accepts anything within `tol` of a
    /// rational multiple of pi with denominator at most `max_den`.
    pub fn from_radians(radians: f64, max_den: u32, tol: f64) -> Result<Angle> {
        let turns = radians / std::f64::consts::PI;
        let frac = turns.rem_euclid(1.0);
        let (num, den) = best_rational(frac, max_den);
        let approx = num as f64 / den as f64;
        if (frac - approx).abs() > tol {
            return Err(Error::ParseDevice {
                token: format!("{radians}"),
                reason: "angle is not a small rational multiple of pi".into(),
            });
        }
        Ok(Angle::pi_times(num, den))
    }

    pub fn numerator(self) -> u32 {
        self.num
    }

    pub fn denominator(self) -> u32 {
        self.den
    }

    pub fn radians<R: Real>(self) -> R {
        R::of(std::f64::consts::PI * self.num as f64 / self.den as f64)
    }

    /// True if the angle lies on the grid `{k pi / q : 0 <= k < q}`.
    pub fn on_grid(self, q: u32) -> bool {
        q % self.den == 0
    }

    /// Grid index `k` such that the angle equals `k pi / q`, if on the grid.
    pub fn grid_index(self, q: u32) -> Option<u32> {
        if self.on_grid(q) { Some(self.num * (q / self.den)) } else { None }
    }
}

/// Best rational approximation to `x` in [0, 1) with denominator <= max_den
/// (Stern-Brocot descent).
fn best_rational(x: f64, max_den: u32) -> (u32, u32) {
    let (mut lo, mut hi) = ((0u32, 1u32), (1u32, 1u32));
    let mut best = (0u32, 1u32);
    let mut best_err = x.abs();
    loop {
        let med = (lo.0 + hi.0, lo.1 + hi.1);
        if med.1 > max_den {
            break;
        }
        let v = med.0 as f64 / med.1 as f64;
        let err = (x - v).abs();
        if err < best_err {
            best = med;
            best_err = err;
        }
        if v < x {
            lo = med;
        } else if v > x {
            hi = med;
        } else {
            break;
        }
    }
    if (x - 1.0).abs() < best_err {
        // x rounds to 1, which reduces to 0 mod pi
        return (0, 1);
    }
    best
}

impl fmt::Display for Angle {
    /// Prints `0.25pi` when the fraction has a finite decimal expansion and
    /// `7/90pi` otherwise. `parse_angle` accepts both forms.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.num == 0 {
            return write!(f, "0pi");
        }
        let mut den = self.den;
        while den % 2 == 0 {
            den /= 2;
        }
        while den % 5 == 0 {
            den /= 5;
        }
        if den == 1 {
            let mut s = format!("{:.10}", self.num as f64 / self.den as f64);
            while s.ends_with('0') {
                s.pop();
            }
            write!(f, "{s}pi")
        } else {
            write!(f, "{}/{}pi", self.num, self.den)
        }
    }
}

/// Parse `0.25pi`, `0pi`, or `7/90pi` into an exact [`Angle`].
pub fn parse_angle(text: &str) -> Result<Angle> {
    let bad = |reason: &str| Error::ParseDevice { token: text.into(), reason: reason.into() };
    let body = text
        .strip_suffix("pi")
        .ok_or_else(|| bad("angle must be written as a multiple of pi, e.g. `0.25pi`"))?;
    if let Some((n, d)) = body.split_once('/') {
        let num: u32 = n.trim().parse().map_err(|_| bad("bad fraction numerator"))?;
        let den: u32 = d.trim().parse().map_err(|_| bad("bad fraction denominator"))?;
        if den == 0 {
            return Err(bad("zero denominator"));
        }
        Ok(Angle::pi_times(num, den))
    } else {
        let value: f64 = body.trim().parse().map_err(|_| bad("bad angle coefficient"))?;
        if !value.is_finite() || value < 0.0 {
            return Err(bad("angle coefficient must be finite and non-negative"));
        }
        Angle::from_radians(value * std::f64::consts::PI, 3600, 1e-9)
    }
}

/// Down-conversion source variants: the two-photon term injected on a pair
/// of paths. `Bell` injects the unnormalized sum over both polarizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DcKind {
    Pair00,
    Pair11,
    Bell,
}

impl DcKind {
    pub const ALL: [DcKind; 3] = [DcKind::Pair00, DcKind::Pair11, DcKind::Bell];

    pub fn token(self) -> &'static str {
        match self {
            DcKind::Pair00 => "DC00",
            DcKind::Pair11 => "DC11",
            DcKind::Bell => "DCBell",
        }
    }
}

/// A device instance bound to concrete paths (and an angle for wave plates).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Device {
    Dc { kind: DcKind, paths: (usize, usize) },
    BeamSplitter { paths: (usize, usize) },
    PolarizingBeamSplitter { paths: (usize, usize) },
    HalfWavePlate { path: usize, angle: Angle },
    QuarterWavePlate { path: usize, angle: Angle },
    Mirror { path: usize },
}

impl Device {
    pub fn is_source(&self) -> bool {
        matches!(self, Device::Dc { .. })
    }

    /// Paths the device acts on, one or two.
    pub fn paths(&self) -> Vec<usize> {
        match *self {
            Device::Dc { paths, .. }
            | Device::BeamSplitter { paths }
            | Device::PolarizingBeamSplitter { paths } => vec![paths.0, paths.1],
            Device::HalfWavePlate { path, .. }
            | Device::QuarterWavePlate { path, .. }
            | Device::Mirror { path } => vec![path],
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        match *self {
            Device::HalfWavePlate { angle, .. } | Device::QuarterWavePlate { angle, .. } => {
                Some(angle)
            }
            _ => None,
        }
    }

    pub fn kind_token(&self) -> &'static str {
        match self {
            Device::Dc { kind, .. } => kind.token(),
            Device::BeamSplitter { .. } => "BS",
            Device::PolarizingBeamSplitter { .. } => "PBS",
            Device::HalfWavePlate { .. } => "HWP",
            Device::QuarterWavePlate { .. } => "QWP",
            Device::Mirror { .. } => "R",
        }
    }

    /// Check path indices against the path count and two-path distinctness.
    pub fn validate(&self, n_paths: usize) -> Result<()> {
        let ps = self.paths();
        for &p in &ps {
            if p >= n_paths {
                return Err(Error::PathOutOfRange { path: p, paths: n_paths });
            }
        }
        if ps.len() == 2 && ps[0] == ps[1] {
            return Err(Error::MalformedSetup(format!(
                "{} requires two distinct paths",
                self.kind_token()
            )));
        }
        Ok(())
    }
}

pub fn path_name(path: usize) -> String {
    if path < 26 {
        ((b'a' + path as u8) as char).to_string()
    } else {
        format!("p{path}")
    }
}

pub fn parse_path(text: &str) -> Result<usize> {
    let t = text.trim();
    let bytes = t.as_bytes();
    if bytes.len() == 1 && bytes[0].is_ascii_lowercase() {
        return Ok((bytes[0] - b'a') as usize);
    }
    if let Some(rest) = t.strip_prefix('p') {
        if let Ok(idx) = rest.parse::<usize>() {
            return Ok(idx);
        }
    }
    Err(Error::ParseDevice { token: t.into(), reason: "expected a path name like `a`".into() })
}

impl fmt::Display for Device {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Device::Dc { kind, paths } => {
                write!(f, "{}({},{})", kind.token(), path_name(paths.0), path_name(paths.1))
            }
            Device::BeamSplitter { paths } => {
                write!(f, "BS({},{})", path_name(paths.0), path_name(paths.1))
            }
            Device::PolarizingBeamSplitter { paths } => {
                write!(f, "PBS({},{})", path_name(paths.0), path_name(paths.1))
            }
            Device::HalfWavePlate { path, angle } => {
                write!(f, "HWP({},{})", path_name(path), angle)
            }
            Device::QuarterWavePlate { path, angle } => {
                write!(f, "QWP({},{})", path_name(path), angle)
            }
            Device::Mirror { path } => write!(f, "R({})", path_name(path)),
        }
    }
}

/// Parse a single device token such as `PBS(b,c)` or `HWP(a,0.25pi)`.
pub fn parse_device(token: &str) -> Result<Device> {
    let t = token.trim();
    let bad = |reason: String| Error::ParseDevice { token: t.into(), reason };
    let open = t.find('(').ok_or_else(|| bad("missing `(`".into()))?;
    if !t.ends_with(')') {
        return Err(bad("missing `)`".into()));
    }
    let kind = &t[..open];
    let args: Vec<&str> = t[open + 1..t.len() - 1].split(',').map(str::trim).collect();
    let two_paths = |args: &[&str]| -> Result<(usize, usize)> {
        if args.len() != 2 {
            return Err(bad("expected two paths".into()));
        }
        Ok((parse_path(args[0])?, parse_path(args[1])?))
    };
    match kind {
        "DC00" => Ok(Device::Dc { kind: DcKind::Pair00, paths: two_paths(&args)? }),
        "DC11" => Ok(Device::Dc { kind: DcKind::Pair11, paths: two_paths(&args)? }),
        "DCBell" | "DC" => Ok(Device::Dc { kind: DcKind::Bell, paths: two_paths(&args)? }),
        "BS" => Ok(Device::BeamSplitter { paths: two_paths(&args)? }),
        "PBS" => Ok(Device::PolarizingBeamSplitter { paths: two_paths(&args)? }),
        "HWP" | "QWP" => {
            if args.len() != 2 {
                return Err(bad("expected a path and an angle".into()));
            }
            let path = parse_path(args[0])?;
            let angle = parse_angle(args[1])?;
            if kind == "HWP" {
                Ok(Device::HalfWavePlate { path, angle })
            } else {
                Ok(Device::QuarterWavePlate { path, angle })
            }
        }
        "R" => {
            if args.len() != 1 {
                return Err(bad("expected one path".into()));
            }
            Ok(Device::Mirror { path: parse_path(args[0])? })
        }
        other => Err(Error::ParseDevice {
            token: t.into(),
            reason: format!("unknown device kind `{other}`"),
        }),
    }
}
