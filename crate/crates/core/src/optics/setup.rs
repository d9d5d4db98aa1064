//! Optical setups: a layer of down-conversion sources followed by an
//! ordered device sequence, with a `->`-joined text format that round-trips.

use std::fmt;

use crate::error::{Error, Result};
use crate::optics::device::{parse_device, DcKind, Device};

/// Default cap on the device-sequence length.
pub const DEFAULT_MAX_SEQUENCE: usize = 15;

/// A probe-preparation recipe: `n_photons` paths fed pairwise by
/// down-conversion sources, then a sequence of passive devices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OpticalSetup {
    pub n_photons: usize,
    pub sources: Vec<Device>,
    pub sequence: Vec<Device>,
}

impl OpticalSetup {
    pub fn new(n_photons: usize, sources: Vec<Device>, sequence: Vec<Device>) -> Result<Self> {
        let setup = OpticalSetup { n_photons, sources, sequence };
        setup.validate()?;
        Ok(setup)
    }

    /// Convenience constructor: Bell sources on consecutive pairs.
    pub fn with_bell_sources(n_photons: usize, sequence: Vec<Device>) -> Result<Self> {
        let sources = (0..n_photons / 2)
            .map(|i| Device::Dc { kind: DcKind::Bell, paths: (2 * i, 2 * i + 1) })
            .collect();
        OpticalSetup::new(n_photons, sources, sequence)
    }

    /// Structural invariants: an even photon count, sources partitioning the
    /// paths into disjoint pairs, and in-range device paths.
    pub fn validate(&self) -> Result<()> {
        if self.n_photons == 0 || self.n_photons % 2 != 0 {
            return Err(Error::MalformedSetup(format!(
                "photon count {} must be positive and even",
                self.n_photons
            )));
        }
        let mut covered = vec![false; self.n_photons];
        for src in &self.sources {
            let Device::Dc { paths, .. } = src else {
                return Err(Error::MalformedSetup(format!("`{src}` is not a source")));
            };
            src.validate(self.n_photons)?;
            for p in [paths.0, paths.1] {
                if covered[p] {
                    return Err(Error::MalformedSetup(format!(
                        "path {p} is fed by more than one source"
                    )));
                }
                covered[p] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::MalformedSetup("every path needs a source".into()));
        }
        for dev in &self.sequence {
            if dev.is_source() {
                return Err(Error::MalformedSetup(
                    "sources must precede the device sequence".into(),
                ));
            }
            dev.validate(self.n_photons)?;
        }
        Ok(())
    }

    /// Total device count (sources + sequence); graph nodes add start/end.
    pub fn device_count(&self) -> usize {
        self.sources.len() + self.sequence.len()
    }

    pub fn devices(&self) -> impl Iterator<Item = &Device> {
        self.sources.iter().chain(self.sequence.iter())
    }

    /// Canonical text form; [`OpticalSetup::parse`] inverts it exactly.
    pub fn text(&self) -> String {
        self.to_string()
    }

    /// Parse a `->`-joined device chain. Sources come first; the photon
    /// count is inferred from them.
    pub fn parse(text: &str) -> Result<OpticalSetup> {
        let mut sources = Vec::new();
        let mut sequence = Vec::new();
        for token in text.split("->") {
            let token = token.trim();
            if token.is_empty() {
                continue;
            }
            let device = parse_device(token)?;
            if device.is_source() {
                if !sequence.is_empty() {
                    return Err(Error::MalformedSetup(format!(
                        "source `{device}` appears after a sequence device"
                    )));
                }
                sources.push(device);
            } else {
                sequence.push(device);
            }
        }
        if sources.is_empty() {
            return Err(Error::MalformedSetup("a setup needs at least one source".into()));
        }
        OpticalSetup::new(2 * sources.len(), sources, sequence)
    }
}

impl fmt::Display for OpticalSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for dev in self.devices() {
            if !first {
                write!(f, " -> ")?;
            }
            write!(f, "{dev}")?;
            first = false;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::device::Angle;

    #[test]
    fn text_round_trips() {
        let text = "DCBell(a,b) -> DCBell(c,d) -> R(b) -> PBS(b,c) -> R(c)";
        let setup = OpticalSetup::parse(text).unwrap();
        assert_eq!(setup.n_photons, 4);
        assert_eq!(setup.sources.len(), 2);
        assert_eq!(setup.sequence.len(), 3);
        assert_eq!(setup.to_string(), text);
    }

    #[test]
    fn angles_survive_round_trip() {
        let text = "DC00(a,b) -> HWP(a,0.25pi) -> QWP(b,7/90pi)";
        let setup = OpticalSetup::parse(text).unwrap();
        assert_eq!(setup.to_string(), text);
        assert_eq!(setup.sequence[1].angle(), Some(Angle::pi_times(7, 90)));
    }

    #[test]
    fn source_after_sequence_rejected() {
        assert!(OpticalSetup::parse("DC00(a,b) -> R(a) -> DC11(c,d)").is_err());
    }

    #[test]
    fn uncovered_path_rejected() {
        let src = vec![Device::Dc { kind: DcKind::Bell, paths: (0, 1) }];
        assert!(OpticalSetup::new(4, src, vec![]).is_err());
    }

    #[test]
    fn overlapping_sources_rejected() {
        let src = vec![
            Device::Dc { kind: DcKind::Bell, paths: (0, 1) },
            Device::Dc { kind: DcKind::Pair00, paths: (1, 2) },
        ];
        assert!(OpticalSetup::new(4, src, vec![]).is_err());
    }

    #[test]
    fn non_consecutive_pairing_is_still_valid() {
        // the consecutive-pair layout is a sampler default, not a structural rule
        let src = vec![
            Device::Dc { kind: DcKind::Bell, paths: (0, 2) },
            Device::Dc { kind: DcKind::Bell, paths: (1, 3) },
        ];
        assert!(OpticalSetup::new(4, src, vec![]).is_ok());
    }
}
