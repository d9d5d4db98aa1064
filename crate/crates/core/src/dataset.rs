//! Random setup generation and QFI-labeled datasets.
//!
//! Setups are sampled Melvin-style: a uniform length in `[l_min, l_max]`,
//! each sequence slot drawn uniformly from the enumerated device toolbox,
//! and a down-conversion kind per consecutive path pair. Labels come from
//! the simulator oracle; setups that post-select to nothing are kept with
//! label zero. Records persist as JSON-Lines with stable field names.

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::device::{Angle, DcKind, Device};
use crate::optics::fock::check_angles_on_grid;
use crate::optics::{postselect, run_setup, OpticalSetup, DEFAULT_MAX_SEQUENCE};
use crate::sensing::pauli::Hamiltonian;
use crate::sensing::qfi_pure;

/// Sequence-device families a toolbox may include.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqKind {
    BeamSplitter,
    PolarizingBeamSplitter,
    HalfWavePlate,
    QuarterWavePlate,
    Mirror,
}

impl SeqKind {
    pub const ALL: [SeqKind; 5] = [
        SeqKind::BeamSplitter,
        SeqKind::PolarizingBeamSplitter,
        SeqKind::HalfWavePlate,
        SeqKind::QuarterWavePlate,
        SeqKind::Mirror,
    ];
}

/// The enumerable device toolbox for one photon count.
#[derive(Clone, Debug)]
pub struct ToolboxConfig {
    pub n_photons: usize,
    /// Wave-plate quantization: angles `k pi / q` for `0 <= k < q`.
    pub grid_q: u32,
    pub l_min: usize,
    pub l_max: usize,
    pub seq_kinds: Vec<SeqKind>,
    /// Down-conversion kinds each source pair may use.
    pub dc_kinds: Vec<DcKind>,
}

impl ToolboxConfig {
    /// Defaults: quarter-pi quantization, lengths 1..=15, the full toolbox.
    pub fn new(n_photons: usize) -> Self {
        ToolboxConfig {
            n_photons,
            grid_q: 4,
            l_min: 1,
            l_max: DEFAULT_MAX_SEQUENCE,
            seq_kinds: SeqKind::ALL.to_vec(),
            dc_kinds: DcKind::ALL.to_vec(),
        }
    }

    pub fn with_grid(mut self, q: u32) -> Self {
        self.grid_q = q;
        self
    }

    pub fn with_lengths(mut self, l_min: usize, l_max: usize) -> Self {
        self.l_min = l_min;
        self.l_max = l_max;
        self
    }

    pub fn with_dc_kinds(mut self, kinds: Vec<DcKind>) -> Self {
        self.dc_kinds = kinds;
        self
    }

    /// Every device a sequence slot can hold, in a fixed deterministic
    /// order: BS pairs, PBS pairs, HWP path-major/angle-minor, QWP, R.
    /// For N paths and grid q the count is
    /// `C(N,2) + C(N,2) + N q + N q + N`.
    pub fn sequence_slots(&self) -> Vec<Device> {
        let n = self.n_photons;
        let mut slots = Vec::new();
        for kind in &self.seq_kinds {
            match kind {
                SeqKind::BeamSplitter => {
                    for a in 0..n {
                        for b in a + 1..n {
                            slots.push(Device::BeamSplitter { paths: (a, b) });
                        }
                    }
                }
                SeqKind::PolarizingBeamSplitter => {
                    for a in 0..n {
                        for b in a + 1..n {
                            slots.push(Device::PolarizingBeamSplitter { paths: (a, b) });
                        }
                    }
                }
                SeqKind::HalfWavePlate => {
                    for path in 0..n {
                        for k in 0..self.grid_q {
                            slots.push(Device::HalfWavePlate {
                                path,
                                angle: Angle::pi_times(k, self.grid_q),
                            });
                        }
                    }
                }
                SeqKind::QuarterWavePlate => {
                    for path in 0..n {
                        for k in 0..self.grid_q {
                            slots.push(Device::QuarterWavePlate {
                                path,
                                angle: Angle::pi_times(k, self.grid_q),
                            });
                        }
                    }
                }
                SeqKind::Mirror => {
                    for path in 0..n {
                        slots.push(Device::Mirror { path });
                    }
                }
            }
        }
        slots
    }

    /// Validate a setup against this toolbox: structure, sequence length,
    /// and wave-plate angles on the grid.
    pub fn check(&self, setup: &OpticalSetup) -> Result<()> {
        setup.validate()?;
        if setup.n_photons != self.n_photons {
            return Err(Error::DimensionMismatch {
                expected: self.n_photons,
                got: setup.n_photons,
            });
        }
        if setup.sequence.len() > self.l_max {
            return Err(Error::SequenceTooLong { len: setup.sequence.len(), max: self.l_max });
        }
        check_angles_on_grid(setup, self.grid_q)
    }
}

/// Draw one setup: sources on consecutive pairs with uniformly chosen DC
/// kinds, then a uniform-length sequence of uniform toolbox slots.
pub fn sample_setup(config: &ToolboxConfig, rng: &mut impl Rng) -> OpticalSetup {
    let slots = config.sequence_slots();
    let sources: Vec<Device> = (0..config.n_photons / 2)
        .map(|i| Device::Dc {
            kind: config.dc_kinds[rng.random_range(0..config.dc_kinds.len())],
            paths: (2 * i, 2 * i + 1),
        })
        .collect();
    let length = rng.random_range(config.l_min..=config.l_max);
    let sequence = (0..length).map(|_| slots[rng.random_range(0..slots.len())].clone()).collect();
    OpticalSetup { n_photons: config.n_photons, sources, sequence }
}

/// A setup together with its oracle label.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSetup {
    pub id: u64,
    pub setup: OpticalSetup,
    pub qfi: f64,
    pub success_prob: f64,
    pub valid: bool,
    pub hamiltonian: String,
}

/// Exact oracle label: simulate, post-select, and take `Var(H)` of the
/// probe. Setups with zero post-selection weight get `qfi = 0`,
/// `valid = false`.
pub fn label_setup(id: u64, setup: &OpticalSetup, h: &Hamiltonian) -> Result<LabeledSetup> {
    let state = run_setup::<f64>(setup)?;
    let probe = postselect(&state);
    let success_prob = probe.success_prob();
    let (qfi, valid) = if success_prob > 0.0 {
        (qfi_pure(&probe, h)?, true)
    } else {
        (0.0, false)
    };
    Ok(LabeledSetup {
        id,
        setup: setup.clone(),
        qfi,
        success_prob,
        valid,
        hamiltonian: String::new(),
    })
}

/// Stable dedup key: the canonical text form of the setup.
pub fn canonical_key(setup: &OpticalSetup) -> String {
    setup.text()
}

#[derive(Serialize, Deserialize)]
struct DeviceRecord {
    kind: String,
    paths: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

impl DeviceRecord {
    fn from_device(device: &Device) -> Self {
        DeviceRecord {
            kind: device.kind_token().to_string(),
            paths: device.paths(),
            angle: device.angle().map(|a| a.radians::<f64>()),
        }
    }

    fn to_device(&self) -> Result<Device> {
        let two = |paths: &[usize]| -> Result<(usize, usize)> {
            if paths.len() != 2 {
                return Err(Error::ParseDevice {
                    token: self.kind.clone(),
                    reason: "expected two paths".into(),
                });
            }
            Ok((paths[0], paths[1]))
        };
        let one = |paths: &[usize]| -> Result<usize> {
            if paths.len() != 1 {
                return Err(Error::ParseDevice {
                    token: self.kind.clone(),
                    reason: "expected one path".into(),
                });
            }
            Ok(paths[0])
        };
        let angle = || -> Result<Angle> {
            let radians = self.angle.ok_or_else(|| Error::ParseDevice {
                token: self.kind.clone(),
                reason: "missing angle".into(),
            })?;
            Angle::from_radians(radians, 3600, 1e-9)
        };
        match self.kind.as_str() {
            "DC00" => Ok(Device::Dc { kind: DcKind::Pair00, paths: two(&self.paths)? }),
            "DC11" => Ok(Device::Dc { kind: DcKind::Pair11, paths: two(&self.paths)? }),
            "DCBell" => Ok(Device::Dc { kind: DcKind::Bell, paths: two(&self.paths)? }),
            "BS" => Ok(Device::BeamSplitter { paths: two(&self.paths)? }),
            "PBS" => Ok(Device::PolarizingBeamSplitter { paths: two(&self.paths)? }),
            "HWP" => Ok(Device::HalfWavePlate { path: one(&self.paths)?, angle: angle()? }),
            "QWP" => Ok(Device::QuarterWavePlate { path: one(&self.paths)?, angle: angle()? }),
            "R" => Ok(Device::Mirror { path: one(&self.paths)? }),
            other => Err(Error::ParseDevice {
                token: other.to_string(),
                reason: "unknown device kind".into(),
            }),
        }
    }
}

/// Wire format, one record per JSONL line. Unknown fields are ignored on
/// read; field names are stable.
#[derive(Serialize, Deserialize)]
struct SetupRecord {
    id: u64,
    n: usize,
    sources: Vec<DeviceRecord>,
    seq: Vec<DeviceRecord>,
    qfi: f64,
    succ: f64,
    valid: bool,
    h: String,
}

impl SetupRecord {
    fn from_labeled(labeled: &LabeledSetup) -> Self {
        SetupRecord {
            id: labeled.id,
            n: labeled.setup.n_photons,
            sources: labeled.setup.sources.iter().map(DeviceRecord::from_device).collect(),
            seq: labeled.setup.sequence.iter().map(DeviceRecord::from_device).collect(),
            qfi: labeled.qfi,
            succ: labeled.success_prob,
            valid: labeled.valid,
            h: labeled.hamiltonian.clone(),
        }
    }

    fn to_labeled(&self) -> Result<LabeledSetup> {
        let sources =
            self.sources.iter().map(DeviceRecord::to_device).collect::<Result<Vec<_>>>()?;
        let sequence = self.seq.iter().map(DeviceRecord::to_device).collect::<Result<Vec<_>>>()?;
        let setup = OpticalSetup::new(self.n, sources, sequence)?;
        Ok(LabeledSetup {
            id: self.id,
            setup,
            qfi: self.qfi,
            success_prob: self.succ,
            valid: self.valid,
            hamiltonian: self.h.clone(),
        })
    }
}

/// Write records as JSON-Lines.
pub fn write_jsonl(mut out: impl Write, records: &[LabeledSetup]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, &SetupRecord::from_labeled(record))?;
        writeln!(out)?;
    }
    Ok(())
}

/// Read a JSON-Lines dataset; malformed lines error with their line number.
pub fn read_jsonl(input: impl BufRead) -> Result<Vec<LabeledSetup>> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: SetupRecord = serde_json::from_str(&line)
            .map_err(|e| Error::DatasetLine { line: idx + 1, msg: e.to_string() })?;
        let labeled = parsed
            .to_labeled()
            .map_err(|e| Error::DatasetLine { line: idx + 1, msg: e.to_string() })?;
        records.push(labeled);
    }
    Ok(records)
}

pub fn write_jsonl_file(path: impl AsRef<std::path::Path>, records: &[LabeledSetup]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_jsonl(std::io::BufWriter::new(file), records)
}

pub fn read_jsonl_file(path: impl AsRef<std::path::Path>) -> Result<Vec<LabeledSetup>> {
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file))
}

/// Sample, dedup by canonical key, and label `count` setups across a worker
/// pool. Labels are deterministic in `seed` and independent of `threads`;
/// output order is by id. Returns the records plus the number of duplicate
/// draws that were discarded.
pub fn generate_labeled(
    config: &ToolboxConfig,
    h: &Hamiltonian,
    h_tag: &str,
    count: usize,
    seed: u64,
    threads: usize,
) -> Result<(Vec<LabeledSetup>, u64)> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut setups: Vec<OpticalSetup> = Vec::with_capacity(count);
    let mut seen = std::collections::HashSet::new();
    let mut duplicates = 0u64;
    let budget = (count as u64).saturating_mul(1000).max(10_000);
    let mut attempts = 0u64;
    while setups.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::MalformedSetup(format!(
                "could not draw {count} distinct setups from the toolbox"
            )));
        }
        let setup = sample_setup(config, &mut rng);
        if seen.insert(canonical_key(&setup)) {
            setups.push(setup);
        } else {
            duplicates += 1;
        }
    }
    let labeled = label_all(&setups, h, h_tag, threads)?;
    Ok((labeled, duplicates))
}

/// Label a batch of setups (embarrassingly parallel; merged in id order).
pub fn label_all(
    setups: &[OpticalSetup],
    h: &Hamiltonian,
    h_tag: &str,
    threads: usize,
) -> Result<Vec<LabeledSetup>> {
    if setups.is_empty() {
        return Ok(Vec::new());
    }
    let threads = threads.max(1);
    let mut results: Vec<Option<Result<LabeledSetup>>> = Vec::new();
    results.resize_with(setups.len(), || None);
    if threads == 1 {
        for (i, setup) in setups.iter().enumerate() {
            results[i] = Some(label_setup(i as u64, setup, h));
        }
    } else {
        let chunk = setups.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (t, out_chunk) in results.chunks_mut(chunk).enumerate() {
                let setups = &setups[t * chunk..(t * chunk + out_chunk.len())];
                scope.spawn(move || {
                    for (j, setup) in setups.iter().enumerate() {
                        out_chunk[j] = Some(label_setup((t * chunk + j) as u64, setup, h));
                    }
                });
            }
        });
    }
    results
        .into_iter()
        .map(|r| {
            r.expect("all labels computed").map(|mut l| {
                l.hamiltonian = h_tag.to_string();
                l
            })
        })
        .collect()
}
