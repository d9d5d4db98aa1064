//! Sparse Fock-state simulation of polarization-encoded photons.
//!
//! A state is a formal polynomial in the `2N` creation operators: a map from
//! occupancy vectors (one entry per path x polarization mode) to complex
//! amplitudes. Every passive device acts as a linear substitution on
//! creation operators, applied per photon, which reproduces multi-photon
//! interference (bunching and coincidence cancellation) exactly. Amplitudes
//! stay unnormalized through evolution; normalization happens only at
//! post-selection.
//!
//! Under this representation the physical norm of a state is
//! `sum |amp|^2 * prod_m k_m!` — the factorial weights account for
//! multiply-occupied modes (`x^k |vac>` has squared norm `k!`). Passive
//! devices preserve that weighted norm; plain `sum |amp|^2` is preserved
//! only while no mode holds more than one photon.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::optics::device::{DcKind, Device, OpticalMode, Pol};
use crate::optics::setup::OpticalSetup;
use crate::scalar::{Real, C};

/// Default amplitude-pruning threshold: terms below this magnitude are
/// floating-point dust and get dropped to keep the term map small.
pub const DEFAULT_PRUNE: f64 = 1e-12;

/// Occupancy vector over the `2N` modes; entry `2p + pol` counts photons in
/// that mode. Total occupancy is the photon number.
pub type FockMonomial = Vec<u8>;

/// Sparse multi-photon state over `n_paths` paths.
#[derive(Clone, Debug)]
pub struct FockState<R: Real> {
    terms: BTreeMap<FockMonomial, C<R>>,
    n_paths: usize,
    photons: u32,
    prune: R,
}

impl<R: Real> FockState<R> {
    /// The vacuum: one empty monomial with amplitude 1.
    pub fn vacuum(n_paths: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0u8; 2 * n_paths], Complex::new(R::one(), R::zero()));
        FockState { terms, n_paths, photons: 0, prune: R::of(DEFAULT_PRUNE) }
    }

    pub fn with_prune_threshold(mut self, prune: R) -> Self {
        self.prune = prune;
        self
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn photon_count(&self) -> u32 {
        self.photons
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&FockMonomial, &C<R>)> {
        self.terms.iter()
    }

    pub fn amplitude(&self, monomial: &[u8]) -> C<R> {
        self.terms.get(monomial).copied().unwrap_or_else(|| Complex::new(R::zero(), R::zero()))
    }

    /// Build a state from explicit (monomial, amplitude) terms.
    pub fn from_terms(
        n_paths: usize,
        entries: impl IntoIterator<Item = (FockMonomial, C<R>)>,
    ) -> Result<Self> {
        let mut terms = BTreeMap::new();
        let mut photons: Option<u32> = None;
        for (mono, amp) in entries {
            if mono.len() != 2 * n_paths {
                return Err(Error::DimensionMismatch { expected: 2 * n_paths, got: mono.len() });
            }
            let total: u32 = mono.iter().map(|&k| k as u32).sum();
            match photons {
                None => photons = Some(total),
                Some(t) if t != total => {
                    return Err(Error::MalformedSetup(
                        "all monomials must share one photon number".into(),
                    ))
                }
                _ => {}
            }
            let slot = terms.entry(mono).or_insert_with(|| Complex::new(R::zero(), R::zero()));
            *slot += amp;
        }
        Ok(FockState {
            terms,
            n_paths,
            photons: photons.unwrap_or(0),
            prune: R::of(DEFAULT_PRUNE),
        })
    }

    /// Physical squared norm: `sum |amp|^2 * prod_m (k_m)!`.
    pub fn norm_sqr(&self) -> R {
        let mut total = R::zero();
        for (mono, amp) in &self.terms {
            let mut w = amp.norm_sqr();
            for &k in mono.iter() {
                for j in 2..=k as u32 {
                    w = w * R::of(j as f64);
                }
            }
            total += w;
        }
        total
    }

    /// Apply one device, expanding every monomial under the per-photon
    /// substitution the device induces on creation operators. Passive
    /// devices preserve the photon number; down-conversion adds two photons.
    pub fn apply_device(&self, device: &Device) -> Result<FockState<R>> {
        device.validate(self.n_paths)?;
        match *device {
            Device::Dc { kind, paths } => Ok(self.apply_dc(kind, paths)),
            Device::BeamSplitter { paths } => {
                let inv_sqrt2 = Complex::new(R::of(1.0 / std::f64::consts::SQRT_2), R::zero());
                let i_inv_sqrt2 = Complex::new(R::zero(), R::of(1.0 / std::f64::consts::SQRT_2));
                let mut subst = ModeSubst::identity();
                for pol in [Pol::V, Pol::H] {
                    let a = OpticalMode { path: paths.0, pol }.index();
                    let b = OpticalMode { path: paths.1, pol }.index();
                    subst.set(a, vec![(a, inv_sqrt2), (b, i_inv_sqrt2)]);
                    subst.set(b, vec![(b, inv_sqrt2), (a, i_inv_sqrt2)]);
                }
                Ok(self.substitute(&subst))
            }
            Device::PolarizingBeamSplitter { paths } => {
                // V passes straight through; H swaps between the two paths.
                let one = Complex::new(R::one(), R::zero());
                let ah = OpticalMode { path: paths.0, pol: Pol::H }.index();
                let bh = OpticalMode { path: paths.1, pol: Pol::H }.index();
                let mut subst = ModeSubst::identity();
                subst.set(ah, vec![(bh, one)]);
                subst.set(bh, vec![(ah, one)]);
                Ok(self.substitute(&subst))
            }
            Device::HalfWavePlate { path, angle } => {
                let two_theta: R = angle.radians::<R>() * R::of(2.0);
                let c = Complex::new(two_theta.cos(), R::zero());
                let s = Complex::new(two_theta.sin(), R::zero());
                Ok(self.substitute(&plate_subst(path, [c, s, s, -c])))
            }
            Device::QuarterWavePlate { path, angle } => {
                let two_theta: R = angle.radians::<R>() * R::of(2.0);
                let r = R::of(1.0 / std::f64::consts::SQRT_2);
                let (ct, st) = (two_theta.cos(), two_theta.sin());
                let vv = Complex::new(r, -r * ct);
                let hh = Complex::new(r, r * ct);
                let off = Complex::new(R::zero(), -r * st);
                Ok(self.substitute(&plate_subst(path, [vv, off, off, hh])))
            }
            Device::Mirror { path } => {
                let i = Complex::new(R::zero(), R::one());
                let v = OpticalMode { path, pol: Pol::V }.index();
                let h = OpticalMode { path, pol: Pol::H }.index();
                let mut subst = ModeSubst::identity();
                subst.set(v, vec![(v, i)]);
                subst.set(h, vec![(h, i)]);
                Ok(self.substitute(&subst))
            }
        }
    }

    fn apply_dc(&self, kind: DcKind, paths: (usize, usize)) -> FockState<R> {
        let mut out: BTreeMap<FockMonomial, C<R>> = BTreeMap::new();
        let pols: &[Pol] = match kind {
            DcKind::Pair00 => &[Pol::V],
            DcKind::Pair11 => &[Pol::H],
            DcKind::Bell => &[Pol::V, Pol::H],
        };
        for (mono, amp) in &self.terms {
            for &pol in pols {
                let mut m = mono.clone();
                m[OpticalMode { path: paths.0, pol }.index()] += 1;
                m[OpticalMode { path: paths.1, pol }.index()] += 1;
                *out.entry(m).or_insert_with(|| Complex::new(R::zero(), R::zero())) += *amp;
            }
        }
        FockState { terms: out, n_paths: self.n_paths, photons: self.photons + 2, prune: self.prune }
    }

    /// Expand every monomial under a linear mode substitution. A mode with
    /// occupancy `k` mapping to two targets expands binomially into `k + 1`
    /// monomials; like terms merge and dust below the prune threshold drops.
    fn substitute(&self, subst: &ModeSubst<R>) -> FockState<R> {
        let mut out: BTreeMap<FockMonomial, C<R>> = BTreeMap::new();
        let zero = Complex::new(R::zero(), R::zero());
        for (mono, amp) in &self.terms {
            let mut base = mono.clone();
            let mut occupied: Vec<(usize, u8)> = Vec::new();
            for (m, targets) in &subst.map {
                if base[*m] > 0 {
                    occupied.push((*m, base[*m]));
                    if !targets.is_empty() {
                        base[*m] = 0;
                    }
                }
            }
            let mut partial: Vec<(FockMonomial, C<R>)> = vec![(base, *amp)];
            for &(m, k) in &occupied {
                let targets = &subst.map[&m];
                match targets.as_slice() {
                    [] => {}
                    [(t, c)] => {
                        let ck = pow_c(*c, k);
                        for (mono, a) in partial.iter_mut() {
                            mono[*t] += k;
                            *a *= ck;
                        }
                    }
                    [(t1, c1), (t2, c2)] => {
                        let mut next = Vec::with_capacity(partial.len() * (k as usize + 1));
                        for (mono, a) in &partial {
                            let mut binom = R::one();
                            for j in 0..=k {
                                // C(k, j) * c1^j * c2^(k-j)
                                let coeff = Complex::new(binom, R::zero())
                                    * pow_c(*c1, j)
                                    * pow_c(*c2, k - j);
                                let mut m2 = mono.clone();
                                m2[*t1] += j;
                                m2[*t2] += k - j;
                                next.push((m2, *a * coeff));
                                binom = binom * R::of((k - j) as f64) / R::of((j + 1) as f64);
                            }
                        }
                        partial = next;
                    }
                    _ => unreachable!("substitutions target at most two modes"),
                }
            }
            for (m, a) in partial {
                *out.entry(m).or_insert(zero) += a;
            }
        }
        out.retain(|_, a| a.norm_sqr() > self.prune * self.prune);
        FockState { terms: out, n_paths: self.n_paths, photons: self.photons, prune: self.prune }
    }
}

/// Per-mode linear substitution; modes absent from the map are unchanged.
struct ModeSubst<R: Real> {
    map: BTreeMap<usize, Vec<(usize, C<R>)>>,
}

impl<R: Real> ModeSubst<R> {
    fn identity() -> Self {
        ModeSubst { map: BTreeMap::new() }
    }

    fn set(&mut self, mode: usize, targets: Vec<(usize, C<R>)>) {
        self.map.insert(mode, targets);
    }
}

/// 2x2 substitution on the (V, H) modes of one path; `m` is column-major
/// [vv, hv, vh, hh] in the sense `a_V -> m[0] a_V + m[1] a_H`.
fn plate_subst<R: Real>(path: usize, m: [C<R>; 4]) -> ModeSubst<R> {
    let v = OpticalMode { path, pol: Pol::V }.index();
    let h = OpticalMode { path, pol: Pol::H }.index();
    let mut subst = ModeSubst::identity();
    subst.set(v, vec![(v, m[0]), (h, m[1])]);
    subst.set(h, vec![(v, m[2]), (h, m[3])]);
    subst
}

fn pow_c<R: Real>(c: C<R>, k: u8) -> C<R> {
    let mut out = Complex::new(R::one(), R::zero());
    for _ in 0..k {
        out *= c;
    }
    out
}

/// Run a full setup: sources applied to vacuum, then the sequence in order.
pub fn run_setup<R: Real>(setup: &OpticalSetup) -> Result<FockState<R>> {
    setup.validate()?;
    let mut state = FockState::vacuum(setup.n_photons);
    for device in setup.devices() {
        state = state.apply_device(device)?;
    }
    Ok(state)
}

/// Convenience for tests and callers: a monomial from (path, pol) photons.
pub fn monomial(n_paths: usize, photons: &[(usize, Pol)]) -> FockMonomial {
    let mut m = vec![0u8; 2 * n_paths];
    for &(path, pol) in photons {
        m[OpticalMode { path, pol }.index()] += 1;
    }
    m
}

/// Grid-membership check used by dataset validation: every wave-plate angle
/// in the setup must sit on the `pi/q` grid.
pub fn check_angles_on_grid(setup: &OpticalSetup, q: u32) -> Result<()> {
    for dev in setup.devices() {
        if let Some(angle) = dev.angle() {
            if !angle.on_grid(q) {
                return Err(Error::AngleOffGrid { angle: angle.to_string(), q });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::device::{parse_device, Angle};

    type F = FockState<f64>;

    fn single(n_paths: usize, path: usize, pol: Pol) -> F {
        F::from_terms(n_paths, [(monomial(n_paths, &[(path, pol)]), Complex::new(1.0, 0.0))])
            .unwrap()
    }

    #[test]
    fn mirror_multiplies_by_i_per_photon() {
        let state = single(2, 0, Pol::V);
        let out = state.apply_device(&parse_device("R(a)").unwrap()).unwrap();
        let amp = out.amplitude(&monomial(2, &[(0, Pol::V)]));
        assert!((amp - Complex::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn half_wave_plate_at_quarter_pi_is_bit_flip() {
        let state = single(2, 0, Pol::V);
        let out = state
            .apply_device(&Device::HalfWavePlate { path: 0, angle: Angle::pi_times(1, 4) })
            .unwrap();
        let flipped = out.amplitude(&monomial(2, &[(0, Pol::H)]));
        assert!((flipped - Complex::new(1.0, 0.0)).norm() < 1e-12);
        assert!(out.amplitude(&monomial(2, &[(0, Pol::V)])).norm() < 1e-12);
    }

    #[test]
    fn pbs_routes_horizontal_to_other_path() {
        let state = single(2, 0, Pol::H);
        let out = state.apply_device(&parse_device("PBS(a,b)").unwrap()).unwrap();
        let amp = out.amplitude(&monomial(2, &[(1, Pol::H)]));
        assert!((amp - Complex::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(out.term_count(), 1);
    }

    #[test]
    fn beam_splitter_cancels_coincidence() {
        // one V photon in each input: the coincidence term cancels and the
        // photons bunch with amplitude i/2 on either doubly occupied mode
        let state = F::from_terms(
            2,
            [(monomial(2, &[(0, Pol::V), (1, Pol::V)]), Complex::new(1.0, 0.0))],
        )
        .unwrap();
        let out = state.apply_device(&parse_device("BS(a,b)").unwrap()).unwrap();
        let half_i = Complex::new(0.0, 0.5);
        assert!((out.amplitude(&monomial(2, &[(0, Pol::V), (0, Pol::V)])) - half_i).norm() < 1e-12);
        assert!((out.amplitude(&monomial(2, &[(1, Pol::V), (1, Pol::V)])) - half_i).norm() < 1e-12);
        assert!(out.amplitude(&monomial(2, &[(0, Pol::V), (1, Pol::V)])).norm() < 1e-12);
        // weighted norm: 2 * (1/4) * 2! = 1
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sources_only_product_state() {
        let setup = OpticalSetup::parse("DC00(a,b) -> DC11(c,d)").unwrap();
        let out: F = run_setup(&setup).unwrap();
        assert_eq!(out.term_count(), 1);
        let amp = out.amplitude(&monomial(
            4,
            &[(0, Pol::V), (1, Pol::V), (2, Pol::H), (3, Pol::H)],
        ));
        assert!((amp - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dc_adds_two_photons_everything_else_conserves() {
        let setup = OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d)").unwrap();
        let state: F = run_setup(&setup).unwrap();
        assert_eq!(state.photon_count(), 4);
        for token in ["BS(a,c)", "PBS(b,d)", "HWP(a,0.25pi)", "QWP(c,0.5pi)", "R(b)"] {
            let out = state.apply_device(&parse_device(token).unwrap()).unwrap();
            assert_eq!(out.photon_count(), 4, "{token}");
            for (mono, _) in out.terms() {
                let total: u32 = mono.iter().map(|&k| k as u32).sum();
                assert_eq!(total, 4, "{token}");
            }
        }
    }

    #[test]
    fn passive_devices_preserve_weighted_norm() {
        let setup = OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d)").unwrap();
        let mut state: F = run_setup(&setup).unwrap();
        let norm = state.norm_sqr();
        for token in
            ["BS(a,b)", "BS(b,c)", "HWP(b,0.25pi)", "QWP(a,0.75pi)", "PBS(c,d)", "R(d)", "BS(a,d)"]
        {
            state = state.apply_device(&parse_device(token).unwrap()).unwrap();
            assert!(
                (state.norm_sqr() - norm).abs() < 1e-10,
                "{token}: {} vs {norm}",
                state.norm_sqr()
            );
        }
    }

    #[test]
    fn disjoint_path_devices_commute() {
        let setup = OpticalSetup::parse("DCBell(a,b) -> DCBell(c,d)").unwrap();
        let base: F = run_setup(&setup).unwrap();
        let pairs = [
            ("BS(a,b)", "HWP(c,0.25pi)"),
            ("R(a)", "PBS(c,d)"),
            ("QWP(b,0.5pi)", "QWP(d,0.75pi)"),
        ];
        for (x, y) in pairs {
            let dx = parse_device(x).unwrap();
            let dy = parse_device(y).unwrap();
            let xy = base.apply_device(&dx).unwrap().apply_device(&dy).unwrap();
            let yx = base.apply_device(&dy).unwrap().apply_device(&dx).unwrap();
            assert_eq!(xy.term_count(), yx.term_count());
            for (mono, amp) in xy.terms() {
                assert!((amp - yx.amplitude(mono)).norm() < 1e-12, "{x} / {y}");
            }
        }
    }

    #[test]
    fn out_of_range_path_rejected() {
        let state = F::vacuum(2);
        assert!(state.apply_device(&parse_device("R(c)").unwrap()).is_err());
    }

    #[test]
    fn angle_grid_check() {
        let setup = OpticalSetup::parse("DC00(a,b) -> HWP(a,1/3pi)").unwrap();
        assert!(check_angles_on_grid(&setup, 4).is_err());
        assert!(check_angles_on_grid(&setup, 6).is_ok());
    }
}
