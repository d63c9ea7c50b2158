use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::cbr::by_position;
use super::Scenario;
use crate::channel::PdrTable;

/// A transmitter–receiver pair that can produce an eligible observation: the
/// receiver lies in the statistics region and within the transmitter's
/// largest communication range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tx: usize,
    pub rx: usize,
    pub distance_m: f64,
    /// Offset of this link's per-entry values in the flat per-entry arrays.
    offset: usize,
}

/// Links and their per-entry delivery probabilities, fixed for a converged
/// scenario; reused by every sampled window.
#[derive(Debug, Clone)]
pub struct ReceptionPlan {
    links: Vec<Link>,
    /// `(tx, first link, end link)`, ascending by transmitter.
    groups: Vec<(usize, usize, usize)>,
    rho: Vec<f64>,
}

/// Received packets of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Receptions {
    pub window_s: f64,
    pub links: Vec<Link>,
    /// Per link and transmitter entry, in the entry order of the transmitter.
    pub entry_counts: Vec<u32>,
    /// Per link, summed over entries.
    pub totals: Vec<u32>,
}

impl Receptions {
    pub fn entry_counts_of(&self, link: usize, entries: usize) -> &[u32] {
        let o = self.links[link].offset;
        &self.entry_counts[o..o + entries]
    }
}

impl ReceptionPlan {
    /// The receiver's local CBR selects the PDR curve.
    pub fn new(scenario: &Scenario, table: &PdrTable) -> Self {
        let order = by_position(scenario);
        let mut links = Vec::new();
        let mut groups = Vec::new();
        let mut rho = Vec::new();
        for (tx, v) in scenario.vehicles.iter().enumerate() {
            let reach = v.apps.iter().map(|a| a.cr_m).fold(0.0, f64::max);
            let first = links.len();
            let lo = order.partition_point(|&(p, _)| p < v.position_m - reach);
            for &(pos, rx) in order[lo..].iter().take_while(|&&(p, _)| p <= v.position_m + reach) {
                if rx == tx || !scenario.in_stats_region(pos) {
                    continue;
                }
                let distance_m = libm::fabs(pos - v.position_m);
                let cbr = scenario.vehicles[rx].local_cbr;
                links.push(Link {
                    tx,
                    rx,
                    distance_m,
                    offset: rho.len(),
                });
                rho.extend(
                    v.tx_config
                        .entries()
                        .iter()
                        .map(|e| table.lookup(distance_m, e.power_dbm, cbr)),
                );
            }
            if links.len() > first {
                groups.push((tx, first, links.len()));
            }
        }
        Self { links, groups, rho }
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn empty_receptions(&self, window_s: f64) -> Receptions {
        Receptions {
            window_s,
            links: self.links.clone(),
            entry_counts: vec![0; self.rho.len()],
            totals: vec![0; self.links.len()],
        }
    }

    /// Samples window number `window` into `out`.
    ///
    /// Entry `(P_i, T_i)` sends `⌊T_i·w + φ⌋` packets in a window of `w`
    /// seconds, with a phase `φ ~ U[0, 1)` drawn per transmitter, entry and
    /// window and shared by all receivers of that transmission; this equals
    /// `T_i·w` whenever that is an integer and has that mean otherwise. Each
    /// receiver then gets a binomial count of them. Every transmitter draws
    /// from its own stream, so the result does not depend on the order in
    /// which transmitters are processed.
    pub fn sample_into(&self, scenario: &Scenario, seed: u64, window: u64, out: &mut Receptions) {
        let window_seed = seed ^ window.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut sent = Vec::new();
        for &(tx, first, end) in &self.groups {
            let mut rng = ChaCha8Rng::seed_from_u64(window_seed);
            rng.set_stream(tx as u64);
            let entries = scenario.vehicles[tx].tx_config.entries();
            sent.clear();
            sent.extend(entries.iter().map(|e| {
                let phase: f64 = rng.random();
                libm::floor(e.rate_hz.max(0.0) * out.window_s + phase) as u64
            }));
            for (l, link) in self.links[first..end].iter().enumerate() {
                let mut total = 0;
                for (i, &n) in sent.iter().enumerate() {
                    let k = binomial(n, self.rho[link.offset + i], &mut rng);
                    out.entry_counts[link.offset + i] = k;
                    total += k;
                }
                out.totals[first + l] = total;
            }
        }
    }
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n as u32;
    }
    Binomial::new(n, p).map_or(0, |b| b.sample(rng) as u32)
}

/// One window of `window_s` seconds, sampled from a fresh plan.
pub fn sample_receptions(scenario: &Scenario, table: &PdrTable, window_s: f64, seed: u64) -> Receptions {
    let plan = ReceptionPlan::new(scenario, table);
    let mut out = plan.empty_receptions(window_s);
    plan.sample_into(scenario, seed, 0, &mut out);
    out
}
