//! From measured impulse responses to the averaged, level-balanced set the
//! solver works on.

use alloc::format;
use alloc::vec::Vec;

use crate::buffer::{energy, ImpulseResponse};
use crate::error::{check_rate, Error, Result};
use crate::gammatone::Filterbank;

/// Sample-wise mean of two microphone measurements, zero-padding the shorter.
/// No time alignment is applied.
pub fn average_pair(mic_a: &ImpulseResponse, mic_b: &ImpulseResponse) -> Result<ImpulseResponse> {
    check_rate(mic_a.sample_rate(), mic_b.sample_rate())?;
    let (a, b) = (mic_a.samples(), mic_b.samples());
    let len = a.len().max(b.len());
    let samples = (0..len)
        .map(|n| (a.get(n).copied().unwrap_or(0.0) + b.get(n).copied().unwrap_or(0.0)) / 2.0)
        .collect();
    ImpulseResponse::new(mic_a.sample_rate(), samples, mic_a.label())
}

/// The four loudspeakers, in output channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    PrimaryLeft,
    PrimaryRight,
    SupportLeft,
    SupportRight,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::PrimaryLeft,
        Channel::PrimaryRight,
        Channel::SupportLeft,
        Channel::SupportRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::PrimaryLeft => "primary_left",
            Channel::PrimaryRight => "primary_right",
            Channel::SupportLeft => "support_left",
            Channel::SupportRight => "support_right",
        }
    }
}

/// Left or right half of the layout: a primary loudspeaker and the supporting
/// loudspeaker behind it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "left" => Some(Side::Left),
            "right" => Some(Side::Right),
            _ => None,
        }
    }

    pub fn primary(self) -> Channel {
        match self {
            Side::Left => Channel::PrimaryLeft,
            Side::Right => Channel::PrimaryRight,
        }
    }

    pub fn support(self) -> Channel {
        match self {
            Side::Left => Channel::SupportLeft,
            Side::Right => Channel::SupportRight,
        }
    }
}

/// Per-loudspeaker impulse responses at the listening position with the
/// gains that bring them to equal energy.
#[derive(Debug, Clone, PartialEq)]
pub struct RirSet {
    irs: [ImpulseResponse; 4],
    balance_gains: [f64; 4],
}

/// Balances four IRs to the energy of the primary left one.
/// `balance_gains[k] = sqrt(E_primary_left / E_k)`.
pub fn balance_levels(irs: [ImpulseResponse; 4]) -> Result<RirSet> {
    let rate = irs[0].sample_rate();
    for ir in &irs[1..] {
        check_rate(rate, ir.sample_rate())?;
    }
    let energies: Vec<f64> = irs.iter().map(|ir| energy(ir.samples())).collect();
    let silent: Vec<&str> = Channel::ALL
        .iter()
        .zip(&energies)
        .filter(|(_, &e)| !(e > 0.0) || !e.is_finite())
        .map(|(c, _)| c.name())
        .collect();
    if !silent.is_empty() {
        return Err(Error::Degenerate(format!("silent impulse response: {}", silent.join(", "))));
    }
    let reference = energies[0];
    let mut balance_gains = [1.0; 4];
    for (g, &e) in balance_gains.iter_mut().zip(&energies).skip(1) {
        *g = libm::sqrt(reference / e);
    }
    Ok(RirSet { irs, balance_gains })
}

impl RirSet {
    /// Reassembles a set with already-known gains (e.g. from a design file).
    pub fn with_gains(irs: [ImpulseResponse; 4], balance_gains: [f64; 4]) -> Result<Self> {
        let rate = irs[0].sample_rate();
        for ir in &irs[1..] {
            check_rate(rate, ir.sample_rate())?;
        }
        if balance_gains.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(Error::invalid("balance_gains", "must all be positive"));
        }
        Ok(Self { irs, balance_gains })
    }

    pub fn sample_rate(&self) -> u32 {
        self.irs[0].sample_rate()
    }

    /// The measured (ungained) response.
    pub fn raw(&self, channel: Channel) -> &ImpulseResponse {
        &self.irs[channel.index()]
    }

    pub fn balance_gain(&self, channel: Channel) -> f64 {
        self.balance_gains[channel.index()]
    }

    pub fn balance_gains(&self) -> [f64; 4] {
        self.balance_gains
    }

    /// The response with its balance gain applied.
    pub fn balanced(&self, channel: Channel) -> ImpulseResponse {
        self.raw(channel).scaled(self.balance_gain(channel))
    }

    /// Band energies of the balanced response.
    pub fn channel_band_profile(&self, filterbank: &Filterbank, channel: Channel) -> Result<Vec<f64>> {
        filterbank.ir_band_energies(&self.balanced(channel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ir(samples: Vec<f64>) -> ImpulseResponse {
        ImpulseResponse::new(48_000, samples, "t").unwrap()
    }

    #[test]
    fn average_examples() {
        let x = ir(vec![0.5, -0.25, 1.0, 0.125]);
        assert_eq!(average_pair(&x, &x).unwrap().samples(), x.samples());
        let neg = x.scaled(-1.0);
        assert!(average_pair(&x, &neg).unwrap().samples().iter().all(|&v| v == 0.0));

        let mut d10 = vec![0.0; 11];
        d10[10] = 1.0;
        let avg = average_pair(&ir(vec![1.0]), &ir(d10)).unwrap();
        assert_eq!(avg.len(), 11);
        assert_eq!(avg.samples()[0], 0.5);
        assert_eq!(avg.samples()[10], 0.5);
        assert_eq!(avg.samples()[1..10].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn average_rejects_rate_mismatch() {
        let a = ImpulseResponse::new(48_000, vec![1.0], "a").unwrap();
        let b = ImpulseResponse::new(44_100, vec![1.0], "b").unwrap();
        assert!(average_pair(&a, &b).is_err());
    }

    #[test]
    fn balance_examples() {
        let base = ir(vec![1.0, 0.5, -0.25]);
        let set = balance_levels([base.clone(), base.clone(), base.clone(), base.clone()]).unwrap();
        assert_eq!(set.balance_gains(), [1.0; 4]);

        let set = balance_levels([base.clone(), base.clone(), base.scaled(2.0), base.clone()]).unwrap();
        assert_eq!(set.balance_gain(Channel::SupportLeft), 0.5);
        assert_eq!(set.balance_gain(Channel::PrimaryLeft), 1.0);

        let silent = ir(vec![0.0; 8]);
        let err = balance_levels([base.clone(), base.clone(), base, silent]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(ref m) if m.contains("support_right")));
    }
}
