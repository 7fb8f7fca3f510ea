//! Independent oracles shared by unit tests.

use alloc::vec::Vec;

use crate::barrier::BarrierSpec;
use crate::numerics::PhysicalConstants;

/// Classical RK4 integration of ψ'' = (V(x) − E)/(ħ²/2m)·ψ from x_c with the
/// midpoint data of the odd and even solutions. Steps land on every
/// interface so the piecewise-constant coefficient never straddles a jump.
pub fn rk4_basis(barrier: &BarrierSpec, k: f64, x: f64, c: &PhysicalConstants, kappa_norm: f64) -> [f64; 4] {
    let kf = c.kinetic_factor();
    let e = c.energy(k);
    let xc = barrier.midpoint();
    let dir = if x >= xc { 1.0 } else { -1.0 };
    let mut stops: Vec<f64> = barrier
        .interfaces()
        .into_iter()
        .filter(|&p| (p - xc) * dir > 0.0 && (x - p) * dir > 0.0)
        .collect();
    stops.sort_by(|p, q| ((p - xc) * dir).partial_cmp(&((q - xc) * dir)).unwrap());
    stops.push(x);
    let mut state = [0.0, kappa_norm, 1.0, 0.0];
    let mut pos = xc;
    for stop in stops {
        let sigma = (barrier.potential(pos + 1e-9 * dir) - e) / kf;
        let n = (((stop - pos).abs() / 2e-3).ceil() as usize).max(1);
        let h = (stop - pos) / n as f64;
        let f = |s: [f64; 4]| [s[1], sigma * s[0], s[3], sigma * s[2]];
        for _ in 0..n {
            let k1 = f(state);
            let k2 = f(add(state, k1, 0.5 * h));
            let k3 = f(add(state, k2, 0.5 * h));
            let k4 = f(add(state, k3, h));
            for i in 0..4 {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        pos = stop;
    }
    state
}

fn add(s: [f64; 4], d: [f64; 4], h: f64) -> [f64; 4] {
    [s[0] + h * d[0], s[1] + h * d[1], s[2] + h * d[2], s[3] + h * d[3]]
}

pub fn fig1_barrier() -> BarrierSpec {
    BarrierSpec::Rectangular { a: 200.0, b: 215.0, v0: 0.2 }
}

pub fn double_barrier() -> BarrierSpec {
    BarrierSpec::DoubleRect { a: 100.0, d: 5.0, l: 8.0, v0: 0.2 }
}

pub fn well_and_steps() -> BarrierSpec {
    BarrierSpec::SymmetricPiecewise {
        a: 50.0,
        segments: alloc::vec![(2.0, 0.3), (3.0, -0.05), (4.0, 0.1), (3.0, -0.05), (2.0, 0.3)],
    }
}

pub use crate::wavepacket::free_gaussian;
