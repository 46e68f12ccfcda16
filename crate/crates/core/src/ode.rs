//! Embedded Dormand-Prince 5(4) integrator with exact landing on requested
//! output times.
//!
//! Output times are reached by clamping the step, not by interpolation, so a
//! quadrature node sees the fully controlled solution. One forward pass
//! serves every node.

const MAX_SCALE: f64 = 5.0;
const MIN_SCALE: f64 = 0.2;
const SAFETY: f64 = 0.9;

#[derive(Clone, Copy, Debug)]
pub(crate) struct OdeOpts {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOpts {
    fn default() -> Self {
        OdeOpts {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug)]
pub(crate) enum OdeFailureKind<E> {
    StepUnderflow,
    MaxSteps,
    NonFinite,
    Rhs(E),
}

#[derive(Debug)]
pub(crate) struct OdeFailure<E> {
    pub time: f64,
    pub kind: OdeFailureKind<E>,
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    /// Sum of accepted dimensionless local error norms times rtol; a cheap
    /// proxy for the accumulated truncation error.
    pub error_estimate: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0`, invoking `on_output(index, y)` exactly
/// at each of the ascending `outputs` (all >= t0).
pub(crate) fn integrate_to<E>(
    mut f: impl FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    opts: &OdeOpts,
    mut on_output: impl FnMut(usize, &[f64]),
) -> Result<OdeStats, OdeFailure<E>> {
    debug_assert!(outputs.windows(2).all(|w| w[0] <= w[1]));
    let dim = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut stats = OdeStats::default();

    let mut dydt = vec![0.0; dim];
    f(t, &y, &mut dydt).map_err(|e| OdeFailure {
        time: t,
        kind: OdeFailureKind::Rhs(e),
    })?;

    let span = outputs.last().copied().unwrap_or(t0) - t0;
    if span == 0.0 {
        for (i, _) in outputs.iter().enumerate() {
            on_output(i, &y);
        }
        return Ok(stats);
    }

    // initial step size from the usual norm heuristic
    let weight = |yi: f64| opts.atol + opts.rtol * yi.abs();
    let d0 = y
        .iter()
        .map(|&v| (v / weight(v)).abs())
        .fold(0.0f64, f64::max);
    let d1 = dydt
        .iter()
        .zip(&y)
        .map(|(&fv, &yv)| (fv / weight(yv)).abs())
        .fold(0.0f64, f64::max);
    let mut h = if d1 > 1e-10 && d0 > 1e-10 {
        (0.01 * d0 / d1).min(0.1 * span)
    } else {
        0.1 * span
    };

    let mut k = vec![vec![0.0; dim]; 7];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];

    for (out_idx, &t_out) in outputs.iter().enumerate() {
        while t < t_out {
            if stats.steps + stats.rejected >= opts.max_steps {
                return Err(OdeFailure {
                    time: t,
                    kind: OdeFailureKind::MaxSteps,
                });
            }
            let clamped = h >= t_out - t;
            let h_eff = if clamped { t_out - t } else { h };
            if h_eff < 1e-14 * t.abs().max(1.0) && !clamped {
                return Err(OdeFailure {
                    time: t,
                    kind: OdeFailureKind::StepUnderflow,
                });
            }

            k[0].copy_from_slice(&dydt);
            let mut rhs_failed = None;
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        let a = A[s][j];
                        if a != 0.0 {
                            acc += a * kj[i];
                        }
                    }
                    y_stage[i] = y[i] + h_eff * acc;
                }
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                if let Err(e) = f(t + C[s] * h_eff, &y_stage, &mut tail[0]) {
                    rhs_failed = Some(e);
                    break;
                }
            }
            if let Some(e) = rhs_failed {
                return Err(OdeFailure {
                    time: t,
                    kind: OdeFailureKind::Rhs(e),
                });
            }

            let mut err_norm = 0.0f64;
            for i in 0..dim {
                let mut y5 = 0.0;
                let mut y4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    y5 += B5[j] * kj[i];
                    y4 += B4[j] * kj[i];
                }
                let v5 = y[i] + h_eff * y5;
                let v4 = y[i] + h_eff * y4;
                y_new[i] = v5;
                let w = opts.atol + opts.rtol * y[i].abs().max(v5.abs());
                err_norm = err_norm.max(((v5 - v4) / w).abs());
            }
            if !y_new.iter().all(|v| v.is_finite()) || !err_norm.is_finite() {
                return Err(OdeFailure {
                    time: t,
                    kind: OdeFailureKind::NonFinite,
                });
            }

            let scale = (SAFETY * err_norm.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE);
            if err_norm <= 1.0 {
                stats.steps += 1;
                stats.error_estimate += err_norm * opts.rtol;
                t = if clamped { t_out } else { t + h_eff };
                std::mem::swap(&mut y, &mut y_new);
                // FSAL: the seventh stage is the derivative at the new point
                dydt.copy_from_slice(&k[6]);
                if !clamped {
                    h = h_eff * scale;
                }
            } else {
                stats.rejected += 1;
                h = h_eff * scale;
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(OdeFailure {
                        time: t,
                        kind: OdeFailureKind::StepUnderflow,
                    });
                }
            }
        }
        on_output(out_idx, &y);
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_matches_closed_form() {
        let opts = OdeOpts::default();
        let mut got = Vec::new();
        integrate_to::<()>(
            |_t, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &[0.25, 0.5, 1.0],
            &opts,
            |_, y| got.push(y[0]),
        )
        .unwrap();
        for (v, t) in got.iter().zip([0.25f64, 0.5, 1.0]) {
            assert!((v - t.exp()).abs() < 1e-9, "t={t}: {v}");
        }
    }

    #[test]
    fn harmonic_oscillator_energy_is_conserved_to_tolerance() {
        let opts = OdeOpts {
            rtol: 1e-11,
            atol: 1e-13,
            ..OdeOpts::default()
        };
        let mut last = Vec::new();
        let stats = integrate_to::<()>(
            |_t, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            0.0,
            &[1.0, 0.0],
            &[std::f64::consts::TAU],
            &opts,
            |_, y| last = y.to_vec(),
        )
        .unwrap();
        assert!((last[0] - 1.0).abs() < 1e-9);
        assert!(last[1].abs() < 1e-9);
        assert!(stats.steps > 10);
    }

    #[test]
    fn finite_time_blowup_is_reported_not_panicked() {
        // y' = y^2 from y(0)=2 blows up at t = 0.5
        let opts = OdeOpts::default();
        let err = integrate_to::<()>(
            |_t, y, dy| {
                dy[0] = y[0] * y[0];
                Ok(())
            },
            0.0,
            &[2.0],
            &[1.0],
            &opts,
            |_, _| {},
        )
        .unwrap_err();
        assert!(
            err.time > 0.4 && err.time < 0.6,
            "failure time {}",
            err.time
        );
    }

    #[test]
    fn rhs_error_carries_failure_time() {
        let opts = OdeOpts::default();
        let err = integrate_to(
            |t, _y, dy| {
                if t > 0.3 {
                    Err("rhs domain")
                } else {
                    dy[0] = 1.0;
                    Ok(())
                }
            },
            0.0,
            &[0.0],
            &[1.0],
            &opts,
            |_, _| {},
        )
        .unwrap_err();
        assert!(matches!(err.kind, OdeFailureKind::Rhs("rhs domain")));
    }

    #[test]
    fn zero_rhs_reaches_outputs_immediately() {
        let opts = OdeOpts::default();
        let mut count = 0;
        integrate_to::<()>(
            |_t, _y, dy| {
                dy.fill(0.0);
                Ok(())
            },
            0.0,
            &[3.0, -1.0],
            &[0.1, 0.9, 1.0],
            &opts,
            |_, y| {
                assert_eq!(y, &[3.0, -1.0]);
                count += 1;
            },
        )
        .unwrap();
        assert_eq!(count, 3);
    }
}
