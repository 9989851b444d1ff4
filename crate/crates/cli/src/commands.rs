//! One function per command; each turns validated parameters into a
//! [`Report`].

use floquet_core::analytics::{
    casimir_density, casimir_density_generic, casimir_energy, casimir_sign_change_time,
    classical_energy_weak, sweep_estimates, WeakDriveParams,
};
use floquet_core::field::pushforward;
use floquet_core::floquet::{drive_period, iterate_steps};
use floquet_core::medium::{trace_characteristic_recorded, MediumEventKind};
use floquet_core::{
    energy_density, evolve, init_field, total_energy, CharacteristicState, CircleMap,
    DriveProtocol, FieldProfile, Stability,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::config::{
    harmonic_of, validated_schedule, CasimirParams, Command, EnergyParams, EvolveParams,
    FixedPointParams, IterateParams, LightconeParams, MapParams, MediumParams, Prepared,
    ScanParams, SweepParams, TimeReverseParams,
};
use crate::error::CliError;
use crate::output::{Cell, Report, Table};

type Out = Result<Report, CliError>;

pub fn run_command(prepared: &Prepared) -> Out {
    let p = prepared.protocol.as_ref();
    // `prepare` guarantees a protocol for every command that needs one.
    let need = || p.expect("validated config carries a protocol");
    match &prepared.config.command {
        Command::Map(m) => map(need(), m),
        Command::Iterate(m) => iterate(need(), m, prepared.config.seed),
        Command::FixedPoints(m) => fixed_points(need(), m),
        Command::Scan(m) => scan(p, m),
        Command::Evolve(m) => evolve_field(need(), m),
        Command::Energy(m) => energy(need(), m),
        Command::Casimir(m) => casimir(need(), m),
        Command::TimeReverse(m) => time_reverse(need(), m),
        Command::Lightcones(m) => lightcones(need(), m),
        Command::Medium(m) => medium(m),
        Command::SweepEstimate(m) => sweep(p, m),
    }
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
        Stability::Tangent => "tangent",
    }
}

/// Shortest distance between two ring points.
fn ring_distance(a: f64, b: f64, circumference: f64) -> f64 {
    let d = (a - b).rem_euclid(circumference);
    d.min(circumference - d)
}

fn map(p: &DriveProtocol, m: &MapParams) -> Out {
    let cm = CircleMap::tabulate(p, m.t0, m.periods, m.samples)?;
    let mut t = Table::new("map", vec!["x", "lift", "displacement", "multiplier"]);
    for (&(x, f), &mult) in cm.lift_samples.iter().zip(&cm.multiplier_samples) {
        t.push(vec![x.into(), f.into(), (f - x).into(), mult.into()]);
    }
    let (lo, hi) = cm
        .multiplier_samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut r = Report::default();
    r.number("t_map", cm.t_map);
    r.number("circumference", cm.circumference);
    r.number("seam_mismatch", cm.seam_mismatch);
    r.number("min_multiplier", lo);
    r.number("max_multiplier", hi);
    r.tables.push(t);
    Ok(r)
}

fn iterate(p: &DriveProtocol, m: &IterateParams, seed: u64) -> Out {
    let (z0, _) = p.evaluate(m.t0)?;
    let period = drive_period(p, m.t0)?;
    let mut starts = m.starts.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    starts.extend((0..m.random_starts).map(|_| rng.gen_range(-z0..z0)));
    let orbits = starts
        .par_iter()
        .map(|&x| iterate_steps(p, m.t0, x, m.steps))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("iterate", vec!["orbit", "step", "t", "x", "log_multiplier"]);
    let mut mean_log = Vec::with_capacity(orbits.len());
    for (i, orbit) in orbits.iter().enumerate() {
        for (k, &(x, lm)) in orbit.iter().enumerate() {
            let time = m.t0 + k as f64 * period;
            t.push(vec![i.into(), k.into(), time.into(), x.into(), lm.into()]);
        }
        if m.steps > 0 {
            mean_log.push(orbit.iter().map(|s| s.1).sum::<f64>() / m.steps as f64);
        }
    }
    let mut r = Report::default();
    r.scalar("orbits", orbits.len());
    r.scalar("starts", starts.clone());
    r.scalar(
        "mean_log_multiplier",
        mean_log.iter().map(|&v| serde_json::Number::from_f64(v)).collect::<Vec<_>>(),
    );
    r.tables.push(t);
    Ok(r)
}

fn fixed_points(p: &DriveProtocol, m: &FixedPointParams) -> Out {
    let cm = CircleMap::tabulate(p, m.t0, m.periods, m.samples)?;
    let set = cm.find_fixed_points(m.periods)?;
    let mut t = Table::new(
        "fixed_points",
        vec!["x", "multiplier", "stability", "multiplicity", "t_m", "mirror_speed"],
    );
    for fp in &set.points {
        t.push(vec![
            fp.x.into(),
            fp.multiplier.into(),
            stability_name(fp.stability).into(),
            (fp.multiplicity as usize).into(),
            fp.t_m.into(),
            fp.mirror_speed.into(),
        ]);
    }
    let mut r = Report::default();
    r.scalar("period", set.period);
    r.scalar("count", set.points.len());
    r.scalar("count_with_multiplicity", set.count_with_multiplicity());
    r.scalar("stable", set.count(Stability::Stable));
    r.scalar("unstable", set.count(Stability::Unstable));
    r.scalar("tangent", set.count(Stability::Tangent));
    r.scalar("fixed_points", serde_json::to_value(&set.points).unwrap_or_default());
    r.tables.push(t);
    Ok(r)
}

fn scan(p: Option<&DriveProtocol>, m: &ScanParams) -> Out {
    let (_, a, omega, phi) = harmonic_of(p)?;
    let lengths: Vec<f64> = if m.steps == 1 {
        vec![m.l_min]
    } else {
        (0..m.steps)
            .map(|i| m.l_min + (m.l_max - m.l_min) * i as f64 / (m.steps - 1) as f64)
            .collect()
    };
    let rows = floquet_core::floquet::scan_lengths(&lengths, a, omega, phi, m.periods, m.samples)?;
    let mut t = Table::new("scan", vec!["L", "count", "x", "multiplier", "stability"]);
    let mut counts = Vec::with_capacity(rows.len());
    for row in &rows {
        let n = row.fixed_points.count_with_multiplicity();
        counts.push(serde_json::json!({ "L": row.length, "count": n }));
        if row.fixed_points.points.is_empty() {
            t.push(vec![row.length.into(), 0usize.into(), Cell::Empty, Cell::Empty, Cell::Empty]);
        }
        for fp in &row.fixed_points.points {
            t.push(vec![
                row.length.into(),
                n.into(),
                fp.x.into(),
                fp.multiplier.into(),
                stability_name(fp.stability).into(),
            ]);
        }
    }
    let mut r = Report::default();
    r.scalar("counts", counts);
    r.tables.push(t);
    Ok(r)
}

/// `t0 + k T` for `k = 0..=n`, following the period of whichever segment is
/// active.
fn period_marks(p: &DriveProtocol, t0: f64, n: u32) -> Result<Vec<f64>, CliError> {
    let mut marks = vec![t0];
    let mut t = t0;
    for _ in 0..n {
        t += drive_period(p, t)?;
        marks.push(t);
    }
    Ok(marks)
}

fn evolve_field(p: &DriveProtocol, m: &EvolveParams) -> Out {
    let f0 = init_field(p, m.t0, m.points, &m.profile, m.interpolation)?;
    let marks = period_marks(p, m.t0, m.periods)?;
    let snaps: Vec<(usize, f64)> = marks
        .iter()
        .enumerate()
        .filter(|(k, _)| *k % m.every as usize == 0)
        .map(|(k, &t)| (k, t))
        .collect();
    let states = snaps
        .par_iter()
        .map(|&(_, t)| evolve(p, &f0, t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("evolve", vec!["period", "t", "x", "value"]);
    let mut peaks = Vec::new();
    for (&(k, time), s) in snaps.iter().zip(&states) {
        for (&x, &v) in s.grid().iter().zip(s.values()) {
            t.push(vec![k.into(), time.into(), x.into(), v.into()]);
        }
        peaks.push(s.values().iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    let mut r = Report::default();
    r.scalar("snapshots", snaps.len());
    r.scalar("max_abs_value", peaks);
    r.tables.push(t);
    Ok(r)
}

fn energy(p: &DriveProtocol, m: &EnergyParams) -> Out {
    let f0 = init_field(p, m.t0, m.points, &m.profile, m.interpolation)?;
    let marks = period_marks(p, m.t0, m.periods)?;
    let totals = marks
        .par_iter()
        .map(|&t| total_energy(p, &f0, t))
        .collect::<Result<Vec<_>, _>>()?;
    let e0 = totals[0];
    let weak = match m.weak_q {
        Some(q) => {
            let (_, a, _, _) = harmonic_of(Some(p))?;
            let l0 = drive_period(p, m.t0)? / 2.0;
            Some(WeakDriveParams::allow_strong(a, l0, q)?)
        }
        None => None,
    };
    let mut t = Table::new("energy", vec!["period", "t", "energy", "ratio", "weak_prediction"]);
    for (k, (&time, &e)) in marks.iter().zip(&totals).enumerate() {
        let pred = weak.map(|w| classical_energy_weak(e0, k as f64, &w));
        t.push(vec![k.into(), time.into(), e.into(), (e / e0).into(), pred.into()]);
    }
    let mut r = Report::default();
    r.number("initial_energy", e0);
    r.number("final_energy", totals[totals.len() - 1]);
    r.number("final_ratio", totals[totals.len() - 1] / e0);
    if m.density {
        let t_end = marks[marks.len() - 1];
        let rep = energy_density(p, &f0, t_end)?;
        let mut d = Table::new("energy_density", vec!["t", "x", "density"]);
        for (&x, &v) in rep.grid.iter().zip(&rep.density) {
            d.push(vec![t_end.into(), x.into(), v.into()]);
        }
        r.number("final_peak_density", rep.density.iter().fold(0.0f64, |a, &v| a.max(v)));
        r.tables.push(t);
        r.tables.push(d);
    } else {
        r.tables.push(t);
    }
    Ok(r)
}

fn casimir(p: &DriveProtocol, m: &CasimirParams) -> Out {
    let (l, a, _, _) = harmonic_of(Some(p))?;
    let mut columns = vec!["t", "x", "density"];
    if m.generic {
        columns.extend(["generic", "generic_reliable"]);
    }
    let mut t = Table::new("casimir", columns);
    let mut energies = Vec::new();
    for &time in &m.times {
        let (z, _) = p.evaluate(time)?;
        let xs: Vec<f64> = (0..m.points).map(|i| -z + 2.0 * z * i as f64 / m.points as f64).collect();
        let generic = if m.generic {
            xs.par_iter()
                .map(|&x| casimir_density_generic(p, x, time).map(Some))
                .collect::<Result<Vec<_>, _>>()?
        } else {
            vec![None; xs.len()]
        };
        for (&x, g) in xs.iter().zip(&generic) {
            let closed = casimir_density(PI * x / l, time, a, m.q, l);
            let mut row = vec![time.into(), x.into(), closed.into()];
            if let Some(g) = g {
                let reliable = !(g.crosses_break || g.ill_conditioned);
                row.push(g.value.into());
                row.push((reliable as i64).into());
            }
            t.push(row);
        }
        energies.push(serde_json::json!({ "t": time, "energy": casimir_energy(time, a, m.q, l) }));
    }
    let mut r = Report::default();
    r.number("static_density", -PI / (48.0 * l * l));
    r.scalar("energies", energies);
    match casimir_sign_change_time(a, m.q, l) {
        Some(ts) => r.number("sign_change_time", ts),
        None => r.scalar("sign_change_time", serde_json::Value::Null),
    }
    r.tables.push(t);
    Ok(r)
}

fn time_reverse(p: &DriveProtocol, m: &TimeReverseParams) -> Out {
    let t_star = match (m.t_star, m.periods) {
        (Some(t), _) => t,
        (None, Some(n)) => *period_marks(p, 0.0, n)?.last().unwrap_or(&0.0),
        (None, None) => unreachable!("checked in prepare"),
    };
    let tr = p
        .time_reverse(t_star, m.q)
        .map_err(|e| CliError::Protocol(e.to_string()))?;
    let report = tr.validate();
    let t_end = 2.0 * t_star;
    let (z0, _) = tr.evaluate(0.0)?;
    let c = 2.0 * z0;
    let x0s: Vec<f64> = (0..m.rays).map(|i| -z0 + c * (i as f64 + 0.5) / m.rays as f64).collect();
    let outs = x0s
        .par_iter()
        .map(|&x| pushforward(&tr, 0.0, t_end, x))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new("time_reverse", vec!["x0", "x_return", "error", "parity"]);
    let mut worst = 0.0f64;
    for (&x0, out) in x0s.iter().zip(&outs) {
        let err = ring_distance(out.x, x0, c);
        worst = worst.max(err);
        t.push(vec![x0.into(), out.x.into(), err.into(), (out.parity as i64).into()]);
    }
    let mut r = Report::default();
    r.number("t_star", t_star);
    r.number("t_end", t_end);
    r.number("max_ray_return_error", worst);
    r.scalar("splice_valid", report.passed);
    r.number("junction_mismatch", report.max_junction_mismatch());
    if m.field_points > 0 {
        let profile = FieldProfile::Sine { mode: 1, amplitude: 1.0 };
        let f0 = init_field(&tr, 0.0, m.field_points, &profile, Default::default())?;
        let f1 = evolve(&tr, &f0, t_end)?;
        let worst_field = f1
            .values()
            .iter()
            .zip(f0.values())
            .fold(0.0f64, |a, (u, v)| a.max((u - v).abs()));
        r.number("max_field_return_error", worst_field);
    }
    r.tables.push(t);
    Ok(r)
}

fn lightcones(p: &DriveProtocol, m: &LightconeParams) -> Out {
    let cm = CircleMap::tabulate(p, m.t0, m.periods, m.samples)?;
    let cones = cm.light_cones(m.grid)?;
    let horizons = cm.find_fixed_points(m.periods)?;
    let mut t = Table::new("lightcones", vec!["x", "velocity"]);
    for &(x, v) in &cones {
        t.push(vec![x.into(), v.into()]);
    }
    let mut r = Report::default();
    r.number("t_map", cm.t_map);
    r.scalar(
        "horizons",
        horizons
            .points
            .iter()
            .map(|fp| serde_json::json!({ "x": fp.x, "stability": stability_name(fp.stability) }))
            .collect::<Vec<_>>(),
    );
    r.tables.push(t);
    Ok(r)
}

fn event_name(k: MediumEventKind) -> &'static str {
    match k {
        MediumEventKind::Boundary => "boundary",
        MediumEventKind::Switch => "switch",
        MediumEventKind::Both => "both",
        MediumEventKind::Seam => "seam",
        MediumEventKind::Target => "target",
    }
}

fn medium(m: &MediumParams) -> Out {
    let schedule = validated_schedule(&m.schedule)
        .map_err(|e| CliError::schema("command.medium.schedule", &e.to_string()))?;
    let traces = m
        .packets
        .par_iter()
        .map(|pk| {
            let s = CharacteristicState::launch(&schedule, pk.t, pk.x, pk.amplitude, pk.omega);
            trace_characteristic_recorded(&schedule, s, m.t_end).map(|tr| (s, tr))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "medium",
        vec!["packet", "event", "t", "x", "laps", "amplitude", "omega", "k", "invariant"],
    );
    let mut drift = 0.0f64;
    let mut semiclassical = true;
    for (i, (s0, tr)) in traces.iter().enumerate() {
        let i0 = s0.invariant(&schedule);
        let rows = std::iter::once(("launch", *s0)).chain(tr.events.iter().map(|(k, s)| (event_name(*k), *s)));
        for (kind, s) in rows {
            let inv = s.invariant(&schedule);
            drift = drift.max(((inv - i0) / i0).abs());
            t.push(vec![
                i.into(),
                kind.into(),
                s.t.into(),
                s.x.into(),
                s.laps.into(),
                s.amplitude.into(),
                s.omega.into(),
                s.k.into(),
                inv.into(),
            ]);
        }
        semiclassical &= tr.semiclassical;
    }
    let mut r = Report::default();
    r.number("max_relative_invariant_drift", drift);
    r.scalar("semiclassical", semiclassical);
    r.scalar(
        "final_omega",
        traces.iter().map(|(_, tr)| tr.state.omega).collect::<Vec<_>>(),
    );
    r.tables.push(t);
    Ok(r)
}

fn sweep(p: Option<&DriveProtocol>, m: &SweepParams) -> Out {
    let speed = match m.speed {
        Some(v) => v,
        None => {
            let (_, a, omega, _) = harmonic_of(p)?;
            a * omega
        }
    };
    let est = sweep_estimates(m.finesse, speed, m.modulation_quality)?;
    let mut t = Table::new(
        "sweep_estimate",
        vec!["finesse", "speed", "modulation_quality", "max_compression", "gain_feasible", "noise_compression"],
    );
    t.push(vec![
        m.finesse.into(),
        speed.into(),
        m.modulation_quality.into(),
        est.max_compression.into(),
        (est.gain_feasible as i64).into(),
        est.noise_compression.into(),
    ]);
    let mut r = Report::default();
    r.number("speed", speed);
    r.number("max_compression", est.max_compression);
    r.scalar("gain_feasible", est.gain_feasible);
    r.number("noise_compression", est.noise_compression);
    r.tables.push(t);
    Ok(r)
}
