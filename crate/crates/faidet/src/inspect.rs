//! Human-readable walk through one trial.

use std::fmt::Write;

use faidet_core::sysmodel::{realized_sinr, realized_weighted_eh, watts_to_dbm};
use faidet_core::*;

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Runs one trial end to end and describes every step.
pub fn report(cfg: &SystemConfig, seed: u64, baseline: bool) -> Result<String, String> {
    let ch = generate_scenario(seed, cfg).map_err(|e| e.to_string())?;
    let res = optimize(&ch, cfg).map_err(|e| e.to_string())?;
    let mut out = String::new();
    let _ = writeln!(out, "trial seed      {seed:#018x}");
    let _ = writeln!(
        out,
        "system          M = {}, K_D = {}, K_E = {}, N = {}, L = {}, P = {:.1} dBm",
        cfg.tx_antennas,
        cfg.num_dr(),
        cfg.num_er(),
        cfg.ports,
        cfg.port_stride,
        watts_to_dbm(cfg.power_w)
    );
    let _ = writeln!(out, "status          {:?} after {} beamforming solves", res.status, res.iterations);
    let trace: Vec<String> = res.objective_trace.iter().map(|e| format!("{e:.9}")).collect();
    let _ = writeln!(out, "objective trace [{}] W", trace.join(", "));
    if !res.is_feasible() {
        let _ = writeln!(out, "the SINR targets cannot be met at the initial ports");
        return Ok(out);
    }
    let _ = writeln!(out, "ports           DR {:?}, ER {:?}", res.ports.dr, res.ports.er);
    let realized = realized_sinr(&res.solution, &res.ports, &ch, cfg).map_err(|e| e.to_string())?;
    for (i, rx) in cfg.data_receivers.iter().enumerate() {
        let sinr = sinr_at_port(i, res.ports.dr[i], &res.solution, &ch, cfg).map_err(|e| e.to_string())?;
        let _ = writeln!(
            out,
            "DR {i}            SINR {:.3} dB (target {:.3} dB, margin {:+.3} dB), on true channel {:.3} dB, beam power {:.3e} W",
            db(sinr),
            db(rx.sinr_threshold),
            db(sinr) - db(rx.sinr_threshold),
            db(realized[i]),
            faidet_core::linalg::norm_sq(&res.solution.w[i])
        );
    }
    for j in 0..cfg.num_er() {
        let eh = eh_power_at_port(j, res.ports.er[j], &res.solution, &ch, cfg).map_err(|e| e.to_string())?;
        let _ = writeln!(out, "ER {j}            harvested {eh:.6e} W (weight {})", cfg.energy_receivers[j].weight);
    }
    let _ = writeln!(out, "transmit power  {:.6} W of {:.6} W", res.solution.total_power(), cfg.power_w);
    let energy_beams = match &res.solution.energy_beams {
        Some(b) => b.len().to_string(),
        None => "not rank one".to_string(),
    };
    let _ = writeln!(out, "energy beams    {energy_beams}");
    let _ = writeln!(
        out,
        "weighted EH     {:.9} W estimated, {:.9} W on true channels",
        res.objective(),
        realized_weighted_eh(&res.solution, &res.ports, &ch, cfg).map_err(|e| e.to_string())?
    );
    if baseline {
        let scenario = generate_mimo_scenario(seed, cfg).map_err(|e| e.to_string())?;
        let mimo = optimize_mimo(&scenario, cfg).map_err(|e| e.to_string())?;
        let _ = writeln!(
            out,
            "MIMO benchmark  {:.9} W ({:?}, {} receive antennas, {} solves)",
            mimo.objective(),
            mimo.status,
            receive_antennas(cfg.data_receivers.first().map_or(cfg.energy_receivers[0].antenna_size, |r| r.antenna_size)),
            mimo.iterations
        );
    }
    Ok(out)
}
