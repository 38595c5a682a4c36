//! CSV serialization of spectra and reports.
//!
//! Numbers are written with 17 significant digits so that every value
//! survives a text round trip bit for bit.

use std::io::{self, Write};

use crate::eigen::{EigenReport, PeriodicityReport};
use crate::fdtd::FluxResult;
use crate::perturb::ExpansionRow;
use crate::sensing::{feature_label, ShiftReport};
use crate::spectra::{PhasePoint, Spectrum};

/// Formats a float with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn row<W: Write>(w: &mut W, fields: &[f64]) -> io::Result<()> {
    let line: Vec<String> = fields.iter().map(|v| num(*v)).collect();
    writeln!(w, "{}", line.join(","))
}

pub const SPECTRUM_HEADER: &str = "delta,T,R,occ_a1,occ_b1,phi_a";

pub fn write_spectrum<W: Write>(w: &mut W, spec: &Spectrum) -> io::Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for p in &spec.points {
        row(
            w,
            &[p.delta, p.transmission, p.reflection, p.occupancy_a1, p.occupancy_b1, p.phi_a],
        )?;
    }
    Ok(())
}

pub fn write_phase_sweep<W: Write>(w: &mut W, points: &[PhasePoint]) -> io::Result<()> {
    writeln!(w, "phi,T,R")?;
    for p in points {
        row(w, &[p.phi, p.transmission, p.reflection])?;
    }
    Ok(())
}

pub fn write_eigen_report<W: Write>(w: &mut W, report: &EigenReport) -> io::Result<()> {
    writeln!(w, "index,re,im,energy,decay_rate")?;
    for (k, l) in report.eigenvalues.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{}",
            k + 1,
            num(l.re),
            num(l.im),
            num(report.energies[k]),
            num(report.decay_rates[k])
        )?;
    }
    Ok(())
}

/// Tracked eigenenergies: `phi,zeta_1..zeta_6`.
pub fn write_eigen_curves<W: Write>(w: &mut W, report: &PeriodicityReport) -> io::Result<()> {
    writeln!(w, "phi,zeta_1,zeta_2,zeta_3,zeta_4,zeta_5,zeta_6")?;
    for (k, phi) in report.phases.iter().enumerate() {
        let mut fields = vec![*phi];
        fields.extend(report.curves.iter().map(|c| c[k].im));
        row(w, &fields)?;
    }
    Ok(())
}

/// DFT power summed over the six tracked curves: `l,power`.
pub fn write_power<W: Write>(w: &mut W, report: &PeriodicityReport) -> io::Result<()> {
    writeln!(w, "l,power")?;
    for (l, p) in report.total_power().iter().enumerate() {
        writeln!(w, "{l},{}", num(*p))?;
    }
    Ok(())
}

pub fn write_expansion<W: Write>(w: &mut W, rows: &[ExpansionRow]) -> io::Result<()> {
    writeln!(w, "delta,re_c0,im_c0,re_c1,im_c1,re_c2,im_c2,T_expanded,T_full")?;
    for r in rows {
        row(
            w,
            &[
                r.delta, r.c[0].re, r.c[0].im, r.c[1].re, r.c[1].im, r.c[2].re, r.c[2].im, r.t_expanded,
                r.t_full,
            ],
        )?;
    }
    Ok(())
}

/// One row per matched feature, then unmatched ones with NaN on the
/// missing side.
pub fn write_shifts<W: Write>(w: &mut W, report: &ShiftReport) -> io::Result<()> {
    writeln!(w, "feature_kind,location_baseline,location_perturbed,shift,width")?;
    for m in &report.matched {
        writeln!(
            w,
            "{},{},{},{},{}",
            feature_label(m.baseline.channel, m.baseline.kind),
            num(m.baseline.location),
            num(m.perturbed.location),
            num(m.shift),
            num(m.baseline.width)
        )?;
    }
    for f in &report.disappeared {
        writeln!(
            w,
            "{},{},NaN,NaN,{}",
            feature_label(f.channel, f.kind),
            num(f.location),
            num(f.width)
        )?;
    }
    for f in &report.appeared {
        writeln!(
            w,
            "{},NaN,{},NaN,{}",
            feature_label(f.channel, f.kind),
            num(f.location),
            num(f.width)
        )?;
    }
    Ok(())
}

pub fn write_flux<W: Write>(w: &mut W, results: &[FluxResult]) -> io::Result<()> {
    writeln!(w, "lambda_nm,flux_raw,flux_normalized,converged")?;
    for r in results {
        writeln!(
            w,
            "{},{},{},{}",
            num(r.wavelength_nm),
            num(r.flux_raw),
            num(r.transmission),
            r.converged
        )?;
    }
    Ok(())
}

/// Parses a numeric CSV table produced by this module: header names and
/// rows of floats.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or("empty table")?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| format!("row {}: {e}", n + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        if fields.len() != header.len() {
            return Err(format!("row {} has {} fields, header has {}", n + 1, fields.len(), header.len()));
        }
        rows.push(fields);
    }
    Ok((header, rows))
}
