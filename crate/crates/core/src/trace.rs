//! Per-iteration records of a solve and their CSV form.

use std::io::Write;

/// One outer iteration. Row `t` describes the transmit beamformers entering
/// iteration `t` (the initialization for `t = 1`) evaluated with their MMSE
/// receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub total_power: f64,
    /// `max_s max(0, (gamma_s - SINR_s) / gamma_s)`
    pub max_violation: f64,
    pub sinr: Vec<f64>,
    pub feasible: bool,
    /// Weighted virtual-uplink power `sum_s sigma_s^2 q_s` (duality-based solver only).
    pub uplink_power: Option<f64>,
}

/// Feasibility threshold on the relative SINR shortfall.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn push(&mut self, total_power: f64, max_violation: f64, sinr: Vec<f64>, uplink_power: Option<f64>) {
        let iter = self.rows.len() + 1;
        self.rows.push(TraceRow {
            iter,
            total_power,
            max_violation,
            sinr,
            feasible: max_violation <= FEASIBILITY_TOL,
            uplink_power,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    fn has_uplink(&self) -> bool {
        self.rows.iter().any(|r| r.uplink_power.is_some())
    }

    /// Writes `iter,total_power,max_violation,sinr_1..sinr_S,feasible[,uplink_power]`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let streams = self.rows.first().map_or(0, |r| r.sinr.len());
        let uplink = self.has_uplink();
        let mut header: Vec<String> = vec!["iter".into(), "total_power".into(), "max_violation".into()];
        header.extend((1..=streams).map(|s| format!("sinr_{s}")));
        header.push("feasible".into());
        if uplink {
            header.push("uplink_power".into());
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.iter.to_string(), r.total_power.to_string(), r.max_violation.to_string()];
            rec.extend(r.sinr.iter().map(f64::to_string));
            rec.push(r.feasible.to_string());
            if uplink {
                rec.push(r.uplink_power.map(|x| x.to_string()).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
