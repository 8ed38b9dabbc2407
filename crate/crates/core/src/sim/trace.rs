use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundMethod;
use crate::error::Result;

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub bound_method: BoundMethod,
    pub ultimate_bound: f64,
    pub inflation_radius_m: f64,
    pub goal: [f64; 2],
    pub dt_s: f64,
    pub control_period_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StepFlags {
    /// No path point was inside the safe zone.
    pub stalled: bool,
    pub governor_moved: bool,
    /// The plant left the speed/steering envelope during the preceding interval.
    pub envelope_violation: bool,
    /// The control law used the speed floor during the preceding interval.
    pub singular_clamp: bool,
    /// The steering stop was active during the preceding interval.
    pub steering_stop: bool,
    pub replanned: bool,
    /// `d_S^2(g, y) <= bound <= d_S^2(g, O) - eps_E` at this step.
    pub chain_ok: bool,
}

/// One control step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub state: [f64; 6],
    pub y: [f64; 2],
    pub g: [f64; 2],
    pub g_bar: [f64; 2],
    pub sigma: f64,
    pub delta_e: f64,
    pub bound: f64,
    pub alpha_star: f64,
    pub bound_sdp: Option<f64>,
    pub dist_sq_g_obstacles: f64,
    pub dist_sq_g_y: f64,
    /// Euclidean distance from `y` to the true obstacles.
    pub clearance_m: f64,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    HorizonReached,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub outcome: Outcome,
    pub time_s: f64,
    pub steps: usize,
    /// Steps where the governor moved while the chain check failed.
    pub safety_breaches: usize,
    pub envelope_violations: usize,
    pub singular_clamps: usize,
    pub stalled_steps: usize,
    pub min_clearance_m: f64,
    pub final_path: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
    pub summary: TraceSummary,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line<'a> {
    Header(&'a TraceHeader),
    Step(&'a TraceRecord),
    Summary(&'a TraceSummary),
}

const CSV_COLUMNS: &str = "t,x,y,psi,delta,v,a,out_x,out_y,g_x,g_y,g_bar_x,g_bar_y,sigma,delta_e,bound,alpha_star,\
bound_sdp,dist_sq_g_obstacles,dist_sq_g_y,clearance_m,stalled,governor_moved,envelope_violation,singular_clamp,\
steering_stop,replanned,chain_ok";

impl Trace {
    /// Header line, one line per step, summary line.
    pub fn write_ndjson(&self, mut out: impl Write) -> Result<()> {
        serde_json::to_writer(&mut out, &Line::Header(&self.header))?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, &Line::Step(r))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &Line::Summary(&self.summary))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{CSV_COLUMNS}")?;
        for r in &self.records {
            let mut row: Vec<String> = std::iter::once(r.t)
                .chain(r.state)
                .chain(r.y)
                .chain(r.g)
                .chain(r.g_bar)
                .chain([r.sigma, r.delta_e, r.bound, r.alpha_star])
                .map(|v| v.to_string())
                .collect();
            row.push(r.bound_sdp.map(|v| v.to_string()).unwrap_or_default());
            row.extend([r.dist_sq_g_obstacles, r.dist_sq_g_y, r.clearance_m].map(|v| v.to_string()));
            let f = r.flags;
            row.extend(
                [f.stalled, f.governor_moved, f.envelope_violation, f.singular_clamp, f.steering_stop, f.replanned, f.chain_ok]
                    .map(|b| u8::from(b).to_string()),
            );
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Trace {
        let rec = TraceRecord {
            t: 0.0,
            state: [0.0; 6],
            y: [0.0; 2],
            g: [0.0; 2],
            g_bar: [1.0, 0.0],
            sigma: 0.1,
            delta_e: 2.0,
            bound: 1.0,
            alpha_star: 0.5,
            bound_sdp: None,
            dist_sq_g_obstacles: 3.05,
            dist_sq_g_y: 0.0,
            clearance_m: 2.0,
            flags: StepFlags { chain_ok: true, ..Default::default() },
        };
        Trace {
            header: TraceHeader {
                schema: TRACE_SCHEMA,
                scenario: "t".into(),
                seed: 0,
                bound_method: BoundMethod::Lyap,
                ultimate_bound: 1.0,
                inflation_radius_m: 1.0,
                goal: [1.0, 0.0],
                dt_s: 0.001,
                control_period_s: 0.02,
            },
            records: vec![rec],
            summary: TraceSummary {
                outcome: Outcome::HorizonReached,
                time_s: 0.0,
                steps: 1,
                safety_breaches: 0,
                envelope_violations: 0,
                singular_clamps: 0,
                stalled_steps: 0,
                min_clearance_m: 2.0,
                final_path: vec![],
            },
        }
    }

    #[test]
    fn ndjson_layout() {
        let mut buf = Vec::new();
        tiny().write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0]["kind"], "header");
        assert_eq!(lines[0]["schema"], 1);
        assert_eq!(lines[1]["kind"], "step");
        assert_eq!(lines[2]["outcome"], "horizon_reached");
    }

    #[test]
    fn csv_rows_match_header() {
        let mut buf = Vec::new();
        tiny().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let cols = lines.next().unwrap().split(',').count();
        assert_eq!(lines.next().unwrap().split(',').count(), cols);
    }
}
