//! Trajectory files.
//!
//! CSV with a header row, preceded by `#` metadata lines:
//!
//! ```text
//! # trajectory/1
//! # seed 7
//! # scenario grid
//! # tick 5
//! # gps_sd 10
//! # speed_sd 1
//! tick,x,y,speed,true_edge,true_goal,true_route,true_arc,true_offset,true_velocity,time_of_day,day_of_week,counter,at_goal,switched,true_x,true_y
//! 0,...
//! ```
//!
//! `x`, `y` and `speed` are the readings; the `true_*` columns and the
//! rest are ground truth.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::simulate::{Step, Trajectory, TrajectoryMeta};
use crate::{Result, TransportError};

#[derive(Serialize, Deserialize)]
struct Row {
    tick: usize,
    x: f64,
    y: f64,
    speed: f64,
    true_edge: usize,
    true_goal: usize,
    true_route: usize,
    true_arc: usize,
    true_offset: f64,
    true_velocity: f64,
    time_of_day: usize,
    day_of_week: usize,
    counter: usize,
    at_goal: u8,
    switched: u8,
    true_x: f64,
    true_y: f64,
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, mut out: W) -> Result<()> {
    let m = &traj.meta;
    writeln!(out, "# trajectory/1")?;
    writeln!(out, "# seed {}", m.seed)?;
    writeln!(out, "# scenario {}", m.scenario)?;
    writeln!(out, "# tick {:?}", m.tick)?;
    writeln!(out, "# gps_sd {:?}", m.gps_sd)?;
    writeln!(out, "# speed_sd {:?}", m.speed_sd)?;
    let mut w = csv::Writer::from_writer(out);
    for s in &traj.steps {
        w.serialize(Row {
            tick: s.tick,
            x: s.x,
            y: s.y,
            speed: s.speed,
            true_edge: s.edge(),
            true_goal: s.goal,
            true_route: s.route,
            true_arc: s.arc,
            true_offset: s.offset,
            true_velocity: s.velocity,
            time_of_day: s.time_of_day,
            day_of_week: s.day_of_week,
            counter: s.counter,
            at_goal: s.at_goal as u8,
            switched: s.switched as u8,
            true_x: s.position.0,
            true_y: s.position.1,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> TransportError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    TransportError::Format { line, msg: e.to_string() }
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Trajectory> {
    let text = std::io::read_to_string(input)?;
    let mut meta = TrajectoryMeta::default();
    let mut header = false;
    for (i, line) in text.lines().enumerate().take_while(|(_, l)| l.starts_with('#')) {
        let bad = |msg: &str| TransportError::Format { line: i + 1, msg: msg.into() };
        let body = line.trim_start_matches('#').trim();
        let (key, value) = body.split_once(' ').unwrap_or((body, ""));
        let num = || value.trim().parse::<f64>().map_err(|_| bad("bad number"));
        match key {
            "trajectory/1" => header = true,
            "seed" => meta.seed = value.trim().parse().map_err(|_| bad("bad seed"))?,
            "scenario" => meta.scenario = value.trim().to_string(),
            "tick" => meta.tick = num()?,
            "gps_sd" => meta.gps_sd = num()?,
            "speed_sd" => meta.speed_sd = num()?,
            _ => {}
        }
    }
    if !header {
        return Err(TransportError::Format { line: 1, msg: "expected `# trajectory/1`".into() });
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let steps = r
        .deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            Ok(Step {
                tick: row.tick,
                time_of_day: row.time_of_day,
                day_of_week: row.day_of_week,
                goal: row.true_goal,
                route: row.true_route,
                counter: row.counter,
                at_goal: row.at_goal != 0,
                switched: row.switched != 0,
                arc: row.true_arc,
                offset: row.true_offset,
                velocity: row.true_velocity,
                position: (row.true_x, row.true_y),
                x: row.x,
                y: row.y,
                speed: row.speed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { meta, steps })
}

pub fn save_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_trajectory(traj, std::io::BufWriter::new(f))
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    read_trajectory(std::io::BufReader::new(std::fs::File::open(path)?))
}
