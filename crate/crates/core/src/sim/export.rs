use std::io::Write;

use super::{Metrics, SimError, Trajectory};

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `t,x_1..x_n,xhat_1..xhat_n,y_1..y_m,percent_error`; an absent percent error is empty.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, metrics: &Metrics, out: &mut W) -> Result<(), SimError> {
    let Some(first) = traj.states.first() else {
        return Err(SimError::EmptyTrajectory);
    };
    let (n, m) = (first.len(), traj.outputs[0].len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=n).map(|i| format!("xhat_{i}")));
    header.extend((1..=m).map(|i| format!("y_{i}")));
    header.push("percent_error".into());
    let mut buf = String::with_capacity(traj.len() * (2 * n + m + 2) * 12);
    buf.push_str(&header.join(","));
    buf.push('\n');
    for i in 0..traj.len() {
        let mut row = vec![num(traj.times[i])];
        row.extend(traj.states[i].iter().map(|&v| num(v)));
        row.extend(traj.estimates[i].iter().map(|&v| num(v)));
        row.extend(traj.outputs[i].iter().map(|&v| num(v)));
        row.push(metrics.percent_error[i].map(num).unwrap_or_default());
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}

/// Columns `t` then, for each `(label, index)`, the state and its estimate.
pub fn write_plot_columns<W: Write>(traj: &Trajectory, columns: &[(&str, usize)], out: &mut W) -> Result<(), SimError> {
    let mut buf = String::from("t");
    for (label, _) in columns {
        buf.push_str(&format!(",{label},{label}_hat"));
    }
    buf.push('\n');
    for i in 0..traj.len() {
        buf.push_str(&num(traj.times[i]));
        for &(_, idx) in columns {
            buf.push(',');
            buf.push_str(&num(traj.states[i][idx]));
            buf.push(',');
            buf.push_str(&num(traj.estimates[i][idx]));
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())?;
    Ok(())
}
