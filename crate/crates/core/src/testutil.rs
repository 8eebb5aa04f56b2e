use crate::event::{Event, Hit};

/// Event from `(x, y, module, truth)` tuples with layers at `spacing * (module + 1)`.
pub(crate) fn event_from_points(points: &[(f64, f64, usize, i64)], spacing: f64) -> Event {
    let hits = points
        .iter()
        .enumerate()
        .map(|(id, &(x, y, module, truth))| Hit {
            id,
            x,
            y,
            z: spacing * (module as f64 + 1.0),
            module,
            truth_id: Some(truth),
        })
        .collect();
    Event {
        hits,
        particles: vec![],
        geometry_id: "test".into(),
        original_ids: None,
    }
}
