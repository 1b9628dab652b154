use std::fmt::Write;

use super::{
    aloha_max_update_rate, phase1_time, phase2_time, phase3_time, AlohaModel, PerfError,
    TimingConstants,
};

/// `n,p1_seconds` for `n` in `ns`, with every pair of ESs a candidate link.
pub fn p1_csv(
    ns: impl IntoIterator<Item = u64>,
    t: f64,
    l: u64,
    tc: &TimingConstants,
) -> Result<String, PerfError> {
    let mut s = String::from("n,p1_seconds\n");
    for n in ns {
        let r = n * n.saturating_sub(1) / 2;
        writeln!(s, "{n},{:.6}", phase1_time(n, t, l, r, tc)?).expect("write to String");
    }
    Ok(s)
}

/// `u,p2_seconds,p3_seconds`.
pub fn p23_csv(
    us: impl IntoIterator<Item = u64>,
    tc: &TimingConstants,
) -> Result<String, PerfError> {
    let mut s = String::from("u,p2_seconds,p3_seconds\n");
    for u in us {
        writeln!(
            s,
            "{u},{:.6},{:.6}",
            phase2_time(u, tc)?,
            phase3_time(u, tc)?
        )
        .expect("write to String");
    }
    Ok(s)
}

/// `num_rn,updates_per_min_novnc,updates_per_min_vnc`.
pub fn aloha_csv(
    ns: impl IntoIterator<Item = u64>,
    a: &AlohaModel,
    handoff_fraction: f64,
) -> Result<String, PerfError> {
    let plain = AlohaModel {
        vnc_enabled: false,
        ..*a
    };
    let vnc = AlohaModel {
        vnc_enabled: true,
        ..*a
    };
    let mut s = String::from("num_rn,updates_per_min_novnc,updates_per_min_vnc\n");
    for n in ns {
        let r0 = aloha_max_update_rate(n, &plain, handoff_fraction)?;
        let r1 = aloha_max_update_rate(n, &vnc, handoff_fraction)?;
        writeln!(s, "{n},{r0:.6},{r1:.6}").expect("write to String");
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_stable() {
        let tc = TimingConstants::default();
        assert!(p1_csv([1], 20.0, 3, &tc)
            .unwrap()
            .starts_with("n,p1_seconds\n1,"));
        assert!(p23_csv([0], &tc)
            .unwrap()
            .starts_with("u,p2_seconds,p3_seconds\n0,0.000000,"));
        let a = aloha_csv([10], &AlohaModel::default(), 0.0).unwrap();
        assert_eq!(
            a.lines().next(),
            Some("num_rn,updates_per_min_novnc,updates_per_min_vnc")
        );
        assert!(a.contains("10,51.840000,"));
    }
}
