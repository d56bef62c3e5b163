use super::{Compass, Direction, Junction, Movement, NetError, Phase, PhaseId};

/// Phase plan for a junction.
///
/// An explicit plan is returned unchanged. Four-legged junctions get the
/// canonical order NS-through, NS-left, EW-through, EW-left. Three-legged
/// junctions get the lexicographically least minimum cover of the signalized
/// movements by maximal conflict-free groups.
pub fn default_signal_plan(junction: &Junction) -> Result<Vec<Phase>, NetError> {
    if !junction.phases.is_empty() {
        return Ok(junction.phases.clone());
    }
    let groups = match junction.approaches.len() {
        4 => four_way_groups(junction),
        3 => three_way_groups(junction),
        n => {
            return Err(NetError::UnsupportedTopology {
                junction: junction.id.clone(),
                approaches: n,
            })
        }
    };
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, movements)| Phase {
            id: PhaseId::from_index(i),
            movements,
        })
        .collect())
}

fn four_way_groups(junction: &Junction) -> Vec<Vec<String>> {
    use Compass::*;
    use Direction::*;
    let plan = [
        [(N, Straight), (S, Straight)],
        [(N, Left), (S, Left)],
        [(E, Straight), (W, Straight)],
        [(E, Left), (W, Left)],
    ];
    plan.iter()
        .map(|pair| {
            junction
                .signalized()
                .filter(|m| {
                    junction
                        .geometry_of(m)
                        .is_some_and(|g| pair.contains(&g))
                })
                .map(|m| m.id.clone())
                .collect::<Vec<_>>()
        })
        .filter(|group| !group.is_empty())
        .collect()
}

fn three_way_groups(junction: &Junction) -> Vec<Vec<String>> {
    let movements: Vec<&Movement> = junction
        .signalized()
        .filter(|m| junction.geometry_of(m).is_some())
        .collect();
    let n = movements.len();
    if n == 0 {
        return Vec::new();
    }
    let compatible = |mask: u32| -> bool {
        (0..n).all(|a| {
            (a + 1..n).all(|b| {
                mask & (1 << a) == 0
                    || mask & (1 << b) == 0
                    || !junction.conflicts(movements[a], movements[b])
            })
        })
    };
    let full = (1u32 << n) - 1;
    let free: Vec<u32> = (1..=full).filter(|&m| compatible(m)).collect();
    let mut maximal: Vec<Vec<usize>> = free
        .iter()
        .filter(|&&m| !free.iter().any(|&o| o != m && o & m == m))
        .map(|&m| (0..n).filter(|i| m & (1 << i) != 0).collect())
        .collect();
    maximal.sort();

    // Smallest cover first; combinations are generated in lexicographic order
    // over the sorted group list, so the first hit is the least one.
    for size in 1..=maximal.len() {
        if let Some(cover) = first_cover(&maximal, size, n) {
            return cover
                .into_iter()
                .map(|g| g.iter().map(|&i| movements[i].id.clone()).collect())
                .collect();
        }
    }
    Vec::new()
}

fn first_cover(groups: &[Vec<usize>], size: usize, n: usize) -> Option<Vec<Vec<usize>>> {
    let mut picks: Vec<usize> = (0..size).collect();
    loop {
        let mut covered = vec![false; n];
        for &p in &picks {
            for &i in &groups[p] {
                covered[i] = true;
            }
        }
        if covered.iter().all(|&c| c) {
            return Some(picks.iter().map(|&p| groups[p].clone()).collect());
        }
        // advance to the next combination
        let mut k = size;
        loop {
            if k == 0 {
                return None;
            }
            k -= 1;
            if picks[k] < groups.len() - size + k {
                picks[k] += 1;
                for j in k + 1..size {
                    picks[j] = picks[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::isolated_junction;

    #[test]
    fn four_way_plan_matches_canonical_order() {
        let net = isolated_junction("J1", &Compass::ALL, 3, 300.0);
        let j = net.junction("J1").unwrap();
        let mut bare = j.clone();
        bare.phases.clear();
        let plan = default_signal_plan(&bare).unwrap();
        let ids: Vec<Vec<&str>> = plan
            .iter()
            .map(|p| p.movements.iter().map(String::as_str).collect())
            .collect();
        assert_eq!(ids, vec![vec!["m1", "m5"], vec!["m2", "m6"], vec!["m3", "m7"], vec!["m4", "m8"]]);
    }

    #[test]
    fn explicit_plan_is_returned_unchanged() {
        let net = isolated_junction("J1", &Compass::ALL, 3, 300.0);
        let mut j = net.junction("J1").unwrap().clone();
        j.phases = vec![
            Phase { id: PhaseId(1), movements: vec!["m4".into(), "m8".into()] },
            Phase { id: PhaseId(2), movements: vec!["m1".into()] },
        ];
        assert_eq!(default_signal_plan(&j).unwrap(), j.phases);
    }

    #[test]
    fn two_leg_junction_is_unsupported() {
        let net = isolated_junction("J1", &Compass::ALL, 3, 300.0);
        let mut j = net.junction("J1").unwrap().clone();
        j.phases.clear();
        j.approaches.truncate(2);
        assert!(matches!(
            default_signal_plan(&j),
            Err(NetError::UnsupportedTopology { approaches: 2, .. })
        ));
    }
}
