//! Small hand-built instances and a builder for making more.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::network::{
    Alternate, Commodity, Instance, NodeId, ReferencePlan, ServiceClass, Sort, SortPair,
    SortPairId, TrailerType, TrailerTypeId,
};

/// Builds instances by name. Every sort pair leaves terminal `O` on the
/// day-1 twilight sort and arrives at its own destination terminal.
#[derive(Debug, Default, Clone)]
pub struct InstanceBuilder {
    trailers: Vec<TrailerType>,
    pairs: Vec<(String, Vec<String>)>,
    commodities: Vec<(String, f64, ServiceClass, String, Vec<(String, f64)>)>,
    reference: Option<Vec<(String, String, u32)>>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn trailer(mut self, name: &str, capacity: f64, cost: f64) -> Self {
        self.trailers.push(TrailerType { name: name.into(), capacity, cost });
        self
    }

    pub fn sort_pair(mut self, name: &str, allowed: &[&str]) -> Self {
        self.pairs.push((name.into(), allowed.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn commodity(
        mut self,
        name: &str,
        volume: f64,
        class: ServiceClass,
        primary: &str,
        alternates: &[(&str, f64)],
    ) -> Self {
        self.commodities.push((
            name.into(),
            volume,
            class,
            primary.into(),
            alternates.iter().map(|(s, d)| (s.to_string(), *d)).collect(),
        ));
        self
    }

    pub fn reference(mut self, counts: &[(&str, &str, u32)]) -> Self {
        self.reference =
            Some(counts.iter().map(|(s, v, n)| (s.to_string(), v.to_string(), *n)).collect());
        self
    }

    pub fn build(self) -> Result<Instance> {
        let find_v = |n: &str| {
            self.trailers.iter().position(|t| t.name == n).map(TrailerTypeId).unwrap_or_else(|| {
                panic!("builder: unknown trailer type {n}")
            })
        };
        let find_s = |n: &str| {
            self.pairs
                .iter()
                .position(|p| p.0 == n)
                .map(SortPairId)
                .unwrap_or_else(|| panic!("builder: unknown sort pair {n}"))
        };
        let sort_pairs = self
            .pairs
            .iter()
            .map(|(name, allowed)| SortPair {
                name: name.clone(),
                origin: NodeId::new("O", Sort::Twilight, 1),
                destination: NodeId::new(format!("D-{name}"), Sort::Sunrise, 2),
                allowed_trailers: allowed.iter().map(|v| find_v(v)).collect(),
                load_pair: None,
            })
            .collect();
        let commodities = self
            .commodities
            .iter()
            .map(|(name, q, class, primary, alts)| Commodity {
                name: name.clone(),
                volume: *q,
                service_class: *class,
                primary: find_s(primary),
                alternates: alts
                    .iter()
                    .map(|(s, d)| Alternate { sort_pair: find_s(s), distance: *d })
                    .collect(),
            })
            .collect();
        let reference_plan = self.reference.as_ref().map(|r| ReferencePlan {
            gamma: r.iter().map(|(s, v, n)| ((find_s(s), find_v(v)), *n)).collect::<BTreeMap<_, _>>(),
        });
        let inst = Instance {
            sort_pairs,
            trailer_types: self.trailers,
            commodities,
            load_pairs: Vec::new(),
            reference_plan,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Two sort pairs, one 50-cube trailer type, three commodities:
/// `k1 = 60 → {s1}`, `k2 = 30 → {s1, s2}`, `k3 = 40 → {s2}`.
pub fn t1() -> Instance {
    InstanceBuilder::new()
        .trailer("t53", 50.0, 50.0)
        .sort_pair("s1", &["t53"])
        .sort_pair("s2", &["t53"])
        .commodity("k1", 60.0, ServiceClass::OneDay, "s1", &[])
        .commodity("k2", 30.0, ServiceClass::TwoDay, "s1", &[("s2", 25.0)])
        .commodity("k3", 40.0, ServiceClass::OneDay, "s2", &[])
        .build()
        .expect("T1 is valid")
}

/// [`t1`] with the reference plan `{s1: 2, s2: 2}`.
pub fn t1_with_reference() -> Instance {
    let mut inst = t1();
    inst.reference_plan = Some(ReferencePlan {
        gamma: [((SortPairId(0), TrailerTypeId(0)), 2), ((SortPairId(1), TrailerTypeId(0)), 2)]
            .into_iter()
            .collect(),
    });
    inst
}

/// One commodity on `p` with alternates `a1` (distance 100) and `a2`
/// (distance 40), plus a commodity pinned to each alternate.
pub fn three_pair_two_alternates() -> Instance {
    InstanceBuilder::new()
        .trailer("t", 50.0, 50.0)
        .sort_pair("p", &["t"])
        .sort_pair("a1", &["t"])
        .sort_pair("a2", &["t"])
        .commodity("k", 20.0, ServiceClass::OneDay, "p", &[("a1", 100.0), ("a2", 40.0)])
        .commodity("k1", 10.0, ServiceClass::OneDay, "a1", &[])
        .commodity("k2", 10.0, ServiceClass::OneDay, "a2", &[])
        .build()
        .expect("fixture is valid")
}

/// Three outbound arcs toward terminals C, E and D. Commodity C (4 cubes)
/// and E (3 cubes) have a single path each; F (3 cubes) normally travels via
/// D but may ride along toward C or E. Trailers hold 5 cubes.
pub fn splitting_example() -> Instance {
    InstanceBuilder::new()
        .trailer("t5", 5.0, 5.0)
        .sort_pair("sC", &["t5"])
        .sort_pair("sE", &["t5"])
        .sort_pair("sD", &["t5"])
        .commodity("C", 4.0, ServiceClass::OneDay, "sC", &[])
        .commodity("E", 3.0, ServiceClass::OneDay, "sE", &[])
        .commodity("F", 3.0, ServiceClass::TwoDay, "sD", &[("sC", 30.0), ("sE", 30.0)])
        .build()
        .expect("fixture is valid")
}

/// Two sort pairs with 2-cube trailers, one installed on each, and 2 cubes
/// of flexible volume beyond what they hold.
pub fn two_pair_shortfall() -> Instance {
    InstanceBuilder::new()
        .trailer("t2", 2.0, 2.0)
        .sort_pair("s1", &["t2"])
        .sort_pair("s2", &["t2"])
        .commodity("k1", 2.0, ServiceClass::OneDay, "s1", &[])
        .commodity("k2", 2.0, ServiceClass::OneDay, "s2", &[])
        .commodity("k3", 2.0, ServiceClass::OneDay, "s1", &[("s2", 10.0)])
        .build()
        .expect("fixture is valid")
}
