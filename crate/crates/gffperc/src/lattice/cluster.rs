use super::Region;

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    /// Returns the new root, or `None` if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

/// Connected components of `mask` under nearest-neighbour adjacency inside `region`.
#[derive(Clone, Debug)]
pub struct Components {
    /// Component id per site, `u32::MAX` where the mask is false.
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub const CLOSED: u32 = u32::MAX;

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    pub fn members(&self, label: u32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.sizes.len()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != Self::CLOSED {
                g[l as usize].push(i);
            }
        }
        g
    }
}

pub fn label_components(region: &Region, mask: &[bool]) -> Components {
    assert_eq!(mask.len(), region.len());
    let mut uf = UnionFind::new(region.len());
    let strides = region.strides();
    let shape = region.shape();
    let d = region.dim();
    let mut coord = vec![0usize; d];
    for i in 0..region.len() {
        if mask[i] {
            // only look back along each axis; forward links are made later
            for j in 0..d {
                if coord[j] > 0 && mask[i - strides[j]] {
                    uf.union(i, i - strides[j]);
                }
            }
        }
        for j in (0..d).rev() {
            coord[j] += 1;
            if coord[j] < shape[j] {
                break;
            }
            coord[j] = 0;
        }
    }
    let mut labels = vec![Components::CLOSED; region.len()];
    let mut root_label = vec![Components::CLOSED; region.len()];
    let mut sizes = Vec::new();
    for i in 0..region.len() {
        if !mask[i] {
            continue;
        }
        let r = uf.find(i);
        if root_label[r] == Components::CLOSED {
            root_label[r] = sizes.len() as u32;
            sizes.push(0);
        }
        labels[i] = root_label[r];
        sizes[root_label[r] as usize] += 1;
    }
    Components { labels, sizes }
}

/// One cluster of a [`ClusterSet`].
#[derive(Clone, Debug)]
pub struct ClusterInfo {
    /// Sorted flat indices.
    pub members: Vec<usize>,
    /// ℓ∞ diameter.
    pub diameter: u64,
    /// Smallest [`Region::depth`] over the members.
    pub min_depth: usize,
}

impl ClusterInfo {
    pub fn touches_domain_boundary(&self) -> bool {
        self.min_depth == 0
    }

    /// The cluster reaches the shell of sites at depth `≤ margin`.
    pub fn reaches_shell(&self, margin: usize) -> bool {
        self.min_depth <= margin
    }
}

/// Nearest-neighbour components of a mask with per-cluster data.
#[derive(Clone, Debug)]
pub struct ClusterSet {
    pub region: Region,
    /// Cluster id per site, [`Components::CLOSED`] off the mask.
    pub labels: Vec<u32>,
    pub clusters: Vec<ClusterInfo>,
}

impl ClusterSet {
    pub fn label_of(&self, idx: usize) -> Option<u32> {
        let l = self.labels[idx];
        (l != Components::CLOSED).then_some(l)
    }

    pub fn vertex_set(&self, label: u32) -> super::VertexSet {
        super::VertexSet::from_indices(&self.region, self.clusters[label as usize].members.iter().copied())
    }
}

pub fn clusters(region: &Region, mask: &[bool]) -> ClusterSet {
    let comps = label_components(region, mask);
    let d = region.dim();
    let mut info: Vec<ClusterInfo> = comps
        .sizes
        .iter()
        .map(|&n| ClusterInfo { members: Vec::with_capacity(n), diameter: 0, min_depth: usize::MAX })
        .collect();
    let mut lo = vec![vec![i64::MAX; d]; info.len()];
    let mut hi = vec![vec![i64::MIN; d]; info.len()];
    let mut x = vec![0i64; d];
    for (i, &l) in comps.labels.iter().enumerate() {
        if l == Components::CLOSED {
            continue;
        }
        let c = &mut info[l as usize];
        c.members.push(i);
        c.min_depth = c.min_depth.min(region.depth(i));
        region.point_into(i, &mut x);
        for j in 0..d {
            lo[l as usize][j] = lo[l as usize][j].min(x[j]);
            hi[l as usize][j] = hi[l as usize][j].max(x[j]);
        }
    }
    for (k, c) in info.iter_mut().enumerate() {
        c.diameter = (0..d).map(|j| (hi[k][j] - lo[k][j]) as u64).max().unwrap_or(0);
    }
    ClusterSet { region: region.clone(), labels: comps.labels, clusters: info }
}

/// Result of growing the open cluster of a seed set.
#[derive(Clone, Debug)]
pub struct Flood {
    pub members: Vec<usize>,
    /// The growth met a site where `stop` returned true and was abandoned.
    pub stopped: bool,
}

/// Union of the clusters of `mask` meeting `seeds`, grown until a site with
/// `stop(site)` is reached.
pub fn flood(region: &Region, mask: &[bool], seeds: &[usize], stop: impl Fn(usize) -> bool) -> Flood {
    let mut seen = std::collections::HashSet::new();
    let mut stack = Vec::new();
    let mut members = Vec::new();
    for &s in seeds {
        if mask[s] && seen.insert(s) {
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        if stop(v) {
            return Flood { members, stopped: true };
        }
        members.push(v);
        region.for_each_neighbor(v, |w| {
            if mask[w] && seen.insert(w) {
                stack.push(w);
            }
        });
    }
    members.sort_unstable();
    Flood { members, stopped: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::VecDeque;

    /// Breadth-first labelling used as an oracle.
    fn bfs_labels(region: &Region, mask: &[bool]) -> Vec<u32> {
        let mut lab = vec![u32::MAX; region.len()];
        let mut next = 0;
        for s in 0..region.len() {
            if !mask[s] || lab[s] != u32::MAX {
                continue;
            }
            lab[s] = next;
            let mut q = VecDeque::from([s]);
            while let Some(v) = q.pop_front() {
                region.for_each_neighbor(v, |w| {
                    if mask[w] && lab[w] == u32::MAX {
                        lab[w] = next;
                        q.push_back(w);
                    }
                });
            }
            next += 1;
        }
        lab
    }

    #[test]
    fn full_box_is_one_component() {
        let r = Region::cube(3, 0, 5).unwrap();
        let c = label_components(&r, &vec![true; r.len()]);
        assert_eq!(c.sizes, vec![125]);
    }

    #[test]
    fn checkerboard_is_all_singletons() {
        let r = Region::cube(3, 0, 4).unwrap();
        let mask: Vec<bool> = (0..r.len())
            .map(|i| r.point(i).iter().sum::<i64>() % 2 == 0)
            .collect();
        let c = label_components(&r, &mask);
        assert_eq!(c.count(), 32);
        assert!(c.sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn cluster_set_reports_diameter_and_boundary_contact() {
        let r = Region::cube(3, 0, 6).unwrap();
        let cs = clusters(&r, &vec![true; r.len()]);
        assert_eq!(cs.clusters.len(), 1);
        assert_eq!(cs.clusters[0].diameter, 5);
        assert!(cs.clusters[0].touches_domain_boundary());

        let mut mask = vec![false; r.len()];
        mask[r.index(&[2, 2, 2]).unwrap()] = true;
        mask[r.index(&[3, 3, 2]).unwrap()] = true;
        let cs = clusters(&r, &mask);
        assert_eq!(cs.clusters.len(), 2);
        assert!(cs.clusters.iter().all(|c| c.diameter == 0 && c.min_depth == 2));
        assert!(!cs.clusters[0].reaches_shell(1) && cs.clusters[0].reaches_shell(2));
    }

    #[test]
    fn cluster_set_matches_bfs_at_half_density() {
        use rand::{Rng, SeedableRng};
        let r = Region::cube(3, 0, 16).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mask: Vec<bool> = (0..r.len()).map(|_| rng.random_bool(0.5)).collect();
        let cs = clusters(&r, &mask);
        let oracle = bfs_labels(&r, &mask);
        for c in &cs.clusters {
            let o = oracle[c.members[0]];
            assert!(c.members.iter().all(|&i| oracle[i] == o));
        }
        let n_oracle = oracle.iter().filter(|&&l| l != u32::MAX).max().map_or(0, |m| m + 1);
        assert_eq!(cs.clusters.len() as u32, n_oracle);
    }

    proptest! {
        #[test]
        fn union_find_matches_bfs(bits in prop::collection::vec(any::<bool>(), 6 * 5 * 4)) {
            let r = Region::new(vec![0, 0, 0], vec![6, 5, 4]).unwrap();
            let c = label_components(&r, &bits);
            let oracle = bfs_labels(&r, &bits);
            // same partition: labels agree up to renaming
            let mut map = std::collections::HashMap::new();
            for i in 0..r.len() {
                if bits[i] {
                    let e = map.entry(c.labels[i]).or_insert(oracle[i]);
                    prop_assert_eq!(*e, oracle[i]);
                }
            }
            let distinct: std::collections::HashSet<_> = map.values().collect();
            prop_assert_eq!(distinct.len(), c.count());
        }

        #[test]
        fn flood_matches_component(bits in prop::collection::vec(any::<bool>(), 64), seed in 0usize..64) {
            let r = Region::cube(2, 0, 8).unwrap();
            let c = label_components(&r, &bits);
            let f = flood(&r, &bits, &[seed], |_| false);
            if bits[seed] {
                prop_assert_eq!(f.members, c.members(c.labels[seed]));
            } else {
                prop_assert!(f.members.is_empty());
            }
        }
    }
}
