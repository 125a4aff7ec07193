//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};

use fermentor_core::nn::{Activation, DenseNet, LayerSpec, Mode};
use fermentor_core::petri::{ArcDef, NetDefinition, PlaceDef, TransitionDef};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A net kept in plain vectors so the simulator below never touches the
/// library's firing code.
#[derive(Debug, Clone)]
pub struct RawNet {
    pub capacity: Vec<Option<u32>>,
    pub init: Vec<u32>,
    pub transitions: usize,
    pub arcs: Vec<RawArc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawArc {
    pub place: usize,
    pub transition: usize,
    pub input: bool,
    pub weight: u32,
    pub limit: Option<u32>,
}

/// Marking followed by one residual per rewritable arc, in arc order.
pub type RawState = (Vec<u32>, Vec<u32>);

impl RawNet {
    pub fn to_net(&self) -> NetDefinition {
        let places = (0..self.init.len())
            .map(|p| {
                let mut d = PlaceDef::new(format!("p{p}")).with_tokens(self.init[p]);
                if let Some(k) = self.capacity[p] {
                    d = d.with_capacity(k);
                }
                d
            })
            .collect();
        let transitions = (0..self.transitions)
            .map(|t| TransitionDef::new(format!("t{t}")))
            .collect();
        let arcs = self
            .arcs
            .iter()
            .map(|a| {
                let (p, t) = (format!("p{}", a.place), format!("t{}", a.transition));
                let mut d = if a.input { ArcDef::new(p, t) } else { ArcDef::new(t, p) };
                d = d.with_weight(a.weight);
                if let Some(l) = a.limit {
                    d = d.rewritable(l);
                }
                d
            })
            .collect();
        NetDefinition::new("raw", places, transitions, arcs).expect("generated net is valid")
    }

    pub fn rewritable(&self) -> Vec<usize> {
        (0..self.arcs.len()).filter(|&i| self.arcs[i].limit.is_some()).collect()
    }

    pub fn initial(&self) -> RawState {
        let res = self.rewritable().iter().map(|&i| self.arcs[i].limit.unwrap()).collect();
        (self.init.clone(), res)
    }

    /// Fire `t` under the rewriting semantics: arcs whose residual is 0 are
    /// ignored, every rewritable arc of `t` loses one unit (floored at 0).
    pub fn fire(&self, s: &RawState, t: usize) -> Option<RawState> {
        let rw = self.rewritable();
        let residual_of = |arc: usize| rw.iter().position(|&i| i == arc).map(|slot| s.1[slot]);
        let live = |arc: usize| residual_of(arc).is_none_or(|r| r > 0);
        let mut m = s.0.clone();
        for (i, a) in self.arcs.iter().enumerate() {
            if a.transition == t && a.input && live(i) {
                m[a.place] = m[a.place].checked_sub(a.weight)?;
            }
        }
        for (i, a) in self.arcs.iter().enumerate() {
            if a.transition == t && !a.input && live(i) {
                m[a.place] += a.weight;
                if let Some(k) = self.capacity[a.place] {
                    if m[a.place] > k {
                        return None;
                    }
                }
            }
        }
        let mut r = s.1.clone();
        for (slot, &i) in rw.iter().enumerate() {
            if self.arcs[i].transition == t {
                r[slot] = r[slot].saturating_sub(1);
            }
        }
        Some((m, r))
    }

    /// Every state reached by some firing sequence, grown one sequence length
    /// at a time until a length adds nothing new.
    pub fn brute_force_states(&self, limit: usize) -> Option<BTreeSet<RawState>> {
        let mut all = BTreeSet::new();
        all.insert(self.initial());
        let mut frontier: Vec<RawState> = vec![self.initial()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for s in &frontier {
                for t in 0..self.transitions {
                    if let Some(n) = self.fire(s, t) {
                        if all.insert(n.clone()) {
                            next.push(n);
                        }
                    }
                }
            }
            if all.len() > limit {
                return None;
            }
            frontier = next;
        }
        Some(all)
    }
}

/// Random net within the given size limits; every place gets a finite
/// capacity so the state space is finite, and every transition gets at least
/// one input and one output arc. Nets with nothing enabled initially are
/// redrawn.
pub fn random_net(rng: &mut impl Rng, max_places: usize, max_transitions: usize) -> RawNet {
    loop {
        let net = draw_net(rng, max_places, max_transitions);
        let s = net.initial();
        if (0..net.transitions).any(|t| net.fire(&s, t).is_some()) {
            return net;
        }
    }
}

fn draw_net(rng: &mut impl Rng, max_places: usize, max_transitions: usize) -> RawNet {
    let np = rng.random_range(2.min(max_places)..=max_places);
    let nt = rng.random_range(1..=max_transitions);
    let capacity: Vec<Option<u32>> = (0..np).map(|_| Some(rng.random_range(1..=3))).collect();
    let mut init: Vec<u32> = capacity.iter().map(|k| rng.random_range(0..=k.unwrap())).collect();
    if init.iter().all(|&m| m == 0) {
        init[0] = 1;
    }
    let mut arcs = Vec::new();
    let arc = |rng: &mut _, place, transition, input| RawArc {
        place,
        transition,
        input,
        weight: if Rng::random_bool(rng, 0.3) { 2 } else { 1 },
        limit: Rng::random_bool(rng, 0.4).then(|| Rng::random_range(rng, 1..=2)),
    };
    for t in 0..nt {
        let pre = rng.random_range(0..np);
        let post = rng.random_range(0..np);
        arcs.push(arc(rng, pre, t, true));
        arcs.push(arc(rng, post, t, false));
        for p in 0..np {
            for input in [true, false] {
                let taken = (input && p == pre) || (!input && p == post);
                if !taken && rng.random_bool(0.15) {
                    arcs.push(arc(rng, p, t, input));
                }
            }
        }
    }
    RawNet {
        capacity,
        init,
        transitions: nt,
        arcs,
    }
}

/// Block-structured workflow built from sequence, AND and XOR blocks and
/// loops. `defect` makes the outermost block an AND-split whose branches
/// finish through separate transitions.
pub fn random_workflow(rng: &mut impl Rng, blocks: usize, defect: bool) -> String {
    struct Gen<'a, R: Rng> {
        rng: &'a mut R,
        places: usize,
        trans: usize,
        lines: Vec<String>,
        defect: bool,
    }
    impl<R: Rng> Gen<'_, R> {
        fn place(&mut self) -> String {
            self.places += 1;
            let id = format!("q{}", self.places);
            self.lines.push(format!("place {id}"));
            id
        }
        fn trans(&mut self) -> String {
            self.trans += 1;
            let id = format!("u{}", self.trans);
            self.lines.push(format!("trans {id}"));
            id
        }
        fn arc(&mut self, a: &str, b: &str) {
            self.lines.push(format!("arc {a} -> {b}"));
        }
        /// Connect place `from` to place `to` with a block of the given size.
        fn block(&mut self, from: &str, to: &str, budget: usize) {
            let kind = if budget <= 1 {
                0
            } else if self.defect {
                2
            } else {
                self.rng.random_range(0..4)
            };
            match kind {
                0 => {
                    let t = self.trans();
                    self.arc(from, &t);
                    self.arc(&t, to);
                }
                1 => {
                    let mid = self.place();
                    let left = self.rng.random_range(1..budget);
                    self.block(from, &mid, left);
                    self.block(&mid, to, budget - left);
                }
                2 => {
                    let split = self.trans();
                    let join = self.trans();
                    self.arc(from, &split);
                    self.arc(&join, to);
                    let (a1, a2, b1, b2) = (self.place(), self.place(), self.place(), self.place());
                    for (s, e) in [(&a1, &a2), (&b1, &b2)] {
                        self.arc(&split, s);
                        self.block(s, e, (budget - 1) / 2 + 1);
                    }
                    if self.defect {
                        self.defect = false;
                        let other = self.trans();
                        self.arc(&a2, &join);
                        self.arc(&b2, &other);
                        self.arc(&other, to);
                    } else {
                        self.arc(&a2, &join);
                        self.arc(&b2, &join);
                    }
                }
                _ => {
                    if self.rng.random_bool(0.5) {
                        self.block(from, to, budget - 1);
                        self.block(from, to, 1);
                    } else {
                        let mid = self.place();
                        let enter = self.trans();
                        let leave = self.trans();
                        let back = self.trans();
                        self.arc(from, &enter);
                        self.arc(&enter, &mid);
                        self.arc(&mid, &leave);
                        self.arc(&leave, to);
                        self.arc(&mid, &back);
                        self.arc(&back, &mid);
                    }
                }
            }
        }
    }
    let mut g = Gen {
        rng,
        places: 0,
        trans: 0,
        lines: vec!["net random".into(), "place start init 1".into(), "place end".into()],
        defect,
    };
    g.block("start", "end", blocks);
    g.lines.join("\n") + "\n"
}

/// Transitive closure restricted to `keep`, computed by BFS from each kept
/// node.
pub fn reach_matrix(n: usize, edges: &[(usize, usize)], keep: &[usize]) -> Vec<Vec<bool>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
    }
    keep.iter()
        .map(|&s| {
            let mut seen = vec![false; n];
            let mut q = VecDeque::from([s]);
            seen[s] = true;
            while let Some(x) = q.pop_front() {
                for &y in &adj[x] {
                    if !seen[y] {
                        seen[y] = true;
                        q.push_back(y);
                    }
                }
            }
            keep.iter().map(|&k| seen[k]).collect()
        })
        .collect()
}

/// Minimal DOT checker for the subset the library emits: one digraph with
/// attribute, node and edge statements, each terminated by `;`, and edge
/// endpoints declared as nodes. Returns the node and edge counts.
pub fn check_dot(text: &str) -> Result<(usize, usize), String> {
    fn skip_quoted(s: &str) -> Result<(String, &str), String> {
        let mut out = String::new();
        let mut chars = s.char_indices();
        match chars.next() {
            Some((_, '"')) => {}
            _ => return Err(format!("expected quote in {s:?}")),
        }
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    let (_, e) = chars.next().ok_or("dangling escape")?;
                    out.push(e);
                }
                '"' => return Ok((out, &s[i + 1..])),
                _ => out.push(c),
            }
        }
        Err("unterminated string".into())
    }
    fn attrs(s: &str) -> Result<&str, String> {
        let s = s.trim_start();
        let Some(mut rest) = s.strip_prefix('[') else {
            return Ok(s);
        };
        loop {
            rest = rest.trim_start();
            if let Some(r) = rest.strip_prefix(']') {
                return Ok(r);
            }
            let key_end = rest.find('=').ok_or("attribute without =")?;
            let key = rest[..key_end].trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(format!("bad attribute key {key:?}"));
            }
            rest = rest[key_end + 1..].trim_start();
            if rest.starts_with('"') {
                rest = skip_quoted(rest)?.1;
            } else {
                let end = rest.find([',', ']']).ok_or("unterminated attribute list")?;
                if rest[..end].trim().is_empty() {
                    return Err("empty attribute value".into());
                }
                rest = &rest[end..];
            }
            rest = rest.trim_start();
            if let Some(r) = rest.strip_prefix(',') {
                rest = r;
            }
        }
    }
    let ident = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');

    let body = text.trim();
    let rest = body.strip_prefix("digraph").ok_or("missing digraph")?.trim_start();
    let rest = if rest.starts_with('"') {
        skip_quoted(rest)?.1
    } else {
        rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric() || c == '_')
    };
    let rest = rest.trim_start().strip_prefix('{').ok_or("missing {")?;
    let inner = rest.trim_end().strip_suffix('}').ok_or("missing closing }")?;

    let mut nodes = HashSet::new();
    let mut edges = Vec::new();
    for line in inner.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let stmt = line
            .strip_suffix(';')
            .ok_or_else(|| format!("statement without ; {line:?}"))?;
        if let Some(a) = stmt.strip_prefix("node ") {
            if !attrs(a)?.trim().is_empty() {
                return Err(format!("trailing text in {line:?}"));
            }
            continue;
        }
        if let Some((k, v)) = stmt.split_once('=') {
            if ident(k.trim()) && !stmt.contains('[') && !v.trim().is_empty() {
                continue;
            }
        }
        let id_end = stmt
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(stmt.len());
        let id = &stmt[..id_end];
        if !ident(id) {
            return Err(format!("bad node id in {line:?}"));
        }
        let after = stmt[id_end..].trim_start();
        if let Some(r) = after.strip_prefix("->") {
            let r = r.trim_start();
            let end = r
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                .unwrap_or(r.len());
            let to = &r[..end];
            if !ident(to) {
                return Err(format!("bad edge target in {line:?}"));
            }
            if !attrs(&r[end..])?.trim().is_empty() {
                return Err(format!("trailing text in {line:?}"));
            }
            edges.push((id.to_string(), to.to_string()));
        } else {
            if !attrs(after)?.trim().is_empty() {
                return Err(format!("trailing text in {line:?}"));
            }
            nodes.insert(id.to_string());
        }
    }
    for (a, b) in &edges {
        if !nodes.contains(a) || !nodes.contains(b) {
            return Err(format!("edge {a} -> {b} uses an undeclared node"));
        }
    }
    Ok((nodes.len(), edges.len()))
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

fn random_spec(rng: &mut impl Rng) -> Vec<LayerSpec> {
    let acts = [
        Activation::Identity,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::UnitTanh,
    ];
    let depth = rng.random_range(1..=3);
    let mut dims = vec![rng.random_range(1..=5)];
    for _ in 0..depth {
        dims.push(rng.random_range(1..=5));
    }
    (0..depth)
        .map(|i| {
            LayerSpec::new(dims[i], dims[i + 1], acts[rng.random_range(0..acts.len())])
                .with_batch_norm(i + 1 < depth && rng.random_bool(0.5))
        })
        .collect()
}

/// Weighted output sum, so the upstream gradient is the weight matrix.
fn probe_loss(net: &DenseNet, x: &Array2<f64>, r: &Array2<f64>) -> f64 {
    let (out, _) = net.forward_cached(x, Mode::Train).unwrap();
    (&out * r).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Compare backward against central differences for every parameter and
/// input of a random net. Returns the largest relative error.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let spec = random_spec(&mut rng);
    let mut net = DenseNet::init(&spec, seed).unwrap();
    let batch = rng.random_range(3..=7);
    let x = random_matrix(&mut rng, batch, spec[0].in_dim);
    let r = random_matrix(&mut rng, batch, spec.last().unwrap().out_dim);

    let (_, cache) = net.forward_cached(&x, Mode::Train).unwrap();
    let grads = net.backward(&cache, &r).unwrap();
    let analytic = grads.flat();

    let mut numeric = Vec::new();
    let sizes: Vec<usize> = net.parameters_mut().iter().map(|p| p.len()).collect();
    for (block, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let orig = net.parameters_mut()[block][k];
            net.parameters_mut()[block][k] = orig + h;
            let up = probe_loss(&net, &x, &r);
            net.parameters_mut()[block][k] = orig - h;
            let down = probe_loss(&net, &x, &r);
            net.parameters_mut()[block][k] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, n)| rel_err(*a, *n))
        .fold(0.0, f64::max);
    for ((row, col), a) in grads.input.indexed_iter() {
        let mut xp = x.clone();
        xp[[row, col]] += h;
        let mut xm = x.clone();
        xm[[row, col]] -= h;
        let n = (probe_loss(&net, &xp, &r) - probe_loss(&net, &xm, &r)) / (2.0 * h);
        worst = worst.max(rel_err(*a, n));
    }
    worst
}

/// Index of the first real row within `tau` of `row`, by mean squared
/// difference.
pub fn first_match(row: &[f64], real: &Array2<f64>, tau: f64) -> Option<usize> {
    real.rows().into_iter().position(|r| {
        let d = row.iter().zip(r.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / row.len() as f64;
        d <= tau
    })
}
