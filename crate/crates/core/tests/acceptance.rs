//! Acceptance criteria 1 to 8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::time::{Duration, Instant};

use common::*;
use eqrel::amalgam::{amalgamate, amalgamate_k0, amalgamate_kp, joint_embed, AmalgamProblem, AmalgamRule};
use eqrel::eppa::{
    canonical_failure_instance, order_rigidity_violation, permorphism_search, verify_certificate, verify_eppa_failure, ColoredStructure,
    EppaCertificate, PartialMap,
};
use eqrel::generic::{check_extension_property, enumerate_members, sample_member, sample_one_point_extension, saturate, EnumerationLimits};
use eqrel::iso::{automorphisms, embeddings};
use eqrel::ramsey::{
    build_witness_b, check_no_mono, e1_classes_convex, enumeration_coloring, forbidden_triple_scan, verify_z4, z4_find, Z4Sequence,
};
use eqrel::{json, validate, ClassSpec, FinStructure};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion_1() -> Outcome {
    let spec = ClassSpec::k0(4);
    let mut counts = Vec::new();
    for s in 0..=4 {
        let found = enumerate_members(&spec, s, EnumerationLimits::default()).map_err(|e| e.to_string())?;
        let perms = permutations(s);
        let per: Vec<Vec<Vec<u32>>> = (1..=spec.tracked(s)).map(|n| set_partitions(masks(s, n).len())).collect();
        let mut oracle = BTreeSet::new();
        let mut idx = vec![0usize; per.len()];
        'outer: loop {
            let parts: Vec<Vec<u32>> = idx.iter().zip(&per).map(|(&i, p)| p[i].clone()).collect();
            oracle.insert(canonical_partitions(s, &parts, &perms));
            let mut i = 0;
            loop {
                if i == per.len() {
                    break 'outer;
                }
                idx[i] += 1;
                if idx[i] < per[i].len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
        let keys: BTreeSet<Vec<Vec<u32>>> = found.iter().map(|f| canonical_partitions(s, &partitions_of(f), &perms)).collect();
        ensure(keys.len() == found.len(), || format!("size {s}: enumeration lists isomorphic members"))?;
        ensure(keys == oracle, || format!("size {s}: {} types enumerated, oracle has {}", keys.len(), oracle.len()))?;
        for f in &found {
            for mask in 0u32..1 << s {
                let sub = f.induced(&points(mask)).map_err(|e| e.to_string())?;
                ensure(validate(&sub, &spec).ok, || format!("size {s}: induced substructure fails validation"))?;
            }
        }
        counts.push(found.len());
    }
    Ok(format!("type counts for sizes 0..=4 match brute force: {counts:?}"))
}

/// Whether `c` (with embeddings of both sides) equals the meet of all
/// partitions of the n-subsets that restrict to both sides and group the
/// crossing subsets, for every arity with at most 8 subsets.
fn finest_closure_ok(p: &AmalgamProblem, c: &FinStructure, e1: &[usize], e2: &[usize]) -> Result<usize, String> {
    let mut checked = 0;
    for n in 1..=c.tracked_arities() {
        let ms = masks(c.size(), n);
        if ms.len() > 8 {
            continue;
        }
        let side = |e: &[usize], b: &FinStructure, x: u32| -> Option<u32> {
            let pre: Option<Vec<usize>> = points(x).iter().map(|q| e.iter().position(|y| y == q)).collect();
            pre.map(|mut v| {
                v.sort_unstable();
                b.class_of_points(&v)
            })
        };
        let s1: Vec<Option<u32>> = ms.iter().map(|&x| side(e1, &p.b1, x)).collect();
        let s2: Vec<Option<u32>> = ms.iter().map(|&x| side(e2, &p.b2, x)).collect();
        let k = ms.len();
        let mut meet = vec![vec![true; k]; k];
        let mut admissible = 0;
        for pi in set_partitions(k) {
            let ok = (0..k).all(|i| {
                (0..k).all(|j| {
                    let same = pi[i] == pi[j];
                    let r1 = matches!((s1[i], s1[j]), (Some(a), Some(b)) if (a == b) != same);
                    let r2 = matches!((s2[i], s2[j]), (Some(a), Some(b)) if (a == b) != same);
                    let crossing = s1[i].is_none() && s2[i].is_none() && s1[j].is_none() && s2[j].is_none();
                    !r1 && !r2 && (!crossing || same)
                })
            });
            if ok {
                admissible += 1;
                for i in 0..k {
                    for j in 0..k {
                        meet[i][j] &= pi[i] == pi[j];
                    }
                }
            }
        }
        ensure(admissible > 0, || format!("arity {n}: no admissible partition"))?;
        for i in 0..k {
            for j in 0..k {
                let same = c.class_of_points(&points(ms[i])) == c.class_of_points(&points(ms[j]));
                ensure(same == meet[i][j], || format!("arity {n}: amalgam differs from the finest closure"))?;
            }
        }
        checked += 1;
    }
    Ok(checked)
}

fn criterion_2() -> Outcome {
    let specs = [ClassSpec::k0(4), ClassSpec::kp([3], 4).unwrap()];
    let mut r = rng(2);
    let mut oracle_arities = 0;
    let problems = 1200;
    for t in 0..problems {
        let spec = &specs[t % 2];
        let p = amalgam_problem(spec, 2, 4, &mut r);
        let rule = if t % 2 == 0 { AmalgamRule::K0 } else { AmalgamRule::Kp };
        let am = amalgamate(&p, rule).map_err(|e| format!("problem {t}: {e}"))?;
        let direct = if t % 2 == 0 { amalgamate_k0(&p) } else { amalgamate_kp(spec, &p) }.map_err(|e| e.to_string())?;
        let c = &am.structure;
        ensure(direct == *c, || format!("problem {t}: entry points disagree"))?;
        ensure(validate(c, spec).ok, || format!("problem {t}: amalgam fails validation"))?;
        ensure(c.induced(&am.embed1).ok().as_ref() == Some(&p.b1), || format!("problem {t}: B1 is not induced"))?;
        ensure(c.induced(&am.embed2).ok().as_ref() == Some(&p.b2), || format!("problem {t}: B2 is not induced"))?;
        ensure(p.glue1.iter().zip(&p.glue2).all(|(&x, &y)| am.embed1[x] == am.embed2[y]), || {
            format!("problem {t}: embeddings disagree on A")
        })?;
        if t % 2 == 0 {
            oracle_arities += finest_closure_ok(&p, c, &am.embed1, &am.embed2).map_err(|e| format!("problem {t}: {e}"))?;
        }
    }
    Ok(format!("{problems} problems sound, {oracle_arities} arities matched the finest-closure oracle"))
}

fn criterion_3() -> Outcome {
    let spec = ClassSpec::kp([3], 3).unwrap();
    let empty = FinStructure::empty(spec);
    let first = saturate(&empty, 3, 200).map_err(|e| e.to_string())?;
    ensure(first.is_certified(), || format!("budget exhausted with {} missing extensions", first.missing.len()))?;
    let report = check_extension_property(&first.structure, 3);
    ensure(report.is_empty(), || format!("{} missing extensions at k = 3", report.len()))?;
    let second = saturate(&empty, 3, 200).map_err(|e| e.to_string())?;
    ensure(json::encode(&first.structure) == json::encode(&second.structure), || "re-run differs".into())?;
    Ok(format!("certified at k = 3 with {} points, re-run byte-identical", first.structure.size()))
}

fn criterion_4() -> Outcome {
    let spec = ClassSpec::k0(2).with_point_order();
    let w = build_witness_b(&spec, 1).map_err(|e| e.to_string())?;
    let b = &w.structure;
    let mut r = rng(4);
    let mut cs = Vec::new();
    for i in 0..60 {
        let c = match i % 3 {
            0 => {
                let target = r.gen_range(7..=12);
                let mut c = b.clone();
                while c.size() < target {
                    c = sample_one_point_extension(&c, &mut r);
                }
                c
            }
            1 if i % 2 == 1 => joint_embed(&spec, b, b).map_err(|e| e.to_string())?,
            _ => {
                let k = r.gen_range(0..=5);
                let mut pts: Vec<usize> = (0..6).collect();
                pts.shuffle(&mut r);
                let mut glue: Vec<usize> = pts[..k].to_vec();
                glue.sort_unstable();
                let a = b.induced(&glue).map_err(|e| e.to_string())?;
                let mut other = b.clone();
                while other.size() + 6 - k < 12 && r.gen_bool(0.5) {
                    other = sample_one_point_extension(&other, &mut r);
                }
                let mut glue2 = glue.clone();
                if r.gen_bool(0.5) {
                    // glue along a different copy of A when one exists
                    if let Some(e) = embeddings(&a, &other).choose(&mut r) {
                        glue2 = e.clone();
                    }
                }
                let p = AmalgamProblem { a, b1: b.clone(), b2: other, glue1: glue, glue2 };
                amalgamate(&p, AmalgamRule::K0).map_err(|e| e.to_string())?.structure
            }
        };
        if c.size() <= 12 {
            cs.push(c);
        }
    }
    ensure(cs.len() >= 50, || format!("only {} structures generated", cs.len()))?;
    let mut runs = 0;
    let mut total_embeddings = 0;
    for (i, c) in cs.iter().enumerate() {
        let k = c.class_count(2) as u32;
        let mut shuffled: Vec<u32> = (0..k).collect();
        shuffled.shuffle(&mut r);
        let mut enums: Vec<Vec<u32>> = vec![(0..k).collect(), (0..k).rev().collect(), shuffled];
        enums.dedup();
        if enums.len() < 3 {
            enums.push((0..k).map(|x| (x + 1) % k).collect());
        }
        let embs = embeddings(b, c);
        ensure(!embs.is_empty(), || format!("structure {i} does not contain B"))?;
        for en in &enums {
            let coloring = enumeration_coloring(c, &w.pattern, 1, en).map_err(|e| e.to_string())?;
            let verdict = check_no_mono(c, &w, &coloring).map_err(|e| e.to_string())?;
            ensure(verdict.no_monochromatic_copy(), || format!("structure {i}: monochromatic copy {:?}", verdict.violation))?;
            ensure(verdict.embeddings_checked == embs.len(), || format!("structure {i}: embedding count mismatch"))?;
            let pos: BTreeMap<u32, usize> = en.iter().enumerate().map(|(i, &x)| (x, i)).collect();
            for e in &embs {
                let red = |copy: &[usize]| {
                    let img: Vec<usize> = copy.iter().map(|&p| e[p]).collect();
                    pos[&c.class_of_points(&[img[0], img[1]])] < pos[&c.class_of_points(&[img[2], img[3]])]
                };
                ensure(red(&w.copies[0]) != red(&w.copies[1]), || format!("structure {i}: copies share a color"))?;
            }
            runs += 1;
            total_embeddings += embs.len();
        }
    }
    Ok(format!("{} structures, {runs} colorings, {total_embeddings} embeddings of B, no monochromatic copy", cs.len()))
}

fn random_colored(r: &mut rand_chacha::ChaCha8Rng) -> ColoredStructure {
    let m = r.gen_range(1..=4);
    let base = sample_member(&ClassSpec::k0(2), m, r);
    let t = base.tracked_arities();
    let mut colors = Vec::new();
    let mut palette = Vec::new();
    for n in 1..=t {
        let k = base.class_count(n) as u32;
        let size = k + r.gen_range(0..=2);
        let mut pool: Vec<u32> = (0..size).collect();
        pool.shuffle(r);
        colors.push(pool[..k as usize].to_vec());
        palette.push(size);
    }
    ColoredStructure::new(base, colors, palette).unwrap()
}

/// A random partial map of `a` preserving colors, checked directly.
fn random_partial_iso(a: &ColoredStructure, r: &mut rand_chacha::ChaCha8Rng) -> PartialMap {
    let m = a.size();
    loop {
        let k = r.gen_range(0..=m);
        let mut dom: Vec<usize> = (0..m).collect();
        dom.shuffle(r);
        let mut img: Vec<usize> = (0..m).collect();
        img.shuffle(r);
        let pairs: Vec<(usize, usize)> = dom[..k].iter().copied().zip(img[..k].iter().copied()).collect();
        let ok = (1..=a.base().tracked_arities()).all(|n| {
            (0u32..1 << k).filter(|x| x.count_ones() as usize == n).all(|sel| {
                let mut s: Vec<usize> = points(sel).iter().map(|&i| pairs[i].0).collect();
                let mut t: Vec<usize> = points(sel).iter().map(|&i| pairs[i].1).collect();
                s.sort_unstable();
                t.sort_unstable();
                a.color_of(&s) == a.color_of(&t)
            })
        });
        if ok {
            return PartialMap::new(pairs);
        }
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let mut max_extra = 0;
    for t in 0..120 {
        let a = random_colored(&mut r);
        let maps: Vec<PartialMap> = (0..r.gen_range(1..=2)).map(|_| random_partial_iso(&a, &mut r)).collect();
        let bound = a.size() + 6;
        let cert = eqrel::eppa::eppa_search(&a, &maps, bound).map_err(|e| format!("instance {t}: {e}"))?;
        let EppaCertificate::Found { structure, extensions } = &cert else {
            return Err(format!("instance {t}: {cert:?}"));
        };
        max_extra = max_extra.max(structure.size() - a.size());
        ensure(verify_certificate(&a, &maps, &cert).unwrap_or(false), || format!("instance {t}: certificate rejected"))?;
        let autos: HashSet<Vec<usize>> = automorphisms(structure.base()).into_iter().collect();
        for (map, sigma) in maps.iter().zip(extensions) {
            ensure(autos.contains(sigma), || format!("instance {t}: extension is not an automorphism"))?;
            ensure(map.pairs.iter().all(|&(x, y)| sigma[x] == y), || format!("instance {t}: extension misses the map"))?;
            for n in 1..=structure.base().tracked_arities() {
                for mask in masks(structure.size(), n) {
                    let s = points(mask);
                    let mut img: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
                    img.sort_unstable();
                    ensure(structure.color_of(&s) == structure.color_of(&img), || format!("instance {t}: color moved"))?;
                }
            }
        }
        let with_identity: Vec<PartialMap> = maps
            .iter()
            .map(|m| {
                let chi = (1..=a.base().tracked_arities()).map(|n| (n, (0..a.palette()[n - 1]).collect())).collect();
                PartialMap::with_chi(m.pairs.clone(), chi)
            })
            .collect();
        let perm = permorphism_search(&a, &with_identity, bound).map_err(|e| e.to_string())?;
        ensure(perm == cert, || format!("instance {t}: permorphism search with identity chi disagrees"))?;
    }
    Ok(format!("120 instances found within |A| + 6 (largest extension +{max_extra} points), all re-verified"))
}

fn criterion_6() -> Outcome {
    let spec = ClassSpec::kp([3], 3).unwrap();
    let (m, witness) = canonical_failure_instance(&spec, 3).map_err(|e| e.to_string())?;
    let bound = 8;
    let fail = verify_eppa_failure(&m, &witness, bound).map_err(|e| e.to_string())?;
    ensure(fail.certified(), || format!("failure not certified: analytic {} exhaustive {}", fail.analytic, fail.exhaustive))?;

    let specs = [ClassSpec::kp([3], 3).unwrap(), ClassSpec::kp([3, 4], 4).unwrap(), ClassSpec::kp([3], 4).unwrap()];
    let mut r = rng(6);
    let mut autos = 0;
    for t in 0..500 {
        let spec = &specs[t % specs.len()];
        let f = sample_member(spec, r.gen_range(0..=6), &mut r);
        ensure(order_rigidity_violation(&f).is_none(), || format!("member {t}: rigidity violated"))?;
        for sigma in automorphisms(&f) {
            autos += 1;
            for &n in spec.ordered_arities().iter().filter(|&&n| n <= f.tracked_arities()) {
                for (class, members) in f.members(n).iter().enumerate() {
                    for s in members {
                        let mut img: Vec<usize> = s.iter().map(|&x| sigma[x]).collect();
                        img.sort_unstable();
                        ensure(f.class_of_points(&img) == class as u32, || format!("member {t}: class {class} of arity {n} moved"))?;
                    }
                }
            }
        }
    }
    Ok(format!(
        "failure certified over {} substructures (up to {bound} points beyond the witness, M has {}); 500 members, {autos} automorphisms fix every ordered class",
        fail.substructures,
        m.size()
    ))
}

/// The witness labels on 18 points with arity 6 ordered and randomly perturbed.
fn antisymmetric_variant(r: &mut rand_chacha::ChaCha8Rng) -> (FinStructure, Z4Sequence) {
    let spec = ClassSpec::kp([3, 6], 6).unwrap();
    let extra = r.gen_range(0..4u32);
    let noise = r.gen_range(0.0..0.05);
    let mut label = |k: usize, s: &[usize]| -> u32 {
        let blk = |p: usize| p / 3;
        let same = |s: &[usize]| s.iter().all(|&p| blk(p) == blk(s[0]));
        match k {
            3 if same(s) => blk(s[0]) as u32,
            3 => 6 + r.gen_range(0..=extra),
            6 if r.gen_bool(noise) => 3 + r.gen_range(0..=extra),
            6 if same(&s[..3]) && same(&s[3..]) => match (blk(s[0]), blk(s[3])) {
                (0, 1) | (4, 5) => 0,
                (2, 3) => 1,
                _ => 2,
            },
            6 => 2,
            _ => 0,
        }
    };
    let mut labels: Vec<Vec<u32>> = Vec::new();
    for n in 1..=6 {
        let mut v = vec![0; eqrel::subset::count(18, n)];
        eqrel::subset::for_each_combination(18, n, |s| v[eqrel::subset::rank(s)] = label(n, s));
        labels.push(v);
    }
    let mut orders = BTreeMap::new();
    for n in [3, 6] {
        let mut present: Vec<u32> = labels[n - 1].iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if n == 6 || r.gen_bool(0.5) {
            present.shuffle(r);
        }
        orders.insert(n, present);
    }
    let f = FinStructure::from_labels(spec, 18, labels, orders, None).unwrap();
    let mut perm: Vec<usize> = (0..18).collect();
    if r.gen_bool(0.5) {
        perm.shuffle(r);
    }
    let blocks = std::array::from_fn(|i| {
        let mut b: Vec<usize> = (3 * i..3 * i + 3).map(|p| perm[p]).collect();
        b.sort_unstable();
        b
    });
    (f.relabel(&perm).unwrap(), blocks)
}

/// The n-subsets of `m` grouped by the `<_n` rank of their class.
fn rank_groups(m: &FinStructure, n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut by_rank: BTreeMap<u32, Vec<Vec<usize>>> = BTreeMap::new();
    for mask in masks(m.size(), n) {
        let s = points(mask);
        by_rank.entry(m.order_rank(n, m.class_of_points(&s)).unwrap()).or_default().push(s);
    }
    by_rank.into_values().collect()
}

/// A random `<_n`-increasing tuple of six disjoint n-subsets, if the draw is disjoint.
fn random_increasing(groups: &[Vec<Vec<usize>>], r: &mut rand_chacha::ChaCha8Rng) -> Option<Z4Sequence> {
    if groups.len() < 6 {
        return None;
    }
    let mut picks: Vec<usize> = rand::seq::index::sample(r, groups.len(), 6).into_vec();
    picks.sort_unstable();
    let blocks: Vec<Vec<usize>> = picks.iter().map(|&g| groups[g].choose(r).unwrap().clone()).collect();
    let used: BTreeSet<usize> = blocks.iter().flatten().copied().collect();
    (used.len() == blocks.iter().map(Vec::len).sum::<usize>()).then(|| std::array::from_fn(|i| blocks[i].clone()))
}

fn criterion_7() -> Outcome {
    let spec = ClassSpec::kp([3], 6).unwrap();
    let w = build_witness_b(&spec, 3).map_err(|e| e.to_string())?;
    let planted: Z4Sequence = std::array::from_fn(|i| w.block(i));
    let found = z4_find(&w.structure, 3, None, usize::MAX).map_err(|e| e.to_string())?;
    ensure(found.contains(&planted), || "planted sequence not detected".into())?;
    ensure(verify_z4(&w.structure, &planted, None), || "planted sequence does not re-verify".into())?;
    ensure(found.iter().all(|s| verify_z4(&w.structure, s, None)), || "a reported sequence does not re-verify".into())?;

    let mut r = rng(7);
    let both = ClassSpec::kp([3, 6], 6).unwrap();
    let mut rechecked = 0;
    for t in 0..100 {
        let (m, blocks) = antisymmetric_variant(&mut r);
        ensure(validate(&m, &both).ok, || format!("structure {t} is invalid"))?;
        let z = z4_find(&m, 3, None, 1).map_err(|e| e.to_string())?;
        ensure(z.is_empty(), || format!("structure {t}: sequence {:?} reported", z[0]))?;
        ensure(!verify_z4(&m, &blocks, None), || format!("structure {t}: block sequence verifies"))?;
        let groups = rank_groups(&m, 3);
        for _ in 0..200 {
            if let Some(seq) = random_increasing(&groups, &mut r) {
                rechecked += 1;
                ensure(!verify_z4(&m, &seq, None), || format!("structure {t}: {seq:?} verifies"))?;
            }
        }
    }
    Ok(format!("planted sequence found among {} and re-verified; 100 structures with P = {{3, 6}} have none ({rechecked} increasing tuples rejected by the re-check)", found.len()))
}

fn criterion_8() -> Outcome {
    let spec = ClassSpec::k0(1).with_point_order();
    let mut checked = 0;
    let mut convex = 0;
    for m in 0..=6 {
        let orders = permutations(m);
        for part in set_partitions(m) {
            for order in &orders {
                let c = FinStructure::from_labels(
                    spec.clone(),
                    m,
                    vec![part.clone()].into_iter().filter(|_| m > 0).collect(),
                    BTreeMap::new(),
                    Some(order.clone()),
                )
                .map_err(|e| e.to_string())?;
                let seq: Vec<u32> = order.iter().map(|&p| part[p]).collect();
                let oracle = seq.iter().collect::<BTreeSet<_>>().into_iter().all(|k| {
                    let at: Vec<usize> = (0..m).filter(|&i| seq[i] == *k).collect();
                    at.last().unwrap() - at[0] + 1 == at.len()
                });
                let scan_empty = forbidden_triple_scan(&c).map_err(|e| e.to_string())?.is_empty();
                let cv = e1_classes_convex(&c).map_err(|e| e.to_string())?;
                ensure(scan_empty == cv && cv == oracle, || format!("size {m}: partition {part:?} order {order:?}"))?;
                checked += 1;
                convex += usize::from(cv);
            }
        }
    }
    Ok(format!("{checked} ordered structures on at most 6 points, {convex} convex"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("class closure and enumeration", criterion_1),
        ("amalgamation soundness", criterion_2),
        ("generic approximation", criterion_3),
        ("Ramsey counterexample", criterion_4),
        ("EPPA positive", criterion_5),
        ("EPPA negative", criterion_6),
        ("Z/4Z sequences", criterion_7),
        ("convexity equivalence", criterion_8),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let results: Vec<(usize, &str, Outcome, Duration)> = std::thread::scope(|scope| {
        let handles: Vec<_> = criteria
            .iter()
            .enumerate()
            .filter(|(i, _)| only.is_none_or(|o| o == i + 1))
            .map(|(i, &(name, f))| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
                    (i + 1, name, out, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = false;
    for (i, name, out, time) in results {
        match out {
            Ok(detail) => println!("criterion {i} ({name}): PASS [{:.1}s] {detail}", time.as_secs_f64()),
            Err(detail) => {
                failed = true;
                println!("criterion {i} ({name}): FAIL [{:.1}s] {detail}", time.as_secs_f64());
            }
        }
    }
    if failed {
        std::process::exit(1);
    }
}
