//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::{metric, record, run_ok, Server};
use half::f16;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spherelight::client::PipelineConfig;
use spherelight::codec::{decode, encode, SH_PACKET_LEN};
use spherelight::estimator::project_sh;
use spherelight::replay::scene::Ramp;
use spherelight::replay::{record_synthetic, replay, EdgeClient, ReplayConfig, Scenario, SyntheticScene};
use spherelight::sampling::{
    backproject, completeness_entropy, farthest_point_downsample, sphere_sample, translate_to,
    uniform_random_downsample, UnitSphereCloud,
};
use spherelight::sphere::{AccelerationGrid, AnchorSet};
use spherelight::trigger::{should_trigger, TriggerConfig};
use spherelight::Vec3;
use spherelight_edge::{HttpEdge, InProcessEdge, SessionStore};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn uniform_direction(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn mismatch() -> Outcome {
    let args = |grid: &'static str| ["eval-mismatch", "--anchors", "1280", "--grid", grid, "--points", "1000000", "--cube", "10"];
    let start = Instant::now();
    let base = metric(&run_ok(&args("1024x512")), "mismatch_rate").ok_or("no mismatch_rate")?;
    let secs = start.elapsed().as_secs_f64();
    let doubled = metric(&run_ok(&args("2048x1024")), "mismatch_rate").ok_or("no mismatch_rate")?;
    check(base <= 0.035, format!("mismatch {base:.4} > 0.035"))?;
    check(doubled <= base + 0.002, format!("doubled grid {doubled:.4} > {base:.4} + 0.002"))?;
    check(secs <= 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("mismatch {base:.4}, doubled grid {doubled:.4}, {secs:.1}s"))
}

fn encoding() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let n = rng.gen_range(2..=4096);
        let density: f64 = rng.gen();
        let mut c = UnitSphereCloud::empty(n);
        for i in 0..n {
            if rng.gen_bool(density) {
                c.set(i, [rng.gen(), rng.gen(), rng.gen()], rng.gen_range(0.01..60.0));
            }
        }
        let len = encode(&c).map_err(|e| e.to_string())?.len();
        check(len == 10 + 7 * c.initialized_count(), format!("size {len} for {} entries", c.initialized_count()))?;
    }

    let golden = include_bytes!("data/golden_packet.bin");
    let mut c = UnitSphereCloud::empty(5);
    c.set(1, [1.0, 0.0, 0.5], 1.5);
    c.set(4, [0.2, 0.4, 0.6], 2.25);
    check(encode(&c).unwrap() == golden, "golden bytes differ")?;

    for _ in 0..200 {
        let n = rng.gen_range(2..=1280);
        let mut c = UnitSphereCloud::empty(n);
        for i in 0..n {
            if rng.gen_bool(0.5) {
                let color = [0; 3].map(|_| rng.gen::<u8>() as f32 / 255.0);
                c.set(i, color, f16::from_bits(rng.gen_range(0x0400..0x7bff)).to_f32());
            }
        }
        check(decode(&encode(&c).unwrap()).unwrap() == c, "fixed-point round trip not exact")?;
    }
    Ok("size law on 1000 clouds, golden layout, exact fixed-point round trip".into())
}

fn entropy() -> Outcome {
    let single = completeness_entropy(&vec![Vec3::new(0.1, 0.2, 0.97); 1000]).unwrap();
    check((single - 12f64.log2()).abs() <= 1e-9, format!("single-direction entropy {single}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let uniform: Vec<Vec3> = (0..1_000_000).map(|_| uniform_direction(&mut rng)).collect();
    let h = completeness_entropy(&uniform).unwrap();
    check((h - 10.085).abs() <= 0.05, format!("uniform entropy {h:.4}"))?;

    let anchors = AnchorSet::generate(1280, 15).unwrap();
    let grid = AccelerationGrid::build(&anchors, 1024, 512).unwrap();
    let mut wins = 0;
    for seed in 0..100u64 {
        let scene = SyntheticScene::random(7000 + seed);
        let f = spherelight::replay::render_frame(&scene, 0).unwrap();
        let cloud = backproject(&f.rgb, &f.depth, &scene.intrinsics, &f.pose).unwrap();
        let cloud = translate_to(&cloud, &scene.estimation_positions[0]);
        let s = sphere_sample(&cloud, &anchors, &grid).unwrap();
        let k = s.initialized_count();
        let ours = completeness_entropy(&s.initialized_directions(&anchors)).unwrap();
        let origin = Vec3::zeros();
        let random = completeness_entropy(&uniform_random_downsample(&cloud, k, seed).unwrap().directions_from(&origin));
        let fps = completeness_entropy(&farthest_point_downsample(&cloud, k).unwrap().directions_from(&origin));
        if ours >= random.unwrap() && ours >= fps.unwrap() {
            wins += 1;
        }
    }
    check(wins >= 95, format!("sphere sampling led on {wins}/100 scenes"))?;
    Ok(format!("single {single:.9}, uniform {h:.4}, ordering held on {wins}/100 scenes"))
}

fn projector() -> Outcome {
    let anchors = AnchorSet::lattice(1280).unwrap();
    let fill = |f: &dyn Fn(&Vec3) -> [f32; 3]| {
        let mut c = UnitSphereCloud::empty(1280);
        for i in 0..1280 {
            c.set(i, f(&anchors.direction(i)), 1.0);
        }
        c
    };
    let white = project_sh(&fill(&|_| [1.0; 3]), &anchors).unwrap();
    for ch in 0..3 {
        check((white.get(ch, 0) - 3.5449).abs() <= 0.02, format!("c00 {}", white.get(ch, 0)))?;
        for k in 1..9 {
            check(white.get(ch, k).abs() <= 0.02, format!("c[{ch}][{k}] = {}", white.get(ch, k)))?;
        }
    }

    // Brute-force projection of a clamped cosine lobe, written from the
    // Cartesian SH formulas.
    let n = Vec3::new(-0.4, 0.7, 0.2).normalize();
    let lobe = |d: &Vec3| d.dot(&n).max(0.0);
    let ours = project_sh(&fill(&|d| [lobe(d) as f32; 3]), &anchors).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples = 1_000_000;
    let mut reference = [0.0; 9];
    for _ in 0..samples {
        let d = uniform_direction(&mut rng);
        let (x, y, z) = (d.x, d.y, d.z);
        let y_lm = [
            0.282095,
            0.488603 * y,
            0.488603 * z,
            0.488603 * x,
            1.092548 * x * y,
            1.092548 * y * z,
            0.315392 * (3.0 * z * z - 1.0),
            1.092548 * x * z,
            0.546274 * (x * x - y * y),
        ];
        for k in 0..9 {
            reference[k] += lobe(&d) * y_lm[k];
        }
    }
    let mut sq = 0.0;
    for ch in 0..3 {
        for (k, r) in reference.iter().enumerate() {
            sq += (ours.get(ch, k) - r * 4.0 * PI / samples as f64).powi(2);
        }
    }
    let rmse = (sq / 27.0).sqrt();
    check(rmse <= 1e-2, format!("clamped cosine rmse {rmse}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<[f32; 3]> = (0..1280).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let b: Vec<[f32; 3]> = (0..1280).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let by_index = |f: &dyn Fn(usize) -> [f32; 3]| {
        let mut c = UnitSphereCloud::empty(1280);
        for i in 0..1280 {
            c.set(i, f(i), 1.0);
        }
        project_sh(&c, &anchors).unwrap()
    };
    let (pa, pb) = (by_index(&|i| a[i]), by_index(&|i| b[i]));
    let mix = by_index(&|i| [0, 1, 2].map(|k| 0.5 * a[i][k] + 0.25 * b[i][k]));
    let half = by_index(&|i| a[i].map(|v| v * 0.5));
    for k in 0..27 {
        let lin = 0.5 * pa.values()[k] + 0.25 * pb.values()[k];
        check((mix.values()[k] - lin).abs() <= 1e-6, "linearity")?;
        check((half.values()[k] - 0.5 * pa.values()[k]).abs() <= 1e-6, "scale covariance")?;
    }
    Ok(format!("c00 {:.4}, clamped cosine rmse {rmse:.2e}, linear to 1e-6", white.get(0, 0)))
}

fn trigger() -> Outcome {
    let anchors = AnchorSet::generate(512, 15).unwrap();
    let n = anchors.len();
    let filled = |color: [f32; 3]| {
        let mut c = UnitSphereCloud::empty(n);
        for i in 0..n {
            c.set(i, color, 1.0);
        }
        c
    };
    let decide = |a: &UnitSphereCloud, b: &UnitSphereCloud, theta: f64, window: usize| {
        should_trigger(a, b, &anchors, &TriggerConfig::new(theta, window).unwrap()).unwrap().trigger
    };
    let grey = filled([0.5; 3]);
    check(!decide(&grey, &grey, 0.0, 4), "identical clouds triggered")?;
    let (black, white) = (filled([0.0; 3]), filled([1.0; 3]));
    for theta in [0.0, 0.3, 0.6, 0.99] {
        check(decide(&white, &black, theta, 4), format!("global change silent at {theta}"))?;
    }
    let mut one = black.clone();
    one.set(100, [1.0; 3], 1.0);
    check(!decide(&one, &black, 0.6, 4), "single anchor fired at N=4")?;
    check(decide(&one, &black, 0.6, 1), "single anchor silent at N=1")?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random_cloud = |rng: &mut ChaCha8Rng| {
        let mut c = UnitSphereCloud::empty(n);
        for i in 0..n {
            if rng.gen_bool(0.8) {
                c.set(i, [rng.gen(), rng.gen(), rng.gen()], 1.0);
            }
        }
        c
    };
    for _ in 0..1000 {
        let (a, b) = (random_cloud(&mut rng), random_cloud(&mut rng));
        let (t1, t2): (f64, f64) = (rng.gen(), rng.gen());
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let window = rng.gen_range(1..=16);
        check(!decide(&a, &b, hi, window) || decide(&a, &b, lo, window), format!("not monotone at {lo} < {hi}"))?;
    }
    Ok("unit cases and monotonicity over 1000 random pairs".into())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    record("r1", 300, dir.path());
    let csv = dir.path().join("report.csv");
    let out = run_ok(&[
        "replay",
        "--recording",
        dir.path().to_str().unwrap(),
        "--in-process",
        "--theta",
        "0.6",
        "--window",
        "4",
        "--anchors",
        "1280",
        "--grid",
        "1024x512",
        "--report",
        csv.to_str().unwrap(),
        "--compare-baseline",
    ]);
    let report = std::fs::read_to_string(&csv).unwrap();
    let row = report.lines().nth(1).ok_or("empty report")?;
    let header: Vec<&str> = report.lines().next().unwrap().split(',').collect();
    let col = |name: &str| -> f64 {
        let i = header.iter().position(|h| *h == name).expect("column");
        row.split(',').nth(i).unwrap().parse().unwrap()
    };
    let triggered = col("triggered_pct");
    let rmse: f64 = out
        .lines()
        .find_map(|l| l.trim().strip_prefix("rmse vs every-frame baseline "))
        .and_then(|v| v.split_whitespace().next())
        .ok_or("no baseline rmse in output")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    check(triggered <= 5.0, format!("triggered {triggered}%"))?;
    check(rmse <= 0.05, format!("rmse vs baseline {rmse}"))?;

    // Static scene through the real edge store.
    let mut scene = SyntheticScene::lab(Scenario::R1, 30);
    scene.temperature = Ramp::constant(5000.0);
    scene.estimation_positions.push(scene.estimation_positions[0] + Vec3::new(0.3, 0.0, 0.0));
    let rec = record_synthetic(&scene, 1280).unwrap();
    let anchors = Arc::new(AnchorSet::generate(1280, 15).unwrap());
    let grid = Arc::new(AccelerationGrid::build(&anchors, 1024, 512).unwrap());
    let config = ReplayConfig {
        pipeline: PipelineConfig { trigger: TriggerConfig::new(0.6, 4).unwrap(), ..Default::default() },
        anchors,
        grid,
        ground_truth: false,
    };
    let mut edge = InProcessEdge::new(Arc::new(SessionStore::default()));
    let report = replay(&rec, &mut edge, &config).unwrap();
    for p in &report.positions {
        check(p.triggered == 1, format!("static position {} triggered {} times", p.position_id, p.triggered))?;
    }
    Ok(format!("R1 triggered {triggered:.2}%, rmse vs every-frame {rmse:.4}, static scene once per position"))
}

fn service() -> Outcome {
    let server = Server::start();
    let mut edge = HttpEdge::new(&server.url);
    let session = edge.create_session(1280).map_err(|e| e.to_string())?;
    let positions: Vec<u32> =
        (0..8).map(|i| edge.register_position(&session, Vec3::new(i as f64, 1.0, 1.0)).unwrap()).collect();
    let d = edge.join_session(&session).map_err(|e| e.to_string())?;
    check(d.anchor_count == 1280 && d.positions.len() == 8, "descriptor")?;

    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |pid: u32, body: &[u8]| {
        let url = format!("{}/sessions/{session}/positions/{pid}/estimate", server.url);
        let mut r = agent.post(url).header("content-type", "application/octet-stream").send(body).unwrap();
        (r.status().as_u16(), r.body_mut().read_to_vec().unwrap())
    };

    let violations = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|s| {
        for (t, &pid) in positions.iter().enumerate() {
            let (post, violations) = (&post, &violations);
            s.spawn(move || {
                let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
                for _ in 0..10 {
                    let mut c = UnitSphereCloud::empty(1280);
                    let start = rng.gen_range(0..1200);
                    for i in start..start + 80 {
                        c.set(i, [rng.gen(), rng.gen(), rng.gen()], 1.0);
                    }
                    let (status, body) = post(pid, &encode(&c).unwrap());
                    if status != 200 || body.len() != SH_PACKET_LEN {
                        violations.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                }
            });
        }
        let mut last = [0usize; 8];
        for _ in 0..50 {
            let d = HttpEdge::new(&server.url).join_session(&session).unwrap();
            for (i, p) in d.positions.iter().enumerate() {
                if p.initialized < last[i] {
                    violations.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
                last[i] = p.initialized;
            }
        }
    });
    check(violations.into_inner() == 0, "non-108-octet success, failed request or non-monotone count")?;

    let before = edge.join_session(&session).unwrap();
    let mut bad = encode(&UnitSphereCloud::empty(1280)).unwrap();
    bad[4] = 9;
    let mut truncated = {
        let mut c = UnitSphereCloud::empty(1280);
        c.set(3, [1.0; 3], 1.0);
        encode(&c).unwrap()
    };
    truncated.pop();
    let statuses: BTreeSet<u16> = [bad, truncated, b"junk".to_vec()].iter().map(|p| post(positions[0], p).0).collect();
    check(statuses == BTreeSet::from([422]), format!("malformed packets answered {statuses:?}"))?;
    check(post(99, &[]).0 == 404, "unknown position")?;
    let after = edge.join_session(&session).unwrap();
    check(before == after, "malformed requests mutated state")?;
    Ok("loopback flow, 8 concurrent clients monotone, 108-octet responses, malformed packets rejected".into())
}

fn latency() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    record("r3", 120, dir.path());
    let out = run_ok(&["bench-pipeline", "--recording", dir.path().to_str().unwrap()]);
    let (w, h) = (metric(&out, "width"), metric(&out, "height"));
    check(w == Some(256.0) && h == Some(192.0), format!("frame size {w:?}x{h:?}"))?;
    let p95 = metric(&out, "frame_p95_ms").ok_or("no frame_p95_ms")?;
    check(p95 <= 33.0, format!("p95 {p95:.2} ms"))?;
    Ok(format!("256x192 per-frame p95 {p95:.2} ms"))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("1 mismatch rate", mismatch),
        ("2 encoding size law", encoding),
        ("3 entropy closed forms and ordering", entropy),
        ("4 SH projector vs oracle", projector),
        ("5 trigger suite", trigger),
        ("6 end-to-end replay", end_to_end),
        ("7 service conformance", service),
        ("8 desk-scale latency", latency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {name}: {detail} ({secs:.1}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} ({secs:.1}s)");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
