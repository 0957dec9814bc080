use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lfci_core::citest::write_data_csv;
use lfci_core::fixtures;
use lfci_core::mixed_graph::{parse_graph, serialize_graph};
use lfci_core::sem::{random_sem, sample};
use lfci_core::MixedGraph;
use tempfile::TempDir;

fn lfci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfci")).args(args).output().expect("run lfci")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_graph(dir: &Path, name: &str, g: &MixedGraph) -> String {
    let path = dir.join(name);
    let labels = g.labels().map(|l| format!("# labels: {}\n", l.join(","))).unwrap_or_default();
    fs::write(&path, labels + &serialize_graph(g)).unwrap();
    path.to_str().unwrap().to_string()
}

fn write_data(dir: &Path, g: &MixedGraph, n: usize, seed: u64) -> String {
    let model = random_sem(g, 0.5, 1.0, (1.0, 2.0), seed).unwrap();
    let data = sample(&model, n, seed + 1).unwrap();
    let labels: Vec<String> = (0..g.n_nodes()).map(|k| format!("x{k}")).collect();
    let path = dir.join(format!("data{seed}.csv"));
    write_data_csv(fs::File::create(&path).unwrap(), &labels, &data).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_out(path: &Path) -> MixedGraph {
    parse_graph(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn learn_on_independent_noise_gives_empty_graph() {
    let dir = TempDir::new().unwrap();
    let data = write_data(dir.path(), &MixedGraph::new(3), 2000, 1);
    let out = dir.path().join("pag.txt");
    let o = lfci(&["learn", &data, "--alpha", "1e-3", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let g = read_out(&out);
    assert_eq!((g.n_nodes(), g.n_edges()), (3, 0));
    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pag.txt.stats.json")).unwrap()).unwrap();
    for key in ["n_tests", "m_reach", "runtime_ms"] {
        assert!(stats.get(key).is_some_and(|v| v.is_u64()), "{key} missing: {stats}");
    }
}

#[test]
fn learn_recovers_chain_skeleton() {
    let dir = TempDir::new().unwrap();
    let chain = MixedGraph::from_directed(3, [(0, 1), (1, 2)]).unwrap();
    let mut hits = 0;
    for seed in 0..20 {
        let data = write_data(dir.path(), &chain, 5000, 10 * seed);
        let out = dir.path().join(format!("chain{seed}.txt"));
        let o = lfci(&["learn", &data, "--alpha", "1e-3", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        if read_out(&out).skeleton() == chain.skeleton() {
            hits += 1;
        }
    }
    assert!(hits >= 19, "chain skeleton recovered in {hits}/20 runs");
}

#[test]
fn learn_alpha_extremes() {
    let dir = TempDir::new().unwrap();
    let chain = MixedGraph::from_directed(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
    let data = write_data(dir.path(), &chain, 500, 3);
    let out = dir.path().join("g.txt");
    let run = |alpha: &str| {
        let o = lfci(&["learn", &data, "--algo", "pc", "--alpha", alpha, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        read_out(&out).n_edges()
    };
    assert_eq!(run("1e-300"), 0);
    assert!(run("0.999999") >= 5);
}

#[test]
fn learn_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&lfci(&["learn", "does-not-exist.csv"])), 2);
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n3,oops\n").unwrap();
    assert_eq!(code(&lfci(&["learn", bad.to_str().unwrap()])), 2);
    assert_eq!(code(&lfci(&["learn", bad.to_str().unwrap(), "--algo", "nope"])), 2);
}

#[test]
fn learn_reports_tester_failure() {
    let dir = TempDir::new().unwrap();
    // a duplicated column makes the conditioning block singular
    let path = dir.path().join("dup.csv");
    let mut text = String::from("a,b,c\n");
    for k in 0..50 {
        let x = (k as f64 * 0.37).sin();
        let y = (k as f64 * 1.91).cos();
        text.push_str(&format!("{x},{x},{y}\n"));
    }
    fs::write(&path, text).unwrap();
    let o = lfci(&["learn", path.to_str().unwrap(), "--alpha", "0.5"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn oracle_recovers_search_pool_graph_skeleton() {
    let dir = TempDir::new().unwrap();
    let (g, _) = fixtures::search_pool_graph();
    let file = write_graph(dir.path(), "mag.txt", &g);
    let out = dir.path().join("est.txt");
    for gamma in ["3", "4"] {
        let o = lfci(&["oracle", &file, "--eta", "2", "--gamma", gamma, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(read_out(&out).skeleton(), g.skeleton());
        let truth = read_out(&dir.path().join("est.txt.true_pag"));
        assert_eq!(truth.skeleton(), g.skeleton());
    }
}

#[test]
fn oracle_rejects_non_maximal_graph() {
    let dir = TempDir::new().unwrap();
    let (g, _) = fixtures::non_maximal_graph();
    let o = lfci(&["oracle", &write_graph(dir.path(), "nm.txt", &g)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    let cyclic = dir.path().join("cyc.txt");
    fs::write(&cyclic, "p=3\n0 --> 1\n1 --> 2\n2 --> 0\n").unwrap();
    assert_eq!(code(&lfci(&["oracle", cyclic.to_str().unwrap()])), 4);
}

#[test]
fn oracle_diff_shows_local_orientation_loss() {
    let dir = TempDir::new().unwrap();
    let (g, _) = fixtures::discriminating_path_graph();
    let file = write_graph(dir.path(), "dp.txt", &g);
    let o = lfci(&["oracle", &file, "--gamma", "5", "--eta", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("estimated y o-> j | truth y --> j"), "{err}");
    let o = lfci(&["oracle", &file, "--algo", "fci"]);
    assert!(stderr(&o).contains("0 edge(s) differ"), "{}", stderr(&o));
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_smoke() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.cfg",
        "family=er\np=12\nn=200\nreplicates=1\nseed=4\nalpha_grid=1e-3,1e-2\nmethods=pc,lfci\n",
    );
    let out = dir.path().join("out");
    let o = lfci(&["simulate", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("pr.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "family,p,method,alpha,precision_mean,recall_mean,replicates");
    assert_eq!(lines.len(), 1 + 2 * 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("pr.csv: 4 rows"));
}

#[test]
fn bench_oracle_recovers_everything_on_small_instances() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bench.cfg",
        "family=er,ws\np=15\nreplicates=3\nseed=8\ngamma=6\neta=3\nmethods=fci,lfci\n",
    );
    let out = dir.path().join("out");
    let o = lfci(&["bench", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("oracle.csv")).unwrap();
    let mut rows = csv.lines();
    let header: Vec<&str> = rows.next().unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "recovered_frac").unwrap();
    let fracs: Vec<f64> = rows.map(|r| r.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(fracs.len(), 4);
    assert!(fracs.iter().all(|&f| f == 1.0), "{csv}");
}

#[test]
fn probe_min_gamma_grows_with_p() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "probe.cfg",
        "family=er\np=20,200\nreplicates=20\nseed=5\ngamma=5\nprobe_weights=uniform:-10:10\n",
    );
    let out = dir.path().join("out");
    let o = lfci(&["probe", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("min_gamma.csv")).unwrap();
    let mut by_p: Vec<(usize, Vec<usize>)> = vec![(20, vec![]), (200, vec![])];
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let p: usize = f[1].parse().unwrap();
        by_p.iter_mut().find(|(q, _)| *q == p).unwrap().1.push(f[3].parse().unwrap());
    }
    let med = |v: &mut Vec<usize>| {
        v.sort_unstable();
        v[v.len() / 2]
    };
    let (small, large) = (med(&mut by_p[0].1), med(&mut by_p[1].1));
    assert!(small <= large, "{small} > {large}");
    assert!(fs::read_to_string(out.join("moral.csv")).unwrap().starts_with("family,p,gamma,equal_frac\n"));
}

#[test]
fn harness_config_errors_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    for body in ["bogus=1\n", "p=abc\n", "family=martian\n", "gamma=0\n"] {
        let cfg = write_config(dir.path(), "bad.cfg", body);
        assert_eq!(code(&lfci(&["bench", &cfg, "--out", out.to_str().unwrap()])), 2, "{body}");
    }
    assert_eq!(code(&lfci(&["simulate", "missing.cfg"])), 2);
    let big = write_config(dir.path(), "big.cfg", "p=60\nn=100\nmethods=fci\nseed=1\n");
    assert_eq!(code(&lfci(&["simulate", &big, "--out", out.to_str().unwrap()])), 2);
}

#[test]
fn harness_is_deterministic_given_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "family=pl\np=12\nreplicates=2\nmethods=lfci\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = lfci(&["bench", &cfg, "--seed", "77", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(!stderr(&o).contains("seed:"));
    }
    assert_eq!(fs::read(a.join("oracle.csv")).unwrap(), fs::read(b.join("oracle.csv")).unwrap());
    let o = lfci(&["bench", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("seed: "), "{}", stderr(&o));
}

#[test]
fn threads_flag_and_env() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.cfg", "p=10\nreplicates=2\nseed=1\nmethods=lfci\n");
    let out = dir.path().join("o");
    assert_eq!(code(&lfci(&["--threads", "2", "bench", &cfg, "--out", out.to_str().unwrap()])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_lfci"))
        .env("LFCI_THREADS", "1")
        .args(["bench", &cfg, "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}
