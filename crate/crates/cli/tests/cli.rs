use std::io::{Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use qcoin_netplay::frame::{encode_frame, Message};

fn qcoin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcoin"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn field<'a>(csv: &'a str, column: &str) -> &'a str {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[header.iter().position(|h| *h == column).unwrap()]
}

#[test]
fn analyze_prints_closed_forms() {
    let o = qcoin(&["analyze"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("P_A(45°)=0.926777"), "{s}");
    assert!(s.contains("P_B(45°)=0.853553"), "{s}");
    assert!(s.contains("fair φ=36.8699°"), "{s}");
    assert!(s.contains("phi_deg,V,pA,pB,pstar_honest,pstar_cheat_alice,pstar_cheat_bob"));
    assert!(
        s.contains("36.8699,0.96,0.894000,0.884000,0.010000,0.106000,0.116000"),
        "{s}"
    );
}

#[test]
fn honest_run_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "seed = 5\n[protocol]\nstates = \"fair\"\n[source]\nvisibility = 0.96\n[stop]\ncount = 80000\n",
    );
    let d = dir.path().to_str().unwrap();
    let mut outputs = Vec::new();
    for i in 0..2 {
        let rec = format!("{d}/r{i}.jsonl");
        let sum = format!("{d}/s{i}.csv");
        let o = qcoin(&["run", &cfg, "--records", &rec, "--summary", &sum]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(&rec).unwrap(),
            std::fs::read_to_string(&sum).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let summary = &outputs[0].1;
    let pstar: f64 = field(summary, "pstar").parse().unwrap();
    assert!(pstar < 0.02, "{pstar}");
    assert_eq!(field(summary, "n"), "80000");
    assert_eq!(field(summary, "seed"), "5");
    assert_eq!(outputs[0].0.iter().filter(|&&b| b == b'\n').count(), 80000);
}

#[test]
fn seed_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[stop]\ncount = 10\n");
    let o = qcoin(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = qcoin(&["run", &cfg, "--seed", "77"]);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "seed"), "77");
    let o = qcoin(&["run", &cfg, "--seed-from-entropy"]);
    assert!(o.status.success());
    assert!(field(&stdout(&o), "seed").parse::<u64>().is_ok());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(
        dir.path(),
        "u.toml",
        "seed = 1\n[stop]\ncount = 3\ntypo = 1\n",
    );
    let o = qcoin(&["run", &unknown]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo"));
    let bad_eta = write(
        dir.path(),
        "e.toml",
        "seed = 1\n[channel]\neta = 1.5\n[stop]\ncount = 3\n",
    );
    assert_eq!(qcoin(&["run", &bad_eta]).status.code(), Some(2));
    assert_eq!(qcoin(&["run", "/nonexistent.toml"]).status.code(), Some(2));
    assert_eq!(
        qcoin(&["sweep", "--seed", "1", "--profile", "x/y"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_cells_in_order_and_deterministic() {
    let args = [
        "sweep",
        "--seed",
        "3",
        "--phi",
        "bb84,fair",
        "--visibility",
        "1,0.9",
        "--eta",
        "1,0.5",
        "--profile",
        "honest/honest,honest/cheating",
        "--count",
        "500",
    ];
    let a = qcoin(&args);
    let b = qcoin(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 16);
    assert!(rows[..8].iter().all(|r| r[0] == "45"));
    assert_eq!(
        (rows[0][1], rows[0][2], rows[0][3]),
        ("1", "1", "honest/honest")
    );
    assert_eq!(
        (rows[1][1], rows[1][2], rows[1][3]),
        ("1", "1", "honest/cheating")
    );
    assert_eq!((rows[2][1], rows[2][2]), ("1", "0.5"));
    assert_eq!(rows[4][1], "0.9");
    let seeds: std::collections::HashSet<&str> = rows.iter().map(|r| r[12]).collect();
    assert_eq!(seeds.len(), 16);
}

#[test]
fn fig3_preset() {
    let o = qcoin(&[
        "sweep", "--preset", "fig3", "--seed", "1", "--count", "20000",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let profiles: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap())
        .collect();
    assert_eq!(
        profiles,
        ["honest/honest", "cheating/honest", "honest/cheating"]
    );
}

#[test]
fn protocol_error_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 1\n[stop]\ncount = 3\n");
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server = std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let mut head = [0u8; 4];
        s.read_exact(&mut head).unwrap();
        let mut body = vec![0u8; u32::from_le_bytes(head) as usize];
        s.read_exact(&mut body).unwrap();
        s.write_all(&encode_frame(&Message::BBit { b: 0 })).unwrap();
        // Keep the socket open until the client gives up.
        let _ = s.read(&mut [0u8; 64]);
    });
    let o = qcoin(&["play-bob", &cfg, "--connect", &addr]);
    assert_eq!(
        o.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    server.join().unwrap();
}

#[test]
fn networked_roles_match_local_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "seed = 9\n[protocol]\nstates = \"fair\"\n[profile]\nbob = \"cheating\"\n[channel]\neta = 0.3\n[stop]\ncount = 2000\n",
    );
    let probe = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = probe.local_addr().unwrap().to_string();
    drop(probe);
    let d = dir.path().to_str().unwrap();
    let net = format!("{d}/net.jsonl");
    let mut referee = Command::new(env!("CARGO_BIN_EXE_qcoin"))
        .args([
            "referee",
            "--listen",
            &addr,
            "--sessions",
            "1",
            "--records",
            &net,
        ])
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    // Wait for the listener.
    let mut stderr = referee.stderr.take().unwrap();
    let mut buf = [0u8; 64];
    let _ = stderr.read(&mut buf).unwrap();
    let (c1, a1) = (cfg.clone(), addr.clone());
    let alice = std::thread::spawn(move || qcoin(&["play-alice", &c1, "--connect", &a1]));
    let bob = qcoin(&["play-bob", &cfg, "--connect", &addr]);
    let alice = alice.join().unwrap();
    assert!(alice.status.success() && bob.status.success());
    assert_eq!(alice.stdout, bob.stdout);
    let out = referee.wait_with_output().unwrap();
    assert!(out.status.success());

    let local = format!("{d}/local.jsonl");
    let local_sum = qcoin(&["run", &cfg, "--records", &local]);
    assert_eq!(std::fs::read(&net).unwrap(), std::fs::read(&local).unwrap());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), stdout(&local_sum));
}
