//! Compiles and runs a small C program against the generated header and the
//! static library, proving the ABI surface from the consumer side.

use std::path::PathBuf;
use std::process::Command;

const C_SOURCE: &str = r#"
#include <stdio.h>
#include <stdlib.h>
#include "forelem.h"

int main(void) {
    size_t n_edges = 0;
    if (fl_generate_graph(6, 4, 7, NULL, NULL, 0, &n_edges) != FL_OK) return 1;
    uint32_t *src = malloc(n_edges * sizeof(uint32_t));
    uint32_t *dst = malloc(n_edges * sizeof(uint32_t));
    if (fl_generate_graph(6, 4, 7, src, dst, n_edges, &n_edges) != FL_OK) return 2;

    FlPageRank *pr = fl_pagerank_new(src, dst, n_edges, 64);
    if (!pr) { fprintf(stderr, "%s\n", fl_last_error()); return 3; }
    fl_pagerank_set_epsilon(pr, 1e-10);

    FlRun *run = NULL;
    if (fl_pagerank_run(pr, "PageRank_2", 2, 2, &run) != FL_OK) {
        fprintf(stderr, "%s\n", fl_last_error());
        return 4;
    }
    size_t len = fl_run_len(run);
    double *ranks = malloc(len * sizeof(double));
    if (fl_run_ranks(run, ranks, len) != FL_OK) return 5;
    double total = 0.0;
    for (size_t i = 0; i < len; i++) total += ranks[i];
    if (total < 0.99 || total > 1.01) return 6;

    printf("ok %zu vertices, rank mass %.6f, %llu sweeps\n",
           len, total, (unsigned long long)fl_run_sweeps(run));
    fl_run_free(run);
    fl_pagerank_free(pr);
    free(ranks);
    free(src);
    free(dst);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let include = manifest.join("include");
    // the test binary lives in target/<profile>/deps; the staticlib next to
    // target/<profile>
    let mut lib_dir = PathBuf::from(std::env::current_exe().unwrap());
    lib_dir.pop(); // test binary
    lib_dir.pop(); // deps
    let lib = lib_dir.join("libforelem_capi.a");
    if !lib.exists() {
        // staticlib not produced in this invocation (e.g. doc tests); skip
        eprintln!("skipping: {} not found", lib.display());
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let c_file = dir.path().join("smoke.c");
    std::fs::write(&c_file, C_SOURCE).unwrap();
    let exe = dir.path().join("smoke");

    let compile = Command::new("cc")
        .arg(&c_file)
        .arg("-I")
        .arg(&include)
        .arg(lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .arg("-o")
        .arg(&exe)
        .output()
        .expect("cc available");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "smoke test exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("ok 64 vertices"), "unexpected output: {stdout}");
}
