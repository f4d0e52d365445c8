use std::process::Command;

fn main() {
    // Source revision baked into run manifests. Builds outside a repository
    // record "unknown" rather than failing.
    let revision = Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string());
    println!("cargo:rustc-env=CBN_REVISION={revision}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
