use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use biofilm_fv_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bfv_last_error_message()) }.to_string_lossy().into_owned()
}

fn top() -> CString {
    CString::new("y == 1").unwrap()
}

#[test]
fn solver_round_trip() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(bfv_mesh_interval(20, 0, &mut mesh), BfvStatus::Ok);
        assert_eq!(bfv_mesh_n_cells(mesh), 20);
        assert_eq!(bfv_mesh_xi(mesh), 0.5);
        let mut centers = vec![0.0; 40];
        assert_eq!(bfv_mesh_cell_centers(mesh, centers.as_mut_ptr(), 40), BfvStatus::Ok);
        assert_eq!(centers[0], 0.025);

        let alphas = [1.0, 1.0];
        let mut model = ptr::null_mut();
        assert_eq!(bfv_model_builtin(2, alphas.as_ptr(), 2, &mut model), BfvStatus::Ok);
        let mut g = 0.0;
        assert_eq!(bfv_model_g(model, 0.5, &mut g), BfvStatus::Ok);
        assert!((g - 1.0).abs() < 1e-15);

        let u_d = [0.1, 0.1];
        let initial: Vec<f64> = (0..40).map(|k| if (8..20).contains(&k) { 0.2 } else { 0.1 }).collect();
        let mut opts = bfv_newton_options_default();
        opts.adaptive = false;
        opts.dt_init = 1e-4;
        opts.dt_min = 1e-4;
        opts.dt_max = 1e-4;
        let mut solver = ptr::null_mut();
        assert_eq!(
            bfv_solver_new(mesh, model, u_d.as_ptr(), initial.as_ptr(), opts, &mut solver),
            BfvStatus::Ok
        );
        bfv_mesh_free(mesh);
        bfv_model_free(model);

        let (mut h0, mut h1) = (0.0, 0.0);
        assert_eq!(bfv_solver_entropy(solver, &mut h0), BfvStatus::Ok);
        assert_eq!(bfv_solver_advance(solver, 1e-3), BfvStatus::Ok);
        assert_eq!(bfv_solver_entropy(solver, &mut h1), BfvStatus::Ok);
        assert!(h1 < h0);
        assert!((bfv_solver_time(solver) - 1e-3).abs() < 1e-15);
        let mut u = vec![0.0; 40];
        assert_eq!(bfv_solver_state(solver, u.as_mut_ptr(), 40), BfvStatus::Ok);
        assert!(u.chunks(2).all(|c| c[0] >= 0.0 && c[0] + c[1] <= 0.4 + 1e-12));
        assert_eq!(bfv_solver_state(solver, u.as_mut_ptr(), 39), BfvStatus::InvalidArgument);
        assert_eq!(bfv_solver_advance(solver, 0.0), BfvStatus::InvalidArgument);
        bfv_solver_free(solver);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut mesh = ptr::null_mut();
        assert_eq!(bfv_mesh_interval(20, 7, &mut mesh), BfvStatus::InvalidArgument);
        assert!(last_error().contains("dirichlet_side"));
        assert_eq!(bfv_mesh_interval(20, 0, ptr::null_mut()), BfvStatus::NullPointer);
        assert_eq!(bfv_mesh_rectangle(4, 4, ptr::null(), &mut mesh), BfvStatus::NullPointer);

        // two right triangles
        let xy = [0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let tri = [0u32, 1, 2, 0, 2, 3];
        let st = bfv_mesh_triangles(xy.as_ptr(), 4, tri.as_ptr(), 2, top().as_ptr(), &mut mesh);
        assert_eq!(st, BfvStatus::Mesh);
        assert!(last_error().contains("inadmissible"));

        let bad = CString::new("z == 1").unwrap();
        assert_eq!(bfv_mesh_rectangle(4, 4, bad.as_ptr(), &mut mesh), BfvStatus::Config);

        let mut model = ptr::null_mut();
        assert_eq!(bfv_model_builtin(3, [1.0].as_ptr(), 1, &mut model), BfvStatus::InvalidArgument);
        assert_eq!(bfv_model_builtin(1, [1.0, -1.0].as_ptr(), 2, &mut model), BfvStatus::Config);
        assert_eq!(bfv_model_builtin(1, [1.0, 1.0].as_ptr(), 2, &mut model), BfvStatus::Ok);
        assert!(last_error().is_empty());
        let mut g = 0.0;
        assert_eq!(bfv_model_g(model, 1.5, &mut g), BfvStatus::Config);

        assert_eq!(bfv_mesh_rectangle(3, 3, top().as_ptr(), &mut mesh), BfvStatus::Ok);
        let mut solver = ptr::null_mut();
        let opts = bfv_newton_options_default();
        let saturated = [0.6, 0.5];
        let initial = [0.1; 18];
        assert_eq!(
            bfv_solver_new(mesh, model, saturated.as_ptr(), initial.as_ptr(), opts, &mut solver),
            BfvStatus::Config
        );
        assert!(solver.is_null());
        assert_eq!(bfv_mesh_n_cells(ptr::null()), 0);
        assert!(bfv_solver_time(ptr::null()).is_nan());
        bfv_mesh_free(mesh);
        bfv_model_free(model);
        bfv_solver_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/biofilm_fv.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "typedef struct BfvSolver BfvSolver;",
        "BFV_STATUS_MESH = 4",
        "enum BfvStatus bfv_solver_advance(struct BfvSolver *solver, double t_end);",
        "const char *bfv_last_error_message(void);",
        "size_t bfv_mesh_n_cells(const struct BfvMesh *mesh);",
    ] {
        assert!(text.contains(name), "header lacks `{name}`");
    }
}

// Compiles and runs a C program against the header and the static library
// when a C compiler is available.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libbiofilm_fv_ffi.a");
    if !lib.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no static library or C compiler");
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok 0.1.0"));
}
