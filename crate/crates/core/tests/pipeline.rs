use std::fs::{self, File};

use grf_core::chebyshev::{fit, select_order, DEFAULT_ORDER_CAP, DEFAULT_RATIO_TOL};
use grf_core::cholesky::Ordering;
use grf_core::mesh::{icosphere, load_obj, load_off, save_off};
use grf_core::sampler::{
    chebyshev_weight_covariance, exact_weight_covariance, sample_batch, sample_weights, write_sample_csv,
};
use grf_core::{GalerkinOperator, MassMode, PowerSpectralDensity, TriangleMesh};

fn obj_text(mesh: &TriangleMesh) -> String {
    let mut s = String::from("# icosphere\n");
    for v in mesh.vertices() {
        s += &format!("v {} {} {}\n", v[0], v[1], v[2]);
    }
    for t in mesh.triangles() {
        s += &format!("f {}/1 {}/1 {}/1\n", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

#[test]
fn mesh_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = icosphere(2).unwrap();

    let off = dir.path().join("m.off");
    save_off(&mesh, &off).unwrap();
    let back = load_off(&off).unwrap();
    assert_eq!(back.content_hash(), mesh.content_hash());

    let obj = dir.path().join("m.obj");
    fs::write(&obj, obj_text(&mesh)).unwrap();
    let back = load_obj(&obj).unwrap();
    assert_eq!(back.triangles(), mesh.triangles());
    for (a, b) in back.vertices().iter().zip(mesh.vertices()) {
        assert_eq!(a, b);
    }
}

#[test]
fn loaded_mesh_samples_like_generated_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = icosphere(2).unwrap();
    let path = dir.path().join("m.off");
    save_off(&mesh, &path).unwrap();
    let loaded = load_off(&path).unwrap();

    let psd = PowerSpectralDensity::matern_from_range(1.0, 0.5).unwrap();
    let a = GalerkinOperator::from_mesh(&mesh, MassMode::Cholesky, Ordering::Natural).unwrap();
    let b = GalerkinOperator::from_mesh(&loaded, MassMode::Cholesky, Ordering::Natural).unwrap();
    assert_eq!(a.lambda_max(), b.lambda_max());
    let order = select_order(&psd, a.lambda_max(), DEFAULT_RATIO_TOL, DEFAULT_ORDER_CAP).unwrap();
    assert!(order.converged);
    let series = fit(&psd, a.lambda_max(), order.order).unwrap();

    let batch = sample_batch(&b, &series, 5, 11, 2).unwrap();
    for (i, s) in batch.iter().enumerate() {
        let single = sample_weights(&a, &series, 11, i as u64).unwrap();
        assert_eq!(s.weights, single.weights);
    }

    let out = dir.path().join("s.csv");
    write_sample_csv(&loaded, &batch[0], File::create(&out).unwrap()).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), mesh.vertex_count() + 1);
}

#[test]
fn selected_order_reproduces_exact_covariance() {
    let mesh = icosphere(2).unwrap();
    let psd = PowerSpectralDensity::matern_from_range(1.0, 0.5).unwrap();
    for (mode, ordering) in [
        (MassMode::Cholesky, Ordering::Natural),
        (MassMode::Cholesky, Ordering::ReverseCuthillMcKee),
        (MassMode::Lumped, Ordering::Natural),
    ] {
        let op = GalerkinOperator::from_mesh(&mesh, mode, ordering).unwrap();
        let order = select_order(&psd, op.lambda_max(), DEFAULT_RATIO_TOL, DEFAULT_ORDER_CAP).unwrap();
        let series = fit(&psd, op.lambda_max(), order.order).unwrap();
        let exact = exact_weight_covariance(&op, &psd, 4000).unwrap();
        let cheb = chebyshev_weight_covariance(&op, &series, 4000).unwrap();
        let scale = exact.norm_max();
        let diff = (&exact - &cheb).norm_max();
        assert!(diff <= 1e-9 * scale, "{mode:?} {ordering:?}: {diff:e} vs {scale:e}");
    }
}
