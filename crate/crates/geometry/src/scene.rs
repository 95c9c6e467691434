use crate::{GeometryError, Result};
use nalgebra::Vector3;

/// Two cameras observing a point that sits off the plane inducing a
/// homography, expressed in the frame of camera A (A at the origin).
///
/// `plane_normal` is the unit normal pointing from the plane toward the side
/// holding the point; the plane itself passes through `point - height * n`.
/// In a valid configuration both cameras sit on that same side, farther from
/// the plane than the point.
#[derive(Clone, Copy, Debug)]
pub struct CameraScene {
    plane_normal: Vector3<f64>,
    point: Vector3<f64>,
    height: f64,
    camera_b: Vector3<f64>,
    focal_px: f64,
}

/// Everything the error analysis computes for one scene: the world-space
/// error vector, its image-plane projection, and the named intermediates of
/// the bound derivation.
#[derive(Clone, Copy, Debug)]
pub struct BoundDiagnostics {
    /// World-space displacement between the two plane intersections.
    pub error_world: Vector3<f64>,
    /// Pixel distance between the projections of the two intersections in
    /// camera A, optical axis aimed at the point.
    pub error_px: f64,
    /// ratio |x2| |cos theta| / |v|; infinite for coincident cameras.
    pub m_ratio: f64,
    /// 1 / (m_ratio - cos beta).
    pub q_factor: f64,
    /// h / (|x2| cos theta).
    pub z_factor: f64,
    /// Cosine of the viewing angle between camera-to-point direction and the
    /// downward plane normal; non-negative in valid scenes.
    pub cos_theta: f64,
    /// Cosine of the angle between the camera baseline and the downward
    /// plane normal.
    pub cos_beta: f64,
    /// Camera A's distance from the plane (h + |x2| cos theta).
    pub gamma: f64,
    /// In-plane positions of the camera projections, relative to the foot of
    /// the off-plane point.
    pub p_a: Vector3<f64>,
    pub p_b: Vector3<f64>,
    /// Signed camera-to-plane distances.
    pub l_a: f64,
    pub l_b: f64,
}

/// Result of evaluating the error bound's preconditions on one scene.
#[derive(Clone, Copy, Debug)]
pub struct ObservationCheck {
    /// The two stated preconditions: |x2| >= 2|v| / |cos theta| and |x2| > h.
    pub preconditions_hold: bool,
    /// Conditions under which `error <= 2h` actually follows from the
    /// error formula: |x2| |cos theta| >= 2 |v| and cos theta >= 1/2
    /// (then `error <= h / cos theta <= 2h`).
    pub strict_preconditions_hold: bool,
    pub error_norm: f64,
    pub bound: f64,
}

const DEGENERACY_MARGIN: f64 = 1e-9;

impl CameraScene {
    /// Builds a scene in camera-A coordinates.
    pub fn new(
        plane_normal: Vector3<f64>,
        point: Vector3<f64>,
        height: f64,
        camera_b: Vector3<f64>,
        focal_px: f64,
    ) -> Result<Self> {
        let norm = plane_normal.norm();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(GeometryError::Degenerate("zero plane normal".into()));
        }
        if !(height.is_finite() && height >= 0.0) {
            return Err(GeometryError::Degenerate(format!(
                "plane distance must be finite and >= 0, got {height}"
            )));
        }
        if !(focal_px.is_finite() && focal_px > 0.0) {
            return Err(GeometryError::Degenerate(format!(
                "focal length must be positive, got {focal_px}"
            )));
        }
        if point.iter().chain(camera_b.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::Degenerate("non-finite coordinates".into()));
        }
        Ok(Self {
            plane_normal: plane_normal / norm,
            point,
            height,
            camera_b,
            focal_px,
        })
    }

    /// Convenience constructor from absolute world coordinates; converts to
    /// the camera-A frame and orients the normal toward the point's side.
    pub fn from_world(
        plane_normal: Vector3<f64>,
        plane_point: Vector3<f64>,
        point: Vector3<f64>,
        camera_a: Vector3<f64>,
        camera_b: Vector3<f64>,
        focal_px: f64,
    ) -> Result<Self> {
        let norm = plane_normal.norm();
        if norm < 1e-12 {
            return Err(GeometryError::Degenerate("zero plane normal".into()));
        }
        let mut n = plane_normal / norm;
        let mut h = (point - plane_point).dot(&n);
        if h < 0.0 {
            n = -n;
            h = -h;
        }
        Self::new(n, point - camera_a, h, camera_b - camera_a, focal_px)
    }

    pub fn plane_normal(&self) -> Vector3<f64> {
        self.plane_normal
    }
    pub fn point(&self) -> Vector3<f64> {
        self.point
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn camera_b(&self) -> Vector3<f64> {
        self.camera_b
    }
    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    /// Point on the plane directly below the off-plane point.
    pub fn foot_point(&self) -> Vector3<f64> {
        self.point - self.plane_normal * self.height
    }

    /// Signed distance of camera A from the plane, positive on the point's
    /// side.
    pub fn camera_a_plane_distance(&self) -> f64 {
        self.height - self.point.dot(&self.plane_normal)
    }

    /// Signed distance of camera B from the plane.
    pub fn camera_b_plane_distance(&self) -> f64 {
        self.height - (self.point - self.camera_b).dot(&self.plane_normal)
    }

    /// Cosine of the angle between the camera-to-point direction and the
    /// downward normal; positive when the camera looks down at the point.
    pub fn cos_theta(&self) -> f64 {
        let n = self.point.norm();
        if n < 1e-300 {
            return 0.0;
        }
        -self.point.dot(&self.plane_normal) / n
    }

    fn scale(&self) -> f64 {
        1.0f64
            .max(self.point.norm())
            .max(self.camera_b.norm())
            .max(self.height)
    }
}

/// Intersection of the ray from `origin` through `target` with the scene
/// plane; the independent oracle against which both closed forms are checked.
pub fn ray_plane_oracle(scene: &CameraScene) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let n = scene.plane_normal();
    let foot = scene.foot_point();
    let intersect = |origin: Vector3<f64>, target: Vector3<f64>| -> Result<Vector3<f64>> {
        let dir = target - origin;
        let denom = dir.dot(&n);
        if denom.abs() <= DEGENERACY_MARGIN * dir.norm().max(1.0) {
            return Err(GeometryError::Degenerate(
                "viewing ray parallel to the plane".into(),
            ));
        }
        let s = (foot - origin).dot(&n) / denom;
        Ok(origin + dir * s)
    };
    let from_a = intersect(Vector3::zeros(), scene.point())?;
    let from_b = intersect(scene.camera_b(), scene.point())?;
    Ok((from_a, from_b))
}

fn diagnostics_from_error(scene: &CameraScene, error_world: Vector3<f64>) -> BoundDiagnostics {
    let n = scene.plane_normal();
    let x2 = scene.point();
    let v = scene.camera_b();
    let h = scene.height();
    let foot = scene.foot_point();

    let l_a = scene.camera_a_plane_distance();
    let l_b = scene.camera_b_plane_distance();
    let cos_theta = scene.cos_theta();
    let v_norm = v.norm();
    let cos_beta = if v_norm < 1e-300 {
        0.0
    } else {
        -v.dot(&n) / v_norm
    };
    let m_ratio = if v_norm < 1e-300 {
        f64::INFINITY
    } else {
        x2.norm() * cos_theta.abs() / v_norm
    };
    let q_factor = 1.0 / (m_ratio - cos_beta);
    let z_denom = x2.norm() * cos_theta;
    let z_factor = if z_denom.abs() < 1e-300 {
        f64::INFINITY
    } else {
        h / z_denom
    };
    let gamma = h + x2.norm() * cos_theta;

    // In-plane camera projections relative to the foot of the point.
    let project = |p: Vector3<f64>| p - (p - foot).dot(&n) * n - foot;
    let p_a = project(Vector3::zeros());
    let p_b = project(v);

    BoundDiagnostics {
        error_world,
        error_px: reprojection_px(scene, error_world),
        m_ratio,
        q_factor,
        z_factor,
        cos_theta,
        cos_beta,
        gamma,
        p_a,
        p_b,
        l_a,
        l_b,
    }
}

/// Pixel distance, in camera A with the optical axis aimed at the point,
/// between the projections of the two plane intersections. Zero exactly when
/// the world-space error is zero.
fn reprojection_px(scene: &CameraScene, error_world: Vector3<f64>) -> f64 {
    if error_world.norm() == 0.0 {
        return 0.0;
    }
    let Ok((from_a, from_b)) = ray_plane_oracle(scene) else {
        return f64::NAN;
    };
    let axis = scene.point().norm();
    if axis < 1e-300 {
        return f64::NAN;
    }
    let z_cam = scene.point() / axis;
    let helper = if z_cam.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let x_cam = z_cam.cross(&helper).normalize();
    let y_cam = z_cam.cross(&x_cam);
    let project = |p: Vector3<f64>| -> Option<[f64; 2]> {
        let depth = p.dot(&z_cam);
        if depth <= 1e-12 {
            return None;
        }
        Some([
            scene.focal_px() * p.dot(&x_cam) / depth,
            scene.focal_px() * p.dot(&y_cam) / depth,
        ])
    };
    match (project(from_a), project(from_b)) {
        (Some(a), Some(b)) => ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt(),
        _ => f64::NAN,
    }
}

/// World-space error via the plane-frame relation
/// `e_w = h (p_b / (L_b - h) - p_a / (L_a - h))`.
///
/// Requires both cameras farther from the plane than the point (`L > h`).
pub fn metric_error_plane_frame(scene: &CameraScene) -> Result<BoundDiagnostics> {
    let h = scene.height();
    let l_a = scene.camera_a_plane_distance();
    let l_b = scene.camera_b_plane_distance();
    let margin = DEGENERACY_MARGIN * scene.scale();
    if (l_a - h).abs() <= margin || (l_b - h).abs() <= margin {
        return Err(GeometryError::Degenerate(format!(
            "camera at the point's plane distance (L_a = {l_a}, L_b = {l_b}, h = {h})"
        )));
    }
    let n = scene.plane_normal();
    let foot = scene.foot_point();
    let project = |p: Vector3<f64>| p - (p - foot).dot(&n) * n - foot;
    let p_a = project(Vector3::zeros());
    let p_b = project(scene.camera_b());
    let error = (p_b / (l_b - h) - p_a / (l_a - h)) * h;
    Ok(diagnostics_from_error(scene, error))
}

/// World-space error expressed directly in camera-A quantities:
/// `e_w = h ((x2 - v) / ((x2 - v) . n) - x2 / (x2 . n))`.
///
/// Algebraically identical to the plane-frame relation; both h and v appear
/// as multiplicative factors, so the error vanishes with either.
pub fn metric_error_camera_frame(scene: &CameraScene) -> Result<BoundDiagnostics> {
    let n = scene.plane_normal();
    let x2 = scene.point();
    let v = scene.camera_b();
    let h = scene.height();
    let c = x2.dot(&n);
    let d = (x2 - v).dot(&n);
    let margin = DEGENERACY_MARGIN * scene.scale();
    if c.abs() <= margin || d.abs() <= margin {
        return Err(GeometryError::Degenerate(format!(
            "viewing ray parallel to the plane (x2.n = {c}, (x2-v).n = {d})"
        )));
    }
    let error = ((x2 - v) / d - x2 / c) * h;
    Ok(diagnostics_from_error(scene, error))
}

/// Evaluates the `|e_w| <= 2h` bound and its preconditions on one scene.
///
/// `preconditions_hold` follows the stated conditions
/// (`|x2| >= 2|v|/|cos theta|` and `|x2| > h`). Those are not sufficient:
/// grazing views (small `cos theta`) can push the error far beyond `2h`
/// while satisfying both. `strict_preconditions_hold` adds the viewing-angle
/// requirement (`cos theta >= 1/2`) under which the bound provably follows
/// from the error formula.
pub fn check_bound_observation1(scene: &CameraScene) -> ObservationCheck {
    let x2_norm = scene.point().norm();
    let v_norm = scene.camera_b().norm();
    let cos_theta = scene.cos_theta();
    let h = scene.height();

    let first = if v_norm == 0.0 {
        true
    } else if cos_theta.abs() < 1e-300 {
        false
    } else {
        x2_norm >= 2.0 * v_norm / cos_theta.abs()
    };
    let preconditions_hold = first && x2_norm > h;
    let strict_preconditions_hold = first && cos_theta >= 0.5;

    let error_norm = metric_error_camera_frame(scene)
        .map(|d| d.error_world.norm())
        .unwrap_or(f64::NAN);
    ObservationCheck {
        preconditions_hold,
        strict_preconditions_hold,
        error_norm,
        bound: 2.0 * h,
    }
}

/// Upper bound on the pixel projection of the metric error:
/// `2 f h / (h + |x2| cos theta)`, at most `2f` whenever `cos theta >= 0`.
pub fn projection_error_bound(scene: &CameraScene) -> f64 {
    let h = scene.height();
    let denom = h + scene.point().norm() * scene.cos_theta();
    if denom.abs() < 1e-300 {
        // Point on the plane under a grazing view; the error itself is zero.
        return 0.0;
    }
    2.0 * scene.focal_px() * h / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Plane z = 0, x2 = (0,0,1), A = (-1,0,2), B = (1,0,2).
    fn symmetric_scene() -> CameraScene {
        CameraScene::from_world(
            Vector3::z(),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(-1.0, 0.0, 2.0),
            Vector3::new(1.0, 0.0, 2.0),
            350.0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_scene_error_matches_ray_oracle() {
        let scene = symmetric_scene();
        let (a, b) = ray_plane_oracle(&scene).unwrap();
        let expected = a - b;
        // Hand-derived: rays hit the plane at (1,0,0) and (-1,0,0) world,
        // so the error is (2,0,0) with norm equal to 2h.
        assert_abs_diff_eq!(expected.norm(), 2.0, epsilon = 1e-12);

        let plane = metric_error_plane_frame(&scene).unwrap();
        let camera = metric_error_camera_frame(&scene).unwrap();
        assert_abs_diff_eq!((plane.error_world - expected).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((camera.error_world - expected).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn point_on_plane_gives_zero_error() {
        let scene = CameraScene::from_world(
            Vector3::z(),
            Vector3::zeros(),
            Vector3::new(0.3, -0.2, 0.0),
            Vector3::new(-1.0, 0.5, 2.0),
            Vector3::new(1.0, -0.5, 3.0),
            350.0,
        )
        .unwrap();
        assert_eq!(scene.height(), 0.0);
        let d = metric_error_plane_frame(&scene).unwrap();
        assert_eq!(d.error_world.norm(), 0.0);
        let d = metric_error_camera_frame(&scene).unwrap();
        assert_eq!(d.error_world.norm(), 0.0);
    }

    #[test]
    fn coincident_cameras_give_zero_error() {
        let scene = CameraScene::new(
            Vector3::z(),
            Vector3::new(2.0, 1.0, -1.0),
            0.7,
            Vector3::zeros(),
            350.0,
        )
        .unwrap();
        let d = metric_error_camera_frame(&scene).unwrap();
        assert_abs_diff_eq!(d.error_world.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn error_scales_linearly_to_zero_with_height() {
        let base = |h: f64| {
            CameraScene::from_world(
                Vector3::z(),
                Vector3::zeros(),
                Vector3::new(3.0, 1.0, h),
                Vector3::new(0.0, 0.0, 4.0),
                Vector3::new(1.0, 1.0, 5.0),
                350.0,
            )
            .unwrap()
        };
        let e1 = metric_error_camera_frame(&base(0.5)).unwrap().error_world;
        let e2 = metric_error_camera_frame(&base(0.05)).unwrap().error_world;
        assert!(e2.norm() < e1.norm() / 5.0);
    }

    #[test]
    fn camera_at_point_height_is_rejected() {
        let scene = CameraScene::from_world(
            Vector3::z(),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(-3.0, 0.0, 1.0),
            Vector3::new(3.0, 0.0, 2.0),
            350.0,
        )
        .unwrap();
        assert!(metric_error_plane_frame(&scene).is_err());
    }

    #[test]
    fn symmetric_scene_fails_preconditions() {
        // |x2 - A| = sqrt(2), |v| = 2, cos theta = 1/sqrt(2):
        // 2|v|/|cos theta| = 5.66 > sqrt(2), so no claim is made.
        let check = check_bound_observation1(&symmetric_scene());
        assert!(!check.preconditions_hold);
    }

    #[test]
    fn overhead_scene_satisfies_preconditions_and_bound() {
        // Nearly overhead view: x2 ten units below A, small baseline.
        let scene = CameraScene::new(
            Vector3::z(),
            Vector3::new(1.0, 0.0, -10.0),
            1.0,
            Vector3::new(1.0, 0.3, 0.2),
            350.0,
        )
        .unwrap();
        let check = check_bound_observation1(&scene);
        assert!(check.preconditions_hold);
        assert!(check.strict_preconditions_hold);
        assert!(check.error_norm <= check.bound * (1.0 + 1e-12));
    }

    #[test]
    fn grazing_scene_violates_stated_bound() {
        // Cameras slightly above the point's height, far to the side, tiny
        // baseline: the stated preconditions hold but the world error is an
        // order of magnitude beyond 2h. Verified against the ray oracle.
        let scene = CameraScene::from_world(
            Vector3::z(),
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(50.0, 0.0, 1.5),
            Vector3::new(50.0, 0.1, 1.4),
            350.0,
        )
        .unwrap();
        let check = check_bound_observation1(&scene);
        assert!(check.preconditions_hold);
        assert!(!check.strict_preconditions_hold);
        assert!(check.error_norm > check.bound, "error {}", check.error_norm);

        let (a, b) = ray_plane_oracle(&scene).unwrap();
        assert_abs_diff_eq!((a - b).norm(), check.error_norm, epsilon = 1e-9);
    }

    #[test]
    fn projection_bound_examples() {
        // cos theta = 0 -> 2f.
        let grazing = CameraScene::new(
            Vector3::z(),
            Vector3::new(5.0, 0.0, 0.0),
            1.0,
            Vector3::new(0.1, 0.0, 0.0),
            350.0,
        )
        .unwrap();
        assert_abs_diff_eq!(projection_error_bound(&grazing), 700.0, epsilon = 1e-9);

        // f = 350, theta = pi/3, |x2| = 3h -> 2*350 / (1 + 1.5) = 280.
        let theta = std::f64::consts::FRAC_PI_3;
        let scene = CameraScene::new(
            Vector3::z(),
            Vector3::new(3.0 * theta.sin(), 0.0, -3.0 * theta.cos()),
            1.0,
            Vector3::new(0.1, 0.0, 0.0),
            350.0,
        )
        .unwrap();
        assert_abs_diff_eq!(scene.cos_theta(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(projection_error_bound(&scene), 280.0, epsilon = 1e-9);

        // Distance growing relative to h drives the bound to zero.
        let far = CameraScene::new(
            Vector3::z(),
            Vector3::new(0.0, 0.0, -1e9),
            1.0,
            Vector3::new(0.1, 0.0, 0.0),
            350.0,
        )
        .unwrap();
        assert!(projection_error_bound(&far) < 1e-5);
    }

    #[test]
    fn zero_height_bound_is_trivially_tight() {
        let scene = CameraScene::new(
            Vector3::z(),
            Vector3::new(1.0, 0.0, -5.0),
            0.0,
            Vector3::new(0.2, 0.0, 0.0),
            350.0,
        )
        .unwrap();
        let check = check_bound_observation1(&scene);
        assert_eq!(check.bound, 0.0);
        assert_abs_diff_eq!(check.error_norm, 0.0, epsilon = 1e-15);
    }
}
