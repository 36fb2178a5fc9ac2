#include <gtest/gtest.h>

#include "mirror_splat/geometry.hpp"
#include "test_util.hpp"

using namespace mirror_splat;
using mirror_splat::testing::random_plane;
using mirror_splat::testing::random_unit;

TEST(NormalizePlane, ScalesNormalAndOffset) {
  const Plane p = normalize_plane(Plane{{0, 0, 2}, -2});
  EXPECT_EQ(p.normal, Eigen::Vector3d(0, 0, 1));
  EXPECT_EQ(p.offset, -1.0);
}

TEST(NormalizePlane, UnitPlaneUnchanged) {
  const Plane in{{0, 0, 1}, -1};
  EXPECT_EQ(normalize_plane(in), in);
}

TEST(NormalizePlane, DegenerateNormalThrows) {
  EXPECT_THROW(normalize_plane(Plane{{0, 0, 0}, 1}), InvalidPlane);
  EXPECT_THROW(normalize_plane(Plane{{1e-13, 0, 0}, 1}), InvalidPlane);
}

TEST(NormalizePlane, PreservesPointSet) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Plane raw{random_unit(rng) * rng.uniform(0.1, 10.0), rng.uniform(-5, 5)};
    const Plane unit = normalize_plane(raw);
    // A point on the raw plane stays on the normalized one.
    const Eigen::Vector3d p = -raw.offset * raw.normal / raw.normal.squaredNorm();
    EXPECT_NEAR(plane_point_residual(unit, p), 0.0, 1e-12);
  }
}

TEST(PlaneResidual, Examples) {
  EXPECT_EQ(plane_point_residual(Plane{{0, 0, 1}, -1}, Eigen::Vector3d(5, 3, 1)), 0.0);
  EXPECT_EQ(plane_point_residual(Plane{{0, 0, 1}, -1}, Eigen::Vector3d(0, 0, 3)), 2.0);
  EXPECT_EQ(plane_point_residual(Plane{{1, 0, 0}, 0}, Eigen::Vector3d(-4, 9, 9)), -4.0);
}

TEST(ReflectPoint, Examples) {
  EXPECT_EQ(reflect_point(Plane{{0, 0, 1}, 0}, Eigen::Vector3d(1, 2, 3)), Eigen::Vector3d(1, 2, -3));
  EXPECT_EQ(reflect_point(Plane{{0, 0, 1}, -1}, Eigen::Vector3d(0, 0, 0)), Eigen::Vector3d(0, 0, 2));
}

TEST(ReflectPoint, MidpointOnPlaneAndDisplacementAlongNormal) {
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const Plane plane = random_plane(rng);
    const Eigen::Vector3d p = random_unit(rng) * rng.uniform(0, 5);
    const Eigen::Vector3d q = reflect_point(plane, p);
    EXPECT_NEAR(plane_point_residual(plane, Eigen::Vector3d(0.5 * (p + q))), 0.0, 1e-12);
    EXPECT_LT((q - p).cross(plane.normal).norm(), 1e-12);
  }
}

TEST(MirrorTransform, AxisAlignedExamples) {
  Eigen::Matrix4d z = Eigen::Vector4d(1, 1, -1, 1).asDiagonal();
  Eigen::Matrix4d x = Eigen::Vector4d(-1, 1, 1, 1).asDiagonal();
  EXPECT_TRUE(mirror_transform(Plane{{0, 0, 1}, 0}).isApprox(z));
  EXPECT_TRUE(mirror_transform(Plane{{1, 0, 0}, 0}).isApprox(x));
  const Eigen::Vector4d moved = mirror_transform(Plane{{0, 0, 1}, -1}) * Eigen::Vector4d(0, 0, 0, 1);
  EXPECT_EQ(moved, Eigen::Vector4d(0, 0, 2, 1));
  // Householder path agrees.
  EXPECT_EQ(Eigen::Vector3d(moved.head<3>()),
            reflect_point(Plane{{0, 0, 1}, -1}, Eigen::Vector3d(Eigen::Vector3d::Zero())));
}

TEST(MirrorTransform, RejectsUnnormalizedPlane) {
  EXPECT_THROW(mirror_transform(Plane{{0, 0, 2}, 0}), PreconditionError);
}

TEST(MirrorTransform, AlgebraicProperties) {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const Plane plane = random_plane(rng);
    const Eigen::Matrix4d t = mirror_transform(plane);
    EXPECT_LT((t * t - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR((t.topLeftCorner<3, 3>().determinant()), -1.0, 1e-12);

    // Points on the plane are fixed.
    Eigen::Vector3d u = plane.normal.cross(random_unit(rng)).normalized();
    const Eigen::Vector3d on = -plane.offset * plane.normal + rng.uniform(-5, 5) * u;
    EXPECT_LT(((t * on.homogeneous()).head<3>() - on).norm(), 1e-10);

    // Isometry and oracle agreement.
    const Eigen::Vector3d p = random_unit(rng) * rng.uniform(0, 5);
    const Eigen::Vector3d q = random_unit(rng) * rng.uniform(0, 5);
    const Eigen::Vector3d tp = (t * p.homogeneous()).head<3>();
    const Eigen::Vector3d tq = (t * q.homogeneous()).head<3>();
    EXPECT_NEAR((tp - tq).norm(), (p - q).norm(), 1e-10);
    EXPECT_LT((tp - reflect_point(plane, p)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MirrorCamera, MovesCameraCenterByReflection) {
  const PoseTransform identity;
  const Plane plane{{0, 0, 1}, -1};
  const PoseTransform mirrored = mirror_camera(plane, identity);
  EXPECT_LT((mirrored.center() - Eigen::Vector3d(0, 0, 2)).norm(), 1e-15);
  EXPECT_LT((mirrored.center() - reflect_point(plane, identity.center())).norm(), 1e-15);
}

TEST(MirrorCamera, InvolutionAndHandedness) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Plane plane = random_plane(rng);
    const PoseTransform pose = mirror_splat::testing::random_pose(rng, rng.uniform(1, 6));
    ASSERT_NEAR(pose.handedness(), 1.0, 1e-12);
    const PoseTransform once = mirror_camera(plane, pose);
    EXPECT_TRUE(once.valid());
    EXPECT_NEAR(once.handedness(), -1.0, 1e-12);
    EXPECT_LT((once.center() - reflect_point(plane, pose.center())).norm(), 1e-10);
    const PoseTransform twice = mirror_camera(plane, once);
    EXPECT_LT((twice.world_to_camera - pose.world_to_camera).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(twice.handedness(), 1.0, 1e-12);
  }
}

namespace {

// Central-difference Jacobian of the pinhole map.
Eigen::Matrix<double, 2, 3> numeric_jacobian(const CameraModel& cam, const Eigen::Vector3d& t,
                                             double h) {
  Eigen::Matrix<double, 2, 3> j;
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d a = t, b = t;
    a[k] += h;
    b[k] -= h;
    j.col(k) = (project_point(cam, a) - project_point(cam, b)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST(ProjectGaussian, CenteredSmallGaussian) {
  const CameraModel cam = mirror_splat::testing::square_camera(100, 100.0);
  const double sigma = 0.01;
  const auto proj = project_gaussian<double>(cam, PoseTransform{}, Eigen::Vector3d(0, 0, 1),
                                             Eigen::Matrix3d::Identity() * sigma * sigma);
  ASSERT_TRUE(proj.has_value());
  EXPECT_NEAR(proj->mean2d.x(), 50.0, 1e-12);
  EXPECT_NEAR(proj->mean2d.y(), 50.0, 1e-12);
  EXPECT_NEAR(proj->view_depth, 1.0, 1e-15);
  // Oracle: finite-difference Jacobian J gives J * sigma^2 I * J^T.
  const auto j = numeric_jacobian(cam, Eigen::Vector3d(0, 0, 1), 1e-6);
  const Eigen::Matrix2d expected = j * j.transpose() * sigma * sigma;
  EXPECT_LT((proj->cov2d - expected).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(proj->cov2d(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(proj->cov2d(1, 1), 1.0, 1e-6);
  EXPECT_NEAR(proj->cov2d(0, 1), 0.0, 1e-12);
}

TEST(ProjectGaussian, CullsAtNearPlane) {
  CameraModel cam = mirror_splat::testing::square_camera(100, 100.0);
  cam.znear = 0.01;
  EXPECT_FALSE(project_gaussian<double>(cam, PoseTransform{}, Eigen::Vector3d(0, 0, 0.001),
                                        Eigen::Matrix3d::Identity() * 1e-4)
                   .has_value());
  EXPECT_FALSE(project_gaussian<double>(cam, PoseTransform{}, Eigen::Vector3d(0, 0, -2),
                                        Eigen::Matrix3d::Identity() * 1e-4)
                   .has_value());
}

TEST(ProjectGaussian, AnalyticJacobianMatchesFiniteDifferences) {
  Rng rng(8);
  const CameraModel cam = mirror_splat::testing::square_camera(64, 70.0);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Vector3d t(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 6));
    const auto analytic = perspective_jacobian(cam, t);
    const auto numeric = numeric_jacobian(cam, t, 1e-6);
    const double rel = (analytic - numeric).norm() / analytic.norm();
    EXPECT_LT(rel, 1e-6);
  }
}

TEST(ProjectGaussian, ImproperPoseEqualsReflectedScene) {
  Rng rng(21);
  const CameraModel cam = mirror_splat::testing::square_camera(64, 60.0);
  for (int i = 0; i < 200; ++i) {
    const Plane plane = random_plane(rng);
    const PoseTransform pose = mirror_splat::testing::random_pose(rng, 4.0);
    const Eigen::Vector3d mean = random_unit(rng) * rng.uniform(0, 1.5);
    const Eigen::Matrix3d a = Eigen::Matrix3d::Random() * 0.2;
    const Eigen::Matrix3d cov = a * a.transpose() + 1e-3 * Eigen::Matrix3d::Identity();
    const Eigen::Matrix3d h =
        Eigen::Matrix3d::Identity() - 2.0 * plane.normal * plane.normal.transpose();

    const auto through_mirror = project_gaussian<double>(cam, mirror_camera(plane, pose), mean, cov);
    const auto mirrored_scene =
        project_gaussian<double>(cam, pose, reflect_point(plane, mean), Eigen::Matrix3d(h * cov * h));
    ASSERT_EQ(through_mirror.has_value(), mirrored_scene.has_value());
    if (!through_mirror) continue;
    EXPECT_LT((through_mirror->mean2d - mirrored_scene->mean2d).norm(), 1e-9);
    EXPECT_LT((through_mirror->cov2d - mirrored_scene->cov2d).cwiseAbs().maxCoeff(),
              1e-9 * (1 + mirrored_scene->cov2d.norm()));
    EXPECT_NEAR(through_mirror->view_depth, mirrored_scene->view_depth, 1e-12);
  }
}
