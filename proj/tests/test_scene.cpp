#include "pags/quaternion.hpp"
#include "pags/scene.hpp"
#include "pags/sh.hpp"
#include "test_helpers.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

namespace pags {
namespace {

using testing::random_quat;
using testing::urand;

TEST(Covariance, IdentityParamsGiveIdentity) {
    const Mat3 c = covariance_from_params(Vec3::Zero(), identity_quat());
    EXPECT_TRUE(c.isApprox(Mat3::Identity(), 1e-15));
}

TEST(Covariance, ScaleIsSquared) {
    const Mat3 c = covariance_from_params(Vec3(std::log(2.0), 0, 0), identity_quat());
    EXPECT_NEAR(c(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(c(1, 1), 1.0, 1e-12);
    EXPECT_NEAR(c(2, 2), 1.0, 1e-12);
    EXPECT_NEAR(c(0, 1), 0.0, 1e-15);
}

TEST(Covariance, IsotropicInvariantUnderRotation) {
    const Quat rz = quat::from_axis_angle(Vec3::UnitZ(), std::numbers::pi / 2);
    const Mat3 c = covariance_from_params(Vec3::Zero(), rz);
    EXPECT_TRUE(c.isApprox(Mat3::Identity(), 1e-12));
}

TEST(Covariance, RandomParamsAreSymmetricPositiveDefinite) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        const Vec3 ls(urand(rng, -5, 2), urand(rng, -5, 2), urand(rng, -5, 2));
        const Mat3 c = covariance_from_params(ls, random_quat(rng));
        EXPECT_LE((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-9);
        const Eigen::SelfAdjointEigenSolver<Mat3> es(c);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0) << "trial " << trial;
    }
}

TEST(Quaternion, MatrixGradientMatchesFiniteDifference) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Quat q = random_quat(rng) * urand(rng, 0.5, 2.0);
        Mat3 w;
        for (int i = 0; i < 9; ++i) w.data()[i] = urand(rng, -1, 1);
        const Quat g = quat::matrix_grad_to_quat(q, w);
        for (int k = 0; k < 4; ++k) {
            Quat a = q, b = q;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            const double fd = ((quat::to_matrix(a).cwiseProduct(w)).sum() - (quat::to_matrix(b).cwiseProduct(w)).sum()) / 2e-6;
            EXPECT_NEAR(g[k], fd, 1e-6);
        }
    }
}

TEST(SphericalHarmonics, ZeroCoefficientsGiveHalfGray) {
    const ShBlock sh(9, Vec3::Zero());
    const Vec3 c = evaluate_sh(sh, Vec3(0.3, -0.4, 0.866).normalized(), 2);
    EXPECT_EQ(c, Vec3::Constant(0.5));
}

TEST(SphericalHarmonics, DcTermUsesTabulatedY00) {
    // Y_00 = 1 / (2 sqrt(pi)) = 0.28209479...
    const double y00 = 0.5 / std::sqrt(std::numbers::pi);
    EXPECT_NEAR(y00, 0.2820948, 1e-7);
    const ShBlock sh{Vec3(1, 0, 0)};
    const Vec3 c = evaluate_sh(sh, Vec3::UnitX(), 0);
    EXPECT_NEAR(c.x(), 0.7820948, 1e-7);
    EXPECT_NEAR(c.y(), 0.5, 1e-15);
    EXPECT_NEAR(c.z(), 0.5, 1e-15);
}

TEST(SphericalHarmonics, DegreeOneIsOdd) {
    ShBlock sh(4, Vec3::Zero());
    sh[1] = Vec3(0.1, 0.0, -0.05);
    sh[2] = Vec3(0.05, 0.2, 0.0);
    sh[3] = Vec3(-0.1, 0.1, 0.1);
    const Vec3 d = Vec3(0.2, -0.5, 0.7).normalized();
    const Vec3 plus = evaluate_sh(sh, d, 1) - Vec3::Constant(0.5);
    const Vec3 minus = evaluate_sh(sh, -d, 1) - Vec3::Constant(0.5);
    EXPECT_TRUE((plus + minus).isZero(1e-15));
    EXPECT_GT(plus.norm(), 0.01);
}

TEST(SphericalHarmonics, RejectsDegreeAboveTwo) {
    const ShBlock sh(16, Vec3::Zero());
    EXPECT_THROW(evaluate_sh(sh, Vec3::UnitZ(), 3), UnsupportedDegreeError);
    EXPECT_THROW(sh_degree_for_count(16), UnsupportedDegreeError);
}

TEST(SphericalHarmonics, BasisIsOrthonormalOnSphere) {
    // Monte-Carlo integral of Y_i Y_j over the sphere ~ delta_ij.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0, 1);
    Eigen::Matrix<double, 9, 9> gram = Eigen::Matrix<double, 9, 9>::Zero();
    const int samples = 200000;
    for (int s = 0; s < samples; ++s) {
        const Vec3 d = Vec3(n(rng), n(rng), n(rng)).normalized();
        const auto y = sh_basis(d, 2);
        for (int i = 0; i < 9; ++i)
            for (int j = 0; j < 9; ++j) gram(i, j) += y[i] * y[j];
    }
    gram *= 4.0 * std::numbers::pi / samples;
    EXPECT_LT((gram - Eigen::Matrix<double, 9, 9>::Identity()).cwiseAbs().maxCoeff(), 0.03);
}

TEST(TimeVaryingSh, OrderZeroIsTimeIndependent) {
    std::mt19937_64 rng(9);
    TimeVaryingSH t = TimeVaryingSH::zeros(2, 0, 4.0);
    t.a0 = testing::random_sh(rng, 2, 0.8, 0.1);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 d = random_quat(rng).head<3>().normalized();
        const double time = urand(rng, -10, 10);
        EXPECT_EQ(evaluate_time_varying_sh(t, time, d), evaluate_sh(t.a0, d, 2));
    }
}

TEST(TimeVaryingSh, TimeZeroAddsCosineBlocks) {
    std::mt19937_64 rng(10);
    TimeVaryingSH t = TimeVaryingSH::zeros(1, 2, 3.0);
    t.a0 = testing::random_sh(rng, 1, 0.5, 0.1);
    for (auto& b : t.cos_coeffs) b = testing::random_sh(rng, 1, 0.2, 0.05);
    for (auto& b : t.sin_coeffs) b = testing::random_sh(rng, 1, 0.2, 0.05);
    ShBlock expect = t.a0;
    for (const auto& b : t.cos_coeffs)
        for (std::size_t k = 0; k < expect.size(); ++k) expect[k] += b[k];
    const Vec3 d = Vec3(0.1, 0.2, 0.97).normalized();
    EXPECT_TRUE(evaluate_time_varying_sh(t, 0.0, d).isApprox(evaluate_sh(expect, d, 1), 1e-14));
}

TEST(TimeVaryingSh, IsPeriodic) {
    std::mt19937_64 rng(12);
    TimeVaryingSH t = TimeVaryingSH::zeros(2, 1, 2.5);
    t.a0 = testing::random_sh(rng, 2, 0.5, 0.05);
    t.cos_coeffs[0] = testing::random_sh(rng, 2, 0.3, 0.05);
    t.sin_coeffs[0] = testing::random_sh(rng, 2, 0.3, 0.05);
    const Vec3 d = Vec3(-0.3, 0.2, 0.9).normalized();
    for (double time : {0.0, 0.3, 1.1, 2.0}) {
        EXPECT_TRUE(evaluate_time_varying_sh(t, time, d).isApprox(evaluate_time_varying_sh(t, time + 2.5, d), 1e-12));
    }
}

SceneModel scene_with_object(const ObjectPose& pose) {
    SceneModel s;
    GaussianPrimitive st;
    st.id = 0;
    st.mean = Vec3(1, 2, 3);
    s.static_gaussians.push_back(st);
    DynamicObject obj;
    obj.object_id = 1;
    DynamicGaussian dg;
    dg.primitive.id = 1;
    dg.primitive.mean = Vec3::Zero();
    dg.appearance = TimeVaryingSH::zeros(0, 1, 1.0);
    obj.gaussians.push_back(dg);
    obj.poses.push_back(pose);
    s.dynamic_objects.push_back(obj);
    return s;
}

TEST(ComposeWorld, StaticOnlyIsIdentity) {
    std::mt19937_64 rng(1);
    SceneModel s;
    for (int i = 0; i < 10; ++i) s.static_gaussians.push_back(testing::random_gaussian(rng, i, 1));
    const auto w = compose_world(s, 3.0);
    ASSERT_EQ(w.size(), s.static_gaussians.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        EXPECT_EQ(w[i].id, s.static_gaussians[i].id);
        EXPECT_EQ(w[i].mean, s.static_gaussians[i].mean);
        EXPECT_EQ(w[i].rotation, s.static_gaussians[i].rotation);
        EXPECT_EQ(w[i].sh, s.static_gaussians[i].sh);
    }
}

TEST(ComposeWorld, IdentityPoseKeepsLocalCoordinates) {
    ObjectPose p;
    SceneModel s = scene_with_object(p);
    s.dynamic_objects[0].gaussians[0].primitive.mean = Vec3(0.5, -1, 2);
    const auto w = compose_world(s, 0.0);
    EXPECT_EQ(w[1].mean, Vec3(0.5, -1, 2));
}

TEST(ComposeWorld, PureTranslation) {
    ObjectPose p;
    p.translation = Vec3(1, 0, 0);
    const auto w = compose_world(scene_with_object(p), 0.0);
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[1].mean, Vec3(1, 0, 0));
    EXPECT_EQ(w[1].id, 1);
}

TEST(ComposeWorld, PreservesCountAndIds) {
    std::mt19937_64 rng(2);
    SceneModel s;
    for (int i = 0; i < 5; ++i) s.static_gaussians.push_back(testing::random_gaussian(rng, i, 0));
    DynamicObject obj;
    for (int i = 0; i < 4; ++i) {
        DynamicGaussian dg;
        dg.primitive = testing::random_gaussian(rng, 10 + i, 0);
        dg.appearance = TimeVaryingSH::zeros(0, 1, 1.0);
        obj.gaussians.push_back(dg);
    }
    for (int k = 0; k < 3; ++k) obj.poses.push_back({double(k), random_quat(rng), Vec3(k, 0, 0)});
    s.dynamic_objects.push_back(obj);
    for (double t : {0.0, 0.4, 1.6, 9.0}) {
        const auto w = compose_world(s, t);
        ASSERT_EQ(w.size(), 9u);
        std::vector<GaussianId> ids;
        for (const auto& g : w) ids.push_back(g.id);
        EXPECT_EQ(ids, (std::vector<GaussianId>{0, 1, 2, 3, 4, 10, 11, 12, 13}));
    }
}

TEST(ComposeWorld, PoseLookupNearestAndInterpolated) {
    DynamicObject obj;
    obj.poses.push_back({0.0, identity_quat(), Vec3(0, 0, 0)});
    obj.poses.push_back({1.0, quat::from_axis_angle(Vec3::UnitZ(), 1.0), Vec3(2, 0, 0)});
    EXPECT_EQ(nearest_pose_index(obj, 0.4), 0u);
    EXPECT_EQ(nearest_pose_index(obj, 0.6), 1u);
    EXPECT_EQ(nearest_pose_index(obj, -3.0), 0u);
    EXPECT_EQ(nearest_pose_index(obj, 7.0), 1u);
    const ObjectPose mid = object_pose_at(obj, 0.25, PoseLookup::Interpolate);
    EXPECT_NEAR(mid.translation.x(), 0.5, 1e-12);
    EXPECT_TRUE(mid.rotation.isApprox(quat::from_axis_angle(Vec3::UnitZ(), 0.25), 1e-12));
    DynamicObject empty;
    EXPECT_THROW(nearest_pose_index(empty, 0.0), Error);
}

TEST(SceneValidate, DetectsDuplicateIdsAndUnsortedPoses) {
    ObjectPose p;
    SceneModel s = scene_with_object(p);
    EXPECT_NO_THROW(s.validate());
    s.dynamic_objects[0].gaussians[0].primitive.id = 0;
    EXPECT_THROW(s.validate(), Error);
    s.dynamic_objects[0].gaussians[0].primitive.id = 5;
    s.dynamic_objects[0].poses.push_back(p);
    EXPECT_THROW(s.validate(), Error);
    EXPECT_EQ(scene_with_object(ObjectPose{}).next_id(), 2);
}

TEST(Projection, OnAxisPinholeCentre) {
    const CameraView cam = testing::axis_camera(100, 100.0);
    GaussianPrimitive g;
    g.mean = Vec3(0, 0, 2);
    const auto p = project_gaussian(g, cam);
    EXPECT_FALSE(p.culled);
    EXPECT_EQ(p.mean2d, Vec2(50, 50));
    EXPECT_EQ(p.depth, 2.0);
}

TEST(Projection, IsotropicCovarianceMatchesAnalyticJacobian) {
    CameraView cam = testing::axis_camera(100, 100.0);
    cam.intrinsics.fy = 80.0;
    const double s = 0.05, z = 2.5;
    GaussianPrimitive g;
    g.mean = Vec3(0, 0, z);
    g.log_scale = Vec3::Constant(std::log(s));
    g.rotation = quat::from_axis_angle(Vec3(1, 2, 3), 0.7);
    const auto p = project_gaussian(g, cam);
    // J = diag(fx/z, fy/z) on the axis, so cov2d = diag((fx s/z)^2, (fy s/z)^2) + 0.3 I
    EXPECT_NEAR(p.cov2d(0, 0), std::pow(100.0 * s / z, 2) + 0.3, 1e-12);
    EXPECT_NEAR(p.cov2d(1, 1), std::pow(80.0 * s / z, 2) + 0.3, 1e-12);
    EXPECT_NEAR(p.cov2d(0, 1), 0.0, 1e-12);
}

TEST(Projection, BehindNearPlaneIsCulled) {
    const CameraView cam = testing::axis_camera(100, 100.0);
    GaussianPrimitive g;
    g.mean = Vec3(0, 0, kZNear / 2);
    EXPECT_TRUE(project_gaussian(g, cam).culled);
    g.mean = Vec3(0, 0, -1);
    EXPECT_TRUE(project_gaussian(g, cam).culled);
}

TEST(Projection, DepthIncreasesWithCameraZ) {
    const CameraView cam = CameraView::look_at(Vec3(1, 2, -3), Vec3(0, 0, 5), Vec3(0, -1, 0),
                                               testing::square_intrinsics(64, 60));
    const Vec3 axis = (Vec3(0, 0, 5) - Vec3(1, 2, -3)).normalized();
    double last = -1e300;
    for (double d = 0.5; d < 20; d += 0.5) {
        GaussianPrimitive g;
        g.mean = Vec3(1, 2, -3) + d * axis + Vec3(0.01, 0.02, 0);
        const auto p = project_gaussian(g, cam);
        EXPECT_GT(p.depth, last);
        last = p.depth;
    }
}

TEST(Projection, InPlaneCameraRotationRotatesCovariance) {
    std::mt19937_64 rng(4);
    const CameraView cam = testing::axis_camera(64, 70.0);
    for (int trial = 0; trial < 20; ++trial) {
        const GaussianPrimitive g = testing::random_gaussian(rng, 0, 0);
        const double th = urand(rng, -3, 3);
        CameraView rolled = cam;
        rolled.world_to_camera.rotation =
            quat::multiply(quat::from_axis_angle(Vec3::UnitZ(), th), cam.world_to_camera.rotation);
        const auto a = project_gaussian(g, cam);
        const auto b = project_gaussian(g, rolled);
        EXPECT_NEAR(a.depth, b.depth, 1e-12);
        Mat2 r;
        r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
        const Vec2 c(32, 32);
        EXPECT_TRUE((r * (a.mean2d - c) + c).isApprox(b.mean2d, 1e-9));
        EXPECT_LT((r * a.cov2d * r.transpose() - b.cov2d).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(Camera, LookAtPlacesTargetOnAxis) {
    const CameraView cam = CameraView::look_at(Vec3(3, 1, -2), Vec3(0, 0, 4), Vec3(0, -1, 0),
                                               testing::square_intrinsics(50, 40));
    const Vec3 t = cam.to_camera(Vec3(0, 0, 4));
    EXPECT_NEAR(t.x(), 0.0, 1e-12);
    EXPECT_NEAR(t.y(), 0.0, 1e-12);
    EXPECT_GT(t.z(), 0.0);
    EXPECT_TRUE(cam.camera_center().isApprox(Vec3(3, 1, -2), 1e-12));
}

}  // namespace
}  // namespace pags
