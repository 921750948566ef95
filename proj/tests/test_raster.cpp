// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace gsdiff;

namespace {

Gaussian flat_splat(const Vec3& pos, double scale, double opacity, const Encoding& e, InstanceId id = 1) {
    Gaussian g;
    g.position = pos;
    g.scale = Vec3(scale, scale, scale);
    g.opacity = opacity;
    g.encoding = e;
    g.instance_id = id;
    return g;
}

Encoding basis(int k) {
    Encoding e = Encoding::Zero();
    e[k] = 1.0;
    return e;
}

} // namespace

TEST(Project, OnAxisPointMapsToPrincipalPoint) {
    const Camera cam = oracle::front_camera(32, 24, 30);
    const auto cloud = GaussianCloud::with_gaussians({flat_splat(Vec3(0, 0, 4), 0.1, 0.5, basis(0))});
    const SplatList list = project(cloud, TimeStamp::before, cam);
    ASSERT_EQ(list.size(), 1u);
    EXPECT_NEAR(list.splats[0].mean.x(), 16.0, 1e-12);
    EXPECT_NEAR(list.splats[0].mean.y(), 12.0, 1e-12);
    EXPECT_NEAR(list.splats[0].depth, 4.0, 1e-12);
}

TEST(Project, BehindCameraIsCulled) {
    const Camera cam = oracle::front_camera(16, 16, 20);
    const auto cloud = GaussianCloud::with_gaussians({flat_splat(Vec3(0, 0, -2), 0.1, 0.5, basis(0))});
    EXPECT_TRUE(project(cloud, TimeStamp::before, cam).empty());
}

TEST(Project, CovarianceMatchesSampledProjection) {
    // Push 1e5 points drawn from the 3D Gaussian through the linearised camera
    // and compare the empirical 2D covariance (plus the 0.3 floor).
    std::mt19937_64 rng(17);
    Gaussian g = flat_splat(Vec3(0.2, -0.1, 5.0), 0.0, 0.9, basis(0));
    g.scale = Vec3(0.3, 0.1, 0.05);
    g.rotation = oracle::axis_angle(Vec3(1, 0.5, 0.2), 0.9);
    Camera cam = oracle::front_camera(64, 64, 60);
    const SplatList list = project(GaussianCloud::with_gaussians({g}), TimeStamp::before, cam);
    ASSERT_EQ(list.size(), 1u);

    const Mat3 r = oracle::rotation_matrix(g.rotation);
    std::normal_distribution<double> n(0.0, 1.0);
    const Vec3 c = g.position;
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / c.z(), 0, -cam.fx * c.x() / (c.z() * c.z()), 0, cam.fy / c.z(), -cam.fy * c.y() / (c.z() * c.z());
    const int samples = 100000;
    Vec2 mean = Vec2::Zero();
    Mat2 second = Mat2::Zero();
    for (int i = 0; i < samples; ++i) {
        const Vec3 local(g.scale.x() * n(rng), g.scale.y() * n(rng), g.scale.z() * n(rng));
        const Vec2 q = j * (r * local);
        mean += q;
        second += q * q.transpose();
    }
    mean /= samples;
    const Mat2 cov = second / samples - mean * mean.transpose() + 0.3 * Mat2::Identity();
    const Mat2 got = list.splats[0].cov;
    EXPECT_LT((got - cov).norm() / cov.norm(), 0.01) << got << "\nvs\n" << cov;
}

TEST(Composite, SingleOpaqueSplatGivesItsEncoding) {
    const Camera cam = oracle::front_camera(9, 9, 10);
    RenderOptions opt;
    opt.alpha_clamp = 1.0;
    std::mt19937_64 rng(1);
    const Encoding e = oracle::random_encoding(rng);
    const auto cloud = GaussianCloud::with_gaussians({flat_splat(Vec3(0.0, 0.0, 2.0), 0.5, 1.0, e)});
    const FrameBundle fb = render_view(cloud, TimeStamp::before, cam, opt);
    // Pixel (4,4) has its centre at (4.5,4.5), the projected mean.
    const std::size_t p = fb.pixel(4, 4);
    EXPECT_NEAR(fb.alpha[p], 1.0, 1e-12);
    EXPECT_TRUE(fb.feature_vector(p).isApprox(e, 1e-12));
}

TEST(Composite, TwoSplatsFrontToBack) {
    const Camera cam = oracle::front_camera(9, 9, 10);
    const auto cloud = GaussianCloud::with_gaussians(
        {flat_splat(Vec3(0, 0, 3.0), 2.0, 0.5, basis(1), 2), flat_splat(Vec3(0, 0, 2.0), 2.0, 0.6, basis(0), 1)});
    const FrameBundle fb = render_view(cloud, TimeStamp::before, cam);
    const std::size_t p = fb.pixel(4, 4);
    EXPECT_NEAR(fb.alpha[p], 0.8, 1e-12);
    EXPECT_NEAR(fb.feature(0, p), 0.6, 1e-12);
    EXPECT_NEAR(fb.feature(1, p), 0.2, 1e-12);
    EXPECT_EQ(fb.id_map[p], 1u);
}

TEST(Composite, AlphaClampAndBackgroundId) {
    const Camera cam = oracle::front_camera(9, 9, 10);
    const auto cloud = GaussianCloud::with_gaussians({flat_splat(Vec3(0, 0, 2.0), 0.5, 1.0, basis(0))});
    const FrameBundle fb = render_view(cloud, TimeStamp::before, cam);
    EXPECT_NEAR(fb.alpha[fb.pixel(4, 4)], 0.99, 1e-12);
    // Corner pixels see only the faint tail of the splat.
    EXPECT_LT(fb.alpha[fb.pixel(0, 0)], 0.5);
    EXPECT_EQ(fb.id_map[fb.pixel(0, 0)], 0u);
}

TEST(Composite, MatchesOracleOnRandomScenes) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const GaussianCloud cloud = oracle::random_cloud(rng, 12);
        const Camera cam = oracle::front_camera(20, 16, 18);
        const FrameBundle fb = render_view(cloud, TimeStamp::before, cam);
        const oracle::OracleFrame want = oracle::composite(cloud, TimeStamp::before, cam);
        for (std::size_t p = 0; p < fb.pixel_count(); ++p) {
            for (int c = 0; c < kEncodingDim; ++c) ASSERT_NEAR(fb.feature(c, p), want.features[p][c], 1e-3);
            ASSERT_NEAR(fb.alpha[p], want.alpha[p], 1e-3);
        }
    }
}

TEST(Composite, DeltasAreApplied) {
    std::mt19937_64 rng(7);
    GaussianCloud cloud = oracle::random_cloud(rng, 6);
    DeltaTable& after = cloud.delta_table(TimeStamp::after);
    for (auto& d : after) {
        d.d_position = Vec3(0.1, -0.05, 0.2);
        d.d_rotation = oracle::random_rotation(rng);
        d.d_log_scale = Vec3(0.1, -0.2, 0.05);
    }
    const Camera cam = oracle::front_camera(16, 16, 16);
    const FrameBundle fb = render_view(cloud, TimeStamp::after, cam);
    const oracle::OracleFrame want = oracle::composite(cloud, TimeStamp::after, cam);
    for (std::size_t p = 0; p < fb.pixel_count(); ++p)
        for (int c = 0; c < kEncodingDim; ++c) ASSERT_NEAR(fb.feature(c, p), want.features[p][c], 1e-3);
}

TEST(Render, EmptyCloudIsBlank) {
    const Camera cam = oracle::front_camera(8, 8, 8);
    const FrameBundle fb = render_view(GaussianCloud::with_gaussians({}), TimeStamp::before, cam);
    EXPECT_EQ(fb.pixel_count(), 64u);
    for (double a : fb.alpha) EXPECT_EQ(a, 0.0);
    for (InstanceId id : fb.id_map) EXPECT_EQ(id, 0u);
    for (double f : fb.features) EXPECT_EQ(f, 0.0);
}

TEST(Render, DeterministicAcrossThreadCounts) {
    std::mt19937_64 rng(5);
    const GaussianCloud cloud = oracle::random_cloud(rng, 30);
    const Camera cam = oracle::front_camera(32, 32, 30);
    RenderOptions one;
    RenderOptions many;
    many.threads = 8;
    const FrameBundle a = render_view(cloud, TimeStamp::before, cam, one);
    const FrameBundle b = render_view(cloud, TimeStamp::before, cam, many);
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(a.features, b.features);
    EXPECT_EQ(a.id_map, b.id_map);
    EXPECT_EQ(a.contributions.weight, b.contributions.weight);
}

TEST(Render, ZeroDeltasGiveIdenticalEpochs) {
    std::mt19937_64 rng(6);
    const GaussianCloud cloud = oracle::random_cloud(rng, 10);
    const Camera cam = oracle::front_camera(16, 16, 16);
    const FrameBundle a = render_view(cloud, TimeStamp::before, cam);
    const FrameBundle b = render_view(cloud, TimeStamp::after, cam);
    EXPECT_EQ(a.color, b.color);
    EXPECT_EQ(a.features, b.features);
}

TEST(Render, RecompositeMatchesFreshRender) {
    std::mt19937_64 rng(8);
    GaussianCloud cloud = oracle::random_cloud(rng, 10);
    const Camera cam = oracle::front_camera(16, 16, 16);
    FrameBundle fb = render_view(cloud, TimeStamp::before, cam);
    for (auto& g : cloud.gaussians) g.encoding = oracle::random_encoding(rng);
    recomposite_features(fb, cloud);
    const FrameBundle fresh = render_view(cloud, TimeStamp::before, cam);
    for (std::size_t i = 0; i < fb.features.size(); ++i) ASSERT_NEAR(fb.features[i], fresh.features[i], 1e-12);
}
